//! Dataset ingestion.
//!
//! FC: CSV with a header row `x_1,…,x_{N0},y_1,…,y_D`, one example per row;
//! the `y` columns may be omitted for inputs-only files.
//! Conv: JSON `{"x": [example][channel][space], "y": [..]}` with `y` optional.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use super::CliError;
use crate::conv::ConvDataset;

#[derive(Debug, Clone, PartialEq)]
pub struct FcData {
    /// `N0×P` inputs.
    pub x: DMatrix<f64>,
    /// Labels ordered example-major, `D` per example.
    pub y: Option<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvData {
    pub x: Vec<DMatrix<f64>>,
    pub y: Option<DVector<f64>>,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read dataset: {e}")).in_file(path))
}

pub fn parse_fc_csv(text: &str, n0: usize, d: usize) -> Result<FcData, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::data(format!("bad header: {e}")).at(Some(1), None))?
        .iter()
        .map(str::to_string)
        .collect();
    let xs: Vec<String> = (1..=n0).map(|i| format!("x_{i}")).collect();
    let ys: Vec<String> = (1..=d).map(|i| format!("y_{i}")).collect();
    let with_y = header.len() == n0 + d;
    let expected: Vec<&String> = if with_y { xs.iter().chain(&ys).collect() } else { xs.iter().collect() };
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(CliError::data(format!(
            "header must be {} (labels optional), got {}",
            xs.iter().chain(&ys).cloned().collect::<Vec<_>>().join(","),
            header.join(",")
        ))
        .at(Some(1), Some(1)));
    }
    let mut cols: Vec<f64> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut p = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|pos| pos.line() as usize);
            CliError::data(format!("malformed row: {e}")).at(line, None)
        })?;
        let line = rec.position().map(|pos| pos.line() as usize);
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::data(format!("column {} is not a number: {field:?}", header[j])).at(line, Some(j + 1))
            })?;
            if !v.is_finite() {
                return Err(CliError::data(format!("column {} is not finite", header[j])).at(line, Some(j + 1)));
            }
            if j < n0 {
                cols.push(v);
            } else {
                labels.push(v);
            }
        }
        p += 1;
    }
    Ok(FcData {
        x: DMatrix::from_column_slice(n0, p, &cols),
        y: with_y.then(|| DVector::from_vec(labels)),
    })
}

pub fn load_fc(path: &Path, n0: usize, d: usize) -> Result<FcData, CliError> {
    parse_fc_csv(&read(path)?, n0, d).map_err(|e| e.in_file(path))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvJson {
    x: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    y: Option<Vec<f64>>,
}

pub fn parse_conv_json(text: &str, c0: usize, n0: usize) -> Result<ConvData, CliError> {
    let raw: ConvJson = serde_json::from_str(text)
        .map_err(|e| CliError::data(format!("malformed JSON: {e}")).at(Some(e.line()), Some(e.column())))?;
    let x = ConvDataset::inputs_from_nested(&raw.x)?;
    if let Some(bad) = x.iter().position(|m| m.nrows() != c0 || m.ncols() != n0) {
        return Err(CliError::data(format!(
            "example {bad} is {}x{}, expected {c0}x{n0} (channel x space)",
            x[bad].nrows(),
            x[bad].ncols()
        )));
    }
    let y = raw.y.map(DVector::from_vec);
    if let Some(y) = &y {
        if y.len() != x.len() {
            return Err(CliError::data(format!("{} inputs but {} labels", x.len(), y.len())));
        }
    }
    Ok(ConvData { x, y })
}

pub fn load_conv(path: &Path, c0: usize, n0: usize) -> Result<ConvData, CliError> {
    parse_conv_json(&read(path)?, c0, n0).map_err(|e| e.in_file(path))
}
