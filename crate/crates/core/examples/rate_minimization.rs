//! Lazy and mean-field rate functions, their minimizers and the scalar saddle.

use dlnk::fc::FcNetworkSpec;
use dlnk::ldp::{minimize_rate, saddle_scalar_solve, MeanFieldObjective, MinimizeOptions, RateObjective};
use dlnk::posterior::FcModel;
use nalgebra::{DMatrix, DVector};

fn main() -> dlnk::Result<()> {
    let opts = MinimizeOptions::default();
    let lazy = minimize_rate(&RateObjective::Lazy { dim: 2, depth: 3 }, None, &opts)?;
    println!("lazy: value {:.2e}, |grad| {:.1e}", lazy.value, lazy.gradient_norm);

    let spec = FcNetworkSpec::unit(4, vec![7, 7], 1)?;
    let x = DMatrix::from_column_slice(4, 3, &[1.0, 0.2, -0.5, 0.3, -0.3, 1.1, 0.4, -0.8, 0.7, -0.9, 1.2, 0.5]);
    let y = DVector::from_vec(vec![0.6, -0.2, 1.0]);
    let beta = 10.0;
    let model = FcModel::new(spec.clone(), x.clone())?;
    let obj = RateObjective::MeanField(MeanFieldObjective::new(&model, &y, beta)?);
    let mf = minimize_rate(&obj, None, &opts)?;
    let qs: Vec<f64> = mf.qs.iter().map(|q| q.matrix()[(0, 0)]).collect();
    println!("mean-field: Q = {qs:.6?}, infimum {:.6}, |grad| {:.1e}", mf.value, mf.gradient_norm);

    // α = P/N with labels scaled by √N reproduces the mean-field minimizer
    let n = 1e12f64;
    let s = saddle_scalar_solve(&spec, &x, &(&y * n.sqrt()), 3.0 / n, beta)?;
    println!("saddle: u0 = {:.6}, residual {:.1e}", s.u0, s.residual);
    for alpha in [0.1, 1.0, 10.0] {
        let s = saddle_scalar_solve(&spec, &x, &y, alpha, beta)?;
        println!("  alpha {alpha:>5}: u0 = {:.6}", s.u0);
    }
    Ok(())
}
