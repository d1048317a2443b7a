//! Moment comparison of the Wishart-mixture and weight-space prior samplers.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::conv::{draw_conv_weightspace, ConvMixtureSampler, ConvNetworkSpec};
use crate::error::{Error, Result};
use crate::fc::{draw_weightspace, FcMixtureSampler, FcNetworkSpec};
use crate::rng::{chunked, RngStream, StreamRng};
use crate::stats::{z_scores, MeanAccumulator, MomentFeatures};

/// Per-feature moments of both samplers and their two-sample z-scores.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub labels: Vec<String>,
    pub mixture_mean: Vec<f64>,
    pub weightspace_mean: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub max_abs_z: f64,
    pub n_samples: usize,
}

impl EquivalenceReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_abs_z <= threshold
    }
}

fn accumulate<F>(features: &MomentFeatures, n: usize, stream: &RngStream, draw: F) -> MeanAccumulator
where
    F: Fn(&mut StreamRng) -> DVector<f64> + Sync,
{
    let parts = chunked(stream, n, |s, len| {
        let mut rng = s.rng();
        let mut acc = MeanAccumulator::new(features.len());
        let mut buf = Vec::with_capacity(features.len());
        for _ in 0..len {
            features.write(draw(&mut rng).as_slice(), &mut buf);
            acc.push_slice(&buf);
        }
        acc
    });
    MeanAccumulator::merge_all(parts, features.len())
}

fn compare<A, B>(dim: usize, n: usize, stream: &RngStream, mixture: A, weightspace: B) -> EquivalenceReport
where
    A: Fn(&mut StreamRng) -> DVector<f64> + Sync,
    B: Fn(&mut StreamRng) -> DVector<f64> + Sync,
{
    let features = MomentFeatures::standard(dim);
    let a = accumulate(&features, n, &stream.split(0), mixture);
    let b = accumulate(&features, n, &stream.split(1), weightspace);
    let z = z_scores(&a, &b);
    EquivalenceReport {
        labels: features.labels(),
        mixture_mean: a.mean().as_slice().to_vec(),
        weightspace_mean: b.mean().as_slice().to_vec(),
        max_abs_z: z.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
        z_scores: z,
        n_samples: n,
    }
}

/// Compares the samplers on `vec(S)`, `S` the `D×P` output.
pub fn fc_prior_equivalence(
    spec: &FcNetworkSpec,
    x: &DMatrix<f64>,
    n_samples: usize,
    stream: &RngStream,
) -> Result<EquivalenceReport> {
    let sampler = FcMixtureSampler::new(spec)?;
    if x.nrows() != spec.n0 {
        return Err(Error::ShapeMismatch("input rows must equal n0".into()));
    }
    let flat = |s: DMatrix<f64>| DVector::from_column_slice(s.as_slice());
    Ok(compare(
        spec.d * x.ncols(),
        n_samples,
        stream,
        |rng| flat(sampler.draw(x, rng)),
        |rng| flat(draw_weightspace(spec, x, rng).expect("shapes checked")),
    ))
}

pub fn conv_prior_equivalence(
    spec: &ConvNetworkSpec,
    x: &[DMatrix<f64>],
    n_samples: usize,
    stream: &RngStream,
) -> Result<EquivalenceReport> {
    let sampler = ConvMixtureSampler::new(spec)?;
    spec.check_input(x)?;
    Ok(compare(
        x.len(),
        n_samples,
        stream,
        |rng| sampler.draw(x, rng),
        |rng| draw_conv_weightspace(spec, x, rng).expect("shapes checked"),
    ))
}
