//! Fully-connected deep linear networks.
//!
//! Outputs are `D×P` matrices `S = W^L/√N_L ⋯ W^0/√N_0 · X`. The same law is
//! produced by the Wishart mixture `S = U_Lᵀ⋯U_1ᵀ Z X / √(N_0 λ*)` with
//! `Q_ℓ = U_ℓᵀU_ℓ ~ W_D(𝟙/N_ℓ, N_ℓ)` and `Z` a standard normal `D×N_0` matrix.
//! Vectorized outputs stack columns, so `vec(S)` has covariance
//! `XᵀX/(N_0λ*) ⊗ Q^(L)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::kron;
use crate::mixing::{isotropic_samplers, sample_wishart_tuple, MixingSample};
use crate::rng::{chunked, RngStream};
use crate::wishart::{standard_normal_matrix, BartlettSampler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcNetworkSpec {
    pub n0: usize,
    /// Hidden widths `[N_1, …, N_L]`.
    pub widths: Vec<usize>,
    /// Output dimension `D`.
    pub d: usize,
    /// Weight precisions `[λ_0, …, λ_L]`.
    pub precisions: Vec<f64>,
}

impl FcNetworkSpec {
    pub fn new(n0: usize, widths: Vec<usize>, d: usize, precisions: Vec<f64>) -> Result<Self> {
        let spec = Self {
            n0,
            widths,
            d,
            precisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// All precisions equal to one.
    pub fn unit(n0: usize, widths: Vec<usize>, d: usize) -> Result<Self> {
        let l = widths.len();
        Self::new(n0, widths, d, vec![1.0; l + 1])
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() {
            return Err(Error::InvalidSpec("at least one hidden layer is required".into()));
        }
        if self.n0 == 0 || self.d == 0 || self.widths.contains(&0) {
            return Err(Error::InvalidSpec("input, output and hidden widths must be positive".into()));
        }
        if self.precisions.len() != self.widths.len() + 1 {
            return Err(Error::InvalidSpec(format!(
                "expected {} precisions, got {}",
                self.widths.len() + 1,
                self.precisions.len()
            )));
        }
        if self.precisions.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidSpec("precisions must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    pub fn lambda_star(&self) -> f64 {
        self.precisions.iter().product()
    }

    /// Layer sizes `[N_0, N_1, …, N_L, D]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.widths.len() + 2);
        s.push(self.n0);
        s.extend_from_slice(&self.widths);
        s.push(self.d);
        s
    }

    /// The mixture representation needs every `N_ℓ > D`.
    pub fn check_mixture(&self) -> Result<()> {
        match self.widths.iter().find(|&&n| n <= self.d) {
            Some(&n) => Err(Error::DofTooSmall { dim: self.d, dof: n }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcDataset {
    /// `N_0×P`, one input per column.
    pub x: DMatrix<f64>,
    /// Labels stacked per example, length `D·P`.
    pub y: DVector<f64>,
    pub d: usize,
}

impl FcDataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, d: usize) -> Result<Self> {
        if d == 0 || y.len() != d * x.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} examples with output dimension {d}",
                y.len(),
                x.ncols()
            )));
        }
        Ok(Self { x, y, d })
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n0(&self) -> usize {
        self.x.nrows()
    }

    /// Labels as a `D×P` matrix.
    pub fn y_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.d, self.p(), self.y.as_slice())
    }
}

fn check_weights(spec: &FcNetworkSpec, weights: &[DMatrix<f64>]) -> Result<()> {
    let sizes = spec.layer_sizes();
    if weights.len() != sizes.len() - 1 {
        return Err(Error::ShapeMismatch(format!(
            "expected {} weight matrices, got {}",
            sizes.len() - 1,
            weights.len()
        )));
    }
    for (l, w) in weights.iter().enumerate() {
        if w.nrows() != sizes[l + 1] || w.ncols() != sizes[l] {
            return Err(Error::ShapeMismatch(format!(
                "weight {l} is {}x{}, expected {}x{}",
                w.nrows(),
                w.ncols(),
                sizes[l + 1],
                sizes[l]
            )));
        }
    }
    Ok(())
}

/// `S = W^L/√N_L ⋯ W^0/√N_0 · X`.
pub fn fc_forward(spec: &FcNetworkSpec, weights: &[DMatrix<f64>], x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_weights(spec, weights)?;
    if x.nrows() != spec.n0 {
        return Err(Error::ShapeMismatch(format!(
            "input has {} rows, expected {}",
            x.nrows(),
            spec.n0
        )));
    }
    let sizes = spec.layer_sizes();
    let mut h = x.clone();
    for (l, w) in weights.iter().enumerate() {
        h = w * h / (sizes[l] as f64).sqrt();
    }
    Ok(h)
}

/// Prior weights with entries `N(0, 1/λ_ℓ)`.
pub fn sample_weights<R: Rng + ?Sized>(spec: &FcNetworkSpec, rng: &mut R) -> Vec<DMatrix<f64>> {
    let sizes = spec.layer_sizes();
    (0..sizes.len() - 1)
        .map(|l| {
            let normal = Normal::new(0.0, spec.precisions[l].powf(-0.5)).expect("finite precision");
            DMatrix::from_fn(sizes[l + 1], sizes[l], |_, _| normal.sample(rng))
        })
        .collect()
}

/// One weight-space prior draw of the `D×P` output.
pub fn draw_weightspace<R: Rng + ?Sized>(spec: &FcNetworkSpec, x: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
    let w = sample_weights(spec, rng);
    fc_forward(spec, &w, x)
}

pub fn sample_prior_weightspace(
    spec: &FcNetworkSpec,
    x: &DMatrix<f64>,
    n_samples: usize,
    stream: &RngStream,
) -> Result<Vec<DMatrix<f64>>> {
    spec.validate()?;
    if x.nrows() != spec.n0 {
        return Err(Error::ShapeMismatch("input rows must equal n0".into()));
    }
    let parts = chunked(stream, n_samples, |s, len| {
        let mut rng = s.rng();
        (0..len)
            .map(|_| draw_weightspace(spec, x, &mut rng).expect("shapes checked"))
            .collect::<Vec<_>>()
    });
    Ok(parts.into_iter().flatten().collect())
}

/// Draws `(Q_1, …, Q_L)` from the prior mixing measure.
pub fn sample_mixing<R: Rng + ?Sized>(spec: &FcNetworkSpec, rng: &mut R) -> Result<MixingSample> {
    spec.validate()?;
    spec.check_mixture()?;
    let samplers = isotropic_samplers(spec.d, &spec.widths)?;
    Ok(sample_wishart_tuple(&samplers, rng))
}

/// `K0 = XᵀX/(N_0 λ*)`, the per-example Gram factor of the kernel.
pub fn gram_fc(spec: &FcNetworkSpec, x: &DMatrix<f64>) -> DMatrix<f64> {
    x.transpose() * x / (spec.n0 as f64 * spec.lambda_star())
}

/// `K_FC = XᵀX/(N_0λ*) ⊗ Q^(L)`; positive semidefinite, definite iff `XᵀX` is.
pub fn kernel_fc(spec: &FcNetworkSpec, x: &DMatrix<f64>, mix: &MixingSample) -> DMatrix<f64> {
    kron(&gram_fc(spec, x), mix.q_top.matrix())
}

/// Mixture draw given factors: `S = Bᵀ Z X / √(N_0 λ*)`.
pub fn draw_given_mixing<R: Rng + ?Sized>(
    spec: &FcNetworkSpec,
    x: &DMatrix<f64>,
    mix: &MixingSample,
    rng: &mut R,
) -> DMatrix<f64> {
    let z = standard_normal_matrix(spec.d, spec.n0, rng);
    mix.chain.transpose() * z * x / (spec.n0 as f64 * spec.lambda_star()).sqrt()
}

/// Prior sampler built once per spec, one fresh mixing draw per output draw.
#[derive(Debug, Clone)]
pub struct FcMixtureSampler {
    spec: FcNetworkSpec,
    samplers: Vec<BartlettSampler>,
}

impl FcMixtureSampler {
    pub fn new(spec: &FcNetworkSpec) -> Result<Self> {
        spec.validate()?;
        spec.check_mixture()?;
        Ok(Self {
            spec: spec.clone(),
            samplers: isotropic_samplers(spec.d, &spec.widths)?,
        })
    }

    pub fn mixing<R: Rng + ?Sized>(&self, rng: &mut R) -> MixingSample {
        sample_wishart_tuple(&self.samplers, rng)
    }

    pub fn draw<R: Rng + ?Sized>(&self, x: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
        let mix = self.mixing(rng);
        draw_given_mixing(&self.spec, x, &mix, rng)
    }
}

pub fn sample_prior_mixture(
    spec: &FcNetworkSpec,
    x: &DMatrix<f64>,
    n_samples: usize,
    stream: &RngStream,
) -> Result<Vec<DMatrix<f64>>> {
    let sampler = FcMixtureSampler::new(spec)?;
    if x.nrows() != spec.n0 {
        return Err(Error::ShapeMismatch("input rows must equal n0".into()));
    }
    let parts = chunked(stream, n_samples, |s, len| {
        let mut rng = s.rng();
        (0..len).map(|_| sampler.draw(x, &mut rng)).collect::<Vec<_>>()
    });
    Ok(parts.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn spec(n0: usize, widths: Vec<usize>, d: usize) -> FcNetworkSpec {
        FcNetworkSpec::unit(n0, widths, d).unwrap()
    }

    #[test]
    fn spec_contract() {
        assert!(FcNetworkSpec::unit(2, vec![], 1).is_err());
        assert!(FcNetworkSpec::new(2, vec![3], 1, vec![1.0, 0.0]).is_err());
        assert!(FcNetworkSpec::new(2, vec![3], 1, vec![1.0]).is_err());
        assert!(matches!(
            spec(2, vec![4, 2], 2).check_mixture(),
            Err(Error::DofTooSmall { dim: 2, dof: 2 })
        ));
    }

    #[test]
    fn identity_weights_truncate() {
        let s = spec(3, vec![3], 2);
        let w = vec![DMatrix::identity(3, 3), DMatrix::identity(2, 3)];
        let x = dmatrix![1.0, 2.0; 3.0, 4.0; 5.0, 6.0];
        let out = fc_forward(&s, &w, &x).unwrap();
        let expected = x.rows(0, 2) / 3.0;
        assert!((out - expected).amax() < 1e-15);
        assert!(fc_forward(&s, &w[..1], &x).is_err());
    }

    #[test]
    fn forward_matches_explicit_loops() {
        let s = spec(3, vec![4, 5], 2);
        let mut rng = RngStream::new(11, 0).rng();
        let w = sample_weights(&s, &mut rng);
        let x = standard_normal_matrix(3, 4, &mut rng);
        let out = fc_forward(&s, &w, &x).unwrap();
        let sizes = s.layer_sizes();
        for mu in 0..4 {
            let mut h: Vec<f64> = (0..3).map(|i| x[(i, mu)]).collect();
            for (l, wl) in w.iter().enumerate() {
                let mut next = vec![0.0; sizes[l + 1]];
                for (a, slot) in next.iter_mut().enumerate() {
                    for (b, hb) in h.iter().enumerate() {
                        *slot += wl[(a, b)] * hb;
                    }
                    *slot /= (sizes[l] as f64).sqrt();
                }
                h = next;
            }
            for d in 0..2 {
                assert!((out[(d, mu)] - h[d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn q_top_matches_factor_chain() {
        let s = spec(2, vec![5, 6, 7], 3);
        let mut rng = RngStream::new(4, 0).rng();
        let mix = sample_mixing(&s, &mut rng).unwrap();
        let mut b = DMatrix::<f64>::identity(3, 3);
        for q in &mix.qs {
            b *= q.cholesky().unwrap().upper();
        }
        let direct = b.transpose() * b;
        assert!(crate::linalg::rel_frobenius(mix.q_top.matrix(), &direct) < 1e-10);
    }

    #[test]
    fn kernel_special_cases() {
        let s = spec(2, vec![4], 2);
        let mix = MixingSample::identity(2, 1);
        let x = dmatrix![1.0, 0.0; 0.0, 1.0];
        let k = kernel_fc(&s, &x, &mix);
        assert_eq!(k, DMatrix::<f64>::identity(4, 4) * 0.5);

        let s1 = spec(3, vec![4], 1);
        let mut rng = RngStream::new(1, 0).rng();
        let m = sample_mixing(&s1, &mut rng).unwrap();
        let x1 = dmatrix![1.0; 2.0; 2.0];
        let k1 = kernel_fc(&s1, &x1, &m);
        assert!((k1[(0, 0)] - 9.0 * m.q_top.matrix()[(0, 0)] / 3.0).abs() < 1e-14);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let s = spec(2, vec![4, 4], 2);
        let x = DMatrix::zeros(2, 3);
        let st = RngStream::new(0, 0);
        for out in sample_prior_mixture(&s, &x, 50, &st).unwrap() {
            assert_eq!(out.amax(), 0.0);
        }
        for out in sample_prior_weightspace(&s, &x, 50, &st).unwrap() {
            assert_eq!(out.amax(), 0.0);
        }
    }

    #[test]
    fn pathwise_linearity_and_permutation() {
        let s = spec(3, vec![5, 4], 2);
        let mut rng = RngStream::new(8, 0).rng();
        let x = standard_normal_matrix(3, 4, &mut rng);
        let st = RngStream::new(9, 1);
        let base = sample_prior_mixture(&s, &x, 20, &st).unwrap();
        let scaled = sample_prior_mixture(&s, &(&x * 2.5), 20, &st).unwrap();
        let perm = [2usize, 0, 3, 1];
        let xp = DMatrix::from_fn(3, 4, |i, j| x[(i, perm[j])]);
        let permuted = sample_prior_mixture(&s, &xp, 20, &st).unwrap();
        for ((b, sc), p) in base.iter().zip(&scaled).zip(&permuted) {
            assert!((b * 2.5 - sc).amax() < 1e-12);
            for (j, &pj) in perm.iter().enumerate() {
                assert!((p.column(j) - b.column(pj)).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn large_width_concentrates() {
        let s = spec(1, vec![1_000_000], 2);
        let mut rng = RngStream::new(2, 0).rng();
        let m = sample_mixing(&s, &mut rng).unwrap();
        let dist = (m.qs[0].matrix() - DMatrix::<f64>::identity(2, 2)).norm();
        assert!(dist < 1e-2, "{dist}");
    }
}
