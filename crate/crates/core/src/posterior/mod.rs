//! Gaussian-likelihood posteriors over the mixing measure.
//!
//! Given a mixing draw, outputs on the training set and a test input are
//! jointly Gaussian with covariance `Σ`; labels add noise `β⁻¹𝟙`. Conditioning
//! yields the predictive moments, and integrating `e^{−Φ_β/2}` against the
//! prior mixing measure yields the posterior mixing measure.

mod model;
mod predictive;
mod sampling;

pub use model::{ConvModel, FcModel, MixtureModel};
pub use predictive::{
    check_design_rank, joint_posterior_moments, meanfield_mixing, meanfield_mixing_mh, predictive_mixture,
    weightspace_posterior_oracle, GaussianMoments, OracleEstimate, PredictiveMixture,
    SamplerChoice,
    DESIGN_RANK_TOL,
};
pub use sampling::{
    posterior_mixing_is, posterior_mixing_mh, MhSettings, SamplerKind, WeightedMixture, MIN_ESS,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, CholeskyFactor};

/// Blocks of the joint covariance over `[test; train]` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaBlocks {
    /// Test block, `D×D` (`1×1` for conv). Positive semidefinite.
    pub s00: DMatrix<f64>,
    /// Cross block, `D×(D·P)`.
    pub s01: DMatrix<f64>,
    /// Training block, `(D·P)×(D·P)`.
    pub s11: DMatrix<f64>,
}

impl SigmaBlocks {
    /// Splits a joint covariance whose first `d` coordinates are the test output.
    pub fn split(sigma: &DMatrix<f64>, d: usize) -> Result<Self> {
        let n = sigma.nrows();
        if sigma.ncols() != n || d > n {
            return Err(Error::ShapeMismatch("joint covariance must be square and larger than the test block".into()));
        }
        let m = n - d;
        Ok(Self {
            s00: sigma.view((0, 0), (d, d)).into_owned(),
            s01: sigma.view((0, d), (d, m)).into_owned(),
            s11: sigma.view((d, d), (m, m)).into_owned(),
        })
    }

    pub fn assemble(&self) -> DMatrix<f64> {
        let d = self.s00.nrows();
        let m = self.s11.nrows();
        let mut out = DMatrix::zeros(d + m, d + m);
        out.view_mut((0, 0), (d, d)).copy_from(&self.s00);
        out.view_mut((0, d), (d, m)).copy_from(&self.s01);
        out.view_mut((d, 0), (m, d)).copy_from(&self.s01.transpose());
        out.view_mut((d, d), (m, m)).copy_from(&self.s11);
        out
    }
}

/// Mean and covariance of the test output given one mixing draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be positive and finite, got {beta}")));
    }
    Ok(())
}

/// Cholesky factor of `Σ11 + β⁻¹𝟙`.
pub fn regularized_factor(s11: &DMatrix<f64>, beta: f64) -> Result<CholeskyFactor> {
    check_beta(beta)?;
    let n = s11.nrows();
    cholesky(&(s11 + DMatrix::<f64>::identity(n, n) / beta))
}

/// `Φ_β` from a factor of `A = Σ11 + β⁻¹𝟙`:
/// `yᵀA⁻¹y + log det(𝟙 + βΣ11) = yᵀA⁻¹y + n log β + log det A`.
pub fn phi_from_factor(a: &CholeskyFactor, y: &DVector<f64>, beta: f64) -> f64 {
    a.quad_form_inv(y) + a.dim() as f64 * beta.ln() + a.log_det()
}

/// `Φ_β(Σ11, y) = yᵀ(Σ11 + β⁻¹𝟙)⁻¹y + log det(𝟙 + βΣ11)`.
pub fn phi_beta(s11: &DMatrix<f64>, y: &DVector<f64>, beta: f64) -> Result<f64> {
    if s11.nrows() != y.len() || !s11.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "Sigma11 is {}x{} but there are {} labels",
            s11.nrows(),
            s11.ncols(),
            y.len()
        )));
    }
    let a = regularized_factor(s11, beta)?;
    Ok(phi_from_factor(&a, y, beta))
}

/// The two pieces `(Φ°, R)` of `Φ_β`: `Φ° = yᵀ(Σ11 + β⁻¹𝟙)⁻¹y` and
/// `R = log det(𝟙 + βΣ11)`.
pub fn phi_parts(s11: &DMatrix<f64>, y: &DVector<f64>, beta: f64) -> Result<(f64, f64)> {
    let a = regularized_factor(s11, beta)?;
    Ok((a.quad_form_inv(y), a.dim() as f64 * beta.ln() + a.log_det()))
}

/// `m0 = Σ01 A⁻¹ y`, `cov = Σ00 − Σ01 A⁻¹ Σ01ᵀ` with `A = Σ11 + β⁻¹𝟙`.
pub fn predictive_moments(blocks: &SigmaBlocks, y: &DVector<f64>, beta: f64) -> Result<PredictiveMoments> {
    if blocks.s11.nrows() != y.len() {
        return Err(Error::ShapeMismatch("label count does not match Sigma11".into()));
    }
    let a = regularized_factor(&blocks.s11, beta)?;
    Ok(predictive_from_factor(blocks, &a, y))
}

pub(crate) fn predictive_from_factor(blocks: &SigmaBlocks, a: &CholeskyFactor, y: &DVector<f64>) -> PredictiveMoments {
    let mean = &blocks.s01 * a.solve_vec(y);
    let w = a
        .lower()
        .solve_lower_triangular(&blocks.s01.transpose())
        .expect("positive diagonal");
    let cov = &blocks.s00 - w.transpose() * w;
    PredictiveMoments {
        mean,
        cov: (&cov + cov.transpose()) * 0.5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn phi_scalar_values() {
        let y = DVector::from_vec(vec![2.0]);
        let v = phi_beta(&dmatrix![1.0], &y, 1.0).unwrap();
        assert!((v - (2.0 + 2f64.ln())).abs() < 1e-14);
        assert_eq!(phi_beta(&dmatrix![0.0], &DVector::zeros(1), 3.0).unwrap(), 0.0);
        // small beta: Φ ≈ β(‖y‖² + tr Σ11)
        let s = dmatrix![2.0, 0.5; 0.5, 1.0];
        let y2 = DVector::from_vec(vec![1.0, -1.0]);
        let beta = 1e-6;
        let v = phi_beta(&s, &y2, beta).unwrap();
        assert!((v / beta - 5.0).abs() < 1e-4);
        assert!(phi_beta(&s, &y, 1.0).is_err());
        assert!(phi_beta(&s, &y2, 0.0).is_err());
    }

    #[test]
    fn phi_parts_sum_to_phi() {
        let s = dmatrix![2.0, 0.5; 0.5, 1.0];
        let y = DVector::from_vec(vec![1.0, -1.0]);
        let (a, r) = phi_parts(&s, &y, 7.0).unwrap();
        let direct_r = (DMatrix::<f64>::identity(2, 2) + &s * 7.0).determinant().ln();
        assert!((r - direct_r).abs() < 1e-12);
        assert!((a + r - phi_beta(&s, &y, 7.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn predictive_matches_joint_gaussian_conditioning() {
        let sigma = dmatrix![
            2.0, 0.6, 0.3, 0.1;
            0.6, 1.5, 0.4, 0.2;
            0.3, 0.4, 1.2, 0.3;
            0.1, 0.2, 0.3, 0.9
        ];
        let beta = 4.0;
        let y = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let b = SigmaBlocks::split(&sigma, 1).unwrap();
        assert_eq!(b.assemble(), sigma);
        let p = predictive_moments(&b, &y, beta).unwrap();
        // conditioning oracle via explicit inverse of the noisy training block
        let noisy = &b.s11 + DMatrix::<f64>::identity(3, 3) / beta;
        let inv = noisy.try_inverse().unwrap();
        let mean = &b.s01 * &inv * &y;
        let cov = &b.s00 - &b.s01 * inv * b.s01.transpose();
        assert!((p.mean - mean).amax() < 1e-10);
        assert!((p.cov - cov).amax() < 1e-10);
        let zero = predictive_moments(&b, &DVector::zeros(3), beta).unwrap();
        assert_eq!(zero.mean.amax(), 0.0);
    }
}
