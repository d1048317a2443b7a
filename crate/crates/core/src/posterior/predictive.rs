use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::model::MixtureModel;
use super::sampling::{run_importance, run_metropolis, MhSettings, Tilt, WeightedMixture};
use super::regularized_factor;
use crate::error::{Error, Result};
use crate::mixing::MixingSample;
use crate::rng::{chunked, RngStream};
use crate::stats::{ess_from_log_weights, normalized_weights};

/// Smallest admissible eigenvalue of the design Gram relative to its largest.
pub const DESIGN_RANK_TOL: f64 = 1e-10;

/// Fails with `RankDeficientDesign` unless `λ_min ≥ DESIGN_RANK_TOL·λ_max`.
pub fn check_design_rank(gram: &DMatrix<f64>) -> Result<()> {
    let (lo, hi) = crate::linalg::eigen_range(gram);
    let threshold = DESIGN_RANK_TOL * hi.max(0.0);
    if !(hi > 0.0) || lo < threshold {
        return Err(Error::RankDeficientDesign {
            min_eigenvalue: lo,
            threshold,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerChoice {
    Is { n: usize },
    Mh(MhSettings),
}

/// Predictive law at a test input as a mixture over the posterior mixing
/// measure, summarized by its first two moments.
#[derive(Debug, Clone)]
pub struct PredictiveMixture {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub mean_se: DVector<f64>,
    /// Standard errors of the diagonal of `cov`.
    pub var_se: DVector<f64>,
    pub mixture: WeightedMixture,
}

/// Law of total variance over the mixture, with delta-method errors.
fn mixture_moments(mix: &WeightedMixture) -> (DVector<f64>, DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let n = mix.len();
    let preds: Vec<_> = (0..n).map(|i| mix.predictive(i).expect("predictive draws")).collect();
    let d = preds[0].mean.len();
    let w: Vec<f64> = match mix.sampler {
        super::SamplerKind::Importance => mix.weights(),
        super::SamplerKind::Metropolis => vec![1.0 / n as f64; n],
    };
    let mut mean = DVector::zeros(d);
    let mut second = DMatrix::zeros(d, d);
    for (wi, p) in w.iter().zip(&preds) {
        mean += &p.mean * *wi;
        second += (&p.cov + &p.mean * p.mean.transpose()) * *wi;
    }
    let cov = &second - &mean * mean.transpose();
    let mut mean_se = DVector::zeros(d);
    let mut var_se = DVector::zeros(d);
    for j in 0..d {
        let m: Vec<f64> = preds.iter().map(|p| p.mean[j]).collect();
        mean_se[j] = mix.mean_se(&m).1;
        let infl: Vec<f64> = preds
            .iter()
            .map(|p| {
                let g = p.cov[(j, j)] + p.mean[j] * p.mean[j];
                (g - second[(j, j)]) - 2.0 * mean[j] * (p.mean[j] - mean[j])
            })
            .collect();
        var_se[j] = mix.mean_se(&infl).1;
    }
    (mean, (&cov + cov.transpose()) * 0.5, mean_se, var_se)
}

/// Posterior predictive at `x0`: the model is enlarged by `x0`, the mixing
/// posterior is sampled on it (the training block is unchanged), and each
/// draw contributes its conditional Gaussian moments.
///
/// Unless `allow_rank_deficient` is set, the enlarged design must have a
/// definite Gram matrix.
pub fn predictive_mixture<M: MixtureModel>(
    model: &M,
    x0: &M::Input,
    y: &DVector<f64>,
    beta: f64,
    choice: &SamplerChoice,
    stream: &RngStream,
    allow_rank_deficient: bool,
) -> Result<PredictiveMixture> {
    let big = model.with_test_input(x0)?;
    if !allow_rank_deficient {
        check_design_rank(&big.design_gram())?;
    }
    let d = model.out_dim();
    let tilt = Tilt { data_scale: 1.0 };
    let mixture = match choice {
        SamplerChoice::Is { n } => run_importance(&big, y, beta, *n, stream, d, tilt)?,
        SamplerChoice::Mh(s) => run_metropolis(&big, y, beta, s, stream, d, tilt)?,
    };
    let (mean, cov, mean_se, var_se) = mixture_moments(&mixture);
    Ok(PredictiveMixture {
        mean,
        cov,
        mean_se,
        var_se,
        mixture,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Joint posterior of test and training outputs given one mixing draw:
/// precision `βΠ_0 + Σ⁻¹` and mean `β(βΠ_0 + Σ⁻¹)⁻¹ỹ`, evaluated in the
/// equivalent form `m = Σ_{·,1}A⁻¹y`, `C = Σ − Σ_{·,1}A⁻¹Σ_{1,·}` with
/// `A = Σ11 + β⁻¹𝟙`, which needs no inverse of `Σ`.
pub fn joint_posterior_moments<M: MixtureModel>(
    model: &M,
    x0: &M::Input,
    y: &DVector<f64>,
    beta: f64,
    mix: &MixingSample,
) -> Result<GaussianMoments> {
    let big = model.with_test_input(x0)?;
    check_design_rank(&big.design_gram())?;
    let d = model.out_dim();
    let sigma = big.kernel(mix)?;
    let n = sigma.nrows();
    if y.len() != n - d {
        return Err(Error::ShapeMismatch(format!("{} labels, expected {}", y.len(), n - d)));
    }
    let s_train = sigma.columns(d, n - d).into_owned();
    let a = regularized_factor(&s_train.rows(d, n - d).into_owned(), beta)?;
    let mean = &s_train * a.solve_vec(y);
    let w = a
        .lower()
        .solve_lower_triangular(&s_train.transpose())
        .expect("positive diagonal");
    let cov = &sigma - w.transpose() * w;
    Ok(GaussianMoments {
        mean,
        cov: (&cov + cov.transpose()) * 0.5,
    })
}

fn common_width<M: MixtureModel>(model: &M) -> Result<usize> {
    let dofs = model.mixing_dofs();
    match dofs.first() {
        Some(&n) if dofs.iter().all(|&m| m == n) => Ok(n),
        _ => Err(Error::InvalidSpec("the mean-field rescaling needs equal hidden widths".into())),
    }
}

/// Mean-field mixing posterior by importance sampling: log-weights
/// `−(N/2)Φ° − R/2` with `Φ° = yᵀ(Σ11 + β⁻¹𝟙)⁻¹y`, `R = log det(𝟙 + βΣ11)`.
pub fn meanfield_mixing<M: MixtureModel>(
    model: &M,
    y: &DVector<f64>,
    beta: f64,
    n: usize,
    stream: &RngStream,
) -> Result<WeightedMixture> {
    let width = common_width(model)?;
    run_importance(model, y, beta, n, stream, 0, Tilt { data_scale: width as f64 })
}

/// Metropolis counterpart of [`meanfield_mixing`], for widths where the
/// importance weights degenerate.
pub fn meanfield_mixing_mh<M: MixtureModel>(
    model: &M,
    y: &DVector<f64>,
    beta: f64,
    settings: &MhSettings,
    stream: &RngStream,
) -> Result<WeightedMixture> {
    let width = common_width(model)?;
    run_metropolis(model, y, beta, settings, stream, 0, Tilt { data_scale: width as f64 })
}

/// Weight-space posterior moments at the test output by importance
/// sampling prior weights with log-weight `−(β/2)‖y − S_train‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEstimate {
    pub mean: DVector<f64>,
    pub mean_se: DVector<f64>,
    pub var: DVector<f64>,
    pub var_se: DVector<f64>,
    pub ess: f64,
}

/// Brute-force oracle for [`predictive_mixture`]: samples network weights
/// from the prior on the enlarged inputs and weights by the Gaussian
/// likelihood of the training outputs.
pub fn weightspace_posterior_oracle<M: MixtureModel>(
    model: &M,
    x0: &M::Input,
    y: &DVector<f64>,
    beta: f64,
    n: usize,
    stream: &RngStream,
) -> Result<OracleEstimate> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument("beta must be positive and finite".into()));
    }
    let big = model.with_test_input(x0)?;
    let d = model.out_dim();
    let m = big.out_dim() * big.n_examples() - d;
    if y.len() != m {
        return Err(Error::ShapeMismatch(format!("{} labels, expected {m}", y.len())));
    }
    let parts = chunked(stream, n, |s, len| {
        let mut rng = s.rng();
        let mut log_w = Vec::with_capacity(len);
        let mut tests = Vec::with_capacity(len * d);
        for _ in 0..len {
            let out = big.weightspace_draw(&mut rng);
            let r2 = (out.rows(d, m) - y).norm_squared();
            log_w.push(-0.5 * beta * r2);
            tests.extend_from_slice(&out.as_slice()[..d]);
        }
        (log_w, tests)
    });
    let mut log_w = Vec::with_capacity(n);
    let mut tests = Vec::with_capacity(n * d);
    for (l, t) in parts {
        log_w.extend(l);
        tests.extend(t);
    }
    let w = normalized_weights(&log_w);
    let ess = ess_from_log_weights(&log_w);
    let mut est = OracleEstimate {
        mean: DVector::zeros(d),
        mean_se: DVector::zeros(d),
        var: DVector::zeros(d),
        var_se: DVector::zeros(d),
        ess,
    };
    for j in 0..d {
        let s = |k: usize| tests[k * d + j];
        let mean: f64 = (0..n).map(|k| w[k] * s(k)).sum();
        let second: f64 = (0..n).map(|k| w[k] * s(k) * s(k)).sum();
        let mut v_mean = 0.0;
        let mut v_var = 0.0;
        for k in 0..n {
            let dm = s(k) - mean;
            let infl = (s(k) * s(k) - second) - 2.0 * mean * dm;
            v_mean += w[k] * w[k] * dm * dm;
            v_var += w[k] * w[k] * infl * infl;
        }
        est.mean[j] = mean;
        est.var[j] = second - mean * mean;
        est.mean_se[j] = v_mean.sqrt();
        est.var_se[j] = v_var.sqrt();
    }
    Ok(est)
}
