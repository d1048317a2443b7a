//! Bayesian evidence for single-output fully-connected networks.
//!
//! With `D = 1` every `Q_ℓ` is a scalar `Gamma(N_ℓ/2, rate N_ℓ/2)` variable and
//! the training covariance is `Σ11 = t·K` with `t = ∏Q_ℓ` and
//! `K = XᵀX/(N_0λ*)`. The evidence at inverse temperature `β` is
//! `Z_β = E[e^{−Φ_β/2}]` over that prior, so `Z_β = 1` without data.
//!
//! The zero-temperature value is normalized as
//! `Z_∞ = lim_{β→∞} β^{P/2} det(K)^{1/2} Z_β = E[t^{−P/2} e^{−yᵀK⁻¹y/(2t)}]`.
//! Writing `t = G·∏(2/N_ℓ)` with `G` a product of independent
//! `Gamma(N_ℓ/2, 1)` variables gives `Z_∞ = (∏N_ℓ/2)^{P/2} E[G^{−P/2} e^{−ω/G}]`
//! with `ω = yᵀK⁻¹y·∏N_ℓ/2^{L+1}`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fc::{gram_fc, FcNetworkSpec};
use crate::linalg::cholesky;
use crate::quadrature::integrate_log;
use crate::rng::{chunked, RngStream};
use crate::special::{ln_bessel_k, ln_gamma};
use crate::stats::log_sum_exp;

/// Tensor quadrature is offered up to this depth.
pub const MAX_QUADRATURE_LAYERS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Quadrature,
    MonteCarlo,
    BesselClosedForm,
    LogConvolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EvidenceMethod {
    /// Iterated adaptive quadrature over `ln Q_ℓ` (finite β only).
    Quadrature,
    MonteCarlo { n_samples: usize, stream: RngStream },
    /// `L = 1` Macdonald-function form (zero temperature only).
    BesselClosedForm,
    /// Product density by log-domain convolution, then 1-D quadrature
    /// (zero temperature only).
    LogConvolution,
}

impl EvidenceMethod {
    pub fn kind(&self) -> MethodKind {
        match self {
            Self::Quadrature => MethodKind::Quadrature,
            Self::MonteCarlo { .. } => MethodKind::MonteCarlo,
            Self::BesselClosedForm => MethodKind::BesselClosedForm,
            Self::LogConvolution => MethodKind::LogConvolution,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceResult {
    pub log_value: f64,
    pub method: MethodKind,
    /// Standard error (Monte Carlo) or error estimate (quadrature) of
    /// `log_value`, i.e. the relative error of the evidence.
    pub error_estimate: f64,
    pub warnings: Vec<String>,
}

impl EvidenceResult {
    fn exact(log_value: f64, method: MethodKind) -> Self {
        Self {
            log_value,
            method,
            error_estimate: 0.0,
            warnings: Vec::new(),
        }
    }
}

fn check_single_output(spec: &FcNetworkSpec, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    spec.validate()?;
    if spec.d != 1 {
        return Err(Error::InvalidSpec(format!("evidence needs output dimension 1, got {}", spec.d)));
    }
    if x.nrows() != spec.n0 || y.len() != x.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "inputs {}x{} and {} labels for n0 = {}",
            x.nrows(),
            x.ncols(),
            y.len(),
            spec.n0
        )));
    }
    Ok(())
}

/// `Φ_β(t) = Σ ỹ_i²/(t k_i + β⁻¹) + Σ ln(1 + β t k_i)` in the eigenbasis of `K`.
struct SpectralPhi {
    k: Vec<f64>,
    y2: Vec<f64>,
    beta: f64,
}

impl SpectralPhi {
    fn new(spec: &FcNetworkSpec, x: &DMatrix<f64>, y: &DVector<f64>, beta: f64) -> Self {
        let eig = gram_fc(spec, x).symmetric_eigen();
        let yt = eig.eigenvectors.transpose() * y;
        Self {
            k: eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect(),
            y2: yt.iter().map(|v| v * v).collect(),
            beta,
        }
    }

    fn phi(&self, t: f64) -> f64 {
        self.k
            .iter()
            .zip(&self.y2)
            .map(|(&k, &y2)| y2 / (t * k + 1.0 / self.beta) + (self.beta * t * k).ln_1p())
            .sum()
    }
}

/// `ln` of the `Gamma(a, rate a)` density of `Q = e^u`, as a density in `u`.
fn ln_prior_u(a: f64, u: f64) -> f64 {
    a * a.ln() + a * u - a * u.exp() - ln_gamma(a)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be positive and finite, got {beta}")));
    }
    Ok(())
}

/// Mean of `exp(l_i)` in log domain with the standard error of the log.
fn log_mean(log_terms: &[f64]) -> (f64, f64) {
    let n = log_terms.len() as f64;
    let lse = log_sum_exp(log_terms);
    let max = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_terms.iter().map(|l| (l - max).exp()).collect();
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (lse - n.ln(), (var / n).sqrt() / mean)
}

/// `Z_β = ∫ e^{−Φ_β/2} ∏ Gamma(N_ℓ/2, rate N_ℓ/2)(dQ_ℓ)`.
pub fn evidence_finite_beta(
    spec: &FcNetworkSpec,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: f64,
    method: &EvidenceMethod,
) -> Result<EvidenceResult> {
    check_single_output(spec, x, y)?;
    check_beta(beta)?;
    if x.ncols() == 0 {
        return Ok(EvidenceResult::exact(0.0, method.kind()));
    }
    let phi = SpectralPhi::new(spec, x, y, beta);
    let shapes: Vec<f64> = spec.widths.iter().map(|&n| 0.5 * n as f64).collect();
    match method {
        EvidenceMethod::Quadrature => {
            if shapes.len() > MAX_QUADRATURE_LAYERS {
                return Err(Error::MethodCostExceeded {
                    layers: shapes.len(),
                    max: MAX_QUADRATURE_LAYERS,
                });
            }
            let mut worst = 0.0f64;
            let mut converged = true;
            let log_value = nested(&shapes, 0.0, &phi, &mut worst, &mut converged);
            let mut warnings = Vec::new();
            if !converged {
                warnings.push("quadrature hit its interval cap; error estimate is indicative".into());
            }
            Ok(EvidenceResult {
                log_value,
                method: MethodKind::Quadrature,
                error_estimate: worst * shapes.len() as f64,
                warnings,
            })
        }
        EvidenceMethod::MonteCarlo { n_samples, stream } => {
            let gammas = shapes
                .iter()
                .map(|&a| Gamma::new(a, 1.0 / a).expect("positive shape"))
                .collect::<Vec<_>>();
            let parts = chunked(stream, *n_samples, |s, len| {
                let mut rng = s.rng();
                (0..len)
                    .map(|_| {
                        let t: f64 = gammas.iter().map(|g| g.sample(&mut rng)).product();
                        -0.5 * phi.phi(t)
                    })
                    .collect::<Vec<_>>()
            });
            let logs: Vec<f64> = parts.into_iter().flatten().collect();
            let (log_value, error_estimate) = log_mean(&logs);
            Ok(EvidenceResult {
                log_value,
                method: MethodKind::MonteCarlo,
                error_estimate,
                warnings: Vec::new(),
            })
        }
        _ => Err(Error::InvalidArgument(
            "finite-temperature evidence supports quadrature and monte_carlo".into(),
        )),
    }
}

const INNER_REL_TOL: f64 = 1e-11;

fn nested(shapes: &[f64], log_t: f64, phi: &SpectralPhi, worst: &mut f64, converged: &mut bool) -> f64 {
    let Some((&a, rest)) = shapes.split_first() else {
        return -0.5 * phi.phi(log_t.exp());
    };
    let mut inner_worst = 0.0f64;
    let mut inner_conv = true;
    let r = integrate_log(
        |u| ln_prior_u(a, u) + nested(rest, log_t + u, phi, &mut inner_worst, &mut inner_conv),
        0.0,
        2.0 / a.sqrt(),
        INNER_REL_TOL,
        400,
    );
    *worst = worst.max(r.rel_error + inner_worst);
    *converged &= r.converged && inner_conv;
    r.log_value
}

/// `ω = yᵀK⁻¹y·∏_{ℓ≥1}N_ℓ/2^{L+1}` with `K = XᵀX/(N_0λ*)`, i.e.
/// `yᵀ(XᵀX)⁻¹y·∏_{ℓ=0}^{L}λ_ℓN_ℓ/2^{L+1}`.
pub fn omega(spec: &FcNetworkSpec, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    check_single_output(spec, x, y)?;
    let k = gram_fc(spec, x);
    let f = cholesky(&k).map_err(|e| Error::SingularGram(format!("XᵀX is not invertible: {e}")))?;
    let widths: f64 = spec.widths.iter().map(|&n| n as f64).product();
    Ok(f.quad_form_inv(y) * widths / 2f64.powi(spec.depth() as i32 + 1))
}

/// `ln(β^{P/2} det(K)^{1/2})`, the factor taking `Z_β` to the normalization of
/// [`evidence_zero_temperature`].
pub fn zero_temperature_log_scale(spec: &FcNetworkSpec, x: &DMatrix<f64>, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let f = cholesky(&gram_fc(spec, x)).map_err(|e| Error::SingularGram(e.to_string()))?;
    Ok(0.5 * x.ncols() as f64 * beta.ln() + 0.5 * f.log_det())
}

/// `Z_∞ = (∏N_ℓ/2)^{P/2} E[G^{−P/2} e^{−ω/G}]`.
pub fn evidence_zero_temperature(
    spec: &FcNetworkSpec,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    method: &EvidenceMethod,
) -> Result<EvidenceResult> {
    let w = omega(spec, x, y)?;
    let p = x.ncols() as f64;
    let shapes: Vec<f64> = spec.widths.iter().map(|&n| 0.5 * n as f64).collect();
    let prefactor = 0.5 * p * shapes.iter().map(|a| a.ln()).sum::<f64>();
    let mut warnings = Vec::new();
    if x.ncols() < 3 {
        warnings.push(format!("P = {} < 3: the integrand has an integrable singularity", x.ncols()));
    }
    let a_min = shapes.iter().cloned().fold(f64::INFINITY, f64::min);
    if w == 0.0 && a_min <= 0.5 * p {
        return Err(Error::InvalidArgument(
            "zero labels with min N_ℓ ≤ P: the zero-temperature evidence diverges".into(),
        ));
    }
    let (log_e, err, kind) = match method {
        EvidenceMethod::BesselClosedForm => {
            if shapes.len() != 1 {
                return Err(Error::InvalidArgument("the closed form covers one hidden layer".into()));
            }
            let a = shapes[0];
            let nu = a - 0.5 * p;
            let v = if w == 0.0 {
                ln_gamma(nu) - ln_gamma(a)
            } else {
                2f64.ln() + 0.5 * nu * w.ln() + ln_bessel_k(nu, 2.0 * w.sqrt()) - ln_gamma(a)
            };
            (v, 1e-13, MethodKind::BesselClosedForm)
        }
        EvidenceMethod::LogConvolution => {
            let dens = GammaProductDensity::new(&spec.widths)?;
            let r = integrate_log(
                |u| dens.ln_density_log(u) - w * (-u).exp() - 0.5 * p * u,
                dens.center(),
                dens.scale(),
                1e-10,
                2000,
            );
            if !r.converged {
                warnings.push("quadrature hit its interval cap; error estimate is indicative".into());
            }
            (r.log_value, r.rel_error + dens.normalization_error(), MethodKind::LogConvolution)
        }
        EvidenceMethod::MonteCarlo { n_samples, stream } => {
            let gammas = shapes
                .iter()
                .map(|&a| Gamma::new(a, 1.0).expect("positive shape"))
                .collect::<Vec<_>>();
            let parts = chunked(stream, *n_samples, |s, len| {
                let mut rng = s.rng();
                (0..len)
                    .map(|_| {
                        let g: f64 = gammas.iter().map(|d| d.sample(&mut rng)).product();
                        -w / g - 0.5 * p * g.ln()
                    })
                    .collect::<Vec<_>>()
            });
            let logs: Vec<f64> = parts.into_iter().flatten().collect();
            let (v, e) = log_mean(&logs);
            (v, e, MethodKind::MonteCarlo)
        }
        EvidenceMethod::Quadrature => {
            return Err(Error::InvalidArgument(
                "zero-temperature evidence supports bessel_closed_form, log_convolution and monte_carlo".into(),
            ))
        }
    };
    Ok(EvidenceResult {
        log_value: prefactor + log_e,
        method: kind,
        error_estimate: err,
        warnings,
    })
}

/// `ln` density of `ln Γ` for `Γ ~ Gamma(a, 1)`: `a u − e^u − ln Γ(a)`.
fn ln_h(a: f64, u: f64) -> f64 {
    a * u - u.exp() - ln_gamma(a)
}

/// Range of `u` where `ln_h(a, ·)` is within `drop` of its maximum at `ln a`.
fn h_support(a: f64, drop: f64) -> (f64, f64) {
    let peak = ln_h(a, a.ln());
    let find = |dir: f64| {
        let mut step = 1.0 / a.sqrt();
        let mut far = a.ln();
        while ln_h(a, far) > peak - drop {
            far += dir * step;
            step *= 2.0;
        }
        let (mut lo, mut hi) = (a.ln(), far);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if ln_h(a, mid) > peak - drop {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    (find(-1.0), find(1.0))
}

/// Density of `G = ∏Γ_ℓ` with independent `Γ_ℓ ~ Gamma(N_ℓ/2, 1)`.
///
/// Works with `U = ln G`: all factors but the last are convolved on a uniform
/// grid, and the last is applied analytically when evaluating, so the
/// density is available at any point.
#[derive(Debug, Clone)]
pub struct GammaProductDensity {
    shapes: Vec<f64>,
    /// Grid origin, spacing and `ln` density of the partial sum (empty for `L = 1`).
    u0: f64,
    du: f64,
    ln_partial: Vec<f64>,
    norm_error: f64,
}

const SUPPORT_DROP: f64 = 90.0;

impl GammaProductDensity {
    pub fn new(dofs: &[usize]) -> Result<Self> {
        if dofs.is_empty() || dofs.contains(&0) {
            return Err(Error::InvalidArgument("degrees of freedom must be positive".into()));
        }
        let shapes: Vec<f64> = dofs.iter().map(|&n| 0.5 * n as f64).collect();
        let mut out = Self {
            shapes: shapes.clone(),
            u0: 0.0,
            du: 0.0,
            ln_partial: Vec::new(),
            norm_error: 0.0,
        };
        if shapes.len() == 1 {
            return Ok(out);
        }
        let head = &shapes[..shapes.len() - 1];
        let width = shapes.iter().map(|a| a.sqrt().recip()).fold(f64::INFINITY, f64::min);
        let du = (width / 8.0).min(0.02);
        let supports: Vec<(f64, f64)> = head.iter().map(|&a| h_support(a, SUPPORT_DROP)).collect();
        // First factor sampled directly, then one convolution per further factor.
        let (lo0, hi0) = supports[0];
        let mut u0 = lo0;
        let mut vals: Vec<f64> = (0..=((hi0 - lo0) / du).ceil() as usize)
            .map(|i| ln_h(head[0], lo0 + i as f64 * du).exp())
            .collect();
        for (k, &a) in head.iter().enumerate().skip(1) {
            let (lo, hi) = supports[k];
            let kernel_len = ((hi - lo) / du).ceil() as usize + 1;
            let kernel: Vec<f64> = (0..kernel_len).map(|j| ln_h(a, lo + j as f64 * du).exp()).collect();
            let mut next = vec![0.0; vals.len() + kernel_len - 1];
            for (i, &v) in vals.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                for (j, &h) in kernel.iter().enumerate() {
                    next[i + j] += v * h * du;
                }
            }
            vals = next;
            u0 += lo;
        }
        let total: f64 = vals.iter().sum::<f64>() * du;
        out.norm_error = (total - 1.0).abs();
        out.u0 = u0;
        out.du = du;
        out.ln_partial = vals.iter().map(|v| v.ln()).collect();
        Ok(out)
    }

    pub fn depth(&self) -> usize {
        self.shapes.len()
    }

    /// `ln f_U(u)` for `U = ln G`.
    pub fn ln_density_log(&self, u: f64) -> f64 {
        let a = *self.shapes.last().expect("non-empty");
        if self.ln_partial.is_empty() {
            return ln_h(a, u);
        }
        let terms: Vec<f64> = self
            .ln_partial
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_finite())
            .map(|(j, l)| l + ln_h(a, u - (self.u0 + j as f64 * self.du)))
            .collect();
        log_sum_exp(&terms) + self.du.ln()
    }

    /// Density of `G` at `q > 0`.
    pub fn density(&self, q: f64) -> f64 {
        if !(q > 0.0) {
            return 0.0;
        }
        (self.ln_density_log(q.ln()) - q.ln()).exp()
    }

    /// Approximate location and spread of `U`, for quadrature.
    pub fn center(&self) -> f64 {
        self.shapes.iter().map(|a| a.ln()).sum()
    }

    pub fn scale(&self) -> f64 {
        self.shapes.iter().map(|a| 1.0 / a).sum::<f64>().sqrt().max(0.05)
    }

    /// `|∫ grid density − 1|` of the convolved factors.
    pub fn normalization_error(&self) -> f64 {
        self.norm_error
    }
}

/// Density at `q` of the product of independent `Gamma(N_ℓ/2, 1)` variables.
pub fn gamma_product_density(dofs: &[usize], q: f64) -> Result<f64> {
    Ok(GammaProductDensity::new(dofs)?.density(q))
}
