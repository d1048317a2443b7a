use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::model::MixtureModel;
use super::{predictive_from_factor, regularized_factor, PredictiveMoments, SigmaBlocks};
use crate::error::{Error, Result};
use crate::linalg::CholeskyFactor;
use crate::mixing::{isotropic_samplers, sample_wishart_tuple, MixingSample};
use crate::rng::{chunked, RngStream};
use crate::stats::{autocorrelation_ess, ess_from_log_weights, log_sum_exp, normalized_weights, weighted_mean_se};

/// Importance sampling below this effective sample size is refused.
pub const MIN_ESS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Importance,
    Metropolis,
}

/// Draws from a mixing measure with weights, per-draw `Φ_β` and, when a test
/// input was supplied, per-draw predictive moments.
///
/// Factors are stored packed (lower triangle, row by row, layer after layer).
#[derive(Debug, Clone)]
pub struct WeightedMixture {
    pub dim: usize,
    pub depth: usize,
    packed: Vec<f64>,
    pub log_weights: Vec<f64>,
    /// `Φ_β` on the training labels for every draw.
    pub phis: Vec<f64>,
    pred_dim: usize,
    pred: Vec<f64>,
    /// Draws per chain for Metropolis output, empty for importance sampling.
    pub chain_lengths: Vec<usize>,
    /// Kish ESS for importance sampling, summed autocorrelation ESS of `Φ_β`
    /// across chains for Metropolis.
    pub ess: f64,
    /// `ln` of the prior average of the likelihood factor (importance sampling only).
    pub log_normalizer: Option<f64>,
    pub log_normalizer_se: Option<f64>,
    pub acceptance_rate: Option<f64>,
    pub warnings: Vec<String>,
    pub sampler: SamplerKind,
}

fn tri(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

fn pack_factor(f: &CholeskyFactor, out: &mut Vec<f64>) {
    let l = f.lower();
    for i in 0..l.nrows() {
        for j in 0..=i {
            out.push(l[(i, j)]);
        }
    }
}

fn unpack_factor(dim: usize, entries: &[f64]) -> CholeskyFactor {
    let mut l = DMatrix::zeros(dim, dim);
    let mut k = 0;
    for i in 0..dim {
        for j in 0..=i {
            l[(i, j)] = entries[k];
            k += 1;
        }
    }
    CholeskyFactor::from_lower_unchecked(l)
}

impl WeightedMixture {
    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn mixing(&self, i: usize) -> MixingSample {
        let stride = self.depth * tri(self.dim);
        let row = &self.packed[i * stride..(i + 1) * stride];
        let factors = row
            .chunks(tri(self.dim))
            .map(|c| unpack_factor(self.dim, c))
            .collect();
        MixingSample::from_factors(factors).expect("stored factors are valid")
    }

    /// Packed lower-triangular factor entries of draw `i`, layer after layer.
    pub fn factor_entries(&self, i: usize) -> &[f64] {
        let stride = self.depth * tri(self.dim);
        &self.packed[i * stride..(i + 1) * stride]
    }

    pub fn has_predictive(&self) -> bool {
        self.pred_dim > 0
    }

    pub fn predictive(&self, i: usize) -> Option<PredictiveMoments> {
        if self.pred_dim == 0 {
            return None;
        }
        let d = self.pred_dim;
        let stride = d + d * d;
        let row = &self.pred[i * stride..(i + 1) * stride];
        Some(PredictiveMoments {
            mean: DVector::from_column_slice(&row[..d]),
            cov: DMatrix::from_column_slice(d, d, &row[d..]),
        })
    }

    /// Self-normalized weights.
    pub fn weights(&self) -> Vec<f64> {
        normalized_weights(&self.log_weights)
    }

    /// Weighted mean of per-draw values and its standard error.
    pub fn mean_se(&self, values: &[f64]) -> (f64, f64) {
        match self.sampler {
            SamplerKind::Importance => weighted_mean_se(&self.weights(), values),
            SamplerKind::Metropolis => {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                let mut ess = 0.0;
                let mut start = 0;
                for &len in &self.chain_lengths {
                    ess += autocorrelation_ess(&values[start..start + len]);
                    start += len;
                }
                (mean, (var / ess.max(1.0)).sqrt())
            }
        }
    }

    /// Weighted expectation of `f(Q_1, …, Q_L)` with its standard error.
    pub fn expect<F: Fn(&MixingSample) -> f64>(&self, f: F) -> (f64, f64) {
        let values: Vec<f64> = (0..self.len()).map(|i| f(&self.mixing(i))).collect();
        self.mean_se(&values)
    }
}

/// Log-likelihood factor `−(c·Φ° + R)/2`; `c = 1` gives the plain posterior,
/// `c = N` the mean-field one.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tilt {
    pub data_scale: f64,
}

pub(crate) struct Evaluation {
    pub log_lik: f64,
    pub phi: f64,
    pub pred: Option<PredictiveMoments>,
}

/// Evaluates one mixing draw. The first `test_dim` outputs of the model are
/// the test block and carry no label.
pub(crate) fn evaluate<M: MixtureModel>(
    model: &M,
    y: &DVector<f64>,
    beta: f64,
    mix: &MixingSample,
    test_dim: usize,
    tilt: Tilt,
) -> Result<Evaluation> {
    let sigma = model.kernel(mix)?;
    let blocks = SigmaBlocks::split(&sigma, test_dim)?;
    let a = regularized_factor(&blocks.s11, beta)?;
    let quad = a.quad_form_inv(y);
    let logdet = a.dim() as f64 * beta.ln() + a.log_det();
    let pred = (test_dim > 0).then(|| predictive_from_factor(&blocks, &a, y));
    let log_lik = -0.5 * (tilt.data_scale * quad + logdet);
    if !log_lik.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    Ok(Evaluation {
        log_lik,
        phi: quad + logdet,
        pred,
    })
}

pub(crate) fn check_labels<M: MixtureModel>(model: &M, y: &DVector<f64>, test_dim: usize) -> Result<()> {
    let expected = model.out_dim() * model.n_examples() - test_dim;
    if y.len() != expected {
        return Err(Error::ShapeMismatch(format!("{} labels, expected {expected}", y.len())));
    }
    Ok(())
}

#[derive(Default)]
struct Buffer {
    packed: Vec<f64>,
    log_w: Vec<f64>,
    phis: Vec<f64>,
    pred: Vec<f64>,
}

impl Buffer {
    fn push(&mut self, mix: &MixingSample, log_w: f64, ev: &Evaluation) {
        for f in &mix.factors {
            pack_factor(f, &mut self.packed);
        }
        self.log_w.push(log_w);
        self.phis.push(ev.phi);
        if let Some(p) = &ev.pred {
            self.pred.extend_from_slice(p.mean.as_slice());
            self.pred.extend_from_slice(p.cov.as_slice());
        }
    }

    fn append(&mut self, other: Buffer) {
        self.packed.extend(other.packed);
        self.log_w.extend(other.log_w);
        self.phis.extend(other.phis);
        self.pred.extend(other.pred);
    }
}

pub(crate) fn run_importance<M: MixtureModel>(
    model: &M,
    y: &DVector<f64>,
    beta: f64,
    n: usize,
    stream: &RngStream,
    test_dim: usize,
    tilt: Tilt,
) -> Result<WeightedMixture> {
    model.check_mixture()?;
    check_labels(model, y, test_dim)?;
    if n == 0 {
        return Err(Error::InvalidArgument("at least one draw is required".into()));
    }
    let samplers = isotropic_samplers(model.mixing_dim(), &model.mixing_dofs())?;
    let parts = chunked(stream, n, |s, len| -> Result<Buffer> {
        let mut rng = s.rng();
        let mut buf = Buffer::default();
        for _ in 0..len {
            let mix = sample_wishart_tuple(&samplers, &mut rng);
            let ev = evaluate(model, y, beta, &mix, test_dim, tilt)?;
            buf.push(&mix, ev.log_lik, &ev);
        }
        Ok(buf)
    });
    let mut all = Buffer::default();
    for p in parts {
        all.append(p?);
    }
    let ess = ess_from_log_weights(&all.log_w);
    if ess < MIN_ESS {
        return Err(Error::DegenerateWeights { ess, threshold: MIN_ESS });
    }
    let lse = log_sum_exp(&all.log_w);
    let max = all.log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = all.log_w.iter().map(|l| (l - max).exp()).collect();
    let nf = n as f64;
    let mean = w.iter().sum::<f64>() / nf;
    let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
    Ok(WeightedMixture {
        dim: model.mixing_dim(),
        depth: model.mixing_dofs().len(),
        packed: all.packed,
        log_weights: all.log_w,
        phis: all.phis,
        pred_dim: test_dim,
        pred: all.pred,
        chain_lengths: Vec::new(),
        ess,
        log_normalizer: Some(lse - nf.ln()),
        log_normalizer_se: Some((var / nf).sqrt() / mean),
        acceptance_rate: None,
        warnings: Vec::new(),
        sampler: SamplerKind::Importance,
    })
}

/// Self-normalized importance sampling with the prior mixing measure as
/// proposal and log-weights `−Φ_β/2`.
pub fn posterior_mixing_is<M: MixtureModel>(
    model: &M,
    y: &DVector<f64>,
    beta: f64,
    n: usize,
    stream: &RngStream,
) -> Result<WeightedMixture> {
    run_importance(model, y, beta, n, stream, 0, Tilt { data_scale: 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MhSettings {
    /// Retained steps per chain after burn-in (before thinning).
    pub n_steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Random-walk standard deviation in log-Cholesky coordinates.
    pub step_size: f64,
    pub n_chains: usize,
    /// Tune the step size during burn-in toward ~30% acceptance.
    pub adapt: bool,
}

impl Default for MhSettings {
    fn default() -> Self {
        Self {
            n_steps: 20_000,
            burn_in: 2_000,
            thin: 1,
            step_size: 0.3,
            n_chains: 4,
            adapt: true,
        }
    }
}

impl MhSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 || self.thin == 0 || self.n_chains == 0 {
            return Err(Error::InvalidArgument("n_steps, thin and n_chains must be positive".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidArgument("step_size must be positive".into()));
        }
        Ok(())
    }
}

/// Log-Cholesky coordinates: packed lower factors with logged diagonals.
fn to_theta(mix: &MixingSample) -> Vec<f64> {
    let mut theta = Vec::new();
    for f in &mix.factors {
        let l = f.lower();
        for i in 0..l.nrows() {
            for j in 0..i {
                theta.push(l[(i, j)]);
            }
            theta.push(l[(i, i)].ln());
        }
    }
    theta
}

fn from_theta(dim: usize, theta: &[f64]) -> MixingSample {
    let factors = theta
        .chunks(tri(dim))
        .map(|c| {
            let mut l = DMatrix::zeros(dim, dim);
            let mut k = 0;
            for i in 0..dim {
                for j in 0..i {
                    l[(i, j)] = c[k];
                    k += 1;
                }
                l[(i, i)] = c[k].exp();
                k += 1;
            }
            CholeskyFactor::from_lower_unchecked(l)
        })
        .collect();
    MixingSample::from_factors(factors).expect("exponentiated diagonal is positive")
}

/// Log density of `W_dim(𝟙/n_ℓ, n_ℓ)` tuples in log-Cholesky coordinates, up
/// to a constant: `Σ_ℓ [Σ_i (n_ℓ − i) θ_ii − (n_ℓ/2)‖F_ℓ‖²]` (0-based `i`),
/// Jacobian included.
pub(crate) fn log_prior_theta(dim: usize, dofs: &[usize], theta: &[f64]) -> f64 {
    let mut total = 0.0;
    for (c, &n) in theta.chunks(tri(dim)).zip(dofs) {
        let n = n as f64;
        let mut k = 0;
        let mut sq = 0.0;
        for i in 0..dim {
            for _ in 0..i {
                sq += c[k] * c[k];
                k += 1;
            }
            total += (n - i as f64) * c[k];
            sq += (2.0 * c[k]).exp();
            k += 1;
        }
        total -= 0.5 * n * sq;
    }
    total
}

struct ChainOutput {
    buf: Buffer,
    accepted: usize,
    proposed: usize,
    ess: f64,
}

fn run_chain<M: MixtureModel>(
    model: &M,
    y: &DVector<f64>,
    beta: f64,
    settings: &MhSettings,
    stream: RngStream,
    test_dim: usize,
    tilt: Tilt,
) -> Result<ChainOutput> {
    let dim = model.mixing_dim();
    let dofs = model.mixing_dofs();
    let samplers = isotropic_samplers(dim, &dofs)?;
    let mut rng = stream.rng();
    let mut mix = sample_wishart_tuple(&samplers, &mut rng);
    let mut theta = to_theta(&mix);
    let mut ev = evaluate(model, y, beta, &mix, test_dim, tilt)?;
    let mut log_target = log_prior_theta(dim, &dofs, &theta) + ev.log_lik;
    let mut step = settings.step_size;
    let mut buf = Buffer::default();
    let (mut accepted, mut proposed) = (0, 0);
    let mut batch_acc = 0;
    const BATCH: usize = 50;
    let total = settings.burn_in + settings.n_steps;
    for t in 0..total {
        let prop: Vec<f64> = theta
            .iter()
            .map(|v| v + step * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let prop_mix = from_theta(dim, &prop);
        let accept = match evaluate(model, y, beta, &prop_mix, test_dim, tilt) {
            Ok(prop_ev) => {
                let lt = log_prior_theta(dim, &dofs, &prop) + prop_ev.log_lik;
                let u: f64 = rng.random();
                if lt.is_finite() && u.ln() < lt - log_target {
                    theta = prop;
                    mix = prop_mix;
                    ev = prop_ev;
                    log_target = lt;
                    true
                } else {
                    false
                }
            }
            Err(_) => false,
        };
        if t < settings.burn_in {
            batch_acc += accept as usize;
            if settings.adapt && (t + 1) % BATCH == 0 {
                let rate = batch_acc as f64 / BATCH as f64;
                step *= (rate - 0.3).exp();
                batch_acc = 0;
            }
            continue;
        }
        proposed += 1;
        accepted += accept as usize;
        if (t - settings.burn_in).is_multiple_of(settings.thin) {
            buf.push(&mix, 0.0, &ev);
        }
    }
    let ess = autocorrelation_ess(&buf.phis);
    Ok(ChainOutput {
        buf,
        accepted,
        proposed,
        ess,
    })
}

pub(crate) fn run_metropolis<M: MixtureModel>(
    model: &M,
    y: &DVector<f64>,
    beta: f64,
    settings: &MhSettings,
    stream: &RngStream,
    test_dim: usize,
    tilt: Tilt,
) -> Result<WeightedMixture> {
    use rayon::prelude::*;
    settings.validate()?;
    model.check_mixture()?;
    check_labels(model, y, test_dim)?;
    let chains: Vec<Result<ChainOutput>> = (0..settings.n_chains)
        .into_par_iter()
        .map(|c| run_chain(model, y, beta, settings, stream.split(c as u64), test_dim, tilt))
        .collect();
    let mut all = Buffer::default();
    let mut chain_lengths = Vec::new();
    let (mut accepted, mut proposed, mut ess) = (0, 0, 0.0);
    for c in chains {
        let c = c?;
        chain_lengths.push(c.buf.log_w.len());
        accepted += c.accepted;
        proposed += c.proposed;
        ess += c.ess;
        all.append(c.buf);
    }
    let rate = accepted as f64 / proposed as f64;
    let mut warnings = Vec::new();
    if !(0.1..=0.7).contains(&rate) {
        warnings.push(format!("chain not mixed: acceptance rate {rate:.3} outside [0.1, 0.7]"));
    }
    Ok(WeightedMixture {
        dim: model.mixing_dim(),
        depth: model.mixing_dofs().len(),
        packed: all.packed,
        log_weights: all.log_w,
        phis: all.phis,
        pred_dim: test_dim,
        pred: all.pred,
        chain_lengths,
        ess,
        log_normalizer: None,
        log_normalizer_se: None,
        acceptance_rate: Some(rate),
        warnings,
        sampler: SamplerKind::Metropolis,
    })
}

/// Random-walk Metropolis in log-Cholesky coordinates targeting
/// (prior density)·`e^{−Φ_β/2}`; chains run in parallel on `stream.split(c)`.
pub fn posterior_mixing_mh<M: MixtureModel>(
    model: &M,
    y: &DVector<f64>,
    beta: f64,
    settings: &MhSettings,
    stream: &RngStream,
) -> Result<WeightedMixture> {
    run_metropolis(model, y, beta, settings, stream, 0, Tilt { data_scale: 1.0 })
}
