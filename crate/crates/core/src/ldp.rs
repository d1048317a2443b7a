//! Large-deviation rate functions of the mixing measures and their minimizers.
//!
//! Lazy limit: `I(Q) = ½Σ_ℓ(tr Q_ℓ − log det Q_ℓ) − DL/2`.
//! Mean-field limit: `I°(Q) = ½Σ_ℓ(tr Q_ℓ − log det Q_ℓ) + ½Φ°_β(Q) − Ī_0`, where
//! `Ī_0` is the infimum of the first two terms.
//!
//! Minimization runs in log-Cholesky coordinates: `Q_ℓ = F_ℓF_ℓᵀ` with `F_ℓ`
//! lower triangular and `F_ℓ,ii = e^{θ_ℓ,ii}`, packed row by row per layer.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fc::FcNetworkSpec;
use crate::linalg::{cholesky, CholeskyFactor, SpdMatrix};
use crate::mixing::{isotropic_samplers, sample_wishart_tuple, MixingSample};
use crate::posterior::{meanfield_mixing_mh, FcModel, MhSettings};
use crate::rng::{chunked, RngStream};
use crate::stats::{ols_slope, MeanAccumulator};

fn tri(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Packs `Q_ℓ` into log-Cholesky coordinates.
pub fn log_cholesky(qs: &[SpdMatrix]) -> Result<Vec<f64>> {
    let mut theta = Vec::new();
    for q in qs {
        let f = q.cholesky()?;
        let l = f.lower();
        for i in 0..l.nrows() {
            for j in 0..i {
                theta.push(l[(i, j)]);
            }
            theta.push(l[(i, i)].ln());
        }
    }
    Ok(theta)
}

fn factors_from_theta(dim: usize, theta: &[f64]) -> Vec<DMatrix<f64>> {
    theta
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
            l
        })
        .collect()
}

/// Inverse of [`log_cholesky`].
pub fn from_log_cholesky(dim: usize, theta: &[f64]) -> Vec<SpdMatrix> {
    factors_from_theta(dim, theta)
        .into_iter()
        .map(|l| SpdMatrix::from_factor(&CholeskyFactor::from_lower_unchecked(l)))
        .collect()
}

/// Packs a per-layer `D×D` gradient with respect to `F_ℓ` into θ coordinates.
fn pack_gradient(dim: usize, f: &DMatrix<f64>, g: &DMatrix<f64>, out: &mut Vec<f64>) {
    for i in 0..dim {
        for j in 0..i {
            out.push(g[(i, j)]);
        }
        out.push(g[(i, i)] * f[(i, i)]);
    }
}

/// `I(Q) = ½Σ(tr Q_ℓ − log det Q_ℓ) − DL/2`.
pub fn rate_lazy(qs: &[SpdMatrix]) -> Result<f64> {
    let mut total = 0.0;
    let mut dims = 0;
    for q in qs {
        total += 0.5 * (q.trace() - q.log_det()?);
        dims += q.dim();
    }
    Ok(total - 0.5 * dims as f64)
}

/// `½Σ(‖F_ℓ‖² − 2Σθ_ii)` and its θ-gradient.
fn prior_part(dim: usize, theta: &[f64]) -> (f64, Vec<f64>) {
    let mut v = 0.0;
    let mut g = Vec::with_capacity(theta.len());
    for c in theta.chunks(tri(dim)) {
        let mut k = 0;
        for i in 0..dim {
            for _ in 0..i {
                v += 0.5 * c[k] * c[k];
                g.push(c[k]);
                k += 1;
            }
            let e2 = (2.0 * c[k]).exp();
            v += 0.5 * e2 - c[k];
            g.push(e2 - 1.0);
            k += 1;
        }
    }
    (v, g)
}

/// The data-dependent part `½Φ°_β` of the mean-field rate for an FC network,
/// with `Σ11 = K0 ⊗ Q^(L)`.
#[derive(Debug, Clone)]
pub struct MeanFieldObjective {
    pub dim: usize,
    pub depth: usize,
    k0: DMatrix<f64>,
    y: DVector<f64>,
    beta: f64,
}

impl MeanFieldObjective {
    pub fn new(model: &FcModel, y: &DVector<f64>, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument("beta must be positive and finite".into()));
        }
        let d = model.spec.d;
        if y.len() != d * model.x.ncols() {
            return Err(Error::ShapeMismatch(format!("{} labels, expected {}", y.len(), d * model.x.ncols())));
        }
        Ok(Self {
            dim: d,
            depth: model.spec.depth(),
            k0: model.gram().clone(),
            y: y.clone(),
            beta,
        })
    }

    /// `Φ°_β` and `R` at the given tuple.
    pub fn phi_parts(&self, qs: &[SpdMatrix]) -> Result<(f64, f64)> {
        let mix = MixingSample::from_qs(qs)?;
        let s11 = crate::linalg::kron(&self.k0, mix.q_top.matrix());
        crate::posterior::phi_parts(&s11, &self.y, self.beta)
    }

    /// `½Φ°` and its θ-gradient.
    fn data_part(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let d = self.dim;
        let fs = factors_from_theta(d, theta);
        // B = F_1ᵀ⋯F_Lᵀ, Q^(L) = BᵀB
        let mut b = DMatrix::<f64>::identity(d, d);
        for f in &fs {
            b *= f.transpose();
        }
        let q = b.transpose() * &b;
        let n = self.y.len();
        let a = crate::linalg::kron(&self.k0, &q) + DMatrix::<f64>::identity(n, n) / self.beta;
        let af = cholesky(&crate::linalg::symmetrize(&a)?)?;
        let v = af.solve_vec(&self.y);
        let phi0 = self.y.dot(&v);
        if !phi0.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        // dΦ° = −tr(H dQ^(L)), H = V K0 Vᵀ with V the D×P reshaping of A⁻¹y
        let vm = DMatrix::from_column_slice(d, n / d, v.as_slice());
        let h = &vm * &self.k0 * vm.transpose();
        let hb = &h * b.transpose();
        let mut grad = Vec::with_capacity(theta.len());
        let mut pre = DMatrix::<f64>::identity(d, d);
        for (l, f) in fs.iter().enumerate() {
            let mut post = DMatrix::<f64>::identity(d, d);
            for g in &fs[l + 1..] {
                post *= g.transpose();
            }
            // ∂(½Φ°)/∂F_ℓ = −Post_ℓ H Bᵀ Pre_ℓ
            let gf = -(&post * &hb * &pre);
            pack_gradient(d, f, &gf, &mut grad);
            pre *= f.transpose();
        }
        Ok((0.5 * phi0, grad))
    }
}

/// Objective minimized by [`minimize_rate`].
#[derive(Debug, Clone)]
pub enum RateObjective {
    /// `I(Q)` on `depth` layers of `dim×dim` matrices.
    Lazy { dim: usize, depth: usize },
    /// `½Σ(tr − log det) + ½Φ°_β`, i.e. `I° + Ī_0`.
    MeanField(MeanFieldObjective),
}

impl RateObjective {
    pub fn dim(&self) -> usize {
        match self {
            Self::Lazy { dim, .. } => *dim,
            Self::MeanField(m) => m.dim,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Self::Lazy { depth, .. } => *depth,
            Self::MeanField(m) => m.depth,
        }
    }

    /// Value and gradient in log-Cholesky coordinates.
    pub fn value_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        if theta.len() != self.depth() * tri(self.dim()) {
            return Err(Error::ShapeMismatch("coordinate vector has the wrong length".into()));
        }
        let (v, mut g) = prior_part(self.dim(), theta);
        let value = match self {
            Self::Lazy { dim, depth } => v - 0.5 * (dim * depth) as f64,
            Self::MeanField(m) => {
                let (dv, dg) = m.data_part(theta)?;
                for (a, b) in g.iter_mut().zip(dg) {
                    *a += b;
                }
                v + dv
            }
        };
        if !value.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteObjective);
        }
        Ok((value, g))
    }

    pub fn value(&self, qs: &[SpdMatrix]) -> Result<f64> {
        self.value_gradient(&log_cholesky(qs)?).map(|(v, _)| v)
    }
}

/// `I°(Q) = ½Σ(tr Q_ℓ − log det Q_ℓ) + ½Φ°_β(Q) − Ī_0`.
pub fn rate_meanfield(qs: &[SpdMatrix], objective: &MeanFieldObjective, i0: f64) -> Result<f64> {
    let (v, _) = RateObjective::MeanField(objective.clone()).value_gradient(&log_cholesky(qs)?)?;
    Ok(v - i0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimizeOptions {
    pub gradient_tol: f64,
    pub max_iterations: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            gradient_tol: 1e-8,
            max_iterations: 5000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RatePoint {
    pub qs: Vec<SpdMatrix>,
    /// Objective value; for the mean-field objective at a minimizer this is `Ī_0`.
    pub value: f64,
    /// Euclidean norm of the gradient in log-Cholesky coordinates.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// BFGS with backtracking line search in log-Cholesky coordinates, started
/// from `init` (identities when `None`). Reaching the iteration cap returns
/// the best point with `converged = false`.
pub fn minimize_rate(objective: &RateObjective, init: Option<&[SpdMatrix]>, opts: &MinimizeOptions) -> Result<RatePoint> {
    let dim = objective.dim();
    let n = objective.depth() * tri(dim);
    let mut x = match init {
        Some(qs) => {
            if qs.len() != objective.depth() || qs.iter().any(|q| q.dim() != dim) {
                return Err(Error::ShapeMismatch("initial point does not match the objective".into()));
            }
            log_cholesky(qs)?
        }
        None => vec![0.0; n],
    };
    let (mut f, mut g) = objective.value_gradient(&x)?;
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    let eval = |p: &[f64]| objective.value_gradient(p).ok();
    while norm(&g) > opts.gradient_tol && iterations < opts.max_iterations {
        iterations += 1;
        let gv = DVector::from_column_slice(&g);
        let mut dir = -(&h * &gv);
        let mut slope = dir.dot(&gv);
        if slope >= 0.0 {
            h = DMatrix::identity(n, n);
            dir = -gv.clone();
            slope = dir.dot(&gv);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            if let Some((ft, gt)) = eval(&trial) {
                let armijo = ft <= f + 1e-4 * step * slope;
                // near the optimum differences in f drown in rounding; fall back on the gradient
                let flat = (ft - f).abs() <= 1e-13 * (1.0 + f.abs()) && norm(&gt) < norm(&g);
                if armijo || flat {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            if h != DMatrix::identity(n, n) {
                h = DMatrix::identity(n, n);
                continue;
            }
            break;
        };
        let s = DVector::from_iterator(n, xn.iter().zip(&x).map(|(a, b)| a - b));
        let yv = DVector::from_iterator(n, gn.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&yv);
        if sy > 1e-14 * s.norm() * yv.norm() {
            if iterations == 1 {
                h *= sy / yv.dot(&yv);
            }
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            h += &s * s.transpose() * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        x = xn;
        f = fnew;
        g = gn;
    }
    let gradient_norm = norm(&g);
    Ok(RatePoint {
        qs: from_log_cholesky(dim, &x),
        value: f,
        gradient_norm,
        iterations,
        converged: gradient_norm <= opts.gradient_tol,
    })
}

/// Minimizer of the common-scalar action
/// `f(u) = L(u − ln u) + (α/P)[yᵀ(u^L K + β⁻¹𝟙)⁻¹y + ln det(𝟙 + βu^L K)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddleScalar {
    pub u0: f64,
    /// `|f'(u0)|`.
    pub residual: f64,
    pub action: f64,
    /// `Φ°/P` and `R/P` at `u0`, the data terms assumed to stay finite as
    /// `P, N` grow together.
    pub data_quadratic_per_example: f64,
    pub data_logdet_per_example: f64,
}

struct ScalarAction {
    depth: f64,
    weight: f64,
    k: Vec<f64>,
    y2: Vec<f64>,
    beta: f64,
}

impl ScalarAction {
    fn terms(&self, u: f64) -> (f64, f64) {
        let t = u.powf(self.depth);
        let mut quad = 0.0;
        let mut logdet = 0.0;
        for (&k, &y2) in self.k.iter().zip(&self.y2) {
            quad += y2 / (t * k + 1.0 / self.beta);
            logdet += (self.beta * t * k).ln_1p();
        }
        (quad, logdet)
    }

    fn value(&self, u: f64) -> f64 {
        let (q, r) = self.terms(u);
        self.depth * (u - u.ln()) + self.weight * (q + r)
    }

    fn derivative(&self, u: f64) -> f64 {
        let l = self.depth;
        let t = u.powf(l);
        let dt = l * t / u;
        let mut d = 0.0;
        for (&k, &y2) in self.k.iter().zip(&self.y2) {
            let den = t * k + 1.0 / self.beta;
            d += -y2 * k * dt / (den * den) + self.beta * k * dt / (1.0 + self.beta * t * k);
        }
        l * (1.0 - 1.0 / u) + self.weight * d
    }
}

const SADDLE_LO: f64 = 1e-12;
const SADDLE_HI: f64 = 1e12;

pub fn saddle_scalar_solve(
    spec: &FcNetworkSpec,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: f64,
    beta: f64,
) -> Result<SaddleScalar> {
    spec.validate()?;
    if spec.d != 1 {
        return Err(Error::InvalidSpec("the scalar saddle needs output dimension 1".into()));
    }
    if spec.widths.iter().any(|&n| n != spec.widths[0]) {
        return Err(Error::InvalidSpec("the scalar saddle needs equal hidden widths".into()));
    }
    if x.nrows() != spec.n0 || y.len() != x.ncols() || x.ncols() == 0 {
        return Err(Error::ShapeMismatch("inputs and labels do not match".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument("alpha must be non-negative and beta positive".into()));
    }
    let p = x.ncols() as f64;
    let eig = crate::fc::gram_fc(spec, x).symmetric_eigen();
    let yt = eig.eigenvectors.transpose() * y;
    let act = ScalarAction {
        depth: spec.depth() as f64,
        weight: alpha / p,
        k: eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect(),
        y2: yt.iter().map(|v| v * v).collect(),
        beta,
    };
    // global scan in ln u, then Brent and a safeguarded Newton polish
    let (lo, hi) = (SADDLE_LO.ln(), SADDLE_HI.ln());
    let m = 4000;
    let grid: Vec<f64> = (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&s| act.value(s.exp())).collect();
    let best = vals
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or(Error::NonFiniteObjective)?;
    if best == 0 || best == m {
        return Err(Error::NoInteriorMinimum {
            lo: SADDLE_LO,
            hi: SADDLE_HI,
        });
    }
    let s0 = brent_min(|s| act.value(s.exp()), grid[best - 1], grid[best + 1], 1e-12);
    let (mut a, mut b) = (grid[best - 1].exp(), grid[best + 1].exp());
    let mut u = s0.exp();
    for _ in 0..100 {
        let d = act.derivative(u);
        if d.abs() <= 1e-12 {
            break;
        }
        if d > 0.0 {
            b = u;
        } else {
            a = u;
        }
        let h = 1e-6 * u;
        let curv = (act.derivative(u + h) - act.derivative(u - h)) / (2.0 * h);
        let newton = u - d / curv;
        u = if curv > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
    }
    let (q, r) = act.terms(u);
    Ok(SaddleScalar {
        u0: u,
        residual: act.derivative(u).abs(),
        action: act.value(u),
        data_quadratic_per_example: q / p,
        data_logdet_per_example: r / p,
    })
}

/// Finite stand-in for `β = ∞` in the scalar saddle.
pub const LARGE_BETA: f64 = 1e6;

/// Scalar saddle at `β = LARGE_BETA`, with the shift of `u0` when `β` grows
/// tenfold as a sensitivity report.
pub fn saddle_scalar_zero_temperature(
    spec: &FcNetworkSpec,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: f64,
) -> Result<(SaddleScalar, f64)> {
    let s = saddle_scalar_solve(spec, x, y, alpha, LARGE_BETA)?;
    let t = saddle_scalar_solve(spec, x, y, alpha, 10.0 * LARGE_BETA)?;
    Ok((s, (t.u0 - s.u0).abs()))
}

/// Brent's parabolic/golden minimization on `[a, b]`.
fn brent_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-15;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1 * d.signum() };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    x
}

/// Which mixing measure [`concentration_probe`] samples.
#[derive(Debug, Clone)]
pub enum ProbeRegime {
    /// Prior mixing measure; concentration point is the identity.
    Lazy { n_draws: usize },
    /// Mean-field posterior mixing measure, sampled by Metropolis; the
    /// concentration point is the mean-field minimizer.
    MeanField {
        x: DMatrix<f64>,
        y: DVector<f64>,
        beta: f64,
        settings: MhSettings,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationRow {
    pub width: usize,
    /// Mean of `‖Q^(L) − Q̂^(L)‖_F`.
    pub mean_distance: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationTable {
    pub rows: Vec<ConcentrationRow>,
    /// Least-squares slope of `ln distance` against `ln N`.
    pub log_log_slope: f64,
    /// `Q̂^(L)`, row-major.
    pub target: Vec<f64>,
}

/// Mean Frobenius distance of `Q^(L)` to its concentration point across a
/// ladder of equal hidden widths. `spec.widths` only supplies the depth.
pub fn concentration_probe(
    spec: &FcNetworkSpec,
    regime: &ProbeRegime,
    widths: &[usize],
    stream: &RngStream,
) -> Result<ConcentrationTable> {
    spec.validate()?;
    if widths.len() < 2 {
        return Err(Error::InvalidArgument("the width ladder needs at least two rungs".into()));
    }
    let depth = spec.depth();
    let d = spec.d;
    let target = match regime {
        ProbeRegime::Lazy { .. } => DMatrix::identity(d, d),
        ProbeRegime::MeanField { x, y, beta, .. } => {
            let model = FcModel::new(spec.clone(), x.clone())?;
            let obj = RateObjective::MeanField(MeanFieldObjective::new(&model, y, *beta)?);
            let pt = minimize_rate(&obj, None, &MinimizeOptions::default())?;
            MixingSample::from_qs(&pt.qs)?.q_top.into_matrix()
        }
    };
    let mut rows = Vec::with_capacity(widths.len());
    for (r, &n) in widths.iter().enumerate() {
        let sub = stream.split(r as u64);
        let layer = FcNetworkSpec::new(spec.n0, vec![n; depth], d, spec.precisions.clone())?;
        let (mean, se) = match regime {
            ProbeRegime::Lazy { n_draws } => {
                layer.check_mixture()?;
                let samplers = isotropic_samplers(d, &layer.widths)?;
                let parts = chunked(&sub, *n_draws, |s, len| {
                    let mut rng = s.rng();
                    let mut acc = MeanAccumulator::new(1);
                    for _ in 0..len {
                        let mix = sample_wishart_tuple(&samplers, &mut rng);
                        acc.push_slice(&[(mix.q_top.matrix() - &target).norm()]);
                    }
                    acc
                });
                let acc = MeanAccumulator::merge_all(parts, 1);
                (acc.mean()[0], acc.std_error()[0])
            }
            ProbeRegime::MeanField { x, y, beta, settings } => {
                let model = FcModel::new(layer, x.clone())?;
                let w = meanfield_mixing_mh(&model, y, *beta, settings, &sub)?;
                let values: Vec<f64> = (0..w.len())
                    .map(|i| (w.mixing(i).q_top.matrix() - &target).norm())
                    .collect();
                w.mean_se(&values)
            }
        };
        rows.push(ConcentrationRow {
            width: n,
            mean_distance: mean,
            std_error: se,
        });
    }
    let lx: Vec<f64> = rows.iter().map(|r| (r.width as f64).ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.mean_distance.ln()).collect();
    Ok(ConcentrationTable {
        log_log_slope: ols_slope(&lx, &ly),
        rows,
        target: target.transpose().as_slice().to_vec(),
    })
}
