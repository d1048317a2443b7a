//! One-dimensional convolutional deep linear networks with a single output.
//!
//! Periodic boundary, unit stride and an odd mask `M`. Layer `ℓ` computes
//! `h^{ℓ+1}_{a,i} = Σ_{m,b} W^ℓ_{m,ab} h^ℓ_{b,i+m} / √(M C_ℓ)` with shifts
//! `m ∈ [−⌊M/2⌋, ⌊M/2⌋]` and the readout is
//! `S = Σ_{a,i} W^L_{a,i} h^L_{a,i} / √(C_L N_0)`.
//!
//! Inputs are stored per example as `C_0×N_0` matrices (channel, space).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, CholeskyFactor, SpdMatrix};
use crate::mixing::{isotropic_samplers, sample_wishart_tuple, MixingSample};
use crate::rng::{chunked, RngStream};
use crate::wishart::BartlettSampler;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvNetworkSpec {
    /// Spatial size `N_0`.
    pub n0: usize,
    /// Channels `[C_0, C_1, …, C_L]`.
    pub channels: Vec<usize>,
    /// Odd mask size `M ≤ N_0`.
    pub mask: usize,
    /// Weight precisions `[λ_0, …, λ_L]`; `λ_L` belongs to the readout.
    pub precisions: Vec<f64>,
}

impl ConvNetworkSpec {
    pub fn new(n0: usize, channels: Vec<usize>, mask: usize, precisions: Vec<f64>) -> Result<Self> {
        let spec = Self {
            n0,
            channels,
            mask,
            precisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn unit(n0: usize, channels: Vec<usize>, mask: usize) -> Result<Self> {
        let l = channels.len();
        Self::new(n0, channels, mask, vec![1.0; l])
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() < 2 {
            return Err(Error::InvalidSpec("need input channels and at least one hidden layer".into()));
        }
        if self.n0 == 0 || self.channels.contains(&0) {
            return Err(Error::InvalidSpec("spatial size and channels must be positive".into()));
        }
        if self.mask.is_multiple_of(2) || self.mask > self.n0 {
            return Err(Error::InvalidSpec(format!(
                "mask must be odd and at most n0 = {}, got {}",
                self.n0, self.mask
            )));
        }
        if self.precisions.len() != self.channels.len() {
            return Err(Error::InvalidSpec(format!(
                "expected {} precisions, got {}",
                self.channels.len(),
                self.precisions.len()
            )));
        }
        if self.precisions.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidSpec("precisions must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.channels.len() - 1
    }

    pub fn c0(&self) -> usize {
        self.channels[0]
    }

    pub fn hidden_channels(&self) -> &[usize] {
        &self.channels[1..]
    }

    pub fn lambda_star(&self) -> f64 {
        self.precisions.iter().product()
    }

    pub fn half_mask(&self) -> i64 {
        (self.mask / 2) as i64
    }

    pub fn shifts(&self) -> impl Iterator<Item = i64> {
        let h = self.half_mask();
        -h..=h
    }

    /// The mixture representation needs every hidden `C_ℓ > N_0`.
    pub fn check_mixture(&self) -> Result<()> {
        match self.hidden_channels().iter().find(|&&c| c <= self.n0) {
            Some(&c) => Err(Error::DofTooSmall { dim: self.n0, dof: c }),
            None => Ok(()),
        }
    }

    pub fn check_input(&self, x: &[DMatrix<f64>]) -> Result<()> {
        for (mu, xm) in x.iter().enumerate() {
            if xm.nrows() != self.c0() || xm.ncols() != self.n0 {
                return Err(Error::ShapeMismatch(format!(
                    "example {mu} is {}x{}, expected {}x{} (channel x space)",
                    xm.nrows(),
                    xm.ncols(),
                    self.c0(),
                    self.n0
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvDataset {
    /// One `C_0×N_0` matrix per example.
    pub x: Vec<DMatrix<f64>>,
    pub y: DVector<f64>,
}

impl ConvDataset {
    pub fn new(x: Vec<DMatrix<f64>>, y: DVector<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::ShapeMismatch(format!("{} inputs but {} labels", x.len(), y.len())));
        }
        if let Some(first) = x.first() {
            if x.iter().any(|m| m.shape() != first.shape()) {
                return Err(Error::ShapeMismatch("inputs must share one shape".into()));
            }
        }
        Ok(Self { x, y })
    }

    /// Builds inputs from nested `[example][channel][space]` arrays.
    pub fn inputs_from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Vec<DMatrix<f64>>> {
        nested
            .iter()
            .enumerate()
            .map(|(mu, ex)| {
                let c = ex.len();
                let n = ex.first().map_or(0, Vec::len);
                if c == 0 || n == 0 || ex.iter().any(|row| row.len() != n) {
                    return Err(Error::ShapeMismatch(format!("example {mu} is ragged or empty")));
                }
                Ok(DMatrix::from_fn(c, n, |a, i| ex[a][i]))
            })
            .collect()
    }

    pub fn p(&self) -> usize {
        self.x.len()
    }
}

/// Convolution weights: `layers[ℓ][k]` is the `C_{ℓ+1}×C_ℓ` matrix for shift
/// `k − ⌊M/2⌋`; `readout` is `C_L×N_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub layers: Vec<Vec<DMatrix<f64>>>,
    pub readout: DMatrix<f64>,
}

/// Cyclic shift of the spatial index: `T_{ij} = δ_{j, i+m mod N_0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TranslationOp {
    pub shift: i64,
    pub n0: usize,
}

impl TranslationOp {
    pub fn new(shift: i64, n0: usize) -> Self {
        Self { shift, n0 }
    }

    fn wrap(&self, i: i64) -> usize {
        i.rem_euclid(self.n0 as i64) as usize
    }

    /// Dense permutation matrix, kept for tests and small problems.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n0, self.n0, |i, j| {
            if j == self.wrap(i as i64 + self.shift) {
                1.0
            } else {
                0.0
            }
        })
    }

    /// `Tᵀ q T`, i.e. entries `q_{i−m, j−m}`.
    pub fn conjugate(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.n0, self.n0, |i, j| {
            q[(self.wrap(i as i64 - self.shift), self.wrap(j as i64 - self.shift))]
        })
    }
}

/// `(1/M) Σ_m T_mᵀ q T_m`.
pub fn translation_average(q: &DMatrix<f64>, mask: usize) -> DMatrix<f64> {
    let n = q.nrows();
    let h = (mask / 2) as i64;
    let mut out = DMatrix::<f64>::zeros(n, n);
    for m in -h..=h {
        let t = TranslationOp::new(m, n);
        for j in 0..n {
            let jj = t.wrap(j as i64 - m);
            for i in 0..n {
                out[(i, j)] += q[(t.wrap(i as i64 - m), jj)];
            }
        }
    }
    out / mask as f64
}

fn check_tmap_inputs(n0: usize, qs: &[SpdMatrix]) -> Result<()> {
    if qs.is_empty() {
        return Err(Error::InvalidSpec("backward recursion needs at least one layer".into()));
    }
    if qs.iter().any(|q| q.dim() != n0) {
        return Err(Error::ShapeMismatch(format!("mixing matrices must be {n0}x{n0}")));
    }
    Ok(())
}

/// Backward recursion with a caller-chosen square root: `root(Q*)` must return
/// some `U` with `UᵀU = Q*`. Returns `[Q*_1, …, Q*_L]`.
pub fn backward_recursion_with_root<F>(mask: usize, qs: &[SpdMatrix], mut root: F) -> Result<Vec<DMatrix<f64>>>
where
    F: FnMut(&DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    let l = qs.len();
    let mut stars = vec![DMatrix::<f64>::zeros(0, 0); l];
    stars[l - 1] = translation_average(qs[l - 1].matrix(), mask);
    for k in (0..l - 1).rev() {
        let u = root(&stars[k + 1])?;
        let inner = u.transpose() * qs[k].matrix() * &u;
        stars[k] = translation_average(&inner, mask);
    }
    Ok(stars)
}

/// Factors `F*_ℓ` (lower, `F*F*ᵀ = Q*_ℓ`) of the backward recursion, `ℓ = 1…L`.
/// The square root at each level is `U* = F*ᵀ`.
pub fn backward_factors(mask: usize, qs: &[SpdMatrix]) -> Result<Vec<CholeskyFactor>> {
    check_tmap_inputs(qs[0].dim(), qs)?;
    let l = qs.len();
    let mut factors: Vec<Option<CholeskyFactor>> = vec![None; l];
    factors[l - 1] = Some(cholesky(&translation_average(qs[l - 1].matrix(), mask))?);
    for k in (0..l - 1).rev() {
        let f = factors[k + 1].as_ref().expect("filled above").lower();
        let inner = f * qs[k].matrix() * f.transpose();
        factors[k] = Some(cholesky(&translation_average(&inner, mask))?);
    }
    Ok(factors.into_iter().map(|f| f.expect("filled")).collect())
}

/// `𝒯(Q_1, …, Q_L) = Q*_1`.
pub fn backward_tmap(spec: &ConvNetworkSpec, qs: &[SpdMatrix]) -> Result<SpdMatrix> {
    if qs.len() != spec.depth() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} mixing matrices, got {}",
            spec.depth(),
            qs.len()
        )));
    }
    check_tmap_inputs(spec.n0, qs)?;
    let f = backward_factors(spec.mask, qs)?;
    Ok(SpdMatrix::from_factor(&f[0]))
}

/// `K_{μν} = Σ_{a,r,s} tq_{rs} x^μ_{a,r} x^ν_{a,s} / (λ* C_0 N_0)`.
///
/// The `1/N_0` comes from the readout normalization `1/√(C_L N_0)`.
pub fn kernel_conv(spec: &ConvNetworkSpec, x: &[DMatrix<f64>], tq: &DMatrix<f64>) -> DMatrix<f64> {
    let p = x.len();
    let c0 = spec.c0();
    let mut k = DMatrix::<f64>::zeros(p, p);
    for a in 0..c0 {
        let xa = DMatrix::from_fn(p, spec.n0, |mu, i| x[mu][(a, i)]);
        k += &xa * tq * xa.transpose();
    }
    let k = k / (spec.lambda_star() * c0 as f64 * spec.n0 as f64);
    (&k + k.transpose()) * 0.5
}

/// `Σ_a X_aᵀ X_a` over channels, the Gram matrix whose definiteness makes the
/// kernel definite.
pub fn channel_gram(x: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = x.len();
    DMatrix::from_fn(p, p, |mu, nu| x[mu].dot(&x[nu]))
}

fn check_conv_weights(spec: &ConvNetworkSpec, w: &ConvWeights) -> Result<()> {
    let l = spec.depth();
    if w.layers.len() != l {
        return Err(Error::ShapeMismatch(format!("expected {l} conv layers")));
    }
    for (k, layer) in w.layers.iter().enumerate() {
        if layer.len() != spec.mask {
            return Err(Error::ShapeMismatch(format!("layer {k} needs {} shifts", spec.mask)));
        }
        for m in layer {
            if m.nrows() != spec.channels[k + 1] || m.ncols() != spec.channels[k] {
                return Err(Error::ShapeMismatch(format!(
                    "layer {k} weights must be {}x{}",
                    spec.channels[k + 1],
                    spec.channels[k]
                )));
            }
        }
    }
    if w.readout.nrows() != spec.channels[l] || w.readout.ncols() != spec.n0 {
        return Err(Error::ShapeMismatch(format!(
            "readout must be {}x{}",
            spec.channels[l], spec.n0
        )));
    }
    Ok(())
}

/// Columns of `h` shifted so that column `i` holds `h[:, i+m mod N_0]`.
fn shifted(h: &DMatrix<f64>, m: i64) -> DMatrix<f64> {
    let n = h.ncols() as i64;
    DMatrix::from_fn(h.nrows(), h.ncols(), |a, i| h[(a, (i as i64 + m).rem_euclid(n) as usize)])
}

/// Network outputs `S^μ` for every example.
pub fn conv_forward(spec: &ConvNetworkSpec, w: &ConvWeights, x: &[DMatrix<f64>]) -> Result<DVector<f64>> {
    spec.validate()?;
    check_conv_weights(spec, w)?;
    spec.check_input(x)?;
    let h0 = spec.half_mask();
    let l = spec.depth();
    let out = x.iter().map(|xm| {
        let mut h = xm.clone();
        for (k, layer) in w.layers.iter().enumerate() {
            let scale = ((spec.mask * spec.channels[k]) as f64).sqrt();
            let mut next = DMatrix::<f64>::zeros(spec.channels[k + 1], spec.n0);
            for (idx, wm) in layer.iter().enumerate() {
                next += wm * shifted(&h, idx as i64 - h0);
            }
            h = next / scale;
        }
        w.readout.dot(&h) / ((spec.channels[l] * spec.n0) as f64).sqrt()
    });
    Ok(DVector::from_iterator(x.len(), out))
}

pub fn sample_conv_weights<R: Rng + ?Sized>(spec: &ConvNetworkSpec, rng: &mut R) -> ConvWeights {
    let l = spec.depth();
    let layers = (0..l)
        .map(|k| {
            let normal = Normal::new(0.0, spec.precisions[k].powf(-0.5)).expect("finite precision");
            (0..spec.mask)
                .map(|_| DMatrix::from_fn(spec.channels[k + 1], spec.channels[k], |_, _| normal.sample(rng)))
                .collect()
        })
        .collect();
    let normal = Normal::new(0.0, spec.precisions[l].powf(-0.5)).expect("finite precision");
    let readout = DMatrix::from_fn(spec.channels[l], spec.n0, |_, _| normal.sample(rng));
    ConvWeights { layers, readout }
}

pub fn draw_conv_weightspace<R: Rng + ?Sized>(
    spec: &ConvNetworkSpec,
    x: &[DMatrix<f64>],
    rng: &mut R,
) -> Result<DVector<f64>> {
    let w = sample_conv_weights(spec, rng);
    conv_forward(spec, &w, x)
}

pub fn sample_prior_conv_weightspace(
    spec: &ConvNetworkSpec,
    x: &[DMatrix<f64>],
    n_samples: usize,
    stream: &RngStream,
) -> Result<Vec<DVector<f64>>> {
    spec.validate()?;
    spec.check_input(x)?;
    let parts = chunked(stream, n_samples, |s, len| {
        let mut rng = s.rng();
        (0..len)
            .map(|_| draw_conv_weightspace(spec, x, &mut rng).expect("shapes checked"))
            .collect::<Vec<_>>()
    });
    Ok(parts.into_iter().flatten().collect())
}

/// Mixture sampler: `Q_ℓ ~ W_{N_0}(𝟙/C_ℓ, C_ℓ)`, then
/// `S^μ = Σ_a g_aᵀ U*_1 x^μ_a / √(λ* C_0 N_0)` with `g_a ~ N(0, 𝟙_{N_0})`,
/// which has covariance `K_C` without factoring `K_C` itself.
#[derive(Debug, Clone)]
pub struct ConvMixtureSampler {
    spec: ConvNetworkSpec,
    samplers: Vec<BartlettSampler>,
}

impl ConvMixtureSampler {
    pub fn new(spec: &ConvNetworkSpec) -> Result<Self> {
        spec.validate()?;
        spec.check_mixture()?;
        Ok(Self {
            spec: spec.clone(),
            samplers: isotropic_samplers(spec.n0, spec.hidden_channels())?,
        })
    }

    pub fn mixing<R: Rng + ?Sized>(&self, rng: &mut R) -> MixingSample {
        sample_wishart_tuple(&self.samplers, rng)
    }

    pub fn draw_given<R: Rng + ?Sized>(
        &self,
        x: &[DMatrix<f64>],
        top: &CholeskyFactor,
        rng: &mut R,
    ) -> DVector<f64> {
        let spec = &self.spec;
        let scale = (spec.lambda_star() * spec.c0() as f64 * spec.n0 as f64).sqrt();
        // gᵀ U* x = gᵀ F*ᵀ x = (F* g)ᵀ x
        let projected: Vec<DVector<f64>> = (0..spec.c0())
            .map(|_| top.lower() * DVector::from_fn(spec.n0, |_, _| rng.sample(StandardNormal)))
            .collect();
        DVector::from_iterator(
            x.len(),
            x.iter().map(|xm| {
                (0..spec.c0())
                    .map(|a| xm.row(a).transpose().dot(&projected[a]))
                    .sum::<f64>()
                    / scale
            }),
        )
    }

    pub fn draw<R: Rng + ?Sized>(&self, x: &[DMatrix<f64>], rng: &mut R) -> DVector<f64> {
        let mix = self.mixing(rng);
        let f = backward_factors(self.spec.mask, &mix.qs).expect("Wishart draws are PD");
        self.draw_given(x, &f[0], rng)
    }
}

pub fn sample_prior_conv_mixture(
    spec: &ConvNetworkSpec,
    x: &[DMatrix<f64>],
    n_samples: usize,
    stream: &RngStream,
) -> Result<Vec<DVector<f64>>> {
    let sampler = ConvMixtureSampler::new(spec)?;
    spec.check_input(x)?;
    let parts = chunked(stream, n_samples, |s, len| {
        let mut rng = s.rng();
        (0..len).map(|_| sampler.draw(x, &mut rng)).collect::<Vec<_>>()
    });
    Ok(parts.into_iter().flatten().collect())
}

/// Both sides of the determinant identity
/// `det(𝟙 + (𝟙_{N_0} ⊗ ssᵀ) K) = det(𝟙_{N_0} + Σ_{μν} s_μ s_ν K_{·,μν})`
/// for an `(N_0 P)×(N_0 P)` matrix indexed by `(i, μ) ↦ i·P + μ`.
pub fn spectrum_lemma_check(k: &DMatrix<f64>, s: &DVector<f64>) -> Result<(f64, f64)> {
    let p = s.len();
    if p == 0 || k.nrows() != k.ncols() || !k.nrows().is_multiple_of(p) {
        return Err(Error::ShapeMismatch("tensor size must be a multiple of len(s)".into()));
    }
    let n0 = k.nrows() / p;
    let proj = crate::linalg::kron(&DMatrix::identity(n0, n0), &(s * s.transpose()));
    let lhs = (DMatrix::<f64>::identity(n0 * p, n0 * p) + proj * k).determinant();
    let reduced = DMatrix::from_fn(n0, n0, |i, j| {
        let mut acc = 0.0;
        for mu in 0..p {
            for nu in 0..p {
                acc += s[mu] * s[nu] * k[(i * p + mu, j * p + nu)];
            }
        }
        acc
    });
    let rhs = (DMatrix::<f64>::identity(n0, n0) + reduced).determinant();
    Ok((lhs, rhs))
}
