//! Wishart and matrix-normal sampling.
//!
//! Wishart draws use the Bartlett construction: if `V = L Lᵀ` and `A` is lower
//! triangular with `A_ii² ~ χ²(n − i)` (0-based `i`) and standard normal
//! entries below the diagonal, then `W = (L A)(L A)ᵀ ~ W_p(V, n)` and `L A` is
//! already the Cholesky factor of `W`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, CholeskyFactor, SpdMatrix};
use crate::rng::{chunked, RngStream};
use crate::stats::MeanAccumulator;

/// Reusable Bartlett sampler for a fixed `(dim, dof, scale)`.
#[derive(Debug, Clone)]
pub struct BartlettSampler {
    dim: usize,
    dof: usize,
    chis: Vec<ChiSquared<f64>>,
    scale_lower: DMatrix<f64>,
    isotropic: Option<f64>,
}

impl BartlettSampler {
    pub fn new(dof: usize, scale: &SpdMatrix) -> Result<Self> {
        let dim = scale.dim();
        let mut s = Self::isotropic(dim, dof, 1.0)?;
        s.scale_lower = scale.cholesky()?.lower().clone();
        s.isotropic = None;
        Ok(s)
    }

    /// Sampler for `W_dim(c·𝟙, dof)`.
    pub fn isotropic(dim: usize, dof: usize, c: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("Wishart dimension must be positive".into()));
        }
        if dof <= dim {
            return Err(Error::DofTooSmall { dim, dof });
        }
        if !(c > 0.0) {
            return Err(Error::InvalidArgument("Wishart scale must be positive".into()));
        }
        let chis = (0..dim)
            .map(|i| ChiSquared::new((dof - i) as f64).expect("positive dof"))
            .collect();
        Ok(Self {
            dim,
            dof,
            chis,
            scale_lower: DMatrix::identity(dim, dim) * c.sqrt(),
            isotropic: Some(c.sqrt()),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    /// Draws the Cholesky factor `L A` of a Wishart matrix.
    pub fn sample_factor<R: Rng + ?Sized>(&self, rng: &mut R) -> CholeskyFactor {
        let p = self.dim;
        let mut a = DMatrix::<f64>::zeros(p, p);
        for i in 0..p {
            a[(i, i)] = self.chis[i].sample(rng).sqrt();
            for j in 0..i {
                a[(i, j)] = rng.sample(StandardNormal);
            }
        }
        let lower = match self.isotropic {
            Some(s) => a * s,
            None => &self.scale_lower * a,
        };
        CholeskyFactor::from_lower_unchecked(lower)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SpdMatrix {
        SpdMatrix::from_factor(&self.sample_factor(rng))
    }
}

/// One draw from `W_dim(scale, dof)`; requires `dof > dim`.
pub fn sample_wishart<R: Rng + ?Sized>(
    dim: usize,
    dof: usize,
    scale: &SpdMatrix,
    rng: &mut R,
) -> Result<SpdMatrix> {
    if scale.dim() != dim {
        return Err(Error::ShapeMismatch(format!(
            "scale is {}x{}, expected dimension {dim}",
            scale.dim(),
            scale.dim()
        )));
    }
    Ok(BartlettSampler::new(dof, scale)?.sample(rng))
}

/// Log density of `W_p(V, n)` at `Q`.
pub fn wishart_log_density(q: &SpdMatrix, scale: &SpdMatrix, dof: usize) -> Result<f64> {
    let p = q.dim();
    if scale.dim() != p {
        return Err(Error::ShapeMismatch("Q and the scale must share one dimension".into()));
    }
    if dof <= p {
        return Err(Error::DofTooSmall { dim: p, dof });
    }
    let n = dof as f64;
    let pf = p as f64;
    let fv = scale.cholesky()?;
    let fq = q.cholesky()?;
    // tr(V⁻¹Q) = ‖L_V⁻¹ L_Q‖²_F
    let tr = fv
        .lower()
        .solve_lower_triangular(fq.lower())
        .expect("positive diagonal")
        .norm_squared();
    let ln_mgamma = pf * (pf - 1.0) / 4.0 * std::f64::consts::PI.ln()
        + (0..p)
            .map(|j| crate::special::ln_gamma(0.5 * (n - j as f64)))
            .sum::<f64>();
    Ok(0.5 * (n - pf - 1.0) * fq.log_det() - 0.5 * tr - 0.5 * n * pf * 2f64.ln() - 0.5 * n * fv.log_det() - ln_mgamma)
}

/// `rows × cols` standard normal matrix.
pub fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Draw `Z ~ MN(0, row_cov, col_cov)`, i.e. `vec(Z) ~ N(0, col_cov ⊗ row_cov)`.
pub fn sample_matrix_normal<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    row_cov: &SpdMatrix,
    col_cov: &SpdMatrix,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if row_cov.dim() != rows || col_cov.dim() != cols {
        return Err(Error::ShapeMismatch(format!(
            "matrix normal {rows}x{cols} with row covariance {} and column covariance {}",
            row_cov.dim(),
            col_cov.dim()
        )));
    }
    let a = row_cov.cholesky()?;
    let b = col_cov.cholesky()?;
    let g = standard_normal_matrix(rows, cols, rng);
    Ok(a.lower() * g * b.upper())
}

/// Closed form and Monte-Carlo estimate of the Wishart Laplace functional
/// `E[exp(−α/2 · tr(C Q))] = det(𝟙 + α V C)^(−n/2)` for `Q ~ W(V, n)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LaplaceCheck {
    pub mc_estimate: f64,
    pub mc_std_error: f64,
    pub closed_form: f64,
}

impl LaplaceCheck {
    pub fn z_score(&self) -> f64 {
        if self.mc_std_error == 0.0 {
            if self.mc_estimate == self.closed_form {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mc_estimate - self.closed_form) / self.mc_std_error
        }
    }
}

/// `log det(𝟙 + α V C)`, after checking every eigenvalue is positive.
pub fn wishart_laplace_log_closed_form(scale: &SpdMatrix, c: &DMatrix<f64>, alpha: f64) -> Result<f64> {
    let p = scale.dim();
    if c.nrows() != p || c.ncols() != p {
        return Err(Error::ShapeMismatch("C must match the scale dimension".into()));
    }
    let l = scale.cholesky()?;
    // 𝟙 + α V C is similar to the symmetric 𝟙 + α Lᵀ C L.
    let m = DMatrix::<f64>::identity(p, p) + l.upper() * c * l.lower() * alpha;
    let (min_eigenvalue, _) = crate::linalg::eigen_range(&m);
    if !(min_eigenvalue > 0.0) {
        return Err(Error::EigenvalueViolation { min_eigenvalue });
    }
    Ok(cholesky(&m)?.log_det())
}

pub fn wishart_laplace_check(
    scale: &SpdMatrix,
    dof: usize,
    c: &DMatrix<f64>,
    alpha: f64,
    n_draws: usize,
    stream: &RngStream,
) -> Result<LaplaceCheck> {
    let log_det = wishart_laplace_log_closed_form(scale, c, alpha)?;
    let closed_form = (-0.5 * dof as f64 * log_det).exp();
    let sampler = BartlettSampler::new(dof, scale)?;
    let parts = chunked(stream, n_draws, |s, len| {
        let mut rng = s.rng();
        let mut acc = MeanAccumulator::new(1);
        for _ in 0..len {
            let q = sampler.sample_factor(&mut rng).reconstruct();
            let v = (-0.5 * alpha * (c * q).trace()).exp();
            acc.push(&DVector::from_element(1, v));
        }
        acc
    });
    let acc = MeanAccumulator::merge_all(parts, 1);
    Ok(LaplaceCheck {
        mc_estimate: acc.mean()[0],
        mc_std_error: acc.std_error()[0],
        closed_form,
    })
}
