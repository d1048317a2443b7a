//! Mixing measures: tuples of independent isotropic Wishart matrices.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{CholeskyFactor, SpdMatrix};
use crate::wishart::BartlettSampler;

/// One draw `(Q_1, …, Q_L)` with cached factors and `Q^(L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingSample {
    pub qs: Vec<SpdMatrix>,
    pub factors: Vec<CholeskyFactor>,
    /// `B = U_1⋯U_L` with `U_ℓ = F_ℓᵀ`, so `Q^(L) = BᵀB`.
    pub chain: DMatrix<f64>,
    pub q_top: SpdMatrix,
}

impl MixingSample {
    pub fn from_factors(factors: Vec<CholeskyFactor>) -> Result<Self> {
        let dim = factors
            .first()
            .ok_or_else(|| Error::InvalidSpec("mixing sample needs at least one layer".into()))?
            .dim();
        if factors.iter().any(|f| f.dim() != dim) {
            return Err(Error::ShapeMismatch("mixing matrices must share one dimension".into()));
        }
        let mut chain = DMatrix::<f64>::identity(dim, dim);
        for f in &factors {
            chain *= f.upper();
        }
        let q_top = crate::linalg::symmetrize(&(chain.transpose() * &chain))?;
        let qs = factors.iter().map(SpdMatrix::from_factor).collect();
        Ok(Self {
            qs,
            factors,
            chain,
            q_top: SpdMatrix::from_raw(q_top),
        })
    }

    pub fn from_qs(qs: &[SpdMatrix]) -> Result<Self> {
        let factors = qs.iter().map(|q| q.cholesky()).collect::<Result<Vec<_>>>()?;
        Self::from_factors(factors)
    }

    /// All `Q_ℓ = 𝟙`.
    pub fn identity(dim: usize, layers: usize) -> Self {
        Self::from_qs(&vec![SpdMatrix::identity(dim); layers]).expect("identity is PD")
    }

    pub fn dim(&self) -> usize {
        self.chain.nrows()
    }

    pub fn depth(&self) -> usize {
        self.qs.len()
    }
}

/// Independent `Q_ℓ ~ W_dim(𝟙/n_ℓ, n_ℓ)`.
pub fn sample_wishart_tuple<R: Rng + ?Sized>(
    samplers: &[BartlettSampler],
    rng: &mut R,
) -> MixingSample {
    let factors = samplers.iter().map(|s| s.sample_factor(rng)).collect();
    MixingSample::from_factors(factors).expect("Bartlett factors are valid")
}

pub fn isotropic_samplers(dim: usize, dofs: &[usize]) -> Result<Vec<BartlettSampler>> {
    dofs.iter()
        .map(|&n| BartlettSampler::isotropic(dim, n, 1.0 / n as f64))
        .collect()
}

