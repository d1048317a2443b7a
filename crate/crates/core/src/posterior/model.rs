use nalgebra::{DMatrix, DVector};

use crate::conv::{backward_factors, channel_gram, draw_conv_weightspace, kernel_conv, ConvNetworkSpec};
use crate::error::{Error, Result};
use crate::fc::{draw_weightspace, gram_fc, FcNetworkSpec};
use crate::linalg::kron;
use crate::mixing::MixingSample;
use crate::rng::StreamRng;

/// An architecture together with a fixed set of inputs, seen through its
/// Wishart-mixture representation: mixing draws `Q_ℓ ~ W_dim(𝟙/n_ℓ, n_ℓ)` and
/// a conditional output covariance `kernel(Q)`.
pub trait MixtureModel: Sync {
    /// Per-example test input.
    type Input: Clone;

    /// Size of the mixing matrices (`D` for FC, `N_0` for conv).
    fn mixing_dim(&self) -> usize;
    /// Degrees of freedom `n_ℓ` of the mixing Wisharts.
    fn mixing_dofs(&self) -> Vec<usize>;
    /// Outputs per example (`D` for FC, 1 for conv).
    fn out_dim(&self) -> usize;
    fn n_examples(&self) -> usize;
    /// Conditional covariance of all outputs, ordered example-major.
    fn kernel(&self, mix: &MixingSample) -> Result<DMatrix<f64>>;
    /// Gram matrix whose definiteness makes the kernel definite.
    fn design_gram(&self) -> DMatrix<f64>;
    /// The same model with `x0` prepended to the inputs.
    fn with_test_input(&self, x0: &Self::Input) -> Result<Self>
    where
        Self: Sized;
    /// Model restricted to a reordering of its examples.
    fn permuted(&self, order: &[usize]) -> Self
    where
        Self: Sized;
    /// All outputs from one weight-space prior draw, ordered like `kernel`.
    fn weightspace_draw(&self, rng: &mut StreamRng) -> DVector<f64>;

    fn check_mixture(&self) -> Result<()> {
        let dim = self.mixing_dim();
        match self.mixing_dofs().into_iter().find(|&n| n <= dim) {
            Some(dof) => Err(Error::DofTooSmall { dim, dof }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcModel {
    pub spec: FcNetworkSpec,
    /// `N_0×P` inputs.
    pub x: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl FcModel {
    pub fn new(spec: FcNetworkSpec, x: DMatrix<f64>) -> Result<Self> {
        spec.validate()?;
        if x.nrows() != spec.n0 {
            return Err(Error::ShapeMismatch(format!(
                "inputs have {} rows, expected n0 = {}",
                x.nrows(),
                spec.n0
            )));
        }
        let gram = gram_fc(&spec, &x);
        Ok(Self { spec, x, gram })
    }

    /// `XᵀX/(N_0 λ*)`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }
}

impl MixtureModel for FcModel {
    type Input = DVector<f64>;

    fn mixing_dim(&self) -> usize {
        self.spec.d
    }

    fn mixing_dofs(&self) -> Vec<usize> {
        self.spec.widths.clone()
    }

    fn out_dim(&self) -> usize {
        self.spec.d
    }

    fn n_examples(&self) -> usize {
        self.x.ncols()
    }

    fn kernel(&self, mix: &MixingSample) -> Result<DMatrix<f64>> {
        if mix.dim() != self.spec.d || mix.depth() != self.spec.depth() {
            return Err(Error::ShapeMismatch("mixing sample does not match the network".into()));
        }
        Ok(kron(&self.gram, mix.q_top.matrix()))
    }

    fn design_gram(&self) -> DMatrix<f64> {
        self.x.transpose() * &self.x
    }

    fn with_test_input(&self, x0: &DVector<f64>) -> Result<Self> {
        if x0.len() != self.spec.n0 {
            return Err(Error::ShapeMismatch(format!(
                "test input has length {}, expected {}",
                x0.len(),
                self.spec.n0
            )));
        }
        let mut x = DMatrix::zeros(self.spec.n0, self.x.ncols() + 1);
        x.set_column(0, x0);
        x.view_mut((0, 1), (self.spec.n0, self.x.ncols())).copy_from(&self.x);
        Self::new(self.spec.clone(), x)
    }

    fn permuted(&self, order: &[usize]) -> Self {
        let x = DMatrix::from_fn(self.x.nrows(), order.len(), |i, j| self.x[(i, order[j])]);
        Self::new(self.spec.clone(), x).expect("same shape")
    }

    fn weightspace_draw(&self, rng: &mut StreamRng) -> DVector<f64> {
        let s = draw_weightspace(&self.spec, &self.x, rng).expect("shapes checked at construction");
        DVector::from_column_slice(s.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvModel {
    pub spec: ConvNetworkSpec,
    /// One `C_0×N_0` matrix per example.
    pub x: Vec<DMatrix<f64>>,
}

impl ConvModel {
    pub fn new(spec: ConvNetworkSpec, x: Vec<DMatrix<f64>>) -> Result<Self> {
        spec.validate()?;
        spec.check_input(&x)?;
        Ok(Self { spec, x })
    }
}

impl MixtureModel for ConvModel {
    type Input = DMatrix<f64>;

    fn mixing_dim(&self) -> usize {
        self.spec.n0
    }

    fn mixing_dofs(&self) -> Vec<usize> {
        self.spec.hidden_channels().to_vec()
    }

    fn out_dim(&self) -> usize {
        1
    }

    fn n_examples(&self) -> usize {
        self.x.len()
    }

    fn kernel(&self, mix: &MixingSample) -> Result<DMatrix<f64>> {
        if mix.dim() != self.spec.n0 || mix.depth() != self.spec.depth() {
            return Err(Error::ShapeMismatch("mixing sample does not match the network".into()));
        }
        let f = backward_factors(self.spec.mask, &mix.qs)?;
        Ok(kernel_conv(&self.spec, &self.x, &f[0].reconstruct()))
    }

    fn design_gram(&self) -> DMatrix<f64> {
        channel_gram(&self.x)
    }

    fn with_test_input(&self, x0: &DMatrix<f64>) -> Result<Self> {
        let mut x = Vec::with_capacity(self.x.len() + 1);
        x.push(x0.clone());
        x.extend(self.x.iter().cloned());
        Self::new(self.spec.clone(), x)
    }

    fn permuted(&self, order: &[usize]) -> Self {
        Self {
            spec: self.spec.clone(),
            x: order.iter().map(|&i| self.x[i].clone()).collect(),
        }
    }

    fn weightspace_draw(&self, rng: &mut StreamRng) -> DVector<f64> {
        draw_conv_weightspace(&self.spec, &self.x, rng).expect("shapes checked at construction")
    }
}
