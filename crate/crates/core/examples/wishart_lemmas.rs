//! Wishart Laplace transform, determinant spectrum identity and conv kernel
//! positivity on random instances.

use dlnk::conv::{backward_tmap, kernel_conv, spectrum_lemma_check, ConvNetworkSpec};
use dlnk::wishart::{standard_normal_matrix, wishart_laplace_check};
use dlnk::{RngStream, SpdMatrix};
use nalgebra::{DMatrix, DVector};

fn spd(dim: usize, rng: &mut dlnk::rng::StreamRng) -> SpdMatrix {
    let a = standard_normal_matrix(dim, dim + 2, rng);
    SpdMatrix::new(&a * a.transpose() / (dim + 2) as f64 + DMatrix::identity(dim, dim) * 0.1).unwrap()
}

fn main() -> dlnk::Result<()> {
    let mut rng = RngStream::new(7, 0).rng();
    let v = spd(3, &mut rng);
    let c = spd(3, &mut rng).into_matrix();
    let l = wishart_laplace_check(&v, 6, &c, 0.5, 200_000, &RngStream::new(7, 1))?;
    println!("Laplace: MC {:.6} ± {:.6}, closed form {:.6}", l.mc_estimate, l.mc_std_error, l.closed_form);

    let k = spd(6, &mut rng).into_matrix();
    let s = DVector::from_vec(vec![0.4, -1.2]);
    let (lhs, rhs) = spectrum_lemma_check(&k, &s)?;
    println!("spectrum: {lhs:.12} vs {rhs:.12}");

    let spec = ConvNetworkSpec::unit(4, vec![2, 6, 6], 3)?;
    let qs = vec![spd(4, &mut rng), spd(4, &mut rng)];
    let tq = backward_tmap(&spec, &qs)?;
    let x: Vec<DMatrix<f64>> = (0..5).map(|_| standard_normal_matrix(2, 4, &mut rng)).collect();
    let eig = kernel_conv(&spec, &x, tq.matrix()).symmetric_eigen().eigenvalues;
    println!("conv kernel smallest eigenvalue {:.4e}", eig.min());
    Ok(())
}
