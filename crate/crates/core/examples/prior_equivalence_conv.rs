//! Mixture sampler with the backward recursion vs direct convolutional weights.

use dlnk::conv::ConvNetworkSpec;
use dlnk::equivalence::conv_prior_equivalence;
use dlnk::wishart::standard_normal_matrix;
use dlnk::RngStream;
use nalgebra::DMatrix;

fn main() -> dlnk::Result<()> {
    let spec = ConvNetworkSpec::unit(3, vec![2, 6, 6], 3)?;
    let mut rng = RngStream::new(2, 1).rng();
    let x: Vec<DMatrix<f64>> = (0..3).map(|_| standard_normal_matrix(2, 3, &mut rng)).collect();
    let r = conv_prior_equivalence(&spec, &x, 100_000, &RngStream::new(2, 0))?;
    for (label, z) in r.labels.iter().zip(&r.z_scores) {
        println!("{label:<22} z {z:>6.2}");
    }
    println!("max |z| = {:.3}", r.max_abs_z);
    Ok(())
}
