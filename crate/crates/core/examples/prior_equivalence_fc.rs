//! Wishart-mixture vs weight-space prior samplers for a fully-connected network.

use dlnk::equivalence::fc_prior_equivalence;
use dlnk::fc::FcNetworkSpec;
use dlnk::wishart::standard_normal_matrix;
use dlnk::RngStream;

fn main() -> dlnk::Result<()> {
    let spec = FcNetworkSpec::unit(3, vec![8, 8], 2)?;
    let x = standard_normal_matrix(3, 2, &mut RngStream::new(1, 1).rng());
    let r = fc_prior_equivalence(&spec, &x, 100_000, &RngStream::new(1, 0))?;
    for ((label, a), (b, z)) in r.labels.iter().zip(&r.mixture_mean).zip(r.weightspace_mean.iter().zip(&r.z_scores)) {
        println!("{label:<22} mixture {a:>9.4}  weights {b:>9.4}  z {z:>6.2}");
    }
    println!("max |z| = {:.3}", r.max_abs_z);
    Ok(())
}
