//! Posterior mixing measure of a one-hidden-layer network: importance
//! sampling, Metropolis and the mean-field tilt.

use dlnk::fc::FcNetworkSpec;
use dlnk::posterior::{meanfield_mixing_mh, posterior_mixing_is, posterior_mixing_mh, FcModel, MhSettings};
use dlnk::RngStream;
use nalgebra::{DMatrix, DVector};

fn main() -> dlnk::Result<()> {
    let spec = FcNetworkSpec::unit(3, vec![8], 1)?;
    let x = DMatrix::from_column_slice(3, 3, &[1.0, 0.2, -0.5, -0.3, 1.1, 0.4, 0.7, -0.9, 1.2]);
    let y = DVector::from_vec(vec![1.1, -0.7, 0.4]);
    let model = FcModel::new(spec, x)?;
    let q = |m: &dlnk::MixingSample| m.q_top.matrix()[(0, 0)];

    let is = posterior_mixing_is(&model, &y, 4.0, 200_000, &RngStream::new(4, 0))?;
    let (m, se) = is.expect(q);
    println!("IS   E[Q|y] = {m:.4} ± {se:.4}  (ess {:.0}, ln Z {:.4})", is.ess, is.log_normalizer.unwrap_or(f64::NAN));

    let mh = posterior_mixing_mh(&model, &y, 4.0, &MhSettings::default(), &RngStream::new(4, 1))?;
    let (m, se) = mh.expect(q);
    println!("MH   E[Q|y] = {m:.4} ± {se:.4}  (acceptance {:.2})", mh.acceptance_rate.unwrap_or(f64::NAN));

    let mf = meanfield_mixing_mh(&model, &y, 4.0, &MhSettings::default(), &RngStream::new(4, 2))?;
    let (m, se) = mf.expect(q);
    println!("mean-field E[Q|y] = {m:.4} ± {se:.4}");
    Ok(())
}
