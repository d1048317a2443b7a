//! Bayesian model evidence at finite and zero temperature.

use dlnk::evidence::{evidence_finite_beta, evidence_zero_temperature, omega, zero_temperature_log_scale, EvidenceMethod};
use dlnk::fc::FcNetworkSpec;
use dlnk::RngStream;
use nalgebra::{DMatrix, DVector};

fn main() -> dlnk::Result<()> {
    let x = DMatrix::from_column_slice(4, 3, &[1.0, 0.2, -0.5, 0.3, -0.3, 1.1, 0.4, -0.8, 0.7, -0.9, 1.2, 0.5]);
    let y = DVector::from_vec(vec![0.6, -0.2, 1.0]);
    for widths in [vec![9], vec![9, 12]] {
        let spec = FcNetworkSpec::unit(4, widths.clone(), 1)?;
        println!("widths {widths:?}, omega = {:.4}", omega(&spec, &x, &y)?);
        let mut methods = vec![
            EvidenceMethod::LogConvolution,
            EvidenceMethod::MonteCarlo {
                n_samples: 200_000,
                stream: RngStream::new(5, 0),
            },
        ];
        if widths.len() == 1 {
            methods.insert(0, EvidenceMethod::BesselClosedForm);
        }
        for m in &methods {
            let r = evidence_zero_temperature(&spec, &x, &y, m)?;
            println!("  zero temperature {:?}: ln Z = {:.6} (rel. err {:.1e})", r.method, r.log_value, r.error_estimate);
        }
        let beta = 1e4;
        let f = evidence_finite_beta(&spec, &x, &y, beta, &EvidenceMethod::Quadrature)?;
        let scaled = f.log_value + zero_temperature_log_scale(&spec, &x, beta)?;
        println!("  beta = {beta:e}: ln Z = {:.6}, rescaled {scaled:.6}", f.log_value);
    }
    Ok(())
}
