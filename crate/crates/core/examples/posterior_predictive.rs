//! Posterior predictive as a mixture over the posterior mixing measure,
//! checked against importance-sampled network weights.

use dlnk::fc::FcNetworkSpec;
use dlnk::posterior::{predictive_mixture, weightspace_posterior_oracle, FcModel, MhSettings, SamplerChoice};
use dlnk::RngStream;
use nalgebra::{DMatrix, DVector};

fn main() -> dlnk::Result<()> {
    let spec = FcNetworkSpec::unit(3, vec![6], 1)?;
    let x = DMatrix::from_column_slice(3, 2, &[1.0, 0.2, -0.5, -0.3, 1.1, 0.4]);
    let y = DVector::from_vec(vec![0.8, -0.4]);
    let x0 = DVector::from_vec(vec![0.5, -1.0, 0.3]);
    let model = FcModel::new(spec, x)?;
    let beta = 10.0;
    for (name, choice) in [
        ("importance", SamplerChoice::Is { n: 200_000 }),
        ("metropolis", SamplerChoice::Mh(MhSettings::default())),
    ] {
        let p = predictive_mixture(&model, &x0, &y, beta, &choice, &RngStream::new(3, 0), false)?;
        println!(
            "{name:<11} mean {:.4} ± {:.4}  var {:.4} ± {:.4}  ess {:.0}",
            p.mean[0], p.mean_se[0], p.cov[(0, 0)], p.var_se[0], p.mixture.ess
        );
    }
    let o = weightspace_posterior_oracle(&model, &x0, &y, beta, 1_000_000, &RngStream::new(3, 1))?;
    println!("weights     mean {:.4} ± {:.4}  var {:.4} ± {:.4}  ess {:.0}", o.mean[0], o.mean_se[0], o.var[0], o.var_se[0], o.ess);
    Ok(())
}
