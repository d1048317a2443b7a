//! Width ladder of the distance between Q^(L) and its concentration point.

use dlnk::fc::FcNetworkSpec;
use dlnk::ldp::{concentration_probe, ProbeRegime};
use dlnk::RngStream;

fn main() -> dlnk::Result<()> {
    let spec = FcNetworkSpec::unit(2, vec![4, 4], 2)?;
    let t = concentration_probe(&spec, &ProbeRegime::Lazy { n_draws: 20_000 }, &[10, 30, 100, 300, 1000], &RngStream::new(6, 0))?;
    for r in &t.rows {
        println!("N = {:>5}: E|Q - 1|_F = {:.5} ± {:.5}", r.width, r.mean_distance, r.std_error);
    }
    println!("log-log slope {:.4}", t.log_log_slope);
    Ok(())
}
