//! Draws fBm paths with both exact samplers and compares the empirical
//! variance of B(1) and of one increment against the covariance function.
//!
//! cargo run --release --example sample_fbm

use fracbridge::fbm::{covariance, sample_hosking, DaviesHarte, HurstParam, TimeGrid};
use fracbridge::rng::stream;

fn main() -> fracbridge::Result<()> {
    let grid = TimeGrid::new(1.0, 256)?;
    let paths = 4000u64;
    for h in [0.55, 0.7, 0.9] {
        let hurst = HurstParam::new(h)?;
        let dh = DaviesHarte::new(hurst, &grid)?;
        let (mut var_dh, mut var_hk, mut cov_dh) = (0.0, 0.0, 0.0);
        for i in 0..paths {
            let (mut s, tag) = stream(1, i);
            let p = dh.sample(&mut s, tag);
            var_dh += p.terminal().powi(2);
            cov_dh += p.values[128] * p.terminal();
            let (mut s, tag) = stream(2, i);
            var_hk += sample_hosking(hurst, &grid, &mut s, tag).terminal().powi(2);
        }
        let n = paths as f64;
        println!(
            "H {h}: Var B(1) davies-harte {:.4} hosking {:.4} exact 1; Cov(B(.5), B(1)) {:.4} exact {:.4}",
            var_dh / n,
            var_hk / n,
            cov_dh / n,
            covariance(hurst, 0.5, 1.0)
        );
    }
    Ok(())
}
