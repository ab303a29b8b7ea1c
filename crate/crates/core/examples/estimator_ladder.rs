//! Evaluates both forms of the least-squares estimator along a ladder of
//! distances to the horizon, with the renormalized error of the regime.
//!
//! cargo run --release --example estimator_ladder

use fracbridge::bridge::{build_bridge, ModelParams};
use fracbridge::estimator::{estimate_ladder, renormalized_errors, EvalLadder};
use fracbridge::fbm::sample_davies_harte;
use fracbridge::rng::stream;

fn main() -> fracbridge::Result<()> {
    let params = ModelParams::new(0.2, 1.0, 0.7)?;
    let ladder = EvalLadder::geometric(1.0, 4)?;
    let grid = ladder.grid(1 << 17)?;
    let (mut s, tag) = stream(11, 0);
    let path = sample_davies_harte(params.hurst, &grid, &mut s, tag)?;
    let bridge = build_bridge(&path, params)?;
    let est = renormalized_errors(estimate_ladder(&bridge, &ladder)?, &params)?;

    println!("{:>8} {:>12} {:>12} {:>12} {:>14}", "epsilon", "direct", "identity", "error", "renormalized");
    for e in &est.entries {
        let r = e.renormalized.values().next().copied().unwrap_or(f64::NAN);
        println!(
            "{:>8.0e} {:>12.6} {:>12.6} {:>12.6} {:>14.6}",
            e.epsilon, e.alpha_hat_direct, e.alpha_hat_identity, e.error, r
        );
    }
    Ok(())
}
