//! Limit regime and constants for a few parameter pairs.
//!
//! cargo run --example constants

use fracbridge::bridge::ModelParams;
use fracbridge::limits::constants;

fn main() -> fracbridge::Result<()> {
    for (alpha, hurst) in [(0.1, 0.6), (0.3, 0.8), (0.45, 0.8), (0.5, 0.7), (0.8, 0.7), (0.25, 0.5), (1.0, 0.5)] {
        let c = constants(&ModelParams::new(alpha, 1.0, hurst)?)?;
        println!("alpha {alpha:<4} H {hurst:<4} {}", serde_json::to_string(&c)?);
    }
    Ok(())
}
