//! Builds one fractional bridge and prints a few points of each component.
//!
//! cargo run --release --example bridge_paths

use fracbridge::bridge::{build_bridge, ModelParams};
use fracbridge::fbm::{DaviesHarte, TimeGrid};
use fracbridge::rng::stream;

fn main() -> fracbridge::Result<()> {
    let params = ModelParams::new(0.3, 1.0, 0.7)?;
    let grid = TimeGrid::new(1.0 - 1e-4, 1 << 14)?;
    let dh = DaviesHarte::new(params.hurst, &grid)?;
    let (mut s, tag) = stream(7, 0);
    let path = dh.sample(&mut s, tag);
    let bridge = build_bridge(&path, params)?;

    println!("{:>10} {:>12} {:>12} {:>12} {:>12}", "t", "B", "xi", "eta", "X");
    for i in (0..=grid.n_steps()).step_by(grid.n_steps() / 8) {
        println!(
            "{:>10.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            grid.times()[i],
            path.values[i],
            bridge.xi[i],
            bridge.eta[i],
            bridge.x[i]
        );
    }
    Ok(())
}
