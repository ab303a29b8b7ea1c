//! Full verification run: the pass/fail checks of one regime and the
//! JSON summary the `verify` command writes.
//!
//! cargo run --release --example verify_run

use fracbridge::bridge::ModelParams;
use fracbridge::estimator::EvalLadder;
use fracbridge::mcharness::{run, McConfig};

fn main() -> fracbridge::Result<()> {
    let params = ModelParams::new(0.3, 1.0, 0.8)?;
    let ladder = EvalLadder::new(1.0, vec![1e-1, 1e-2, 1e-3])?;
    let summary = run(&McConfig::new(params, 1 << 15, ladder, 300, 5)?)?;
    for c in &summary.checks {
        println!("{:<13} {} {:.4} (threshold {})", c.name.label(), if c.pass { "pass" } else { "FAIL" }, c.statistic, c.threshold);
    }
    println!("{}", summary.to_json()?);
    Ok(())
}
