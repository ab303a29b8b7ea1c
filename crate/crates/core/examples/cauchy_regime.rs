//! Monte Carlo view of the Cauchy limit: quantiles of the renormalized
//! error against the predicted Cauchy scale.
//!
//! cargo run --release --example cauchy_regime

use fracbridge::bridge::ModelParams;
use fracbridge::estimator::EvalLadder;
use fracbridge::limits::constants;
use fracbridge::mcharness::{ks_cauchy, robust_scale, run_detailed, McConfig};

fn main() -> fracbridge::Result<()> {
    let params = ModelParams::new(0.1, 1.0, 0.7)?;
    let scale = constants(&params)?.cauchy_scale.expect("cauchy regime");
    let ladder = EvalLadder::new(1.0, vec![1e-1, 1e-2, 1e-3])?;
    let config = McConfig::new(params, 1 << 15, ladder, 500, 3)?;
    let outcome = run_detailed(&config)?;

    println!("predicted Cauchy scale {scale:.4}");
    for (k, row) in outcome.summary.ladder.iter().enumerate() {
        let sample: Vec<f64> = outcome.replications.iter().map(|r| r.renormalized[k]).collect();
        let robust = robust_scale(&sample)?;
        println!(
            "epsilon {:.0e}: median {:+.4} half-IQR {:.4} KS vs Cauchy {:.4}",
            row.epsilon,
            robust.median,
            robust.half_iqr,
            ks_cauchy(&sample, scale)?
        );
    }
    Ok(())
}
