//! Replication engine and the quantile-based checks that turn each limit
//! law into a pass/fail Monte Carlo test.
//!
//! Replication `i` draws its driving path from [`rng::stream`]`(seed, i)`,
//! so a run is reproducible path by path and independent of the number of
//! worker threads. Results are collected in replication order and reduced
//! sequentially.
//!
//! Check thresholds, with the statistic compared as `statistic ≤ threshold`:
//!
//! | check          | statistic                                           | threshold |
//! |----------------|-----------------------------------------------------|-----------|
//! | `ks_cauchy`    | KS distance to `Cauchy(0, c)` at the last ε          | 0.05      |
//! | `half_iqr`     | `|half_iqr / c − 1|` at the last ε                   | 0.10      |
//! | `ks_gaussian`  | KS distance to `N(0, 2α−1)` at the last ε            | 0.05      |
//! | `as_stability` | median per-path relative change, last two ε         | 0.10      |
//! | `as_target`    | median per-path deviation from the a.s. limit       | 0.15      |
//! | `median_band`  | `|median − ½|` of the renormalized error            | 0.15      |
//! | `consistency`  | non-decreases of median `|α̂ − lim α̂|` over the ladder | 0         |
//!
//! For `NC_half` the `consistency` statistic is instead the median of
//! `|α̂ − ½|` at the last ε, with threshold 0.05. The KS threshold leaves
//! room above the 95% band (≈ 0.030 at 2000 replications) for the
//! discretization and finite-ε bias; the ±0.15 band for `α = ½` reflects
//! the `O(1/|log ε|)` speed of the almost-sure convergence.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::{BridgeKernel, BridgePaths, ModelParams};
use crate::error::{domain, Error, Result};
use crate::estimator::{estimate_ladder, renormalized_value, EstimatorLadder, EvalLadder};
use crate::fbm::{sample_hosking, DaviesHarte, GaussianPath, TimeGrid};
use crate::io::fmt17;
use crate::limits::{classify, constants, LimitConstants, Regime};
use crate::rng::stream;
use crate::stats::{cauchy_cdf, ks_statistic_sorted, normal_cdf, quantile_sorted, sorted};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest tolerated fraction of failed replications.
pub const MAX_FAILURE_RATE: f64 = 1e-3;

pub const MIN_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    DaviesHarte,
    Hosking,
}

impl FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "davies_harte" => Ok(Sampler::DaviesHarte),
            "hosking" => Ok(Sampler::Hosking),
            other => Err(Error::Config(format!(
                "unknown sampler \"{other}\" (expected davies_harte or hosking)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    KsCauchy,
    HalfIqr,
    KsGaussian,
    AsStability,
    AsTarget,
    MedianBand,
    Consistency,
}

impl CheckId {
    pub const ALL: [CheckId; 7] = [
        CheckId::KsCauchy,
        CheckId::HalfIqr,
        CheckId::KsGaussian,
        CheckId::AsStability,
        CheckId::AsTarget,
        CheckId::MedianBand,
        CheckId::Consistency,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CheckId::KsCauchy => "ks_cauchy",
            CheckId::HalfIqr => "half_iqr",
            CheckId::KsGaussian => "ks_gaussian",
            CheckId::AsStability => "as_stability",
            CheckId::AsTarget => "as_target",
            CheckId::MedianBand => "median_band",
            CheckId::Consistency => "consistency",
        }
    }

    pub fn applies_to(self, regime: Regime) -> bool {
        match self {
            CheckId::KsCauchy | CheckId::HalfIqr => regime.is_cauchy(),
            CheckId::KsGaussian => regime == Regime::B11,
            CheckId::AsStability | CheckId::AsTarget => {
                matches!(regime, Regime::R3AsRandom | Regime::R4AsHalf)
            }
            CheckId::MedianBand => regime == Regime::R4AsHalf,
            CheckId::Consistency => true,
        }
    }

    pub fn threshold(self, regime: Regime) -> f64 {
        match self {
            CheckId::KsCauchy | CheckId::KsGaussian => 0.05,
            CheckId::HalfIqr | CheckId::AsStability => 0.10,
            CheckId::AsTarget | CheckId::MedianBand => 0.15,
            CheckId::Consistency if regime == Regime::NcHalf => 0.05,
            CheckId::Consistency => 0.0,
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CheckId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckId::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown check \"{s}\"")))
    }
}

/// Every check that applies to `regime`.
pub fn default_checks(regime: Regime) -> BTreeSet<CheckId> {
    CheckId::ALL.into_iter().filter(|c| c.applies_to(regime)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub params: ModelParams,
    pub grid_n: usize,
    pub ladder: EvalLadder,
    pub replications: usize,
    pub global_seed: u64,
    pub sampler: Sampler,
    pub checks: BTreeSet<CheckId>,
    /// Multiplies the reference scale of the limit law. Only useful to
    /// confirm that the distributional checks reject a wrong scale.
    pub scale_multiplier: f64,
}

impl McConfig {
    /// Davies–Harte sampling, every applicable check, unit scale.
    pub fn new(
        params: ModelParams,
        grid_n: usize,
        ladder: EvalLadder,
        replications: usize,
        global_seed: u64,
    ) -> Result<Self> {
        let regime = classify(&params)?;
        let config = Self {
            params,
            grid_n,
            ladder,
            replications,
            global_seed,
            sampler: Sampler::DaviesHarte,
            checks: default_checks(regime),
            scale_multiplier: 1.0,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_checks(mut self, checks: impl IntoIterator<Item = CheckId>) -> Self {
        self.checks = checks.into_iter().collect();
        self
    }

    pub fn with_sampler(mut self, sampler: Sampler) -> Self {
        self.sampler = sampler;
        self
    }

    /// Checks every invariant and returns the regime of `params`.
    pub fn validate(&self) -> Result<Regime> {
        let regime = classify(&self.params)?;
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::Config(format!(
                "replications must be >= {MIN_REPLICATIONS} (got {})",
                self.replications
            )));
        }
        self.validate_design()?;
        for &check in &self.checks {
            if !check.applies_to(regime) {
                return Err(Error::Config(format!(
                    "check {check} does not apply to regime {regime}"
                )));
            }
            let needed = match check {
                CheckId::AsStability | CheckId::AsTarget => 3,
                CheckId::Consistency if regime != Regime::NcHalf => 2,
                _ => 1,
            };
            if self.ladder.len() < needed {
                return Err(Error::Config(format!(
                    "check {check} needs at least {needed} ladder epsilons (got {})",
                    self.ladder.len()
                )));
            }
        }
        Ok(regime)
    }

    /// The grid and ladder constraints alone, enough to simulate paths.
    pub fn validate_design(&self) -> Result<()> {
        if !self.grid_n.is_power_of_two() || self.grid_n < 2 {
            return Err(Error::Config(format!(
                "grid_n must be a power of two >= 2 (got {})",
                self.grid_n
            )));
        }
        if (self.ladder.horizon() - self.params.horizon).abs() > 1e-12 * self.params.horizon {
            return Err(Error::Config(format!(
                "ladder horizon {} differs from model horizon {}",
                self.ladder.horizon(),
                self.params.horizon
            )));
        }
        let grid = self.grid()?;
        if !(grid.dt() < self.ladder.smallest_epsilon() / 10.0) {
            return Err(Error::Config(format!(
                "grid step {:e} must be below a tenth of the smallest ladder epsilon {:e}; raise grid_n",
                grid.dt(),
                self.ladder.smallest_epsilon()
            )));
        }
        if !(self.scale_multiplier > 0.0 && self.scale_multiplier.is_finite()) {
            return Err(Error::Config(format!(
                "scale multiplier must be finite and > 0 (got {})",
                self.scale_multiplier
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        self.ladder.grid(self.grid_n)
    }
}

/// One replication's estimator ladder and its renormalized errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: u64,
    pub seed_tag: u64,
    pub ladder: EstimatorLadder,
    /// Renormalized error per ladder entry; `½ − α̂` for `NC_half`, NaN
    /// when the parameters have no limit regime (`α = 0`).
    pub renormalized: Vec<f64>,
}

/// Precomputed sampler and bridge weights shared by all replications.
#[derive(Debug)]
pub struct Engine {
    config: McConfig,
    regime: Option<Regime>,
    kernel: BridgeKernel,
    davies_harte: Option<DaviesHarte>,
}

impl Engine {
    /// Needs only the design constraints, so any replication count and
    /// `α = 0` are accepted.
    pub fn new(config: &McConfig) -> Result<Self> {
        config.validate_design()?;
        let regime = classify(&config.params).ok();
        let grid = config.grid()?;
        let kernel = BridgeKernel::new(&grid, config.params)?;
        let davies_harte = match config.sampler {
            Sampler::DaviesHarte => Some(DaviesHarte::new(config.params.hurst, &grid)?),
            Sampler::Hosking => None,
        };
        Ok(Self {
            config: config.clone(),
            regime,
            kernel,
            davies_harte,
        })
    }

    pub fn regime(&self) -> Option<Regime> {
        self.regime
    }

    pub fn config(&self) -> &McConfig {
        &self.config
    }

    /// The driving fBm path of replication `index`.
    pub fn driving_path(&self, index: u64) -> GaussianPath {
        let (mut s, tag) = stream(self.config.global_seed, index);
        match &self.davies_harte {
            Some(dh) => dh.sample(&mut s, tag),
            None => sample_hosking(self.config.params.hurst, self.kernel.grid(), &mut s, tag),
        }
    }

    pub fn simulate(&self, index: u64) -> Result<(GaussianPath, BridgePaths)> {
        let path = self.driving_path(index);
        let bridge = self.kernel.build(&path)?;
        Ok((path, bridge))
    }

    /// Replication `index`; errors carry the index and seed tag.
    pub fn replicate(&self, index: u64) -> Result<Replication> {
        let seed_tag = crate::rng::mix(self.config.global_seed, index);
        let wrap = |source: Error| Error::Replication {
            index,
            seed: seed_tag,
            source: Box::new(source),
        };
        let (_, bridge) = self.simulate(index).map_err(wrap)?;
        let mut ladder = estimate_ladder(&bridge, &self.config.ladder).map_err(wrap)?;
        let renormalized: Vec<f64> = ladder
            .entries
            .iter_mut()
            .map(|e| match self.regime {
                Some(regime) => {
                    let v = renormalized_value(regime, &self.config.params, e);
                    e.renormalized.insert(regime.label().to_string(), v);
                    v
                }
                None => f64::NAN,
            })
            .collect();
        Ok(Replication {
            index,
            seed_tag,
            ladder,
            renormalized,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub epsilon: f64,
    pub t: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    /// Distance to the limit law, for regimes that have one.
    pub ks_distance: Option<f64>,
    pub n_effective: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: CheckId,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(name: CheckId, statistic: f64, threshold: f64) -> Self {
        Self {
            name,
            statistic,
            threshold,
            pass: statistic <= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryParams {
    pub alpha: f64,
    pub hurst: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub schema_version: u32,
    pub regime: Regime,
    pub params: SummaryParams,
    pub grid_n: usize,
    pub replications: usize,
    pub failed_replications: usize,
    pub global_seed: u64,
    pub sampler: Sampler,
    pub ladder: Vec<LadderRow>,
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

impl McSummary {
    /// Pretty JSON with keys sorted at every level.
    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string_pretty(&value)?)
    }

    pub fn check(&self, id: CheckId) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == id)
    }
}

#[derive(Debug, Clone)]
pub struct McOutcome {
    pub summary: McSummary,
    pub replications: Vec<Replication>,
}

/// Runs `config` on the current rayon pool.
pub fn run(config: &McConfig) -> Result<McSummary> {
    run_detailed(config).map(|o| o.summary)
}

/// Runs `config` on a dedicated pool of `threads` workers (0 = one per core).
pub fn run_in_pool(config: &McConfig, threads: usize) -> Result<McOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_detailed(config))
}

pub fn run_detailed(config: &McConfig) -> Result<McOutcome> {
    let regime = config.validate()?;
    let (replications, failed) = replicate_all(&Engine::new(config)?)?;
    let summary = summarize(config, regime, &replications, failed)?;
    Ok(McOutcome {
        summary,
        replications,
    })
}

/// Every replication of `config` on a dedicated pool of `threads` workers
/// (0 = one per core), without the Monte Carlo checks. Accepts any
/// replication count and `α = 0`.
pub fn estimate_in_pool(config: &McConfig, threads: usize) -> Result<Vec<Replication>> {
    let engine = Engine::new(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| replicate_all(&engine)).map(|(reps, _)| reps)
}

/// Successful replications in index order and the number that failed.
fn replicate_all(engine: &Engine) -> Result<(Vec<Replication>, usize)> {
    let results: Vec<Result<Replication>> = (0..engine.config().replications as u64)
        .into_par_iter()
        .map(|i| engine.replicate(i))
        .collect();

    let total = results.len();
    let mut replications = Vec::with_capacity(total);
    let mut failed = 0;
    let mut first_failure = None;
    for r in results {
        match r {
            Ok(rep) => replications.push(rep),
            Err(e) => {
                failed += 1;
                first_failure.get_or_insert(e);
            }
        }
    }
    if failed as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(Error::TooManyFailures {
            failed,
            total,
            first: Box::new(first_failure.expect("a failure was counted")),
        });
    }
    Ok((replications, failed))
}

/// Reference law of the renormalized error.
#[derive(Debug, Clone, Copy)]
enum LimitLaw {
    Cauchy(f64),
    Gaussian(f64),
    None,
}

impl LimitLaw {
    fn of(constants: &LimitConstants, multiplier: f64) -> Self {
        if let Some(c) = constants.cauchy_scale {
            LimitLaw::Cauchy(c * multiplier)
        } else if let Some(v) = constants.gaussian_variance {
            LimitLaw::Gaussian(v.sqrt() * multiplier)
        } else {
            LimitLaw::None
        }
    }

    fn ks(self, sorted_sample: &[f64]) -> Option<f64> {
        match self {
            LimitLaw::Cauchy(c) => Some(ks_statistic_sorted(sorted_sample, |x| cauchy_cdf(x, c))),
            LimitLaw::Gaussian(sd) => Some(ks_statistic_sorted(sorted_sample, |x| normal_cdf(x / sd))),
            LimitLaw::None => None,
        }
    }
}

fn finite(values: impl Iterator<Item = f64>) -> Vec<f64> {
    values.filter(|v| v.is_finite()).collect()
}

fn summarize(config: &McConfig, regime: Regime, reps: &[Replication], failed: usize) -> Result<McSummary> {
    let consts = constants(&config.params)?;
    let law = LimitLaw::of(&consts, config.scale_multiplier);
    let n_ladder = config.ladder.len();
    if reps.is_empty() {
        return domain("no successful replications to summarize");
    }

    let column = |k: usize| finite(reps.iter().map(|r| r.renormalized[k]));
    let mut rows = Vec::with_capacity(n_ladder);
    for k in 0..n_ladder {
        let col = sorted(&column(k));
        if col.is_empty() {
            return domain(format!("every replication is non-finite at ladder entry {k}"));
        }
        let entry = &reps[0].ladder.entries[k];
        rows.push(LadderRow {
            epsilon: entry.epsilon,
            t: entry.t,
            median: quantile_sorted(&col, 0.5),
            q25: quantile_sorted(&col, 0.25),
            q75: quantile_sorted(&col, 0.75),
            ks_distance: law.ks(&col),
            n_effective: col.len(),
        });
    }

    let last = n_ladder - 1;
    let mut checks = Vec::new();
    for &id in &config.checks {
        let threshold = id.threshold(regime);
        let statistic = match id {
            CheckId::KsCauchy | CheckId::KsGaussian => rows[last]
                .ks_distance
                .expect("distribution checks are validated against the regime"),
            CheckId::HalfIqr => {
                let scale = match law {
                    LimitLaw::Cauchy(c) => c,
                    _ => unreachable!("half_iqr only applies to Cauchy regimes"),
                };
                (robust_scale(&column(last))?.half_iqr / scale - 1.0).abs()
            }
            CheckId::AsStability => as_convergence_check(&matrix(reps), None)?.median_relative_change,
            CheckId::AsTarget => match regime {
                Regime::R3AsRandom => {
                    let a = config.params.alpha;
                    let targets: Vec<f64> = reps
                        .iter()
                        .map(|r| {
                            let e = &r.ladder.entries[last];
                            (1.0 - 2.0 * a) * e.eta / (e.xi * e.xi)
                        })
                        .collect();
                    let last_values: Vec<f64> = reps.iter().map(|r| r.renormalized[last]).collect();
                    median_relative_deviation(&last_values, &targets)?
                }
                _ => as_convergence_check(&matrix(reps), Some(0.5))?
                    .median_target_deviation
                    .expect("target supplied"),
            },
            CheckId::MedianBand => (rows[last].median - 0.5).abs(),
            CheckId::Consistency => {
                let limit = consts.estimator_limit;
                let medians: Vec<f64> = (0..n_ladder)
                    .map(|k| {
                        let dev = finite(
                            reps.iter().map(|r| (r.ladder.entries[k].alpha_hat_direct - limit).abs()),
                        );
                        quantile_sorted(&sorted(&dev), 0.5)
                    })
                    .collect();
                if regime == Regime::NcHalf {
                    medians[last]
                } else {
                    medians.windows(2).filter(|w| !(w[1] < w[0])).count() as f64
                }
            }
        };
        checks.push(CheckResult::new(id, statistic, threshold));
    }

    Ok(McSummary {
        schema_version: SCHEMA_VERSION,
        regime,
        params: SummaryParams {
            alpha: config.params.alpha,
            hurst: config.params.h(),
            horizon: config.params.horizon,
        },
        grid_n: config.grid_n,
        replications: config.replications,
        failed_replications: failed,
        global_seed: config.global_seed,
        sampler: config.sampler,
        all_pass: checks.iter().all(|c| c.pass),
        ladder: rows,
        checks,
    })
}

fn matrix(reps: &[Replication]) -> Vec<Vec<f64>> {
    reps.iter().map(|r| r.renormalized.clone()).collect()
}

/// Writes one row per (replication, ladder entry).
pub fn write_replications_csv<W: Write>(reps: &[Replication], mut out: W) -> Result<()> {
    writeln!(
        out,
        "replication,seed_tag,epsilon,t,alpha_hat_direct,alpha_hat_identity,error,renormalized"
    )?;
    for r in reps {
        for (e, v) in r.ladder.entries.iter().zip(&r.renormalized) {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.index,
                r.seed_tag,
                fmt17(e.epsilon),
                fmt17(e.t),
                fmt17(e.alpha_hat_direct),
                fmt17(e.alpha_hat_identity),
                fmt17(e.error),
                fmt17(*v)
            )?;
        }
    }
    Ok(())
}

/// Kolmogorov–Smirnov distance between `sample` and `Cauchy(0, scale)`.
pub fn ks_cauchy(sample: &[f64], scale: f64) -> Result<f64> {
    if sample.is_empty() {
        return domain("ks_cauchy needs a nonempty sample");
    }
    if !(scale > 0.0) {
        return domain(format!("ks_cauchy needs scale > 0 (got {scale})"));
    }
    Ok(ks_statistic_sorted(&sorted(sample), |x| cauchy_cdf(x, scale)))
}

/// KS distance to the Gaussian with the sample's own mean and variance.
pub fn ks_gaussian_fit(sample: &[f64]) -> Result<f64> {
    if sample.len() < 2 {
        return domain("a Gaussian fit needs at least two points");
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let sd = (sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 0.0) {
        return domain("a Gaussian fit needs a non-constant sample");
    }
    Ok(ks_statistic_sorted(&sorted(sample), |x| normal_cdf((x - mean) / sd)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustScale {
    pub median: f64,
    /// `(q75 − q25)/2`, which equals `c` for `Cauchy(0, c)`.
    pub half_iqr: f64,
}

pub fn robust_scale(sample: &[f64]) -> Result<RobustScale> {
    if sample.len() < 20 {
        return domain(format!(
            "robust_scale needs at least 20 points (got {})",
            sample.len()
        ));
    }
    let s = sorted(sample);
    Ok(RobustScale {
        median: quantile_sorted(&s, 0.5),
        half_iqr: 0.5 * (quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsConvergence {
    /// Median over paths of `|r_last − r_prev| / |r_prev|`.
    pub median_relative_change: f64,
    /// Median over paths of `|r_last − target|`, when a target is given.
    pub median_target_deviation: Option<f64>,
}

/// Per-path stability of almost-surely convergent renormalized errors.
/// `per_path` holds one row of ladder values per replication.
pub fn as_convergence_check(per_path: &[Vec<f64>], target: Option<f64>) -> Result<AsConvergence> {
    if per_path.is_empty() {
        return domain("as_convergence_check needs at least one path");
    }
    let width = per_path[0].len();
    if width < 3 || per_path.iter().any(|r| r.len() != width) {
        return domain("as_convergence_check needs rows of equal length >= 3");
    }
    let changes = finite(per_path.iter().map(|r| {
        let (prev, last) = (r[width - 2], r[width - 1]);
        if last == prev {
            0.0
        } else {
            (last - prev).abs() / prev.abs()
        }
    }));
    let deviation = target.map(|t| {
        let d = finite(per_path.iter().map(|r| (r[width - 1] - t).abs()));
        quantile_sorted(&sorted(&d), 0.5)
    });
    if changes.is_empty() {
        return domain("every path has a non-finite relative change");
    }
    Ok(AsConvergence {
        median_relative_change: quantile_sorted(&sorted(&changes), 0.5),
        median_target_deviation: deviation,
    })
}

/// Median over paths of `|value − target| / |target|`.
pub fn median_relative_deviation(values: &[f64], targets: &[f64]) -> Result<f64> {
    if values.is_empty() || values.len() != targets.len() {
        return domain("values and targets must be nonempty and of equal length");
    }
    let d = finite(values.iter().zip(targets).map(|(v, t)| (v - t).abs() / t.abs()));
    if d.is_empty() {
        return domain("every relative deviation is non-finite");
    }
    Ok(quantile_sorted(&sorted(&d), 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    fn cauchy_sample(n: usize, scale: f64, seed: u64) -> Vec<f64> {
        let mut rng = Stream::seed_from_u64(seed);
        (0..n)
            .map(|_| scale * (PI * (rng.random::<f64>() - 0.5)).tan())
            .collect()
    }

    fn small_config(alpha: f64, hurst: f64, reps: usize) -> McConfig {
        let params = ModelParams::new(alpha, 1.0, hurst).unwrap();
        let ladder = EvalLadder::geometric(1.0, 3).unwrap();
        McConfig::new(params, 1 << 14, ladder, reps, 11).unwrap()
    }

    #[test]
    fn ks_cauchy_accepts_exact_samples() {
        let n = 10_000;
        let d = ks_cauchy(&cauchy_sample(n, 1.7, 1), 1.7).unwrap();
        assert!(d < 1.63 / (n as f64).sqrt(), "{d}");
    }

    #[test]
    fn ks_cauchy_rejects_a_shift() {
        let shifted: Vec<f64> = cauchy_sample(10_000, 1.0, 2).iter().map(|x| x + 3.0).collect();
        assert!(ks_cauchy(&shifted, 1.0).unwrap() > 0.3);
        assert!(ks_cauchy(&[], 1.0).is_err());
        assert!(ks_cauchy(&[1.0], 0.0).is_err());
    }

    #[test]
    fn half_iqr_recovers_cauchy_scale() {
        let r = robust_scale(&cauchy_sample(100_000, 2.0, 3)).unwrap();
        assert!((1.96..=2.04).contains(&r.half_iqr), "{r:?}");
        let c = robust_scale(&[4.2; 25]).unwrap();
        assert_eq!((c.median, c.half_iqr), (4.2, 0.0));
        assert!(robust_scale(&[1.0; 19]).is_err());
    }

    #[test]
    fn heavy_tails_are_told_apart_from_gaussian() {
        let s = cauchy_sample(100_000, 1.0, 4);
        // Median over 10 disjoint blocks of the block fourth moment.
        let fourth: Vec<f64> = [10, 100, 1_000, 10_000]
            .iter()
            .map(|&n| {
                let m: Vec<f64> = s
                    .chunks(n)
                    .take(10)
                    .map(|b| b.iter().map(|x| x.powi(4)).sum::<f64>() / n as f64)
                    .collect();
                crate::stats::median(&m)
            })
            .collect();
        assert!(fourth.windows(2).all(|w| w[1] > 10.0 * w[0]), "{fourth:?}");
        assert!(ks_gaussian_fit(&s).unwrap() > ks_cauchy(&s, 1.0).unwrap());

        let mut rng = Stream::seed_from_u64(5);
        let g: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        assert!(ks_gaussian_fit(&g).unwrap() < 0.02);
    }

    #[test]
    fn as_convergence_of_constant_rows_is_zero() {
        let m = vec![vec![0.7, 0.7, 0.7]; 10];
        let r = as_convergence_check(&m, Some(0.5)).unwrap();
        assert_eq!(r.median_relative_change, 0.0);
        assert!((r.median_target_deviation.unwrap() - 0.2).abs() < 1e-15);
        assert!(as_convergence_check(&[vec![1.0, 2.0]], None).is_err());
    }

    #[test]
    fn as_convergence_relative_change() {
        let m = vec![vec![9.0, 1.0, 1.1], vec![9.0, 2.0, 2.0], vec![9.0, 4.0, 5.0]];
        let r = as_convergence_check(&m, None).unwrap();
        assert!((r.median_relative_change - 0.1).abs() < 1e-12);
    }

    #[test]
    fn check_labels_round_trip() {
        for c in CheckId::ALL {
            assert_eq!(c.label().parse::<CheckId>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.label()));
        }
        assert!("ks".parse::<CheckId>().is_err());
    }

    #[test]
    fn default_checks_per_regime() {
        let r1 = default_checks(Regime::R1Cauchy);
        assert!(r1.contains(&CheckId::KsCauchy) && r1.contains(&CheckId::HalfIqr));
        assert!(!r1.contains(&CheckId::KsGaussian));
        let r4 = default_checks(Regime::R4AsHalf);
        assert!(r4.contains(&CheckId::MedianBand) && r4.contains(&CheckId::AsTarget));
        assert_eq!(default_checks(Regime::NcHalf), [CheckId::Consistency].into());
        assert!(default_checks(Regime::B11).contains(&CheckId::KsGaussian));
    }

    #[test]
    fn config_validation() {
        let params = ModelParams::new(0.1, 1.0, 0.6).unwrap();
        let ladder = EvalLadder::geometric(1.0, 3).unwrap();
        assert!(McConfig::new(params, 1 << 14, ladder.clone(), 99, 0).is_err());
        assert!(McConfig::new(params, 3000, ladder.clone(), 100, 0).is_err());
        // Δ = 0.999/2^12 is not below ε_min/10 = 1e−4.
        assert!(McConfig::new(params, 1 << 12, ladder.clone(), 100, 0).is_err());
        let ok = McConfig::new(params, 1 << 14, ladder.clone(), 100, 0).unwrap();
        assert!(ok.clone().with_checks([CheckId::MedianBand]).validate().is_err());
        let short = EvalLadder::new(1.0, vec![1e-2, 1e-3]).unwrap();
        let r4 = ModelParams::new(0.5, 1.0, 0.7).unwrap();
        assert!(McConfig::new(r4, 1 << 14, short, 100, 0).is_err());
        let other_horizon = EvalLadder::geometric(2.0, 3).unwrap();
        assert!(McConfig::new(params, 1 << 14, other_horizon, 100, 0).is_err());
    }

    #[test]
    fn summary_has_one_row_per_ladder_time() {
        let s = run(&small_config(0.1, 0.6, 100)).unwrap();
        assert_eq!(s.ladder.len(), 3);
        assert_eq!(s.schema_version, 1);
        for row in &s.ladder {
            assert!(row.q25 <= row.median && row.median <= row.q75);
            assert_eq!(row.n_effective, 100);
            assert!(row.ks_distance.is_some());
        }
        for c in &s.checks {
            assert_eq!(c.pass, c.statistic <= c.threshold);
        }
        assert_eq!(s.all_pass, s.checks.iter().all(|c| c.pass));
    }

    #[test]
    fn summary_json_keys_are_sorted() {
        let s = run(&small_config(0.5, 0.7, 100)).unwrap();
        let json = s.to_json().unwrap();
        let top: Vec<&str> = json
            .lines()
            .filter(|l| l.starts_with("  \""))
            .map(|l| l.trim().split('"').nth(1).unwrap())
            .collect();
        let mut want = top.clone();
        want.sort();
        assert_eq!(top, want);
        let back: McSummary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let config = small_config(0.3, 0.7, 120);
        let base = run_in_pool(&config, 1).unwrap();
        let base_json = base.summary.to_json().unwrap();
        for threads in [4, 16] {
            let other = run_in_pool(&config, threads).unwrap();
            assert_eq!(other.summary.to_json().unwrap(), base_json);
            assert_eq!(other.replications, base.replications);
        }
    }

    #[test]
    fn replication_streams_are_uncorrelated() {
        let config = small_config(0.3, 0.7, 100);
        let engine = Engine::new(&config).unwrap();
        // Terminal values of 16 streams, each re-drawn over 400 grids so that
        // every stream contributes a vector of independent draws.
        let reps = 400;
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let dh = DaviesHarte::new(config.params.hurst, &grid).unwrap();
        let streams: Vec<Vec<f64>> = (0..16u64)
            .map(|i| {
                let (mut s, tag) = stream(config.global_seed, i);
                (0..reps).map(|_| dh.sample(&mut s, tag).terminal()).collect()
            })
            .collect();
        let corr = |a: &[f64], b: &[f64]| {
            let n = a.len() as f64;
            let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
            let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
            let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
            let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
            cov / (va * vb).sqrt()
        };
        for i in 0..16 {
            for j in i + 1..16 {
                let c = corr(&streams[i], &streams[j]);
                assert!(c.abs() < 4.0 / (reps as f64).sqrt(), "streams {i}, {j}: {c}");
            }
        }
        // Replication terminals across indices.
        let terminals: Vec<f64> = (0..200).map(|i| engine.driving_path(i).terminal()).collect();
        assert!(corr(&terminals[..100], &terminals[100..]).abs() < 4.0 / 10.0);
    }

    #[test]
    fn replication_is_reproducible_in_isolation() {
        let config = small_config(0.1, 0.6, 100);
        let outcome = run_detailed(&config).unwrap();
        let engine = Engine::new(&config).unwrap();
        assert_eq!(engine.replicate(37).unwrap(), outcome.replications[37]);
        assert_eq!(outcome.replications[37].seed_tag, crate::rng::mix(11, 37));
    }

    #[test]
    fn wrong_scale_is_rejected() {
        let mut config = small_config(0.1, 0.6, 400);
        let honest = run(&config).unwrap();
        config.scale_multiplier = 2.0;
        let skewed = run(&config).unwrap();
        let ks = |s: &McSummary| s.check(CheckId::KsCauchy).unwrap().statistic;
        assert!(ks(&skewed) > 0.1 && ks(&skewed) > ks(&honest) + 0.05);
        assert!(!skewed.check(CheckId::HalfIqr).unwrap().pass);
    }

    #[test]
    fn hosking_sampler_runs() {
        let params = ModelParams::new(0.3, 1.0, 0.7).unwrap();
        let ladder = EvalLadder::geometric(1.0, 2).unwrap();
        let config = McConfig::new(params, 1 << 10, ladder, 100, 3)
            .unwrap()
            .with_sampler(Sampler::Hosking);
        let s = run(&config).unwrap();
        assert_eq!(s.sampler, Sampler::Hosking);
        assert_eq!(s.ladder[1].n_effective, 100);
    }

    #[test]
    fn replications_csv_has_one_row_per_entry() {
        let outcome = run_detailed(&small_config(0.3, 0.7, 100)).unwrap();
        let mut buf = Vec::new();
        write_replications_csv(&outcome.replications, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 300);
        assert!(text.starts_with("replication,seed_tag,epsilon,t,"));
    }
}
