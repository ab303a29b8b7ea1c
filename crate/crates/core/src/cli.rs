//! Command-line front end.
//!
//! `constants` takes flags; `simulate`, `estimate` and `verify` read a JSON
//! run configuration and write everything under its `out_dir`.
//!
//! Exit codes: 0 success, 1 a Monte Carlo check failed, 2 invalid
//! configuration or parameters, 3 I/O or runtime failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::bridge::ModelParams;
use crate::error::{Error, Result};
use crate::estimator::EvalLadder;
use crate::io::fmt17;
use crate::limits::constants;
use crate::mcharness::{estimate_in_pool, run_in_pool, write_replications_csv, CheckId, Engine, McConfig, Sampler};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Bounds the number of worker threads; 0 or unset means one per core.
pub const THREADS_ENV: &str = "FRACBRIDGE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fracbridge", version, about = "Fractional bridge simulation and drift-estimator verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the limit regime and its constants as JSON
    Constants {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        hurst: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        horizon: f64,
    },
    /// Write sampled paths (t, B, xi, eta, X) and error-vs-epsilon plot data
    Simulate {
        /// JSON run configuration
        config: PathBuf,
    },
    /// Write the estimator ladder of every replication as CSV
    Estimate {
        /// JSON run configuration
        config: PathBuf,
    },
    /// Run the Monte Carlo checks and write summary.json
    Verify {
        /// JSON run configuration
        config: PathBuf,
        /// Multiplies the reference scale of the limit law (test hook)
        #[arg(long, hide = true, default_value_t = 1.0)]
        scale_multiplier: f64,
    },
}

/// Contents of a run configuration file. Every key is required.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub hurst: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub grid_n: usize,
    pub ladder_epsilons: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub sampler: Sampler,
    pub checks: Vec<CheckId>,
    pub out_dir: PathBuf,
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid run configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The harness configuration; only the design constraints are checked
    /// here, the Monte Carlo ones are left to `verify`.
    pub fn mc_config(&self) -> Result<McConfig> {
        let config = McConfig {
            params: ModelParams::new(self.alpha, self.horizon, self.hurst)?,
            grid_n: self.grid_n,
            ladder: EvalLadder::new(self.horizon, self.ladder_epsilons.clone())?,
            replications: self.replications,
            global_seed: self.seed,
            sampler: self.sampler,
            checks: self.checks.iter().copied().collect(),
            scale_multiplier: 1.0,
        };
        config.validate_design()?;
        if config.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        Ok(config)
    }
}

/// Worker count from [`THREADS_ENV`].
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a non-negative integer (got \"{v}\")"))),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

/// Runs one command, writing results to `out` and diagnostics to `err`.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Constants { alpha, hurst, horizon } => cmd_constants(*alpha, *hurst, *horizon, out),
        Command::Simulate { config } => cmd_simulate(config, out),
        Command::Estimate { config } => cmd_estimate(config, out),
        Command::Verify {
            config,
            scale_multiplier,
        } => cmd_verify(config, *scale_multiplier, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn cmd_constants(alpha: f64, hurst: f64, horizon: f64, out: &mut dyn Write) -> Result<i32> {
    let params = ModelParams::new(alpha, horizon, hurst)?;
    let mut value = serde_json::to_value(constants(&params)?)?;
    value["params"] = serde_json::json!({ "alpha": alpha, "hurst": hurst, "horizon": horizon });
    writeln!(out, "{}", serde_json::to_string_pretty(&value)?)?;
    Ok(EXIT_OK)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn path_file(out_dir: &Path, index: u64) -> PathBuf {
    out_dir.join("paths").join(format!("rep_{index:05}.csv"))
}

pub fn plot_file(out_dir: &Path, index: u64) -> PathBuf {
    out_dir.join("plot").join(format!("rep_{index:05}.dat"))
}

fn cmd_simulate(config_path: &Path, out: &mut dyn Write) -> Result<i32> {
    let file = RunConfigFile::load(config_path)?;
    let config = file.mc_config()?;
    let engine = Engine::new(&config)?;
    let mut reps = Vec::with_capacity(config.replications);
    for index in 0..config.replications as u64 {
        let (path, bridge) = engine.simulate(index)?;
        let mut w = create(&path_file(&file.out_dir, index))?;
        writeln!(w, "t,B,xi,eta,X")?;
        for (i, &t) in bridge.grid.times().iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt17(t),
                fmt17(path.values[i]),
                fmt17(bridge.xi[i]),
                fmt17(bridge.eta[i]),
                fmt17(bridge.x[i])
            )?;
        }
        w.flush()?;

        let rep = engine.replicate(index)?;
        let mut w = create(&plot_file(&file.out_dir, index))?;
        writeln!(w, "# epsilon alpha_minus_alpha_hat")?;
        for e in &rep.ladder.entries {
            writeln!(w, "{} {}", fmt17(e.epsilon), fmt17(e.error))?;
        }
        w.flush()?;
        reps.push(rep);
    }
    let mut w = create(&file.out_dir.join("estimates.csv"))?;
    write_replications_csv(&reps, &mut w)?;
    w.flush()?;
    writeln!(
        out,
        "wrote {} path file(s) under {}",
        config.replications,
        file.out_dir.display()
    )?;
    Ok(EXIT_OK)
}

fn cmd_estimate(config_path: &Path, out: &mut dyn Write) -> Result<i32> {
    let file = RunConfigFile::load(config_path)?;
    let config = file.mc_config()?;
    let reps = estimate_in_pool(&config, threads_from_env()?)?;
    let target = file.out_dir.join("estimates.csv");
    let mut w = create(&target)?;
    write_replications_csv(&reps, &mut w)?;
    w.flush()?;
    writeln!(out, "wrote {} replication(s) to {}", reps.len(), target.display())?;
    Ok(EXIT_OK)
}

fn cmd_verify(config_path: &Path, scale_multiplier: f64, out: &mut dyn Write) -> Result<i32> {
    let file = RunConfigFile::load(config_path)?;
    let mut config = file.mc_config()?;
    config.scale_multiplier = scale_multiplier;
    config.validate()?;
    let outcome = run_in_pool(&config, threads_from_env()?)?;

    let mut w = create(&file.out_dir.join("summary.json"))?;
    writeln!(w, "{}", outcome.summary.to_json()?)?;
    w.flush()?;
    let mut w = create(&file.out_dir.join("estimates.csv"))?;
    write_replications_csv(&outcome.replications, &mut w)?;
    w.flush()?;

    for c in &outcome.summary.checks {
        writeln!(
            out,
            "{:<13} {} statistic {} threshold {}",
            c.name.label(),
            if c.pass { "pass" } else { "FAIL" },
            c.statistic,
            c.threshold
        )?;
    }
    Ok(if outcome.summary.all_pass {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}
