//! The bridge `X` and its auxiliary processes built from a sampled fBm
//! path:
//!
//! * `ξ_t = ∫₀ᵗ (T−s)^{−α} dB_s`
//! * `η_t = ∫₀ᵗ (T−u)^{α−1} ξ_u dB_u`
//! * `X_t = (T−t)^α ξ_t`
//! * `D_t = ∫₀ᵗ ξ_u² (T−u)^{2α−2} du`
//!
//! `dB` integrals are left-point Riemann–Stieltjes sums, which converge to
//! the pathwise Young integral for `H > ½` (and to the Itô integral for
//! `H = ½`). `D` is accumulated by the trapezoid rule.

use std::io::Write;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::fbm::{GaussianPath, HurstParam, TimeGrid};
use crate::io::fmt17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub horizon: f64,
    pub hurst: HurstParam,
}

impl ModelParams {
    /// `alpha = 0` is accepted: it is the degenerate case `X = B` used to
    /// sanity-check the constructions.
    pub fn new(alpha: f64, horizon: f64, hurst: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return domain(format!("alpha must be finite and >= 0 (got {alpha})"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return domain(format!("horizon T must be finite and > 0 (got {horizon})"));
        }
        Ok(Self {
            alpha,
            horizon,
            hurst: HurstParam::new(hurst)?,
        })
    }

    pub fn h(&self) -> f64 {
        self.hurst.value()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BridgePaths {
    pub params: ModelParams,
    pub grid: TimeGrid,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub x: Vec<f64>,
    pub denom: Vec<f64>,
}

impl BridgePaths {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,xi,eta,x,denom")?;
        for i in 0..self.xi.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt17(self.grid.times()[i]),
                fmt17(self.xi[i]),
                fmt17(self.eta[i]),
                fmt17(self.x[i]),
                fmt17(self.denom[i])
            )?;
        }
        Ok(())
    }
}

/// Deterministic weights `(T − t_i)^p` on one grid, reusable across paths.
#[derive(Debug, Clone)]
pub struct BridgeKernel {
    params: ModelParams,
    grid: TimeGrid,
    gap: Vec<f64>,
    xi_weight: Vec<f64>,
    eta_weight: Vec<f64>,
    x_scale: Vec<f64>,
    denom_weight: Vec<f64>,
}

impl BridgeKernel {
    pub fn new(grid: &TimeGrid, params: ModelParams) -> Result<Self> {
        let horizon = params.horizon;
        if !(grid.t_max() < horizon) {
            return domain(format!(
                "grid must end strictly before T (t_max = {}, T = {horizon})",
                grid.t_max()
            ));
        }
        let a = params.alpha;
        let gap: Vec<f64> = grid.times().iter().map(|&t| horizon - t).collect();
        let pow = |p: f64| gap.iter().map(|g| g.powf(p)).collect::<Vec<f64>>();
        Ok(Self {
            params,
            grid: grid.clone(),
            xi_weight: pow(-a),
            eta_weight: pow(a - 1.0),
            x_scale: pow(a),
            denom_weight: pow(2.0 * a - 2.0),
            gap,
        })
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `T − t_i` at every node.
    pub fn gaps(&self) -> &[f64] {
        &self.gap
    }

    fn check(&self, path: &GaussianPath) -> Result<()> {
        if path.grid != self.grid {
            return Err(Error::GridMismatch(format!(
                "path has {} steps up to {}, kernel expects {} up to {}",
                path.grid.n_steps(),
                path.grid.t_max(),
                self.grid.n_steps(),
                self.grid.t_max()
            )));
        }
        Ok(())
    }

    pub fn xi(&self, path: &GaussianPath) -> Result<Vec<f64>> {
        self.check(path)?;
        let b = &path.values;
        let w = &self.xi_weight;
        // Summation by parts of Σ_{i<j} w_i (B_{i+1} − B_i); exact when w is
        // constant.
        let mut xi = Vec::with_capacity(b.len());
        xi.push(0.0);
        let mut correction = 0.0;
        for j in 1..b.len() {
            if j >= 2 {
                correction += (w[j - 1] - w[j - 2]) * b[j - 1];
            }
            xi.push(w[j - 1] * b[j] - correction);
        }
        Ok(xi)
    }

    pub fn eta(&self, path: &GaussianPath, xi: &[f64]) -> Result<Vec<f64>> {
        self.check(path)?;
        if xi.len() != path.values.len() {
            return Err(Error::GridMismatch(format!(
                "xi has {} nodes, path has {}",
                xi.len(),
                path.values.len()
            )));
        }
        let b = &path.values;
        let mut eta = Vec::with_capacity(b.len());
        eta.push(0.0);
        let mut acc = 0.0;
        for i in 0..b.len() - 1 {
            acc += self.eta_weight[i] * xi[i] * (b[i + 1] - b[i]);
            eta.push(acc);
        }
        Ok(eta)
    }

    pub fn build(&self, path: &GaussianPath) -> Result<BridgePaths> {
        let xi = self.xi(path)?;
        let eta = self.eta(path, &xi)?;
        let x: Vec<f64> = xi.iter().zip(&self.x_scale).map(|(v, s)| s * v).collect();
        let times = self.grid.times();
        let mut denom = Vec::with_capacity(xi.len());
        denom.push(0.0);
        let mut acc = 0.0;
        let mut left = 0.0;
        for i in 0..xi.len() - 1 {
            let right = xi[i + 1] * xi[i + 1] * self.denom_weight[i + 1];
            acc += 0.5 * (left + right) * (times[i + 1] - times[i]);
            denom.push(acc);
            left = right;
        }
        Ok(BridgePaths {
            params: self.params,
            grid: self.grid.clone(),
            xi,
            eta,
            x,
            denom,
        })
    }

    /// Euler scheme for `dX = −α X/(T−t) dt + dB`, written for the deviation
    /// `X̃ − B` so that `α = 0` reproduces `B` exactly.
    pub fn euler(&self, path: &GaussianPath) -> Result<Vec<f64>> {
        self.check(path)?;
        let a = self.params.alpha;
        let b = &path.values;
        let times = self.grid.times();
        let mut out = Vec::with_capacity(b.len());
        out.push(b[0]);
        let mut dev = 0.0;
        for i in 0..b.len() - 1 {
            let x = dev + b[i];
            dev -= a * x / self.gap[i] * (times[i + 1] - times[i]);
            out.push(dev + b[i + 1]);
        }
        Ok(out)
    }
}

pub fn build_xi(path: &GaussianPath, params: ModelParams) -> Result<Vec<f64>> {
    BridgeKernel::new(&path.grid, params)?.xi(path)
}

pub fn build_eta(path: &GaussianPath, xi: &[f64], params: ModelParams) -> Result<Vec<f64>> {
    BridgeKernel::new(&path.grid, params)?.eta(path, xi)
}

pub fn build_bridge(path: &GaussianPath, params: ModelParams) -> Result<BridgePaths> {
    BridgeKernel::new(&path.grid, params)?.build(path)
}

pub fn euler_bridge(path: &GaussianPath, params: ModelParams) -> Result<Vec<f64>> {
    BridgeKernel::new(&path.grid, params)?.euler(path)
}
