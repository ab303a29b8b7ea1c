//! Exact samplers for fractional Brownian motion on a uniform grid.
//!
//! [`DaviesHarte`] is the workhorse (circulant embedding, O(n log n)).
//! [`sample_hosking`] is the O(n²) exact fallback, and [`CholeskyOracle`]
//! samples the joint law on arbitrary points by dense factorization; it
//! exists to cross-check the other two.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::rng::Stream;

/// Hurst index, `0 < h < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return domain(format!("Hurst index must lie in (0, 1) (got {h})"));
        }
        Ok(Self(h))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Uniform grid `0 = t_0 < … < t_n = t_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    n_steps: usize,
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return domain(format!("grid needs a finite t_max > 0 (got {t_max})"));
        }
        if n_steps < 1 {
            return domain("grid needs at least one step");
        }
        let n = n_steps as f64;
        // i/n is exact for power-of-two n, so times[n] == t_max exactly.
        let times = (0..=n_steps).map(|i| t_max * (i as f64 / n)).collect();
        Ok(Self {
            t_max,
            n_steps,
            times,
        })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Index of the last node at or below `t`.
    pub fn node_at_or_below(&self, t: f64) -> usize {
        if t >= self.t_max {
            return self.n_steps;
        }
        let mut i = ((t / self.t_max) * self.n_steps as f64).floor().max(0.0) as usize;
        i = i.min(self.n_steps);
        while i > 0 && self.times[i] > t {
            i -= 1;
        }
        while i < self.n_steps && self.times[i + 1] <= t {
            i += 1;
        }
        i
    }

    /// Every `factor`-th node of this grid.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.n_steps % factor != 0 {
            return domain(format!(
                "cannot coarsen {} steps by a factor of {factor}",
                self.n_steps
            ));
        }
        Ok(Self {
            t_max: self.t_max,
            n_steps: self.n_steps / factor,
            times: self.times.iter().step_by(factor).copied().collect(),
        })
    }
}

/// A sampled fBm trajectory on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub hurst: HurstParam,
    pub seed_tag: u64,
}

impl GaussianPath {
    /// Builds a path from explicit values, e.g. a deterministic test path.
    pub fn from_values(grid: TimeGrid, values: Vec<f64>, hurst: HurstParam, seed_tag: u64) -> Result<Self> {
        if values.len() != grid.n_steps() + 1 {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.n_steps() + 1
            )));
        }
        if values[0] != 0.0 {
            return domain("a path must start at 0");
        }
        Ok(Self {
            grid,
            values,
            hurst,
            seed_tag,
        })
    }

    /// The same path observed on every `factor`-th node.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        Ok(Self {
            grid: self.grid.coarsen(factor)?,
            values: self.values.iter().step_by(factor).copied().collect(),
            hurst: self.hurst,
            seed_tag: self.seed_tag,
        })
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    fn from_increments(grid: &TimeGrid, increments: impl Iterator<Item = f64>, hurst: HurstParam, seed_tag: u64) -> Self {
        let mut values = Vec::with_capacity(grid.n_steps() + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for dx in increments.take(grid.n_steps()) {
            acc += dx;
            values.push(acc);
        }
        Self {
            grid: grid.clone(),
            values,
            hurst,
            seed_tag,
        }
    }
}

/// `E[B_s B_t] = ½(t^{2H} + s^{2H} − |t−s|^{2H})`.
pub fn covariance(h: HurstParam, s: f64, t: f64) -> f64 {
    let two_h = 2.0 * h.value();
    0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h))
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(h: HurstParam, k: usize) -> f64 {
    let two_h = 2.0 * h.value();
    let k = k as f64;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

/// Circulant-embedding sampler with the eigenvalues and FFT plan cached,
/// so that repeated draws on one grid cost a single FFT each.
pub struct DaviesHarte {
    hurst: HurstParam,
    grid: TimeGrid,
    sqrt_eigen: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    step_scale: f64,
}

impl std::fmt::Debug for DaviesHarte {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DaviesHarte")
            .field("hurst", &self.hurst)
            .field("n_steps", &self.grid.n_steps())
            .finish()
    }
}

impl DaviesHarte {
    pub fn new(hurst: HurstParam, grid: &TimeGrid) -> Result<Self> {
        let n = grid.n_steps();
        if n < 2 || !n.is_power_of_two() {
            return domain(format!(
                "Davies-Harte needs a power-of-two step count >= 2 (got {n})"
            ));
        }
        let m = 2 * n;
        let mut row: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); m];
        for k in 0..=n {
            row[k].re = fgn_autocovariance(hurst, k);
        }
        for k in 1..n {
            row[m - k].re = row[k].re;
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut row);

        let max = row.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
        let min = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min < -1e-9 * max {
            return Err(Error::EmbeddingFailure {
                min_eigenvalue: min,
                max_eigenvalue: max,
            });
        }
        let sqrt_eigen = row
            .iter()
            .map(|c| (c.re.max(0.0) / m as f64).sqrt())
            .collect();
        Ok(Self {
            hurst,
            grid: grid.clone(),
            sqrt_eigen,
            fft,
            step_scale: grid.dt().powf(hurst.value()),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn sample(&self, stream: &mut Stream, seed_tag: u64) -> GaussianPath {
        let mut buf: Vec<Complex<f64>> = self
            .sqrt_eigen
            .iter()
            .map(|&s| {
                let re: f64 = stream.sample(StandardNormal);
                let im: f64 = stream.sample(StandardNormal);
                Complex::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buf);
        let scale = self.step_scale;
        GaussianPath::from_increments(&self.grid, buf.iter().map(|c| c.re * scale), self.hurst, seed_tag)
    }
}

/// One exact fBm draw by circulant embedding. Builds the embedding on every
/// call; use [`DaviesHarte`] directly for repeated draws.
pub fn sample_davies_harte(h: HurstParam, grid: &TimeGrid, stream: &mut Stream, seed_tag: u64) -> Result<GaussianPath> {
    Ok(DaviesHarte::new(h, grid)?.sample(stream, seed_tag))
}

/// Hosking's method: fractional Gaussian noise drawn one step at a time
/// from its exact conditional law given the past (Durbin–Levinson
/// recursion), then summed.
pub fn sample_hosking(h: HurstParam, grid: &TimeGrid, stream: &mut Stream, seed_tag: u64) -> GaussianPath {
    let n = grid.n_steps();
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocovariance(h, k)).collect();
    let mut noise = Vec::with_capacity(n);
    let mut phi = vec![0.0; n];
    let mut prev = vec![0.0; n];
    let mut var = gamma[0];
    let z: f64 = stream.sample(StandardNormal);
    noise.push(var.sqrt() * z);
    for k in 1..n {
        // phi[1..k] holds the order-(k−1) coefficients on entry.
        let mut acc = gamma[k];
        for j in 1..k {
            acc -= phi[j] * gamma[k - j];
        }
        let reflection = acc / var;
        prev[1..k].copy_from_slice(&phi[1..k]);
        for j in 1..k {
            phi[j] = prev[j] - reflection * prev[k - j];
        }
        phi[k] = reflection;
        var *= 1.0 - reflection * reflection;

        let mut mean = 0.0;
        for j in 1..=k {
            mean += phi[j] * noise[k - j];
        }
        let z: f64 = stream.sample(StandardNormal);
        noise.push(mean + var.max(0.0).sqrt() * z);
    }
    let scale = grid.dt().powf(h.value());
    GaussianPath::from_increments(grid, noise.into_iter().map(|x| x * scale), h, seed_tag)
}

/// Dense-factorization sampler of `(B_{s_1}, …, B_{s_k})`.
#[derive(Debug, Clone)]
pub struct CholeskyOracle {
    dim: usize,
    lower: Vec<f64>,
}

impl CholeskyOracle {
    pub const MAX_POINTS: usize = 4096;

    pub fn new(h: HurstParam, points: &[f64]) -> Result<Self> {
        if points.is_empty() || points.len() > Self::MAX_POINTS {
            return domain(format!(
                "oracle needs between 1 and {} points (got {})",
                Self::MAX_POINTS,
                points.len()
            ));
        }
        if !(points[0] > 0.0) || points.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("oracle points must be strictly increasing and positive");
        }
        let k = points.len();
        let mut cov = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..=i {
                cov[i * k + j] = covariance(h, points[i], points[j]);
            }
        }
        Ok(Self {
            dim: k,
            lower: cholesky_in_place(cov, k)?,
        })
    }

    pub fn sample(&self, stream: &mut Stream) -> Vec<f64> {
        let k = self.dim;
        let z: Vec<f64> = (0..k).map(|_| stream.sample(StandardNormal)).collect();
        (0..k)
            .map(|i| {
                self.lower[i * k..i * k + i + 1]
                    .iter()
                    .zip(&z)
                    .map(|(l, z)| l * z)
                    .sum()
            })
            .collect()
    }
}

pub fn sample_cholesky_oracle(h: HurstParam, grid_points: &[f64], stream: &mut Stream) -> Result<Vec<f64>> {
    Ok(CholeskyOracle::new(h, grid_points)?.sample(stream))
}

// Row-major lower triangle in, Cholesky factor out.
fn cholesky_in_place(mut a: Vec<f64>, k: usize) -> Result<Vec<f64>> {
    for j in 0..k {
        let mut d = a[j * k + j];
        for p in 0..j {
            d -= a[j * k + p] * a[j * k + p];
        }
        if !(d > 0.0) {
            return Err(Error::Factorization { pivot: j, value: d });
        }
        let d = d.sqrt();
        a[j * k + j] = d;
        for i in j + 1..k {
            let mut s = a[i * k + j];
            for p in 0..j {
                s -= a[i * k + p] * a[j * k + p];
            }
            a[i * k + j] = s / d;
        }
        for p in j + 1..k {
            a[j * k + p] = 0.0;
        }
    }
    Ok(a)
}
