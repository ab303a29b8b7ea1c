//! The least-squares estimator `α̂_t` along a ladder of times `t_k ↑ T`.
//!
//! Two independent evaluations are provided:
//!
//! * [`alpha_hat_direct`] discretizes the defining ratio
//!   `−∫₀ᵗ X_u/(T−u) dX_u / ∫₀ᵗ X_u²/(T−u)² du` with a left-point sum in
//!   the numerator and the trapezoid rule in the denominator;
//! * [`alpha_hat_identity`] uses the chain-rule rearrangement
//!   `α̂_t = ½ − ξ_t² (T−t)^{2α−1} / (2 D_t)`, which never touches `dX`.
//!
//! They agree in the continuum for `H > ½`. For `H = ½` the chain rule
//! picks up an Itô correction and only the direct form is the estimator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bridge::{BridgePaths, ModelParams};
use crate::error::{domain, Error, Result};
use crate::fbm::TimeGrid;
use crate::limits::{classify, Regime};

/// Denominators below this are treated as a broken path.
pub const MIN_DENOMINATOR: f64 = 1e-300;

/// Evaluation times `t_k = T − ε_k` for strictly decreasing `ε_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalLadder {
    horizon: f64,
    epsilons: Vec<f64>,
}

impl EvalLadder {
    pub fn new(horizon: f64, epsilons: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0) {
            return domain(format!("ladder horizon must be > 0 (got {horizon})"));
        }
        if epsilons.is_empty() {
            return domain("ladder needs at least one epsilon");
        }
        if epsilons.iter().any(|&e| !(e > 0.0 && e < horizon)) {
            return domain(format!(
                "ladder epsilons must lie in (0, T) so that 0 < t < T (got {epsilons:?})"
            ));
        }
        if epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return domain(format!("ladder epsilons must strictly decrease (got {epsilons:?})"));
        }
        Ok(Self { horizon, epsilons })
    }

    /// `ε_k = T·10^{−k}` for `k = 1..=depth`.
    pub fn geometric(horizon: f64, depth: u32) -> Result<Self> {
        Self::new(horizon, (1..=depth as i32).map(|k| horizon * 10f64.powi(-k)).collect())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn len(&self) -> usize {
        self.epsilons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epsilons.is_empty()
    }

    pub fn smallest_epsilon(&self) -> f64 {
        self.epsilons[self.epsilons.len() - 1]
    }

    pub fn times(&self) -> Vec<f64> {
        self.epsilons.iter().map(|e| self.horizon - e).collect()
    }

    /// The simulation grid ending at the last ladder time.
    pub fn grid(&self, n_steps: usize) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon - self.smallest_epsilon(), n_steps)
    }

    /// Grid node at or below each ladder time.
    pub fn snap(&self, grid: &TimeGrid) -> Result<Vec<usize>> {
        let dt = grid.dt();
        self.times()
            .into_iter()
            .map(|t| {
                if t > grid.t_max() + 1e-12 * self.horizon {
                    return domain(format!(
                        "ladder time {t} lies beyond the grid end {}",
                        grid.t_max()
                    ));
                }
                let i = grid.node_at_or_below(t);
                if i == 0 {
                    return domain(format!("ladder time {t} snaps to t = 0; refine the grid"));
                }
                debug_assert!(t - grid.times()[i] < dt);
                Ok(i)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    /// Grid time the ladder time snapped to.
    pub t: f64,
    /// `T − t`.
    pub epsilon: f64,
    pub alpha_hat_direct: f64,
    pub alpha_hat_identity: f64,
    /// `α − α̂_t` from the direct formula.
    pub error: f64,
    pub xi: f64,
    pub eta: f64,
    pub denom: f64,
    pub renormalized: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorLadder {
    pub params: ModelParams,
    pub entries: Vec<LadderEntry>,
}

fn node_index(grid: &TimeGrid, t: f64) -> Result<usize> {
    if !(t > 0.0) || t > grid.t_max() {
        return domain(format!("evaluation time {t} must lie in (0, {}]", grid.t_max()));
    }
    Ok(grid.node_at_or_below(t))
}

/// Direct estimator from raw `(t_i, X_i)` samples, evaluated at node `upto`.
pub fn alpha_hat_from_samples(times: &[f64], x: &[f64], horizon: f64, upto: usize) -> Result<f64> {
    if times.len() != x.len() || upto >= x.len() {
        return Err(Error::GridMismatch(format!(
            "{} times, {} values, evaluation node {upto}",
            times.len(),
            x.len()
        )));
    }
    let (num, den) = direct_sums(times, x, horizon, upto);
    finish_direct(num, den, times[upto])
}

fn direct_sums(times: &[f64], x: &[f64], horizon: f64, upto: usize) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut left = x[0] / (horizon - times[0]);
    for i in 0..upto {
        let right = x[i + 1] / (horizon - times[i + 1]);
        num += left * (x[i + 1] - x[i]);
        den += 0.5 * (left * left + right * right) * (times[i + 1] - times[i]);
        left = right;
    }
    (num, den)
}

fn finish_direct(num: f64, den: f64, t: f64) -> Result<f64> {
    if !(den >= MIN_DENOMINATOR) {
        return Err(Error::DegenerateDenominator { t, value: den });
    }
    Ok(-num / den)
}

pub fn alpha_hat_direct(paths: &BridgePaths, t: f64) -> Result<f64> {
    let i = node_index(&paths.grid, t)?;
    alpha_hat_from_samples(paths.grid.times(), &paths.x, paths.params.horizon, i)
}

fn identity_at(paths: &BridgePaths, i: usize) -> Result<f64> {
    let t = paths.grid.times()[i];
    let den = paths.denom[i];
    if !(den >= MIN_DENOMINATOR) {
        return Err(Error::DegenerateDenominator { t, value: den });
    }
    let a = paths.params.alpha;
    let gap = paths.params.horizon - t;
    let xi = paths.xi[i];
    Ok(0.5 - xi * xi * gap.powf(2.0 * a - 1.0) / (2.0 * den))
}

pub fn alpha_hat_identity(paths: &BridgePaths, t: f64) -> Result<f64> {
    let i = node_index(&paths.grid, t)?;
    identity_at(paths, i)
}

/// Both estimator forms at every ladder time, in one pass over the path.
pub fn estimate_ladder(paths: &BridgePaths, ladder: &EvalLadder) -> Result<EstimatorLadder> {
    if (ladder.horizon() - paths.params.horizon).abs() > 1e-12 * paths.params.horizon {
        return domain(format!(
            "ladder horizon {} differs from model horizon {}",
            ladder.horizon(),
            paths.params.horizon
        ));
    }
    let nodes = ladder.snap(&paths.grid)?;
    let times = paths.grid.times();
    let horizon = paths.params.horizon;
    let alpha = paths.params.alpha;
    let x = &paths.x;

    let mut entries = Vec::with_capacity(nodes.len());
    let mut num = 0.0;
    let mut den = 0.0;
    let mut left = x[0] / (horizon - times[0]);
    let mut done = 0;
    for &node in &nodes {
        // Continue the same running sums as `direct_sums`.
        for i in done..node {
            let right = x[i + 1] / (horizon - times[i + 1]);
            num += left * (x[i + 1] - x[i]);
            den += 0.5 * (left * left + right * right) * (times[i + 1] - times[i]);
            left = right;
        }
        done = node;
        let t = times[node];
        let direct = finish_direct(num, den, t)?;
        entries.push(LadderEntry {
            t,
            epsilon: horizon - t,
            alpha_hat_direct: direct,
            alpha_hat_identity: identity_at(paths, node)?,
            error: alpha - direct,
            xi: paths.xi[node],
            eta: paths.eta[node],
            denom: paths.denom[node],
            renormalized: BTreeMap::new(),
        });
    }
    Ok(EstimatorLadder {
        params: paths.params,
        entries,
    })
}

/// Renormalized error of one entry for `regime`. For `NC_half` this is
/// `½ − α̂_t`, which tends to zero.
pub fn renormalized_value(regime: Regime, params: &ModelParams, entry: &LadderEntry) -> f64 {
    match regime {
        Regime::NcHalf => 0.5 - entry.alpha_hat_direct,
        r => r.renormalizer(params.alpha, params.h(), entry.epsilon) * entry.error,
    }
}

/// Fills each entry's `renormalized` map under the label of the regime
/// `params` falls in.
pub fn renormalized_errors(mut ladder: EstimatorLadder, params: &ModelParams) -> Result<EstimatorLadder> {
    let regime = classify(params)?;
    for entry in &mut ladder.entries {
        let v = renormalized_value(regime, params, entry);
        entry.renormalized.insert(regime.label().to_string(), v);
    }
    Ok(ladder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::build_bridge;
    use crate::fbm::{DaviesHarte, GaussianPath, HurstParam};
    use crate::rng::stream;
    use crate::specialfn::{tanh_sinh, QuadratureSpec};
    use approx::assert_relative_eq;

    fn fbm(h: f64, t_max: f64, n: usize, seed: u64, rep: u64) -> GaussianPath {
        let grid = TimeGrid::new(t_max, n).unwrap();
        let dh = DaviesHarte::new(HurstParam::new(h).unwrap(), &grid).unwrap();
        let (mut s, tag) = stream(seed, rep);
        dh.sample(&mut s, tag)
    }

    #[test]
    fn ladder_validation() {
        assert!(EvalLadder::new(1.0, vec![]).is_err());
        assert!(EvalLadder::new(1.0, vec![0.1, 0.1]).is_err());
        assert!(EvalLadder::new(1.0, vec![0.01, 0.1]).is_err());
        assert!(EvalLadder::new(1.0, vec![1.0, 0.1]).is_err());
        assert!(EvalLadder::new(1.0, vec![0.5, 0.0]).is_err());
        let l = EvalLadder::geometric(2.0, 6).unwrap();
        assert_eq!(l.len(), 6);
        assert_relative_eq!(l.epsilons()[0], 0.2);
        assert_relative_eq!(l.smallest_epsilon(), 2e-6);
        assert!(l.times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn ladder_snaps_at_or_below() {
        let l = EvalLadder::new(1.0, vec![0.1, 0.01, 0.001]).unwrap();
        let g = l.grid(1 << 14).unwrap();
        let nodes = l.snap(&g).unwrap();
        assert_eq!(nodes[2], 1 << 14);
        for (&i, t) in nodes.iter().zip(l.times()) {
            assert!(g.times()[i] <= t && t - g.times()[i] < g.dt());
        }
    }

    #[test]
    fn evaluation_time_must_be_positive() {
        let p = fbm(0.7, 0.9, 64, 1, 0);
        let bp = build_bridge(&p, ModelParams::new(0.3, 1.0, 0.7).unwrap()).unwrap();
        assert!(alpha_hat_direct(&bp, 0.0).is_err());
        assert!(alpha_hat_identity(&bp, 0.95).is_err());
        // t inside the first cell snaps to node 0 and has no denominator.
        assert!(matches!(
            alpha_hat_direct(&bp, 1e-9),
            Err(Error::DegenerateDenominator { .. })
        ));
    }

    #[test]
    fn direct_matches_eta_over_denominator() {
        let params = ModelParams::new(0.3, 1.0, 0.7).unwrap();
        let p = fbm(0.7, 0.999, 1 << 16, 2, 0);
        let bp = build_bridge(&p, params).unwrap();
        let n = bp.xi.len() - 1;
        let direct = alpha_hat_direct(&bp, 0.999).unwrap();
        let via_eta = params.alpha - bp.eta[n] / bp.denom[n];
        let rel = ((params.alpha - direct) - (params.alpha - via_eta)).abs() / (params.alpha - via_eta).abs();
        assert!(rel < 1e-2, "{rel}");
    }

    // Deterministic ramp B_t = t: X solves X' = 1 − αX/(T−t), and
    // dX_u = X'(u) du, so every integral is an ordinary one.
    #[test]
    fn ramp_path_matches_quadrature_of_the_definition() {
        let (a, t_end, t_max) = (0.3f64, 1.0f64, 0.9f64);
        let params = ModelParams::new(a, t_end, 0.7).unwrap();
        let grid = TimeGrid::new(t_max, 1 << 16).unwrap();
        let path = GaussianPath::from_values(grid.clone(), grid.times().to_vec(), params.hurst, 0).unwrap();
        let bp = build_bridge(&path, params).unwrap();
        let got = alpha_hat_direct(&bp, t_max).unwrap();

        let x = |u: f64| (t_end - u).powf(a) * (t_end.powf(1.0 - a) - (t_end - u).powf(1.0 - a)) / (1.0 - a);
        let dx = |u: f64| 1.0 - a * x(u) / (t_end - u);
        let spec = QuadratureSpec::default();
        let num = tanh_sinh(|u| x(u) / (t_end - u) * dx(u), 0.0, t_max, &spec).unwrap();
        let den = tanh_sinh(|u| (x(u) / (t_end - u)).powi(2), 0.0, t_max, &spec).unwrap();
        assert!((got - (-num / den)).abs() < 1e-4, "{got} vs {}", -num / den);
    }

    #[test]
    fn half_alpha_matches_xi_squared_identity() {
        let params = ModelParams::new(0.5, 1.0, 0.7).unwrap();
        let p = fbm(0.7, 0.999, 1 << 16, 3, 0);
        let bp = build_bridge(&p, params).unwrap();
        let n = bp.xi.len() - 1;
        let err = 0.5 - alpha_hat_direct(&bp, 0.999).unwrap();
        let via_eta = bp.eta[n] / bp.denom[n];
        assert!((err - via_eta).abs() / via_eta.abs() < 1e-2, "{err} vs {via_eta}");
        assert_relative_eq!(
            0.5 - alpha_hat_identity(&bp, 0.999).unwrap(),
            bp.xi[n] * bp.xi[n] / (2.0 * bp.denom[n]),
            max_relative = 1e-12
        );
    }

    #[test]
    fn direct_and_identity_agree_under_refinement() {
        // The gap is a quadratic-variation remainder of order Δ^{2H−1};
        // average a few paths so the trend is not masked by one path's noise.
        for &(a, h) in &[(0.1, 0.6), (0.3, 0.75)] {
            let params = ModelParams::new(a, 1.0, h).unwrap();
            let mut diffs = [0.0; 5];
            for seed in 0..8 {
                let fine = fbm(h, 0.999, 1 << 16, 40 + seed, 0);
                for (k, d) in diffs.iter_mut().enumerate() {
                    let bp = build_bridge(&fine.coarsen(1 << (4 - k)).unwrap(), params).unwrap();
                    *d += (alpha_hat_direct(&bp, 0.999).unwrap()
                        - alpha_hat_identity(&bp, 0.999).unwrap())
                    .abs();
                }
            }
            assert!(diffs.windows(2).all(|w| w[1] < w[0]), "α={a}, H={h}: {diffs:?}");
        }
    }

    #[test]
    fn brownian_direct_estimator_carries_the_ito_correction() {
        // For H = ½ the chain rule gains ∫(T−u)^{−1}du = log(T/(T−t)):
        // α − α̂_t = [ξ_t²(T−t)^{2α−1} − log(T/(T−t))]/(2D_t) − (1−2α)/2.
        for &a in &[0.25, 1.0] {
            let params = ModelParams::new(a, 1.0, 0.5).unwrap();
            for seed in 0..4 {
                let bp = build_bridge(&fbm(0.5, 0.99, 1 << 16, 60 + seed, 0), params).unwrap();
                let n = bp.xi.len() - 1;
                let gap = 0.01f64;
                let ito = (bp.xi[n].powi(2) * gap.powf(2.0 * a - 1.0) - (1.0 / gap).ln())
                    / (2.0 * bp.denom[n])
                    - 0.5 * (1.0 - 2.0 * a);
                let err = a - alpha_hat_direct(&bp, 0.99).unwrap();
                assert!((err - ito).abs() < 2e-2 * (1.0 + ito.abs()), "α={a}: {err} vs {ito}");
            }
        }
    }

    #[test]
    fn scaling_the_driving_path_leaves_the_estimate_unchanged() {
        let params = ModelParams::new(0.3, 1.0, 0.7).unwrap();
        let p = fbm(0.7, 0.99, 1 << 12, 5, 0);
        let mut scaled = p.clone();
        for v in &mut scaled.values {
            *v *= 3.7;
        }
        let a = alpha_hat_direct(&build_bridge(&p, params).unwrap(), 0.99).unwrap();
        let b = alpha_hat_direct(&build_bridge(&scaled, params).unwrap(), 0.99).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ladder_matches_pointwise_evaluation() {
        let params = ModelParams::new(0.45, 1.0, 0.8).unwrap();
        let ladder = EvalLadder::geometric(1.0, 3).unwrap();
        let p = fbm(0.8, 0.999, 1 << 14, 6, 0);
        let bp = build_bridge(&p, params).unwrap();
        let est = renormalized_errors(estimate_ladder(&bp, &ladder).unwrap(), &params).unwrap();
        assert_eq!(est.entries.len(), 3);
        for e in &est.entries {
            assert_eq!(e.alpha_hat_direct, alpha_hat_direct(&bp, e.t).unwrap());
            assert_eq!(e.alpha_hat_identity, alpha_hat_identity(&bp, e.t).unwrap());
            let r = e.renormalized["R3_as_random"];
            assert_relative_eq!(r, e.epsilon.powf(2.0 * 0.45 - 1.0) * e.error, max_relative = 1e-14);
        }
    }

    #[test]
    fn nc_regime_renormalizes_to_distance_from_half() {
        let params = ModelParams::new(0.8, 1.0, 0.7).unwrap();
        let p = fbm(0.7, 0.99, 1 << 12, 7, 0);
        let bp = build_bridge(&p, params).unwrap();
        let ladder = EvalLadder::geometric(1.0, 2).unwrap();
        let est = renormalized_errors(estimate_ladder(&bp, &ladder).unwrap(), &params).unwrap();
        for e in &est.entries {
            assert_eq!(e.renormalized["NC_half"], 0.5 - e.alpha_hat_direct);
        }
    }
}
