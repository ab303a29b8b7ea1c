//! Closed-form limit constants and regime classification.
//!
//! With `ε = T − t`, the renormalized estimation error `α − α̂_t` behaves
//! as follows for `½ < H < 1`:
//!
//! | regime | range | renormalizer | limit |
//! |---|---|---|---|
//! | `R1_cauchy` | `0 < α < 1−H` | `ε^{α−H}` | Cauchy, scale [`cauchy_scale_r1`] |
//! | `R2_log_cauchy` | `α = 1−H` | `ε^{1−2H}/√|log ε|` | Cauchy, scale [`cauchy_scale_r2`] |
//! | `R3_as_random` | `1−H < α < ½` | `ε^{2α−1}` | a.s. to `(1−2α)η_T/ξ_T²` |
//! | `R4_as_half` | `α = ½` | `|log ε|` | a.s. to `½` |
//! | `NC_half` | `α > ½` | none | `α̂ → ½` |
//!
//! For standard Brownian motion (`H = ½`) the classical results are
//! `B9` (`α < ½`, Cauchy with scale `T^{α−½}(1−2α)`) and `B11`
//! (`α > ½`, `√|log ε|(α − α̂) → N(0, 2α−1)`).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bridge::ModelParams;
use crate::error::{domain, Result};
use crate::specialfn::beta;

/// Floating boundary comparisons (`α = 1−H`, `α = ½`) use this tolerance.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "R1_cauchy")]
    R1Cauchy,
    #[serde(rename = "R2_log_cauchy")]
    R2LogCauchy,
    #[serde(rename = "R3_as_random")]
    R3AsRandom,
    #[serde(rename = "R4_as_half")]
    R4AsHalf,
    #[serde(rename = "NC_half")]
    NcHalf,
    #[serde(rename = "B9")]
    B9,
    #[serde(rename = "B11")]
    B11,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::R1Cauchy => "R1_cauchy",
            Regime::R2LogCauchy => "R2_log_cauchy",
            Regime::R3AsRandom => "R3_as_random",
            Regime::R4AsHalf => "R4_as_half",
            Regime::NcHalf => "NC_half",
            Regime::B9 => "B9",
            Regime::B11 => "B11",
        }
    }

    /// Whether the renormalized error has a Cauchy limit law.
    pub fn is_cauchy(self) -> bool {
        matches!(self, Regime::R1Cauchy | Regime::R2LogCauchy | Regime::B9)
    }

    /// Multiplier applied to `α − α̂_t` at `ε = T − t`. For `NC_half` the
    /// value returned is `1` and the caller subtracts `α − ½` instead.
    pub fn renormalizer(self, alpha: f64, hurst: f64, eps: f64) -> f64 {
        let log = eps.ln().abs();
        match self {
            Regime::R1Cauchy => eps.powf(alpha - hurst),
            Regime::R2LogCauchy => eps.powf(1.0 - 2.0 * hurst) / log.sqrt(),
            Regime::R3AsRandom => eps.powf(2.0 * alpha - 1.0),
            Regime::R4AsHalf => log,
            Regime::NcHalf => 1.0,
            Regime::B9 => eps.powf(alpha - 0.5),
            Regime::B11 => log.sqrt(),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn is_brownian(h: f64) -> bool {
    (h - 0.5).abs() <= BOUNDARY_TOL
}

pub fn classify(params: &ModelParams) -> Result<Regime> {
    let (a, h) = (params.alpha, params.h());
    if !(a > 0.0) {
        return domain(format!("classification requires alpha > 0 (got {a})"));
    }
    if is_brownian(h) {
        return if (a - 0.5).abs() <= BOUNDARY_TOL {
            domain("alpha = 1/2 with H = 1/2 has no closed-form limit law and is not supported")
        } else if a < 0.5 {
            Ok(Regime::B9)
        } else {
            Ok(Regime::B11)
        };
    }
    if !(h > 0.5 && h < 1.0) {
        return domain(format!("analysis requires H = 1/2 or 1/2 < H < 1 (got H = {h})"));
    }
    let regime = if (a - (1.0 - h)).abs() <= BOUNDARY_TOL {
        Regime::R2LogCauchy
    } else if a < 1.0 - h {
        Regime::R1Cauchy
    } else if (a - 0.5).abs() <= BOUNDARY_TOL {
        Regime::R4AsHalf
    } else if a < 0.5 {
        Regime::R3AsRandom
    } else {
        Regime::NcHalf
    };
    Ok(regime)
}

/// `Var(ξ_T) = H(2H−1)/(H−α) · T^{2H−2α} · β(1−α, 2H−1)`; for `H = ½` the
/// Itô isometry value `T^{1−2α}/(1−2α)`, which is the limit of the former.
pub fn var_xi_terminal(params: &ModelParams) -> Result<f64> {
    let (a, h, t) = (params.alpha, params.h(), params.horizon);
    if !(a < h) {
        return domain(format!(
            "xi_T has finite variance only for alpha < H (got alpha = {a}, H = {h})"
        ));
    }
    if is_brownian(h) {
        return Ok(t.powf(1.0 - 2.0 * a) / (1.0 - 2.0 * a));
    }
    Ok(h * (2.0 * h - 1.0) / (h - a) * t.powf(2.0 * h - 2.0 * a) * beta(1.0 - a, 2.0 * h - 1.0)?)
}

fn require_r1(params: &ModelParams) -> Result<()> {
    match classify(params)? {
        Regime::R1Cauchy => Ok(()),
        r => domain(format!(
            "constant requires 0 < alpha < 1 - H (regime is {r} for alpha = {}, H = {})",
            params.alpha,
            params.h()
        )),
    }
}

fn require_r2(params: &ModelParams) -> Result<()> {
    match classify(params)? {
        Regime::R2LogCauchy => Ok(()),
        r => domain(format!(
            "constant requires alpha = 1 - H (regime is {r} for alpha = {}, H = {})",
            params.alpha,
            params.h()
        )),
    }
}

/// Coefficient `c` in the limit `c·G/ξ_T` (`G` standard normal, independent
/// of `B`) for `0 < α < 1−H`.
pub fn aux_gaussian_scale_r1(params: &ModelParams) -> Result<f64> {
    require_r1(params)?;
    let (a, h) = (params.alpha, params.h());
    let b = beta(2.0 - a - 2.0 * h, 2.0 * h - 1.0)?;
    Ok((1.0 - 2.0 * a) * (h * (2.0 * h - 1.0) * b / (1.0 - h - a)).sqrt())
}

pub fn cauchy_scale_r1(params: &ModelParams) -> Result<f64> {
    require_r1(params)?;
    let (a, h, t) = (params.alpha, params.h(), params.horizon);
    let num = (h - a) * beta(2.0 - 2.0 * h - a, 2.0 * h - 1.0)?;
    let den = (1.0 - h - a) * beta(1.0 - a, 2.0 * h - 1.0)?;
    Ok(t.powf(a - h) * (1.0 - 2.0 * a) * (num / den).sqrt())
}

/// Coefficient of `G/ξ_T` in the limit for `α = 1−H`.
pub fn aux_gaussian_scale_r2(params: &ModelParams) -> Result<f64> {
    require_r2(params)?;
    let h = params.h();
    Ok((2.0 * h - 1.0).powf(1.5) * (2.0 * h * beta(1.0 - h, 2.0 * h - 1.0)?).sqrt())
}

pub fn cauchy_scale_r2(params: &ModelParams) -> Result<f64> {
    require_r2(params)?;
    let (h, t) = (params.h(), params.horizon);
    let ratio = 2.0 * beta(1.0 - h, 2.0 * h - 1.0)? / beta(h, 2.0 * h - 1.0)?;
    Ok(t.powf(1.0 - 2.0 * h) * (2.0 * h - 1.0).powf(1.5) * ratio.sqrt())
}

/// Every constant that applies to one parameter triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub regime: Regime,
    /// Limit of `α̂_t` itself: `min(α, ½)` for `H > ½`, `α` for `H = ½`.
    pub estimator_limit: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cauchy_scale: Option<f64>,
    /// Almost-sure limit of the renormalized error, when it is a constant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub as_limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var_xi_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aux_gaussian_scale: Option<f64>,
    /// Variance of the Gaussian limit (`B11` only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaussian_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl LimitConstants {
    fn bare(regime: Regime, alpha: f64) -> Self {
        Self {
            regime,
            estimator_limit: alpha.min(0.5),
            cauchy_scale: None,
            as_limit: None,
            var_xi_t: None,
            aux_gaussian_scale: None,
            gaussian_variance: None,
            note: None,
        }
    }
}

/// Classical constants for the Wiener bridge (`H = ½`, `α ≠ ½`).
pub fn brownian_constants(alpha: f64, horizon: f64) -> Result<LimitConstants> {
    let params = ModelParams::new(alpha, horizon, 0.5)?;
    let regime = classify(&params)?;
    let mut c = LimitConstants::bare(regime, alpha);
    c.estimator_limit = alpha;
    match regime {
        Regime::B9 => {
            c.cauchy_scale = Some(horizon.powf(alpha - 0.5) * (1.0 - 2.0 * alpha));
            c.var_xi_t = Some(var_xi_terminal(&params)?);
        }
        Regime::B11 => {
            c.gaussian_variance = Some(2.0 * alpha - 1.0);
        }
        _ => unreachable!("H = 1/2 classifies as B9 or B11"),
    }
    Ok(c)
}

/// All applicable constants for `params`.
pub fn constants(params: &ModelParams) -> Result<LimitConstants> {
    let regime = classify(params)?;
    if matches!(regime, Regime::B9 | Regime::B11) {
        return brownian_constants(params.alpha, params.horizon);
    }
    let mut c = LimitConstants::bare(regime, params.alpha);
    if params.alpha < params.h() {
        c.var_xi_t = Some(var_xi_terminal(params)?);
    }
    match regime {
        Regime::R1Cauchy => {
            c.cauchy_scale = Some(cauchy_scale_r1(params)?);
            c.aux_gaussian_scale = Some(aux_gaussian_scale_r1(params)?);
        }
        Regime::R2LogCauchy => {
            c.cauchy_scale = Some(cauchy_scale_r2(params)?);
            c.aux_gaussian_scale = Some(aux_gaussian_scale_r2(params)?);
        }
        Regime::R3AsRandom => {
            c.note = Some("renormalized error converges a.s. to (1-2alpha) eta_T / xi_T^2, a path-dependent limit".into());
        }
        Regime::R4AsHalf => {
            c.as_limit = Some(0.5);
        }
        Regime::NcHalf => {
            c.note = Some("α̂→½, no rate provided by the theory".into());
        }
        Regime::B9 | Regime::B11 => unreachable!(),
    }
    Ok(c)
}
