//! Log-gamma, Beta, and the singular quadrature behind every covariance
//! oracle in the crate.
//!
//! Integrals are computed with double-exponential (tanh-sinh) quadrature,
//! which tolerates integrable power-law singularities at the interval
//! endpoints. Interior kinks must be exposed as breakpoints so that they
//! land on sub-interval endpoints.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

/// Tolerances for the adaptive quadratures in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_refinements: usize,
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_refinements: usize) -> Result<Self> {
        if !(abs_tol > 0.0) || !(rel_tol > 0.0) || max_refinements < 1 {
            return domain(format!(
                "quadrature spec requires abs_tol > 0, rel_tol > 0, max_refinements >= 1 \
                 (got {abs_tol}, {rel_tol}, {max_refinements})"
            ));
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_refinements,
        })
    }

    fn tightened(&self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            max_refinements: self.max_refinements,
        }
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_refinements: 30,
        }
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of |Γ(x)|, Lanczos approximation (g = 7, 9 terms) with
/// reflection below ½.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x)Γ(1−x) = π / sin(πx)
        return (PI / (PI * x).sin().abs()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// The Beta function β(a, b) = ∫₀¹ x^{a−1}(1−x)^{b−1} dx.
pub fn beta(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return domain(format!("beta requires a > 0 and b > 0 (got a = {a}, b = {b})"));
    }
    Ok((ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp())
}

// Nodes beyond this abscissa are below f64 resolution of either endpoint.
const TANH_SINH_T_MAX: f64 = 6.5;
// Step 2^-12 already resolves any integrand tanh-sinh can handle to f64
// precision; deeper levels only burn time on a stalled estimate.
const TANH_SINH_MAX_LEVEL: usize = 12;

/// Tanh-sinh quadrature of `f` over `[a, b]`.
///
/// The step is halved until two successive estimates agree within the
/// tolerances of `spec`. Nodes that round onto an endpoint are skipped, so
/// an integrand may be infinite there.
pub fn tanh_sinh<F>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(b > a) {
        if a == b {
            return Ok(0.0);
        }
        return domain(format!("tanh_sinh requires a < b (got [{a}, {b}])"));
    }
    let half = 0.5 * (b - a);
    let centre = a + half;

    // Contribution of all nodes j·h with j ≡ offset (mod stride).
    let mut layer = |h: f64, first: usize, stride: usize| -> f64 {
        let mut sum = 0.0;
        let mut j = first;
        loop {
            let t = j as f64 * h;
            if t > TANH_SINH_T_MAX {
                break;
            }
            let s = 0.5 * PI * t.sinh();
            let e = (-2.0 * s).exp();
            // 1 − tanh(s), accurate for large s.
            let gap = 2.0 * e / (1.0 + e);
            let w = half * 0.5 * PI * t.cosh() * gap * (2.0 - gap);
            if w == 0.0 {
                break;
            }
            let off = half * gap;
            if j == 0 {
                sum += w * f(centre);
            } else {
                let xr = b - off;
                if xr > a && xr < b {
                    sum += w * f(xr);
                }
                let xl = a + off;
                if xl > a && xl < b {
                    sum += w * f(xl);
                }
            }
            j += stride;
        }
        sum
    };

    let mut h = 1.0;
    let mut estimate = h * layer(h, 0, 1);
    let mut error = f64::INFINITY;
    let levels = spec.max_refinements.min(TANH_SINH_MAX_LEVEL);
    for level in 1..=levels {
        h *= 0.5;
        let fresh = layer(h, 1, 2);
        let next = 0.5 * estimate + h * fresh;
        error = (next - estimate).abs();
        estimate = next;
        if !estimate.is_finite() {
            break;
        }
        if level >= 3 && error <= spec.abs_tol.max(spec.rel_tol * estimate.abs()) {
            return Ok(estimate);
        }
    }
    Err(Error::NonConvergence {
        levels,
        estimate,
        error,
    })
}

/// Tanh-sinh over `[a, b]` split at every breakpoint strictly inside it.
pub fn integrate_piecewise<F>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&p| p > a && p < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    let mut lo = a;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        total += tanh_sinh(&mut f, lo, hi, spec)?;
        lo = hi;
    }
    Ok(total)
}

/// A deterministic integrand for Wiener integrals against fBm.
pub trait WeightFn {
    fn eval(&self, u: f64) -> f64;

    /// `eval(v − w)`; override when the function depends on a gap that
    /// the subtraction would round away.
    fn eval_shifted(&self, v: f64, w: f64) -> f64 {
        self.eval(v - w)
    }

    /// Interior points where the function is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<F: Fn(f64) -> f64> WeightFn for F {
    fn eval(&self, u: f64) -> f64 {
        self(u)
    }
}

/// `1_{[0, end]}`.
#[derive(Debug, Clone, Copy)]
pub struct Indicator {
    pub end: f64,
}

impl WeightFn for Indicator {
    fn eval(&self, u: f64) -> f64 {
        if u <= self.end {
            1.0
        } else {
            0.0
        }
    }

    fn eval_shifted(&self, v: f64, w: f64) -> f64 {
        if w >= v - self.end {
            1.0
        } else {
            0.0
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.end]
    }
}

/// `u ↦ (anchor − u)^exponent`, e.g. the bridge weight `(T − u)^{−α}`.
#[derive(Debug, Clone, Copy)]
pub struct PowerWeight {
    pub anchor: f64,
    pub exponent: f64,
}

impl WeightFn for PowerWeight {
    fn eval(&self, u: f64) -> f64 {
        (self.anchor - u).powf(self.exponent)
    }

    fn eval_shifted(&self, v: f64, w: f64) -> f64 {
        ((self.anchor - v) + w).powf(self.exponent)
    }
}

/// `H(2H−1) ∫₀ᵗ∫₀ᵗ f(u) g(v) |u−v|^{2H−2} du dv`, the covariance of the
/// Wiener integrals `∫f dB` and `∫g dB` for `½ < H < 1`.
///
/// The square is folded onto the triangle below the diagonal. On each
/// triangle the inner variable is `w = v − u` and then `z = w^{2H−1}`,
/// which turns `w^{2H−2} dw` into `dz / (2H−1)` and removes the diagonal
/// singularity exactly:
///
/// `J(f, g) = ∫₀ᵗ g(v) ∫₀^{v^{2H−1}} f(v − z^{1/(2H−1)}) dz dv`,
/// result `= H · (J(f, g) + J(g, f))`.
pub fn fbm_kernel_double_integral(
    f: &dyn WeightFn,
    g: &dyn WeightFn,
    hurst: f64,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(hurst > 0.5 && hurst < 1.0) {
        return domain(format!("kernel integral requires 1/2 < H < 1 (got H = {hurst})"));
    }
    if !(t > 0.0) {
        return domain(format!("kernel integral requires t > 0 (got {t})"));
    }
    let j_fg = folded_triangle(f, g, hurst, t, spec)?;
    let j_gf = folded_triangle(g, f, hurst, t, spec)?;
    Ok(hurst * (j_fg + j_gf))
}

fn folded_triangle(
    inner: &dyn WeightFn,
    outer: &dyn WeightFn,
    hurst: f64,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let gamma = 2.0 * hurst - 1.0;
    let power = 1.0 / gamma;
    let inner_breaks = inner.breakpoints();
    let mut outer_breaks = outer.breakpoints();
    outer_breaks.extend_from_slice(&inner_breaks);
    let inner_spec = spec.tightened(0.1);

    // tanh_sinh takes FnMut(f64) -> f64; stash the first inner failure.
    let mut failure: Option<Error> = None;
    let value = integrate_piecewise(
        |v| {
            if failure.is_some() {
                return 0.0;
            }
            let gv = outer.eval(v);
            if gv == 0.0 {
                return 0.0;
            }
            let z_max = v.powf(gamma);
            let z_breaks: Vec<f64> = inner_breaks
                .iter()
                .filter(|&&b| b > 0.0 && b < v)
                .map(|&b| (v - b).powf(gamma))
                .collect();
            let kernel = integrate_piecewise(
                |z| inner.eval_shifted(v, z.powf(power).min(v)),
                0.0,
                z_max,
                &z_breaks,
                &inner_spec,
            );
            match kernel {
                Ok(k) => gv * k,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        0.0,
        t,
        &outer_breaks,
        spec,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    value
}
