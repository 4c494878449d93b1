//! Scalar special functions: both real branches of the Lambert W function,
//! log-gamma, gamma and log-beta.
//!
//! Lambert W uses Halley iteration. Starting values come from the branch-point
//! series in `p = ±sqrt(2(1 + e v))` near `-1/e` and from the asymptotic
//! `L1 - L2 + L2/L1` expansion elsewhere. The negative branch, and the
//! principal branch for large arguments, iterate on the logarithmic form
//! `w + ln|w| = ln|v|`, which stays well scaled when `|v|` is tiny or huge.

use thiserror::Error;

use crate::scalar::Scalar;

/// Residual bound for Lambert W: `|w e^w - v| <= ABS_TOL * max(1, |v|)`.
pub const ABS_TOL: f64 = 1e-12;
/// Target relative error of `gamma_fn`.
pub const REL_TOL: f64 = 1e-13;
/// Iteration cap for Halley refinement.
pub const MAX_HALLEY_ITERATIONS: usize = 50;

/// Radius in `p` below which the branch-point series is used without refinement.
const SERIES_ONLY_RADIUS: f64 = 2e-4;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SpecialError {
    #[error("{function}: argument {arg} outside domain")]
    Domain { function: &'static str, arg: f64 },
    #[error("{function}: no convergence after {iterations} iterations at {arg}")]
    NonConvergence {
        function: &'static str,
        arg: f64,
        iterations: usize,
    },
}

fn domain<T: Scalar>(function: &'static str, arg: T) -> SpecialError {
    SpecialError::Domain {
        function,
        arg: arg.to_f64().unwrap_or(f64::NAN),
    }
}

#[inline]
fn inv_e<T: Scalar>() -> T {
    T::one() / T::E()
}

/// Slack below `-1/e` that is treated as the branch point itself.
#[inline]
fn branch_slack<T: Scalar>() -> T {
    T::lit(2.0) * T::epsilon() * inv_e::<T>()
}

/// Branch-point series `W = -1 + p - p^2/3 + 11 p^3/72 - 43 p^4/540 + 769 p^5/17280`.
fn branch_series<T: Scalar>(p: T) -> T {
    let c = [
        -1.0,
        1.0,
        -1.0 / 3.0,
        11.0 / 72.0,
        -43.0 / 540.0,
        769.0 / 17280.0,
        -221.0 / 8505.0,
    ];
    c.iter().rev().fold(T::zero(), |acc, &k| acc * p + T::lit(k))
}

/// Halley refinement on `w e^w - v`.
fn halley_direct<T: Scalar>(function: &'static str, v: T, mut w: T) -> Result<T, SpecialError> {
    let two = T::lit(2.0);
    let mut prev_step = T::infinity();
    for _ in 0..MAX_HALLEY_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - v;
        // residual at rounding level: near the branch point the iteration
        // cannot resolve w further
        if f.abs() <= T::lit(2.0) * T::epsilon() * v.abs() {
            return Ok(w);
        }
        let wp1 = w + T::one();
        let denom = ew * wp1 - (w + two) * f / (two * wp1);
        if denom == T::zero() || !denom.is_finite() {
            return Ok(w);
        }
        let step = f / denom;
        w = w - step;
        let tiny = step.abs() <= T::lit(4.0) * T::epsilon() * w.abs().max(T::one());
        let stalled = step.abs() >= prev_step && step.abs() <= T::lit(1e-8) * w.abs().max(T::one());
        if tiny || stalled {
            return Ok(w);
        }
        prev_step = step.abs();
    }
    Err(SpecialError::NonConvergence {
        function,
        arg: v.to_f64().unwrap_or(f64::NAN),
        iterations: MAX_HALLEY_ITERATIONS,
    })
}

/// Halley refinement on `g(w) = w + ln(s w) - log_abs_v` where `s = sign(w)`.
fn halley_log<T: Scalar>(function: &'static str, log_abs_v: T, mut w: T) -> Result<T, SpecialError> {
    let two = T::lit(2.0);
    let mut prev_step = T::infinity();
    for _ in 0..MAX_HALLEY_ITERATIONS {
        let g = w + w.abs().ln() - log_abs_v;
        let g1 = T::one() + T::one() / w;
        let g2 = -T::one() / (w * w);
        let denom = two * g1 * g1 - g * g2;
        if denom == T::zero() || !denom.is_finite() {
            return Ok(w);
        }
        let step = two * g * g1 / denom;
        w = w - step;
        let tiny = step.abs() <= T::lit(4.0) * T::epsilon() * w.abs().max(T::one());
        let stalled = step.abs() >= prev_step && step.abs() <= T::lit(1e-8) * w.abs().max(T::one());
        if tiny || stalled {
            return Ok(w);
        }
        prev_step = step.abs();
    }
    Err(SpecialError::NonConvergence {
        function,
        arg: log_abs_v.to_f64().unwrap_or(f64::NAN),
        iterations: MAX_HALLEY_ITERATIONS,
    })
}

fn asymptotic_guess<T: Scalar>(l1: T) -> T {
    let l2 = l1.abs().ln();
    l1 - l2 + l2 / l1
}

/// Principal branch `W0(v)` for `v >= -1/e`. Returns a value in `[-1, inf)`.
pub fn lambert_w0<T: Scalar>(v: T) -> Result<T, SpecialError> {
    const NAME: &str = "lambert_w0";
    if v.is_nan() {
        return Err(domain(NAME, v));
    }
    if v == T::zero() {
        return Ok(T::zero());
    }
    if v == T::infinity() {
        return Ok(T::infinity());
    }
    let d = v + inv_e::<T>();
    if d < T::zero() {
        if d >= -branch_slack::<T>() {
            return Ok(-T::one());
        }
        return Err(domain(NAME, v));
    }
    if v < T::lit(-0.25) {
        let p = (T::lit(2.0) * T::E() * d).sqrt();
        let guess = branch_series(p);
        if p < T::lit(SERIES_ONLY_RADIUS) {
            return Ok(guess);
        }
        return halley_direct(NAME, v, guess).map(|w| w.max(-T::one()));
    }
    if v <= T::lit(3.0) {
        let guess = v.ln_1p() * (T::one() - T::lit(0.2) * v.ln_1p() / (T::one() + v.abs()));
        return halley_direct(NAME, v, guess);
    }
    let l1 = v.ln();
    halley_log(NAME, l1, asymptotic_guess(l1))
}

/// Negative branch `W-1(v)` for `-1/e <= v < 0`. Returns a value in `(-inf, -1]`.
pub fn lambert_wm1<T: Scalar>(v: T) -> Result<T, SpecialError> {
    const NAME: &str = "lambert_wm1";
    if v.is_nan() || v >= T::zero() {
        return Err(domain(NAME, v));
    }
    let d = v + inv_e::<T>();
    if d < T::zero() {
        if d >= -branch_slack::<T>() {
            return Ok(-T::one());
        }
        return Err(domain(NAME, v));
    }
    if v < T::lit(-0.25) {
        return wm1_near_branch(v, d);
    }
    lambert_wm1_log(v.abs().ln())
}

/// `W-1(v)` for `-1/e <= v < -1/4`, with `d = v + 1/e` supplied accurately by the caller.
fn wm1_near_branch<T: Scalar>(v: T, d: T) -> Result<T, SpecialError> {
    let p = -(T::lit(2.0) * T::E() * d.max(T::zero())).sqrt();
    let guess = branch_series(p);
    if p.abs() < T::lit(SERIES_ONLY_RADIUS) {
        return Ok(guess);
    }
    halley_direct("lambert_wm1", v, guess).map(|w| w.min(-T::one()))
}

/// Negative branch evaluated from `ln(-v)`, for arguments too small to represent.
///
/// Requires `ln(-v) <= -1` (that is, `v >= -1/e`); values within rounding of
/// `-1` map to the branch point.
pub fn lambert_wm1_log<T: Scalar>(log_neg_v: T) -> Result<T, SpecialError> {
    const NAME: &str = "lambert_wm1_log";
    if log_neg_v.is_nan() {
        return Err(domain(NAME, log_neg_v));
    }
    if log_neg_v == T::neg_infinity() {
        return Ok(T::neg_infinity());
    }
    if log_neg_v > -T::one() {
        if log_neg_v <= -T::one() + T::lit(4.0) * T::epsilon() {
            return Ok(-T::one());
        }
        return Err(domain(NAME, log_neg_v));
    }
    if log_neg_v > T::lit(-1.386_294_361_119_890_6) {
        // branch-point region: d = v + 1/e = -(1/e) expm1(ln(-v) + 1) without cancellation
        let d = -inv_e::<T>() * (log_neg_v + T::one()).exp_m1();
        return wm1_near_branch(-log_neg_v.exp(), d);
    }
    let guess = asymptotic_guess(log_neg_v).min(-T::lit(1.0001));
    halley_log(NAME, log_neg_v, guess).map(|w| w.min(-T::one()))
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
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

/// `ln Γ(a)` for `a > 0` via the Lanczos approximation (g = 7, 9 terms).
pub fn log_gamma<T: Scalar>(a: T) -> Result<T, SpecialError> {
    if !(a > T::zero()) || a.is_infinite() {
        return Err(domain("log_gamma", a));
    }
    if a < T::lit(0.5) {
        // Γ(a) = Γ(a + 1) / a keeps the series argument away from the pole
        return Ok(lanczos_ln_gamma(a + T::one()) - a.ln());
    }
    Ok(lanczos_ln_gamma(a))
}

fn lanczos_ln_gamma<T: Scalar>(a: T) -> T {
    let z = a - T::one();
    let mut sum = T::lit(LANCZOS_COEFFS[0]);
    for (k, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        sum = sum + T::lit(c) / (z + T::from_count(k));
    }
    let t = z + T::lit(LANCZOS_G + 0.5);
    let half_ln_two_pi = T::lit(0.918_938_533_204_672_8);
    half_ln_two_pi + (z + T::lit(0.5)) * t.ln() - t + sum.ln()
}

/// `Γ(a)` for `a > 0`.
pub fn gamma_fn<T: Scalar>(a: T) -> Result<T, SpecialError> {
    log_gamma(a).map(T::exp)
}

/// `ln B(a, b)`.
pub fn log_beta<T: Scalar>(a: T, b: T) -> Result<T, SpecialError> {
    if !(b > T::zero()) {
        return Err(domain("log_beta", b));
    }
    Ok(log_gamma(a)? + log_gamma(b)? - log_gamma(a + b)?)
}

/// Generalized binomial coefficient `C(a, j)` for real `a`.
pub fn gen_binomial<T: Scalar>(a: T, j: usize) -> T {
    (0..j).fold(T::one(), |acc, i| acc * (a - T::from_count(i)) / T::from_count(i + 1))
}

const MAX_GAMMA_TERMS: usize = 100_000;

/// Series for `ln γ(a, x)`, good for `x < a + 1`.
fn ln_lower_gamma_series<T: Scalar>(a: T, x: T) -> Result<T, SpecialError> {
    let mut term = T::one() / a;
    let mut sum = term;
    let mut denom = a;
    for _ in 0..MAX_GAMMA_TERMS {
        denom = denom + T::one();
        term = term * x / denom;
        sum = sum + term;
        if term < sum * T::epsilon() {
            return Ok(a * x.ln() - x + sum.ln());
        }
    }
    Err(SpecialError::NonConvergence {
        function: "lower_gamma",
        arg: x.to_f64().unwrap_or(f64::NAN),
        iterations: MAX_GAMMA_TERMS,
    })
}

/// Continued fraction (modified Lentz) for `ln Γ(a, x)`; valid for any real
/// `a` and `x > 0`, fast once `x` is past `a + 1`.
fn ln_upper_gamma_cf<T: Scalar>(a: T, x: T) -> Result<T, SpecialError> {
    let tiny = T::min_positive_value() / T::epsilon();
    let two = T::lit(2.0);
    let mut b = x + T::one() - a;
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..=MAX_GAMMA_TERMS {
        let fi = T::from_count(i);
        let an = -fi * (fi - a);
        b = b + two;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let del = d * c;
        h = h * del;
        if (del - T::one()).abs() < T::epsilon() {
            return Ok(a * x.ln() - x + h.ln());
        }
    }
    Err(SpecialError::NonConvergence {
        function: "upper_gamma",
        arg: x.to_f64().unwrap_or(f64::NAN),
        iterations: MAX_GAMMA_TERMS,
    })
}

/// `ln γ(a, x) = ln ∫₀ˣ t^{a-1} e^{-t} dt` for `a > 0`, `x ≥ 0`.
pub fn ln_lower_gamma<T: Scalar>(a: T, x: T) -> Result<T, SpecialError> {
    if !(a > T::zero()) || !(x >= T::zero()) {
        return Err(domain("lower_gamma", a));
    }
    if x == T::zero() {
        return Ok(T::neg_infinity());
    }
    if x < a + T::one() {
        return ln_lower_gamma_series(a, x);
    }
    let lg = log_gamma(a)?;
    let ln_q = ln_upper_gamma_cf(a, x)? - lg;
    Ok(lg + (-ln_q.exp()).ln_1p())
}

/// `ln Γ(a, x) = ln ∫ₓ^∞ t^{a-1} e^{-t} dt` for real `a` and `x > 0`
/// (`a > 0` also allows `x = 0`).
pub fn ln_upper_gamma<T: Scalar>(a: T, x: T) -> Result<T, SpecialError> {
    if a.is_nan() || !(x >= T::zero()) || (x == T::zero() && !(a > T::zero())) {
        return Err(domain("upper_gamma", x));
    }
    if a > T::zero() && x < a + T::one() {
        let lg = log_gamma(a)?;
        if x == T::zero() {
            return Ok(lg);
        }
        let ln_p = ln_lower_gamma_series(a, x)? - lg;
        return Ok(lg + (-ln_p.exp()).ln_1p());
    }
    ln_upper_gamma_cf(a, x)
}
