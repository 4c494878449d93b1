//! Numerical integration on finite intervals.
//!
//! Two independent schemes are provided:
//!
//! * [`tanh_sinh`]: double-exponential quadrature. The integrand is only
//!   evaluated strictly inside the interval and nodes near the lower endpoint
//!   are formed as `a + d` with `d` computed directly, so integrable algebraic
//!   or logarithmic singularities at `a` are handled accurately. Put a singular
//!   endpoint on the left.
//! * [`gauss_kronrod`]: globally adaptive 7/15-point Gauss–Kronrod bisection.
//!
//! The distribution code integrates with `tanh_sinh`; the Gauss–Kronrod
//! routine serves as the cross-check in tests and for the competitor models.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature did not reach tolerance: estimate {value}, error {error}")]
    NotConverged { value: f64, error: f64 },
    #[error("integrand produced a non-finite value at {at}")]
    NonFinite { at: f64 },
}

/// Integral estimate with an error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub error: T,
}

const MAX_TS_LEVEL: usize = 12;

/// Tanh-sinh quadrature of `f` over `[a, b]` to relative tolerance `rel_tol`
/// (with `abs_tol` as a floor).
pub fn tanh_sinh<T, F>(f: F, a: T, b: T, rel_tol: T, abs_tol: T) -> Result<Integral<T>, QuadError>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    if a == b {
        return Ok(Integral {
            value: T::zero(),
            error: T::zero(),
        });
    }
    let half = T::lit(0.5);
    let half_pi = T::FRAC_PI_2();
    let c = half * (a + b);
    let r = half * (b - a);

    // t beyond which the endpoint distance underflows
    let t_max = (-T::min_positive_value().ln() / T::PI()).asinh();
    let t_max = t_max.max(T::lit(3.0));

    // Contribution of node t (both signs), weights included.
    let pair = |t: T| -> Result<T, QuadError> {
        let s = half_pi * t.sinh();
        let cosh_s = s.cosh();
        let w = half_pi * t.cosh() / (cosh_s * cosh_s);
        // 1 - tanh(s) = 2 / (1 + e^{2s}), distance of the node from an endpoint in units of r
        let d = T::lit(2.0) / (T::one() + (T::lit(2.0) * s).exp());
        let mut acc = T::zero();
        if w == T::zero() || d == T::zero() {
            return Ok(acc);
        }
        let xl = a + r * d;
        if xl > a && xl < b {
            let v = f(xl);
            if !v.is_finite() {
                return Err(QuadError::NonFinite {
                    at: xl.to_f64().unwrap_or(f64::NAN),
                });
            }
            acc = acc + w * v;
        }
        let xr = b - r * d;
        if xr > a && xr < b && t != T::zero() {
            let v = f(xr);
            if !v.is_finite() {
                return Err(QuadError::NonFinite {
                    at: xr.to_f64().unwrap_or(f64::NAN),
                });
            }
            acc = acc + w * v;
        }
        Ok(acc)
    };

    let mut h = T::one();
    let center = {
        let v = f(c);
        if !v.is_finite() {
            return Err(QuadError::NonFinite {
                at: c.to_f64().unwrap_or(f64::NAN),
            });
        }
        half_pi * v
    };
    let mut sum = center;
    let mut k = 1usize;
    loop {
        let t = h * T::from_count(k);
        if t > t_max {
            break;
        }
        sum = sum + pair(t)?;
        k += 1;
    }
    let mut estimate = r * h * sum;
    let mut prev_diff = T::infinity();
    for _level in 1..=MAX_TS_LEVEL {
        h = h * half;
        // only odd multiples of the new step are new nodes
        let mut k = 1usize;
        loop {
            let t = h * T::from_count(k);
            if t > t_max {
                break;
            }
            sum = sum + pair(t)?;
            k += 2;
        }
        let new_estimate = r * h * sum;
        let diff = (new_estimate - estimate).abs();
        estimate = new_estimate;
        let target = (rel_tol * estimate.abs()).max(abs_tol);
        if diff <= target {
            return Ok(Integral {
                value: estimate,
                error: diff,
            });
        }
        prev_diff = diff;
    }
    Err(QuadError::NotConverged {
        value: estimate.to_f64().unwrap_or(f64::NAN),
        error: prev_diff.to_f64().unwrap_or(f64::NAN),
    })
}

/// Sums [`tanh_sinh`] over consecutive pieces `[knots[i], knots[i+1]]`.
pub fn tanh_sinh_pieces<T, F>(f: F, knots: &[T], rel_tol: T, abs_tol: T) -> Result<Integral<T>, QuadError>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let mut total = Integral {
        value: T::zero(),
        error: T::zero(),
    };
    for w in knots.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let piece = tanh_sinh(&f, w[0], w[1], rel_tol, abs_tol)?;
        total.value = total.value + piece.value;
        total.error = total.error + piece.error;
    }
    Ok(total)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WEIGHTS_G: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let c = half * (a + b);
    let r = half * (b - a);
    let fc = f(c);
    let mut kron = fc * T::lit(GK_WEIGHTS_K[7]);
    let mut gauss = fc * T::lit(GK_WEIGHTS_G[3]);
    for i in 0..7 {
        let dx = r * T::lit(GK_NODES[i]);
        let s = f(c - dx) + f(c + dx);
        kron = kron + T::lit(GK_WEIGHTS_K[i]) * s;
        if i % 2 == 1 {
            gauss = gauss + T::lit(GK_WEIGHTS_G[i / 2]) * s;
        }
    }
    (kron * r, ((kron - gauss) * r).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) over `[a, b]`.
pub fn gauss_kronrod<T, F>(
    f: F,
    a: T,
    b: T,
    rel_tol: T,
    abs_tol: T,
    max_intervals: usize,
) -> Result<Integral<T>, QuadError>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let (v0, e0) = gk15(&f, a, b);
    let mut intervals = vec![(a, b, v0, e0)];
    loop {
        let value = intervals.iter().fold(T::zero(), |s, iv| s + iv.2);
        let error = intervals.iter().fold(T::zero(), |s, iv| s + iv.3);
        if !value.is_finite() {
            return Err(QuadError::NonFinite { at: f64::NAN });
        }
        if error <= (rel_tol * value.abs()).max(abs_tol) {
            return Ok(Integral { value, error });
        }
        if intervals.len() >= max_intervals {
            return Err(QuadError::NotConverged {
                value: value.to_f64().unwrap_or(f64::NAN),
                error: error.to_f64().unwrap_or(f64::NAN),
            });
        }
        let (idx, _) =
            intervals.iter().enumerate().fold(
                (0, T::neg_infinity()),
                |best, (i, iv)| {
                    if iv.3 > best.1 {
                        (i, iv.3)
                    } else {
                        best
                    }
                },
            );
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = T::lit(0.5) * (lo + hi);
        if !(mid > lo && mid < hi) {
            return Err(QuadError::NotConverged {
                value: value.to_f64().unwrap_or(f64::NAN),
                error: error.to_f64().unwrap_or(f64::NAN),
            });
        }
        let (vl, el) = gk15(&f, lo, mid);
        let (vr, er) = gk15(&f, mid, hi);
        intervals.push((lo, mid, vl, el));
        intervals.push((mid, hi, vr, er));
    }
}
