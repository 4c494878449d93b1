//! Moments, quantile-based measures, entropy and order/record statistics.
//!
//! Integrals over the support are taken in the cumulative-hazard variable
//! `z = (αx + βx²/2)^γ`, where the density becomes `(1 - p + p z) e^{-z}` and
//! `x(z)` is the closed-form inverse. The upper cutoff starts at the survival
//! level `1e-12` and is pushed further out while a tail estimate says the
//! remainder is not negligible.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{tanh_sinh, QuadError};
use crate::rtgle::{DistError, RtgleParams};
use crate::scalar::Scalar;
use crate::special::{self, SpecialError};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PropError {
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error("series terms kept growing; stopped after {terms} terms")]
    SeriesDiverged { terms: usize },
    #[error("integrand does not decay in the right tail (MGF diverges at t = {t})")]
    MgfDiverged { t: f64 },
    #[error("integrand does not decay in the right tail")]
    TailNotDecaying,
    #[error("{what} outside its domain (got {value})")]
    Domain { what: &'static str, value: f64 },
    #[error("rank {r} outside 1..={n}")]
    RankOutOfRange { r: usize, n: usize },
    #[error("record values must be strictly increasing (violated at index {index})")]
    NonIncreasingRecords { index: usize },
}

fn domain<T: Scalar>(what: &'static str, value: T) -> PropError {
    PropError::Domain {
        what,
        value: value.to_f64().unwrap_or(f64::NAN),
    }
}

/// Relative accuracy requested from the quadrature routines.
fn quad_rel_tol<T: Scalar>() -> T {
    T::tol_floor(1e-13, 64.0)
}

/// Survival levels whose cumulative hazards split the z-integrals.
const Z_KNOT_LEVELS: [f64; 3] = [0.5, 1e-3, 1e-12];
const MAX_TAIL_EXTENSIONS: usize = 60;

/// `∫₀^∞ g(z) dz` for a nonnegative integrand that decays in `z`.
fn integrate_z<T, G>(params: &RtgleParams<T>, g: G) -> Result<T, PropError>
where
    T: Scalar,
    G: Fn(T) -> T,
{
    let rel = quad_rel_tol::<T>();
    let mut knots = vec![T::zero()];
    for q in Z_KNOT_LEVELS {
        let z = params.z_from_log_sf(T::lit(q).ln())?;
        if z > *knots.last().unwrap() {
            knots.push(z);
        }
    }
    let mut total = T::zero();
    let mut err = T::zero();
    let mut add_piece = |a: T, b: T, total: &mut T| -> Result<(), PropError> {
        match tanh_sinh(&g, a, b, rel, T::zero()) {
            Ok(i) => {
                *total = *total + i.value;
                err = err + i.error;
                Ok(())
            }
            Err(QuadError::NotConverged { value, error }) => {
                *total = *total + T::lit(value);
                err = err + T::lit(error);
                Ok(())
            }
            Err(e) => Err(e.into()),
        }
    };
    for w in knots.windows(2) {
        add_piece(w[0], w[1], &mut total)?;
    }
    let mut z = *knots.last().unwrap();
    let mut settled = false;
    for _ in 0..MAX_TAIL_EXTENSIONS {
        let gz = g(z);
        if gz == T::zero() {
            settled = true;
            break;
        }
        // decay rate -d ln g / dz from a one-sided difference
        let h = z * T::lit(1e-4);
        let kappa = (gz.ln() - g(z + h).ln()) / h;
        if kappa > T::zero() && gz / kappa <= rel * total.abs() {
            settled = true;
            break;
        }
        let next = z + z.max(T::one());
        add_piece(z, next, &mut total)?;
        z = next;
    }
    if !settled {
        return Err(PropError::TailNotDecaying);
    }
    if err > T::lit(100.0) * rel * total.abs() {
        return Err(QuadError::NotConverged {
            value: total.to_f64().unwrap_or(f64::NAN),
            error: err.to_f64().unwrap_or(f64::NAN),
        }
        .into());
    }
    Ok(total)
}

/// Weight `(1 - p + p z) e^{-z}` of the density in the z variable.
fn z_weight<T: Scalar>(params: &RtgleParams<T>, z: T) -> T {
    let p = params.p();
    (T::one() - p + p * z) * (-z).exp()
}

/// Raw moment `E[X^r]` by quadrature.
pub fn moment_quadrature<T: Scalar>(params: &RtgleParams<T>, r: u32) -> Result<T, PropError> {
    if r == 0 {
        return Err(domain("moment order", T::zero()));
    }
    let k = r as i32;
    integrate_z(params, |z| params.x_from_z(z).powi(k) * z_weight(params, z))
}

/// Result of a truncated series evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue<T> {
    pub value: T,
    pub terms_used: usize,
    /// False when `max_terms` was reached before the stopping rule fired.
    pub converged: bool,
}

const SERIES_REL_STOP: f64 = 1e-12;
const GROWTH_LIMIT: usize = 10;

/// Sums `term(j)` for `j = 0, 1, ...` under the shared stopping rules: stop
/// once a term is below `1e-12` of the partial sum, report divergence when
/// terms grow for ten consecutive indices, and give up at `max_terms`.
fn sum_series<T: Scalar>(
    max_terms: usize,
    mut term: impl FnMut(usize) -> Result<T, PropError>,
) -> Result<SeriesValue<T>, PropError> {
    let mut sum = T::zero();
    let mut prev = T::infinity();
    let mut growth = 0usize;
    for j in 0..max_terms {
        let t = term(j)?;
        if !t.is_finite() {
            return Err(PropError::SeriesDiverged { terms: j + 1 });
        }
        sum = sum + t;
        let mag = t.abs();
        if j > 0 && mag <= T::lit(SERIES_REL_STOP) * sum.abs() {
            return Ok(SeriesValue {
                value: sum,
                terms_used: j + 1,
                converged: true,
            });
        }
        if mag > prev {
            growth += 1;
            if growth >= GROWTH_LIMIT {
                return Err(PropError::SeriesDiverged { terms: j + 1 });
            }
        } else {
            growth = 0;
        }
        prev = mag;
    }
    Ok(SeriesValue {
        value: sum,
        terms_used: max_terms,
        converged: false,
    })
}

fn binomial<T: Scalar>(n: u32, k: u32) -> T {
    special::gen_binomial(T::from_count(n as usize), k as usize)
}

/// `∫₀^∞ z^s (1 - p + p z) e^{-z} dz = (1-p)Γ(s+1) + pΓ(s+2)`.
fn z_power_mean<T: Scalar>(params: &RtgleParams<T>, s: T) -> Result<T, PropError> {
    let p = params.p();
    let g1 = special::gamma_fn(s + T::one())?;
    let g2 = special::gamma_fn(s + T::lit(2.0))?;
    Ok((T::one() - p) * g1 + p * g2)
}

/// `ln[(1-p) e^{l1} + p e^{l2}]`.
fn ln_mix<T: Scalar>(p: T, l1: T, l2: T) -> T {
    let a = if p < T::one() {
        (T::one() - p).ln() + l1
    } else {
        T::neg_infinity()
    };
    let b = if p > T::zero() { p.ln() + l2 } else { T::neg_infinity() };
    let m = a.max(b);
    if m == T::neg_infinity() {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn require_both_rates<T: Scalar>(params: &RtgleParams<T>) -> Result<(), PropError> {
    if !(params.alpha() > T::zero()) {
        return Err(domain("alpha (series needs alpha > 0)", params.alpha()));
    }
    if !(params.beta() > T::zero()) {
        return Err(domain("beta (series needs beta > 0)", params.beta()));
    }
    Ok(())
}

/// Raw moment `E[X^r]` from the binomial/gamma series.
///
/// Writing `x = (√(α² + 2β z^{1/γ}) - α)/β` and expanding, each power
/// `(α² + 2β z^{1/γ})^{m}` with half-integer `m` is expanded in
/// `τ z^{1/γ}` (τ = 2β/α²) below `z = τ^{-γ}` and in its reciprocal above,
/// so both halves converge and integrate to incomplete gamma functions.
/// Integer `m` terminate and integrate to complete gamma functions.
pub fn moment_series<T: Scalar>(
    params: &RtgleParams<T>,
    r: u32,
    max_terms: usize,
) -> Result<SeriesValue<T>, PropError> {
    require_both_rates(params)?;
    if r == 0 {
        return Err(domain("moment order", T::zero()));
    }
    let (alpha, beta, gamma, p) = (params.alpha(), params.beta(), params.gamma(), params.p());
    let two = T::lit(2.0);
    let tau = two * beta / (alpha * alpha);
    let c = tau.powf(-gamma);
    let ln_tau = tau.ln();
    let mut total = T::zero();
    let mut terms_used = 0usize;
    let mut converged = true;
    for i in 0..=r {
        let coef = binomial::<T>(r, i) * (-alpha).powi(i as i32);
        let twice_m = r - i;
        let m = T::from_count(twice_m as usize) / two;
        let part = if twice_m.is_multiple_of(2) {
            let mi = twice_m / 2;
            let mut s = T::zero();
            for j in 0..=mi {
                let w = binomial::<T>(mi, j) * alpha.powi(2 * (mi - j) as i32) * (two * beta).powi(j as i32);
                s = s + w * z_power_mean(params, T::from_count(j as usize) / gamma)?;
            }
            terms_used = terms_used.max(mi as usize + 1);
            s
        } else {
            let ln_a2m = two * m * alpha.ln();
            let ln_2bm = m * (two * beta).ln();
            let sv = sum_series(max_terms, |j| {
                let b = special::gen_binomial(m, j);
                if b == T::zero() {
                    return Ok(T::zero());
                }
                let jf = T::from_count(j);
                // lower half: ∫₀^c z^{j/γ} w(z) dz
                let s_lo = jf / gamma;
                let lo = ln_mix(
                    p,
                    special::ln_lower_gamma(s_lo + T::one(), c)?,
                    special::ln_lower_gamma(s_lo + two, c)?,
                );
                // upper half: ∫_c^∞ z^{(m-j)/γ} w(z) dz
                let s_up = (m - jf) / gamma;
                let up = ln_mix(
                    p,
                    special::ln_upper_gamma(s_up + T::one(), c)?,
                    special::ln_upper_gamma(s_up + two, c)?,
                );
                let lo_term = (ln_a2m + jf * ln_tau + lo).exp();
                let up_term = (ln_2bm - jf * ln_tau + up).exp();
                Ok(b * (lo_term + up_term))
            })?;
            terms_used = terms_used.max(sv.terms_used);
            converged &= sv.converged;
            sv.value
        };
        total = total + coef * part;
    }
    Ok(SeriesValue {
        value: total / beta.powi(r as i32),
        terms_used,
        converged,
    })
}

/// Raw moment from the single merged double sum obtained by integrating the
/// `τ z^{1/γ}` binomial expansion term by term over all `z > 0`.
///
/// For half-integer exponents the generalized binomial series has radius one
/// while the gamma factors grow factorially, so this form only converges when
/// every exponent terminates; otherwise it reports
/// [`PropError::SeriesDiverged`]. Kept as a check on [`moment_series`].
pub fn moment_series_merged<T: Scalar>(
    params: &RtgleParams<T>,
    r: u32,
    max_terms: usize,
) -> Result<SeriesValue<T>, PropError> {
    require_both_rates(params)?;
    let (alpha, beta, gamma) = (params.alpha(), params.beta(), params.gamma());
    let two = T::lit(2.0);
    let mut total = T::zero();
    let mut terms_used = 0usize;
    let mut converged = true;
    for i in 0..=r {
        let m = T::from_count((r - i) as usize) / two;
        let outer = binomial::<T>(r, i) * if i % 2 == 0 { T::one() } else { -T::one() };
        let sv = sum_series(max_terms, |j| {
            let b = special::gen_binomial(m, j);
            if b == T::zero() {
                return Ok(T::zero());
            }
            let jf = T::from_count(j);
            let scale = alpha.powf(T::from_count(r as usize) - two * jf)
                * two.powi(j as i32)
                * beta.powf(jf - T::from_count(r as usize));
            Ok(b * scale * z_power_mean(params, jf / gamma)?)
        })?;
        terms_used = terms_used.max(sv.terms_used);
        converged &= sv.converged;
        total = total + outer * sv.value;
    }
    Ok(SeriesValue {
        value: total,
        terms_used,
        converged,
    })
}

/// `|Σᵢ C(r,i) αⁱ (β/2)^{r-i} μ'_{2r-i} - (1 + p r/γ) Γ(r/γ + 1)|` with every
/// moment taken by quadrature.
pub fn moment_recurrence_residual<T: Scalar>(params: &RtgleParams<T>, r: u32) -> Result<T, PropError> {
    if r == 0 {
        return Err(domain("moment order", T::zero()));
    }
    let (alpha, beta, gamma, p) = (params.alpha(), params.beta(), params.gamma(), params.p());
    let half_beta = T::lit(0.5) * beta;
    let mut lhs = T::zero();
    for i in 0..=r {
        let w = binomial::<T>(r, i) * alpha.powi(i as i32) * half_beta.powi((r - i) as i32);
        if w == T::zero() {
            continue;
        }
        lhs = lhs + w * moment_quadrature(params, 2 * r - i)?;
    }
    let rf = T::from_count(r as usize);
    let rhs = (T::one() + p * rf / gamma) * special::gamma_fn(rf / gamma + T::one())?;
    Ok((lhs - rhs).abs())
}

/// Moment summary for one order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport<T> {
    pub r: u32,
    pub value_quadrature: T,
    pub value_series: Option<T>,
    pub series_terms_used: usize,
    pub recurrence_residual: Option<T>,
}

/// Quadrature moment plus the series value (absent when the series does not
/// apply or diverges; possibly truncated at `max_terms`) and the recurrence
/// residual.
pub fn moment_report<T: Scalar>(
    params: &RtgleParams<T>,
    r: u32,
    max_terms: usize,
) -> Result<MomentReport<T>, PropError> {
    let value_quadrature = moment_quadrature(params, r)?;
    let (value_series, series_terms_used) = match moment_series(params, r, max_terms) {
        Ok(sv) => (Some(sv.value), sv.terms_used),
        Err(_) => (None, 0),
    };
    Ok(MomentReport {
        r,
        value_quadrature,
        value_series,
        series_terms_used,
        recurrence_residual: moment_recurrence_residual(params, r).ok(),
    })
}

/// Variance. With `β > 0` the second moment comes from the `r = 1`
/// recurrence, `μ'₂ = (2/β)[(1 + p/γ)Γ(1/γ + 1) - α μ'₁]`; otherwise both
/// moments are integrated directly.
pub fn variance<T: Scalar>(params: &RtgleParams<T>) -> Result<T, PropError> {
    let m1 = moment_quadrature(params, 1)?;
    let m2 = if params.beta() > T::zero() {
        let g = params.gamma();
        let lead = (T::one() + params.p() / g) * special::gamma_fn(T::one() / g + T::one())?;
        T::lit(2.0) / params.beta() * (lead - params.alpha() * m1)
    } else {
        moment_quadrature(params, 2)?
    };
    Ok(m2 - m1 * m1)
}

/// First four raw moments.
pub fn raw_moments<T: Scalar>(params: &RtgleParams<T>) -> Result<[T; 4], PropError> {
    Ok([
        moment_quadrature(params, 1)?,
        moment_quadrature(params, 2)?,
        moment_quadrature(params, 3)?,
        moment_quadrature(params, 4)?,
    ])
}

/// Mean, variance and the second through fourth central moments from raw
/// moments.
fn central_from_raw<T: Scalar>(m: [T; 4]) -> (T, T, T) {
    let [m1, m2, m3, m4] = m;
    let three = T::lit(3.0);
    let var = m2 - m1 * m1;
    let mu3 = m3 - three * m1 * m2 + T::lit(2.0) * m1.powi(3);
    let mu4 = m4 - T::lit(4.0) * m1 * m3 + T::lit(6.0) * m1 * m1 * m2 - three * m1.powi(4);
    (var, mu3, mu4)
}

/// Moment skewness `μ₃ / σ³`.
pub fn skewness<T: Scalar>(params: &RtgleParams<T>) -> Result<T, PropError> {
    let (var, mu3, _) = central_from_raw(raw_moments(params)?);
    Ok(mu3 / var.powf(T::lit(1.5)))
}

/// Moment kurtosis `μ₄ / σ⁴` (not excess; the exponential gives 9).
pub fn kurtosis<T: Scalar>(params: &RtgleParams<T>) -> Result<T, PropError> {
    let (var, _, mu4) = central_from_raw(raw_moments(params)?);
    Ok(mu4 / (var * var))
}

/// One row of the moment summary: `E X … E X⁴`, variance, skewness, kurtosis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary<T> {
    pub raw: [T; 4],
    pub variance: T,
    pub skewness: T,
    pub kurtosis: T,
}

pub fn moment_summary<T: Scalar>(params: &RtgleParams<T>) -> Result<MomentSummary<T>, PropError> {
    let raw = raw_moments(params)?;
    let (var, mu3, mu4) = central_from_raw(raw);
    Ok(MomentSummary {
        raw,
        variance: var,
        skewness: mu3 / var.powf(T::lit(1.5)),
        kurtosis: mu4 / (var * var),
    })
}

/// Which octiles enter the Moors coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum MoorsConvention {
    /// `(Q(7/8) - Q(5/8) + Q(3/8) - Q(1/8)) / (Q₃ - Q₁)`.
    #[default]
    Standard,
    /// Same with `Q(0.325)` in place of `Q(3/8)`, which is what the
    /// reference quantile tables for this family were computed with.
    Tabulated,
}

impl MoorsConvention {
    fn lower_middle_octile(self) -> f64 {
        match self {
            MoorsConvention::Standard => 0.375,
            MoorsConvention::Tabulated => 0.325,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileMeasures<T> {
    pub median: T,
    pub q1: T,
    pub q3: T,
    pub iqr: T,
    pub galton_skewness: T,
    pub moors_kurtosis: T,
}

pub fn quantile_measures<T: Scalar>(
    params: &RtgleParams<T>,
    moors: MoorsConvention,
) -> Result<QuantileMeasures<T>, PropError> {
    let q = |u: f64| params.quantile(T::lit(u));
    let (q1, median, q3) = (q(0.25)?, q(0.5)?, q(0.75)?);
    let iqr = q3 - q1;
    let octiles = q(0.875)? - q(0.625)? + q(moors.lower_middle_octile())? - q(0.125)?;
    Ok(QuantileMeasures {
        median,
        q1,
        q3,
        iqr,
        galton_skewness: (q1 + q3 - T::lit(2.0) * median) / iqr,
        moors_kurtosis: octiles / iqr,
    })
}

/// `∫₀¹ w(u) Q(u) du`, integrated over `q = 1 - u` so the logarithmic
/// singularity of `Q` at `u = 1` sits at the left endpoint.
fn quantile_integral<T, W>(params: &RtgleParams<T>, weight: W) -> Result<T, PropError>
where
    T: Scalar,
    W: Fn(T) -> T,
{
    let rel = quad_rel_tol::<T>();
    let f = |q: T| {
        let x = params.inverse_sf(q).unwrap_or(T::nan());
        weight(T::one() - q) * x
    };
    let half = T::lit(0.5);
    let a = tanh_sinh(f, T::zero(), half, rel, T::zero())?;
    let b = tanh_sinh(f, half, T::one(), rel, T::zero())?;
    Ok(a.value + b.value)
}

/// Gini mean difference `Δ = 2 ∫₀¹ (2u - 1) Q(u) du`.
pub fn gini_mean_difference<T: Scalar>(params: &RtgleParams<T>) -> Result<T, PropError> {
    let two = T::lit(2.0);
    Ok(two * quantile_integral(params, |u| two * u - T::one())?)
}

/// `r`-th L-moment `Σₖ (-1)^{r-1-k} C(r-1,k) C(r-1+k,k) ∫₀¹ uᵏ Q(u) du`,
/// with the sum folded into one polynomial weight before integrating.
pub fn l_moment<T: Scalar>(params: &RtgleParams<T>, r: u32) -> Result<T, PropError> {
    if r == 0 {
        return Err(domain("L-moment order", T::zero()));
    }
    let n = r - 1;
    let coeffs: Vec<T> = (0..=n)
        .map(|k| {
            let sign = if (n - k).is_multiple_of(2) { T::one() } else { -T::one() };
            sign * binomial::<T>(n, k) * binomial::<T>(n + k, k)
        })
        .collect();
    quantile_integral(params, |u| coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * u + c))
}

/// Moment generating function `E[e^{tX}]`.
pub fn mgf<T: Scalar>(params: &RtgleParams<T>, t: T) -> Result<T, PropError> {
    if !t.is_finite() {
        return Err(domain("mgf argument", t));
    }
    if t == T::zero() {
        return Ok(T::one());
    }
    let p = params.p();
    let g = |z: T| {
        let x = params.x_from_z(z);
        (t * x - z).exp() * (T::one() - p + p * z)
    };
    if t > T::zero() {
        // the log-integrand must eventually decrease: t x'(z) < 1 far out
        let z_far = params.z_from_log_sf(T::lit(1e-300).max(T::min_positive_value()).ln())?;
        let h = z_far * T::lit(1e-6);
        let slope = t * (params.x_from_z(z_far + h) - params.x_from_z(z_far)) / h - T::one();
        if !(slope < T::zero()) {
            return Err(PropError::MgfDiverged {
                t: t.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    integrate_z(params, g).map_err(|e| match e {
        PropError::TailNotDecaying => PropError::MgfDiverged {
            t: t.to_f64().unwrap_or(f64::NAN),
        },
        other => other,
    })
}

fn check_rho<T: Scalar>(rho: T) -> Result<(), PropError> {
    if !(rho > T::zero()) || rho == T::one() || !rho.is_finite() {
        return Err(domain("entropy order rho", rho));
    }
    Ok(())
}

/// Rényi entropy `(1/(1-ρ)) ln ∫ f^ρ` by quadrature.
pub fn renyi_entropy<T: Scalar>(params: &RtgleParams<T>, rho: T) -> Result<T, PropError> {
    check_rho(rho)?;
    let (alpha, beta, gamma, p) = (params.alpha(), params.beta(), params.gamma(), params.p());
    let g = |z: T| {
        if z <= T::zero() {
            return T::zero();
        }
        // f^ρ dx = k^{ρ-1} (1 - p + p z)^ρ e^{-ρ z} dz with k = dz/dx
        let x = params.x_from_z(z);
        let ln_z = z.ln();
        let ln_k = gamma.ln() + (alpha + beta * x).ln() + (gamma - T::one()) / gamma * ln_z;
        let ln_mix = if p == T::one() {
            ln_z
        } else {
            (T::one() - p + p * z).ln()
        };
        ((rho - T::one()) * ln_k + rho * ln_mix - rho * z).exp()
    };
    let integral = integrate_z(params, g)?;
    Ok(integral.ln() / (T::one() - rho))
}

/// Rényi entropy from the double gamma series
/// `γ^{ρ-1} Σᵢ Σⱼ C(ρ,i) C((ρ-1)/2,j) pⁱ(1-p)^{ρ-i} (2β)ʲ α^{ρ-1-2j} Γ(sᵢⱼ+1)/ρ^{sᵢⱼ+1}`,
/// `sᵢⱼ = ((ρ-1)(γ-1) + j)/γ + i`. Converges only when both binomial
/// expansions terminate (odd integer ρ, or `p = 0` with ρ odd); otherwise
/// reports [`PropError::SeriesDiverged`].
pub fn renyi_entropy_series<T: Scalar>(
    params: &RtgleParams<T>,
    rho: T,
    max_terms: usize,
) -> Result<SeriesValue<T>, PropError> {
    check_rho(rho)?;
    require_both_rates(params)?;
    let (alpha, beta, gamma, p) = (params.alpha(), params.beta(), params.gamma(), params.p());
    let two = T::lit(2.0);
    let m = (rho - T::one()) / two;
    let mut inner_terms = 0usize;
    let mut inner_converged = true;
    let outer = sum_series(max_terms, |i| {
        let bi = special::gen_binomial(rho, i);
        let fi = T::from_count(i);
        let pw = if i == 0 { T::one() } else { p.powi(i as i32) };
        let rest = rho - fi;
        let qw = if rest == T::zero() {
            T::one()
        } else {
            (T::one() - p).powf(rest)
        };
        let wi = bi * pw * qw;
        if wi == T::zero() {
            return Ok(T::zero());
        }
        let inner = sum_series(max_terms, |j| {
            let bj = special::gen_binomial(m, j);
            if bj == T::zero() {
                return Ok(T::zero());
            }
            let jf = T::from_count(j);
            let s = ((rho - T::one()) * (gamma - T::one()) + jf) / gamma + fi;
            let ln_v =
                jf * (two * beta).ln() + (rho - T::one() - two * jf) * alpha.ln() + special::log_gamma(s + T::one())?
                    - (s + T::one()) * rho.ln();
            Ok(bj * ln_v.exp())
        })?;
        inner_terms = inner_terms.max(inner.terms_used);
        inner_converged &= inner.converged;
        Ok(wi * inner.value)
    })?;
    let integral = gamma.powf(rho - T::one()) * outer.value;
    if !(integral > T::zero()) {
        return Err(PropError::SeriesDiverged {
            terms: outer.terms_used,
        });
    }
    Ok(SeriesValue {
        value: integral.ln() / (T::one() - rho),
        terms_used: outer.terms_used.max(inner_terms),
        converged: outer.converged && inner_converged,
    })
}

/// Density of the `r`-th smallest of `n` draws,
/// `f(x) F(x)^{r-1} S(x)^{n-r} / B(r, n-r+1)`, evaluated in logs.
pub fn order_statistic_pdf<T: Scalar>(params: &RtgleParams<T>, r: usize, n: usize, x: T) -> Result<T, PropError> {
    if r == 0 || r > n {
        return Err(PropError::RankOutOfRange { r, n });
    }
    if !(x > T::zero()) {
        return Ok(T::zero());
    }
    let ln_b = special::log_beta(T::from_count(r), T::from_count(n - r + 1))?;
    let mut ln_v = params.log_pdf(x) - ln_b;
    if r > 1 {
        ln_v = ln_v + T::from_count(r - 1) * params.cdf(x).ln();
    }
    if n > r {
        ln_v = ln_v + T::from_count(n - r) * params.log_sf(x);
    }
    Ok(ln_v.exp())
}

/// Density of the sample minimum, `n f(x) S(x)^{n-1}`.
pub fn smallest_order_statistic_pdf<T: Scalar>(params: &RtgleParams<T>, n: usize, x: T) -> Result<T, PropError> {
    if n == 0 {
        return Err(PropError::RankOutOfRange { r: 1, n });
    }
    if !(x > T::zero()) {
        return Ok(T::zero());
    }
    Ok(T::from_count(n) * params.pdf(x) * (T::from_count(n - 1) * params.log_sf(x)).exp())
}

/// Density of the sample maximum, `n f(x) F(x)^{n-1}`.
pub fn largest_order_statistic_pdf<T: Scalar>(params: &RtgleParams<T>, n: usize, x: T) -> Result<T, PropError> {
    if n == 0 {
        return Err(PropError::RankOutOfRange { r: n, n });
    }
    if !(x > T::zero()) {
        return Ok(T::zero());
    }
    Ok(T::from_count(n) * params.pdf(x) * params.cdf(x).powi(n as i32 - 1))
}

/// `-ln S(x) = z - ln(1 + p z)`, the cumulative hazard.
fn cumulative_hazard<T: Scalar>(params: &RtgleParams<T>, x: T) -> T {
    -params.log_sf(x)
}

/// Density of the `n`-th upper record, indexed so that the first record is
/// the first observation (`R₁ ~ f`): `H(x)^{n-1} f(x) / (n-1)!` with `H`
/// the cumulative hazard.
pub fn record_pdf<T: Scalar>(params: &RtgleParams<T>, n: usize, x: T) -> Result<T, PropError> {
    if n == 0 {
        return Err(PropError::RankOutOfRange { r: 0, n: 0 });
    }
    if !(x > T::zero()) {
        return Ok(T::zero());
    }
    let k = T::from_count(n - 1);
    let mut ln_v = params.log_pdf(x) - special::log_gamma(k + T::one())?;
    if n > 1 {
        ln_v = ln_v + k * cumulative_hazard(params, x).ln();
    }
    Ok(ln_v.exp())
}

/// Joint log-density of the first `n` upper records `r₁ < … < rₙ`:
/// `Σ_{j<n} ln h(r_j) + ln f(rₙ)`.
pub fn joint_record_log_pdf<T: Scalar>(params: &RtgleParams<T>, records: &[T]) -> Result<T, PropError> {
    let Some((&last, head)) = records.split_last() else {
        return Err(domain("record count", T::zero()));
    };
    for (i, w) in records.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(PropError::NonIncreasingRecords { index: i + 1 });
        }
    }
    if !(records[0] > T::zero()) {
        return Ok(T::neg_infinity());
    }
    let mut acc = params.log_pdf(last);
    for &r in head {
        acc = acc + params.hazard(r)?.ln();
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_kronrod;

    type P = RtgleParams<f64>;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    /// Independent x-space oracle with Gauss–Kronrod over the truncated support.
    fn gk_x_integral(d: &P, g: impl Fn(f64) -> f64) -> f64 {
        let hi = d.inverse_sf(1e-16).unwrap();
        let med = d.quantile(0.5).unwrap();
        let a = gauss_kronrod(&g, 0.0, med, 1e-12, 0.0, 4000).unwrap().value;
        let b = gauss_kronrod(&g, med, hi, 1e-12, 0.0, 4000).unwrap().value;
        a + b
    }

    #[test]
    fn moment_examples() {
        let d = P::new(0.5, 0.5, 1.2, 0.2).unwrap();
        assert!((moment_quadrature(&d, 1).unwrap() - 1.2058).abs() < 5e-5);
        let e = P::exponential(1.0).unwrap();
        assert!(close(moment_quadrature(&e, 2).unwrap(), 2.0, 1e-12));
        let g2 = P::rt_exponential(1.0, 1.0).unwrap();
        assert!(close(moment_quadrature(&g2, 1).unwrap(), 2.0, 1e-12));
        for r in 1..=4 {
            let want = gk_x_integral(&d, |x| x.powi(r as i32) * d.pdf(x));
            assert!(close(moment_quadrature(&d, r).unwrap(), want, 1e-9));
        }
    }

    #[test]
    fn heavy_moment_reaches_far_tail() {
        // mass of x^8 sits far beyond the 1e-12 survival point when γ = 0.5
        let d = P::new(0.5, 0.5, 0.5, 0.2).unwrap();
        let got = moment_quadrature(&d, 8).unwrap();
        let residual = moment_recurrence_residual(&d, 4).unwrap();
        assert!(got.is_finite());
        assert!(residual < 1e-7 * got, "{residual}");
    }

    #[test]
    fn series_matches_quadrature() {
        let d = P::new(0.5, 0.5, 1.2, 0.2).unwrap();
        let s = moment_series(&d, 1, 5000).unwrap();
        assert!((s.value - 1.2058).abs() < 5e-3);
        for prm in [
            (1.0, 2.0, 1.0, 0.0),
            (0.5, 0.5, 1.2, 0.0),
            (3.5, 0.5, 1.2, 0.2),
            (0.5, 3.5, 2.0, 0.7),
        ] {
            let d = P::new(prm.0, prm.1, prm.2, prm.3).unwrap();
            for r in 1..=3 {
                let s = moment_series(&d, r, 5000).unwrap();
                let q = moment_quadrature(&d, r).unwrap();
                assert!(close(s.value, q, 1e-3), "{prm:?} r={r}: {} vs {q}", s.value);
            }
        }
    }

    #[test]
    fn merged_series_diverges_for_half_integer_exponents() {
        let d = P::new(0.5, 0.5, 1.2, 0.2).unwrap();
        assert!(matches!(
            moment_series_merged(&d, 1, 5000),
            Err(PropError::SeriesDiverged { .. })
        ));
        // r = 2 still carries an odd exponent (i = 1)
        assert!(moment_series_merged(&d, 2, 5000).is_err());
    }

    #[test]
    fn recurrence_examples() {
        let e = P::exponential(1.0).unwrap();
        assert!(moment_recurrence_residual(&e, 1).unwrap() <= 1e-9);
        let g2 = P::rt_exponential(1.0, 1.0).unwrap();
        assert!(moment_recurrence_residual(&g2, 1).unwrap() <= 1e-9);
        let d = P::new(0.5, 0.5, 1.2, 0.2).unwrap();
        assert!(moment_recurrence_residual(&d, 1).unwrap() <= 1e-7);
    }

    #[test]
    fn variance_shape_examples() {
        let d = P::new(0.5, 0.5, 1.2, 0.2).unwrap();
        assert!((variance(&d).unwrap() - 0.5243).abs() < 5e-5);
        assert!((skewness(&d).unwrap() - 0.6155).abs() < 5e-4);
        assert!((kurtosis(&d).unwrap() - 3.0496).abs() < 5e-3);
        let e = P::exponential(1.0).unwrap();
        assert!(close(variance(&e).unwrap(), 1.0, 1e-10));
        assert!(close(skewness(&e).unwrap(), 2.0, 1e-8));
        assert!(close(kurtosis(&e).unwrap(), 9.0, 1e-8));
        let d = P::new(0.5, 0.5, 3.5, 0.2).unwrap();
        assert!((skewness(&d).unwrap() + 0.3649).abs() < 5e-4);
    }

    #[test]
    fn report_bundles_routes() {
        let d = P::new(0.5, 0.5, 1.2, 0.2).unwrap();
        let rep = moment_report(&d, 1, 5000).unwrap();
        assert!(rep.value_series.is_some());
        assert!(rep.recurrence_residual.unwrap() < 1e-7);
        let w = P::weibull(1.0, 2.0).unwrap();
        let rep = moment_report(&w, 1, 100).unwrap();
        assert!(rep.value_series.is_none());
    }

    #[test]
    fn quantile_measure_examples() {
        let d = P::new(0.5, 0.5, 1.2, 0.2).unwrap();
        let m = quantile_measures(&d, MoorsConvention::Tabulated).unwrap();
        assert!((m.median - 1.1199).abs() < 5e-5);
        assert!((m.iqr - 1.0325).abs() < 5e-5);
        assert!((m.galton_skewness - 0.0728).abs() < 5e-5);
        assert!((m.moors_kurtosis - 1.0866).abs() < 5e-5);
        let s = quantile_measures(&d, MoorsConvention::Standard).unwrap();
        assert_eq!(s.median, m.median);
        assert!((s.moors_kurtosis - m.moors_kurtosis).abs() > 0.05);
        let d = P::new(0.5, 0.5, 1.2, 1.0).unwrap();
        let m = quantile_measures(&d, MoorsConvention::Tabulated).unwrap();
        assert!((m.median - 1.6755).abs() < 5e-5);
    }

    #[test]
    fn gini_and_l_moments() {
        let e = P::exponential(1.0).unwrap();
        assert!(close(gini_mean_difference(&e).unwrap(), 1.0, 1e-10));
        assert!(close(l_moment(&e, 2).unwrap(), 0.5, 1e-10));
        assert!(close(l_moment(&e, 1).unwrap(), 1.0, 1e-10));
        // exponential: L3 / L2 = 1/3
        assert!(close(l_moment(&e, 3).unwrap(), 1.0 / 6.0, 1e-9));
        let d = P::new(0.7, 0.3, 0.8, 0.35).unwrap();
        assert!(close(l_moment(&d, 1).unwrap(), moment_quadrature(&d, 1).unwrap(), 1e-6));
        assert!(close(
            gini_mean_difference(&d).unwrap(),
            2.0 * l_moment(&d, 2).unwrap(),
            1e-10
        ));
    }

    #[test]
    fn mgf_examples() {
        let d = P::new(0.5, 0.5, 1.2, 0.2).unwrap();
        assert_eq!(mgf(&d, 0.0).unwrap(), 1.0);
        let e = P::exponential(1.0).unwrap();
        assert!(close(mgf(&e, 0.5).unwrap(), 2.0, 1e-10));
        assert!(close(mgf(&e, -1.0).unwrap(), 0.5, 1e-10));
        let g2 = P::rt_exponential(1.0, 1.0).unwrap();
        assert!(close(mgf(&g2, 0.5).unwrap(), 4.0, 1e-10));
        assert!(matches!(mgf(&e, 1.5), Err(PropError::MgfDiverged { .. })));
        assert!(matches!(mgf(&e, 1.0), Err(PropError::MgfDiverged { .. })));
        // γ > 1/2 with β > 0: quadratic growth of z beats any linear t x
        assert!(mgf(&d, 3.0).unwrap().is_finite());
    }

    #[test]
    fn renyi_examples() {
        let e = P::exponential(1.0).unwrap();
        assert!(close(renyi_entropy(&e, 2.0).unwrap(), std::f64::consts::LN_2, 1e-10));
        let e3 = P::exponential(3.0).unwrap();
        assert!(close(renyi_entropy(&e3, 2.0).unwrap(), (2.0f64 / 3.0).ln(), 1e-10));
        assert!(renyi_entropy(&e, 1.0).is_err());
        let d = P::new(0.5, 0.5, 1.2, 0.2).unwrap();
        let want = (1.0 / (1.0 - 2.5)) * gk_x_integral(&d, |x| d.pdf(x).powf(2.5)).ln();
        assert!(close(renyi_entropy(&d, 2.5).unwrap(), want, 1e-9));
        let lo = renyi_entropy(&d, 1.0 - 1e-3).unwrap();
        let hi = renyi_entropy(&d, 1.0 + 1e-3).unwrap();
        assert!((lo - hi).abs() < 1e-2);
    }

    #[test]
    fn renyi_series_where_it_terminates() {
        for prm in [(0.5, 0.5, 1.2, 0.2), (1.0, 2.0, 0.8, 0.6), (2.0, 0.3, 2.5, 0.0)] {
            let d = P::new(prm.0, prm.1, prm.2, prm.3).unwrap();
            let s = renyi_entropy_series(&d, 3.0, 1000).unwrap();
            assert!(s.converged);
            let q = renyi_entropy(&d, 3.0).unwrap();
            assert!(close(s.value, q, 1e-3), "{prm:?}");
        }
        let d = P::new(0.5, 0.5, 1.2, 0.2).unwrap();
        assert!(matches!(
            renyi_entropy_series(&d, 2.0, 1000),
            Err(PropError::SeriesDiverged { .. })
        ));
    }

    #[test]
    fn order_statistic_examples() {
        let d = P::new(0.5, 0.5, 1.2, 0.2).unwrap();
        assert!(close(order_statistic_pdf(&d, 1, 1, 0.8).unwrap(), d.pdf(0.8), 1e-13));
        let e = P::exponential(1.0).unwrap();
        assert!(close(
            order_statistic_pdf(&e, 1, 3, 1.0).unwrap(),
            3.0 * (-3.0f64).exp(),
            1e-13
        ));
        let mass = gk_x_integral(&d, |x| order_statistic_pdf(&d, 3, 5, x).unwrap());
        assert!((mass - 1.0).abs() < 1e-7);
        assert!(order_statistic_pdf(&d, 0, 5, 1.0).is_err());
        assert!(order_statistic_pdf(&d, 6, 5, 1.0).is_err());
        for x in [0.3, 1.1, 2.5] {
            assert!(close(
                order_statistic_pdf(&d, 1, 4, x).unwrap(),
                smallest_order_statistic_pdf(&d, 4, x).unwrap(),
                1e-12
            ));
            assert!(close(
                order_statistic_pdf(&d, 4, 4, x).unwrap(),
                largest_order_statistic_pdf(&d, 4, x).unwrap(),
                1e-12
            ));
            // binomial expansion of F^{r-1} in powers of S
            let (r, n) = (3usize, 6usize);
            let s = d.sf(x);
            let expansion: f64 = (0..r)
                .map(|i| {
                    let c = special::gen_binomial((r - 1) as f64, i);
                    c * (-1f64).powi(i as i32) * s.powi((n + i - r) as i32)
                })
                .sum::<f64>()
                * d.pdf(x)
                / special::log_beta(r as f64, (n - r + 1) as f64).unwrap().exp();
            assert!(close(order_statistic_pdf(&d, r, n, x).unwrap(), expansion, 1e-10));
        }
    }

    #[test]
    fn record_examples() {
        let d = P::new(0.5, 0.5, 1.2, 0.2).unwrap();
        assert!(close(record_pdf(&d, 1, 0.9).unwrap(), d.pdf(0.9), 1e-13));
        let e = P::exponential(1.0).unwrap();
        // third record of standard exponentials ~ Gamma(3, 1)
        assert!(close(record_pdf(&e, 3, 2.0).unwrap(), 2.0 * (-2.0f64).exp(), 1e-13));
        for n in 1..=4 {
            let mass = gk_x_integral(&d, |x| record_pdf(&d, n, x).unwrap());
            assert!((mass - 1.0).abs() < 1e-7, "n={n}: {mass}");
        }
        assert!(close(joint_record_log_pdf(&d, &[0.7]).unwrap(), d.log_pdf(0.7), 1e-14));
        assert!(matches!(
            joint_record_log_pdf(&d, &[0.7, 0.7]),
            Err(PropError::NonIncreasingRecords { index: 1 })
        ));
        // marginal of the last record: integrate the joint over r1 < r2
        let r2 = 1.4;
        let inner = gauss_kronrod(
            |r1| joint_record_log_pdf(&d, &[r1, r2]).unwrap().exp(),
            0.0,
            r2,
            1e-12,
            0.0,
            500,
        )
        .unwrap()
        .value;
        assert!(close(inner, record_pdf(&d, 2, r2).unwrap(), 1e-9));
    }

    #[test]
    fn generic_f32_moment() {
        let d = RtgleParams::<f32>::new(0.5, 0.5, 1.2, 0.2).unwrap();
        assert!((moment_quadrature(&d, 1).unwrap() - 1.2058).abs() < 1e-3);
    }
}
