//! The RTGLE(α, β, γ, p) lifetime distribution.
//!
//! The baseline is the generalized linear exponential law with survival
//! `exp(-(αx + βx²/2)^γ)`. Record-based transmutation mixes its first upper
//! record (weight `1 - p`) with its second (weight `p`), which gives
//!
//! ```text
//! F(x) = 1 - (1 + p z) e^{-z},   z = (αx + βx²/2)^γ,  x > 0.
//! ```
//!
//! Most quantities are expressed through `z`. The quantile function is closed
//! form through the negative branch of the Lambert W function.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::StreamRng;
use crate::scalar::Scalar;
use crate::special::{self, SpecialError};

/// Below this mixing weight the Lambert route loses `z` to cancellation in
/// `-1/p - W`, so the survival equation is solved for `z` by Newton instead.
const SMALL_P: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ParamError {
    #[error("gamma must be positive and finite (got {0})")]
    NonPositiveGamma(f64),
    #[error("{name} must be non-negative and finite (got {value})")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("alpha and beta cannot both be zero")]
    BothRatesZero,
    #[error("p must lie in [0, 1] (got {0})")]
    POutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DistError {
    #[error("{what} outside its domain (got {value})")]
    Domain { what: &'static str, value: f64 },
    #[error(transparent)]
    Special(#[from] SpecialError),
}

fn domain_err<T: Scalar>(what: &'static str, value: T) -> DistError {
    DistError::Domain {
        what,
        value: value.to_f64().unwrap_or(f64::NAN),
    }
}

/// Validated parameter vector. Construct with [`RtgleParams::new`] or one of
/// the sub-model constructors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams<T>", into = "RawParams<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct RtgleParams<T> {
    alpha: T,
    beta: T,
    gamma: T,
    p: T,
}

#[derive(Serialize, Deserialize)]
struct RawParams<T> {
    alpha: T,
    beta: T,
    gamma: T,
    p: T,
}

impl<T: Scalar> TryFrom<RawParams<T>> for RtgleParams<T> {
    type Error = ParamError;

    fn try_from(r: RawParams<T>) -> Result<Self, ParamError> {
        RtgleParams::new(r.alpha, r.beta, r.gamma, r.p)
    }
}

impl<T: Scalar> From<RtgleParams<T>> for RawParams<T> {
    fn from(v: RtgleParams<T>) -> Self {
        RawParams {
            alpha: v.alpha,
            beta: v.beta,
            gamma: v.gamma,
            p: v.p,
        }
    }
}

/// Shape of the density as far as the unimodality theorem decides it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PdfShapeClass {
    MonotoneDecreasing,
    Unimodal,
    Indeterminate,
}

/// Monotonicity of the hazard rate as far as the IFR/DFR theorem decides it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HazardShapeClass {
    #[serde(rename = "IFR")]
    Ifr,
    #[serde(rename = "DFR")]
    Dfr,
    Indeterminate,
}

fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

impl<T: Scalar> RtgleParams<T> {
    /// Validates `(alpha, beta, gamma, p)`.
    pub fn new(alpha: T, beta: T, gamma: T, p: T) -> Result<Self, ParamError> {
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return Err(ParamError::NonPositiveGamma(to_f64(gamma)));
        }
        for (name, value) in [("alpha", alpha), ("beta", beta)] {
            if !(value >= T::zero()) || !value.is_finite() {
                return Err(ParamError::NegativeRate {
                    name,
                    value: to_f64(value),
                });
            }
        }
        if alpha == T::zero() && beta == T::zero() {
            return Err(ParamError::BothRatesZero);
        }
        if !(p >= T::zero() && p <= T::one()) {
            return Err(ParamError::POutOfRange(to_f64(p)));
        }
        Ok(Self { alpha, beta, gamma, p })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }
    pub fn beta(&self) -> T {
        self.beta
    }
    pub fn gamma(&self) -> T {
        self.gamma
    }
    pub fn p(&self) -> T {
        self.p
    }

    /// `[alpha, beta, gamma, p]`.
    pub fn to_array(&self) -> [T; 4] {
        [self.alpha, self.beta, self.gamma, self.p]
    }

    /// Same `(α, β, γ)` with a different mixing weight.
    pub fn with_p(&self, p: T) -> Result<Self, ParamError> {
        Self::new(self.alpha, self.beta, self.gamma, p)
    }

    /// The baseline GLE law, i.e. `p = 0`.
    pub fn baseline(&self) -> Self {
        Self { p: T::zero(), ..*self }
    }

    // Table of named sub-models.

    pub fn exponential(alpha: T) -> Result<Self, ParamError> {
        Self::new(alpha, T::zero(), T::one(), T::zero())
    }
    pub fn rayleigh(beta: T) -> Result<Self, ParamError> {
        Self::new(T::zero(), beta, T::one(), T::zero())
    }
    pub fn weibull(alpha: T, gamma: T) -> Result<Self, ParamError> {
        Self::new(alpha, T::zero(), gamma, T::zero())
    }
    pub fn linear_exponential(alpha: T, beta: T) -> Result<Self, ParamError> {
        Self::new(alpha, beta, T::one(), T::zero())
    }
    pub fn gle(alpha: T, beta: T, gamma: T) -> Result<Self, ParamError> {
        Self::new(alpha, beta, gamma, T::zero())
    }
    pub fn rt_exponential(alpha: T, p: T) -> Result<Self, ParamError> {
        Self::new(alpha, T::zero(), T::one(), p)
    }
    pub fn rt_rayleigh(beta: T, p: T) -> Result<Self, ParamError> {
        Self::new(T::zero(), beta, T::one(), p)
    }
    pub fn rt_weibull(alpha: T, gamma: T, p: T) -> Result<Self, ParamError> {
        Self::new(alpha, T::zero(), gamma, p)
    }
    pub fn rt_linear_exponential(alpha: T, beta: T, p: T) -> Result<Self, ParamError> {
        Self::new(alpha, beta, T::one(), p)
    }

    /// `αx + βx²/2`.
    #[inline]
    pub fn linear_quadratic(&self, x: T) -> T {
        x * (self.alpha + T::lit(0.5) * self.beta * x)
    }

    /// `z = (αx + βx²/2)^γ`, the baseline cumulative hazard.
    #[inline]
    pub fn cumulative_baseline_hazard(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        self.linear_quadratic(x).powf(self.gamma)
    }

    /// Inverse of `x ↦ z`: solves `βx²/2 + αx = z^{1/γ}` in a cancellation-free form.
    pub fn x_from_z(&self, z: T) -> T {
        if z <= T::zero() {
            return T::zero();
        }
        if z == T::infinity() {
            return T::infinity();
        }
        let c = z.powf(T::one() / self.gamma);
        let two = T::lit(2.0);
        two * c / (self.alpha + (self.alpha * self.alpha + two * self.beta * c).sqrt())
    }

    pub fn cdf(&self, x: T) -> T {
        if !(x > T::zero()) {
            return T::zero();
        }
        let z = self.cumulative_baseline_hazard(x);
        let p = self.p;
        (T::one() - p) * (-(-z).exp_m1()) + p * second_record_cdf(z)
    }

    /// Survival function `(1 + p z) e^{-z}`.
    pub fn sf(&self, x: T) -> T {
        if !(x > T::zero()) {
            return T::one();
        }
        let z = self.cumulative_baseline_hazard(x);
        (T::one() + self.p * z) * (-z).exp()
    }

    pub fn log_sf(&self, x: T) -> T {
        if !(x > T::zero()) {
            return T::zero();
        }
        let z = self.cumulative_baseline_hazard(x);
        (self.p * z).ln_1p() - z
    }

    /// Density. Zero for `x <= 0`.
    pub fn pdf(&self, x: T) -> T {
        if !(x > T::zero()) {
            return T::zero();
        }
        let s = self.linear_quadratic(x);
        let z = s.powf(self.gamma);
        let lead = self.gamma * (self.alpha + self.beta * x) * s.powf(self.gamma - T::one());
        lead * (T::one() - self.p + self.p * z) * (-z).exp()
    }

    /// Log-density computed as a sum of logs; `-inf` where the density vanishes.
    pub fn log_pdf(&self, x: T) -> T {
        if !(x > T::zero()) {
            return T::neg_infinity();
        }
        let s = self.linear_quadratic(x);
        let ln_s = s.ln();
        let z = (self.gamma * ln_s).exp();
        let mix = if self.p == T::one() {
            // 1 - p + p z = z
            self.gamma * ln_s
        } else {
            (T::one() - self.p + self.p * z).ln()
        };
        let v = self.gamma.ln() + (self.alpha + self.beta * x).ln() + (self.gamma - T::one()) * ln_s + mix - z;
        if v.is_nan() {
            T::neg_infinity()
        } else {
            v
        }
    }

    /// Baseline hazard `k(x) = γ(α + βx)(αx + βx²/2)^{γ-1}`.
    ///
    /// At `x = 0` returns the limit when it is finite (γ ≥ 1); errors otherwise.
    pub fn baseline_hazard(&self, x: T) -> Result<T, DistError> {
        if x < T::zero() || x.is_nan() {
            return Err(domain_err("hazard argument", x));
        }
        if x == T::zero() {
            return if self.gamma > T::one() {
                Ok(T::zero())
            } else if self.gamma == T::one() {
                Ok(self.alpha)
            } else {
                Err(domain_err("hazard argument (diverges at 0 for gamma < 1)", x))
            };
        }
        let s = self.linear_quadratic(x);
        Ok(self.gamma * (self.alpha + self.beta * x) * s.powf(self.gamma - T::one()))
    }

    /// Hazard rate `h(x) = k(x) (1 - p + p z) / (1 + p z)`.
    pub fn hazard(&self, x: T) -> Result<T, DistError> {
        let k = self.baseline_hazard(x)?;
        let z = self.cumulative_baseline_hazard(x);
        let pz = self.p * z;
        Ok(k * (T::one() - self.p + pz) / (T::one() + pz))
    }

    /// Solves `(1 + p z) e^{-z} = q` for `z` given `ln q`.
    pub(crate) fn z_from_log_sf(&self, log_q: T) -> Result<T, DistError> {
        let p = self.p;
        if log_q == T::zero() {
            return Ok(T::zero());
        }
        if p == T::zero() {
            return Ok(-log_q);
        }
        if p < T::lit(SMALL_P) {
            // g(z) = z - ln(1 + p z) + ln q, g' = (1 - p + p z) / (1 + p z) >= 1 - p
            let mut z = -log_q;
            for _ in 0..100 {
                let g = z - (p * z).ln_1p() + log_q;
                let g1 = (T::one() - p + p * z) / (T::one() + p * z);
                let step = g / g1;
                z = (z - step).max(T::zero());
                if step.abs() <= T::lit(4.0) * T::epsilon() * z.max(T::min_positive_value()) {
                    break;
                }
            }
            return Ok(z);
        }
        // W_{-1}((u - 1) / (p e^{1/p})) with the argument handled through its log
        let inv_p = T::one() / p;
        let log_neg_v = log_q - p.ln() - inv_p;
        let w = special::lambert_wm1_log(log_neg_v)?;
        Ok((-inv_p - w).max(T::zero()))
    }

    /// Quantile function for `0 < u < 1`.
    pub fn quantile(&self, u: T) -> Result<T, DistError> {
        if !(u > T::zero() && u < T::one()) {
            return Err(domain_err("quantile probability", u));
        }
        let z = self.z_from_log_sf((-u).ln_1p())?;
        Ok(self.x_from_z(z))
    }

    /// Inverse survival function: the `x` with `sf(x) = q`, for `0 < q < 1`.
    /// Accurate deep in the right tail where `quantile(1 - q)` would round.
    pub fn inverse_sf(&self, q: T) -> Result<T, DistError> {
        if !(q > T::zero() && q < T::one()) {
            return Err(domain_err("survival probability", q));
        }
        let z = self.z_from_log_sf(q.ln())?;
        Ok(self.x_from_z(z))
    }

    /// `n` draws by inverse transform on stream 0 of `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<T> {
        let mut rng = StreamRng::new(seed, 0);
        (0..n)
            .map(|_| {
                let u: T = rng.uniform_open();
                self.quantile(u)
                    .expect("quantile is total on the open unit interval for valid params")
            })
            .collect()
    }

    /// `n` draws by the record construction: the first upper record of a GLE
    /// sequence with probability `1 - p`, the second with probability `p`.
    ///
    /// Upper records of a continuous sequence are `G^{-1}(1 - e^{-Γ_k})` with
    /// `Γ_k` a sum of `k` standard exponentials, so no sequence is simulated.
    pub fn sample_via_records(&self, n: usize, seed: u64) -> Vec<T> {
        let mut rng = StreamRng::new(seed, 1);
        (0..n)
            .map(|_| {
                let e1: T = rng.exponential();
                let e2: T = rng.exponential();
                let coin: T = rng.uniform_open();
                let z = if coin < self.p { e1 + e2 } else { e1 };
                self.x_from_z(z)
            })
            .collect()
    }

    pub fn classify_pdf_shape(&self) -> PdfShapeClass {
        if self.gamma >= T::one() {
            PdfShapeClass::Unimodal
        } else if self.beta == T::zero() && self.gamma < T::lit(0.5) {
            PdfShapeClass::MonotoneDecreasing
        } else {
            PdfShapeClass::Indeterminate
        }
    }

    pub fn classify_hazard_shape(&self) -> HazardShapeClass {
        if self.gamma >= T::one() {
            HazardShapeClass::Ifr
        } else if self.beta == T::zero() && self.gamma < T::lit(0.5) {
            HazardShapeClass::Dfr
        } else {
            HazardShapeClass::Indeterminate
        }
    }
}

/// `1 - (1 + z) e^{-z}`, the Gamma(2, 1) distribution function, with a series
/// for small `z` where the closed form cancels.
pub(crate) fn second_record_cdf<T: Scalar>(z: T) -> T {
    if z < T::lit(0.5) {
        // e^{-z} * sum_{k>=2} z^k / k!
        let mut term = z * z * T::lit(0.5);
        let mut sum = term;
        let mut k = 2usize;
        while term > T::epsilon() * sum {
            k += 1;
            term = term * z / T::from_count(k);
            sum = sum + term;
            if k > 60 {
                break;
            }
        }
        sum * (-z).exp()
    } else {
        T::one() - (T::one() + z) * (-z).exp()
    }
}
