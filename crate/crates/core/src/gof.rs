//! Goodness of fit: Kolmogorov–Smirnov, Cramér–von Mises and
//! Anderson–Darling statistics, their asymptotic and parametric-bootstrap
//! p-values, and likelihood criteria.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimate::{self, EstimationMethod, OptimizerConfig};
use crate::quadrature::gauss_kronrod;
use crate::rng::derive_seed;
use crate::Rtgle;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GofError {
    #[error("no data")]
    EmptyData,
    #[error("unknown statistic {0:?} (expected ks, cvm or ad)")]
    UnknownKind(String),
    #[error("parameter count must be at least 1")]
    NoParameters,
    #[error("bootstrap needs at least one replicate")]
    NoReplicates,
    #[error(transparent)]
    Estimate(#[from] estimate::EstimateError),
}

/// Anything with a distribution function.
pub trait CdfEvaluator {
    fn cdf(&self, x: f64) -> f64;

    fn ln_cdf(&self, x: f64) -> f64 {
        self.cdf(x).ln()
    }

    fn ln_sf(&self, x: f64) -> f64 {
        (-self.cdf(x)).ln_1p()
    }
}

/// A fitted model: distribution function, log density and parameter count.
pub trait FittedModel: CdfEvaluator {
    fn log_pdf(&self, x: f64) -> f64;
    fn n_params(&self) -> usize;
}

impl<F: Fn(f64) -> f64> CdfEvaluator for F {
    fn cdf(&self, x: f64) -> f64 {
        self(x)
    }
}

impl CdfEvaluator for Rtgle {
    fn cdf(&self, x: f64) -> f64 {
        Rtgle::cdf(self, x)
    }

    fn ln_sf(&self, x: f64) -> f64 {
        self.log_sf(x)
    }
}

impl FittedModel for Rtgle {
    fn log_pdf(&self, x: f64) -> f64 {
        Rtgle::log_pdf(self, x)
    }

    fn n_params(&self) -> usize {
        4
    }
}

fn sorted(data: &[f64]) -> Result<Vec<f64>, GofError> {
    if data.is_empty() {
        return Err(GofError::EmptyData);
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// KS distance from sorted probability-integral transforms.
pub fn ks_from_sorted(u: &[f64]) -> f64 {
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(k, &f)| {
            let i = k as f64;
            ((i + 1.0) / n - f).max(f - i / n)
        })
        .fold(0.0, f64::max)
}

/// `W² = 1/(12n) + Σ (uᵢ - (2i-1)/(2n))²` over sorted transforms.
pub fn cvm_from_sorted(u: &[f64]) -> f64 {
    let n = u.len() as f64;
    1.0 / (12.0 * n)
        + u.iter()
            .enumerate()
            .map(|(k, &f)| (f - (2.0 * k as f64 + 1.0) / (2.0 * n)).powi(2))
            .sum::<f64>()
}

/// `A² = -n - (1/n) Σ (2i-1) [ln F(x₍ᵢ₎) + ln(1 - F(x₍ₙ₊₁₋ᵢ₎))]` from the
/// log cdf and log survival at the sorted sample.
pub fn ad_from_logs(ln_cdf: &[f64], ln_sf: &[f64]) -> f64 {
    let n = ln_cdf.len();
    let nf = n as f64;
    let s: f64 = (0..n)
        .map(|k| (2.0 * k as f64 + 1.0) * (ln_cdf[k] + ln_sf[n - 1 - k]))
        .sum();
    let a = -nf - s / nf;
    if a.is_nan() {
        f64::INFINITY
    } else {
        a
    }
}

pub fn ks_statistic(model: &impl CdfEvaluator, data: &[f64]) -> Result<f64, GofError> {
    let xs = sorted(data)?;
    let u: Vec<f64> = xs.iter().map(|&x| model.cdf(x)).collect();
    Ok(ks_from_sorted(&u))
}

pub fn cvm_statistic(model: &impl CdfEvaluator, data: &[f64]) -> Result<f64, GofError> {
    let xs = sorted(data)?;
    let u: Vec<f64> = xs.iter().map(|&x| model.cdf(x)).collect();
    Ok(cvm_from_sorted(&u))
}

pub fn ad_statistic(model: &impl CdfEvaluator, data: &[f64]) -> Result<f64, GofError> {
    let xs = sorted(data)?;
    let lf: Vec<f64> = xs.iter().map(|&x| model.ln_cdf(x)).collect();
    let ls: Vec<f64> = xs.iter().map(|&x| model.ln_sf(x)).collect();
    Ok(ad_from_logs(&lf, &ls))
}

/// All three statistics in one pass over the sorted sample.
pub fn statistics(model: &impl CdfEvaluator, data: &[f64]) -> Result<[f64; 3], GofError> {
    let xs = sorted(data)?;
    let u: Vec<f64> = xs.iter().map(|&x| model.cdf(x)).collect();
    let lf: Vec<f64> = xs.iter().map(|&x| model.ln_cdf(x)).collect();
    let ls: Vec<f64> = xs.iter().map(|&x| model.ln_sf(x)).collect();
    Ok([ks_from_sorted(&u), cvm_from_sorted(&u), ad_from_logs(&lf, &ls)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StatisticKind {
    #[serde(rename = "KS")]
    Ks,
    #[serde(rename = "CvM")]
    Cvm,
    #[serde(rename = "AD")]
    Ad,
}

impl std::str::FromStr for StatisticKind {
    type Err = GofError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ks" => Ok(Self::Ks),
            "cvm" => Ok(Self::Cvm),
            "ad" => Ok(Self::Ad),
            _ => Err(GofError::UnknownKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PValueMode {
    Asymptotic,
    Bootstrap { replicates: usize },
}

/// Kolmogorov limiting survival `P(K > λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}`,
/// switching to the theta-function form for small λ where the alternating
/// series cancels.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            let t = (m * m * c).exp();
            s += t;
            if t < 1e-17 * s {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let t = (-2.0 * kf * kf * lambda * lambda).exp();
            s += if k % 2 == 1 { t } else { -t };
            if t < 1e-18 {
                break;
            }
        }
        2.0 * s
    };
    p.clamp(0.0, 1.0)
}

/// Asymptotic KS p-value with Stephens' finite-n scaling
/// `λ = (√n + 0.12 + 0.11/√n) D`.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let rn = (n as f64).sqrt();
    kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d)
}

/// Asymptotic KS p-value with the plain scaling `λ = √n D`.
pub fn ks_p_value_unadjusted(d: f64, n: usize) -> f64 {
    kolmogorov_sf((n as f64).sqrt() * d)
}

/// `e^{-u} K_{1/4}(u)` from `∫₀^∞ e^{-u(cosh t + 1)} cosh(t/4) dt`.
fn scaled_bessel_k_quarter(u: f64) -> f64 {
    // integrand below e^{-2u-60} beyond t_max
    let t_max = (1.0 + 60.0 / u).acosh();
    gauss_kronrod(
        |t: f64| (-u * (t.cosh() + 1.0)).exp() * (0.25 * t).cosh(),
        0.0,
        t_max,
        1e-12,
        0.0,
        200,
    )
    .map(|i| i.value)
    .unwrap_or(f64::NAN)
}

/// Limiting distribution function of the Cramér–von Mises statistic
/// (Anderson & Darling, 1952):
/// `V(x) = 1/(π√x) Σⱼ Γ(j+½)/(Γ(½) j!) √(4j+1) e^{-uⱼ} K_{1/4}(uⱼ)`,
/// `uⱼ = (4j+1)²/(16x)`.
pub fn cvm_limit_cdf(x: f64) -> f64 {
    if !(x > 0.0) {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let mut coef = 1.0;
    let mut s = 0.0;
    for j in 0..200 {
        let m = 4.0 * j as f64 + 1.0;
        let u = m * m / (16.0 * x);
        if 2.0 * u > 745.0 {
            break;
        }
        let t = coef * m.sqrt() * scaled_bessel_k_quarter(u);
        s += t;
        if t < 1e-17 * s {
            break;
        }
        coef *= (2.0 * j as f64 + 1.0) / (2.0 * j as f64 + 2.0);
    }
    (s / (std::f64::consts::PI * x.sqrt())).clamp(0.0, 1.0)
}

pub fn cvm_p_value(w2: f64) -> f64 {
    1.0 - cvm_limit_cdf(w2)
}

/// Limiting distribution function of the Anderson–Darling statistic,
/// Marsaglia & Marsaglia (2004) `ADinf`. The upper branch is floored at
/// the lower branch's value at 2 to keep the approximation monotone.
pub fn ad_limit_cdf(z: f64) -> f64 {
    fn lower(z: f64) -> f64 {
        (-1.2337141 / z).exp() / z.sqrt()
            * (2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z)
    }
    if !(z > 0.0) {
        return 0.0;
    }
    if z < 2.0 {
        return lower(z).clamp(0.0, 1.0);
    }
    let upper =
        (-(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z).exp()).exp();
    upper.max(lower(2.0)).clamp(0.0, 1.0)
}

pub fn ad_p_value(a2: f64) -> f64 {
    1.0 - ad_limit_cdf(a2)
}

/// Asymptotic p-value of `statistic` of the given kind for sample size `n`.
pub fn p_value(kind: StatisticKind, statistic: f64, n: usize) -> f64 {
    match kind {
        StatisticKind::Ks => ks_p_value(statistic, n),
        StatisticKind::Cvm => cvm_p_value(statistic),
        StatisticKind::Ad => ad_p_value(statistic),
    }
}

/// `AIC = -2 log L + 2r`.
pub fn aic(minus2loglik: f64, r: usize) -> Result<f64, GofError> {
    if r == 0 {
        return Err(GofError::NoParameters);
    }
    Ok(minus2loglik + 2.0 * r as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub n: usize,
    pub ks: f64,
    pub cvm: f64,
    pub ad: f64,
    pub p_ks: f64,
    /// Asymptotic KS p-value with `λ = √n D`, reported alongside in
    /// asymptotic mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_ks_unadjusted: Option<f64>,
    pub p_cvm: f64,
    pub p_ad: f64,
    pub p_value_mode: PValueMode,
    pub minus2loglik: f64,
    pub aic: f64,
}

/// Report with asymptotic p-values.
pub fn gof_report(model: &impl FittedModel, data: &[f64]) -> Result<GofReport, GofError> {
    let [ks, cvm, ad] = statistics(model, data)?;
    let n = data.len();
    let minus2loglik = -2.0 * data.iter().map(|&x| model.log_pdf(x)).sum::<f64>();
    Ok(GofReport {
        n,
        ks,
        cvm,
        ad,
        p_ks: ks_p_value(ks, n),
        p_ks_unadjusted: Some(ks_p_value_unadjusted(ks, n)),
        p_cvm: cvm_p_value(cvm),
        p_ad: ad_p_value(ad),
        p_value_mode: PValueMode::Asymptotic,
        minus2loglik,
        aic: aic(minus2loglik, model.n_params())?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapPValues {
    pub p_ks: f64,
    pub p_cvm: f64,
    pub p_ad: f64,
    pub replicates: usize,
    /// Replicates whose refit failed; excluded from the counts.
    pub failed: usize,
}

/// Parametric bootstrap: replicate `b` simulates a sample with
/// `simulate(seed_b)`, refits it with `refit(sample, seed_b')` and recomputes
/// the statistics. `p = (1 + #{boot ≥ observed}) / (B + 1)` over the
/// successful replicates.
pub fn bootstrap_p_values<M, S, R>(
    observed: [f64; 3],
    replicates: usize,
    seed: u64,
    simulate: S,
    refit: R,
) -> Result<BootstrapPValues, GofError>
where
    M: CdfEvaluator,
    S: Fn(u64) -> Vec<f64> + Sync,
    R: Fn(&[f64], u64) -> Option<M> + Sync,
{
    if replicates == 0 {
        return Err(GofError::NoReplicates);
    }
    let stats: Vec<Option<[f64; 3]>> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let sample = simulate(derive_seed(seed, 1, b));
            let model = refit(&sample, derive_seed(seed, 2, b))?;
            statistics(&model, &sample).ok()
        })
        .collect();
    let ok: Vec<[f64; 3]> = stats.into_iter().flatten().collect();
    let used = ok.len();
    let p = |i: usize| {
        let exceed = ok.iter().filter(|s| s[i] >= observed[i]).count();
        (1 + exceed) as f64 / (used + 1) as f64
    };
    Ok(BootstrapPValues {
        p_ks: p(0),
        p_cvm: p(1),
        p_ad: p(2),
        replicates: used,
        failed: replicates - used,
    })
}

/// Starts per bootstrap refit.
pub const BOOTSTRAP_STARTS: usize = 5;

/// GoF report for an RTGLE fit; bootstrap mode refits each replicate with
/// `method` and [`BOOTSTRAP_STARTS`] starts.
pub fn rtgle_gof_report(
    params: &Rtgle,
    data: &[f64],
    mode: PValueMode,
    method: EstimationMethod,
    config: &OptimizerConfig,
) -> Result<GofReport, GofError> {
    let mut report = gof_report(params, data)?;
    if let PValueMode::Bootstrap { replicates } = mode {
        let n = data.len();
        let boot = bootstrap_p_values(
            [report.ks, report.cvm, report.ad],
            replicates,
            config.seed,
            |s| params.sample(n, s),
            |xs, s| {
                let cfg = OptimizerConfig {
                    n_starts: BOOTSTRAP_STARTS,
                    seed: s,
                    ..*config
                };
                estimate::fit(xs, method, &cfg).ok().map(|r| r.params)
            },
        )?;
        report.p_ks = boot.p_ks;
        report.p_cvm = boot.p_cvm;
        report.p_ad = boot.p_ad;
        report.p_ks_unadjusted = None;
        report.p_value_mode = PValueMode::Bootstrap {
            replicates: boot.replicates,
        };
    }
    Ok(report)
}
