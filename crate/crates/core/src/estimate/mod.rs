//! Parameter estimation: five objectives over a log/logit-transformed
//! parameter space, a multi-start simplex engine and observed-information
//! standard errors.

pub mod optimizer;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gof;
use crate::rng::StreamRng;
use crate::Rtgle;
use optimizer::{bfgs_polish, nelder_mead, numerical_hessian, spd_inverse, LocalMin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimationMethod {
    #[serde(rename = "MLE")]
    Mle,
    #[serde(rename = "LSE")]
    Lse,
    #[serde(rename = "WLSE")]
    Wlse,
    #[serde(rename = "ADE")]
    Ade,
    #[serde(rename = "CME")]
    Cme,
}

impl EstimationMethod {
    pub const ALL: [EstimationMethod; 5] = [
        EstimationMethod::Mle,
        EstimationMethod::Lse,
        EstimationMethod::Wlse,
        EstimationMethod::Ade,
        EstimationMethod::Cme,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EstimationMethod::Mle => "MLE",
            EstimationMethod::Lse => "LSE",
            EstimationMethod::Wlse => "WLSE",
            EstimationMethod::Ade => "ADE",
            EstimationMethod::Cme => "CME",
        }
    }
}

impl fmt::Display for EstimationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EstimationMethod {
    type Err = EstimateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| EstimateError::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("no data")]
    EmptyData,
    #[error("data point {index} is {value}; all observations must be positive")]
    NonPositiveData { index: usize, value: f64 },
    #[error("parameters on the boundary (need alpha > 0, beta > 0, 0 < p < 1)")]
    BoundaryParams,
    #[error("every start produced a non-finite objective")]
    AllStartsFailed,
    #[error("observed information is not positive definite")]
    HessianNotPd,
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("unknown estimation method {0:?} (expected mle, lse, wlse, ade or cme)")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Relative spread of simplex objective values that counts as stationary.
    pub tolerance: f64,
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-10,
            n_starts: 20,
            seed: 20_240_601,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), EstimateError> {
        if self.max_iterations == 0 {
            return Err(EstimateError::InvalidConfig("max_iterations must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(EstimateError::InvalidConfig("tolerance must be positive"));
        }
        if self.n_starts == 0 {
            return Err(EstimateError::InvalidConfig("n_starts must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: EstimationMethod,
    pub params: Rtgle,
    /// Method objective at the optimum (negative log-likelihood for MLE).
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_starts_used: usize,
    pub standard_errors: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se_diagnostic: Option<String>,
}

pub(crate) fn check_data(data: &[f64]) -> Result<(), EstimateError> {
    if data.is_empty() {
        return Err(EstimateError::EmptyData);
    }
    match data.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
        Some(index) => Err(EstimateError::NonPositiveData {
            index,
            value: data[index],
        }),
        None => Ok(()),
    }
}

fn sorted(data: &[f64]) -> Vec<f64> {
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn nll_unchecked(params: &Rtgle, data: &[f64]) -> f64 {
    let mut s = 0.0;
    for &x in data {
        let l = params.log_pdf(x);
        if l == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        s -= l;
    }
    s
}

/// `-ℓ = -Σ ln f(xᵢ)`; `+∞` if some point has zero density.
pub fn neg_log_likelihood(params: &Rtgle, data: &[f64]) -> Result<f64, EstimateError> {
    check_data(data)?;
    Ok(nll_unchecked(params, data))
}

/// Analytic gradient of `-ℓ` with respect to `(α, β, γ, p)`.
pub fn nll_gradient(params: &Rtgle, data: &[f64]) -> Result<[f64; 4], EstimateError> {
    check_data(data)?;
    let [a, b, g, p] = params.to_array();
    if !(a > 0.0 && b > 0.0 && p > 0.0 && p < 1.0) {
        return Err(EstimateError::BoundaryParams);
    }
    let mut grad = [0.0; 4];
    for &x in data {
        let s = x * (a + 0.5 * b * x);
        let ln_s = s.ln();
        let z = (g * ln_s).exp();
        let mix = 1.0 - p + p * z;
        // d ln f / dz
        let dz = p / mix - 1.0;
        let slope = a + b * x;
        let half_x2 = 0.5 * x * x;
        grad[0] -= 1.0 / slope + (g - 1.0) * x / s + dz * g * z * x / s;
        grad[1] -= x / slope + (g - 1.0) * half_x2 / s + dz * g * z * half_x2 / s;
        grad[2] -= 1.0 / g + ln_s + dz * z * ln_s;
        grad[3] -= (z - 1.0) / mix;
    }
    Ok(grad)
}

fn plotting_position_sum(params: &Rtgle, sorted: &[f64], weighted: bool) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let i = (k + 1) as f64;
            let d = params.cdf(x) - i / (n + 1.0);
            let w = if weighted {
                (n + 1.0).powi(2) * (n + 2.0) / (i * (n - i + 1.0))
            } else {
                1.0
            };
            w * d * d
        })
        .sum()
}

/// `Σ (F(x₍ᵢ₎) - i/(n+1))²`.
pub fn ls_objective(params: &Rtgle, data: &[f64]) -> Result<f64, EstimateError> {
    check_data(data)?;
    Ok(plotting_position_sum(params, &sorted(data), false))
}

/// `Σ τᵢ (F(x₍ᵢ₎) - i/(n+1))²` with `τᵢ = (n+1)²(n+2) / (i(n-i+1))`.
pub fn wls_objective(params: &Rtgle, data: &[f64]) -> Result<f64, EstimateError> {
    check_data(data)?;
    Ok(plotting_position_sum(params, &sorted(data), true))
}

fn ad_sorted(params: &Rtgle, sorted: &[f64]) -> f64 {
    let ln_f: Vec<f64> = sorted.iter().map(|&x| params.cdf(x).ln()).collect();
    let ln_s: Vec<f64> = sorted.iter().map(|&x| params.log_sf(x)).collect();
    gof::ad_from_logs(&ln_f, &ln_s)
}

fn cvm_sorted(params: &Rtgle, sorted: &[f64]) -> f64 {
    let u: Vec<f64> = sorted.iter().map(|&x| params.cdf(x)).collect();
    gof::cvm_from_sorted(&u)
}

/// Anderson–Darling distance between the fitted and empirical distribution.
pub fn ad_objective(params: &Rtgle, data: &[f64]) -> Result<f64, EstimateError> {
    check_data(data)?;
    Ok(ad_sorted(params, &sorted(data)))
}

/// Cramér–von Mises distance between the fitted and empirical distribution.
pub fn cvm_objective(params: &Rtgle, data: &[f64]) -> Result<f64, EstimateError> {
    check_data(data)?;
    Ok(cvm_sorted(params, &sorted(data)))
}

/// Objective of `method` on already sorted data.
fn objective_sorted(method: EstimationMethod, params: &Rtgle, sorted: &[f64]) -> f64 {
    let v = match method {
        EstimationMethod::Mle => nll_unchecked(params, sorted),
        EstimationMethod::Lse => plotting_position_sum(params, sorted, false),
        EstimationMethod::Wlse => plotting_position_sum(params, sorted, true),
        EstimationMethod::Ade => ad_sorted(params, sorted),
        EstimationMethod::Cme => cvm_sorted(params, sorted),
    };
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Objective of `method` at `params`.
pub fn objective(method: EstimationMethod, params: &Rtgle, data: &[f64]) -> Result<f64, EstimateError> {
    check_data(data)?;
    Ok(objective_sorted(method, params, &sorted(data)))
}

const LOG_CLAMP: f64 = 100.0;
const LOGIT_CLAMP: f64 = 40.0;

pub(crate) fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// `(ln α, ln β, ln γ, logit p)`.
pub fn transform(params: &Rtgle) -> Result<[f64; 4], EstimateError> {
    let [a, b, g, p] = params.to_array();
    if !(a > 0.0 && b > 0.0 && p > 0.0 && p < 1.0) {
        return Err(EstimateError::BoundaryParams);
    }
    Ok([a.ln(), b.ln(), g.ln(), (p / (1.0 - p)).ln()])
}

/// Inverse of [`transform`]; log coordinates are clamped to ±100 and the
/// logit to ±40 so every input maps to valid parameters.
pub fn untransform(t: &[f64]) -> Rtgle {
    let c = |v: f64, m: f64| if v.is_nan() { 0.0 } else { v.clamp(-m, m) };
    Rtgle::new(
        c(t[0], LOG_CLAMP).exp(),
        c(t[1], LOG_CLAMP).exp(),
        c(t[2], LOG_CLAMP).exp(),
        logistic(c(t[3], LOGIT_CLAMP)),
    )
    .expect("transformed coordinates always map to valid parameters")
}

/// Standard normal draw by Box–Muller.
pub(crate) fn normal(rng: &mut StreamRng) -> f64 {
    let u1: f64 = rng.uniform_open();
    let u2: f64 = rng.uniform_open();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Best local minimum over `config.n_starts` starts: the first at `center`,
/// the rest at `center + spread ⊙ N(0, I)` drawn on stream `k` of the seed.
/// Starts run in parallel; ties break on start index so the result does not
/// depend on scheduling.
pub fn minimize_multistart<F>(
    f: F,
    center: &[f64],
    spread: &[f64],
    config: &OptimizerConfig,
) -> Result<(LocalMin, usize), EstimateError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let runs: Vec<LocalMin> = (0..config.n_starts)
        .into_par_iter()
        .map(|k| {
            let mut x0 = center.to_vec();
            if k > 0 {
                let mut rng = StreamRng::new(config.seed, k as u64);
                for (x, s) in x0.iter_mut().zip(spread) {
                    *x += s * normal(&mut rng);
                }
            }
            nelder_mead(&f, &x0, 0.5, config.max_iterations, config.tolerance)
        })
        .collect();
    let used = runs.iter().filter(|r| r.value.is_finite()).count();
    let best = runs
        .into_iter()
        .enumerate()
        .filter(|(_, r)| r.value.is_finite())
        .min_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(i.cmp(j)))
        .map(|(_, r)| r)
        .ok_or(EstimateError::AllStartsFailed)?;
    Ok((best, used))
}

/// Start center: a Weibull-like shape from the coefficient of variation, the
/// matching rate from the mean, a mild quadratic term and p = 1/2.
fn start_center(data: &[f64]) -> [f64; 4] {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = if data.len() > 1 {
        data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        mean * mean
    };
    let cv = (var.sqrt() / mean).max(1e-3);
    let gamma = cv.powf(-1.086).clamp(0.2, 5.0);
    let g1 = crate::special::gamma_fn(1.0 + 1.0 / gamma).unwrap_or(1.0);
    let alpha = g1 / mean;
    let beta = 0.2 * alpha * alpha;
    [alpha.ln(), beta.ln(), gamma.ln(), 0.0]
}

const START_SPREAD: [f64; 4] = [1.0, 2.0, 0.7, 2.0];

/// Fits RTGLE to `data` by minimizing the objective of `method`.
pub fn fit(data: &[f64], method: EstimationMethod, config: &OptimizerConfig) -> Result<FitResult, EstimateError> {
    fit_from(data, method, config, None)
}

/// [`fit`] with the first start at `start` instead of the moment-based
/// default. Boundary values are nudged inside before transforming.
pub fn fit_from(
    data: &[f64],
    method: EstimationMethod,
    config: &OptimizerConfig,
    start: Option<&Rtgle>,
) -> Result<FitResult, EstimateError> {
    check_data(data)?;
    config.validate()?;
    let xs = sorted(data);
    let center = match start {
        Some(s) => {
            let [a, b, g, p] = s.to_array();
            [a.max(1e-8).ln(), b.max(1e-8).ln(), g.ln(), {
                let p = p.clamp(1e-6, 1.0 - 1e-6);
                (p / (1.0 - p)).ln()
            }]
        }
        None => start_center(&xs),
    };
    let f = |t: &[f64]| objective_sorted(method, &untransform(t), &xs);
    let (mut best, used) = minimize_multistart(f, &center, &START_SPREAD, config)?;
    let mut converged = best.converged;
    if method == EstimationMethod::Mle {
        let grad_t = |t: &[f64]| -> Option<Vec<f64>> {
            let prm = untransform(t);
            let g = nll_gradient(&prm, &xs).ok()?;
            let [a, b, gm, p] = prm.to_array();
            let jac = [a, b, gm, p * (1.0 - p)];
            Some(g.iter().zip(jac).map(|(u, v)| u * v).collect())
        };
        let gtol = 1e-8 * (1.0 + best.value.abs());
        let polished = bfgs_polish(f, grad_t, &best.x, 200, gtol);
        if polished.value <= best.value {
            best.iterations += polished.iterations;
            converged |= polished.converged;
            best.x = polished.x;
            best.value = polished.value;
        }
    }
    let params = untransform(&best.x);
    let (standard_errors, se_diagnostic) = if method == EstimationMethod::Mle {
        match standard_errors(&params, &xs) {
            Ok(se) => (Some(se), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    Ok(FitResult {
        method,
        params,
        objective: best.value,
        converged,
        iterations: best.iterations,
        n_starts_used: used,
        standard_errors,
        se_diagnostic,
    })
}

/// Relative step of the observed-information differences.
pub const HESSIAN_STEP: f64 = 1e-4;

/// Standard errors of `(α, β, γ, p)` from the inverse observed information,
/// differenced in transformed coordinates and mapped back by the delta method.
pub fn standard_errors(params: &Rtgle, data: &[f64]) -> Result<[f64; 4], EstimateError> {
    check_data(data)?;
    let t = transform(params)?;
    let h = numerical_hessian(|v| nll_unchecked(&untransform(v), data), &t, HESSIAN_STEP);
    let cov = spd_inverse(&h).ok_or(EstimateError::HessianNotPd)?;
    let [a, b, g, p] = params.to_array();
    let jac = [a, b, g, p * (1.0 - p)];
    let mut se = [0.0; 4];
    for i in 0..4 {
        se[i] = jac[i] * cov[i][i].sqrt();
    }
    Ok(se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FAILURE_TIMES;

    fn p(a: f64, b: f64, g: f64, pp: f64) -> Rtgle {
        Rtgle::new(a, b, g, pp).unwrap()
    }

    #[test]
    fn likelihood_examples() {
        let e = Rtgle::exponential(1.0).unwrap();
        assert!((neg_log_likelihood(&e, &[1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            neg_log_likelihood(&e, &[1.0, 0.0]),
            Err(EstimateError::NonPositiveData { index: 1, .. })
        ));
        assert_eq!(neg_log_likelihood(&e, &[]), Err(EstimateError::EmptyData));
        // at p = 1 the density vanishes at 0+ only; finite elsewhere
        let g2 = Rtgle::rt_exponential(1.0, 1.0).unwrap();
        assert!(neg_log_likelihood(&g2, &[0.5, 2.0]).unwrap().is_finite());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let prm = p(0.3, 0.2, 1.4, 0.35);
        let data = prm.sample(40, 3);
        let g = nll_gradient(&prm, &data).unwrap();
        let base = prm.to_array();
        for i in 0..4 {
            let h = 1e-6 * (1.0 + base[i].abs());
            let mut up = base;
            let mut dn = base;
            up[i] += h;
            dn[i] -= h;
            let fu = neg_log_likelihood(&Rtgle::new(up[0], up[1], up[2], up[3]).unwrap(), &data).unwrap();
            let fd = neg_log_likelihood(&Rtgle::new(dn[0], dn[1], dn[2], dn[3]).unwrap(), &data).unwrap();
            let fdiff = (fu - fd) / (2.0 * h);
            assert!(
                (g[i] - fdiff).abs() <= 1e-5 * fdiff.abs().max(1.0),
                "component {i}: {} vs {fdiff}",
                g[i]
            );
        }
        assert_eq!(
            nll_gradient(&p(1.0, 0.0, 1.0, 0.5), &data),
            Err(EstimateError::BoundaryParams)
        );
    }

    #[test]
    fn p_gradient_vanishes_when_z_is_one() {
        // z = 1 when αx + βx²/2 = 1: x = 1 with α = 0.5, β = 1
        let prm = p(0.5, 1.0, 1.7, 0.5);
        let g = nll_gradient(&prm, &[1.0, 1.0, 1.0]).unwrap();
        assert!(g[3].abs() < 1e-15);
    }

    #[test]
    fn plotting_position_objectives() {
        let prm = p(0.5, 0.5, 1.2, 0.2);
        let n = 9;
        let data: Vec<f64> = (1..=n)
            .map(|i| prm.quantile(i as f64 / (n as f64 + 1.0)).unwrap())
            .collect();
        assert!(ls_objective(&prm, &data).unwrap() < 1e-28);
        assert!(wls_objective(&prm, &data).unwrap() < 1e-24);
        let med = prm.quantile(0.5).unwrap();
        let s = ls_objective(&prm, &[med, med]).unwrap();
        assert!((s - 2.0 / 36.0).abs() < 1e-15);
    }

    #[test]
    fn distance_objectives() {
        let prm = p(0.5, 0.5, 1.2, 0.2);
        let n = 7;
        let data: Vec<f64> = (1..=n)
            .map(|i| prm.quantile((2.0 * i as f64 - 1.0) / (2.0 * n as f64)).unwrap())
            .collect();
        assert!((cvm_objective(&prm, &data).unwrap() - 1.0 / (12.0 * n as f64)).abs() < 1e-15);
        let med = prm.quantile(0.5).unwrap();
        let a = ad_objective(&prm, &[med]).unwrap();
        assert!((a - (-1.0 + 2.0 * std::f64::consts::LN_2)).abs() < 1e-14);
        let mut shuffled = data.clone();
        shuffled.reverse();
        shuffled.swap(0, 3);
        for m in EstimationMethod::ALL {
            assert_eq!(
                objective(m, &prm, &data).unwrap(),
                objective(m, &prm, &shuffled).unwrap()
            );
        }
    }

    #[test]
    fn transform_round_trip() {
        let one = p(1.0, 1.0, 1.0, 0.5);
        assert_eq!(transform(&one).unwrap(), [0.0; 4]);
        assert_eq!(untransform(&[0.0; 4]), one);
        assert!(untransform(&[0.0, 0.0, 0.0, -1e9]).p() < 1e-17);
        assert!(untransform(&[0.0, 0.0, 0.0, 1e9]).p() <= 1.0);
        assert_eq!(transform(&p(1.0, 0.0, 1.0, 0.5)), Err(EstimateError::BoundaryParams));
    }

    #[test]
    fn method_names_parse() {
        assert_eq!("mle".parse::<EstimationMethod>().unwrap(), EstimationMethod::Mle);
        assert_eq!("WLSE".parse::<EstimationMethod>().unwrap(), EstimationMethod::Wlse);
        assert!("bayes".parse::<EstimationMethod>().is_err());
    }

    #[test]
    fn fit_is_deterministic_and_beats_truth() {
        let truth = p(1.2, 0.5, 1.5, 0.8);
        let data = truth.sample(150, 11);
        let cfg = OptimizerConfig {
            n_starts: 6,
            ..OptimizerConfig::default()
        };
        for m in EstimationMethod::ALL {
            let a = fit(&data, m, &cfg).unwrap();
            let b = fit(&data, m, &cfg).unwrap();
            assert_eq!(a, b);
            assert!(a.objective <= objective(m, &truth, &data).unwrap() + 1e-9, "{m}");
        }
    }

    #[test]
    fn failure_time_mle_beats_reference_on_trimmed_sample() {
        let mut xs = FAILURE_TIMES.to_vec();
        xs.truncate(47);
        let r = fit(&xs, EstimationMethod::Mle, &OptimizerConfig::default()).unwrap();
        assert!(2.0 * r.objective <= 258.2350 + 0.01, "{}", 2.0 * r.objective);
        let g = nll_gradient(&r.params, &xs).unwrap();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= 1e-3 * (1.0 + r.objective), "{norm}");
        let se = r.standard_errors.unwrap();
        for (s, want) in se.iter().zip([0.1522, 0.0430, 0.1561, 0.4576]) {
            assert!((s - want).abs() <= 0.25 * want, "{se:?}");
        }
    }
}
