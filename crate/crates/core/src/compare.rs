//! Competing lifetime models and the model-comparison table.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimate::optimizer::{numerical_hessian, spd_inverse};
use crate::estimate::{self, logistic, minimize_multistart, EstimateError, EstimationMethod, OptimizerConfig};
use crate::gof::{self, CdfEvaluator, FittedModel, GofReport};
use crate::special::{gamma_fn, lambert_wm1};
use crate::Rtgle;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompareError {
    #[error("invalid {model} parameters: {reason}")]
    InvalidParams { model: &'static str, reason: &'static str },
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Gof(#[from] gof::GofError),
    #[error("unknown model {0:?}")]
    UnknownModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "RTGLE")]
    Rtgle,
    #[serde(rename = "RTW")]
    Rtw,
    #[serde(rename = "W")]
    W,
    #[serde(rename = "TW")]
    Tw,
    #[serde(rename = "TL")]
    Tl,
    #[serde(rename = "TLL")]
    Tll,
    #[serde(rename = "RTLE")]
    Rtle,
    #[serde(rename = "LE")]
    Le,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        ModelKind::Rtgle,
        ModelKind::Rtw,
        ModelKind::W,
        ModelKind::Tw,
        ModelKind::Tl,
        ModelKind::Tll,
        ModelKind::Rtle,
        ModelKind::Le,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Rtgle => "RTGLE",
            ModelKind::Rtw => "RTW",
            ModelKind::W => "W",
            ModelKind::Tw => "TW",
            ModelKind::Tl => "TL",
            ModelKind::Tll => "TLL",
            ModelKind::Rtle => "RTLE",
            ModelKind::Le => "LE",
        }
    }

    pub fn n_params(self) -> usize {
        match self {
            ModelKind::Rtgle => 4,
            ModelKind::W | ModelKind::Tl | ModelKind::Le => 2,
            _ => 3,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = CompareError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| CompareError::UnknownModel(s.to_string()))
    }
}

/// The seven competitors. Transmuted members use `F = (1+λ)G - λG²` over
/// their baseline `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum CompetitorModel {
    /// Survival `(1 + pθx^γ) e^{-θx^γ}`.
    #[serde(rename = "RTW")]
    Rtw { theta: f64, gamma: f64, p: f64 },
    /// Weibull with shape `mu` and scale `sigma`.
    #[serde(rename = "W")]
    W { mu: f64, sigma: f64 },
    #[serde(rename = "TW")]
    Tw { mu: f64, sigma: f64, lambda: f64 },
    /// Transmuted Lindley.
    #[serde(rename = "TL")]
    Tl { theta: f64, lambda: f64 },
    /// Transmuted log-logistic with scale `alpha` and shape `beta`.
    #[serde(rename = "TLL")]
    Tll { alpha: f64, beta: f64, lambda: f64 },
    #[serde(rename = "RTLE")]
    Rtle { alpha: f64, beta: f64, p: f64 },
    /// Linear exponential (linear failure rate).
    #[serde(rename = "LE")]
    Le { alpha: f64, beta: f64 },
}

fn positive(model: &'static str, v: f64) -> Result<(), CompareError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CompareError::InvalidParams {
            model,
            reason: "scale and shape parameters must be positive",
        })
    }
}

fn in_range(model: &'static str, v: f64, lo: f64, reason: &'static str) -> Result<(), CompareError> {
    if (lo..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(CompareError::InvalidParams { model, reason })
    }
}

const LAMBDA_RANGE: &str = "lambda must lie in [-1, 1]";
const P_RANGE: &str = "p must lie in [0, 1]";

/// Baseline `(ln g, G, ln(1-G))` of a transmuted model.
struct Baseline {
    ln_g: f64,
    cdf: f64,
    ln_sf: f64,
}

impl CompetitorModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            CompetitorModel::Rtw { .. } => ModelKind::Rtw,
            CompetitorModel::W { .. } => ModelKind::W,
            CompetitorModel::Tw { .. } => ModelKind::Tw,
            CompetitorModel::Tl { .. } => ModelKind::Tl,
            CompetitorModel::Tll { .. } => ModelKind::Tll,
            CompetitorModel::Rtle { .. } => ModelKind::Rtle,
            CompetitorModel::Le { .. } => ModelKind::Le,
        }
    }

    pub fn validate(&self) -> Result<(), CompareError> {
        let name = self.kind().label();
        match *self {
            CompetitorModel::Rtw { theta, gamma, p } => {
                positive(name, theta)?;
                positive(name, gamma)?;
                in_range(name, p, 0.0, P_RANGE)
            }
            CompetitorModel::W { mu, sigma } => {
                positive(name, mu)?;
                positive(name, sigma)
            }
            CompetitorModel::Tw { mu, sigma, lambda } => {
                positive(name, mu)?;
                positive(name, sigma)?;
                in_range(name, lambda, -1.0, LAMBDA_RANGE)
            }
            CompetitorModel::Tl { theta, lambda } => {
                positive(name, theta)?;
                in_range(name, lambda, -1.0, LAMBDA_RANGE)
            }
            CompetitorModel::Tll { alpha, beta, lambda } => {
                positive(name, alpha)?;
                positive(name, beta)?;
                in_range(name, lambda, -1.0, LAMBDA_RANGE)
            }
            CompetitorModel::Rtle { alpha, beta, p } => {
                positive(name, alpha)?;
                positive(name, beta)?;
                in_range(name, p, 0.0, P_RANGE)
            }
            CompetitorModel::Le { alpha, beta } => {
                positive(name, alpha)?;
                positive(name, beta)
            }
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            CompetitorModel::Rtw { theta, gamma, p } => vec![theta, gamma, p],
            CompetitorModel::W { mu, sigma } => vec![mu, sigma],
            CompetitorModel::Tw { mu, sigma, lambda } => vec![mu, sigma, lambda],
            CompetitorModel::Tl { theta, lambda } => vec![theta, lambda],
            CompetitorModel::Tll { alpha, beta, lambda } => vec![alpha, beta, lambda],
            CompetitorModel::Rtle { alpha, beta, p } => vec![alpha, beta, p],
            CompetitorModel::Le { alpha, beta } => vec![alpha, beta],
        }
    }

    /// Rebuilds a model of `kind` from its parameter vector.
    pub fn from_params(kind: ModelKind, v: &[f64]) -> Result<Self, CompareError> {
        if v.len() != kind.n_params() {
            return Err(CompareError::InvalidParams {
                model: kind.label(),
                reason: "wrong number of parameters",
            });
        }
        let m = match kind {
            ModelKind::Rtgle => return Err(CompareError::UnknownModel("RTGLE is not a competitor".into())),
            ModelKind::Rtw => CompetitorModel::Rtw {
                theta: v[0],
                gamma: v[1],
                p: v[2],
            },
            ModelKind::W => CompetitorModel::W { mu: v[0], sigma: v[1] },
            ModelKind::Tw => CompetitorModel::Tw {
                mu: v[0],
                sigma: v[1],
                lambda: v[2],
            },
            ModelKind::Tl => CompetitorModel::Tl {
                theta: v[0],
                lambda: v[1],
            },
            ModelKind::Tll => CompetitorModel::Tll {
                alpha: v[0],
                beta: v[1],
                lambda: v[2],
            },
            ModelKind::Rtle => CompetitorModel::Rtle {
                alpha: v[0],
                beta: v[1],
                p: v[2],
            },
            ModelKind::Le => CompetitorModel::Le {
                alpha: v[0],
                beta: v[1],
            },
        };
        m.validate()?;
        Ok(m)
    }

    /// Members that are RTGLE special cases, as RTGLE parameters.
    /// RTW's `θx^γ` equals `(αx)^γ` with `α = θ^{1/γ}`.
    pub fn as_rtgle(&self) -> Option<Rtgle> {
        match *self {
            CompetitorModel::Rtw { theta, gamma, p } => Rtgle::new(theta.powf(1.0 / gamma), 0.0, gamma, p).ok(),
            CompetitorModel::W { mu, sigma } => Rtgle::new(1.0 / sigma, 0.0, mu, 0.0).ok(),
            CompetitorModel::Rtle { alpha, beta, p } => Rtgle::new(alpha, beta, 1.0, p).ok(),
            CompetitorModel::Le { alpha, beta } => Rtgle::new(alpha, beta, 1.0, 0.0).ok(),
            _ => None,
        }
    }

    fn transmuted(&self) -> Option<(f64, fn(&Self, f64) -> Baseline)> {
        match *self {
            CompetitorModel::Tw { lambda, .. } => Some((lambda, Self::weibull_baseline)),
            CompetitorModel::Tl { lambda, .. } => Some((lambda, Self::lindley_baseline)),
            CompetitorModel::Tll { lambda, .. } => Some((lambda, Self::log_logistic_baseline)),
            _ => None,
        }
    }

    fn weibull_baseline(&self, x: f64) -> Baseline {
        let (mu, sigma) = match *self {
            CompetitorModel::Tw { mu, sigma, .. } => (mu, sigma),
            _ => unreachable!(),
        };
        let ln_r = (x / sigma).ln();
        let z = (mu * ln_r).exp();
        Baseline {
            ln_g: (mu / sigma).ln() + (mu - 1.0) * ln_r - z,
            cdf: -(-z).exp_m1(),
            ln_sf: -z,
        }
    }

    fn lindley_baseline(&self, x: f64) -> Baseline {
        let theta = match *self {
            CompetitorModel::Tl { theta, .. } => theta,
            _ => unreachable!(),
        };
        let ln_sf = (theta * x / (theta + 1.0)).ln_1p() - theta * x;
        Baseline {
            ln_g: 2.0 * theta.ln() - theta.ln_1p() + x.ln_1p() - theta * x,
            cdf: -ln_sf.exp_m1(),
            ln_sf,
        }
    }

    fn log_logistic_baseline(&self, x: f64) -> Baseline {
        let (alpha, beta) = match *self {
            CompetitorModel::Tll { alpha, beta, .. } => (alpha, beta),
            _ => unreachable!(),
        };
        // t = β ln(x/α); G = 1/(1+e^{-t})
        let t = beta * (x / alpha).ln();
        let ln_1pe = |v: f64| {
            if v > 0.0 {
                v + (-v).exp().ln_1p()
            } else {
                v.exp().ln_1p()
            }
        };
        Baseline {
            ln_g: beta.ln() - x.ln() + t - 2.0 * ln_1pe(t),
            cdf: logistic(t),
            ln_sf: -ln_1pe(t),
        }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        if let Some(r) = self.as_rtgle() {
            return r.log_pdf(x);
        }
        let (lambda, base) = self.transmuted().expect("non-RTGLE members are transmuted");
        let b = base(self, x);
        b.ln_g + (1.0 + lambda - 2.0 * lambda * b.cdf).ln()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        if let Some(r) = self.as_rtgle() {
            return r.cdf(x);
        }
        let (lambda, base) = self.transmuted().expect("non-RTGLE members are transmuted");
        let g = base(self, x).cdf;
        (1.0 + lambda) * g - lambda * g * g
    }

    /// `ln(1 - F)`; transmuted members factor as `(1 - G)(1 - λG)`.
    pub fn log_sf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        if let Some(r) = self.as_rtgle() {
            return r.log_sf(x);
        }
        let (lambda, base) = self.transmuted().expect("non-RTGLE members are transmuted");
        let b = base(self, x);
        b.ln_sf + (-lambda * b.cdf).ln_1p()
    }

    pub fn quantile(&self, u: f64) -> Result<f64, CompareError> {
        if !(0.0..=1.0).contains(&u) {
            return Err(CompareError::InvalidParams {
                model: self.kind().label(),
                reason: "probability outside [0, 1]",
            });
        }
        if let Some(r) = self.as_rtgle() {
            return r.quantile(u).map_err(|_| CompareError::InvalidParams {
                model: self.kind().label(),
                reason: "quantile evaluation failed",
            });
        }
        let (lambda, _) = self.transmuted().expect("non-RTGLE members are transmuted");
        // (1+λ)G - λG² = u
        let g = if lambda.abs() < 1e-12 {
            u
        } else {
            let b = 1.0 + lambda;
            2.0 * u / (b + (b * b - 4.0 * lambda * u).max(0.0).sqrt())
        };
        if g >= 1.0 {
            return Ok(f64::INFINITY);
        }
        Ok(match *self {
            CompetitorModel::Tw { mu, sigma, .. } => sigma * (-(-g).ln_1p()).powf(1.0 / mu),
            CompetitorModel::Tll { alpha, beta, .. } => alpha * (g / (1.0 - g)).powf(1.0 / beta),
            CompetitorModel::Tl { theta, .. } => {
                if g == 0.0 {
                    return Ok(0.0);
                }
                let a = theta + 1.0;
                let w = lambert_wm1(-a * (1.0 - g) * (-a).exp()).map_err(|_| CompareError::InvalidParams {
                    model: "TL",
                    reason: "quantile evaluation failed",
                })?;
                (-a - w) / theta
            }
            _ => unreachable!(),
        })
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::StreamRng::new(seed, 0);
        (0..n)
            .map(|_| self.quantile(rng.uniform_open()).unwrap_or(f64::NAN))
            .collect()
    }
}

impl CdfEvaluator for CompetitorModel {
    fn cdf(&self, x: f64) -> f64 {
        CompetitorModel::cdf(self, x)
    }

    fn ln_sf(&self, x: f64) -> f64 {
        self.log_sf(x)
    }
}

impl FittedModel for CompetitorModel {
    fn log_pdf(&self, x: f64) -> f64 {
        CompetitorModel::log_pdf(self, x)
    }

    fn n_params(&self) -> usize {
        self.kind().n_params()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Coord {
    Log,
    Prob,
    Lambda,
}

impl Coord {
    fn to_natural(self, t: f64) -> f64 {
        match self {
            Coord::Log => t.clamp(-100.0, 100.0).exp(),
            Coord::Prob => logistic(t.clamp(-40.0, 40.0)),
            Coord::Lambda => 2.0 * logistic(t.clamp(-40.0, 40.0)) - 1.0,
        }
    }

    fn to_transformed(self, v: f64) -> f64 {
        match self {
            Coord::Log => v.ln(),
            Coord::Prob => (v / (1.0 - v)).ln(),
            Coord::Lambda => ((1.0 + v) / (1.0 - v)).ln(),
        }
    }

    /// d(natural)/d(transformed) at natural value `v`.
    fn jacobian(self, v: f64) -> f64 {
        match self {
            Coord::Log => v,
            Coord::Prob => v * (1.0 - v),
            Coord::Lambda => 0.5 * (1.0 - v * v),
        }
    }
}

fn coords(kind: ModelKind) -> &'static [Coord] {
    use Coord::*;
    match kind {
        ModelKind::Rtgle => &[Log, Log, Log, Prob],
        ModelKind::Rtw => &[Log, Log, Prob],
        ModelKind::W | ModelKind::Le => &[Log, Log],
        ModelKind::Tw | ModelKind::Tll => &[Log, Log, Lambda],
        ModelKind::Tl => &[Log, Lambda],
        ModelKind::Rtle => &[Log, Log, Prob],
    }
}

/// Moment-based starting point (natural coordinates).
fn start(kind: ModelKind, data: &[f64]) -> Vec<f64> {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let sd = (data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let shape = (sd / mean).max(1e-3).powf(-1.086).clamp(0.2, 5.0);
    let scale = mean / gamma_fn(1.0 + 1.0 / shape).unwrap_or(1.0);
    let rate = 1.0 / mean;
    match kind {
        ModelKind::Rtgle | ModelKind::W => vec![shape, scale],
        ModelKind::Rtw => vec![scale.powf(-shape), shape, 0.5],
        ModelKind::Tw => vec![shape, scale, 0.0],
        ModelKind::Tl => {
            // Lindley mean (θ+2)/(θ(θ+1)) solved for θ
            let m = mean;
            let theta = (-(m - 1.0) + ((m - 1.0).powi(2) + 8.0 * m).sqrt()) / (2.0 * m);
            vec![theta, 0.0]
        }
        ModelKind::Tll => {
            let mut s = data.to_vec();
            s.sort_by(f64::total_cmp);
            let at = |q: f64| s[((q * (n - 1.0)).round() as usize).min(s.len() - 1)];
            let ratio = (at(0.75) / at(0.25)).max(1.0 + 1e-6);
            vec![at(0.5), (2.0 * 3f64.ln() / ratio.ln()).clamp(0.2, 20.0), 0.0]
        }
        ModelKind::Rtle => vec![rate, 0.2 * rate * rate, 0.5],
        ModelKind::Le => vec![rate, 0.2 * rate * rate],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitorFit {
    pub model: CompetitorModel,
    /// Negative log-likelihood at the optimum.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_starts_used: usize,
    pub standard_errors: Option<Vec<f64>>,
}

fn nll(model: &CompetitorModel, data: &[f64]) -> f64 {
    let mut s = 0.0;
    for &x in data {
        let l = model.log_pdf(x);
        if l.is_nan() || l == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        s -= l;
    }
    s
}

/// Maximum-likelihood fit of a competitor.
pub fn fit_competitor(kind: ModelKind, data: &[f64], config: &OptimizerConfig) -> Result<CompetitorFit, CompareError> {
    estimate::check_data(data)?;
    let cs = coords(kind);
    let build = |t: &[f64]| -> Option<CompetitorModel> {
        let v: Vec<f64> = t.iter().zip(cs).map(|(&x, c)| c.to_natural(x)).collect();
        CompetitorModel::from_params(kind, &v).ok()
    };
    let f = |t: &[f64]| build(t).map_or(f64::INFINITY, |m| nll(&m, data));
    let center: Vec<f64> = start(kind, data)
        .iter()
        .zip(cs)
        .map(|(&v, c)| c.to_transformed(v))
        .collect();
    let spread = vec![1.0; cs.len()];
    let (best, used) = minimize_multistart(f, &center, &spread, config)?;
    let model = build(&best.x).ok_or(EstimateError::AllStartsFailed)?;
    let standard_errors = spd_inverse(&numerical_hessian(f, &best.x, estimate::HESSIAN_STEP)).map(|cov| {
        model
            .params()
            .iter()
            .zip(cs)
            .enumerate()
            .map(|(i, (&v, c))| c.jacobian(v) * cov[i][i].sqrt())
            .collect()
    });
    Ok(CompetitorFit {
        model,
        objective: best.value,
        converged: best.converged,
        iterations: best.iterations,
        n_starts_used: used,
        standard_errors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: ModelKind,
    pub params: Vec<f64>,
    pub standard_errors: Option<Vec<f64>>,
    pub report: Option<GofReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn compare_one(kind: ModelKind, data: &[f64], config: &OptimizerConfig) -> ComparisonRow {
    let fitted = if kind == ModelKind::Rtgle {
        estimate::fit(data, EstimationMethod::Mle, config)
            .map_err(CompareError::from)
            .and_then(|r| {
                let rep = gof::gof_report(&r.params, data)?;
                Ok((r.params.to_array().to_vec(), r.standard_errors.map(|s| s.to_vec()), rep))
            })
    } else {
        fit_competitor(kind, data, config).and_then(|r| {
            let rep = gof::gof_report(&r.model, data)?;
            Ok((r.model.params(), r.standard_errors, rep))
        })
    };
    match fitted {
        Ok((params, standard_errors, report)) => ComparisonRow {
            model: kind,
            params,
            standard_errors,
            report: Some(report),
            error: None,
        },
        Err(e) => ComparisonRow {
            model: kind,
            params: Vec::new(),
            standard_errors: None,
            report: None,
            error: Some(e.to_string()),
        },
    }
}

/// Fits every model in `models` by maximum likelihood and tabulates the
/// likelihood and goodness-of-fit criteria, sorted by AIC. Failed fits are
/// kept as rows with an error message, after the successful ones.
pub fn comparison_table(data: &[f64], models: &[ModelKind], config: &OptimizerConfig) -> Vec<ComparisonRow> {
    let mut rows: Vec<ComparisonRow> = models.par_iter().map(|&k| compare_one(k, data, config)).collect();
    rows.sort_by(|a, b| {
        let key = |r: &ComparisonRow| r.report.as_ref().map_or(f64::INFINITY, |g| g.aic);
        key(a).total_cmp(&key(b))
    });
    rows
}
