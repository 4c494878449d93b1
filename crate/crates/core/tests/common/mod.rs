//! Property checks shared by the `properties` and `acceptance` targets. Each
//! check returns `Err(description)` on the first violation.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};

use rtgle_core::compare::{comparison_table, CompetitorModel, ModelKind};
use rtgle_core::estimate::{self, EstimationMethod, OptimizerConfig};
use rtgle_core::gof::{self, StatisticKind};
use rtgle_core::properties::{self, MoorsConvention};
use rtgle_core::quadrature::gauss_kronrod;
use rtgle_core::sim::{run_design, SimDesign, REFERENCE_DESIGNS};
use rtgle_core::special;
use rtgle_core::Rtgle;

pub type Check = fn() -> Result<(), String>;

/// Properties that fail for documented reasons: the global estimators have
/// heavier tails than the stated envelopes.
pub const KNOWN_FAILURES: &[&str] = &["p_zero_small_bias", "sim_envelope"];

pub const ALL: &[(&str, Check)] = &[
    ("lambert_wm1_roundtrip_and_monotone", lambert_wm1_roundtrip_and_monotone),
    ("lambert_w0_roundtrip_and_monotone", lambert_w0_roundtrip_and_monotone),
    ("gamma_recurrence", gamma_recurrence),
    ("quantile_roundtrip", quantile_roundtrip),
    ("cdf_shape", cdf_shape),
    (
        "stochastic_order_and_hazard_dampening",
        stochastic_order_and_hazard_dampening,
    ),
    ("hazard_monotonicity", hazard_monotonicity),
    ("samplers_agree", samplers_agree),
    ("densities_normalize", densities_normalize),
    ("moment_recurrence", moment_recurrence),
    ("moments_match_samples", moments_match_samples),
    ("galton_bounds_and_skewness_signs", galton_bounds_and_skewness_signs),
    ("renyi_continuous_at_one", renyi_continuous_at_one),
    ("fits_beat_truth", fits_beat_truth),
    ("mle_gradient_vanishes", mle_gradient_vanishes),
    ("objectives_permutation_invariant", objectives_permutation_invariant),
    ("fit_deterministic", fit_deterministic),
    ("p_zero_small_bias", p_zero_small_bias),
    ("statistics_pit_invariant", statistics_pit_invariant),
    ("p_values_monotone", p_values_monotone),
    ("aic_exact", aic_exact),
    ("competitors_normalize_and_nest", competitors_normalize_and_nest),
    ("comparison_reproducible", comparison_reproducible),
    ("sim_deterministic", sim_deterministic),
    ("sim_mse_shrinks", sim_mse_shrinks),
    ("sim_envelope", sim_envelope),
];

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    let mut runner = TestRunner::new_with_rng(config, rng);
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Interior parameters spanning the tabulated ranges.
fn interior() -> impl Strategy<Value = Rtgle> {
    (0.05f64..3.5, 0.05f64..3.5, 0.3f64..3.5, 0.0f64..=1.0).prop_map(|(a, b, g, p)| Rtgle::new(a, b, g, p).unwrap())
}

/// Interior parameters plus the α = 0, β = 0 edges.
fn with_edges() -> impl Strategy<Value = Rtgle> {
    prop_oneof![
        3 => interior(),
        1 => (0.05f64..3.5, 0.3f64..3.5, 0.0f64..=1.0).prop_map(|(b, g, p)| Rtgle::new(0.0, b, g, p).unwrap()),
        1 => (0.05f64..3.5, 0.3f64..3.5, 0.0f64..=1.0).prop_map(|(a, g, p)| Rtgle::new(a, 0.0, g, p).unwrap()),
    ]
}

fn x_grid(p: &Rtgle, points: usize) -> Vec<f64> {
    let top = p.quantile(0.999).unwrap();
    (1..=points).map(|i| top * i as f64 / points as f64).collect()
}

pub fn lambert_wm1_roundtrip_and_monotone() -> Result<(), String> {
    let inv_e = (-1.0f64).exp();
    let mut prev = f64::NEG_INFINITY;
    for i in 1..1000 {
        // log-spaced distance from 0 down to the branch point
        let v = -inv_e * (10f64).powf(-300.0 * (1.0 - i as f64 / 1000.0));
        let w = special::lambert_wm1(v).map_err(|e| e.to_string())?;
        ensure((w * w.exp() - v).abs() <= 1e-12, || format!("W-1({v}) = {w}"))?;
        // v falls as i grows, so W-1(v) rises
        ensure(w > prev, || format!("W-1 not decreasing at {v}"))?;
        prev = w;
    }
    Ok(())
}

pub fn lambert_w0_roundtrip_and_monotone() -> Result<(), String> {
    let inv_e = (-1.0f64).exp();
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=1000 {
        let v = -inv_e + (10.0 + inv_e) * i as f64 / 1000.0;
        let w = special::lambert_w0(v).map_err(|e| e.to_string())?;
        ensure(w > prev, || format!("W0 not increasing at {v}"))?;
        prev = w;
    }
    run(500, -inv_e..10.0f64, |v| {
        let w = special::lambert_w0(v).unwrap();
        let back = w * w.exp();
        prop_assert!((back - v).abs() <= 1e-12 * v.abs().max(1e-300) + 1e-15, "{v} -> {w}");
        Ok(())
    })
}

pub fn gamma_recurrence() -> Result<(), String> {
    for a in [0.3f64, 1.7, 4.2, 9.9] {
        let lhs = special::gamma_fn(a + 1.0).unwrap();
        let rhs = a * special::gamma_fn(a).unwrap();
        ensure((lhs - rhs).abs() <= 1e-12 * rhs, || format!("Γ recurrence at {a}"))?;
    }
    Ok(())
}

pub fn quantile_roundtrip() -> Result<(), String> {
    let us = [1e-6, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0 - 1e-6];
    run(300, with_edges(), |p| {
        for u in us {
            let x = p.quantile(u).unwrap();
            prop_assert!((p.cdf(x) - u).abs() <= 1e-10, "{p:?} u={u}");
        }
        Ok(())
    })
}

pub fn cdf_shape() -> Result<(), String> {
    run(200, with_edges(), |p| {
        prop_assert_eq!(p.cdf(0.0), 0.0);
        let mut prev = 0.0;
        for x in x_grid(&p, 200) {
            let f = p.cdf(x);
            prop_assert!(f >= prev, "{p:?} decreasing at {x}");
            prev = f;
        }
        let far = p.quantile(1.0 - 1e-12).unwrap();
        prop_assert!(p.cdf(far) >= 1.0 - 1e-11);
        Ok(())
    })
}

pub fn stochastic_order_and_hazard_dampening() -> Result<(), String> {
    run(200, with_edges(), |p| {
        let g = p.baseline();
        for x in x_grid(&p, 300) {
            prop_assert!(p.cdf(x) <= g.cdf(x) + 1e-15, "{p:?} F > G at {x}");
            let h = p.hazard(x).unwrap();
            let k = p.baseline_hazard(x).unwrap();
            prop_assert!(h <= k * (1.0 + 1e-12), "{p:?} h > k at {x}");
        }
        Ok(())
    })
}

pub fn hazard_monotonicity() -> Result<(), String> {
    let ifr = (0.05f64..3.5, 0.0f64..3.5, 1.0f64..3.5, 0.0f64..=1.0)
        .prop_filter("a rate", |(a, b, _, _)| *a > 0.0 || *b > 0.0)
        .prop_map(|(a, b, g, p)| (Rtgle::new(a, b, g, p).unwrap(), true));
    let dfr =
        (0.05f64..3.5, 0.01f64..0.5, 0.0f64..=1.0).prop_map(|(a, g, p)| (Rtgle::new(a, 0.0, g, p).unwrap(), false));
    run(200, prop_oneof![ifr, dfr], |(p, increasing)| {
        let hs: Vec<f64> = x_grid(&p, 1000).iter().map(|&x| p.hazard(x).unwrap()).collect();
        for w in hs.windows(2) {
            let slack = 1e-12 * w[0].abs();
            if increasing {
                prop_assert!(w[1] >= w[0] - slack, "{p:?} hazard decreases");
            } else {
                prop_assert!(w[1] <= w[0] + slack, "{p:?} hazard increases");
            }
        }
        Ok(())
    })
}

/// Asymptotic two-sample KS p-value.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    (d, gof::kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d))
}

pub fn samplers_agree() -> Result<(), String> {
    for (k, prm) in [[1.0, 0.5, 1.2, 0.3], [0.2, 2.0, 0.6, 0.9], [0.0, 1.0, 2.0, 1.0]]
        .iter()
        .enumerate()
    {
        let p = Rtgle::new(prm[0], prm[1], prm[2], prm[3]).unwrap();
        let seed = 1000 + k as u64;
        let (d, pv) = two_sample_ks(&p.sample(10_000, seed), &p.sample_via_records(10_000, seed));
        ensure(pv >= 0.01, || format!("{prm:?}: D = {d}, p = {pv}"))?;
    }
    Ok(())
}

fn integral(f: impl Fn(f64) -> f64, hi: f64) -> f64 {
    gauss_kronrod(f, 0.0, hi, 1e-11, 1e-14, 2000)
        .map(|i| i.value)
        .unwrap_or(f64::NAN)
}

pub fn densities_normalize() -> Result<(), String> {
    run(40, interior(), |p| {
        let hi = p.quantile(1.0 - 1e-12).unwrap();
        let total = integral(|x| p.pdf(x), hi);
        prop_assert!((total - 1.0).abs() <= 1e-8, "{p:?}: pdf mass {total}");
        let hi = p.inverse_sf(1e-14).unwrap();
        for (r, n) in [(1, 3), (2, 3), (3, 3)] {
            let m = integral(|x| properties::order_statistic_pdf(&p, r, n, x).unwrap(), hi);
            prop_assert!((m - 1.0).abs() <= 1e-7, "{p:?}: order stat {r}:{n} mass {m}");
        }
        let hi = p.inverse_sf(1e-16).unwrap();
        for n in [1, 2, 3] {
            let vals: Vec<f64> = x_grid(&p, 50)
                .iter()
                .map(|&x| properties::record_pdf(&p, n, x).unwrap())
                .collect();
            prop_assert!(vals.iter().all(|v| *v >= 0.0));
            let hi = hi * (n as f64);
            let m = integral(|x| properties::record_pdf(&p, n, x).unwrap(), hi);
            prop_assert!((m - 1.0).abs() <= 1e-7, "{p:?}: record {n} mass {m}");
        }
        Ok(())
    })
}

pub fn moment_recurrence() -> Result<(), String> {
    run(60, interior(), |p| {
        for r in 1..=4 {
            let res = properties::moment_recurrence_residual(&p, r).unwrap();
            // absolute on the tabulated grid; relative to the right-hand side
            // (1 + pr/γ)Γ(1 + r/γ), which is huge for small γ, elsewhere
            let rg = r as f64 / p.gamma();
            let rhs = (1.0 + p.p() * rg) * special::gamma_fn(1.0 + rg).unwrap();
            prop_assert!(res <= 1e-7 * rhs.max(1.0), "{p:?} r={r}: {res}");
        }
        Ok(())
    })
}

pub fn moments_match_samples() -> Result<(), String> {
    for (k, prm) in [[0.5, 0.5, 1.2, 0.2], [1.2, 0.5, 1.5, 0.8], [0.8, 0.0, 0.7, 0.5]]
        .iter()
        .enumerate()
    {
        let p = Rtgle::new(prm[0], prm[1], prm[2], prm[3]).unwrap();
        let xs = p.sample(100_000, 77 + k as u64);
        for r in [1, 2] {
            let pw: Vec<f64> = xs.iter().map(|x| x.powi(r as i32)).collect();
            let n = pw.len() as f64;
            let mean = pw.iter().sum::<f64>() / n;
            let se = (pw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
            let exact = properties::moment_quadrature(&p, r).unwrap();
            ensure((mean - exact).abs() <= 4.0 * se, || {
                format!("{prm:?} r={r}: sample {mean} vs {exact} (se {se})")
            })?;
        }
    }
    Ok(())
}

pub fn galton_bounds_and_skewness_signs() -> Result<(), String> {
    run(150, interior(), |p| {
        let q = properties::quantile_measures(&p, MoorsConvention::Standard).unwrap();
        prop_assert!((-1.0..=1.0).contains(&q.galton_skewness), "{p:?}");
        Ok(())
    })?;
    let sk = |g: f64| properties::skewness(&Rtgle::new(0.5, 0.5, g, 0.2).unwrap()).unwrap();
    ensure(sk(1.5) > 0.0 && sk(2.5) < 0.0, || {
        format!("skewness {} at 1.5, {} at 2.5", sk(1.5), sk(2.5))
    })
}

pub fn renyi_continuous_at_one() -> Result<(), String> {
    run(30, interior(), |p| {
        let lo = properties::renyi_entropy(&p, 1.0 - 1e-3).unwrap();
        let hi = properties::renyi_entropy(&p, 1.0 + 1e-3).unwrap();
        prop_assert!((lo - hi).abs() < 1e-2, "{p:?}: {lo} vs {hi}");
        Ok(())
    })
}

fn quick() -> OptimizerConfig {
    OptimizerConfig {
        n_starts: 4,
        ..OptimizerConfig::default()
    }
}

pub fn fits_beat_truth() -> Result<(), String> {
    for (k, prm) in REFERENCE_DESIGNS.iter().enumerate() {
        let truth = Rtgle::new(prm[0], prm[1], prm[2], prm[3]).unwrap();
        let data = truth.sample(80, 500 + k as u64);
        for m in EstimationMethod::ALL {
            let fit = estimate::fit(&data, m, &quick()).map_err(|e| e.to_string())?;
            let at_truth = estimate::objective(m, &truth, &data).unwrap();
            ensure(fit.objective <= at_truth + 1e-9 * (1.0 + at_truth.abs()), || {
                format!("{prm:?} {m}: fitted {} > truth {at_truth}", fit.objective)
            })?;
        }
    }
    Ok(())
}

pub fn mle_gradient_vanishes() -> Result<(), String> {
    for (k, prm) in REFERENCE_DESIGNS.iter().enumerate() {
        let truth = Rtgle::new(prm[0], prm[1], prm[2], prm[3]).unwrap();
        let data = truth.sample(120, 900 + k as u64);
        let fit = estimate::fit(&data, EstimationMethod::Mle, &quick()).map_err(|e| e.to_string())?;
        let [_, _, _, p] = fit.params.to_array();
        if !fit.converged || !(1e-6..=1.0 - 1e-6).contains(&p) {
            continue;
        }
        let g = estimate::nll_gradient(&fit.params, &data).unwrap();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        ensure(norm <= 1e-3 * (1.0 + fit.objective.abs()), || {
            format!("{prm:?}: |∇| = {norm}")
        })?;
    }
    Ok(())
}

pub fn objectives_permutation_invariant() -> Result<(), String> {
    let data = Rtgle::new(1.0, 0.5, 1.3, 0.4).unwrap().sample(30, 3);
    run(50, (interior(), Just(data).prop_shuffle()), |(p, shuffled)| {
        let mut base = shuffled.clone();
        base.sort_by(f64::total_cmp);
        for m in EstimationMethod::ALL {
            let a = estimate::objective(m, &p, &base).unwrap();
            let b = estimate::objective(m, &p, &shuffled).unwrap();
            prop_assert!(a == b || (a - b).abs() <= 1e-12 * a.abs(), "{m}: {a} vs {b}");
        }
        Ok(())
    })
}

pub fn fit_deterministic() -> Result<(), String> {
    let data = Rtgle::new(0.8, 0.8, 1.0, 0.7).unwrap().sample(60, 8);
    for m in EstimationMethod::ALL {
        let a = estimate::fit(&data, m, &quick()).map_err(|e| e.to_string())?;
        let b = estimate::fit(&data, m, &quick()).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{m} differs between runs"))?;
    }
    Ok(())
}

pub fn p_zero_small_bias() -> Result<(), String> {
    let truth = Rtgle::new(1.2, 0.5, 1.5, 0.0).unwrap();
    let reps = 20;
    let mut sum = 0.0;
    for r in 0..reps {
        let data = truth.sample(200, 4000 + r);
        let fit = estimate::fit(&data, EstimationMethod::Mle, &quick()).map_err(|e| e.to_string())?;
        let p = fit.params.p();
        ensure((0.0..=1.0).contains(&p), || format!("p̂ = {p}"))?;
        sum += p;
    }
    let bias = sum / reps as f64;
    ensure(bias <= 0.15, || format!("mean p̂ = {bias}"))
}

/// `F(y^{1/3})`: the distribution of `X³`.
struct Cubed(Rtgle);

impl gof::CdfEvaluator for Cubed {
    fn cdf(&self, y: f64) -> f64 {
        self.0.cdf(y.cbrt())
    }

    fn ln_sf(&self, y: f64) -> f64 {
        self.0.log_sf(y.cbrt())
    }
}

pub fn statistics_pit_invariant() -> Result<(), String> {
    let data = Rtgle::new(0.6, 0.4, 1.1, 0.5).unwrap().sample(40, 12);
    run(40, interior(), |p| {
        let direct = gof::statistics(&p, &data).unwrap();
        let cubed: Vec<f64> = data.iter().map(|x| x.powi(3)).collect();
        let relabeled = gof::statistics(&Cubed(p), &cubed).unwrap();
        for (a, b) in direct.iter().zip(relabeled) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
        }
        Ok(())
    })
}

pub fn p_values_monotone() -> Result<(), String> {
    let kinds = prop_oneof![
        Just(StatisticKind::Ks),
        Just(StatisticKind::Cvm),
        Just(StatisticKind::Ad)
    ];
    run(
        600,
        (kinds, 0.0f64..6.0, 0.0f64..6.0, 1usize..500),
        |(kind, s, t, n)| {
            let scale = if kind == StatisticKind::Ks { 0.2 } else { 1.0 };
            let (lo, hi) = if s <= t {
                (s * scale, t * scale)
            } else {
                (t * scale, s * scale)
            };
            let plo = gof::p_value(kind, lo, n);
            let phi = gof::p_value(kind, hi, n);
            prop_assert!((0.0..=1.0).contains(&plo) && (0.0..=1.0).contains(&phi));
            prop_assert!(phi <= plo + 1e-12, "{kind:?} n={n}: p({lo}) = {plo} < p({hi}) = {phi}");
            Ok(())
        },
    )
}

pub fn aic_exact() -> Result<(), String> {
    run(300, (-1e4f64..1e4, 1usize..20), |(m2ll, r)| {
        prop_assert_eq!(gof::aic(m2ll, r).unwrap(), m2ll + 2.0 * r as f64);
        Ok(())
    })
}

pub fn competitors_normalize_and_nest() -> Result<(), String> {
    let models = [
        CompetitorModel::Rtw {
            theta: 0.5,
            gamma: 1.4,
            p: 0.3,
        },
        CompetitorModel::W { mu: 0.7, sigma: 3.0 },
        CompetitorModel::Tw {
            mu: 1.8,
            sigma: 0.5,
            lambda: -0.9,
        },
        CompetitorModel::Tl {
            theta: 0.4,
            lambda: 0.9,
        },
        CompetitorModel::Tll {
            alpha: 2.0,
            beta: 4.0,
            lambda: 0.5,
        },
        CompetitorModel::Rtle {
            alpha: 0.3,
            beta: 1.1,
            p: 1.0,
        },
        CompetitorModel::Le {
            alpha: 0.0001,
            beta: 2.0,
        },
    ];
    for m in models {
        let hi = m.quantile(1.0 - 1e-13).unwrap();
        let total = integral(|x| m.pdf(x), hi);
        ensure((total - 1.0).abs() <= 1e-7, || format!("{m:?}: mass {total}"))?;
        for u in [0.1, 0.5, 0.9] {
            let x = m.quantile(u).unwrap();
            let q = integral(|t| m.pdf(t), x);
            ensure((q - m.cdf(x)).abs() <= 1e-7, || format!("{m:?}: cdf at {x}"))?;
        }
    }
    for x in [0.05, 0.5, 1.5, 4.0, 9.0] {
        let w = CompetitorModel::W { mu: 1.7, sigma: 1.3 };
        let tw = CompetitorModel::Tw {
            mu: 1.7,
            sigma: 1.3,
            lambda: 0.0,
        };
        let rtw = CompetitorModel::Rtw {
            theta: (1.0f64 / 1.3).powf(1.7),
            gamma: 1.7,
            p: 0.0,
        };
        let le = CompetitorModel::Le { alpha: 0.3, beta: 0.2 };
        let rtle = CompetitorModel::Rtle {
            alpha: 0.3,
            beta: 0.2,
            p: 0.0,
        };
        ensure(w.pdf(x) == tw.pdf(x) || (w.pdf(x) - tw.pdf(x)).abs() < 1e-15, || {
            "TW(0) ≠ W".into()
        })?;
        ensure((w.pdf(x) - rtw.pdf(x)).abs() < 1e-14 * (1.0 + w.pdf(x)), || {
            "RTW(p=0) ≠ W".into()
        })?;
        ensure(le.pdf(x) == rtle.pdf(x), || "RTLE(0) ≠ LE".into())?;
    }
    Ok(())
}

pub fn comparison_reproducible() -> Result<(), String> {
    let data = CompetitorModel::Tw {
        mu: 1.4,
        sigma: 2.0,
        lambda: 0.3,
    }
    .sample(60, 31);
    let cfg = OptimizerConfig {
        n_starts: 3,
        ..OptimizerConfig::default()
    };
    let a = comparison_table(&data, &ModelKind::ALL, &cfg);
    let b = comparison_table(&data, &ModelKind::ALL, &cfg);
    ensure(a == b, || "comparison table differs between runs".into())?;
    ensure(a.len() == 8 && a.iter().all(|r| r.error.is_none()), || {
        "missing rows".into()
    })
}

fn design(prm: [f64; 4], sizes: Vec<usize>, methods: Vec<EstimationMethod>, replicates: usize) -> SimDesign {
    SimDesign {
        true_params: Rtgle::new(prm[0], prm[1], prm[2], prm[3]).unwrap(),
        sample_sizes: sizes,
        methods,
        replicates,
        seed: 2024,
        optimizer: OptimizerConfig {
            n_starts: 3,
            ..OptimizerConfig::default()
        },
        start_at_truth: false,
    }
}

pub fn sim_deterministic() -> Result<(), String> {
    let d = design(REFERENCE_DESIGNS[1], vec![20, 40], EstimationMethod::ALL.to_vec(), 6);
    let a = run_design(&d).map_err(|e| e.to_string())?;
    let b = run_design(&d).map_err(|e| e.to_string())?;
    ensure(a == b, || "simulation report differs between runs".into())
}

pub fn sim_mse_shrinks() -> Result<(), String> {
    let d = design(REFERENCE_DESIGNS[0], vec![20, 200], vec![EstimationMethod::Mle], 60);
    let r = run_design(&d).map_err(|e| e.to_string())?;
    let small = r.cell(20, EstimationMethod::Mle).unwrap().mse[2];
    let large = r.cell(200, EstimationMethod::Mle).unwrap().mse[2];
    ensure(large <= small * 1.1, || format!("MSE(γ̂): n=20 {small}, n=200 {large}"))
}

pub fn sim_envelope() -> Result<(), String> {
    for prm in REFERENCE_DESIGNS {
        let d = design(prm, vec![50], EstimationMethod::ALL.to_vec(), 30);
        let r = run_design(&d).map_err(|e| e.to_string())?;
        for c in &r.cells {
            for k in 0..4 {
                ensure(c.bias[k].abs() <= 1.0 && (0.0..=1.5).contains(&c.mse[k]), || {
                    format!("{prm:?} {}: bias {:?} mse {:?}", c.method, c.bias, c.mse)
                })?;
                ensure(c.mse[k] >= c.bias[k] * c.bias[k] - 1e-12, || "MSE below bias²".into())?;
            }
        }
    }
    Ok(())
}
