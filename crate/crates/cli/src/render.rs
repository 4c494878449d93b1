use std::io::Write;

use clap::ValueEnum;
use serde::Serialize;

use rtgle_core::compare::ComparisonRow;
use rtgle_core::data::OutlierReport;
use rtgle_core::estimate::{EstimationMethod, FitResult};
use rtgle_core::gof::GofReport;
use rtgle_core::properties::PropError;
use rtgle_core::sim::SimReport;
use rtgle_core::Rtgle;

use crate::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

pub fn fmt4(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "—".to_string()
    }
}

pub fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

pub fn print_json<T: Serialize + ?Sized>(value: &T) -> CliResult<()> {
    let s = serde_json::to_string_pretty(value).map_err(crate::numeric)?;
    println!("{s}");
    Ok(())
}

/// Cells are kept as strings so text, CSV and JSON share one layout.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    /// Numeric view for JSON.
    values: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, v: Vec<f64>) {
        self.rows.push(v.iter().map(|x| x.to_string()).collect());
        self.values.push(v.into_iter().map(Some).collect());
    }

    pub fn push_strings(&mut self, row: Vec<String>) {
        self.values.push(row.iter().map(|s| s.parse().ok()).collect());
        self.rows.push(row);
    }

    pub fn push_params(&mut self, prm: &Rtgle, values: &[f64]) {
        let mut v = prm.to_array().to_vec();
        v.extend_from_slice(values);
        self.push(v);
    }

    pub fn records(&self) -> Vec<serde_json::Map<String, serde_json::Value>> {
        self.rows
            .iter()
            .zip(&self.values)
            .map(|(row, vals)| {
                self.header
                    .iter()
                    .zip(row.iter().zip(vals))
                    .map(|(h, (s, v))| {
                        let value = match v {
                            Some(x) => serde_json::json!(x),
                            None => serde_json::json!(s),
                        };
                        (h.clone(), value)
                    })
                    .collect()
            })
            .collect()
    }

    pub fn csv_string(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(crate::numeric)?;
        for r in &self.rows {
            w.write_record(r).map_err(crate::numeric)?;
        }
        let bytes = w.into_inner().map_err(crate::numeric)?;
        String::from_utf8(bytes).map_err(crate::numeric)
    }

    pub fn print_csv(&self) -> CliResult<()> {
        let s = self.csv_string()?;
        std::io::stdout()
            .write_all(s.as_bytes())
            .map_err(|e| CliError::Data(e.to_string()))
    }

    /// Aligned grid, numeric cells at 4 decimals.
    pub fn text(&self) -> String {
        let cells: Vec<Vec<String>> = std::iter::once(self.header.clone())
            .chain(self.rows.iter().zip(&self.values).map(|(r, v)| {
                r.iter()
                    .zip(v)
                    .map(|(s, x)| match x {
                        Some(x) if s.contains('.') || s.contains('e') => fmt4(*x),
                        _ => s.clone(),
                    })
                    .collect()
            }))
            .collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|j| cells.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in &cells {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (c, &w))| if j == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    /// `params | v1, v2, …` with 4-decimal values, for parameter tables.
    pub fn param_rows_text(&self) -> String {
        let mut out = format!("{} | {}\n", self.header[..4].join(", "), self.header[4..].join(", "));
        for v in &self.values {
            let v: Vec<f64> = v.iter().map(|x| x.unwrap_or(f64::NAN)).collect();
            let vals: Vec<String> = v[4..].iter().map(|&x| fmt4(x)).collect();
            out.push_str(&format!("{} | {}\n", join(&v[..4]), vals.join(", ")));
        }
        out
    }
}

const NAMES: [&str; 4] = ["alpha", "beta", "gamma", "p"];

pub fn fit_table(r: &FitResult) -> Table {
    let mut h: Vec<String> = vec!["method".into()];
    h.extend(NAMES.iter().map(|s| s.to_string()));
    h.extend(NAMES.iter().map(|s| format!("se_{s}")));
    h.extend(["objective", "converged", "iterations", "starts"].map(String::from));
    let mut t = Table::new(&h.iter().map(String::as_str).collect::<Vec<_>>());
    let mut row = vec![r.method.label().to_string()];
    row.extend(r.params.to_array().iter().map(|x| x.to_string()));
    match r.standard_errors {
        Some(se) => row.extend(se.iter().map(|x| x.to_string())),
        None => row.extend(std::iter::repeat_n(String::new(), 4)),
    }
    row.extend([
        r.objective.to_string(),
        r.converged.to_string(),
        r.iterations.to_string(),
        r.n_starts_used.to_string(),
    ]);
    t.push_strings(row);
    t
}

pub fn fit_text(r: &FitResult) -> String {
    let mut out = format!("method: {}\n", r.method.label());
    let p = r.params.to_array();
    for (k, name) in NAMES.iter().enumerate() {
        let se = r.standard_errors.map_or("—".to_string(), |s| fmt4(s[k]));
        out.push_str(&format!("{name:>6} = {:.4}  (se {se})\n", p[k]));
    }
    if r.method == EstimationMethod::Mle {
        out.push_str(&format!("-2 log L = {:.4}\n", 2.0 * r.objective));
    } else {
        out.push_str(&format!("objective = {:.6}\n", r.objective));
    }
    out.push_str(&format!(
        "converged: {}, iterations: {}, starts: {}\n",
        r.converged, r.iterations, r.n_starts_used
    ));
    out
}

pub fn gof_table(g: &GofReport) -> Table {
    let mut t = Table::new(&[
        "n",
        "ks",
        "p_ks",
        "cvm",
        "p_cvm",
        "ad",
        "p_ad",
        "minus2loglik",
        "aic",
        "p_ks_unadjusted",
    ]);
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    t.push_strings(vec![
        g.n.to_string(),
        g.ks.to_string(),
        g.p_ks.to_string(),
        g.cvm.to_string(),
        g.p_cvm.to_string(),
        g.ad.to_string(),
        g.p_ad.to_string(),
        g.minus2loglik.to_string(),
        g.aic.to_string(),
        opt(g.p_ks_unadjusted),
    ]);
    t
}

pub fn outlier_text(o: &OutlierReport) -> String {
    format!(
        "hinges {:.4}, {:.4}; fences {:.4}, {:.4}; flagged indices {:?} values {:?}\n",
        o.lower_hinge, o.upper_hinge, o.lower_fence, o.upper_fence, o.indices, o.values
    )
}

pub fn compare_table(rows: &[ComparisonRow]) -> Table {
    let mut t = Table::new(&[
        "model",
        "params",
        "minus2loglik",
        "aic",
        "ks",
        "p_ks",
        "cvm",
        "p_cvm",
        "ad",
        "p_ad",
    ]);
    for r in rows {
        let mut row = vec![
            r.model.label().to_string(),
            r.params.iter().map(|&x| fmt4(x)).collect::<Vec<_>>().join(" "),
        ];
        match &r.report {
            Some(g) => {
                row.extend([g.minus2loglik, g.aic, g.ks, g.p_ks, g.cvm, g.p_cvm, g.ad, g.p_ad].map(|x| x.to_string()))
            }
            None => row.extend(std::iter::repeat_n("—".to_string(), 8)),
        }
        t.push_strings(row);
    }
    t
}

pub fn sim_table(r: &SimReport) -> Table {
    let mut h: Vec<String> = vec!["n".into(), "method".into()];
    h.extend(NAMES.iter().map(|s| format!("bias_{s}")));
    h.extend(NAMES.iter().map(|s| format!("mse_{s}")));
    h.extend(["n_ok", "n_failed_fits"].map(String::from));
    let mut t = Table::new(&h.iter().map(String::as_str).collect::<Vec<_>>());
    for c in &r.cells {
        let mut row = vec![c.n.to_string(), c.method.label().to_string()];
        row.extend(c.bias.iter().chain(&c.mse).map(|x| x.to_string()));
        row.extend([c.n_ok.to_string(), c.n_failed_fits.to_string()]);
        t.push_strings(row);
    }
    t
}

/// `points` equally spaced abscissae on `(0, Q(0.999)]`.
pub fn curves(prm: &Rtgle, points: usize) -> Result<Table, PropError> {
    let top = prm.quantile(0.999).map_err(PropError::from)?;
    let mut t = Table::new(&["x", "pdf", "cdf", "hazard"]);
    for i in 1..=points.max(2) {
        let x = top * i as f64 / points.max(2) as f64;
        t.push(vec![x, prm.pdf(x), prm.cdf(x), prm.hazard(x).unwrap_or(f64::NAN)]);
    }
    Ok(t)
}
