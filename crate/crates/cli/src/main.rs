mod render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use rtgle_core::compare::{comparison_table, ModelKind};
use rtgle_core::data::{Dataset, OutlierReport};
use rtgle_core::estimate::{self, EstimationMethod, OptimizerConfig};
use rtgle_core::gof::{self, GofReport, PValueMode};
use rtgle_core::properties::{self, MoorsConvention};
use rtgle_core::sim::{self, SimDesign};
use rtgle_core::Rtgle;

use render::{Format, Table};

#[derive(Parser, Debug)]
#[command(
    name = "rtgle",
    version,
    about = "RTGLE lifetime distribution: fitting, goodness of fit, simulation"
)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// Master seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the RTGLE distribution to a sample.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "mle")]
        method: EstimationMethod,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Goodness-of-fit statistics for given parameters.
    Gof {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_parser = parse_params, allow_hyphen_values = true)]
        params: Rtgle,
        /// Parametric bootstrap p-values from B refits.
        #[arg(long, value_name = "B")]
        bootstrap: Option<usize>,
        /// Estimator used by the bootstrap refits.
        #[arg(long, default_value = "mle")]
        method: EstimationMethod,
        /// Report boxplot outliers (1.5 IQR rule) without removing them.
        #[arg(long)]
        flag_outliers: bool,
    },
    /// Fit RTGLE and the seven competitors by maximum likelihood.
    Compare {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated subset, e.g. RTGLE,W,TW.
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<ModelKind>>,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Monte Carlo bias/MSE study.
    Simulate {
        /// JSON design file, or 1-4 for a reference design.
        #[arg(long)]
        design: String,
        /// Replicates for a reference design.
        #[arg(long, default_value_t = 500)]
        replicates: usize,
        /// Directory receiving report.json, report.csv and report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quantile measures or moments for parameter rows.
    Table {
        #[arg(long, value_enum)]
        kind: TableKind,
        /// One or more parameter rows a,b,g,p.
        #[arg(long, value_parser = parse_params, num_args = 1.., required = true)]
        params: Vec<Rtgle>,
        /// Octile convention of the Moors coefficient.
        #[arg(long, value_enum, default_value_t = Moors::Tabulated)]
        moors: Moors,
    },
    /// Draw a sample, optionally with pdf/cdf/hazard curves.
    Sample {
        #[arg(long, value_parser = parse_params, allow_hyphen_values = true)]
        params: Rtgle,
        #[arg(long)]
        n: usize,
        /// Write an (x, pdf, cdf, hazard) grid as CSV to this file.
        #[arg(long, value_name = "FILE")]
        curves: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Data file or "embedded".
    #[arg(long)]
    data: String,
    /// Drop boxplot outliers before use.
    #[arg(long)]
    drop_outliers: bool,
}

#[derive(Args, Debug)]
struct OptArgs {
    /// Number of optimizer starts.
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TableKind {
    Quantiles,
    Moments,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Moors {
    Tabulated,
    Standard,
}

impl From<Moors> for MoorsConvention {
    fn from(m: Moors) -> Self {
        match m {
            Moors::Tabulated => MoorsConvention::Tabulated,
            Moors::Standard => MoorsConvention::Standard,
        }
    }
}

fn parse_params(s: &str) -> Result<Rtgle, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?}")))
        .collect::<Result<_, _>>()?;
    let [a, b, g, p] = v[..] else {
        return Err(format!("expected 4 values alpha,beta,gamma,p, got {}", v.len()));
    };
    Rtgle::new(a, b, g, p).map_err(|e| e.to_string())
}

enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

fn numeric(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load(args: &DataArgs) -> CliResult<Dataset> {
    let d = Dataset::load(&args.data).map_err(|e| CliError::Data(e.to_string()))?;
    Ok(if args.drop_outliers { d.without_outliers() } else { d })
}

fn optimizer(seed: Option<u64>, opt: Option<&OptArgs>) -> CliResult<OptimizerConfig> {
    let mut cfg = OptimizerConfig::default();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = opt {
        if let Some(k) = o.starts {
            cfg.n_starts = k;
        }
        if let Some(m) = o.max_iterations {
            cfg.max_iterations = m;
        }
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let fmt = cli.format;
    match cli.command {
        Command::Fit { data, method, opt } => {
            let d = load(&data)?;
            let cfg = optimizer(cli.seed, Some(&opt))?;
            let r = estimate::fit(&d.values, method, &cfg).map_err(numeric)?;
            if !r.converged {
                eprintln!("warning: optimizer did not converge");
            }
            if let Some(msg) = &r.se_diagnostic {
                eprintln!("warning: standard errors unavailable: {msg}");
            }
            match fmt {
                Format::Json => render::print_json(&r),
                Format::Csv => render::fit_table(&r).print_csv(),
                Format::Text => {
                    println!("data: {} (n = {})", d.source, d.n());
                    print!("{}", render::fit_text(&r));
                    Ok(())
                }
            }
        }
        Command::Gof {
            data,
            params,
            bootstrap,
            method,
            flag_outliers,
        } => {
            let d = load(&data)?;
            let cfg = optimizer(cli.seed, None)?;
            let mode = match bootstrap {
                Some(0) => return Err(CliError::Usage("--bootstrap needs at least 1 replicate".into())),
                Some(b) => PValueMode::Bootstrap { replicates: b },
                None => PValueMode::Asymptotic,
            };
            let report = gof::rtgle_gof_report(&params, &d.values, mode, method, &cfg).map_err(numeric)?;
            let outliers = flag_outliers.then(|| OutlierReport::tukey(&d.values));
            let out = GofOutput { report, outliers };
            match fmt {
                Format::Json => render::print_json(&out),
                Format::Csv => render::gof_table(&out.report).print_csv(),
                Format::Text => {
                    println!("data: {} (n = {})", d.source, d.n());
                    print!("{}", render::gof_table(&out.report).text());
                    if let Some(o) = &out.outliers {
                        print!("{}", render::outlier_text(o));
                    }
                    Ok(())
                }
            }
        }
        Command::Compare { data, models, opt } => {
            let d = load(&data)?;
            let cfg = optimizer(cli.seed, Some(&opt))?;
            let models = models.unwrap_or_else(|| ModelKind::ALL.to_vec());
            let rows = comparison_table(&d.values, &models, &cfg);
            for r in &rows {
                if let Some(e) = &r.error {
                    eprintln!("warning: {} fit failed: {e}", r.model.label());
                }
            }
            match fmt {
                Format::Json => render::print_json(&rows),
                Format::Csv => render::compare_table(&rows).print_csv(),
                Format::Text => {
                    println!("data: {} (n = {})", d.source, d.n());
                    print!("{}", render::compare_table(&rows).text());
                    Ok(())
                }
            }
        }
        Command::Simulate {
            design,
            replicates,
            out,
        } => {
            let mut design = load_design(&design, replicates, cli.seed)?;
            if let Some(s) = cli.seed {
                design.seed = s;
            }
            let report = sim::run_design(&design).map_err(|e| CliError::Usage(e.to_string()))?;
            for c in report.cells.iter().filter(|c| c.n_failed_fits > 0) {
                eprintln!(
                    "note: n = {} {}: {} of {} fits failed",
                    c.n, c.method, c.n_failed_fits, report.replicates
                );
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
                let json = serde_json::to_string_pretty(&report).map_err(numeric)?;
                write_file(&dir.join("report.json"), &json)?;
                write_file(&dir.join("report.csv"), &render::sim_table(&report).csv_string()?)?;
                write_file(&dir.join("report.txt"), &sim::report_to_table(&report))?;
            }
            match fmt {
                Format::Json => render::print_json(&report),
                Format::Csv => render::sim_table(&report).print_csv(),
                Format::Text => {
                    print!("{}", sim::report_to_table(&report));
                    Ok(())
                }
            }
        }
        Command::Table { kind, params, moors } => {
            let t = match kind {
                TableKind::Quantiles => {
                    let mut t = Table::new(&["alpha", "beta", "gamma", "p", "median", "iqr", "galton", "moors"]);
                    for prm in &params {
                        match properties::quantile_measures(prm, moors.into()) {
                            Ok(q) => t.push_params(prm, &[q.median, q.iqr, q.galton_skewness, q.moors_kurtosis]),
                            Err(e) => eprintln!("warning: {}: {e}", render::join(&prm.to_array())),
                        }
                    }
                    t
                }
                TableKind::Moments => {
                    let mut t = Table::new(&[
                        "alpha", "beta", "gamma", "p", "EX", "EX2", "EX3", "EX4", "variance", "skewness", "kurtosis",
                    ]);
                    for prm in &params {
                        match properties::moment_summary(prm) {
                            Ok(m) => {
                                let mut v = m.raw.to_vec();
                                v.extend([m.variance, m.skewness, m.kurtosis]);
                                t.push_params(prm, &v);
                            }
                            Err(e) => eprintln!("warning: {}: {e}", render::join(&prm.to_array())),
                        }
                    }
                    t
                }
            };
            match fmt {
                Format::Json => render::print_json(&t.records()),
                Format::Csv => t.print_csv(),
                Format::Text => {
                    print!("{}", t.param_rows_text());
                    Ok(())
                }
            }
        }
        Command::Sample {
            params,
            n,
            curves,
            grid_points,
        } => {
            if n == 0 {
                return Err(CliError::Usage("--n must be at least 1".into()));
            }
            let seed = cli.seed.unwrap_or(OptimizerConfig::default().seed);
            let xs = params.sample(n, seed);
            if let Some(path) = curves {
                let t = render::curves(&params, grid_points).map_err(numeric)?;
                write_file(&path, &t.csv_string()?)?;
            }
            match fmt {
                Format::Json => render::print_json(&xs),
                Format::Csv => {
                    let mut t = Table::new(&["x"]);
                    for &x in &xs {
                        t.push(vec![x]);
                    }
                    t.print_csv()
                }
                Format::Text => {
                    for x in &xs {
                        println!("{x}");
                    }
                    Ok(())
                }
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GofOutput {
    #[serde(flatten)]
    report: GofReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outliers: Option<OutlierReport>,
}

fn load_design(spec: &str, replicates: usize, seed: Option<u64>) -> CliResult<SimDesign> {
    if let Ok(j) = spec.parse::<usize>() {
        let seed = seed.unwrap_or(OptimizerConfig::default().seed);
        return j
            .checked_sub(1)
            .and_then(|i| SimDesign::reference(i, replicates, seed))
            .ok_or_else(|| CliError::Usage(format!("reference designs are 1-{}", sim::REFERENCE_DESIGNS.len())));
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{spec}: {e}")))
}

fn write_file(path: &Path, content: &str) -> CliResult<()> {
    std::fs::write(path, content).map_err(|e| io_err(path, e))
}
