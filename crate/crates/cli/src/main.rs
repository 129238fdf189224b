use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use clt_spectra::bounds::{self, BoundReport, VerifyConfig};
use clt_spectra::closed::{closed_lambda, closed_theta, gamma_jst};
use clt_spectra::dens::{self, build_density, convolve_self, fisher_info, moments};
use clt_spectra::exact::{self, efron_stein, verify_two_level};
use clt_spectra::spect::{self, build_kernel, gram_matrix, trace_t};
use clt_spectra::{DiscretePMF, DistributionSpec, Error, GridConfig};

const SCHEMA: &str = "clt-spectra/1";

#[derive(Parser)]
#[command(
    name = "clt-spectra",
    version,
    about = "Spectra of conditional expectations for i.i.d. sums"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Grid nodes for the base law.
    #[arg(long, global = true, default_value_t = 1024)]
    nodes: usize,
    /// Grid half-width in units of σ√n.
    #[arg(long, global = true, default_value_t = 12.0)]
    half_width: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SpecArg {
    /// Law of one summand, e.g. `gaussian:sigma=1`, `gamma:beta=4`, `discrete:0=0.5,1=0.5`, `file:path`.
    #[arg(long)]
    spec: String,
}

#[derive(Subcommand)]
enum Command {
    /// Grid density of S_n with moments and Fisher information.
    Density {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 1)]
        n: usize,
    },
    /// Leading eigenvalues and eigenfunctions of C*C for (S_m, S_n).
    Spectrum {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Number of eigenpairs kept.
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Exact finite-support computation (discrete laws only).
        #[arg(long)]
        exact: bool,
    },
    /// Θ^(n,m) = m/(n λ₂) − 1.
    Theta {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long)]
        exact: bool,
    },
    /// Trace T_n and the χ² divergence T_n − 1, optionally after Gaussian smoothing.
    Trace {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Fisher-information and Θ bounds at one n.
    Bounds {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        exact: bool,
    },
    /// (1 + (n−1)Θ^(2)) J_st(U_n) for n = 1..=n_max.
    Monotonicity {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 4)]
        n_max: usize,
    },
    /// Every check; exit status 2 if any inequality fails.
    VerifyAll {
        #[arg(long, default_value = "gamma:beta=4")]
        spec: String,
        #[arg(long, default_value_t = 4)]
        n_max: usize,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
    },
    /// Analytic Θ, eigenvalues and J_st for Gaussian and gamma laws.
    ClosedForm {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 6)]
        k: usize,
    },
    /// Efron–Stein decomposition of a polynomial h(S_k) under a discrete law.
    EfronStein {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Polynomial coefficients c0,c1,c2,… of h(s) = Σ c_j s^j.
        #[arg(
            long,
            default_value = "0,0,1",
            value_delimiter = ',',
            allow_hyphen_values = true
        )]
        h: Vec<f64>,
        /// Also check the two-level inequality at this l.
        #[arg(long)]
        l: Option<usize>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Compute(Error),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(s) => write!(f, "{s}"),
            Failure::Compute(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(threads) = std::env::var("CLT_SPECTRA_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

struct Output<'a> {
    common: &'a Common,
}

impl Output<'_> {
    fn write(&self, text: &str) -> CliResult<()> {
        match &self.common.output {
            Some(path) => {
                let mut f = BufWriter::new(File::create(path)?);
                f.write_all(text.as_bytes())?;
                f.flush()?;
            }
            None => {
                let mut out = io::stdout().lock();
                out.write_all(text.as_bytes())?;
            }
        }
        Ok(())
    }

    fn json(&self, value: &impl Serialize) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.into()))?;
        text.push('\n');
        self.write(&text)
    }
}

fn parse_spec(raw: &str) -> CliResult<DistributionSpec> {
    Ok(raw.parse()?)
}

fn grid(common: &Common) -> CliResult<GridConfig> {
    let cfg = GridConfig::default()
        .with_nodes(common.nodes)
        .with_half_width(common.half_width);
    cfg.validate()?;
    Ok(cfg)
}

fn pmf(spec: &DistributionSpec) -> CliResult<DiscretePMF> {
    Ok(DiscretePMF::from_spec(spec)?)
}

fn csv_num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

fn json_num(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(csv_num(v))
    }
}

fn opt(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Reports as CSV (`name,n,m,lhs,rhs,slack,pass`) or versioned JSON.
fn emit_table(reports: &[BoundReport], format: Format) -> CliResult<String> {
    if reports.is_empty() {
        return Err(Failure::Usage("no reports to emit".into()));
    }
    Ok(match format {
        Format::Csv => {
            let mut s = String::from("name,n,m,lhs,rhs,slack,pass\n");
            for r in reports {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.name,
                    opt(r.context.n),
                    opt(r.context.m),
                    csv_num(r.lhs.value),
                    csv_num(r.rhs.value),
                    csv_num(r.slack),
                    r.pass
                ));
            }
            s
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&json!({"schema": SCHEMA, "reports": reports}))
                .map_err(|e| Failure::Io(e.into()))?;
            s.push('\n');
            s
        }
    })
}

fn run(cli: &Cli) -> CliResult<ExitCode> {
    let common = &cli.common;
    let out = Output { common };
    let cfg = grid(common)?;
    match &cli.command {
        Command::Density { spec, n } => {
            let spec = parse_spec(&spec.spec)?;
            let base = build_density(&spec, &cfg, *n)?;
            let d = if *n > 1 {
                convolve_self(&base, *n, &cfg)?
            } else {
                base
            };
            match common.format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    d.write_two_columns(&mut buf)?;
                    out.write(&String::from_utf8_lossy(&buf))?;
                }
                Format::Json => {
                    let fisher = fisher_info(&d, &cfg);
                    if let Err(e) = &fisher {
                        eprintln!("warning: {e}");
                    }
                    out.json(&json!({
                        "schema": SCHEMA,
                        "spec": spec.to_string(),
                        "n": n,
                        "start": d.start(),
                        "step": d.step(),
                        "truncated_mass": d.truncated_mass(),
                        "truncation_warning": d.truncation_warning(),
                        "moments": moments(&d, 4)?,
                        "fisher": fisher.ok(),
                        "values": d.values(),
                    }))?;
                }
            }
        }
        Command::Spectrum { spec, n, m, k, exact } => {
            let spec = parse_spec(&spec.spec)?;
            let sp = if *exact {
                exact::exact_spectrum(&pmf(&spec)?, *n, *m)?
            } else {
                let base = build_density(&spec, &cfg, 1)?;
                spect::spectrum(&gram_matrix(&build_kernel(&base, *n, *m, &cfg)?), *k)?
            };
            match common.format {
                Format::Csv => out.write(&sp.eigenfunctions_csv())?,
                Format::Json => out.json(&json!({"schema": SCHEMA, "spectrum": sp}))?,
            }
        }
        Command::Theta { spec, n, m, exact } => {
            let spec = parse_spec(&spec.spec)?;
            let t = if *exact {
                exact::exact_theta(&pmf(&spec)?, *n, *m)?
            } else {
                spect::theta(&build_density(&spec, &cfg, 1)?, *n, *m, &cfg)?
            };
            if t.theta.is_infinite() {
                eprintln!("warning: no non-trivial eigenvalue above 1e-12; theta is +inf");
            }
            match common.format {
                Format::Csv => out.write(&format!(
                    "n,m,theta,lambda2\n{},{},{},{}\n",
                    t.n,
                    t.m,
                    csv_num(t.theta),
                    t.lambda2
                ))?,
                Format::Json => out.json(&json!({"schema": SCHEMA, "theta": t}))?,
            }
        }
        Command::Trace { spec, n, m, delta } => {
            let spec = parse_spec(&spec.spec)?;
            let mut base = build_density(&spec, &cfg, 1)?;
            if let Some(delta) = delta {
                base = dens::gaussian_regularize(&base, *delta, &cfg)?;
                let factor = base.len().div_ceil(cfg.node_count);
                if factor > 1 {
                    base = base.subsampled(factor)?;
                }
            }
            let tr = trace_t(&build_kernel(&base, *n, *m, &cfg)?, &cfg);
            if tr.lower_bound_only {
                eprintln!(
                    "warning: masked mass {:e}; trace is a lower bound",
                    tr.masked_mass
                );
            }
            match common.format {
                Format::Csv => out.write(&format!(
                    "n,m,t,chi2,masked_mass\n{n},{m},{},{},{}\n",
                    tr.t, tr.chi2, tr.masked_mass
                ))?,
                Format::Json => out.json(&json!({"schema": SCHEMA, "n": n, "m": m, "trace": tr}))?,
            }
        }
        Command::Bounds { spec, n, exact } => {
            let spec = parse_spec(&spec.spec)?;
            let reports = if *exact {
                bounds::exact_bound_reports(&pmf(&spec)?, *n)?
            } else {
                let (reports, skipped) = bounds::bound_reports(&spec, *n, &cfg)?;
                if let Some(reason) = skipped {
                    eprintln!("skipped Fisher bounds: {reason}");
                }
                reports
            };
            out.write(&emit_table(&reports, common.format)?)?;
            if reports.iter().any(|r| !r.pass) {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Monotonicity { spec, n_max } => {
            let spec = parse_spec(&spec.spec)?;
            let base = build_density(&spec, &cfg, 1)?;
            let theta2 = spect::theta(&base, 2, 1, &cfg)?.theta;
            let seq = bounds::monotonicity_sequence(&base, theta2, *n_max, &cfg)?;
            match common.format {
                Format::Csv => {
                    let mut s = String::from("n,jst,product\n");
                    for e in &seq.entries {
                        s.push_str(&format!("{},{},{}\n", e.n, e.jst, e.product));
                    }
                    out.write(&s)?;
                }
                Format::Json => out.json(&json!({"schema": SCHEMA, "monotonicity": seq}))?,
            }
            if !seq.non_increasing {
                return Ok(ExitCode::from(2));
            }
        }
        Command::VerifyAll { spec, n_max, delta } => {
            let mut vc = VerifyConfig::new(parse_spec(spec)?);
            vc.grid = cfg;
            vc.n_max = *n_max;
            vc.delta = *delta;
            vc.seed = common.seed;
            let outcome = bounds::verify_all(&vc)?;
            match common.format {
                Format::Csv => out.write(&emit_table(&outcome.reports, Format::Csv)?)?,
                Format::Json => {
                    if outcome.reports.is_empty() {
                        return Err(Failure::Usage("no reports to emit".into()));
                    }
                    out.json(&json!({
                        "schema": SCHEMA,
                        "reports": outcome.reports,
                        "negative_control": outcome.negative_control,
                        "skipped": outcome.skipped,
                        "all_pass": outcome.all_pass(),
                    }))?
                }
            }
            for s in &outcome.skipped {
                eprintln!("skipped {s}");
            }
            if !outcome.all_pass() {
                for r in outcome.failures() {
                    eprintln!(
                        "FAIL {} n={} m={} slack={:e}",
                        r.name,
                        opt(r.context.n),
                        opt(r.context.m),
                        r.slack
                    );
                }
                if outcome.negative_control.pass {
                    eprintln!("FAIL negative control was not detected");
                }
                return Ok(ExitCode::from(2));
            }
        }
        Command::ClosedForm { spec, n, k } => {
            let spec = parse_spec(&spec.spec)?;
            let nn = u32::try_from(*n).map_err(|_| Failure::Usage("n too large".into()))?;
            let lambdas: Vec<f64> = (0..*k as u32)
                .map(|j| closed_lambda(&spec, nn, j))
                .collect::<Result<_, _>>()?;
            let theta = closed_theta(&spec, nn)?;
            let jst = match &spec {
                DistributionSpec::Gaussian { .. } => Some(0.0),
                DistributionSpec::Gamma { beta, .. } => Some(gamma_jst(*beta)),
                _ => None,
            };
            match common.format {
                Format::Csv => {
                    let mut s = String::from("k,lambda\n");
                    for (j, l) in lambdas.iter().enumerate() {
                        s.push_str(&format!("{j},{l}\n"));
                    }
                    out.write(&s)?;
                }
                Format::Json => out.json(&json!({
                    "schema": SCHEMA,
                    "n": n,
                    "eigenvalues": lambdas,
                    "theta": theta,
                    "jst": jst.map(json_num),
                }))?,
            }
        }
        Command::EfronStein { spec, k, h, l } => {
            let spec = parse_spec(&spec.spec)?;
            let p = pmf(&spec)?;
            let coeffs = h.clone();
            let poly = move |s: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c);
            let es = efron_stein(&poly, &p, *k)?;
            let two_level = l.map(|l| verify_two_level(&poly, &p, *k, l)).transpose()?;
            match common.format {
                Format::Csv => {
                    let mut s = String::from("r,variance\n");
                    for (r, v) in es.component_variances.iter().enumerate() {
                        s.push_str(&format!("{},{v}\n", r + 1));
                    }
                    out.write(&s)?;
                }
                Format::Json => {
                    out.json(&json!({"schema": SCHEMA, "decomposition": es, "two_level": two_level}))?
                }
            }
            if two_level.is_some_and(|r| !r.pass) {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
