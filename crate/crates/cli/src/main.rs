//! `partialk` command-line interface.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use partialk::envelopes::{poisson_null_envelope, EnvelopeConfig, NullKind};
use partialk::oracle::ClusterModelSpec;
use partialk::patterns::{load_pattern_csv, write_pattern_csv};
use partialk::pipeline::{estimate, kmax_diagnostic, oracle_check, oracle_rows_csv, OracleModel};
use partialk::{sim_scenario, Error, EstimationConfig, RadiiGrid, Route, ScenarioSpec, StatKind, StatRequest, Window};

#[derive(Parser)]
#[command(name = "partialk", version, about = "Partial K, L and pair-correlation functions of multitype point patterns")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "PARTIALK_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a named scenario and write the pattern CSV.
    Simulate(SimulateArgs),
    /// Estimate a (partial) summary statistic from a pattern CSV.
    Estimate(EstimateArgs),
    /// Observed statistic with a Monte-Carlo global envelope.
    Envelope(EnvelopeArgs),
    /// Compare the inversion of exact model spectra with the quadrature oracle.
    OracleCheck(OracleArgs),
    /// Re-estimate with the highest wavenumber doubled and report the change.
    KmaxDiagnostic(EstimateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: String,
    /// File of `key = value` parameter overrides.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Single parameter override, `key=value` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Window bounds `x0,x1,y0,y1` (default `0,300,0,300`).
    #[arg(long)]
    window: Option<String>,
    /// Output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Estimation settings; each flag overrides the matching config-file key.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of sine tapers M.
    #[arg(long)]
    tapers: Option<String>,
    /// Highest wavenumber, one value or one per axis (comma separated).
    #[arg(long)]
    kmax: Option<String>,
    /// Wavenumber grid spacing, one value or one per axis.
    #[arg(long)]
    spacing: Option<String>,
    /// Radial node spacing of the rotational average.
    #[arg(long)]
    radial_spacing: Option<String>,
    /// Largest radial wavenumber of the rotational average.
    #[arg(long)]
    radial_max: Option<String>,
    /// Box kernel width of the rotational average.
    #[arg(long)]
    bandwidth: Option<String>,
    /// `direct` or `rotational`.
    #[arg(long)]
    route: Option<String>,
    /// `true` or `false`.
    #[arg(long)]
    debias: Option<String>,
    /// Radii as `start:stop:count`.
    #[arg(long)]
    radii: Option<String>,
    /// `nufft` or `direct`.
    #[arg(long)]
    dft: Option<String>,
    /// Largest allowed number of grid nodes.
    #[arg(long)]
    grid_cap: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<EstimationConfig, Error> {
        let mut cfg = EstimationConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_text(&fs::read_to_string(path)?)?;
        }
        let flags = [
            ("tapers", &self.tapers),
            ("kmax", &self.kmax),
            ("spacing", &self.spacing),
            ("radial_spacing", &self.radial_spacing),
            ("radial_max", &self.radial_max),
            ("bandwidth", &self.bandwidth),
            ("route", &self.route),
            ("debias", &self.debias),
            ("radii", &self.radii),
            ("dft", &self.dft),
            ("grid_cap", &self.grid_cap),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

#[derive(Args, Clone)]
struct EstimateArgs {
    /// Pattern CSV.
    #[arg(long)]
    pattern: PathBuf,
    /// Window bounds overriding the CSV comment.
    #[arg(long)]
    window: Option<String>,
    /// `X` or `X,Y`.
    #[arg(long)]
    targets: String,
    /// Comma-separated covariate types (empty for a plain statistic).
    #[arg(long, default_value = "")]
    covariates: String,
    /// `C`, `K`, `L` or `pcf`.
    #[arg(long, default_value = "L")]
    stat: String,
    #[command(flatten)]
    config: ConfigArgs,
    /// Curve CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run report (stderr when absent).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EnvelopeArgs {
    #[command(flatten)]
    estimate: EstimateArgs,
    /// `poisson` (marginal) or `shift` (random toroidal shift of the second type).
    #[arg(long, default_value = "poisson")]
    null: String,
    #[arg(long, default_value_t = 199)]
    nsim: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct OracleArgs {
    /// `thomas`, `cluster-partial` or `cox-squared`.
    #[arg(long, default_value = "thomas")]
    model: String,
    /// Radii as `start:stop:count`.
    #[arg(long = "r", default_value = "1:20:20")]
    radii: String,
    #[arg(long, default_value = "K")]
    stat: String,
    #[arg(long, default_value_t = 0.5)]
    kmax: f64,
    #[arg(long, default_value = "rotational")]
    route: String,
    /// Window bounds fixing the wavenumber spacing.
    #[arg(long, default_value = "0,300,0,300")]
    window: String,
    #[arg(long, default_value_t = 0.01)]
    lambda_z: f64,
    /// Mean cluster size of X (and Y).
    #[arg(long, default_value_t = 3.0)]
    mu: f64,
    /// Cluster offset standard deviation of X (and Y).
    #[arg(long, default_value_t = 1.5)]
    sigma: f64,
    /// Kernel scale of the Cox model.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn parse_window(text: Option<&str>) -> Result<Option<Window>, Error> {
    text.map(Window::parse_bounds).transpose()
}

fn load(args: &EstimateArgs) -> Result<(partialk::MultiTypePattern, StatRequest, EstimationConfig), Error> {
    let pattern = load_pattern_csv(&args.pattern, parse_window(args.window.as_deref())?, None)?;
    let kind: StatKind = args.stat.parse()?;
    let req = StatRequest::parse(&args.targets, &args.covariates, kind)?;
    Ok((pattern, req, args.config.resolve()?))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Error> {
    let mut spec = ScenarioSpec::new(&args.scenario, args.seed)?;
    if let Some(w) = parse_window(args.window.as_deref())? {
        spec = spec.with_window(w);
    }
    if let Some(path) = &args.params {
        spec.apply_params_text(&fs::read_to_string(path)?)?;
    }
    for kv in &args.set {
        spec.apply_params_text(kv)?;
    }
    let pattern = sim_scenario(&spec)?;
    let comments = spec.comment_lines();
    match &args.out {
        Some(p) => write_pattern_csv(&pattern, p, &comments),
        None => emit(None, &partialk::patterns::format_pattern_csv(&pattern, &comments)),
    }
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), Error> {
    let (pattern, req, cfg) = load(args)?;
    let (curve, report) = estimate(&pattern, &req, &cfg)?;
    emit(args.out.as_deref(), &curve.to_csv())?;
    match &args.report {
        Some(p) => fs::write(p, report.to_text())?,
        None => eprint!("{}", report.to_text()),
    }
    Ok(())
}

fn cmd_envelope(args: &EnvelopeArgs) -> Result<(), Error> {
    let (pattern, req, cfg) = load(&args.estimate)?;
    let null: NullKind = args.null.parse()?;
    let env = EnvelopeConfig { n_sim: args.nsim, alpha: args.alpha, null, seed: args.seed };
    let curve = poisson_null_envelope(&pattern, &req, &cfg, &env)?;
    emit(args.estimate.out.as_deref(), &curve.to_csv())
}

fn cmd_oracle_check(args: &OracleArgs) -> Result<(), Error> {
    let window = Window::parse_bounds(&args.window)?;
    let d = window.dim();
    let model = match args.model.as_str() {
        "thomas" => OracleModel::Thomas { lambda_z: args.lambda_z, mu: args.mu, sigma: args.sigma },
        "cluster-partial" => {
            OracleModel::ClusterPartial(ClusterModelSpec::new(args.lambda_z, args.mu, args.sigma, args.mu, args.sigma, d)?)
        }
        "cox-squared" => OracleModel::CoxSquared { lambda_z: args.lambda_z, a: args.a },
        other => {
            return Err(Error::Config(format!(
                "unknown model '{other}' (valid: thomas, cluster-partial, cox-squared)"
            )))
        }
    };
    let kind: StatKind = args.stat.parse()?;
    let route: Route = args.route.parse()?;
    let radii = RadiiGrid::parse(&args.radii)?;
    let rows = oracle_check(model, kind, &radii, &window, args.kmax, route)?;
    let worst = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    emit(args.out.as_deref(), &oracle_rows_csv(&rows))?;
    eprintln!("max relative error = {worst:e}");
    Ok(())
}

fn cmd_kmax_diagnostic(args: &EstimateArgs) -> Result<(), Error> {
    let (pattern, req, cfg) = load(args)?;
    let diag = kmax_diagnostic(&pattern, &req, &cfg)?;
    let kmax: Vec<String> = diag.kmax.iter().map(|k| k.to_string()).collect();
    let mut text = String::from("r,value_kmax,value_2kmax,abs_change\n");
    for (i, r) in diag.base.radii.values().iter().enumerate() {
        let (a, b) = (diag.base.values[i], diag.doubled.values[i]);
        text.push_str(&format!("{r},{a},{b},{}\n", (a - b).abs()));
    }
    emit(args.out.as_deref(), &text)?;
    eprintln!(
        "kmax = {}; max change when doubled = {}; {}",
        kmax.join(","),
        diag.max_abs_change,
        if diag.converged { "converged" } else { "not converged: increase kmax" }
    );
    Ok(())
}

/// Stable exit codes: 2 usage or input errors, 3 unsupported statistic, 4 numerical failure.
fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::UnsupportedNull(_) => 3,
        Error::Singular { .. } | Error::Symmetry { .. } | Error::Oracle(_) => 4,
        _ => 2,
    }
}

fn init_threads(threads: Option<usize>) -> Result<(), Error> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn config_threads(cli: &Cli) -> Option<usize> {
    // a `threads` key in the estimation config applies when no flag or env var is set
    let args = match &cli.command {
        Command::Estimate(a) | Command::KmaxDiagnostic(a) => a,
        Command::Envelope(e) => &e.estimate,
        _ => return None,
    };
    args.config.resolve().ok().and_then(|c| c.threads)
}

fn run(cli: &Cli) -> Result<(), Error> {
    init_threads(cli.threads.or_else(|| config_threads(cli)))?;
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a).map_err(|e| e.in_stage("simulate")),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Envelope(a) => cmd_envelope(a),
        Command::OracleCheck(a) => cmd_oracle_check(a),
        Command::KmaxDiagnostic(a) => cmd_kmax_diagnostic(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
