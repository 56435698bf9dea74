//! Command-line front end: `ssm <check|expand|correct|verify|sweep|backbone>`.
//!
//! Every subcommand loads and normalizes the model, runs the assumption
//! checks, and writes JSON or CSV carrying the model hash and the run
//! configuration. Exit codes: 0 success, 1 invalid input or failed
//! assumption, 2 numerical failure, 3 input/output failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::correction::{
    contraction_estimate, make_problem, solve_picard, solve_with_refinement, CorrectionField, CorrectionOptions,
    Solved, DEFAULT_DELTA, DEFAULT_K_THETA, DEFAULT_MR,
};
use crate::error::{Result, SsmError};
use crate::expansion::expand_with;
use crate::model::normalize::{normalize_model, ScaleReport};
use crate::model::{EpsMode, PolyVectorField};
use crate::spectral::{analyze, check_assumptions_seeded, AssumptionReport, SpectralData, DEFAULT_RES_MARGIN, DEFAULT_SIGMA_CAP};
use crate::verify::{backbone, eps_sweep, verify_report, VerifyOptions, DEFAULT_EPS_LIST};

/// Points of the default ε grid used by `check`.
const CHECK_GRID_POINTS: usize = 5;

#[derive(Debug, Parser, Serialize)]
#[command(name = "ssm", version, about = "Spectral submanifolds of damped polynomial vector fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads (falls back to SSM_THREADS, then to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for randomized sampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Progress messages on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Record wall-clock runtimes (outputs are then not reproducible).
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Check the seven hypotheses on the linear part and the conserved quantity.
    Check(CheckArgs),
    /// Solve the Fourier–Taylor expansion through a given order.
    Expand(ExpandArgs),
    /// Compute the tail correction on a disk of radius γ.
    Correct(CorrectArgs),
    /// Run the independent verification tasks.
    Verify(VerifyArgs),
    /// Coefficient distance to ε = 0 over a list of ε.
    ///
    /// CSV columns: eps, distance (max coefficient difference to ε = 0),
    /// normalized_slope ((distance/ε)/(distance/ε)_min, empty at ε = 0).
    /// Summary lines starting with '#' precede the header.
    Sweep(SweepArgs),
    /// Amplitude, frequency and decay rate along the manifold.
    ///
    /// CSV columns: r, amplitude (max over θ of the first state component),
    /// frequency (T(r)), decay (R(r)/r). Provenance lines starting with '#'
    /// precede the header.
    Backbone(BackboneArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct CheckArgs {
    pub model: PathBuf,
    /// ε values (normalized units) at which the spectrum is checked.
    #[arg(long, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
    /// Minimum distance of frequency ratios to the integers.
    #[arg(long, default_value_t = DEFAULT_RES_MARGIN)]
    pub res_margin: f64,
    /// Largest smoothness order σ considered.
    #[arg(long, default_value_t = DEFAULT_SIGMA_CAP)]
    pub sigma_cap: u32,
    /// JSON report path (stdout otherwise).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExpandArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub order: usize,
    /// Damping parameter in normalized units.
    #[arg(long, conflicts_with = "jet", required_unless_present = "jet")]
    pub eps: Option<f64>,
    /// Keep coefficients as jets in ε instead of numbers.
    #[arg(long)]
    pub jet: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Picard,
    Collocation,
    Both,
}

#[derive(Debug, Args, Serialize)]
pub struct CorrectArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub order: usize,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = Method::Collocation)]
    pub method: Method,
    /// Weight of the harmonic index in the contraction norm.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Radial nodes and angular modes, as `Mr,Ktheta`.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub order: usize,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Also solve the correction and estimate its contraction.
    #[arg(long)]
    pub with_correction: bool,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub order: usize,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_EPS_LIST)]
    pub eps_list: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BackboneArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub order: usize,
    #[arg(long)]
    pub eps: f64,
    /// Largest radius of the table.
    #[arg(long)]
    pub rmax: f64,
    /// Number of equispaced radii in (0, rmax].
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    fn model_path(&self) -> &Path {
        match self {
            Command::Check(a) => &a.model,
            Command::Expand(a) => &a.model,
            Command::Correct(a) => &a.model,
            Command::Verify(a) => &a.model,
            Command::Sweep(a) => &a.model,
            Command::Backbone(a) => &a.model,
        }
    }

    fn out(&self) -> Option<&Path> {
        match self {
            Command::Check(a) => a.out.as_deref(),
            Command::Expand(a) => a.out.as_deref(),
            Command::Correct(a) => a.out.as_deref(),
            Command::Verify(a) => a.out.as_deref(),
            Command::Sweep(a) => a.out.as_deref(),
            Command::Backbone(a) => a.out.as_deref(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> SsmError {
    SsmError::InvalidArgument(msg.into())
}

fn check_eps(eps: f64, model: &PolyVectorField) -> Result<()> {
    if !(0.0..=model.eps_max).contains(&eps) {
        return Err(invalid(format!("--eps {eps} outside [0, {}] (normalized units)", model.eps_max)));
    }
    Ok(())
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 {
        return Err(invalid("--order must be at least 1"));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(invalid(format!("--gamma {gamma} outside (0, 1]")));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(invalid(format!("--delta {delta} must be finite and non-negative")));
    }
    Ok(())
}

/// Option checks that need the normalized model; run before any computation.
fn validate(cmd: &Command, model: &PolyVectorField) -> Result<()> {
    match cmd {
        Command::Check(a) => {
            if let Some(g) = &a.eps_grid {
                g.iter().try_for_each(|e| check_eps(*e, model))?;
            }
            if !(a.res_margin >= 0.0 && a.res_margin < 0.5) {
                return Err(invalid("--res-margin must lie in [0, 0.5)"));
            }
            if a.sigma_cap < 2 {
                return Err(invalid("--sigma-cap must be at least 2"));
            }
        }
        Command::Expand(a) => {
            check_order(a.order)?;
            if let Some(e) = a.eps {
                check_eps(e, model)?;
            }
        }
        Command::Correct(a) => {
            check_order(a.order)?;
            check_eps(a.eps, model)?;
            check_gamma(a.gamma)?;
            check_delta(a.delta)?;
            if let Some(g) = &a.grid {
                if g.len() != 2 || g[0] < 4 || g[1] < a.order {
                    return Err(invalid(format!("--grid needs Mr,Ktheta with Mr ≥ 4 and Ktheta ≥ {}", a.order)));
                }
            }
        }
        Command::Verify(a) => {
            check_order(a.order)?;
            check_eps(a.eps, model)?;
            check_gamma(a.gamma)?;
            check_delta(a.delta)?;
        }
        Command::Sweep(a) => {
            check_order(a.order)?;
            if a.eps_list.is_empty() || !a.eps_list.contains(&0.0) {
                return Err(invalid("--eps-list must contain 0"));
            }
            if a.eps_list.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("--eps-list must be strictly increasing"));
            }
            a.eps_list.iter().try_for_each(|e| check_eps(*e, model))?;
        }
        Command::Backbone(a) => {
            check_order(a.order)?;
            check_eps(a.eps, model)?;
            if !(a.rmax > 0.0 && a.rmax.is_finite()) {
                return Err(invalid("--rmax must be positive"));
            }
            if a.points == 0 {
                return Err(invalid("--points must be positive"));
            }
        }
    }
    Ok(())
}

fn configure_threads(cli: &Cli) -> Result<()> {
    let threads = match cli.threads {
        Some(n) => n,
        None => match std::env::var("SSM_THREADS") {
            Ok(s) => s.trim().parse().map_err(|_| invalid(format!("SSM_THREADS={s} is not a thread count")))?,
            Err(_) => 0,
        },
    };
    // The global pool can only be set once per process; later calls keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

struct Context {
    hash: String,
    config: Value,
    scale: ScaleReport,
    model: PolyVectorField,
    spec: SpectralData,
    report: AssumptionReport,
}

impl Context {
    fn provenance(&self) -> Value {
        json!({ "model_sha256": self.hash, "config": self.config, "normalization": self.scale })
    }

    fn document(&self, result: Value) -> String {
        let mut doc = self.provenance();
        doc["result"] = result;
        let mut s = serde_json::to_string_pretty(&doc).expect("serializable document");
        s.push('\n');
        s
    }

    fn csv_preamble(&self) -> String {
        let config = serde_json::to_string(&self.config).expect("serializable config");
        let scale = serde_json::to_string(&self.scale).expect("serializable scale");
        format!("# model_sha256 {}\n# config {config}\n# normalization {scale}\n", self.hash)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn default_check_grid(model: &PolyVectorField) -> Vec<f64> {
    (0..CHECK_GRID_POINTS).map(|i| model.eps_max * i as f64 / (CHECK_GRID_POINTS - 1) as f64).collect()
}

fn prepare(cli: &Cli) -> Result<Context> {
    let path = cli.command.model_path();
    let bytes = std::fs::read(path)?;
    let hash: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let text = String::from_utf8(bytes).map_err(|e| SsmError::Parse(e.to_string()))?;
    let raw = PolyVectorField::from_json(&text)?;
    let (model, scale) = normalize_model(&raw, None)?;
    validate(&cli.command, &model)?;
    let (sigma_cap, grid, margin) = match &cli.command {
        Command::Check(a) => (a.sigma_cap, a.eps_grid.clone().unwrap_or_else(|| default_check_grid(&model)), a.res_margin),
        _ => (DEFAULT_SIGMA_CAP, default_check_grid(&model), DEFAULT_RES_MARGIN),
    };
    let spec = analyze(&model, sigma_cap)?;
    let report = check_assumptions_seeded(&model, &spec, &grid, margin, cli.seed);
    let config = serde_json::to_value(cli).expect("serializable config");
    Ok(Context { hash, config, scale, model, spec, report })
}

fn log(cli: &Cli, msg: &str) {
    if cli.verbose > 0 {
        eprintln!("ssm: {msg}");
    }
}

fn solved_json(s: &Solved, residual: f64) -> Value {
    json!({ "field": s.field.to_json(), "updates": s.updates, "iterations": s.updates.len(), "invariance_residual": residual })
}

fn run_correct(cli: &Cli, ctx: &Context, a: &CorrectArgs) -> Result<Value> {
    let mode = EpsMode::Numeric(a.eps);
    let exp = expand_with(&ctx.model, &ctx.spec, a.order, mode, DEFAULT_RES_MARGIN)?;
    let (m_r, k_theta) = match a.grid.as_deref() {
        Some([m, k]) => (*m, *k),
        _ => (DEFAULT_MR, DEFAULT_K_THETA),
    };
    let opts = CorrectionOptions { m_r, k_theta, ..CorrectionOptions::default() };
    let mut out = serde_json::Map::new();
    let (problem, colloc) = if a.method == Method::Picard {
        (make_problem(&ctx.model, &ctx.spec, &exp, a.gamma, a.eps, opts)?, None)
    } else {
        log(cli, "collocation solve");
        let (problem, solved, residual) = solve_with_refinement(&ctx.model, &ctx.spec, &exp, a.gamma, a.eps, opts)?;
        out.insert("collocation".into(), solved_json(&solved, residual));
        (problem, Some(solved))
    };
    out.insert("grid".into(), json!({ "m_r": problem.opts.m_r, "k_theta": problem.opts.k_theta }));
    out.insert("fhat".into(), serde_json::to_value(&problem.fhat).expect("serializable"));
    if a.method != Method::Collocation {
        log(cli, "Picard solve");
        let picard = solve_picard(&problem, &CorrectionField::zeros(&problem))?;
        let residual = problem.invariance_residual(&picard.field);
        if let Some(s) = &colloc {
            out.insert("agreement".into(), json!(picard.field.sub(&s.field).sup_norm()));
        }
        out.insert("picard".into(), solved_json(&picard, residual));
    }
    log(cli, "contraction estimate");
    let contraction = contraction_estimate(&problem, 6, a.delta)?;
    out.insert("contraction".into(), serde_json::to_value(&contraction).expect("serializable"));
    out.insert("order".into(), json!(a.order));
    out.insert("eps".into(), json!(a.eps));
    out.insert("gamma".into(), json!(a.gamma));
    out.insert("sigma".into(), json!(problem.sigma));
    Ok(Value::Object(out))
}

fn execute(cli: &Cli) -> Result<()> {
    configure_threads(cli)?;
    let ctx = prepare(cli)?;
    if !ctx.report.passed() {
        eprint!("{}", ctx.report.render());
        return Err(SsmError::Assumption("the model violates at least one hypothesis".into()));
    }
    let out = cli.command.out();
    match &cli.command {
        Command::Check(_) => {
            print!("{}", ctx.report.render());
            let json = ctx.document(serde_json::to_value(&ctx.report).expect("serializable"));
            emit(out, &json)?;
        }
        Command::Expand(a) => {
            let mode = match a.eps {
                Some(e) => EpsMode::Numeric(e),
                None => EpsMode::jet(),
            };
            log(cli, &format!("expanding to order {}", a.order));
            let exp = expand_with(&ctx.model, &ctx.spec, a.order, mode, DEFAULT_RES_MARGIN)?;
            let result = json!({
                "order": a.order,
                "mode": match mode { EpsMode::Numeric(_) => "numeric", EpsMode::Jet(_) => "jet" },
                "eps": a.eps,
                "jet_degree": match mode { EpsMode::Jet(d) => Some(d), EpsMode::Numeric(_) => None },
                "aleph": ctx.spec.aleph,
                "sigma": ctx.spec.sigma,
                "coefficients": exp.to_json()?,
            });
            emit(out, &ctx.document(result))?;
        }
        Command::Correct(a) => {
            let result = run_correct(cli, &ctx, a)?;
            emit(out, &ctx.document(result))?;
        }
        Command::Verify(a) => {
            let opts = VerifyOptions { gamma: a.gamma, with_correction: a.with_correction, delta: a.delta, timings: cli.timings };
            log(cli, "verification tasks");
            let report = verify_report(&ctx.model, &ctx.spec, a.order, a.eps, &opts)?;
            emit(out, &ctx.document(serde_json::to_value(&report).expect("serializable")))?;
        }
        Command::Sweep(a) => {
            log(cli, "ε sweep");
            let sweep = eps_sweep(&ctx.model, &ctx.spec, a.order, &a.eps_list)?;
            let mut s = ctx.csv_preamble();
            let _ = writeln!(s, "# monotone {}", sweep.monotone);
            let _ = writeln!(s, "# halving_ratios {}", sweep.halving_ratios.iter().map(|x| sci(*x)).collect::<Vec<_>>().join(","));
            let _ = writeln!(s, "# slope_mismatch {}", sci(sweep.slope_mismatch));
            let _ = writeln!(s, "# continuous {}", sweep.continuous);
            let _ = writeln!(s, "# differentiable {}", sweep.differentiable);
            s.push_str("eps,distance,normalized_slope\n");
            let mut slopes = sweep.normalized_slopes.iter();
            for row in &sweep.rows {
                let slope = if row.eps == 0.0 { String::new() } else { slopes.next().map_or(String::new(), |x| sci(*x)) };
                let _ = writeln!(s, "{},{},{slope}", sci(row.eps), sci(row.distance));
            }
            emit(out, &s)?;
        }
        Command::Backbone(a) => {
            let exp = expand_with(&ctx.model, &ctx.spec, a.order, EpsMode::Numeric(a.eps), DEFAULT_RES_MARGIN)?;
            let radii: Vec<f64> = (1..=a.points).map(|i| a.rmax * i as f64 / a.points as f64).collect();
            let mut s = ctx.csv_preamble();
            s.push_str("r,amplitude,frequency,decay\n");
            for row in backbone(&exp, &radii) {
                let _ = writeln!(s, "{},{},{},{}", sci(row.r), sci(row.amplitude), sci(row.frequency), sci(row.decay));
            }
            emit(out, &s)?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the subcommand; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ssm: {e}");
            e.exit_code()
        }
    }
}
