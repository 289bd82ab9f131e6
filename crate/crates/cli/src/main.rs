//! `mrgark` command-line tool: catalog listing, scheme analysis,
//! convergence studies and fixed-step integration.

mod text;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mrgark::analysis::{analyze, AnalysisOptions};
use mrgark::io::{flat_as_scheme, parse_scheme, scheme_to_json};
use mrgark::monotonicity::monotonicity_report;
use mrgark::order::observed_order;
use mrgark::problems::problem;
use mrgark::schemes::{claims, make_id, Claims, CATALOG};
use mrgark::stability::{stability_report, Partitioning};
use mrgark::{Error, Execution, Scheme, SchemeId, SolverConfig};

/// Radius claims are compared to this absolute tolerance.
const RADIUS_CLAIM_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "mrgark", version, about = "Multirate GARK schemes: analysis and integration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the scheme catalog.
    List {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Full analysis of one scheme, compared against its catalog claims.
    Check(CheckArgs),
    /// Empirical convergence order over a list of macro-step sizes.
    Converge(ConvergeArgs),
    /// Algebraic stability report.
    Stability(StabilityArgs),
    /// Absolute monotonicity report.
    Monotonicity(MonotonicityArgs),
    /// Fixed-step integration of a registered problem.
    Integrate(IntegrateArgs),
    /// Write a scheme as a JSON scheme file.
    Dump {
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SchemeArgs {
    /// Catalog name (`name` or `name:variant`) or path to a JSON scheme file.
    #[arg(long)]
    scheme: String,
    /// Number of fast micro-steps per macro-step.
    #[arg(long = "M", default_value_t = 1)]
    m: usize,
}

/// Scheme given either positionally or with `--scheme`.
#[derive(Args)]
struct LooseSchemeArgs {
    #[arg(value_name = "SCHEME", required_unless_present = "scheme")]
    positional: Option<String>,
    #[arg(long, conflicts_with = "positional")]
    scheme: Option<String>,
    #[arg(long = "M", default_value_t = 1)]
    m: usize,
}

impl LooseSchemeArgs {
    fn resolve(&self) -> SchemeArgs {
        let scheme = self.scheme.clone().or_else(|| self.positional.clone()).unwrap_or_default();
        SchemeArgs { scheme, m: self.m }
    }
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long, value_enum, default_value_t = Split::Additive)]
    partitioning: Split,
    /// Coercivity constant of the problem, for the stability step bound.
    #[arg(long)]
    mu: Option<f64>,
    /// Forward Euler monotonicity step, for the monotonicity step bound.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long)]
    problem: String,
    /// Comma-separated macro-step sizes.
    #[arg(long = "H", value_delimiter = ',', required = true)]
    steps: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Fail when the fitted slope differs from this order by more than the slope tolerance.
    #[arg(long)]
    expect_order: Option<f64>,
    #[arg(long, default_value_t = 0.25)]
    slope_tol: f64,
}

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    scheme: LooseSchemeArgs,
    #[arg(long, value_enum, default_value_t = Split::Additive)]
    partitioning: Split,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct MonotonicityArgs {
    #[command(flatten)]
    scheme: LooseSchemeArgs,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct IntegrateArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long)]
    problem: String,
    #[arg(long = "H")]
    step: f64,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Additive,
    Component,
}

impl From<Split> for Partitioning {
    fn from(s: Split) -> Self {
        match s {
            Split::Additive => Partitioning::Additive,
            Split::Component => Partitioning::Component,
        }
    }
}

/// Failure with the machine-readable code and the process exit status.
struct Failure {
    code: String,
    message: String,
    status: u8,
}

impl Failure {
    fn usage(code: &str, message: impl Into<String>) -> Self {
        Failure { code: code.into(), message: message.into(), status: 2 }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        // Errors caused by what the user typed or supplied exit with 2,
        // numerical failures with 1.
        let status = match &e {
            Error::UnknownScheme(_) | Error::UnknownProblem(_) | Error::Format(_) | Error::InvalidGrid(_) | Error::Structural(_) => 2,
            _ => 1,
        };
        Failure { code: e.code().into(), message: e.to_string(), status }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// A resolved scheme and the catalog id it came from, if any.
struct Loaded {
    scheme: Scheme,
    id: Option<SchemeId>,
    label: String,
}

fn load(args: &SchemeArgs) -> CliResult<Loaded> {
    let path = Path::new(&args.scheme);
    if path.is_file() || args.scheme.ends_with(".json") {
        let json = fs::read_to_string(path)
            .map_err(|e| Failure::usage("Io", format!("cannot read {}: {e}", path.display())))?;
        let scheme = parse_scheme(&json)?;
        return Ok(Loaded { scheme: Scheme::Multirate(scheme), id: None, label: args.scheme.clone() });
    }
    let id = SchemeId::new(&args.scheme, args.m)?;
    let scheme = make_id(&id)?;
    Ok(Loaded { scheme, label: id.to_string(), id: Some(id) })
}

fn analysis_options() -> CliResult<AnalysisOptions> {
    let mut opts = AnalysisOptions::default();
    if let Ok(raw) = std::env::var("MRGARK_TOL") {
        let tol: f64 = raw
            .trim()
            .parse()
            .map_err(|_| Failure::usage("Usage", format!("MRGARK_TOL must be a number, got '{raw}'")))?;
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(Failure::usage("Usage", format!("MRGARK_TOL must be positive, got {tol}")));
        }
        opts.tolerance = tol;
    }
    Ok(opts)
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn emit(value: &Value, format: Format, output: Option<&Path>) -> CliResult<()> {
    let body = match format {
        Format::Json => serde_json::to_string_pretty(value).expect("reports serialize") + "\n",
        _ => text::render(value),
    };
    match output {
        Some(p) => fs::write(p, body).map_err(|e| Failure::usage("Io", format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn mismatches(claimed: &Claims, observed: &Value) -> Vec<Value> {
    let mut out = Vec::new();
    let mut compare = |property: &str, claim: Value, seen: &Value, agree: bool| {
        if !agree {
            out.push(json!({ "property": property, "claimed": claim, "observed": seen }));
        }
    };
    if let Some(p) = claimed.order {
        let seen = &observed["order"];
        compare("order", json!(p), seen, seen.as_u64() == Some(p as u64));
    }
    for (property, claim) in [
        ("internally_consistent", claimed.internally_consistent),
        ("stability_decoupled", claimed.stability_decoupled),
        ("base_pair_stable", claimed.base_pair_stable),
    ] {
        if let Some(c) = claim {
            let seen = &observed[property];
            compare(property, json!(c), seen, seen.as_bool() == Some(c));
        }
    }
    if let Some(r) = claimed.radius {
        let seen = &observed["radius"];
        let agree = seen.as_f64().is_some_and(|x| (x - r).abs() <= RADIUS_CLAIM_TOL);
        compare("radius", json!(r), seen, agree);
    }
    out
}

fn check(args: &CheckArgs) -> CliResult<u8> {
    let loaded = load(&args.scheme)?;
    let opts = AnalysisOptions {
        partitioning: args.partitioning.into(),
        mu: args.mu,
        rho: args.rho,
        ..analysis_options()?
    };
    let report = analyze(&loaded.scheme, &opts)?;
    let summary = json!({
        "scheme": loaded.label,
        "M": report.ratio,
        "order": report.order.classified_order,
        "internally_consistent": report.internal_consistency.map(|c| c.consistent),
        "stability_decoupled": report.stability.stability_decoupled,
        "algebraically_stable": report.stability.algebraically_stable,
        "base_pair_stable": report.base_pair_stable,
        "radius": report.monotonicity.radius,
    });
    let claimed = loaded.id.as_ref().map(claims);
    let found = claimed.as_ref().map(|c| mismatches(c, &summary)).unwrap_or_default();
    let status = if found.is_empty() { 0 } else { 1 };
    let value = json!({
        "summary": summary,
        "claims": claimed,
        "mismatches": found,
        "report": to_value(&report),
    });
    emit(&value, args.format, args.output.as_deref())?;
    Ok(status)
}

fn converge(args: &ConvergeArgs) -> CliResult<u8> {
    let loaded = load(&args.scheme)?;
    let ivp = problem(&args.problem, loaded.scheme.flat().ratio())?;
    let study = observed_order(
        loaded.scheme.stepper(),
        &ivp,
        &args.steps,
        args.t_end,
        &SolverConfig::default(),
        Execution::default(),
    )?;
    match args.format {
        Format::Csv => {
            let mut body = String::from("H,error\n");
            for (h, e) in study.steps.iter().zip(&study.errors) {
                body.push_str(&format!("{h},{e:e}\n"));
            }
            print!("{body}");
            eprintln!("slope: {:.4}", study.slope);
        }
        f => emit(&to_value(&study), f, None)?,
    }
    if let Some(p) = args.expect_order {
        if (study.slope - p).abs() > args.slope_tol {
            let message = format!("observed slope {:.4} differs from {p} by more than {}", study.slope, args.slope_tol);
            report_failure(&Failure { code: "OrderMismatch".into(), message, status: 1 });
            return Ok(1);
        }
    }
    Ok(0)
}

fn stability(args: &StabilityArgs) -> CliResult<u8> {
    let loaded = load(&args.scheme.resolve())?;
    let report = stability_report(&loaded.scheme.flat(), args.partitioning.into(), args.mu, mrgark::analysis::WEIGHT_R_MAX);
    emit(&to_value(&report), args.format, None)?;
    Ok(0)
}

fn monotonicity(args: &MonotonicityArgs) -> CliResult<u8> {
    let loaded = load(&args.scheme.resolve())?;
    let report = monotonicity_report(&loaded.scheme.flat(), loaded.scheme.multirate(), args.rho)?;
    emit(&to_value(&report), args.format, None)?;
    Ok(0)
}

fn integrate(args: &IntegrateArgs) -> CliResult<u8> {
    let loaded = load(&args.scheme)?;
    let ivp = problem(&args.problem, loaded.scheme.flat().ratio())?;
    let traj = mrgark::integrate(loaded.scheme.stepper(), &ivp, args.t_end, args.step, &SolverConfig::default())
        .map_err(|f| Failure::from(f.error))?;
    match args.format {
        Format::Json => emit(&traj.to_json(), Format::Json, None)?,
        _ => print!("{}", traj.to_csv()),
    }
    Ok(0)
}

fn dump(scheme: &SchemeArgs, output: Option<&Path>) -> CliResult<u8> {
    let loaded = load(scheme)?;
    let json = match &loaded.scheme {
        Scheme::Multirate(s) => scheme_to_json(s),
        Scheme::Flat(f) => scheme_to_json(&flat_as_scheme(f)?),
    } + "\n";
    match output {
        Some(p) => fs::write(p, json).map_err(|e| Failure::usage("Io", format!("cannot write {}: {e}", p.display())))?,
        None => print!("{json}"),
    }
    Ok(0)
}

fn list(format: Format) -> CliResult<u8> {
    if format == Format::Json {
        emit(&to_value(&CATALOG), Format::Json, None)?;
        return Ok(0);
    }
    for entry in CATALOG {
        let name = if entry.variants.is_empty() {
            entry.name.to_string()
        } else {
            format!("{}[:{}]", entry.name, entry.variants.join("|"))
        };
        println!("{name:<40} {}", entry.summary);
    }
    Ok(0)
}

fn report_failure(f: &Failure) {
    eprintln!("{}", json!({ "code": f.code, "message": f.message }));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::from(if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 });
            }
            report_failure(&Failure::usage("Usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::List { format } => list(*format),
        Command::Check(a) => check(a),
        Command::Converge(a) => converge(a),
        Command::Stability(a) => stability(a),
        Command::Monotonicity(a) => monotonicity(a),
        Command::Integrate(a) => integrate(a),
        Command::Dump { scheme, output } => dump(scheme, output.as_deref()),
    };
    match result {
        Ok(status) => ExitCode::from(status),
        Err(f) => {
            report_failure(&f);
            ExitCode::from(f.status)
        }
    }
}
