//! `multiiso`: validate, build and classify model multi-isometries from JSON.
//!
//! Exit status 0 means the check passed, 1 that it ran and failed, 2 that the
//! input could not be used.

mod commands;
mod error;
mod instance;
mod json;
mod report;

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use multiiso::classify::Canonical3;
use multiiso::numcore::Tolerances;
use num_complex::Complex64;

use commands::{CanonicalParams, Canonical2Raw, Output, Settings};
use error::{CliError, Status};
use instance::InstanceFile;

#[derive(Parser, Debug)]
#[command(name = "multiiso", version, about = "Model multi-isometries on finite-dimensional spaces")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Residual tolerance for matrix identities (overrides MULTIISO_TOL and the file)
    #[arg(long, global = true)]
    tol_eq: Option<f64>,
    /// Relative singular-value cutoff for rank decisions
    #[arg(long, global = true)]
    tol_rank: Option<f64>,
    /// Truncation window (number of Hardy-space degrees)
    #[arg(long, global = true, default_value_t = 8)]
    trunc: usize,
    /// Seed for randomized sub-procedures
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Compact single-line JSON (the default)
    #[arg(long, global = true, conflicts_with = "pretty")]
    json: bool,
    /// Indented JSON
    #[arg(long, global = true)]
    pretty: bool,
}

/// Input files; none or `-` reads one instance from stdin. With several
/// files, each result is written next to its input as `<file>.<command>.json`.
#[derive(Args, Debug)]
struct Inputs {
    files: Vec<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the model conditions on a tuple
    Validate(Inputs),
    /// Replace two factors by their product
    Compose {
        #[command(flatten)]
        inputs: Inputs,
        /// One-based indices of the factors to multiply
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2])]
        factors: Vec<usize>,
        /// Write the reduced tuple here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Complete the first n - 1 pairs to the unique model n-tuple
    Complete {
        #[command(flatten)]
        inputs: Inputs,
        /// Write the completed tuple here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pivotal operator, Q_min, Q_max and the admissible lattice for (U_1, U_2, P_1)
    Pivotal(Inputs),
    /// Three-factor tuple from (U_1, U_2, P_1) and params.q1 ("min", "max" or a basis)
    Build3(Inputs),
    /// (T, Z) data, nonet, canonical decomposition and Wold check of (U_1, P_1)
    Structure(Inputs),
    /// Multiplicities, purity and canonical parameters
    Classify(Inputs),
    /// Decide unitary equivalence of two tuples
    Equiv { a: PathBuf, b: PathBuf },
    /// Canonical tuple from (c, theta), or from (alpha, alpha1, theta, theta1)
    Canonical(CanonicalArgs),
    /// Model tuple of (S, phi_2(S), ...) for finite Blaschke products phi_j
    Blaschke {
        /// Zeros of one factor, `re,im` separated by `;` (repeat per factor)
        #[arg(long = "factor", required = true)]
        factors: Vec<String>,
        /// Truncation window; chosen from the zeros when absent
        #[arg(long)]
        window: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct CanonicalArgs {
    /// Complex numbers are written `re` or `re,im`
    #[arg(long, allow_hyphen_values = true)]
    c: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    theta1: Option<String>,
}

fn parse_complex(text: &str) -> Result<Complex64, CliError> {
    let bad = || CliError::Input(format!("expected a complex number `re` or `re,im`, found {text:?}"));
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(bad()),
    }
}

fn parse_zeros(text: &str) -> Result<Vec<Complex64>, CliError> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_complex)
        .collect()
}

fn canonical_params(a: &CanonicalArgs) -> Result<CanonicalParams, CliError> {
    let get = |name: &str, v: &Option<String>| {
        v.as_deref()
            .ok_or_else(|| CliError::Input(format!("canonical: --{name} is required")))
            .and_then(parse_complex)
    };
    if a.alpha.is_some() || a.alpha1.is_some() || a.theta1.is_some() {
        if a.c.is_some() {
            return Err(CliError::Input("canonical: --c belongs to the two-factor form".into()));
        }
        return Ok(CanonicalParams::Three(Canonical3 {
            alpha: get("alpha", &a.alpha)?,
            alpha1: get("alpha1", &a.alpha1)?,
            theta: get("theta", &a.theta)?,
            theta1: get("theta1", &a.theta1)?,
        }));
    }
    Ok(CanonicalParams::Two(Canonical2Raw {
        c: get("c", &a.c)?,
        theta: get("theta", &a.theta)?,
    }))
}

fn base_tolerances() -> Result<Tolerances, CliError> {
    let mut t = Tolerances::default();
    if let Ok(v) = std::env::var("MULTIISO_TOL") {
        t.eq = v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("MULTIISO_TOL: not a number: {v:?}")))?;
    }
    Ok(t)
}

fn read_input(path: Option<&Path>) -> Result<InstanceFile, CliError> {
    let (name, text) = match path {
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|source| CliError::Io {
                path: "stdin".into(),
                source,
            })?;
            ("stdin".to_string(), s)
        }
        Some(p) => {
            let s = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.display().to_string(),
                source,
            })?;
            (p.display().to_string(), s)
        }
    };
    InstanceFile::parse(&text).map_err(|e| match e {
        CliError::Input(m) => CliError::Input(format!("{name}: {m}")),
        other => other,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Main output text: the report if there is one, otherwise the instance.
fn render(out: &Output, pretty: bool) -> String {
    match (&out.report, &out.instance) {
        (Some(r), _) => r.to_text(pretty),
        (None, Some(i)) => i.to_text(pretty),
        (None, None) => String::new(),
    }
}

type Runner<'a> = dyn Fn(&InstanceFile) -> Result<Output, CliError> + Sync + 'a;

/// Run a one-instance command on stdin, one file, or several files in parallel.
fn run_inputs(
    name: &str,
    inputs: &Inputs,
    out: Option<&Path>,
    settings: &Settings,
    run: &Runner,
) -> Result<Status, CliError> {
    let stdin = inputs.files.is_empty() || (inputs.files.len() == 1 && inputs.files[0] == Path::new("-"));
    if stdin || inputs.files.len() == 1 {
        let path = if stdin { None } else { Some(inputs.files[0].as_path()) };
        let result = run(&read_input(path)?)?;
        if let (Some(p), Some(i)) = (out, &result.instance) {
            write_file(p, &i.to_text(settings.pretty))?;
        }
        print!("{}", render(&result, settings.pretty));
        return Ok(result.status);
    }
    if out.is_some() {
        return Err(CliError::Input("--out needs a single input".into()));
    }
    let statuses: Vec<Status> = std::thread::scope(|scope| {
        let handles: Vec<_> = inputs
            .files
            .iter()
            .map(|path| {
                scope.spawn(move || {
                    let result = read_input(Some(path)).and_then(|f| run(&f));
                    let target = PathBuf::from(format!("{}.{name}.json", path.display()));
                    match result {
                        Ok(o) => match write_file(&target, &render(&o, settings.pretty)) {
                            Ok(()) => (path, o.status, None),
                            Err(e) => (path, Status::InputError, Some(e.to_string())),
                        },
                        Err(e) => (path, Status::InputError, Some(e.to_string())),
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                let (path, status, err) = h.join().expect("worker thread");
                if let Some(e) = err {
                    eprintln!("{}: {e}", path.display());
                }
                println!("{}: {}", path.display(), ["pass", "fail", "input error"][status as usize]);
                status
            })
            .collect()
    });
    Ok(statuses.into_iter().max().unwrap_or(Status::Pass))
}

fn run(cli: &Cli) -> Result<Status, CliError> {
    let g = &cli.global;
    let settings = Settings {
        base: base_tolerances()?,
        tol_eq: g.tol_eq,
        tol_rank: g.tol_rank,
        trunc: g.trunc,
        seed: g.seed,
        pretty: g.pretty,
    };
    let s = &settings;
    match &cli.command {
        Command::Validate(i) => run_inputs("validate", i, None, s, &|f| commands::validate(f, s)),
        Command::Compose { inputs, factors, out } => {
            let [i, j] = factors[..] else {
                return Err(CliError::Input(format!("--factors: expected two indices, found {}", factors.len())));
            };
            let pair = (i, j);
            run_inputs("compose", inputs, out.as_deref(), s, &|f| commands::compose_cmd(f, pair, s))
        }
        Command::Complete { inputs, out } => {
            run_inputs("complete", inputs, out.as_deref(), s, &|f| commands::complete(f, s))
        }
        Command::Pivotal(i) => run_inputs("pivotal", i, None, s, &|f| commands::pivotal(f, s)),
        Command::Build3(i) => run_inputs("build3", i, None, s, &|f| commands::build3(f, s)),
        Command::Structure(i) => run_inputs("structure", i, None, s, &|f| commands::structure(f, s)),
        Command::Classify(i) => run_inputs("classify", i, None, s, &|f| commands::classify_cmd(f, s)),
        Command::Equiv { a, b } => {
            let out = commands::equiv(&read_input(Some(a))?, &read_input(Some(b))?, s)?;
            print!("{}", render(&out, s.pretty));
            Ok(out.status)
        }
        Command::Canonical(args) => {
            let out = commands::canonical(canonical_params(args)?, s)?;
            print!("{}", render(&out, s.pretty));
            Ok(out.status)
        }
        Command::Blaschke { factors, window } => {
            let zeros = factors.iter().map(|f| parse_zeros(f)).collect::<Result<Vec<_>, _>>()?;
            let out = commands::blaschke(&zeros, *window, s)?;
            print!("{}", render(&out, s.pretty));
            Ok(out.status)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(status) => status.into(),
        Err(e) => {
            eprintln!("multiiso: {e}");
            Status::InputError.into()
        }
    }
}
