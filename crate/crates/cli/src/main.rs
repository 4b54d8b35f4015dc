//! `momentforge` command-line front end. Every subcommand is a thin wrapper
//! over the library; results are JSON with a `provenance` block.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use momentforge::herglotz::{Expr, HerglotzExpr};
use momentforge::measures;
use momentforge::seqkit::{self, MatrixSeq};
use momentforge::solver::{self, RoundtripReport};
use momentforge::transforms;
use momentforge::verify::{self, ExtractOptions, Thresholds};
use momentforge::{Error, Tolerances};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use config::{Resolved, TolFlags};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input, broken preconditions.
    Usage(String),
    /// A library error, mapped to an exit code by its kind.
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(Error::NumericFailure(_) | Error::SingularDenominator { .. }) => 1,
            CliError::Lib(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "momentforge", version, about = "Truncated matricial Hamburger moment problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Also write a run manifest (inputs, outputs, tolerances, wall-clock).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    /// Named tolerance preset: default, strict or loose.
    #[arg(long, global = true, env = config::PROFILE_ENV)]
    tol_profile: Option<String>,

    /// JSON file with any of profile, rank_rtol, psd_atol, eq_atol.
    #[arg(long, global = true)]
    tol_config: Option<PathBuf>,

    #[arg(long, global = true)]
    tol_rank_rtol: Option<f64>,

    #[arg(long, global = true)]
    tol_psd_atol: Option<f64>,

    #[arg(long, global = true)]
    tol_eq_atol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Random molecular measure and its first κ + 1 moments.
    Gen(GenArgs),
    /// Hankel membership and extendability of a sequence.
    Check(SeqArgs),
    /// Schur transforms, their heads and the canonical parametrization.
    Schur(SchurArgs),
    /// Resolvent matrix polynomial V or W as a factor list.
    Resolvent(ResolventArgs),
    /// Solution for a parameter (zero parameter if none is given).
    Solve(SolveArgs),
    /// Parameter of a given solution.
    Recover(FnArgs),
    /// Asymptotic check of a function against moment data.
    Verify(VerifyArgs),
    /// Expansion coefficients of a function.
    Moments(MomentsArgs),
    /// Generated solve/recover roundtrips.
    Roundtrip(RoundtripArgs),
    /// The unique solution of a determinate problem.
    Determinate(SeqArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    q: usize,
    #[arg(long)]
    kappa: usize,
    /// Exact number of atoms.
    #[arg(long, default_value_t = 2)]
    atoms: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SeqArgs {
    /// MatrixSeq JSON, or any result with a "moments" or "seq" field.
    #[arg(long)]
    seq: PathBuf,
}

#[derive(Args, Debug)]
struct SchurArgs {
    #[arg(long)]
    seq: PathBuf,
    /// Report only the k-th transform (default: all).
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolyKind {
    V,
    W,
}

#[derive(Args, Debug)]
struct ResolventArgs {
    #[arg(long)]
    seq: PathBuf,
    /// Order m ≤ κ (default κ).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum, default_value = "v")]
    kind: PolyKind,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    seq: PathBuf,
    /// HerglotzExpr JSON of size r (default: zero parameter).
    #[arg(long)]
    param: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FnArgs {
    #[arg(long)]
    seq: PathBuf,
    /// HerglotzExpr JSON, or a result with a "solution" field.
    #[arg(long = "fn")]
    func: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    seq: PathBuf,
    #[arg(long = "fn")]
    func: PathBuf,
    /// Ray angles in radians, strictly inside (0, π).
    #[arg(long, value_delimiter = ',')]
    rays: Option<Vec<f64>>,
    /// Radii sampled on each ray (default: scaled to the data).
    #[arg(long, value_delimiter = ',')]
    ygrid: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct MomentsArgs {
    #[arg(long = "fn")]
    func: PathBuf,
    /// Highest moment index.
    #[arg(long)]
    m: usize,
    /// Circle radii, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    ygrid: Option<Vec<f64>>,
    /// Sample points per circle.
    #[arg(long, default_value_t = 64)]
    samples: usize,
    /// Reference moments; adds a relative error and a 1e-3 pass threshold.
    #[arg(long)]
    seq: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RoundtripArgs {
    #[arg(long, default_value_t = 1)]
    q: usize,
    #[arg(long)]
    kappa: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Atom budget of the generated data (default κ/2 + 3).
    #[arg(long)]
    atoms: Option<usize>,
    /// Run this many instances with seeds seed, seed + 1, …
    #[arg(long)]
    n: Option<u64>,
}

/// What a subcommand produced.
struct Outcome {
    body: Value,
    provenance: Value,
    /// Verification verdict; `false` exits with 1.
    passed: bool,
    failure: Option<String>,
    inputs: Vec<String>,
}

impl Outcome {
    fn pass(body: Value, provenance: Value, inputs: Vec<String>) -> Self {
        Outcome { body, provenance, passed: true, failure: None, inputs }
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    inputs: &'a [String],
    seed: Option<u64>,
    tolerances: &'a Resolved,
    outputs: Vec<String>,
    wall_clock_ms: f64,
    exit_code: u8,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Lib(Error::Json(e)))
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{} is not valid JSON: {e}", path.display())))
}

/// Parses `value`, or its first present field among `keys` when it is a
/// wrapped result.
fn unwrap_field<T: serde::de::DeserializeOwned>(
    value: Value,
    keys: &[&str],
    what: &str,
    path: &Path,
) -> Result<T, CliError> {
    let inner = match &value {
        Value::Object(map) => keys.iter().find_map(|k| map.get(*k)).cloned().unwrap_or(value),
        _ => value,
    };
    serde_json::from_value(inner).map_err(|e| CliError::Usage(format!("{} is not a {what}: {e}", path.display())))
}

fn load_seq(path: &Path) -> Result<MatrixSeq, CliError> {
    unwrap_field(read_json(path)?, &["moments", "seq"], "MatrixSeq", path)
}

fn load_fn(path: &Path, tol: &Tolerances) -> Result<Expr, CliError> {
    let expr: HerglotzExpr = unwrap_field(read_json(path)?, &["solution", "parameter"], "HerglotzExpr", path)?;
    expr.validate(tol)?;
    Ok(std::sync::Arc::new(expr))
}

fn provenance(command: &str, path: &str, seed: Option<u64>, tol: &Resolved) -> Value {
    json!({
        "command": command,
        "path": path,
        "seed": seed,
        "tolerances": tol,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn run(cmd: &Command, tol_res: &Resolved) -> Result<Outcome, CliError> {
    let tol = &tol_res.tolerances;
    match cmd {
        Command::Gen(a) => {
            let sigma = measures::seeded_measure(a.q, a.atoms, a.seed)?;
            let moments = sigma.moments_prefix(a.kappa);
            Ok(Outcome::pass(
                json!({ "measure": to_value(&sigma)?, "moments": to_value(&moments)? }),
                provenance("gen", "measures::seeded_measure", Some(a.seed), tol_res),
                vec![],
            ))
        }
        Command::Check(a) => {
            let seq = load_seq(&a.seq)?;
            let extendable = seqkit::is_hnnd_extendable(&seq, tol)?;
            let body = json!({
                "q": seq.q(),
                "kappa": seq.kappa(),
                "extendable": extendable,
                "hankel_nonnegative_definite": seqkit::is_hnnd(&seq, tol)?,
                "hankel_positive_definite": seqkit::is_hpd(&seq, tol)?,
                "first_term_dominated": seqkit::is_first_term_dominated(&seq, tol)?,
            });
            Ok(Outcome {
                body,
                provenance: provenance("check", "seqkit::is_hnnd_extendable", None, tol_res),
                passed: extendable,
                failure: (!extendable).then(|| "not Hankel nonnegative definite extendable".to_owned()),
                inputs: vec![display(&a.seq)],
            })
        }
        Command::Schur(a) => {
            let seq = load_seq(&a.seq)?;
            let ks: Vec<usize> = match a.k {
                Some(k) => vec![k],
                None => (0..=seq.kappa() / 2).collect(),
            };
            let transforms = ks
                .iter()
                .map(|&k| Ok(json!({ "k": k, "seq": to_value(&seqkit::schur_transform(&seq, k, tol)?)? })))
                .collect::<Result<Vec<_>, CliError>>()?;
            let param = seqkit::canonical_param(&seq, tol)?;
            let body = json!({
                "transforms": transforms,
                "heads": to_value(&seqkit::schur_heads(&seq, tol)?)?,
                "c": to_value(&param.c)?,
                "d": to_value(&param.d)?,
            });
            Ok(Outcome::pass(
                body,
                provenance("schur", "seqkit::schur_transform", None, tol_res),
                vec![display(&a.seq)],
            ))
        }
        Command::Resolvent(a) => {
            let seq = load_seq(&a.seq)?;
            let m = a.m.unwrap_or(seq.kappa());
            let (poly, path) = match a.kind {
                PolyKind::V => (transforms::resolvent_v(&seq, m, tol)?, "transforms::resolvent_v"),
                PolyKind::W => (transforms::resolvent_w(&seq, m, tol)?, "transforms::resolvent_w"),
            };
            Ok(Outcome::pass(
                json!({ "resolvent": to_value(&poly)? }),
                provenance("resolvent", path, None, tol_res),
                vec![display(&a.seq)],
            ))
        }
        Command::Solve(a) => {
            let seq = load_seq(&a.seq)?;
            let p = solver::open_problem(&seq, tol)?;
            let mut inputs = vec![display(&a.seq)];
            let param = match &a.param {
                Some(path) => {
                    inputs.push(display(path));
                    load_fn(path, tol)?
                }
                None => HerglotzExpr::zero(p.rank()),
            };
            let solution = solver::solve(&p, param)?;
            Ok(Outcome::pass(
                json!({ "rank": p.rank(), "solution": to_value(&*solution)? }),
                provenance("solve", p.path(), None, tol_res),
                inputs,
            ))
        }
        Command::Recover(a) => {
            let seq = load_seq(&a.seq)?;
            let p = solver::open_problem(&seq, tol)?;
            let f = load_fn(&a.func, tol)?;
            let parameter = solver::recover_parameter(&p, f)?;
            Ok(Outcome::pass(
                json!({ "rank": p.rank(), "parameter": to_value(&*parameter)? }),
                provenance("recover", p.path(), None, tol_res),
                vec![display(&a.seq), display(&a.func)],
            ))
        }
        Command::Verify(a) => {
            let seq = load_seq(&a.seq)?;
            let f = load_fn(&a.func, tol)?;
            let rays = a.rays.clone().unwrap_or_else(verify::default_rays);
            let grid = a.ygrid.clone().unwrap_or_else(|| verify::default_r_grid(&seq));
            let report = verify::hn_check(&f, &seq, &rays, &grid, &Thresholds::default(), tol)?;
            let passed = report.passed();
            Ok(Outcome {
                body: json!({ "passed": passed, "report": to_value(&report)? }),
                provenance: provenance("verify", "verify::hn_check", None, tol_res),
                passed,
                failure: (!passed).then(|| format!("asymptotic check failed: verdict {:?}", report.verdict)),
                inputs: vec![display(&a.seq), display(&a.func)],
            })
        }
        Command::Moments(a) => {
            let f = load_fn(&a.func, tol)?;
            let mut opts = ExtractOptions { samples: a.samples, ..ExtractOptions::default() };
            if let Some(radii) = &a.ygrid {
                opts.radii = radii.clone();
            }
            let ex = verify::extract_moments(&f, a.m, &opts, tol)?;
            let mut inputs = vec![display(&a.func)];
            let mut body = json!({ "extraction": to_value(&ex)? });
            let mut passed = true;
            if let Some(path) = &a.seq {
                inputs.push(display(path));
                let err = ex.relative_error(&load_seq(path)?);
                passed = err <= 1e-3;
                body["relative_error"] = json!(err);
                body["passed"] = json!(passed);
            }
            Ok(Outcome {
                body,
                provenance: provenance("moments", "verify::extract_moments", None, tol_res),
                passed,
                failure: (!passed).then(|| "extracted moments differ from the reference by more than 1e-3".to_owned()),
                inputs,
            })
        }
        Command::Roundtrip(a) => roundtrip(a, tol_res),
        Command::Determinate(a) => {
            let seq = load_seq(&a.seq)?;
            let p = solver::open_problem(&seq, tol)?;
            let solution = solver::determinate_solution(&p)?;
            Ok(Outcome::pass(
                json!({ "solution": to_value(&*solution)? }),
                provenance("determinate", p.path(), None, tol_res),
                vec![display(&a.seq)],
            ))
        }
    }
}

fn roundtrip(a: &RoundtripArgs, tol_res: &Resolved) -> Result<Outcome, CliError> {
    let tol = &tol_res.tolerances;
    let atoms = a.atoms.unwrap_or(a.kappa / 2 + 3);
    let prov = provenance("roundtrip", "solver::roundtrip", Some(a.seed), tol_res);
    let Some(n) = a.n else {
        let report = solver::roundtrip(a.q, a.kappa, atoms, a.seed, tol)?;
        let passed = report.passed;
        return Ok(Outcome {
            failure: (!passed).then(|| roundtrip_failure(&report)),
            body: to_value(&report)?,
            provenance: prov,
            passed,
            inputs: vec![],
        });
    };
    // Instances are independent; the indexed collect keeps seed order.
    let results: Vec<Result<RoundtripReport, Error>> =
        (0..n).into_par_iter().map(|i| solver::roundtrip(a.q, a.kappa, atoms, a.seed.wrapping_add(i), tol)).collect();
    let mut instances = Vec::with_capacity(results.len());
    let mut failed = 0;
    let mut worst: f64 = 0.0;
    for (i, r) in results.into_iter().enumerate() {
        let seed = a.seed.wrapping_add(i as u64);
        match r {
            Ok(report) => {
                failed += usize::from(!report.passed);
                worst = worst.max(report.max_residual);
                instances.push(json!({ "index": i, "seed": seed, "report": to_value(&report)? }));
            }
            Err(e) => {
                failed += 1;
                instances.push(json!({ "index": i, "seed": seed, "error": e.to_string() }));
            }
        }
    }
    let passed = failed == 0;
    Ok(Outcome {
        body: json!({
            "n": n,
            "passed": n as usize - failed,
            "failed": failed,
            "max_residual": worst,
            "instances": instances,
        }),
        provenance: prov,
        passed,
        failure: (!passed).then(|| format!("{failed} of {n} roundtrips failed")),
        inputs: vec![],
    })
}

fn roundtrip_failure(r: &RoundtripReport) -> String {
    format!(
        "roundtrip failed: max residual {:.3e} (limit {:.0e}), separation {:.3e} (minimum {:.0e})",
        r.max_residual,
        solver::ROUNDTRIP_ATOL,
        r.separation,
        solver::SEPARATION_MIN
    )
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Gen(_) => "gen",
        Command::Check(_) => "check",
        Command::Schur(_) => "schur",
        Command::Resolvent(_) => "resolvent",
        Command::Solve(_) => "solve",
        Command::Recover(_) => "recover",
        Command::Verify(_) => "verify",
        Command::Moments(_) => "moments",
        Command::Roundtrip(_) => "roundtrip",
        Command::Determinate(_) => "determinate",
    }
}

fn command_seed(cmd: &Command) -> Option<u64> {
    match cmd {
        Command::Gen(a) => Some(a.seed),
        Command::Roundtrip(a) => Some(a.seed),
        _ => None,
    }
}

fn emit(cli: &Cli, value: &Value) -> Result<Vec<String>, CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Lib(Error::Json(e)))? + "\n";
    match &cli.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
            Ok(vec![display(path)])
        }
        None => {
            print!("{text}");
            Ok(vec!["<stdout>".to_owned()])
        }
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let flags = TolFlags { rank_rtol: cli.tol_rank_rtol, psd_atol: cli.tol_psd_atol, eq_atol: cli.tol_eq_atol };
    let tol = match config::resolve(cli.tol_profile.as_deref(), cli.tol_config.as_deref(), flags) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let (code, inputs, outputs) = match run(&cli.command, &tol) {
        Ok(outcome) => {
            let mut value = outcome.body;
            value["provenance"] = outcome.provenance;
            match emit(&cli, &value) {
                Ok(outputs) => {
                    if let Some(msg) = &outcome.failure {
                        eprintln!("{msg}");
                    }
                    (u8::from(!outcome.passed), outcome.inputs, outputs)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    (e.exit_code(), outcome.inputs, vec![])
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            (e.exit_code(), vec![], vec![])
        }
    };
    if let Some(path) = &cli.manifest {
        let manifest = RunManifest {
            command: command_name(&cli.command),
            inputs: &inputs,
            seed: command_seed(&cli.command),
            tolerances: &tol,
            outputs,
            wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
            exit_code: code,
        };
        let written = serde_json::to_string_pretty(&manifest)
            .map_err(|e| e.to_string())
            .and_then(|text| std::fs::write(path, text + "\n").map_err(|e| e.to_string()));
        if let Err(e) = written {
            eprintln!("error: cannot write manifest {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    ExitCode::from(code)
}
