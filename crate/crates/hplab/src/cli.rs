//! Command-line front end.
//!
//! Four subcommands cover the library surface: `verify` (governing-equation
//! residuals for the solution catalog), `subspace` (invariant-subspace
//! checks for spatial operators), `solve` (finite-difference runs seeded by
//! an exact family), and `convergence` (refinement studies with fitted
//! orders). Every command emits one machine-readable report, JSON or CSV,
//! to stdout or `--out`.
//!
//! Exit codes: 0 means the requested check passed, 1 means it ran but a
//! quantitative gate failed (residual, order, invariance, or a guarded
//! solver abort), 2 means the invocation or problem domain was invalid.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::expr::{parse, parse_operator, simplify, EvalMode, Expr};
use crate::invariant::{
    check_invariance, quadratic_map_deviation, w3_basis, InvariantError, SubspaceSpec,
};
use crate::report::{render, snapshot_csv, write_atomic, Format};
use crate::solutions::{catalog, family_theorem21_laguerre_growth, SolutionFamily};
use crate::solver::{run as march, EvolutionProblem, RadialGrid, RunSpec, Scheme, SolverError};
use crate::timeops::TimeOperator;
use crate::verify::{fit_order, residual_sampled};

const EXIT_PASS: i32 = 0;
const EXIT_FAIL: i32 = 1;
const EXIT_USAGE: i32 = 2;

#[derive(Parser)]
#[command(
    name = "hplab",
    version,
    about = "Exact-solution laboratory for nonlinear diffusion on the hyperbolic half plane"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Seed for randomized sweeps; equal flags give byte-identical report
    /// bodies (only the timestamp header differs).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Report format.
    #[arg(long, global = true, default_value = "json")]
    format: Format,
    /// Report file; written atomically. Prints to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a family's governing-equation residual over its validity region.
    Verify(VerifyArgs),
    /// Test whether a spatial operator maps a basis span into itself.
    Subspace(SubspaceArgs),
    /// March an initial-value problem seeded by an exact family.
    Solve(SolveArgs),
    /// Refinement study with fitted convergence orders.
    Convergence(ConvergenceArgs),
}

/// Family parameter overrides shared by the subcommands. Each key must
/// exist on the selected family.
#[derive(Args, Default)]
struct ParamArgs {
    /// Nonlinearity exponent n.
    #[arg(long, allow_negative_numbers = true)]
    n: Option<f64>,
    /// Coefficient of ln tanh(eta/2).
    #[arg(long, allow_negative_numbers = true)]
    c1: Option<f64>,
    /// Constant coefficient.
    #[arg(long, allow_negative_numbers = true)]
    c2: Option<f64>,
    /// Blow-up time of the logarithmic-sum family.
    #[arg(long, allow_negative_numbers = true)]
    t0: Option<f64>,
    /// Caputo order in (0, 1].
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Imaginary part of the shift in the periodic family's time operator.
    #[arg(long, allow_negative_numbers = true)]
    lambda_im: Option<f64>,
}

impl ParamArgs {
    fn provided(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        for (key, val) in [
            ("n", self.n),
            ("c1", self.c1),
            ("c2", self.c2),
            ("t0", self.t0),
            ("beta", self.beta),
            ("lambda_im", self.lambda_im),
        ] {
            if let Some(v) = val {
                out.push((key, v));
            }
        }
        out
    }

    /// Rebuilds `fam` with the overridden parameters, keeping its name.
    fn apply(&self, fam: &SolutionFamily) -> Result<SolutionFamily, String> {
        let provided = self.provided();
        if provided.is_empty() {
            return Ok(fam.clone());
        }
        let mut params: BTreeMap<String, f64> = fam.params.clone();
        for (key, val) in provided {
            if !params.contains_key(key) {
                return Err(format!(
                    "family `{}` has no parameter `{key}` (it has: {})",
                    fam.name,
                    params.keys().cloned().collect::<Vec<_>>().join(", ")
                ));
            }
            params.insert(key.to_owned(), val);
        }
        let mut rebuilt = fam.with_params(&params).map_err(|e| e.to_string())?;
        rebuilt.name = fam.name.clone();
        Ok(rebuilt)
    }
}

#[derive(Args)]
struct VerifyArgs {
    /// Family name (see `verify --family help` output on error for the list).
    #[arg(long)]
    family: String,
    #[command(flatten)]
    params: ParamArgs,
    /// Pass when the max absolute residual stays at or below this value.
    #[arg(long, default_value_t = 1e-9, allow_negative_numbers = true)]
    threshold: f64,
    /// Cap the sampled time range (must stay below a blow-up horizon).
    #[arg(long, allow_negative_numbers = true)]
    t_max: Option<f64>,
}

#[derive(Args)]
struct SubspaceArgs {
    /// Spatial operator text over `u` and `lap(.)`, e.g. "u*lap(u)".
    #[arg(long)]
    op: String,
    /// Semicolon-separated basis expressions in eta.
    #[arg(long)]
    basis: String,
    /// Worst relative fit residual tolerated for an "invariant" verdict.
    #[arg(long, default_value_t = 1e-7, allow_negative_numbers = true)]
    threshold: f64,
    /// Random coefficient draws.
    #[arg(long, default_value_t = 20)]
    trials: usize,
}

#[derive(Args)]
struct SolveArgs {
    /// Governing equation: porous-decay, quasilinear, or periodic.
    #[arg(long)]
    eq: String,
    /// Time scheme: rk4, implicit, or l1.
    #[arg(long, default_value = "rk4")]
    scheme: String,
    /// Number of grid nodes.
    #[arg(long, default_value_t = 200)]
    grid: usize,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    eta_min: f64,
    #[arg(long, default_value_t = 8.0, allow_negative_numbers = true)]
    eta_max: f64,
    /// Time step.
    #[arg(long, default_value_t = 1e-4, allow_negative_numbers = true)]
    dt: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    t_end: f64,
    #[command(flatten)]
    params: ParamArgs,
    /// Comma-separated times to dump as CSV snapshot files.
    #[arg(long)]
    snapshots: Option<String>,
    /// Directory for snapshot files (created if missing; defaults to `.`).
    #[arg(long)]
    snapshot_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Governing equation: porous-decay, quasilinear, or periodic.
    #[arg(long)]
    eq: String,
    /// Time scheme: rk4, implicit, or l1.
    #[arg(long, default_value = "rk4")]
    scheme: String,
    /// Comma-separated node counts for a spatial study
    /// (default 50,100,200,400 for rk4/implicit).
    #[arg(long)]
    grids: Option<String>,
    /// Comma-separated decreasing time steps for a temporal study
    /// (default 0.05,0.025,0.0125,0.00625 for l1).
    #[arg(long)]
    dts: Option<String>,
    /// Floor for the fitted global order; defaults to 1.8 for rk4 and
    /// implicit, 1.3 for l1.
    #[arg(long, allow_negative_numbers = true)]
    min_order: Option<f64>,
    /// Fixed time step for a spatial study.
    #[arg(long, default_value_t = 5e-5, allow_negative_numbers = true)]
    dt: f64,
    /// Fixed node count for a temporal study.
    #[arg(long)]
    grid: Option<usize>,
    /// Lower grid edge; defaults to 0.1 (spatial study) or 1.0 (temporal).
    #[arg(long, allow_negative_numbers = true)]
    eta_min: Option<f64>,
    /// Upper grid edge; defaults to 8.0 (spatial study) or 2.0 (temporal).
    /// The temporal default is a narrow band on purpose: exact boundary
    /// data clamps the fractional startup-layer error there, which is what
    /// the l1 order floor assumes. On wide domains the uniform-step L1
    /// error for Mittag-Leffler data honestly degrades to first order.
    #[arg(long, allow_negative_numbers = true)]
    eta_max: Option<f64>,
    /// Final time; defaults to 0.25 for a spatial study, 1.0 for a
    /// temporal one.
    #[arg(long, allow_negative_numbers = true)]
    t_end: Option<f64>,
    #[command(flatten)]
    params: ParamArgs,
}

/// Parses arguments from the process environment and executes one command.
pub fn run() -> i32 {
    init_threads();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_PASS,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::Verify(a) => cmd_verify(&cli.global, a),
        Command::Subspace(a) => cmd_subspace(&cli.global, a),
        Command::Solve(a) => cmd_solve(&cli.global, a),
        Command::Convergence(a) => cmd_convergence(&cli.global, a),
    }
}

fn init_threads() {
    if let Ok(text) = std::env::var("HPLAB_THREADS") {
        if let Ok(n) = text.parse::<usize>() {
            if n >= 1 {
                // Ignore the error if a pool was already installed.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn usage_error(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_USAGE
}

/// Renders and delivers the report; returns an exit code only on I/O failure.
fn emit(global: &GlobalArgs, body: &Value) -> Result<(), i32> {
    let text = render(body, global.format);
    match &global.out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    if let Err(e) = std::fs::create_dir_all(parent) {
                        return Err(usage_error(format!(
                            "cannot create {}: {e}",
                            parent.display()
                        )));
                    }
                }
            }
            write_atomic(path, &text)
                .map_err(|e| usage_error(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

const FAMILY_NAMES: [&str; 7] = [
    "theorem21-classical",
    "theorem21-caputo",
    "theorem21-laguerre",
    "theorem21-laguerre-growth",
    "theorem21-periodic",
    "theorem22-general",
    "theorem22-blowup",
];

fn lookup_family(name: &str) -> Result<SolutionFamily, String> {
    if name == "theorem21-laguerre-growth" {
        // Deliberately outside the catalog: its residual is nonzero.
        return family_theorem21_laguerre_growth(2.0, -1.0, 0.1).map_err(|e| e.to_string());
    }
    let families = catalog().map_err(|e| e.to_string())?;
    families
        .into_iter()
        .find(|f| f.name == name)
        .ok_or_else(|| {
            format!(
                "unknown family `{name}`; known families: {}",
                FAMILY_NAMES.join(", ")
            )
        })
}

fn cmd_verify(global: &GlobalArgs, args: &VerifyArgs) -> i32 {
    let fam = match lookup_family(&args.family) {
        Ok(f) => f,
        Err(msg) => return usage_error(msg),
    };
    let fam = match args.params.apply(&fam) {
        Ok(f) => f,
        Err(msg) => return usage_error(msg),
    };
    if !(args.threshold.is_finite() && args.threshold > 0.0) {
        return usage_error(format!(
            "threshold must be positive, got {}",
            args.threshold
        ));
    }
    if let Some(t_max) = args.t_max {
        if !(t_max.is_finite() && t_max > 0.0) {
            return usage_error(format!("t-max must be positive, got {t_max}"));
        }
        if let Some(horizon) = fam.validity.t_end {
            if t_max >= horizon {
                return usage_error(format!(
                    "t-max {t_max} reaches the family's blow-up horizon t0 = {horizon}"
                ));
            }
        }
    }
    let rep = match residual_sampled(&fam, 40, 40, args.t_max) {
        Ok(r) => r,
        Err(e) => return usage_error(e),
    };
    let pass = rep.max_abs_residual <= args.threshold;
    let mut body = rep.to_json();
    body["family_manifest"] = fam.manifest();
    body["threshold"] = json!(args.threshold);
    body["pass"] = json!(pass);
    body["seed"] = json!(global.seed);
    if let Err(code) = emit(global, &body) {
        return code;
    }
    if pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn cmd_subspace(global: &GlobalArgs, args: &SubspaceArgs) -> i32 {
    if args.trials == 0 {
        return usage_error("trials must be at least 1");
    }
    if !(args.threshold.is_finite() && args.threshold > 0.0) {
        return usage_error(format!(
            "threshold must be positive, got {}",
            args.threshold
        ));
    }
    let mut basis = Vec::new();
    for piece in args.basis.split(';') {
        let piece = piece.trim();
        if piece.is_empty() {
            return usage_error("basis contains an empty entry");
        }
        match parse(piece, EvalMode::Real) {
            Ok(e) => basis.push(simplify(&e)),
            Err(e) => return usage_error(format!("basis entry `{piece}`: {e}")),
        }
    }
    let mut spec = SubspaceSpec::with_defaults(basis);
    spec.trials = args.trials;
    let verdict = match check_invariance(&args.op, &spec, args.threshold, global.seed) {
        Ok(v) => v,
        Err(e @ InvariantError::Expr(_)) => return usage_error(e),
        Err(e) => return usage_error(e),
    };
    let mut body = verdict.to_json();
    body["seed"] = json!(global.seed);
    body["map_check"] = map_check(&args.op, &spec, global.seed);
    if let Err(code) = emit(global, &body) {
        return code;
    }
    if verdict.invariant {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

/// For the quadratic operator on the three-function logarithmic basis the
/// induced coefficient map has a closed form; report how far the fitted map
/// strays from it. Null for any other operator/basis combination.
fn map_check(op_src: &str, spec: &SubspaceSpec, seed: u64) -> Value {
    let canonical = match parse_operator("u*lap(u)", EvalMode::Real) {
        Ok(e) => simplify(&e),
        Err(_) => return Value::Null,
    };
    let given = match parse_operator(op_src, EvalMode::Real) {
        Ok(e) => simplify(&e),
        Err(_) => return Value::Null,
    };
    if given != canonical {
        return Value::Null;
    }
    let want: Vec<Expr> = w3_basis().iter().map(simplify).collect();
    let mut have: Vec<Expr> = spec.basis.iter().map(simplify).collect();
    if have.len() != want.len() {
        return Value::Null;
    }
    // Order-insensitive match: the closed form is stated in the canonical
    // basis order, which quadratic_map_deviation uses internally.
    for w in &want {
        match have.iter().position(|h| h == w) {
            Some(i) => {
                have.remove(i);
            }
            None => return Value::Null,
        }
    }
    match quadratic_map_deviation(100, seed) {
        Ok(dev) => json!({ "draws": 100, "max_relative_deviation": dev }),
        Err(_) => Value::Null,
    }
}

fn parse_scheme(text: &str) -> Result<Scheme, String> {
    match text {
        "rk4" => Ok(Scheme::ExplicitRk4),
        "implicit" => Ok(Scheme::ImplicitEuler),
        "l1" => Ok(Scheme::FractionalL1),
        other => Err(format!(
            "unknown scheme `{other}` (expected rk4, implicit, or l1)"
        )),
    }
}

fn scheme_name(scheme: Scheme) -> &'static str {
    match scheme {
        Scheme::ExplicitRk4 => "rk4",
        Scheme::ImplicitEuler => "implicit",
        Scheme::FractionalL1 => "l1",
    }
}

/// Builds the exact family backing a solve/convergence invocation.
fn equation_family(eq: &str, scheme: Scheme, params: &ParamArgs) -> Result<SolutionFamily, String> {
    let reject = |keys: &[&str]| -> Result<(), String> {
        for (key, _) in params.provided() {
            if keys.contains(&key) {
                return Err(format!("equation `{eq}` does not take --{key}"));
            }
        }
        Ok(())
    };
    match eq {
        "porous-decay" => {
            reject(&["t0", "lambda_im"])?;
            if params.beta.is_some() && scheme != Scheme::FractionalL1 {
                return Err("--beta requires --scheme l1".to_owned());
            }
            let time = if scheme == Scheme::FractionalL1 {
                TimeOperator::caputo(params.beta.unwrap_or(0.5)).map_err(|e| e.to_string())?
            } else {
                TimeOperator::Classical
            };
            crate::solutions::family_theorem21(
                time,
                params.n.unwrap_or(2.0),
                params.c1.unwrap_or(-1.0),
                params.c2.unwrap_or(0.1),
            )
            .map_err(|e| e.to_string())
        }
        "quasilinear" => {
            reject(&["n", "beta", "lambda_im"])?;
            crate::solutions::family_theorem22(
                params.t0.unwrap_or(1.0),
                params.c1.unwrap_or(-1.0),
                params.c2.unwrap_or(0.0),
            )
            .map_err(|e| e.to_string())
        }
        "periodic" => {
            reject(&["t0", "beta"])?;
            let time = TimeOperator::shifted(params.lambda_im.unwrap_or(2.0), 1.0)
                .map_err(|e| e.to_string())?;
            crate::solutions::family_theorem21(
                time,
                params.n.unwrap_or(2.0),
                params.c1.unwrap_or(-1.0),
                params.c2.unwrap_or(0.1),
            )
            .map_err(|e| e.to_string())
        }
        other => Err(format!(
            "unknown equation `{other}` (expected porous-decay, quasilinear, or periodic)"
        )),
    }
}

/// Guarded aborts mean the scheme ran and the math failed; everything else
/// is a malformed problem.
fn solver_exit(err: &SolverError) -> i32 {
    match err {
        SolverError::PositivityLoss { .. }
        | SolverError::MaxPrincipleViolation { .. }
        | SolverError::NewtonDivergence { .. }
        | SolverError::SingularJacobian { .. } => EXIT_FAIL,
        _ => EXIT_USAGE,
    }
}

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for piece in text.split(',') {
        let piece = piece.trim();
        out.push(
            piece
                .parse::<f64>()
                .map_err(|_| format!("{what} entry `{piece}` is not a number"))?,
        );
    }
    Ok(out)
}

fn parse_usize_list(text: &str, what: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for piece in text.split(',') {
        let piece = piece.trim();
        out.push(
            piece
                .parse::<usize>()
                .map_err(|_| format!("{what} entry `{piece}` is not a node count"))?,
        );
    }
    Ok(out)
}

fn grid_json(grid: &RadialGrid) -> Value {
    json!({
        "nodes": grid.eta.len(),
        "eta_min": grid.eta_min,
        "eta_max": grid.eta_max,
        "h": grid.h,
    })
}

fn cmd_solve(global: &GlobalArgs, args: &SolveArgs) -> i32 {
    let scheme = match parse_scheme(&args.scheme) {
        Ok(s) => s,
        Err(msg) => return usage_error(msg),
    };
    let fam = match equation_family(&args.eq, scheme, &args.params) {
        Ok(f) => f,
        Err(msg) => return usage_error(msg),
    };
    let grid = match RadialGrid::new(args.eta_min, args.eta_max, args.grid) {
        Ok(g) => g,
        Err(e) => return usage_error(e),
    };
    let problem = match EvolutionProblem::from_family(&fam, grid) {
        Ok(p) => p,
        Err(e) => return usage_error(e),
    };
    let snapshot_times = match &args.snapshots {
        Some(text) => match parse_f64_list(text, "snapshots") {
            Ok(ts) => ts,
            Err(msg) => return usage_error(msg),
        },
        None => Vec::new(),
    };
    let spec = RunSpec {
        dt: args.dt,
        t_end: args.t_end,
        scheme,
        snapshot_times,
    };
    let out = match march(&problem, &spec) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return solver_exit(&e);
        }
    };

    let dir = args
        .snapshot_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    let mut snapshot_rows = Vec::new();
    for snap in &out.snapshots {
        let file = dir.join(format!("snapshot_t{:.6}.csv", snap.t));
        if args.snapshot_dir.is_some() {
            if let Err(e) = std::fs::create_dir_all(&dir) {
                return usage_error(format!("cannot create {}: {e}", dir.display()));
            }
        }
        let csv = snapshot_csv(&problem.grid.eta, snap);
        if let Err(e) = write_atomic(&file, &csv) {
            return usage_error(format!("cannot write {}: {e}", file.display()));
        }
        let max_err = snap.abs_err().into_iter().fold(0.0f64, f64::max);
        snapshot_rows.push(json!({
            "t": snap.t,
            "file": file.to_string_lossy(),
            "max_abs_err": max_err,
        }));
    }

    let body = json!({
        "command": "solve",
        "equation": args.eq,
        "scheme": scheme_name(scheme),
        "family": fam.manifest(),
        "grid": grid_json(&problem.grid),
        "dt": args.dt,
        "t_end": out.final_t,
        "steps": out.steps,
        "work": out.work,
        "errors": { "linf": out.linf_error, "l2": out.l2_error },
        "snapshots": snapshot_rows,
        "seed": global.seed,
    });
    if let Err(code) = emit(global, &body) {
        return code;
    }
    EXIT_PASS
}

fn cmd_convergence(global: &GlobalArgs, args: &ConvergenceArgs) -> i32 {
    let scheme = match parse_scheme(&args.scheme) {
        Ok(s) => s,
        Err(msg) => return usage_error(msg),
    };
    if args.grids.is_some() && args.dts.is_some() {
        return usage_error("give either --grids (spatial study) or --dts (temporal study)");
    }
    let temporal = match (&args.dts, &args.grids) {
        (Some(_), _) => true,
        (None, Some(_)) => false,
        // Bare invocation: the study kind follows the scheme.
        (None, None) => scheme == Scheme::FractionalL1,
    };
    let min_order = args.min_order.unwrap_or(match scheme {
        Scheme::FractionalL1 => 1.3,
        _ => 1.8,
    });
    if !min_order.is_finite() {
        return usage_error("min-order must be finite");
    }

    // The temporal default exercises the constant-in-eta member, where the
    // spatial error vanishes identically and the time discretization is the
    // only error source. Spatial defaults match the porous run.
    let mut params = ParamArgs {
        n: args.params.n,
        c1: args.params.c1,
        c2: args.params.c2,
        t0: args.params.t0,
        beta: args.params.beta,
        lambda_im: args.params.lambda_im,
    };
    if temporal && args.eq == "porous-decay" {
        params.n = params.n.or(Some(3.0));
        params.c1 = params.c1.or(Some(0.0));
        params.c2 = params.c2.or(Some(1.0));
    }
    let fam = match equation_family(&args.eq, scheme, &params) {
        Ok(f) => f,
        Err(msg) => return usage_error(msg),
    };

    let t_end = args.t_end.unwrap_or(if temporal { 1.0 } else { 0.25 });
    let eta_min = args.eta_min.unwrap_or(if temporal { 1.0 } else { 0.1 });
    let eta_max = args.eta_max.unwrap_or(if temporal { 2.0 } else { 8.0 });
    let mut spacings = Vec::new();
    let mut linf = Vec::new();
    let mut l2 = Vec::new();
    let mut resolution_rows = Vec::new();

    if temporal {
        let dts = match &args.dts {
            Some(text) => match parse_f64_list(text, "dts") {
                Ok(v) => v,
                Err(msg) => return usage_error(msg),
            },
            None => vec![0.05, 0.025, 0.0125, 0.00625],
        };
        let grid = match RadialGrid::new(eta_min, eta_max, args.grid.unwrap_or(8)) {
            Ok(g) => g,
            Err(e) => return usage_error(e),
        };
        let problem = match EvolutionProblem::from_family(&fam, grid) {
            Ok(p) => p,
            Err(e) => return usage_error(e),
        };
        for &dt in &dts {
            let spec = RunSpec {
                dt,
                t_end,
                scheme,
                snapshot_times: vec![],
            };
            let out = match march(&problem, &spec) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("error at dt = {dt}: {e}");
                    return solver_exit(&e);
                }
            };
            spacings.push(dt);
            linf.push(out.linf_error);
            l2.push(out.l2_error);
            resolution_rows.push(json!({
                "dt": dt,
                "steps": out.steps,
                "linf": out.linf_error,
                "l2": out.l2_error,
            }));
        }
    } else {
        let grids = match &args.grids {
            Some(text) => match parse_usize_list(text, "grids") {
                Ok(v) => v,
                Err(msg) => return usage_error(msg),
            },
            None => vec![50, 100, 200, 400],
        };
        for &nodes in &grids {
            let grid = match RadialGrid::new(eta_min, eta_max, nodes) {
                Ok(g) => g,
                Err(e) => return usage_error(e),
            };
            let h = grid.h;
            let problem = match EvolutionProblem::from_family(&fam, grid) {
                Ok(p) => p,
                Err(e) => return usage_error(e),
            };
            let spec = RunSpec {
                dt: args.dt,
                t_end,
                scheme,
                snapshot_times: vec![],
            };
            let out = match march(&problem, &spec) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("error at {nodes} nodes: {e}");
                    return solver_exit(&e);
                }
            };
            spacings.push(h);
            linf.push(out.linf_error);
            l2.push(out.l2_error);
            resolution_rows.push(json!({
                "nodes": nodes,
                "h": h,
                "linf": out.linf_error,
                "l2": out.l2_error,
            }));
        }
    }

    let report = match fit_order(&spacings, &linf, &l2) {
        Ok(r) => r,
        Err(e) => return usage_error(e),
    };
    let pass = report.global_order >= min_order;
    let body = json!({
        "command": "convergence",
        "equation": args.eq,
        "scheme": scheme_name(scheme),
        "study": if temporal { "temporal" } else { "spatial" },
        "family": fam.manifest(),
        "eta_interval": [eta_min, eta_max],
        "t_end": t_end,
        "resolutions": resolution_rows,
        "fit": report.to_json(),
        "min_order": min_order,
        "pass": pass,
        "seed": global.seed,
    });
    if let Err(code) = emit(global, &body) {
        return code;
    }
    if pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
