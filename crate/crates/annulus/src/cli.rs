//! Command-line front end.
//!
//! Every subcommand prints exactly one line of JSON to stdout summarizing
//! what it computed; heavier artifacts (profiles, traces, curves, reports)
//! go to files named by `--out`. Files are written atomically (a sibling
//! `.tmp` is renamed into place), profile CSVs carry an `<stem>.events.json`
//! sidecar with everything needed to reconstruct the trajectory, and errors
//! map to stable exit codes: 2 for domain/structure problems, 3 for
//! bracketing failures, 4 for resolution limits, 5 for integration and I/O
//! failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::functionals::{compare_pair, derivative_identity_check, functional_trace};
use crate::nonlinearity::{NonlinearitySpec, SampleGrid};
use crate::ode::{
    integrate, Event, IntegratorControls, Mode, Node, RadialProblem, SolutionProfile, Termination,
};
use crate::regions;
use crate::shooting::{scan, solve_annulus, solve_exterior, AlphaGrid, AnnulusOutcome};

#[derive(Parser)]
#[command(
    name = "annulus",
    version,
    about = "Positive radial trajectories of Δu + f(u) = 0 on annuli: \
             shooting, boundary solves, comparison functionals, and \
             exponent-plane uniqueness regions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory (--alpha) or solve the annulus boundary
    /// problem (--b)
    Solve(SolveArgs),
    /// Classify shots over a slope grid and tabulate the first-zero map
    Scan(ScanArgs),
    /// Bisect for the decaying exterior trajectory between bouncing and
    /// crossing slopes
    Exterior(ExteriorArgs),
    /// Sample the comparison functionals along one trajectory and check
    /// their derivative identities
    Functionals(FunctionalsArgs),
    /// Run the step-by-step comparison for a pair of trajectories
    Compare(CompareArgs),
    /// Classify an exponent-plane point for one family
    Region(RegionArgs),
    /// Sample the boundary curve of a family's region
    RegionCurve(RegionCurveArgs),
    /// Check the structural conditions on f for a given dimension
    Conditions(ConditionsArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// Nonlinearity, e.g. plus:p=3,q=1 | minus:p=3,q=2 | linear:k=9.87
    #[arg(long)]
    f: String,
    /// Space dimension (n >= 2)
    #[arg(long)]
    n: u32,
    /// Inner radius of the annulus
    #[arg(long)]
    a: f64,
}

impl ProblemArgs {
    fn build(&self) -> Result<RadialProblem> {
        RadialProblem::new(self.n, self.a, NonlinearitySpec::parse(&self.f)?)
    }
}

#[derive(Args, Default)]
struct ControlArgs {
    /// Relative integration tolerance [default 1e-10]
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Absolute integration tolerance [default 1e-12]
    #[arg(long)]
    abs_tol: Option<f64>,
    /// Event polish tolerance [default 1e-10]
    #[arg(long)]
    event_tol: Option<f64>,
    /// Outer radius cap for integration [default 100]
    #[arg(long)]
    r_max: Option<f64>,
    /// Step budget per trajectory [default 2000000]
    #[arg(long)]
    max_steps: Option<usize>,
    /// Flat key=value file supplying defaults for absent flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Recorded in outputs for provenance; the pipeline itself is
    /// deterministic
    #[arg(long)]
    seed: Option<u64>,
    /// Validate inputs and print the plan without computing or writing
    #[arg(long)]
    dry_run: bool,
}

/// Keys a `--config` file may set. Flags always win over the file.
const CONFIG_KEYS: &[&str] = &[
    "rel_tol",
    "abs_tol",
    "event_tol",
    "r_max",
    "max_steps",
    "grid_lo",
    "grid_hi",
    "grid_points",
    "samples",
];

fn load_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Data(format!(
                "{}:{}: expected key=value, got {line:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::Data(format!(
                "{}:{}: unknown config key {key:?} (known: {})",
                path.display(),
                lineno + 1,
                CONFIG_KEYS.join(", ")
            )));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn config_get<T: std::str::FromStr>(
    cfg: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>> {
    match cfg.get(key) {
        None => Ok(None),
        Some(text) => text.parse::<T>().map(Some).map_err(|_| {
            Error::Data(format!("config key {key} has unparsable value {text:?}"))
        }),
    }
}

struct Resolved {
    controls: IntegratorControls,
    cfg: BTreeMap<String, String>,
    seed: Option<u64>,
    dry_run: bool,
}

fn resolve_controls(args: &ControlArgs) -> Result<Resolved> {
    let cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => BTreeMap::new(),
    };
    let mut controls = IntegratorControls::default();
    if let Some(v) = config_get::<f64>(&cfg, "rel_tol")? {
        controls.rel_tol = v;
    }
    if let Some(v) = config_get::<f64>(&cfg, "abs_tol")? {
        controls.abs_tol = v;
    }
    if let Some(v) = config_get::<f64>(&cfg, "event_tol")? {
        controls.event_tol = v;
    }
    if let Some(v) = config_get::<f64>(&cfg, "r_max")? {
        controls.r_max = v;
    }
    if let Some(v) = config_get::<usize>(&cfg, "max_steps")? {
        controls.max_steps = v;
    }
    if let Some(v) = args.rel_tol {
        controls.rel_tol = v;
    }
    if let Some(v) = args.abs_tol {
        controls.abs_tol = v;
    }
    if let Some(v) = args.event_tol {
        controls.event_tol = v;
    }
    if let Some(v) = args.r_max {
        controls.r_max = v;
    }
    if let Some(v) = args.max_steps {
        controls.max_steps = v;
    }
    Ok(Resolved { controls, cfg, seed: args.seed, dry_run: args.dry_run })
}

fn resolve_grid(
    cfg: &BTreeMap<String, String>,
    lo: Option<f64>,
    hi: Option<f64>,
    points: Option<usize>,
) -> Result<AlphaGrid> {
    let d = AlphaGrid::default();
    AlphaGrid::new(
        lo.or(config_get(cfg, "grid_lo")?).unwrap_or(d.lo),
        hi.or(config_get(cfg, "grid_hi")?).unwrap_or(d.hi),
        points.or(config_get(cfg, "grid_points")?).unwrap_or(d.points),
    )
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(".tmp");
    let tmp = PathBuf::from(tmp_name);
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Shortest round-trip decimal; non-finite values use lowercase names that
/// `f64::from_str` accepts back.
fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

#[derive(Serialize, Deserialize)]
struct SidecarControls {
    rel_tol: f64,
    abs_tol: f64,
    event_tol: f64,
    r_max: f64,
}

/// Everything a profile CSV cannot carry itself; written alongside as
/// `<stem>.events.json` so `load_profile` can rebuild the trajectory.
#[derive(Serialize, Deserialize)]
struct ProfileSidecar {
    schema: String,
    f: String,
    n: u32,
    a: f64,
    alpha: f64,
    termination: Termination,
    events: Vec<Event>,
    controls: SidecarControls,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

const PROFILE_SCHEMA: &str = "annulus-profile-v1";
const PROFILE_HEADER: &str = "r,u,u_prime,I";

fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("events.json")
}

/// Write the node table as CSV plus the sidecar; returns both paths.
pub fn save_profile(
    profile: &SolutionProfile,
    controls: &IntegratorControls,
    seed: Option<u64>,
    csv: &Path,
) -> Result<(PathBuf, PathBuf)> {
    let mut body = String::with_capacity(64 * profile.nodes.len());
    body.push_str(PROFILE_HEADER);
    body.push('\n');
    for node in &profile.nodes {
        let energy = node.v * node.v + 2.0 * profile.f.big_f(node.u.abs());
        body.push_str(&format!(
            "{},{},{},{}\n",
            fmt_num(node.r),
            fmt_num(node.u),
            fmt_num(node.v),
            fmt_num(energy)
        ));
    }
    write_atomic(csv, &body)?;
    let sidecar = ProfileSidecar {
        schema: PROFILE_SCHEMA.into(),
        f: profile.f.label(),
        n: profile.n,
        a: profile.a,
        alpha: profile.alpha,
        termination: profile.termination,
        events: profile.events.clone(),
        controls: SidecarControls {
            rel_tol: controls.rel_tol,
            abs_tol: controls.abs_tol,
            event_tol: controls.event_tol,
            r_max: controls.r_max,
        },
        seed,
    };
    let side = sidecar_path(csv);
    write_atomic(&side, &format!("{}\n", serde_json::to_string_pretty(&sidecar)?))?;
    Ok((csv.to_path_buf(), side))
}

/// Rebuild a trajectory from a profile CSV and its sidecar. Evaluation
/// between the stored nodes uses the Hermite fallback, so downstream
/// consumers (functionals, comparisons) work unchanged.
pub fn load_profile(csv: &Path) -> Result<SolutionProfile> {
    let text = std::fs::read_to_string(csv)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == PROFILE_HEADER => {}
        other => {
            return Err(Error::Data(format!(
                "{}: expected header {PROFILE_HEADER:?}, found {other:?}",
                csv.display()
            )))
        }
    }
    let mut nodes = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let mut next = |name: &str| -> Result<f64> {
            cols.next()
                .ok_or_else(|| {
                    Error::Data(format!("{}:{}: missing column {name}", csv.display(), lineno + 2))
                })?
                .trim()
                .parse()
                .map_err(|_| {
                    Error::Data(format!("{}:{}: bad number in column {name}", csv.display(), lineno + 2))
                })
        };
        let (r, u, v) = (next("r")?, next("u")?, next("u_prime")?);
        nodes.push(Node { r, u, v });
    }
    let side = sidecar_path(csv);
    let sidecar: ProfileSidecar = serde_json::from_str(&std::fs::read_to_string(&side).map_err(
        |e| {
            Error::Data(format!(
                "{}: profile sidecar is required to reconstruct a trajectory ({e})",
                side.display()
            ))
        },
    )?)?;
    if sidecar.schema != PROFILE_SCHEMA {
        return Err(Error::Data(format!(
            "{}: unknown schema {:?} (expected {PROFILE_SCHEMA:?})",
            side.display(),
            sidecar.schema
        )));
    }
    SolutionProfile::from_nodes(
        sidecar.n,
        sidecar.a,
        sidecar.alpha,
        NonlinearitySpec::parse(&sidecar.f)?,
        nodes,
        sidecar.events,
        sidecar.termination,
    )
}

fn emit(summary: serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Initial slope u'(a): integrate a single trajectory
    #[arg(long, conflicts_with = "b")]
    alpha: Option<f64>,
    /// Outer radius: find all annulus solutions on [a, b]
    #[arg(long)]
    b: Option<f64>,
    /// Slope grid lower end for the boundary solve [default 1e-3]
    #[arg(long)]
    grid_lo: Option<f64>,
    /// Slope grid upper end for the boundary solve [default 1e3]
    #[arg(long)]
    grid_hi: Option<f64>,
    /// Slope grid size for the boundary solve [default 512]
    #[arg(long)]
    grid_points: Option<usize>,
    /// Profile CSV destination (solutions of a boundary solve get _0, _1,
    /// ... suffixes)
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    controls: ControlArgs,
}

fn run_solve(args: SolveArgs) -> Result<()> {
    let problem = args.problem.build()?;
    let resolved = resolve_controls(&args.controls)?;
    match (args.alpha, args.b) {
        (Some(alpha), None) => {
            if resolved.dry_run {
                return emit(json!({
                    "command": "solve", "mode": "trajectory", "dry_run": true,
                    "f": problem.f.label(), "n": problem.n, "a": problem.a,
                    "alpha": alpha, "controls": resolved.controls,
                    "out": args.out,
                }));
            }
            let profile = integrate(&problem, alpha, &resolved.controls, Mode::Shooting)?;
            let mut files = Vec::new();
            if let Some(out) = &args.out {
                let (csv, side) = save_profile(&profile, &resolved.controls, resolved.seed, out)?;
                files.push(csv);
                files.push(side);
            }
            emit(json!({
                "command": "solve", "mode": "trajectory",
                "f": problem.f.label(), "n": problem.n, "a": problem.a,
                "alpha": alpha,
                "termination": profile.termination,
                "r_end": profile.r_end(),
                "peak": profile.peak().map(|(r, u)| json!({"r": r, "u": u})),
                "first_zero": profile.first_zero(),
                "events": profile.events.len(),
                "seed": resolved.seed,
                "files": files,
            }))
        }
        (None, Some(b)) => {
            let grid =
                resolve_grid(&resolved.cfg, args.grid_lo, args.grid_hi, args.grid_points)?;
            if resolved.dry_run {
                return emit(json!({
                    "command": "solve", "mode": "annulus", "dry_run": true,
                    "f": problem.f.label(), "n": problem.n, "a": problem.a,
                    "b": b, "grid": grid, "controls": resolved.controls,
                    "out": args.out,
                }));
            }
            let outcome = solve_annulus(&problem, b, &grid, &resolved.controls)?;
            match outcome {
                AnnulusOutcome::Continuum { residual_fraction } => emit(json!({
                    "command": "solve", "mode": "annulus",
                    "f": problem.f.label(), "n": problem.n, "a": problem.a, "b": b,
                    "continuum": true, "residual_fraction": residual_fraction,
                    "seed": resolved.seed,
                })),
                AnnulusOutcome::Solutions(solutions) => {
                    let mut files = Vec::new();
                    if let Some(out) = &args.out {
                        for (k, sol) in solutions.iter().enumerate() {
                            let path = numbered_path(out, k);
                            let (csv, side) = save_profile(
                                &sol.profile,
                                &resolved.controls,
                                resolved.seed,
                                &path,
                            )?;
                            files.push(csv);
                            files.push(side);
                        }
                    }
                    emit(json!({
                        "command": "solve", "mode": "annulus",
                        "f": problem.f.label(), "n": problem.n, "a": problem.a, "b": b,
                        "continuum": false,
                        "count": solutions.len(),
                        "solutions": solutions.iter().map(|s| json!({
                            "alpha": s.alpha,
                            "residual": s.residual,
                            "peak": s.profile.peak().map(|(_, u)| u),
                        })).collect::<Vec<_>>(),
                        "seed": resolved.seed,
                        "files": files,
                    }))
                }
            }
        }
        _ => Err(Error::Domain(
            "solve needs exactly one of --alpha (trajectory) or --b (annulus)".into(),
        )),
    }
}

fn numbered_path(base: &Path, k: usize) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default();
    let ext = base.extension().map(|s| s.to_string_lossy().into_owned());
    let name = match ext {
        Some(ext) => format!("{stem}_{k}.{ext}"),
        None => format!("{stem}_{k}"),
    };
    base.with_file_name(name)
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Slope grid lower end [default 1e-3]
    #[arg(long)]
    grid_lo: Option<f64>,
    /// Slope grid upper end [default 1e3]
    #[arg(long)]
    grid_hi: Option<f64>,
    /// Slope grid size [default 512]
    #[arg(long)]
    grid_points: Option<usize>,
    /// CSV destination for alpha,class,first_zero,peak_height
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    controls: ControlArgs,
}

fn run_scan(args: ScanArgs) -> Result<()> {
    let problem = args.problem.build()?;
    let resolved = resolve_controls(&args.controls)?;
    let grid = resolve_grid(&resolved.cfg, args.grid_lo, args.grid_hi, args.grid_points)?;
    if resolved.dry_run {
        return emit(json!({
            "command": "scan", "dry_run": true,
            "f": problem.f.label(), "n": problem.n, "a": problem.a,
            "grid": grid, "controls": resolved.controls, "out": args.out,
        }));
    }
    let points = scan(&problem, &grid, &resolved.controls)?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for point in &points {
        let class = serde_json::to_value(point.class)?
            .as_str()
            .unwrap_or("unknown")
            .to_string();
        *counts.entry(class).or_insert(0) += 1;
    }
    let mut files = Vec::new();
    if let Some(out) = &args.out {
        let mut body = String::from("alpha,class,first_zero,peak_height\n");
        for point in &points {
            let class = serde_json::to_value(point.class)?;
            body.push_str(&format!(
                "{},{},{},{}\n",
                fmt_num(point.alpha),
                class.as_str().unwrap_or("unknown"),
                fmt_num(point.first_zero.unwrap_or(f64::NAN)),
                fmt_num(point.peak_height.unwrap_or(f64::NAN)),
            ));
        }
        write_atomic(out, &body)?;
        files.push(out.clone());
    }
    emit(json!({
        "command": "scan",
        "f": problem.f.label(), "n": problem.n, "a": problem.a,
        "grid": grid,
        "classes": counts,
        "seed": resolved.seed,
        "files": files,
    }))
}

#[derive(Args)]
struct ExteriorArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Slope known (or suspected) to bounce
    #[arg(long)]
    alpha_lo: f64,
    /// Slope known (or suspected) to cross zero
    #[arg(long)]
    alpha_hi: f64,
    /// Profile CSV destination for the converged trajectory
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    controls: ControlArgs,
}

fn run_exterior(args: ExteriorArgs) -> Result<()> {
    let problem = args.problem.build()?;
    let resolved = resolve_controls(&args.controls)?;
    if resolved.dry_run {
        return emit(json!({
            "command": "exterior", "dry_run": true,
            "f": problem.f.label(), "n": problem.n, "a": problem.a,
            "alpha_lo": args.alpha_lo, "alpha_hi": args.alpha_hi,
            "controls": resolved.controls, "out": args.out,
        }));
    }
    let solution = solve_exterior(&problem, args.alpha_lo, args.alpha_hi, &resolved.controls)?;
    let mut files = Vec::new();
    if let Some(out) = &args.out {
        let mut controls = resolved.controls;
        controls.r_max = solution.r_max_used;
        let (csv, side) = save_profile(&solution.profile, &controls, resolved.seed, out)?;
        files.push(csv);
        files.push(side);
    }
    emit(json!({
        "command": "exterior",
        "f": problem.f.label(), "n": problem.n, "a": problem.a,
        "alpha": solution.alpha,
        "bracket": solution.bracket,
        "iterations": solution.iterations,
        "r_max_used": solution.r_max_used,
        "tail": solution.tail,
        "seed": resolved.seed,
        "files": files,
    }))
}

#[derive(Args)]
struct FunctionalsArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Initial slope of the trajectory to trace
    #[arg(long)]
    alpha: f64,
    /// Number of trace samples [default 512]
    #[arg(long)]
    samples: Option<usize>,
    /// CSV destination for the functional trace
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    controls: ControlArgs,
}

fn run_functionals(args: FunctionalsArgs) -> Result<()> {
    let problem = args.problem.build()?;
    let resolved = resolve_controls(&args.controls)?;
    let samples = args
        .samples
        .or(config_get(&resolved.cfg, "samples")?)
        .unwrap_or(512);
    if resolved.dry_run {
        return emit(json!({
            "command": "functionals", "dry_run": true,
            "f": problem.f.label(), "n": problem.n, "a": problem.a,
            "alpha": args.alpha, "samples": samples,
            "controls": resolved.controls, "out": args.out,
        }));
    }
    let profile = integrate(&problem, args.alpha, &resolved.controls, Mode::Shooting)?;
    let trace = functional_trace(&profile, samples)?;
    let identities = derivative_identity_check(&profile, 64)?;
    let mut files = Vec::new();
    if let Some(out) = &args.out {
        let mut body = String::from(
            "r,u,u_prime,energy,v_functional,p_functional,w_functional,in_guard_band\n",
        );
        for s in &trace.samples {
            body.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                fmt_num(s.r),
                fmt_num(s.u),
                fmt_num(s.u_prime),
                fmt_num(s.energy),
                fmt_num(s.v_functional),
                fmt_num(s.p_functional),
                fmt_num(s.w_functional),
                u8::from(s.in_guard_band),
            ));
        }
        write_atomic(out, &body)?;
        files.push(out.clone());
    }
    emit(json!({
        "command": "functionals",
        "f": problem.f.label(), "n": problem.n, "a": problem.a,
        "alpha": args.alpha,
        "termination": profile.termination,
        "peak": profile.peak().map(|(r, u)| json!({"r": r, "u": u})),
        "samples": trace.samples.len(),
        "guard_band_excluded": trace.excluded,
        "identity_check": identities,
        "seed": resolved.seed,
        "files": files,
    }))
}

#[derive(Args)]
struct CompareArgs {
    /// Nonlinearity (required unless both --profile1/--profile2 are given)
    #[arg(long)]
    f: Option<String>,
    /// Space dimension (required with --alpha1/--alpha2 or --b)
    #[arg(long)]
    n: Option<u32>,
    /// Inner radius (required with --alpha1/--alpha2 or --b)
    #[arg(long)]
    a: Option<f64>,
    /// First slope of an in-place pair
    #[arg(long, requires = "alpha2")]
    alpha1: Option<f64>,
    /// Second slope of an in-place pair
    #[arg(long, requires = "alpha1")]
    alpha2: Option<f64>,
    /// Solve the annulus at this outer radius and compare the two solutions
    #[arg(long, conflicts_with_all = ["alpha1", "alpha2", "profile1", "profile2"])]
    b: Option<f64>,
    /// First saved profile CSV
    #[arg(long, requires = "profile2", conflicts_with_all = ["alpha1", "alpha2"])]
    profile1: Option<PathBuf>,
    /// Second saved profile CSV
    #[arg(long, requires = "profile1")]
    profile2: Option<PathBuf>,
    /// JSON destination for the full comparison report
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    controls: ControlArgs,
}

fn run_compare(args: CompareArgs) -> Result<()> {
    let resolved = resolve_controls(&args.controls)?;
    let need_problem = || -> Result<RadialProblem> {
        match (&args.f, args.n, args.a) {
            (Some(f), Some(n), Some(a)) => {
                RadialProblem::new(n, a, NonlinearitySpec::parse(f)?)
            }
            _ => Err(Error::Domain(
                "compare needs --f, --n, --a unless loading saved profiles".into(),
            )),
        }
    };
    if resolved.dry_run {
        return emit(json!({
            "command": "compare", "dry_run": true,
            "alpha1": args.alpha1, "alpha2": args.alpha2, "b": args.b,
            "profile1": args.profile1, "profile2": args.profile2,
            "controls": resolved.controls, "out": args.out,
        }));
    }
    let (p1, p2) = match (&args.profile1, &args.profile2, args.alpha1, args.alpha2, args.b) {
        (Some(path1), Some(path2), None, None, None) => {
            (load_profile(path1)?, load_profile(path2)?)
        }
        (None, None, Some(a1), Some(a2), None) => {
            let problem = need_problem()?;
            (
                integrate(&problem, a1, &resolved.controls, Mode::Shooting)?,
                integrate(&problem, a2, &resolved.controls, Mode::Shooting)?,
            )
        }
        (None, None, None, None, Some(b)) => {
            let problem = need_problem()?;
            let grid = resolve_grid(&resolved.cfg, None, None, None)?;
            match solve_annulus(&problem, b, &grid, &resolved.controls)? {
                AnnulusOutcome::Continuum { .. } => {
                    return Err(Error::State(
                        "the annulus has a continuum of solutions; no discrete pair to compare"
                            .into(),
                    ))
                }
                AnnulusOutcome::Solutions(mut solutions) => {
                    if solutions.len() != 2 {
                        return Err(Error::State(format!(
                            "expected exactly 2 annulus solutions to compare, found {}",
                            solutions.len()
                        )));
                    }
                    let second = solutions.pop().unwrap().profile;
                    let first = solutions.pop().unwrap().profile;
                    (first, second)
                }
            }
        }
        _ => {
            return Err(Error::Domain(
                "compare needs --alpha1/--alpha2, or --b, or --profile1/--profile2".into(),
            ))
        }
    };
    let report = compare_pair(&p1, &p2)?;
    let mut files = Vec::new();
    if let Some(out) = &args.out {
        write_atomic(out, &format!("{}\n", serde_json::to_string_pretty(&report)?))?;
        files.push(out.clone());
    }
    emit(json!({
        "command": "compare",
        "report": report,
        "consistent": report.consistent(),
        "seed": resolved.seed,
        "files": files,
    }))
}

#[derive(Args)]
struct RegionArgs {
    /// Family: plus (s^p + s^q) or minus (s^p - s^q)
    #[arg(long)]
    family: String,
    /// Space dimension (n >= 2)
    #[arg(long)]
    n: u32,
    /// Larger exponent
    #[arg(long)]
    p: f64,
    /// Smaller exponent
    #[arg(long)]
    q: f64,
}

fn run_region(args: RegionArgs) -> Result<()> {
    let verdict = match args.family.as_str() {
        "plus" => regions::classify_plus(args.n, args.p, args.q)?,
        "minus" => regions::classify_minus(args.n, args.p, args.q)?,
        other => {
            return Err(Error::Domain(format!(
                "unknown family {other:?}: expected \"plus\" or \"minus\""
            )))
        }
    };
    emit(json!({ "command": "region", "verdict": verdict }))
}

#[derive(Args)]
struct RegionCurveArgs {
    /// Family: plus or minus
    #[arg(long)]
    family: String,
    /// Space dimension (n >= 2)
    #[arg(long)]
    n: u32,
    /// Lower end of the q interval
    #[arg(long)]
    q_lo: f64,
    /// Upper end of the q interval
    #[arg(long)]
    q_hi: f64,
    /// Number of samples [default 256]
    #[arg(long, default_value_t = 256)]
    count: usize,
    /// CSV destination for q,p_bound
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_region_curve(args: RegionCurveArgs) -> Result<()> {
    let curve = regions::region_curve(&args.family, args.n, args.q_lo, args.q_hi, args.count)?;
    let mut files = Vec::new();
    if let Some(out) = &args.out {
        let mut body = String::from("q,p_bound\n");
        for &(q, p) in &curve {
            body.push_str(&format!("{},{}\n", fmt_num(q), fmt_num(p)));
        }
        write_atomic(out, &body)?;
        files.push(out.clone());
    }
    let first = curve.first().copied().unwrap();
    let last = curve.last().copied().unwrap();
    emit(json!({
        "command": "region-curve",
        "family": args.family, "n": args.n,
        "count": curve.len(),
        "first": {"q": first.0, "p_bound": fmt_num(first.1)},
        "last": {"q": last.0, "p_bound": fmt_num(last.1)},
        "files": files,
    }))
}

#[derive(Args)]
struct ConditionsArgs {
    /// Nonlinearity, e.g. plus:p=3,q=1
    #[arg(long)]
    f: String,
    /// Space dimension (n >= 2)
    #[arg(long)]
    n: u32,
    /// Upper end of the sampling range [default 1e3]
    #[arg(long)]
    s_max: Option<f64>,
    /// Sampling density for conditions without closed forms [default 256]
    #[arg(long)]
    points_per_decade: Option<usize>,
    /// JSON destination for the full report
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_conditions(args: ConditionsArgs) -> Result<()> {
    let spec = NonlinearitySpec::parse(&args.f)?;
    let mut grid = SampleGrid::default();
    if let Some(s_max) = args.s_max {
        grid.s_max = s_max;
    }
    if let Some(ppd) = args.points_per_decade {
        grid.points_per_decade = ppd;
    }
    let report = spec.check_conditions(args.n, &grid)?;
    let mut files = Vec::new();
    if let Some(out) = &args.out {
        write_atomic(out, &format!("{}\n", serde_json::to_string_pretty(&report)?))?;
        files.push(out.clone());
    }
    emit(json!({
        "command": "conditions",
        "report": report,
        "all_hold": report.all_hold(),
        "files": files,
    }))
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn init_threads() {
    if let Ok(text) = std::env::var("ANNULUS_THREADS") {
        if let Ok(threads) = text.parse::<usize>() {
            if threads > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Scan(args) => run_scan(args),
        Command::Exterior(args) => run_exterior(args),
        Command::Functionals(args) => run_functionals(args),
        Command::Compare(args) => run_compare(args),
        Command::Region(args) => run_region(args),
        Command::RegionCurve(args) => run_region_curve(args),
        Command::Conditions(args) => run_conditions(args),
    }
}

/// Parse and run; the returned code is ready for `std::process::exit`.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_threads();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn args(parts: &[&str]) -> Vec<String> {
        std::iter::once("annulus".to_string())
            .chain(parts.iter().map(|s| s.to_string()))
            .collect()
    }

    #[test]
    fn profile_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let problem =
            RadialProblem::new(3, 1.0, NonlinearitySpec::parse("minus:p=3,q=1").unwrap()).unwrap();
        let controls = IntegratorControls::with_r_max(60.0);
        let profile = integrate(&problem, 6.0, &controls, Mode::Shooting).unwrap();
        let csv = dir.path().join("orbit.csv");
        let (csv_path, side_path) = save_profile(&profile, &controls, Some(7), &csv).unwrap();
        assert!(csv_path.exists() && side_path.exists());
        assert_eq!(side_path.file_name().unwrap(), "orbit.events.json");

        let loaded = load_profile(&csv).unwrap();
        assert_eq!(loaded.n, profile.n);
        assert_eq!(loaded.nodes.len(), profile.nodes.len());
        assert_eq!(loaded.events.len(), profile.events.len());
        assert_eq!(loaded.termination, profile.termination);
        // Mid-span evaluation through the Hermite fallback stays close to
        // the original dense output.
        let r = 0.5 * (profile.r_start() + profile.r_end());
        let (u0, _) = profile.eval(r).unwrap();
        let (u1, _) = loaded.eval(r).unwrap();
        assert!((u0 - u1).abs() < 1e-8, "round-trip drift {}", u0 - u1);
    }

    #[test]
    fn load_rejects_missing_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("no_sidecar.csv");
        std::fs::write(&csv, "r,u,u_prime,I\n1,0,3,9\n2,1,0,1\n").unwrap();
        assert!(matches!(load_profile(&csv), Err(Error::Data(_))));
    }

    #[test]
    fn config_file_merges_under_flags() {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("lab.conf");
        std::fs::write(&config, "# defaults\nr_max = 30\nrel_tol = 1e-8\n").unwrap();
        let control_args = ControlArgs {
            r_max: Some(44.0), // flag wins over config
            config: Some(config),
            ..Default::default()
        };
        let resolved = resolve_controls(&control_args).unwrap();
        assert_eq!(resolved.controls.r_max, 44.0);
        assert_eq!(resolved.controls.rel_tol, 1e-8);
        assert_eq!(resolved.controls.abs_tol, 1e-12); // untouched default
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("bad.conf");
        std::fs::write(&config, "reltol = 1e-8\n").unwrap();
        let control_args = ControlArgs { config: Some(config), ..Default::default() };
        assert!(matches!(resolve_controls(&control_args), Err(Error::Data(_))));
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.csv");
        write_atomic(&path, "x\n1\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "x\n1\n");
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|ext| ext == "tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn number_formatting_round_trips() {
        for &x in &[0.1, -3.5e-7, 2.0 / 3.0, PI] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
        assert!(fmt_num(f64::NAN).parse::<f64>().unwrap().is_nan());
        assert_eq!(fmt_num(f64::INFINITY).parse::<f64>().unwrap(), f64::INFINITY);
        assert_eq!(fmt_num(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn numbered_paths_keep_extension() {
        assert_eq!(
            numbered_path(Path::new("/tmp/sol.csv"), 1),
            PathBuf::from("/tmp/sol_1.csv")
        );
        assert_eq!(numbered_path(Path::new("bare"), 0), PathBuf::from("bare_0"));
    }

    #[test]
    fn region_command_runs_in_process() {
        let code = run(args(&[
            "region", "--family", "minus", "--n", "3", "--p", "3", "--q", "1",
        ]));
        assert_eq!(code, 0);
    }

    #[test]
    fn solve_requires_a_mode() {
        let code = run(args(&[
            "solve", "--f", "plus:p=3,q=1", "--n", "3", "--a", "1",
        ]));
        assert_eq!(code, 2); // Domain error: neither --alpha nor --b
    }

    #[test]
    fn bad_family_text_exits_with_domain_code() {
        let code = run(args(&[
            "region", "--family", "times", "--n", "3", "--p", "3", "--q", "1",
        ]));
        assert_eq!(code, 2);
    }

    #[test]
    fn dry_run_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("plan.csv");
        let code = run(args(&[
            "solve", "--f", "minus:p=3,q=1", "--n", "3", "--a", "1", "--alpha", "6",
            "--out", out.to_str().unwrap(), "--dry-run",
        ]));
        assert_eq!(code, 0);
        assert!(!out.exists());
    }
}
