//! Command-line front end: `gen`, `solve`, `certify`, `verify`, `sweep`.
//!
//! Exit codes: 0 ok, 2 configuration, 3 numerical (including a failed check), 4 I/O.
//! `FLAGOPT_TOL` overrides the default certification and diagnostic tolerances.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FlagError, Result};
use crate::flag::{run, Mode, RunParams, Trajectory};
use crate::generate::{generate, Family, GenSpec};
use crate::io;
use crate::linalg;
use crate::maps::sampling::{sample_niceness, SamplingPlan};
use crate::maps::{MapConfig, MapInstance, MapKind, MatrixPolicy, NiceCertificate};
use crate::problem::ConstrainedProblem;
use crate::random;
use crate::rates::{reference_solve, verify_trajectory, RateReport, ReferenceSolution};

/// Default relative tolerance of the sampled descent inequality.
pub const CERTIFY_TOL: f64 = 1e-7;
/// Default relative tolerance of the per-iteration inequality recorded by `solve`.
pub const PILLAR_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "flagopt", version, about = "FLAG runs, certificates and rate checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded test problem as JSON.
    Gen(GenArgs),
    /// Run FLAG and write the trajectory CSV and a JSON report.
    Solve(SolveArgs),
    /// Print a map's certificate and sample its descent inequality.
    Certify(CertifyArgs),
    /// Check a recorded trajectory against the rate bounds.
    Verify(VerifyArgs),
    /// Run every map × mode combination on one or more problems.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// eq-qp, lasso-split, block-qp or smooth-composite
    pub family: Family,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub conditioning: f64,
    #[arg(long, short, default_value = "problem.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone, PartialEq)]
pub struct MapArgs {
    #[arg(long)]
    pub map: MapKind,
    /// auto[:margin], identity:scale or gram:shift
    #[arg(long, default_value = "auto")]
    pub policy: MatrixPolicy,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// JSON run configuration; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<PathBuf>,
    #[arg(long)]
    pub map: Option<MapKind>,
    /// auto[:margin], identity:scale or gram:shift [default: auto]
    #[arg(long)]
    pub policy: Option<MatrixPolicy>,
    /// [default: 1]
    #[arg(long)]
    pub rho: Option<f64>,
    /// fast, classic or ergodic [default: fast]
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Multiplier step; defaults to δ (fast, classic) or 1 (ergodic).
    #[arg(long)]
    pub mu: Option<f64>,
    /// [default: 1000]
    #[arg(long)]
    pub iters: Option<usize>,
    /// Output stem: writes `<out>.csv` and `<out>.json` [default: run]
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Skip the reference solve (no s_k or bound columns).
    #[arg(long)]
    pub no_reference: bool,
}

/// `solve` settings as read from a `--config` file. Every field is optional.
///
/// ```json
/// {"problem": "p.json", "map": "prox-lin-al", "policy": "gram:0.25", "mode": "fast",
///  "rho": 1.0, "mu": null, "iters": 2000, "out": "runs/qp", "no_reference": false}
/// ```
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub problem: Option<PathBuf>,
    pub map: Option<String>,
    pub policy: Option<String>,
    pub mode: Option<String>,
    pub rho: Option<f64>,
    pub mu: Option<f64>,
    pub iters: Option<usize>,
    pub out: Option<PathBuf>,
    pub no_reference: Option<bool>,
}

/// Fully resolved `solve` settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: PathBuf,
    pub map: MapArgs,
    pub mode: Mode,
    pub mu: Option<f64>,
    pub iters: usize,
    pub out: PathBuf,
    pub no_reference: bool,
}

impl RunConfig {
    /// Command-line flags over the config file over the defaults.
    pub fn resolve(a: &SolveArgs) -> Result<RunConfig> {
        let file = match &a.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| FlagError::Io(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str::<RunConfigFile>(&text)
                    .map_err(|e| FlagError::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfigFile::default(),
        };
        fn parsed<T: std::str::FromStr<Err = FlagError>>(s: &Option<String>) -> Result<Option<T>> {
            s.as_deref().map(str::parse).transpose()
        }
        let problem = a
            .problem
            .clone()
            .or(file.problem)
            .ok_or_else(|| FlagError::Config("no problem given (--problem or \"problem\" in --config)".into()))?;
        let map = match a.map {
            Some(m) => m,
            None => parsed(&file.map)?
                .ok_or_else(|| FlagError::Config("no map given (--map or \"map\" in --config)".into()))?,
        };
        let policy = match a.policy {
            Some(p) => p,
            None => parsed(&file.policy)?.unwrap_or_default(),
        };
        let mode = match a.mode {
            Some(m) => m,
            None => parsed(&file.mode)?.unwrap_or(Mode::Fast),
        };
        Ok(RunConfig {
            problem,
            map: MapArgs {
                map,
                policy,
                rho: a.rho.or(file.rho).unwrap_or(1.0),
            },
            mode,
            mu: a.mu.or(file.mu),
            iters: a.iters.or(file.iters).unwrap_or(1000),
            out: a.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("run")),
            no_reference: a.no_reference || file.no_reference.unwrap_or(false),
        })
    }
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long, default_value_t = 100)]
    pub states: usize,
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative tolerance; defaults to FLAGOPT_TOL or 1e-7.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Optional path for the JSON report.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub problem: Vec<PathBuf>,
    /// Map kinds to try; all by default.
    #[arg(long, num_args = 1..)]
    pub maps: Vec<MapKind>,
    /// Modes to try; all by default.
    #[arg(long, num_args = 1..)]
    pub modes: Vec<Mode>,
    #[arg(long, default_value = "auto")]
    pub policy: MatrixPolicy,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, short, default_value = "sweep")]
    pub out: PathBuf,
}

/// `FLAGOPT_TOL` if set and valid, else `default`.
pub fn env_tol(default: f64) -> Result<f64> {
    match std::env::var("FLAGOPT_TOL") {
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
            _ => Err(FlagError::Config(format!("FLAGOPT_TOL must be a positive number, got '{s}'"))),
        },
        Err(_) => Ok(default),
    }
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

#[derive(Debug, Serialize)]
struct ReferenceJson {
    psi_star: f64,
    c: f64,
    kkt_residual: f64,
    agreement: Option<f64>,
}

impl From<&ReferenceSolution> for ReferenceJson {
    fn from(r: &ReferenceSolution) -> Self {
        ReferenceJson {
            psi_star: r.psi_star,
            c: r.c,
            kkt_residual: r.kkt_residual,
            agreement: r.agreement,
        }
    }
}

#[derive(Debug, Serialize)]
struct PillarJson {
    checked: usize,
    tol: f64,
    max_ratio: f64,
    first_violation: Option<usize>,
}

#[derive(Debug, Serialize)]
struct FinalJson {
    psi_x: f64,
    feas_x: f64,
    psi_z: f64,
    feas_z: f64,
    y_norm: f64,
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    map: String,
    policy: String,
    mode: String,
    rho: f64,
    mu: f64,
    p: u8,
    delta: f64,
    iters: usize,
    #[serde(rename = "final")]
    last: FinalJson,
    reference: Option<ReferenceJson>,
    pillar: Option<PillarJson>,
    rates: Option<RateReport>,
    ergodic_point: Option<Vec<f64>>,
}

fn solve_report(
    traj: &Trajectory,
    policy: &MatrixPolicy,
    reference: Option<&ReferenceSolution>,
    cert: &NiceCertificate,
    pillar_tol: f64,
) -> SolveReport {
    let m = &traj.meta;
    let last = traj.records.last().expect("initial record present");
    let pillar = reference.map(|_| PillarJson {
        checked: traj.pillar.len(),
        tol: pillar_tol,
        max_ratio: traj
            .pillar
            .iter()
            .map(|c| (c.lhs - c.rhs) / c.scale)
            .fold(f64::NEG_INFINITY, f64::max),
        first_violation: traj.pillar_violation(pillar_tol).map(|c| c.k),
    });
    SolveReport {
        map: m.map.to_string(),
        policy: policy.to_string(),
        mode: m.mode.to_string(),
        rho: m.rho,
        mu: m.mu,
        p: m.p,
        delta: m.delta,
        iters: traj.iterations(),
        last: FinalJson {
            psi_x: last.psi_x,
            feas_x: last.feas_x,
            psi_z: last.psi_z,
            feas_z: last.feas_z,
            y_norm: last.y_norm,
        },
        reference: reference.map(ReferenceJson::from),
        pillar,
        rates: reference.map(|r| verify_trajectory(traj, r, cert)),
        ergodic_point: traj.ergodic_point.as_ref().map(|z| z.iter().copied().collect()),
    }
}

fn instance(prob: &ConstrainedProblem, args: &MapArgs) -> Result<MapInstance> {
    let cfg = MapConfig::from_policy(args.map, args.rho, args.policy, prob)?;
    MapInstance::new(cfg, prob)
}

fn cmd_gen(a: &GenArgs) -> Result<i32> {
    let spec = GenSpec {
        family: a.family,
        n: a.n,
        m: a.m,
        sigma: a.sigma,
        seed: a.seed,
        conditioning: a.conditioning,
    };
    let prob = generate(&spec)?;
    io::write_problem(&a.out, &prob)?;
    let feas = prob
        .feasible_point()
        .map(|x| prob.constraint_residual(x).norm())
        .unwrap_or(f64::NAN);
    println!("wrote {}", a.out.display());
    println!("family {}  n {}  m {}  sigma {}  seed {}", a.family, prob.n(), prob.m(), prob.sigma(), a.seed);
    if let Some(split) = prob.block() {
        println!("blocks u {}  v {}  sigma_f {}  sigma_g {}", split.u_dim, split.v_dim, split.sigma_f, split.sigma_g);
    }
    println!("feasible point residual {feas:.1e}");
    Ok(0)
}

fn run_one(
    prob: &ConstrainedProblem,
    inst: &MapInstance,
    params: &RunParams,
    reference: Option<&ReferenceSolution>,
    policy: &MatrixPolicy,
    stem: &Path,
    pillar_tol: f64,
) -> Result<SolveReport> {
    let traj = run(prob, inst, params, reference)?;
    let header = io::CsvHeader::from_meta(&traj.meta, &policy.to_string(), traj.iterations());
    io::save_trajectory(&with_ext(stem, "csv"), &header, &traj)?;
    let report = solve_report(&traj, policy, reference, inst.certificate(), pillar_tol);
    io::write_json(&with_ext(stem, "json"), &report)?;
    Ok(report)
}

fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    let a = RunConfig::resolve(args)?;
    let prob = io::read_problem(&a.problem)?;
    let inst = instance(&prob, &a.map)?;
    let mut params = RunParams::new(a.mode, a.iters);
    params.mu = a.mu;
    let pillar_tol = env_tol(PILLAR_TOL)?;
    let reference = if a.no_reference {
        None
    } else {
        match reference_solve(&prob) {
            Ok(r) => Some(r),
            Err(e) => {
                eprintln!("warning: {e}; continuing without a reference solution");
                None
            }
        }
    };
    let report = run_one(&prob, &inst, &params, reference.as_ref(), &a.map.policy, &a.out, pillar_tol)?;
    println!(
        "{} {} (p = {}, δ = {:.6}, μ = {:.6}): {} iterations",
        report.map, report.mode, report.p, report.delta, report.mu, report.iters
    );
    println!("Ψ(x) = {:.12e}  ‖𝒜x − b‖ = {:.3e}", report.last.psi_x, report.last.feas_x);
    if let Some(r) = &report.rates {
        println!(
            "bounds {}  condition_P {:?}  slope {}",
            if r.bounds_hold { "hold" } else { "FAIL" },
            r.condition_p,
            r.slope.map_or("n/a".to_string(), |s| format!("{s:.3}"))
        );
    }
    println!("wrote {} and {}", with_ext(&a.out, "csv").display(), with_ext(&a.out, "json").display());
    Ok(0)
}

fn spectrum_line(name: &str, m: &nalgebra::DMatrix<f64>) -> String {
    let eig = linalg::sym_eigenvalues(m);
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    format!("{name} spectrum [{lo:.6e}, {hi:.6e}]")
}

fn cmd_certify(a: &CertifyArgs) -> Result<i32> {
    let prob = io::read_problem(&a.problem)?;
    let inst = instance(&prob, &a.map)?;
    let cert = inst.certificate();
    let tol = match a.tol {
        Some(t) => t,
        None => env_tol(CERTIFY_TOL)?,
    };
    println!("map {}  rho {}  policy {}", cert.map, a.map.rho, a.map.policy);
    println!("delta {:.12}  sigma {}  regime p = {}", cert.delta, cert.sigma, cert.regime());
    println!("{}", spectrum_line("P", cert.p.matrix()));
    println!("{}", spectrum_line("Q", cert.q.matrix()));
    for c in &cert.conditions {
        println!("  {:<40} margin {:+.6e}", c.name, c.margin);
    }
    let plan = SamplingPlan {
        states: a.states,
        points_per_state: a.points,
        ..SamplingPlan::default()
    };
    let mut rng = random::seeded(a.seed);
    let rep = sample_niceness(&inst, cert, &prob, &plan, tol, &mut rng)?;
    println!(
        "sampled {} points: max residual/scale {:.3e} (tol {:.1e}), violations {}",
        rep.samples, rep.max_ratio, tol, rep.violations
    );
    if rep.passed() {
        println!("PASS");
        Ok(0)
    } else {
        println!("FAIL");
        Ok(3)
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let prob = io::read_problem(&a.problem)?;
    let (header, records) = io::load_trajectory(&a.trajectory)?;
    let args = MapArgs {
        map: header.map,
        policy: header.policy.parse()?,
        rho: header.rho,
    };
    let inst = instance(&prob, &args)?;
    let reference = reference_solve(&prob)?;
    if header.z0.len() != prob.n() || header.y0.len() != prob.m() {
        return Err(FlagError::InvalidData("trajectory start does not match the problem dimensions".into()));
    }
    let cert = inst.certificate();
    let b = crate::rates::bound_constant(
        cert.p.matrix(),
        &reference.x_star,
        &header.z0,
        &header.y0,
        header.mu,
        header.rho,
        reference.c,
        header.p,
    );
    let met = header.p == 1 || cert.fast_rate_condition();
    let report = crate::rates::verify_rates(
        &records,
        reference.psi_star,
        b,
        reference.c,
        header.p,
        met,
        header.mode.is_ergodic(),
    );
    println!(
        "{} {}: {} iterations, B = {:.6e}, c = {:.6e}",
        header.map,
        header.mode,
        records.len() - 1,
        b,
        reference.c
    );
    println!("condition_P {:?}", report.condition_p);
    match report.first_violation {
        Some(n) => println!("first violation at N = {n}"),
        None => println!("max gap/bound {:.3e}  max feas/bound {:.3e}", report.max_gap_ratio, report.max_feas_ratio),
    }
    println!("slope {}", report.slope.map_or("n/a".into(), |s| format!("{s:.3}")));
    if let Some(n) = &report.note {
        println!("note: {n}");
    }
    println!("{}", if report.bounds_hold { "PASS" } else { "FAIL" });
    if let Some(out) = &a.out {
        io::write_json(out, &report)?;
    }
    Ok(if report.bounds_hold { 0 } else { 3 })
}

#[derive(Debug, Serialize)]
struct SweepRow {
    problem: String,
    map: String,
    mode: String,
    status: String,
    psi_x: Option<f64>,
    feas_x: Option<f64>,
    bounds_hold: Option<bool>,
    slope: Option<f64>,
}

fn cmd_sweep(a: &SweepArgs) -> Result<i32> {
    let maps: Vec<MapKind> = if a.maps.is_empty() { MapKind::ALL.to_vec() } else { a.maps.clone() };
    let modes: Vec<Mode> = if a.modes.is_empty() { Mode::ALL.to_vec() } else { a.modes.clone() };
    fs::create_dir_all(&a.out).map_err(|e| FlagError::Io(format!("{}: {e}", a.out.display())))?;
    let pillar_tol = env_tol(PILLAR_TOL)?;

    let mut problems = Vec::new();
    for path in &a.problem {
        let prob = io::read_problem(path)?;
        let reference = reference_solve(&prob).ok();
        let name = path.file_stem().map_or("problem".into(), |s| s.to_string_lossy().into_owned());
        problems.push((name, prob, reference));
    }
    let mut jobs: Vec<(usize, MapKind, Mode)> = Vec::new();
    for i in 0..problems.len() {
        for &k in &maps {
            for &m in &modes {
                jobs.push((i, k, m));
            }
        }
    }

    let work = |&(i, kind, mode): &(usize, MapKind, Mode)| -> SweepRow {
        let (name, prob, reference) = &problems[i];
        let mut row = SweepRow {
            problem: name.clone(),
            map: kind.to_string(),
            mode: mode.to_string(),
            status: "ok".into(),
            psi_x: None,
            feas_x: None,
            bounds_hold: None,
            slope: None,
        };
        let args = MapArgs {
            map: kind,
            policy: a.policy,
            rho: a.rho,
        };
        let stem = a.out.join(format!("{name}_{kind}_{mode}"));
        let res = instance(prob, &args).and_then(|inst| {
            run_one(prob, &inst, &RunParams::new(mode, a.iters), reference.as_ref(), &a.policy, &stem, pillar_tol)
        });
        match res {
            Ok(rep) => {
                row.psi_x = Some(rep.last.psi_x);
                row.feas_x = Some(rep.last.feas_x);
                row.bounds_hold = rep.rates.as_ref().map(|r| r.bounds_hold);
                row.slope = rep.rates.as_ref().and_then(|r| r.slope);
            }
            Err(e) => row.status = format!("skipped: {e}"),
        }
        row
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.max(1))
        .build()
        .map_err(|e| FlagError::Config(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| jobs.par_iter().map(work).collect());

    let summary = a.out.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let ran = rows.iter().filter(|r| r.status == "ok").count();
    println!("{ran} of {} combinations ran; summary in {}", rows.len(), summary.display());
    Ok(0)
}

pub fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main_exit_code() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
