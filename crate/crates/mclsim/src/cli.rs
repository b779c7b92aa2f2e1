//! The `mcl` command line.
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 numerical failure,
//! 64 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::diagnostics::{fit_decay, ledger, ledger_csv, parse_trajectory_csv, records};
use crate::discretization::Basis;
use crate::equilibrium::{curvature, solve_equilibrium};
use crate::error::{Error, Result};
use crate::io::{sha256_hex, OutputDir, RunManifest};
use crate::linear_solver::{solve_linear, LinearProblem, NoForcing, Trajectory};
use crate::nonlinear_driver::{
    cosine_perturbation, epsilon_continuation, fixed_point_solve_observed, prepare_initial_data, IterationConfig, MetricReport, Observer, Workspace,
    WorkspaceSizes,
};
use crate::surface::SurfaceFunction;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "mcl", version, about = "Moving-contact-line free-boundary simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for the random initial velocity of `linear`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the parameter chain and the contact law.
    Validate(Common),
    /// Solve for the equilibrium meniscus.
    Equilibrium(Common),
    /// Build the t = 0 Galerkin basis and write a checkpoint.
    Basis(Common),
    /// Unforced linear run around the equilibrium.
    Linear(Common),
    /// Fixed-point solve of the nonlinear problem.
    Nonlinear(Common),
    /// Nonlinear solves over the configured epsilon list.
    Continuation(Common),
    /// Recompute the energy ledger from a stored trajectory.
    Ledger {
        #[command(flatten)]
        common: Common,
        /// Trajectory CSV to replay.
        #[arg(long)]
        input: PathBuf,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Validate(c) | Command::Equilibrium(c) | Command::Basis(c) | Command::Linear(c) | Command::Nonlinear(c) | Command::Continuation(c) => c,
            Command::Ledger { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Equilibrium(_) => "equilibrium",
            Command::Basis(_) => "basis",
            Command::Linear(_) => "linear",
            Command::Nonlinear(_) => "nonlinear",
            Command::Continuation(_) => "continuation",
            Command::Ledger { .. } => "ledger",
        }
    }
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let common = cli.command.common().clone();
    let started = Instant::now();
    let mut manifest = RunManifest {
        subcommand: cli.command.name().to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: common.seed,
        threads: common.threads.unwrap_or(0),
        ..Default::default()
    };
    let config = Config::load(&common.config, std::env::vars());
    if let Ok(cfg) = &config {
        manifest.config = cfg.to_toml_string();
    }
    let mut out = OutputDir::new(&common.out, manifest);
    let result = config.and_then(|cfg| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(common.threads.unwrap_or(0)).build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| execute(&cli.command, &cfg, &mut out))
    });
    let code = match &result {
        Ok(()) => EXIT_OK,
        Err(e) if e.is_numerical() => EXIT_NUMERICAL,
        Err(_) => EXIT_INVALID,
    };
    out.manifest.exit_status = code;
    out.manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    match &result {
        Ok(()) => out.manifest.status = "ok".into(),
        Err(e) => {
            out.manifest.status = e.to_string();
            out.manifest.error_kind = Some(error_kind(e));
            eprintln!("error: {e}");
        }
    }
    if let Err(e) = out.finish() {
        eprintln!("error: cannot write manifest: {e}");
        return if code == EXIT_OK { EXIT_NUMERICAL } else { code };
    }
    code
}

/// Variant name of an error, e.g. `NotContracting`.
fn error_kind(e: &Error) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|ch: char| !ch.is_alphanumeric()).next().unwrap_or_default().to_string()
}

fn execute(cmd: &Command, cfg: &Config, out: &mut OutputDir<'_>) -> Result<()> {
    match cmd {
        Command::Validate(_) => validate(cfg, out),
        Command::Equilibrium(_) => equilibrium(cfg, out),
        Command::Basis(_) => {
            check(cfg)?;
            basis(cfg, out)
        }
        Command::Linear(c) => {
            check(cfg)?;
            linear(cfg, c.seed, out)
        }
        Command::Nonlinear(_) => {
            check(cfg)?;
            nonlinear(cfg, out)
        }
        Command::Continuation(_) => {
            check(cfg)?;
            continuation(cfg, out)
        }
        Command::Ledger { input, .. } => replay_ledger(input, out),
    }
}

fn check(cfg: &Config) -> Result<()> {
    let report = cfg.validate();
    if report.is_valid() {
        Ok(())
    } else {
        Err(Error::Config(report.to_string().trim_end().to_string()))
    }
}

fn validate(cfg: &Config, out: &mut OutputDir<'_>) -> Result<()> {
    let report = cfg.validate();
    let text = report.to_string();
    print!("{text}");
    out.write("validation.txt", text.as_bytes())?;
    if report.is_valid() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} violations", report.violations.len())))
    }
}

fn workspace(cfg: &Config) -> Result<Workspace<f64>> {
    let d = &cfg.discretization;
    let sizes = WorkspaceSizes {
        degree: d.degree,
        quadrature: d.quadrature,
        pressure_degree: d.pressure_degree,
        lift_modes: d.cosine_modes,
        equilibrium_nodes: d.equilibrium_nodes,
        basis_size: d.basis_size,
    };
    Workspace::new(cfg.physical.clone(), cfg.contact_law()?, sizes)
}

fn initial_surface(cfg: &Config) -> SurfaceFunction<f64> {
    cosine_perturbation(cfg.physical.ell, cfg.discretization.surface_degree, cfg.run.amplitude, cfg.run.mode)
}

fn equilibrium(cfg: &Config, out: &mut OutputDir<'_>) -> Result<()> {
    let eq = solve_equilibrium(&cfg.physical, cfg.discretization.equilibrium_nodes, 1e-13)?;
    let mut text = String::new();
    let _ = writeln!(text, "# p0 {:.17e}", eq.p0);
    let _ = writeln!(text, "# omega_eq {:.17e}", eq.omega_eq);
    let _ = writeln!(text, "# min_height {:.17e}", eq.min_height);
    let _ = writeln!(text, "# newton_iterations {}", eq.iterations);
    let _ = writeln!(text, "x zeta0 dzeta0 curvature");
    let ell = cfg.physical.ell;
    for k in 0..=200 {
        let x = -ell + 2.0 * ell * k as f64 / 200.0;
        let d = eq.zeta0.derivs(x);
        let _ = writeln!(text, "{:.17e} {:.17e} {:.17e} {:.17e}", x, d[0], d[1], curvature(d[1], d[2]));
    }
    out.write("equilibrium.txt", text.as_bytes())?;
    out.fact("p0", eq.p0);
    out.fact("omega_eq", eq.omega_eq);
    println!("equilibrium: p0 = {:.12e}, contact angle = {:.12e}", eq.p0, eq.omega_eq);
    Ok(())
}

fn write_basis(ws: &Workspace<f64>, basis: &Basis<f64>, out: &mut OutputDir<'_>) -> Result<()> {
    let mesh = ws.mesh.to_text();
    let bytes = basis.to_checkpoint();
    out.manifest.mesh_sha256 = Some(sha256_hex(mesh.as_bytes()));
    out.manifest.basis_sha256 = Some(sha256_hex(&bytes));
    out.write("mesh.txt", mesh.as_bytes())?;
    out.write("basis.bin", &bytes)?;
    let mut eig = String::from("k,lambda\n");
    for (k, l) in basis.lambda.iter().enumerate() {
        let _ = writeln!(eig, "{k},{l:.17e}");
    }
    out.write("eigenvalues.csv", eig.as_bytes())?;
    out.fact("basis_defect_h0", basis.defects.0);
    out.fact("basis_defect_w", basis.defects.1);
    Ok(())
}

fn basis(cfg: &Config, out: &mut OutputDir<'_>) -> Result<()> {
    let ws = workspace(cfg)?;
    let eta0 = initial_surface(cfg);
    let zero = SurfaceFunction::zero(cfg.physical.ell, 2);
    let cache0 = ws.geometry(&eta0, &zero)?;
    let basis = ws.basis(&cache0, cfg.run.epsilon)?;
    write_basis(&ws, &basis, out)?;
    println!("basis: m = {}, lambda_1 = {:.6e}, lambda_m = {:.6e}", basis.m, basis.lambda[0], basis.lambda[basis.m - 1]);
    Ok(())
}

/// Write trajectory, ledger and a one-row summary; returns the summary row.
fn write_run(prefix: &str, tr: &Trajectory<f64>, extra: &[(&str, String)], out: &mut OutputDir<'_>) -> Result<String> {
    let recs = records(tr);
    let samples = ledger(&recs, tr.epsilon);
    out.write(&format!("{prefix}trajectory.csv"), tr.to_csv().as_bytes())?;
    out.write(&format!("{prefix}ledger.csv"), ledger_csv(&samples).as_bytes())?;
    let t: Vec<f64> = recs.iter().map(|r| r.t).collect();
    let e: Vec<f64> = recs.iter().map(|r| r.energy).collect();
    let (lam, chat) = match fit_decay(&t, &e, None) {
        Ok(f) => (f.lambda, f.c_hat),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let max_id = samples.iter().map(|s| s.identity_residual.abs()).fold(0.0, f64::max);
    let mut row = format!("{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e}", tr.epsilon, tr.states.len() - 1, lam, chat, max_id, e[e.len() - 1]);
    for (_, v) in extra {
        row.push(',');
        row.push_str(v);
    }
    Ok(row)
}

const SUMMARY_HEADER: &str = "epsilon,steps,lambda_hat,c_hat,max_identity_residual,final_energy";

fn linear(cfg: &Config, seed: u64, out: &mut OutputDir<'_>) -> Result<()> {
    let ws = workspace(cfg)?;
    let ell = cfg.physical.ell;
    let zero = SurfaceFunction::zero(ell, 2);
    let cache = ws.geometry(&zero, &zero)?;
    let basis = ws.basis(&cache, cfg.run.epsilon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d0: Vec<f64> = (0..basis.m).map(|_| cfg.run.amplitude * rng.gen_range(-1.0..1.0)).collect();
    let horizon = cfg.run.t_final * cfg.run.horizon_scale;
    let steps = cfg.run.steps.max(1);
    let problem = LinearProblem {
        params: cfg.physical.clone(),
        epsilon: cfg.run.epsilon,
        mesh: &ws.mesh,
        basis: &basis,
        pressure: &ws.pressure,
        frames: std::slice::from_ref(&cache),
        forcing: &NoForcing,
        d0,
        xi0: initial_surface(cfg),
        dt: horizon / steps as f64,
        steps,
    };
    let tr = solve_linear(&problem)?;
    write_basis(&ws, &basis, out)?;
    let row = write_run("", &tr, &[], out)?;
    out.write("summary.csv", format!("{SUMMARY_HEADER}\n{row}\n").as_bytes())?;
    out.fact("horizon", horizon);
    println!("linear: {} steps, E(0) = {:.6e}, E(T) = {:.6e}", steps, tr.states[0].energy, tr.final_state().energy);
    Ok(())
}

fn iteration_config(cfg: &Config, horizon: f64) -> IterationConfig<f64> {
    IterationConfig {
        delta: cfg.run.delta,
        horizon,
        steps: cfg.run.steps.max(1),
        tol: cfg.run.tol,
        max_iter: cfg.run.max_iter,
        epsilon: cfg.run.epsilon,
        alpha: cfg.indices.alpha,
    }
}

/// Collects per-iteration metrics so they survive a failed solve.
#[derive(Default)]
struct IterationLog(Mutex<Vec<MetricReport<f64>>>);

impl Observer<f64> for IterationLog {
    fn iteration(&self, n: usize, report: &MetricReport<f64>) {
        eprintln!("iteration {n}: distance {:.6e}", report.total());
        self.0.lock().expect("log lock").push(*report);
    }
}

fn iterations_csv(reports: &[MetricReport<f64>]) -> String {
    let mut s = String::from(
        "iteration,distance,ratio,velocity_sup_h1,velocity_l2_h1,velocity_l2_h2,pressure_l2_h1,surface_sup_h1,surface_sup_frac,surface_eps_dtt,corner_sup\n",
    );
    for (k, r) in reports.iter().enumerate() {
        let ratio = if k == 0 { f64::NAN } else { r.total() / reports[k - 1].total() };
        let _ = write!(s, "{},{:.17e},{:.17e}", k + 1, r.total(), ratio);
        for v in r.components() {
            let _ = write!(s, ",{v:.17e}");
        }
        s.push('\n');
    }
    s
}

fn nonlinear(cfg: &Config, out: &mut OutputDir<'_>) -> Result<()> {
    let ws = workspace(cfg)?;
    let eps = cfg.run.epsilon;
    let horizon = cfg.run.horizon(eps);
    out.fact("horizon", horizon);
    out.fact("t_user", cfg.run.t_final);
    out.fact("epsilon_squared", eps * eps);
    let init = prepare_initial_data(&ws, &initial_surface(cfg), eps, cfg.run.delta)?;
    out.fact("initial_smallness", init.smallness);
    let log = IterationLog::default();
    let res = fixed_point_solve_observed(&ws, &init, &iteration_config(cfg, horizon), &log);
    let reports = log.0.into_inner().expect("log lock");
    out.write("iterations.csv", iterations_csv(&reports).as_bytes())?;
    let res = res?;
    out.fact("iterations", res.iterations);
    let final_ratio = res.ratios.last().copied().unwrap_or(f64::NAN);
    let row = write_run("", &res.trajectory, &[("iterations", res.iterations.to_string()), ("final_ratio", format!("{final_ratio:.17e}"))], out)?;
    out.write("summary.csv", format!("{SUMMARY_HEADER},iterations,final_ratio\n{row}\n").as_bytes())?;
    println!("nonlinear: converged in {} iterations, ratios {:?}", res.iterations, res.ratios);
    Ok(())
}

fn continuation(cfg: &Config, out: &mut OutputDir<'_>) -> Result<()> {
    let ws = workspace(cfg)?;
    let eps = &cfg.run.epsilons;
    let horizon = eps.iter().map(|&e| cfg.run.horizon(e)).fold(f64::INFINITY, f64::min);
    out.fact("horizon", horizon);
    let res = epsilon_continuation(&ws, &initial_surface(cfg), &iteration_config(cfg, horizon), eps)?;
    let mut summary = format!("{SUMMARY_HEADER},iterations,final_ratio\n");
    for (i, run) in res.runs.iter().enumerate() {
        let final_ratio = run.ratios.last().copied().unwrap_or(f64::NAN);
        let row = write_run(
            &format!("eps_{i}_"),
            &run.trajectory,
            &[("iterations", run.iterations.to_string()), ("final_ratio", format!("{final_ratio:.17e}"))],
            out,
        )?;
        summary.push_str(&row);
        summary.push('\n');
    }
    out.write("summary.csv", summary.as_bytes())?;
    let mut dist = String::from("epsilon_a,epsilon_b,distance\n");
    for (w, d) in res.epsilons.windows(2).zip(&res.distances) {
        let _ = writeln!(dist, "{:.17e},{:.17e},{:.17e}", w[0], w[1], d);
    }
    out.write("distances.csv", dist.as_bytes())?;
    println!("continuation: distances {:?}", res.distances);
    Ok(())
}

fn replay_ledger(input: &Path, out: &mut OutputDir<'_>) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| Error::Config(format!("cannot read {}: {e}", input.display())))?;
    let (epsilon, recs) = parse_trajectory_csv(&text)?;
    let samples = ledger(&recs, epsilon);
    out.write("ledger.csv", ledger_csv(&samples).as_bytes())?;
    out.fact("input_sha256", sha256_hex(text.as_bytes()));
    println!("ledger: {} samples", samples.len());
    Ok(())
}
