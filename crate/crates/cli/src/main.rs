//! `nullctl`: config-driven experiments for fictitious-control null controls.
//!
//! ```text
//! nullctl <check|hum|pipeline|sweep|weights|verify-identity|poincare> CONFIG.toml [--out DIR] [--seed N] [-v]
//! ```
//!
//! Exit status: 0 success, 1 configuration error, 2 condition unsatisfied,
//! 3 solver failure. `NULLCTL_THREADS` sizes the worker pool.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use nullctl::algebraic::{det_h_expansion, poincare_rayleigh, verify_lm_identity, verify_ml_identity, HInputs, Theorem2Case};
use nullctl::config::{ModeKind, RunConfig, TrajectoryFormat};
use nullctl::hum::{control_regularity_report, cost_identity_check, penalty_sweep, write_sweep_csv, HumConfig, HumSolver};
use nullctl::model::{check_condition_case_i, det_h_summary, find_i0_for, SampleOptions};
use nullctl::pipeline::{approximate_control, run_pipeline, PipelineMode};
use nullctl::weights::{gaussian_samples, observability_ratio, Observation, RatioOutcome};
use nullctl::{Error, Grid, ProblemSpec, Propagator, Result, Trajectory};

#[derive(Parser, Debug)]
#[command(name = "nullctl", version, about = "Null controls for coupled parabolic systems with m - 1 controls")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for sampled terminal data; overrides `observability.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Increase log verbosity.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report which controllability condition holds.
    Check { config: PathBuf },
    /// Fully controlled penalized HUM solve.
    Hum { config: PathBuf },
    /// HUM plus algebraic reduction, with a verification report.
    Pipeline { config: PathBuf },
    /// Penalty sweep over `sweep.ks`.
    Sweep { config: PathBuf },
    /// Carleman weights and observability ratios.
    Weights { config: PathBuf },
    /// Refinement study of the operator identity for the configured mode.
    VerifyIdentity { config: PathBuf },
    /// Smallest Rayleigh quotient of the observation operator.
    Poincare { config: PathBuf },
}

impl Command {
    fn config(&self) -> &Path {
        match self {
            Command::Check { config }
            | Command::Hum { config }
            | Command::Pipeline { config }
            | Command::Sweep { config }
            | Command::Weights { config }
            | Command::VerifyIdentity { config }
            | Command::Poincare { config } => config,
        }
    }
}

struct Run {
    cfg: RunConfig,
    spec: ProblemSpec,
    grid: Grid,
    out: PathBuf,
    seed: Option<u64>,
}

impl Run {
    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Config(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    }

    fn write_trajectory(&self, stem: &str, traj: &Trajectory) -> Result<()> {
        match self.cfg.output.format {
            TrajectoryFormat::Csv => traj.write_csv(self.create(&format!("{stem}.csv"))?),
            TrajectoryFormat::Binary => traj.write_binary(self.create(&format!("{stem}.bin"))?),
        }
    }

    fn mode(&self) -> Result<PipelineMode> {
        self.cfg.pipeline_mode(&self.spec)
    }
}

fn cmd_check(run: &Run) -> Result<()> {
    let spec = &run.spec;
    let mut report = serde_json::Map::new();
    let mut applies = Vec::new();
    if spec.coefficients.is_constant() {
        match find_i0_for(&spec.coefficients)? {
            Some(i0) => {
                println!("Theorem 1 applies, i0={}", i0 + 1);
                report.insert("theorem1_i0".into(), json!(i0 + 1));
                applies.push("theorem1");
            }
            None => {
                println!("not controllable by Theorem 1 (necessity)");
                report.insert("theorem1_i0".into(), serde_json::Value::Null);
            }
        }
    } else {
        println!("Theorem 1 not applicable: coefficients are not constant");
    }
    if spec.m == 2 {
        let window = run.cfg.window(spec)?;
        let opts = SampleOptions::default();
        if check_condition_case_i(spec, &window, opts)? {
            println!("Theorem 2 case (i) applies");
            applies.push("theorem2_case_i");
        }
        let summary = det_h_summary(spec, &window, opts.samples)?;
        let (t, x) = summary.argmin;
        let reduced = det_h_expansion(&HInputs::at(&spec.coefficients, t, x)?);
        let c_bound = run.cfg.mode.c_bound.unwrap_or(1.0);
        println!(
            "det H over window: min |det H| = {:.16e} at (t, x) = ({:.16e}, {:.16e}); det H / g21 there = {:.16e}",
            summary.min_abs, t, x, reduced
        );
        if summary.min_abs > c_bound {
            println!("Theorem 2 case (ii) applies with C = {c_bound}");
            applies.push("theorem2_case_ii");
        }
        report.insert(
            "det_h".into(),
            json!({
                "min_abs": summary.min_abs,
                "argmin": [t, x],
                "max_abs": summary.max_abs,
                "reduced_at_argmin": reduced,
                "c_bound": c_bound,
            }),
        );
    }
    report.insert("applies".into(), json!(applies));
    run.write_json("check.json", &serde_json::Value::Object(report))?;
    if applies.is_empty() {
        return Err(Error::ConditionUnsatisfied("no controllability condition holds".into()));
    }
    Ok(())
}

fn hum_setup(run: &Run, mode: &PipelineMode) -> Result<HumSolver> {
    let (hum_mode, _) = mode.operator(&run.spec, &run.grid)?;
    let config = HumConfig { mode: hum_mode, ..run.cfg.hum_config() };
    let profile = run.cfg.weights(&run.spec, &run.grid)?;
    let cutoff = run.cfg.cutoff(mode, &run.spec, &run.grid)?;
    HumSolver::new(&run.spec, &run.grid, config, &profile, &cutoff)
}

fn cmd_hum(run: &Run) -> Result<()> {
    let mode = run.mode()?;
    let solver = hum_setup(run, &mode)?;
    let y0 = run.cfg.y0(&run.spec, &run.grid)?;
    let sol = solver.solve(&y0, None, None)?;
    let profile = run.cfg.weights(&run.spec, &run.grid)?;
    let reg = control_regularity_report(&sol, &profile, run.cfg.hum.big_k)?;
    let summary = json!({
        "k": sol.k,
        "terminal_norm": sol.terminal_norm,
        "terminal_ratio": sol.terminal_norm / y0.norm(run.grid.h),
        "cost": sol.cost,
        "cg_iterations": sol.cg_iterations,
        "cg_residual": sol.cg_residual,
        "cost_identity_residual": cost_identity_check(&sol, &y0),
        "characterization_residual": solver.characterization_residual(&sol),
        "weighted_control_norms": reg,
    });
    println!(
        "k = {:.16e}: terminal norm {:.16e}, J_k {:.16e}, {} CG iterations",
        sol.k, sol.terminal_norm, sol.cost, sol.cg_iterations
    );
    run.write_json("hum.json", &summary)?;
    run.write_trajectory("control", &sol.control)?;
    run.write_trajectory("state", &sol.state)?;
    Ok(())
}

fn cmd_pipeline(run: &Run) -> Result<()> {
    let mode = run.mode()?;
    let profile = run.cfg.weights(&run.spec, &run.grid)?;
    let cutoff = run.cfg.cutoff(&mode, &run.spec, &run.grid)?;
    let y0 = run.cfg.y0(&run.spec, &run.grid)?;
    let hum = run.cfg.hum_config();
    let out = match run.cfg.approx_target(&run.spec, &run.grid)? {
        None => run_pipeline(&run.spec, &run.grid, mode, &y0, &hum, &profile, &cutoff)?,
        Some((target, epsilon)) => {
            let a = approximate_control(&run.spec, &run.grid, mode, &y0, &target, epsilon, &hum, &profile, &cutoff)?;
            println!("target reached: |y(T) - yT|^2 = {:.16e} <= {:.16e} at k = {:.16e}", a.achieved_error, epsilon, a.k);
            run.write_json("approx.json", &json!({ "achieved_error": a.achieved_error, "epsilon": epsilon, "k": a.k }))?;
            a.output
        }
    };
    let r = &out.report;
    println!(
        "pde residual {:.16e}, terminal norm {:.16e}, support violation {:.16e}",
        r.pde_residual, r.terminal_norm, r.support_violation
    );
    run.write_json("report.json", &serde_json::to_value(r).map_err(|e| Error::Config(e.to_string()))?)?;
    run.write_trajectory("y", &out.y)?;
    run.write_trajectory("u", &out.u)?;
    Ok(())
}

fn cmd_sweep(run: &Run) -> Result<()> {
    let sweep = run.cfg.sweep.as_ref().ok_or_else(|| Error::Config("missing [sweep] section".into()))?;
    let mode = run.mode()?;
    let solver = hum_setup(run, &mode)?;
    let y0 = run.cfg.y0(&run.spec, &run.grid)?;
    let rows = penalty_sweep(&solver, &y0, &sweep.ks, sweep.warm_start)?;
    write_sweep_csv(&rows, run.create("sweep.csv")?)?;
    for r in &rows {
        println!("k = {:.16e}: terminal norm {:.16e}, J_k {:.16e}", r.k, r.terminal_norm, r.cost);
    }
    Ok(())
}

fn cmd_weights(run: &Run) -> Result<()> {
    let profile = run.cfg.weights(&run.spec, &run.grid)?;
    profile.write_csv(run.create("weights.csv")?)?;
    println!(
        "kappa = {:.16e}, lambda = {:.16e}, s = {:.16e}, p = {}",
        profile.kappa, profile.lambda, profile.s, profile.p
    );
    let obs = match run.cfg.mode.kind {
        ModeKind::Theorem1 => {
            let i0 = find_i0_for(&run.spec.coefficients)?
                .ok_or_else(|| Error::ConditionUnsatisfied("the last equation is decoupled".into()))?;
            let c = &run.spec.coefficients;
            let m = run.spec.m;
            let g = c.g(m - 1, i0).as_constant().ok_or(Error::NotConstant)?;
            let a = c.a(m - 1, i0).as_constant().ok_or(Error::NotConstant)?;
            Observation::Adjoint { g, a, window: run.spec.omega0 }
        }
        _ => Observation::Identity { window: run.spec.omega1 },
    };
    let ocfg = &run.cfg.observability;
    let samples = gaussian_samples(run.spec.m, run.grid.nx, ocfg.samples, run.seed.unwrap_or(ocfg.seed));
    let prop = Propagator::new(&run.spec, &run.grid)?;
    let ratios = observability_ratio(&prop, &profile, obs, &samples)?;
    let mut w = run.create("observability.csv")?;
    writeln!(w, "sample,ratio,log_ratio")?;
    for (k, r) in ratios.iter().enumerate() {
        match r {
            RatioOutcome::Ratio { ratio, log_ratio } => writeln!(w, "{k},{ratio:.16e},{log_ratio:.16e}")?,
            RatioOutcome::ZeroDenominator => writeln!(w, "{k},inf,inf")?,
        }
    }
    Ok(())
}

fn cmd_verify_identity(run: &Run) -> Result<()> {
    let spec = &run.spec;
    let samples = run.cfg.verify_samples(spec.m)?;
    let levels: Vec<(usize, usize)> = run.cfg.verify.levels.iter().map(|l| (l[0], l[1])).collect();
    let window = run.cfg.window(spec)?;
    let report = match run.cfg.mode.kind {
        ModeKind::Theorem1 => {
            let i0 = match run.cfg.verify.i0 {
                Some(i) if i >= 1 => i - 1,
                Some(_) => return Err(Error::Config("verify.i0 is 1-based".into())),
                None => find_i0_for(&spec.coefficients)?
                    .ok_or_else(|| Error::ConditionUnsatisfied("the last equation is decoupled".into()))?,
            };
            verify_lm_identity(spec, i0, &samples, &levels, &window)?
        }
        ModeKind::Theorem2CaseI => verify_ml_identity(spec, Theorem2Case::I, &samples, &levels, &window)?,
        ModeKind::Theorem2CaseII => verify_ml_identity(spec, Theorem2Case::II, &samples, &levels, &window)?,
    };
    let mut w = run.create("identity.csv")?;
    writeln!(w, "nx,nt,h,tau,residual,relative,discrete_residual")?;
    for l in &report.levels {
        writeln!(
            w,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            l.nx, l.nt, l.h, l.tau, l.residual, l.relative, l.discrete_residual
        )?;
    }
    match report.order {
        Some(o) => println!("{:?}: fitted order {o:.16e}", report.kind),
        None => println!("{:?}: residuals at roundoff level", report.kind),
    }
    Ok(())
}

fn cmd_poincare(run: &Run) -> Result<()> {
    let p = &run.cfg.poincare;
    let (g, a) = match (p.g, p.a) {
        (Some(g), Some(a)) => (g, a),
        _ => {
            let c = &run.spec.coefficients;
            let m = run.spec.m;
            let i0 = find_i0_for(c)?.ok_or_else(|| Error::ConditionUnsatisfied("the last equation is decoupled".into()))?;
            let g = p.g.map_or_else(|| c.g(m - 1, i0).as_constant().ok_or(Error::NotConstant), Ok)?;
            let a = p.a.map_or_else(|| c.a(m - 1, i0).as_constant().ok_or(Error::NotConstant), Ok)?;
            (g, a)
        }
    };
    let grid = Grid::new(run.spec.domain, run.spec.horizon, p.nx, 1)?;
    let value = poincare_rayleigh(g, a, &grid)?;
    println!("min Rayleigh quotient (g = {g:.16e}, a = {a:.16e}, nx = {}): {value:.16e}", p.nx);
    run.write_json("poincare.json", &json!({ "g": g, "a": a, "nx": p.nx, "value": value }))
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::from_path(cli.command.config())?;
    let spec = cfg.spec()?;
    let grid = cfg.grid(&spec)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::Config(format!("{}: {e}", cli.out.display())))?;
    let run = Run { cfg, spec, grid, out: cli.out.clone(), seed: cli.seed };
    match &cli.command {
        Command::Check { .. } => cmd_check(&run),
        Command::Hum { .. } => cmd_hum(&run),
        Command::Pipeline { .. } => cmd_pipeline(&run),
        Command::Sweep { .. } => cmd_sweep(&run),
        Command::Weights { .. } => cmd_weights(&run),
        Command::VerifyIdentity { .. } => cmd_verify_identity(&run),
        Command::Poincare { .. } => cmd_poincare(&run),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    if let Some(n) = std::env::var("NULLCTL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        nullctl::par::configure_global_threads(n);
    }
    if let Err(e) = execute(&cli) {
        eprintln!("nullctl: {e}");
        std::process::exit(e.exit_code());
    }
}
