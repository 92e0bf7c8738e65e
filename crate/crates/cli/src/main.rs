//! `glavg`: simulate the slow-fast system, estimate the averaged drift, and
//! run the convergence studies. Every run writes its outputs and a
//! `manifest.json` into `--out`; passing that manifest back as `--config`
//! reproduces the outputs byte for byte.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use glavg::averaging::{estimate_fbar, simulate_averaged, simulate_frozen_with};
use glavg::experiments::{convergence_study, delta_sweep, galerkin_study, validate_properties};
use glavg::io::{
    parse_config_text, parse_config_with_env, write_json, write_table, write_trajectory,
    write_trajectory_jsonl, Cell, RunConfig, RunManifest, Table,
};
use glavg::rng::{path_seed, RngStream, Stream};
use glavg::sim::simulate_pair;
use glavg::{Error, Trajectory};

const MANIFEST: &str = "manifest.json";
const DEFAULT_CONFIG: &str = "eps = 0.01\nT = 1.0\n";

#[derive(Parser)]
#[command(
    name = "glavg",
    version,
    about = "Slow-fast stochastic Ginzburg-Landau averaging simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML or JSON config, or a manifest from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Number of Monte Carlo paths (overrides the config).
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Also write trajectories as JSON lines.
    #[arg(long, global = true)]
    jsonl: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// One path of (X, Y).
    Simulate,
    /// One path of the frozen fast equation.
    Frozen,
    /// Ergodic estimate of the averaged drift at the frozen state.
    Fbar,
    /// One path of the averaged slow equation.
    Averaged,
    /// Sup-norm error of the averaged approximation over the eps grid.
    Converge,
    /// Auxiliary-process discrepancy over the delta grid.
    DeltaSweep,
    /// Truncation differences over the m grid.
    Galerkin,
    /// Property report for the config.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Frozen => "frozen",
            Command::Fbar => "fbar",
            Command::Averaged => "averaged",
            Command::Converge => "converge",
            Command::DeltaSweep => "delta-sweep",
            Command::Galerkin => "galerkin",
            Command::Validate => "validate",
        }
    }
}

enum Failure {
    Invalid(String),
    Aborted(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::StudyAborted { .. } => Failure::Aborted(e.to_string()),
            e => Failure::Invalid(e.to_string()),
        }
    }
}

struct Run<'a> {
    cli: &'a Cli,
    cfg: RunConfig,
    manifest: RunManifest,
}

impl Run<'_> {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.cli.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.cli.out.join(name)
    }

    fn trajectory(&mut self, traj: &Trajectory, stem: &str) -> Result<(), Failure> {
        let csv = self.path(&format!("{stem}.csv"));
        write_trajectory(traj, &csv, Some(MANIFEST))?;
        if self.cli.jsonl {
            let jsonl = self.path(&format!("{stem}.jsonl"));
            write_trajectory_jsonl(traj, &jsonl)?;
        }
        Ok(())
    }

    fn table(&mut self, table: &Table, name: &str) -> Result<(), Failure> {
        let p = self.path(name);
        write_table(table, &p, Some(MANIFEST))?;
        Ok(())
    }
}

fn overrides(cli: &Cli) -> Vec<(String, String)> {
    let mut vars: Vec<(String, String)> = std::env::vars().collect();
    if let Some(seed) = cli.seed {
        vars.push(("GLAVG_SEED".into(), seed.to_string()));
    }
    if let Some(paths) = cli.paths {
        vars.push(("GLAVG_STUDY__PATHS".into(), paths.to_string()));
    }
    vars
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let vars = overrides(cli);
    let parsed = match &cli.config {
        Some(path) => parse_config_with_env(path, vars),
        None => parse_config_text(Path::new("<defaults>.toml"), DEFAULT_CONFIG, vars),
    };
    Ok(parsed?.1)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let started = Instant::now();
    let cfg = load(cli)?;
    let manifest = RunManifest::new(cli.command.name(), &cfg);
    let mut run = Run { cli, cfg, manifest };
    let sys = run.cfg.system.clone();
    let mut failed_checks = false;

    match cli.command {
        Command::Simulate => {
            let (x, y) = simulate_pair(&sys, path_seed(sys.seed, 0))?;
            run.trajectory(&x, "x")?;
            run.trajectory(&y, "y")?;
            run.say(format!(
                "simulated {} steps, ‖X_T‖ = {:.6e}",
                sys.steps(),
                x.last().map_or(0.0, |v| v.norm())
            ));
        }
        Command::Frozen => {
            let mut rng = RngStream::for_path(run.cfg.frozen.seed, Stream::Frozen, sys.m);
            let traj = simulate_frozen_with(
                &sys,
                &run.cfg.frozen_x,
                &sys.y0,
                run.cfg.frozen.dt,
                run.cfg.frozen_horizon,
                sys.record_stride,
                &mut rng,
            )?;
            run.trajectory(&traj, "y_frozen")?;
            run.say(format!("frozen path with {} snapshots", traj.len()));
        }
        Command::Fbar => {
            let est = estimate_fbar(&sys, &run.cfg.frozen_x, &sys.y0, &run.cfg.frozen)?;
            let mut table =
                Table::new(&["k", "cos_value", "cos_spread", "sin_value", "sin_spread"]);
            for k in 1..=sys.m {
                let i = k as i64;
                table.rows.push(vec![
                    Cell::Int(k as u64),
                    Cell::Float(est.value.coeff(i)),
                    Cell::Float(est.spread.coeff(i)),
                    Cell::Float(est.value.coeff(-i)),
                    Cell::Float(est.spread.coeff(-i)),
                ]);
            }
            run.table(&table, "fbar.csv")?;
            run.manifest.flagged_paths = usize::from(est.low_confidence);
            run.say(format!(
                "‖f̄‖ = {:.6e}, max batch spread {:.3e}{}",
                est.value.norm(),
                est.max_spread(),
                if est.low_confidence {
                    " (low confidence)"
                } else {
                    ""
                }
            ));
        }
        Command::Averaged => {
            let traj = simulate_averaged(&sys, path_seed(sys.seed, 0), &run.cfg.averaged)?;
            run.trajectory(&traj, "x_bar")?;
            run.say(format!(
                "averaged path, mode {:?}",
                run.cfg.averaged.resolved_mode(&sys)
            ));
        }
        Command::Converge => {
            let study = convergence_study(&sys, &run.cfg.eps_grid, &run.cfg.study)?;
            run.table(&Table::from(&study.table), "converge.csv")?;
            run.manifest.flagged_paths = study.table.rows.iter().map(|r| r.n_flagged).sum();
            for r in &study.table.rows {
                run.say(format!(
                    "eps = {:<8} median = {:.4e}  trimmed = {:.4e}  flagged = {}",
                    r.eps, r.median_err, r.trimmed_mean_10pct, r.n_flagged
                ));
            }
        }
        Command::DeltaSweep => {
            let sweep = delta_sweep(&sys, &run.cfg.delta_grid, &run.cfg.study)?;
            run.table(&Table::from(&sweep), "delta_sweep.csv")?;
            run.manifest.flagged_paths = sweep.rows.iter().map(|r| r.n_flagged).sum();
            for r in &sweep.rows {
                run.say(format!(
                    "delta = {:<8} ∫‖Y-Ŷ‖ = {:.4e}  sup‖X-X̂‖ = {:.4e}",
                    r.delta, r.median_y_integral, r.median_x_sup
                ));
            }
            run.say(format!("log-log slope {:.3}", sweep.y_slope));
        }
        Command::Galerkin => {
            let rows = galerkin_study(&sys, &run.cfg.m_grid, &run.cfg.study)?;
            run.table(&Table::from(rows.as_slice()), "galerkin.csv")?;
            run.manifest.flagged_paths = rows.iter().map(|r| r.n_flagged).sum();
            for r in &rows {
                run.say(format!(
                    "m = {:<4} ‖X^m - X^2m‖ = {:.4e}",
                    r.m, r.median_diff
                ));
            }
        }
        Command::Validate => {
            let report = validate_properties(&sys);
            let p = run.path("validate_report.json");
            write_json(&report, &p)?;
            for c in &report.checks {
                run.say(format!(
                    "{} {:<48} {:.4e} (limit {:.4e}) {}",
                    if c.passed { "pass" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.threshold,
                    c.detail
                ));
            }
            failed_checks = !report.all_passed();
        }
    }

    run.manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    let mp = cli.out.join(MANIFEST);
    run.manifest.write(&mp)?;
    if failed_checks {
        return Err(Failure::Invalid("property validation failed".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Aborted(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
