use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use koopact::config::ScenarioConfig;
use koopact::identify::identify;
use koopact::{logs, presets, run_scenario, sweep, sweep_table, verify, GridAxis};

#[derive(Parser)]
#[command(name = "koopact", about = "Adaptive Koopman MPC scenarios and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the nominal lifted model and save it as text.
    Identify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "model.txt")]
        out: PathBuf,
    },
    /// Run one closed-loop scenario and write its CSV tables.
    Run {
        /// Scenario file, or `preset:NAME` for a bundled scenario.
        #[arg(long)]
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write per-step solve wall times to timing.csv.
        #[arg(long)]
        timing: bool,
    },
    /// Run a parameter grid and write the aggregate summary.
    Sweep {
        #[arg(long)]
        config: String,
        /// Axis as `dotted.key=v1,v2,...`; repeat for a product grid.
        #[arg(long, required = true)]
        grid: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run acceptance suites.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Re-emit a plotting table from a run directory.
    Replay {
        #[arg(long)]
        out: PathBuf,
        /// Run directory containing tracking.csv.
        #[arg(long)]
        from: PathBuf,
    },
}

fn load(config: &str, seed: Option<u64>) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = match config.strip_prefix("preset:") {
        Some(name) => presets::by_name(name)?,
        None => ScenarioConfig::load(config.as_ref()).with_context(|| format!("loading {config}"))?,
    };
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    Ok(cfg)
}

/// Returns `Ok(false)` when verification ran but some criterion failed.
fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Identify { config, seed, out } => {
            let mut cfg = load(&config.to_string_lossy(), None)?;
            if let Some(s) = seed {
                cfg.identification.seed = s;
            }
            let model = identify(&cfg)?;
            std::fs::write(&out, model.to_text()).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "lifted dimension {}, model written to {}",
                model.a.nrows(),
                out.display()
            );
        }
        Command::Run { config, seed, out, timing } => {
            let cfg = load(&config, seed)?;
            let output = run_scenario(&cfg)?;
            output.write(&out, timing)?;
            let m = &output.metrics;
            println!(
                "{}: rmse {:.4e}, terminal e_dyn {:.4e}, collisions {}, min h {:.3e}, relaxed solves {}",
                cfg.name, m.rmse, m.terminal_e_dyn, m.collisions, m.min_h_true, m.relaxed_solves
            );
        }
        Command::Sweep { config, grid, seed, out, jobs } => {
            let cfg = load(&config, seed)?;
            let axes = grid.iter().map(|g| GridAxis::parse(g)).collect::<Result<Vec<_>, _>>()?;
            let rows = sweep(&cfg, &axes, jobs)?;
            std::fs::create_dir_all(&out)?;
            sweep_table(&rows).write(&out.join("sweep.csv"))?;
            println!("{} grid points written to {}", rows.len(), out.join("sweep.csv").display());
        }
        Command::Verify { suite, jobs } => {
            if let Some(j) = jobs {
                rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
            }
            let reports = verify(&suite)?;
            for r in &reports {
                println!("{r}");
            }
            return Ok(reports.iter().all(|r| r.passed));
        }
        Command::Replay { out, from } => {
            if !from.is_dir() {
                bail!("{} is not a run directory", from.display());
            }
            let t = logs::replay(&from, &out)?;
            println!("{} rows written to {}", t.rows.len(), out.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
