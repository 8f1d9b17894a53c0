use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use vecell_core::baselines::brute_force;
use vecell_core::rng::{derive_rng, Tag};
use vecell_core::scenario::VehicleState;
use vecell_core::sim::SimEnv;

use vecell_cli::{config, csvout, report, runner};

#[derive(Parser)]
#[command(name = "vecell", about = "Vehicular edge network simulator and policy trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) an experiment plan.
    Run {
        /// Plan file with flat key = value lines.
        #[arg(long)]
        plan: PathBuf,
        /// Output directory; reusing one resumes the run.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Re-evaluate a stored policy artifact on fresh test episodes.
    Evaluate {
        #[arg(long)]
        artifact: PathBuf,
        /// Test episodes (default 250).
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Print the per-state exhaustive-search table for a preset.
    Oracle {
        /// Preset name: full or tiny.
        #[arg(long)]
        preset: String,
        /// Channel seed for the per-state realizations.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Summarize a finished run as a benchmark comparison table.
    Report {
        /// Output directory of a finished run.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { plan, out, workers } => {
            let plan = config::load_plan(&plan)?;
            runner::run_plan(&plan, &out, workers)?;
            println!("run complete: {}", out.join("summary.csv").display());
        }
        Command::Evaluate { artifact, episodes } => {
            let (stats, row) = runner::evaluate_artifact(&artifact, episodes)?;
            println!("{}", csvout::SUMMARY_HEADER);
            println!("{row}");
            eprintln!(
                "scheme {} over {} episodes: avg reward {:.6}, success {:.4}",
                stats.scheme, stats.episodes, stats.avg_reward, stats.success_prob
            );
        }
        Command::Oracle { preset, seed } => {
            print!("{}", oracle_table(&preset, seed)?);
        }
        Command::Report { out } => {
            let text = report::build_report(&out)?;
            let path = out.join("report.txt");
            std::fs::write(&path, &text)
                .with_context(|| format!("cannot write {}", path.display()))?;
            print!("{text}");
        }
    }
    Ok(())
}

/// Per-state exhaustive search at bin centers with one channel draw each.
fn oracle_table(preset: &str, seed: u64) -> Result<String> {
    let (scenario, fading, mode) = config::preset(preset)?;
    let env = SimEnv::new(scenario, fading).map_err(|e| anyhow!("{e}"))?;
    let catalog = env.build_catalog(mode, 1 << 22).map_err(|e| anyhow!("{e}"))?;
    let cfg = env.cfg();
    let mut rows = Vec::with_capacity(cfg.state_count());
    for bin in 0..cfg.state_count() {
        let x = ((bin as f64 + 0.5) * cfg.step_length()).min(cfg.roi_length);
        let state = VehicleState {
            x_shared: x,
            lane_of_vu: (0..cfg.vu_count).map(|i| i % cfg.lanes).collect(),
            step: bin as u32,
            terminal: false,
        };
        let mut rng = derive_rng(seed, &[Tag::S("oracle"), Tag::U(bin as u64)]);
        let chan = env.realize(&state, &mut rng);
        let res = brute_force(&env, &state, &chan, &catalog).map_err(|e| anyhow!("{e}"))?;
        rows.push((bin, res.index, res.reward));
    }
    Ok(csvout::oracle_table_csv(&rows))
}
