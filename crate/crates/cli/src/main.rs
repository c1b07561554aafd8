use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use lpdp_cli::ablate::{ablate, write_ablation, Axis};
use lpdp_cli::config::ExperimentConfig;
use lpdp_cli::diagnose::{diagnose, write_diagnostics};
use lpdp_cli::run::{execute, write_outputs};
use lpdp_cli::verify::{run_suites, Preset};

/// Local-perturbation lookahead guidance for discrete edit samplers.
#[derive(Parser)]
#[command(name = "lpdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides run.workers.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides run.out.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_path(&self.config)?;
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if let Some(w) = self.workers {
            anyhow::ensure!(w >= 1, "--workers must be >= 1");
            cfg.run.workers = w;
        }
        if let Some(o) = &self.out {
            cfg.run.out = o.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Roll out every method block and write records, summary.csv and manifest.json.
    Run(Overrides),
    /// Brute-force checks of the planner identities on random small instances.
    Verify {
        /// tiny, default, or fault-tau (a negative control that must fail).
        #[arg(long, default_value = "default")]
        preset: Preset,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Candidate-rule diagnostics at the guided decision points of a finished run.
    Diagnose {
        #[command(flatten)]
        common: Overrides,
        /// Run directory to read; defaults to the resolved output directory.
        #[arg(long)]
        run: Option<PathBuf>,
        /// Cap on the number of guided decision points used.
        #[arg(long, default_value_t = 200)]
        max_roots: usize,
    },
    /// One-factor sweeps around the first lpdp method block.
    Ablate {
        #[command(flatten)]
        common: Overrides,
        /// Axes to sweep (repeatable); all four when omitted.
        #[arg(long)]
        axis: Vec<Axis>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(o) => {
            let cfg = o.load()?;
            let out = execute(&cfg)?;
            let dir = cfg.base_dir.join(&cfg.run.out);
            write_outputs(&cfg, &out, &dir)?;
            for m in &out.methods {
                let s = &m.summary;
                println!(
                    "{:<28} reward {:.4} ± {:.4}  calls/sample {:.1}  traj_ll {:.2}  jsd3 {}",
                    s.method,
                    s.reward_mean,
                    s.reward_stderr,
                    s.calls_per_sample,
                    s.traj_ll,
                    s.jsd3.map_or("-".to_string(), |j| format!("{j:.4}")),
                );
            }
            println!("wrote {}", dir.display());
        }
        Command::Verify { preset, seed, json } => {
            let report = run_suites(preset, seed);
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.render());
            }
            if !report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Diagnose { common, run, max_roots } => {
            let cfg = common.load()?;
            let dir = run.unwrap_or_else(|| cfg.base_dir.join(&cfg.run.out));
            let rows = diagnose(&cfg, &dir, max_roots)?;
            let path = dir.join("diagnostics.csv");
            write_diagnostics(&path, &rows)?;
            for r in &rows {
                println!(
                    "{:<28} {:<9} roots {:<4} cand {:.3} paths {:.3} top1 max/lse {:.3}/{:.3} tail {:.3} mass_eff {}",
                    r.method,
                    r.rule,
                    r.root_instances,
                    r.cand_ratio,
                    r.path_ratio,
                    r.top1_agreement_max,
                    r.top1_agreement_lse,
                    r.mixed_rank_tail,
                    r.mass_eff.map_or("-".to_string(), |m| format!("{m:.3} ({})", r.mass_eff_note)),
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Ablate { common, axis } => {
            let cfg = common.load()?;
            let axes = if axis.is_empty() { Axis::ALL.to_vec() } else { axis };
            let rows = ablate(&cfg, &axes)?;
            let dir = cfg.base_dir.join(&cfg.run.out);
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("ablation.csv");
            write_ablation(&path, &rows)?;
            for r in &rows {
                println!(
                    "{:<16} {:<10} reward {:.4} ± {:.4}  calls/sample {:.1}",
                    r.axis, r.value, r.reward_mean, r.reward_stderr, r.calls_per_sample
                );
            }
            println!("wrote {}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
