use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use pcl_sim::runner::{
    compare_strategies, ev_curve, run, sweep_batch_size, write_ev_csv, write_long_csv, write_run_outputs, Budget,
    RunConfig,
};
use pcl_sim::strategies::StrategyConfig;
use pcl_sim::{selfcheck, Result, SimError};

#[derive(Parser)]
#[command(name = "pcl-sim", version, about = "Prompt-selection strategies on a synthetic RL task")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Overrides `seed` in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (a CSV for `run`, a file or directory for the others).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, conflicts_with = "budget_sim_seconds")]
    budget_steps: Option<u64>,
    #[arg(long)]
    budget_sim_seconds: Option<f64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.budget_steps {
            cfg.budget = Budget::steps(n);
        }
        if let Some(t) = self.budget_sim_seconds {
            cfg.budget = Budget::sim_time(t);
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        cfg.validate()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its trace.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Sweep batch shapes under the config's budget.
    SweepBatch {
        config: PathBuf,
        /// Comma-separated `MxN` pairs.
        #[arg(long, default_value = "16x16,32x16,64x16,128x16,256x16,512x16,256x32,1024x16,1024x32,1024x64")]
        pairs: String,
        /// Comma-separated seeds.
        #[arg(long, default_value = "0,1,2,3,4")]
        seeds: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare strategies listed in a comparison file.
    Compare {
        /// TOML with a `[base]` run config, `[[strategies]]` and `seeds`.
        file: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Value-model explained variance against j-sample estimators.
    EvCurve {
        config: PathBuf,
        #[arg(long, default_value = "1,2,3,4,8,16")]
        js: String,
        #[arg(long, default_value_t = 25)]
        every: u64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the brute-force oracle checks.
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareFile {
    base: RunConfig,
    strategies: Vec<StrategyConfig>,
    seeds: Vec<u64>,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| SimError::Config(format!("bad {what} entry '{x}'"))))
        .collect()
}

fn parse_pairs(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(|p| {
            let (m, n) = p.trim().split_once('x').ok_or_else(|| SimError::Config(format!("pair '{p}' is not MxN")))?;
            let bad = || SimError::Config(format!("pair '{p}' is not MxN"));
            Ok((m.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?))
        })
        .collect()
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), value)?;
    Ok(())
}

/// Returns whether every self-check passed; other commands return `true`.
fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, overrides } => {
            let mut cfg = RunConfig::from_file(&config)?;
            overrides.apply(&mut cfg)?;
            let trace = run(&cfg)?;
            let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("trace.csv"));
            let sidecar = write_run_outputs(&trace, &out)?;
            println!(
                "{} steps, {:.1} simulated s, final mean success {:.4}, stopped: {:?}",
                trace.steps(),
                trace.cumulative_sim_time_s(),
                trace.final_mean_success,
                trace.termination
            );
            println!("wrote {} and {}", out.display(), sidecar.display());
        }
        Command::SweepBatch { config, pairs, seeds, overrides } => {
            let mut cfg = RunConfig::from_file(&config)?;
            overrides.apply(&mut cfg)?;
            let report = sweep_batch_size(&cfg, &parse_pairs(&pairs)?, &parse_list(&seeds, "seed")?)?;
            println!("equal-length knee b* = {}", report.knee_equal_length);
            for p in &report.points {
                println!(
                    "m={:5} n={:3} b={:6}  final success {:.4}  time/step {:8.2}s",
                    p.m, p.n, p.batch, p.mean_final_success, p.mean_step_time_s
                );
            }
            let out = overrides.out.unwrap_or_else(|| PathBuf::from("sweep.json"));
            write_json(&report, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Compare { file, overrides } => {
            let mut cmp: CompareFile = toml::from_str(&std::fs::read_to_string(&file)?)?;
            overrides.apply(&mut cmp.base)?;
            for s in &cmp.strategies {
                s.validate()?;
            }
            let seeds = overrides.seed.map_or(cmp.seeds.clone(), |s| vec![s]);
            let report = compare_strategies(&cmp.base, &cmp.strategies, &seeds)?;
            for r in &report.runs {
                println!(
                    "{:18} seed {:3}  steps {:5}  final {:.4}  waste {:9}  mean ER {:.3}",
                    r.strategy, r.seed, r.steps, r.final_mean_success, r.total_wasted_rollouts, r.mean_effective_ratio
                );
            }
            let dir = overrides.out.unwrap_or_else(|| PathBuf::from("compare"));
            std::fs::create_dir_all(&dir)?;
            write_json(&report.runs, &dir.join("summary.json"))?;
            write_long_csv(&report.traces, BufWriter::new(File::create(dir.join("long.csv"))?))?;
            println!("wrote {}", dir.display());
        }
        Command::EvCurve { config, js, every, overrides } => {
            let mut cfg = RunConfig::from_file(&config)?;
            overrides.apply(&mut cfg)?;
            let points = ev_curve(&cfg, &parse_list(&js, "j")?, every)?;
            for p in &points {
                println!("step {:5}  value EV {:.4}  ~{:.2} samples", p.step, p.value_ev, p.equivalent_samples);
            }
            let out = overrides.out.unwrap_or_else(|| PathBuf::from("ev_curve.csv"));
            write_ev_csv(&points, BufWriter::new(File::create(&out)?))?;
            println!("wrote {}", out.display());
        }
        Command::Selfcheck { seed } => {
            let outcomes = selfcheck::run_all(seed);
            for c in &outcomes {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return Ok(outcomes.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
