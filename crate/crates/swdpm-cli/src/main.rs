//! Command-line entry point for the data-market simulator.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use swdpm_cli::logs;
use swdpm_cli::runner::{self, render_comparison};
use swdpm_cli::spec::{load_spec, ExperimentSpec, Method};
use swdpm_core::market::sample_intentions;
use swdpm_core::rng::stream;
use swdpm_core::MarketState;

#[derive(Parser)]
#[command(name = "swdpm", version, about = "Multi-round data market simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SpecArgs {
    /// Experiment spec file (TOML).
    #[arg(long)]
    spec: PathBuf,
    /// Run only this seed instead of the spec's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the spec's `out_dir`; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate trading history and pretrain the pricing table, saving it
    /// without running an evaluation episode.
    Train(SpecArgs),
    /// Run one pricing method end to end.
    Run {
        #[command(flatten)]
        common: SpecArgs,
        /// Pricing method: swdpm, uniform, or subscription.
        #[arg(long)]
        method: String,
    },
    /// Run every configured method and seed, then print the comparison.
    Compare(SpecArgs),
    /// Recompute metrics from the trade logs under an output directory and
    /// verify they match the stored files.
    Metrics {
        /// Output directory holding run subdirectories.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(common: &SpecArgs) -> Result<(ExperimentSpec, PathBuf)> {
    let mut spec = load_spec(&common.spec)?;
    if let Some(seed) = common.seed {
        spec.seeds = vec![seed];
    }
    let out = common
        .out
        .clone()
        .or_else(|| spec.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((spec, out))
}

fn train(common: &SpecArgs) -> Result<()> {
    let (spec, out) = load(common)?;
    for &seed in &spec.seeds {
        let traders = runner::initial_traders(&spec, seed);
        let start = MarketState::new(traders.clone());
        let profiles =
            sample_intentions(&mut stream(seed, &["intentions"]), &spec.market, &traders);
        let (table, records) = runner::train_table(&spec, seed, &start, &profiles);
        let dir = out.join(format!("swdpm-seed{seed}"));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let meta = logs::RunMeta {
            method: "swdpm".to_string(),
            seed,
            completed: false,
            history_episodes: Some(spec.history_episodes),
            market: spec.market.clone(),
            traders,
            profiles,
            offers: None,
        };
        fs::write(
            dir.join(logs::META_FILE),
            toml::to_string_pretty(&meta).context("serializing run metadata")?,
        )?;
        table
            .save(&dir.join(logs::QTABLE_FILE), &spec.market)
            .context("saving the pricing table")?;
        println!(
            "seed {seed}: pretrained on {records} recorded transitions, table holds {} entries -> {}",
            table.len(),
            dir.display()
        );
    }
    Ok(())
}

fn run(common: &SpecArgs, method: &str) -> Result<()> {
    let method = Method::parse(method).with_context(|| {
        format!("unknown method {method:?} (expected swdpm, uniform, or subscription)")
    })?;
    let (spec, out) = load(common)?;
    let mut incomplete = 0usize;
    for &seed in &spec.seeds {
        let report = runner::run_one(&spec, method, seed, &out)?;
        let status = if report.completed {
            "reached all targets"
        } else {
            "stopped at the step cap without reaching all targets"
        };
        println!(
            "{} seed {seed}: {} trades, cumulative welfare {:.3}, {status}",
            method.name(),
            report.trade_count,
            report.cumulative_welfare
        );
        if !report.completed {
            incomplete += 1;
        }
    }
    if incomplete > 0 {
        eprintln!("{incomplete} run(s) did not reach every trading target");
    }
    Ok(())
}

fn compare(common: &SpecArgs) -> Result<()> {
    let (spec, out) = load(common)?;
    let artifacts = runner::run_experiment(&spec, &out)?;
    print!("{}", render_comparison(&artifacts.table));
    let incomplete: Vec<String> = artifacts
        .reports
        .iter()
        .filter(|r| !r.completed)
        .map(|r| format!("{} seed {}", r.method, r.seed))
        .collect();
    if !incomplete.is_empty() {
        eprintln!(
            "runs that stopped at the step cap without reaching every target: {}",
            incomplete.join(", ")
        );
    }
    println!("artifacts written to {}", out.display());
    Ok(())
}

fn metrics(out: &Path) -> Result<()> {
    let mut checked = 0usize;
    let mut entries: Vec<PathBuf> = fs::read_dir(out)
        .with_context(|| format!("reading {}", out.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for dir in entries {
        if !dir.join(logs::META_FILE).is_file() {
            continue;
        }
        let report = logs::verify_run_dir(&dir)
            .with_context(|| format!("verifying {}", dir.display()))?;
        println!(
            "{}: metrics match the trade log ({} steps, cumulative welfare {:.3})",
            dir.display(),
            report.steps.len(),
            report.cumulative_welfare
        );
        checked += 1;
    }
    if checked == 0 {
        bail!("no run directories found under {}", out.display());
    }
    println!("{checked} run(s) verified");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(common) => train(common),
        Command::Run { common, method } => run(common, method),
        Command::Compare(common) => compare(common),
        Command::Metrics { out } => metrics(out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
