//! Seeded end-to-end experiment execution: initialize a market, train or
//! apply each pricing method, evaluate one episode, and persist every
//! artifact deterministically.
//!
//! Random streams are derived per seed from fixed labels, so every method
//! sees the same initial states and intention profiles, and adding one
//! consumer never perturbs another.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rand::Rng;
use swdpm_core::baselines::{init_subscription_offers, subscription_policy, uniform_policy};
use swdpm_core::env::run_policy_episode;
use swdpm_core::market::sample_intentions;
use swdpm_core::metrics::{
    self, compare_report, efficiency, episode_report, fairness_metric, format_float,
};
use swdpm_core::qlearning::{finetune, generate_history, pretrain, HistoryParams};
use swdpm_core::rng::stream;
use swdpm_core::{
    ComparisonTable, EpisodeReport, EpisodeRun, IntentionProfile, MarketState, QTable, TraderState,
};

use crate::logs::{self, RunMeta};
use crate::spec::{ExperimentSpec, Method, StartStates};

/// Everything a full experiment produced in memory.
#[derive(Debug)]
pub struct RunArtifacts {
    pub reports: Vec<EpisodeReport>,
    pub table: ComparisonTable,
}

/// The initial trader states used for one seed: fixed, or drawn from the
/// configured pool with replacement.
pub fn initial_traders(spec: &ExperimentSpec, seed: u64) -> Vec<TraderState> {
    match &spec.start {
        StartStates::Fixed(traders) => traders.clone(),
        StartStates::Pool { pool, traders } => {
            let mut rng = stream(seed, &["init"]);
            (0..*traders)
                .map(|_| pool[rng.gen_range(0..pool.len())])
                .collect()
        }
    }
}

fn run_dir(out_dir: &Path, method: Method, seed: u64) -> PathBuf {
    out_dir.join(format!("{}-seed{}", method.name(), seed))
}

/// Trains the pricing table for one seed: random-behavior history, then
/// replay pretraining. Returns the table and the dataset size.
pub fn train_table(
    spec: &ExperimentSpec,
    seed: u64,
    start: &MarketState,
    profiles: &[IntentionProfile],
) -> (QTable, usize) {
    let params = HistoryParams {
        episodes: spec.history_episodes,
        epsilon: 0.0,
    };
    let data = generate_history(
        std::slice::from_ref(start),
        profiles,
        &spec.market,
        &params,
        None,
        &mut stream(seed, &["history"]),
    );
    let mut table = QTable::new();
    pretrain(
        &mut table,
        &data,
        &spec.market,
        spec.market.xi,
        &mut stream(seed, &["pretrain"]),
    );
    (table, data.records.len())
}

/// Runs one (method, seed) evaluation episode and writes its artifact
/// directory. Returns the episode report.
pub fn run_one(
    spec: &ExperimentSpec,
    method: Method,
    seed: u64,
    out_dir: &Path,
) -> Result<EpisodeReport> {
    let market = &spec.market;
    let traders = initial_traders(spec, seed);
    let start = MarketState::new(traders.clone());
    let profiles = sample_intentions(&mut stream(seed, &["intentions"]), market, &traders);

    let mut offers = None;
    let mut table = None;
    let run: EpisodeRun = match method {
        Method::Swdpm => {
            let (mut t, _) = train_table(spec, seed, &start, &profiles);
            let run = finetune(
                &mut t,
                &start,
                &profiles,
                market,
                &mut stream(seed, &["match", "swdpm"]),
                &mut stream(seed, &["tie"]),
            );
            table = Some(t);
            run
        }
        Method::Uniform => {
            let mut policy_rng = stream(seed, &["uniform-policy"]);
            run_policy_episode(
                &start,
                &profiles,
                market,
                |s| uniform_policy(s, market, &mut policy_rng),
                &mut stream(seed, &["match", "uniform"]),
            )
            .context("uniform policy emitted an infeasible action")?
        }
        Method::Subscription => {
            let posted = init_subscription_offers(&start, market, &mut stream(seed, &["offers"]));
            let run = run_policy_episode(
                &start,
                &profiles,
                market,
                |s| subscription_policy(s, &profiles, &posted, market),
                &mut stream(seed, &["match", "subscription"]),
            )
            .context("subscription policy emitted an infeasible action")?;
            offers = Some(posted);
            run
        }
    };

    let report = episode_report(method.name(), seed, &run, &profiles, market);

    let dir = run_dir(out_dir, method, seed);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let meta = RunMeta {
        method: method.name().to_string(),
        seed,
        completed: run.completed,
        history_episodes: (method == Method::Swdpm).then_some(spec.history_episodes),
        market: market.clone(),
        traders,
        profiles,
        offers,
    };
    fs::write(
        dir.join(logs::META_FILE),
        toml::to_string_pretty(&meta).context("serializing run metadata")?,
    )?;
    fs::write(dir.join(logs::TRADE_LOG_FILE), logs::trade_log_csv(&run))?;
    fs::write(dir.join(logs::FILLS_FILE), logs::fills_csv(&run))?;
    let (metrics_text, summary_text) = logs::metric_files(&report);
    fs::write(dir.join(logs::METRICS_FILE), metrics_text)?;
    fs::write(dir.join(logs::SUMMARY_FILE), summary_text)?;
    if let Some(t) = &table {
        t.save(&dir.join(logs::QTABLE_FILE), market)
            .context("saving the pricing table")?;
    }
    Ok(report)
}

/// Runs the whole experiment: every seed, every method, comparison table,
/// and plot data. Fully deterministic for a given (spec, out_dir-relative)
/// invocation.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<RunArtifacts> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut reports = Vec::new();
    for &seed in &spec.seeds {
        for &method in &spec.methods {
            reports.push(run_one(spec, method, seed, out_dir)?);
        }
    }
    let table = compare_report(&reports).context("building the comparison table")?;
    let mut buf = Vec::new();
    metrics::comparison_csv(&mut buf, &table)?;
    fs::write(out_dir.join("comparison.csv"), buf)?;
    emit_plot_data(&reports, &out_dir.join("plots"))?;
    Ok(RunArtifacts { reports, table })
}

/// Per-trade running metric series, one value row per executed trade:
/// feasibility, efficiency, and fairness pooled up to that step, and
/// cumulative welfare.
fn trade_series(report: &EpisodeReport) -> Vec<(usize, [f64; 4])> {
    let mut out = Vec::new();
    let mut proposals = 0usize;
    let mut accomplished = 0usize;
    let mut welfare = 0.0f64;
    let mut volume = 0.0f64;
    let mut prices: Vec<f64> = Vec::new();
    for step in &report.steps {
        proposals += step.proposals;
        accomplished += step.accomplished;
        welfare += step.welfare;
        volume += step.traded_volume;
        prices.extend_from_slice(&step.unit_prices);
        if step.traded_volume > 0.0 {
            let phi_f = if proposals == 0 {
                1.0
            } else {
                accomplished as f64 / proposals as f64
            };
            let phi_e = efficiency(&metrics::StepMetrics {
                time: step.time,
                proposals,
                accomplished,
                welfare,
                traded_volume: volume,
                unit_prices: Vec::new(),
            });
            out.push((
                out.len() + 1,
                [phi_f, phi_e, fairness_metric(&prices), welfare],
            ));
        }
    }
    out
}

/// Writes the four per-metric series files (trade index vs. value, one
/// labeled series per method and seed).
pub fn emit_plot_data(reports: &[EpisodeReport], plots_dir: &Path) -> Result<()> {
    fs::create_dir_all(plots_dir).with_context(|| format!("creating {}", plots_dir.display()))?;
    let panels = ["feasibility", "efficiency", "fairness", "welfare"];
    let mut files = vec![String::from("method,seed,trade_index,value\n"); panels.len()];
    for report in reports {
        for (idx, values) in trade_series(report) {
            for (file, value) in files.iter_mut().zip(values) {
                writeln!(
                    file,
                    "{},{},{},{}",
                    report.method,
                    report.seed,
                    idx,
                    format_float(value)
                )
                .expect("writing to a String cannot fail");
            }
        }
    }
    for (panel, text) in panels.iter().zip(files) {
        fs::write(plots_dir.join(format!("{panel}.csv")), text)?;
    }
    Ok(())
}

/// Renders the comparison table for the terminal.
pub fn render_comparison(table: &ComparisonTable) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<14} {:>6} {:>7} {:>8} {:>8} {:>8} {:>10}",
        "method", "seed", "times", "phi_f", "phi_e", "phi_r", "sum_w"
    )
    .expect("writing to a String cannot fail");
    let fmt3 = |x: f64| format!("{x:.3}");
    for r in &table.rows {
        writeln!(
            out,
            "{:<14} {:>6} {:>7} {:>8} {:>8} {:>8} {:>10}",
            r.method,
            r.seed,
            r.times,
            fmt3(r.phi_f),
            fmt3(r.phi_e),
            fmt3(r.phi_r),
            fmt3(r.sum_w)
        )
        .expect("writing to a String cannot fail");
    }
    for m in &table.methods {
        writeln!(
            out,
            "{:<14} {:>6} {:>7} {:>8} {:>8} {:>8} {:>10}",
            m.method,
            "mean",
            fmt3(m.mean_times),
            fmt3(m.mean_phi_f),
            fmt3(m.mean_phi_e),
            fmt3(m.mean_phi_r),
            fmt3(m.mean_sum_w)
        )
        .expect("writing to a String cannot fail");
    }
    out
}
