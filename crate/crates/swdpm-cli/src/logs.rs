//! Per-run artifact files: metadata, trade log, fills, and the metric
//! recomputation path that rebuilds a report from nothing but those files.
//!
//! Everything quantitative in the logs is integer grid units, so a report
//! recomputed from disk matches the emitted one bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use swdpm_core::baselines::SubscriptionOffer;
use swdpm_core::metrics::{self, episode_scalars};
use swdpm_core::{
    EpisodeReport, EpisodeRun, Fill, IntentionProfile, MarketConfig, MatchOutcome, StepMetrics,
    TradeAction, TraderState,
};

pub const META_FILE: &str = "run_meta.toml";
pub const TRADE_LOG_FILE: &str = "trade_log.csv";
pub const FILLS_FILE: &str = "fills.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const QTABLE_FILE: &str = "qtable.bin";

/// Everything about a run that is not in its CSV logs: the exact
/// configuration, initial states, and sampled intentions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub method: String,
    pub seed: u64,
    /// False when the episode hit the step cap before targets were met.
    pub completed: bool,
    /// Recorded for learned-pricing runs only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history_episodes: Option<usize>,
    pub market: MarketConfig,
    pub traders: Vec<TraderState>,
    pub profiles: Vec<IntentionProfile>,
    /// Posted offers, recorded for subscription runs only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offers: Option<Vec<SubscriptionOffer>>,
}

/// One step of the trade log as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedStep {
    pub time: u32,
    pub actions: Vec<TradeAction>,
    pub residuals: Vec<TradeAction>,
    pub cleared: bool,
}

/// Renders the trade log: one row per (step, trader) with the proposal, the
/// matchmaking residual, and what actually executed.
pub fn trade_log_csv(run: &EpisodeRun) -> String {
    let mut out = String::new();
    out.push_str(
        "time,trader,proposed_dv,proposed_dc,residual_dv,residual_dc,executed_dv,executed_dc,cleared\n",
    );
    for step in &run.steps {
        for (i, a) in step.actions.iter().enumerate() {
            let r = step.result.outcome.residuals[i];
            let e = step.result.executed[i];
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                step.state.time, i, a.dv, a.dc, r.dv, r.dc, e.dv, e.dc, step.result.outcome.cleared
            )
            .expect("writing to a String cannot fail");
        }
    }
    out
}

/// Renders the executed fills: one row per fill with its step and position.
pub fn fills_csv(run: &EpisodeRun) -> String {
    let mut out = String::new();
    out.push_str("time,fill,maker,taker,volume,payment\n");
    for step in &run.steps {
        for (k, f) in step.result.outcome.fills.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                step.state.time, k, f.maker_id, f.taker_id, f.volume, f.payment
            )
            .expect("writing to a String cannot fail");
        }
    }
    out
}

fn split_row<'a>(line: &'a str, columns: usize, file: &str) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != columns {
        bail!("{file}: expected {columns} fields, got {} in row `{line}`", fields.len());
    }
    Ok(fields)
}

/// Parses a trade log written by [`trade_log_csv`] back into steps.
pub fn parse_trade_log(text: &str) -> Result<Vec<LoggedStep>> {
    let mut lines = text.lines();
    let header = lines.next().context("trade log: missing header")?;
    if header
        != "time,trader,proposed_dv,proposed_dc,residual_dv,residual_dc,executed_dv,executed_dc,cleared"
    {
        bail!("trade log: unexpected header `{header}`");
    }
    let mut steps: Vec<LoggedStep> = Vec::new();
    for line in lines {
        let f = split_row(line, 9, "trade log")?;
        let time: u32 = f[0].parse().context("trade log: time")?;
        let trader: usize = f[1].parse().context("trade log: trader")?;
        let action = TradeAction::new(
            f[2].parse().context("trade log: proposed_dv")?,
            f[3].parse().context("trade log: proposed_dc")?,
        );
        let residual = TradeAction::new(
            f[4].parse().context("trade log: residual_dv")?,
            f[5].parse().context("trade log: residual_dc")?,
        );
        let cleared: bool = f[8].parse().context("trade log: cleared")?;
        if steps.last().map(|s| s.time) != Some(time) {
            steps.push(LoggedStep {
                time,
                actions: Vec::new(),
                residuals: Vec::new(),
                cleared,
            });
        }
        let step = steps.last_mut().expect("just pushed");
        if step.actions.len() != trader || step.cleared != cleared {
            bail!("trade log: inconsistent rows at time {time}");
        }
        step.actions.push(action);
        step.residuals.push(residual);
    }
    Ok(steps)
}

/// Parses the fills file written by [`fills_csv`]; rows grouped by step time.
pub fn parse_fills(text: &str) -> Result<Vec<(u32, Fill)>> {
    let mut lines = text.lines();
    let header = lines.next().context("fills: missing header")?;
    if header != "time,fill,maker,taker,volume,payment" {
        bail!("fills: unexpected header `{header}`");
    }
    let mut fills = Vec::new();
    for line in lines {
        let f = split_row(line, 6, "fills")?;
        fills.push((
            f[0].parse().context("fills: time")?,
            Fill {
                maker_id: f[2].parse().context("fills: maker")?,
                taker_id: f[3].parse().context("fills: taker")?,
                volume: f[4].parse().context("fills: volume")?,
                payment: f[5].parse().context("fills: payment")?,
            },
        ))
    }
    Ok(fills)
}

/// Rebuilds the full episode report from a run directory's metadata and
/// logs, through the same metric code the original run used.
pub fn recompute_report(dir: &Path) -> Result<EpisodeReport> {
    let meta_text = std::fs::read_to_string(dir.join(META_FILE))
        .with_context(|| format!("reading {}", dir.join(META_FILE).display()))?;
    let meta: RunMeta = toml::from_str(&meta_text).context("parsing run metadata")?;
    let log = parse_trade_log(
        &std::fs::read_to_string(dir.join(TRADE_LOG_FILE))
            .with_context(|| format!("reading {}", dir.join(TRADE_LOG_FILE).display()))?,
    )?;
    let fills = parse_fills(
        &std::fs::read_to_string(dir.join(FILLS_FILE))
            .with_context(|| format!("reading {}", dir.join(FILLS_FILE).display()))?,
    )?;

    let steps: Vec<StepMetrics> = log
        .iter()
        .map(|step| {
            let outcome = MatchOutcome {
                fills: fills
                    .iter()
                    .filter(|(t, _)| *t == step.time)
                    .map(|(_, f)| *f)
                    .collect(),
                residuals: step.residuals.clone(),
                cleared: step.cleared,
            };
            metrics::step_metrics(step.time, &step.actions, &outcome, &meta.profiles, &meta.market)
        })
        .collect();
    let cumulative_welfare = steps.iter().map(|s| s.welfare).sum();
    let trade_count = steps.iter().filter(|s| s.traded_volume > 0.0).count();
    Ok(EpisodeReport {
        method: meta.method,
        seed: meta.seed,
        steps,
        cumulative_welfare,
        trade_count,
        completed: meta.completed,
        config: meta.market,
    })
}

/// Renders the two metric files for one report.
pub fn metric_files(report: &EpisodeReport) -> (String, String) {
    let mut metrics_buf = Vec::new();
    metrics::steps_csv(&mut metrics_buf, std::slice::from_ref(report))
        .expect("writing to a Vec cannot fail");
    let mut summary_buf = Vec::new();
    metrics::summary_csv(&mut summary_buf, &[episode_scalars(report)])
        .expect("writing to a Vec cannot fail");
    (
        String::from_utf8(metrics_buf).expect("CSV output is UTF-8"),
        String::from_utf8(summary_buf).expect("CSV output is UTF-8"),
    )
}

/// Recomputes a run's metrics from its logs and checks them against the
/// emitted files. Returns the recomputed report when everything matches.
pub fn verify_run_dir(dir: &Path) -> Result<EpisodeReport> {
    let report = recompute_report(dir)?;
    let (metrics_text, summary_text) = metric_files(&report);
    let stored_metrics = std::fs::read_to_string(dir.join(METRICS_FILE))
        .with_context(|| format!("reading {}", dir.join(METRICS_FILE).display()))?;
    if stored_metrics != metrics_text {
        bail!(
            "{}: stored {METRICS_FILE} differs from metrics recomputed from the trade log",
            dir.display()
        );
    }
    let stored_summary = std::fs::read_to_string(dir.join(SUMMARY_FILE))
        .with_context(|| format!("reading {}", dir.join(SUMMARY_FILE).display()))?;
    if stored_summary != summary_text {
        bail!(
            "{}: stored {SUMMARY_FILE} differs from the recomputed summary",
            dir.display()
        );
    }
    Ok(report)
}
