//! Evaluation metrics: feasibility, efficiency, fairness, and social
//! welfare, plus comparison reports across methods and seeds.
//!
//! Welfare is always computed with economic surplus so reported numbers are
//! comparable across methods regardless of how the reward was configured.
//! All currency aggregation happens on the integer grid and is scaled once,
//! which keeps recomputation from persisted logs bit-exact.

use std::collections::BTreeMap;
use std::io;

use thiserror::Error;

use crate::config::MarketConfig;
use crate::market::{min_price, IntentionProfile, Role, TradeAction};
use crate::matching::{Fill, MatchOutcome};

/// Raw per-step observables the three metrics are computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub time: u32,
    /// Nonzero proposals made this step.
    pub proposals: usize,
    /// Proposals whose volume residual reached zero in matchmaking.
    pub accomplished: usize,
    /// Economic surplus of executed fills, real currency.
    pub welfare: f64,
    /// Disclosed (sold) volume actually executed, real volume units.
    pub traded_volume: f64,
    /// Executed unit price per trader with nonzero executed volume, in
    /// trader order. Negative: currency flows against volume.
    pub unit_prices: Vec<f64>,
}

/// Share of proposals that matchmaking fully resolved; vacuously 1 when
/// nothing was proposed.
pub fn feasibility(m: &StepMetrics) -> f64 {
    if m.proposals == 0 {
        1.0
    } else {
        m.accomplished as f64 / m.proposals as f64
    }
}

/// Welfare per disclosed volume unit; 0 when nothing traded.
pub fn efficiency(m: &StepMetrics) -> f64 {
    if m.traded_volume == 0.0 {
        0.0
    } else {
        m.welfare / m.traded_volume
    }
}

/// One minus the population standard deviation of unit prices; 1 when fewer
/// than two traders executed.
pub fn fairness_metric(unit_prices: &[f64]) -> f64 {
    if unit_prices.len() < 2 {
        return 1.0;
    }
    let n = unit_prices.len() as f64;
    let mean = unit_prices.iter().sum::<f64>() / n;
    let var = unit_prices.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
    1.0 - var.sqrt()
}

/// Economic surplus of one fill in currency grid units, summed over both
/// participants.
fn fill_surplus_units(fill: &Fill, profiles: &[IntentionProfile], config: &MarketConfig) -> i64 {
    let maker = &profiles[fill.maker_id];
    let taker = &profiles[fill.taker_id];
    debug_assert_ne!(maker.role_at_sampling, taker.role_at_sampling);
    let (buyer, seller) = if maker.role_at_sampling == Role::Buyer {
        (maker, taker)
    } else {
        (taker, maker)
    };
    let buyer_reservation = min_price(buyer, config, fill.volume).abs();
    let seller_reservation = min_price(seller, config, -fill.volume).abs();
    (buyer_reservation - fill.payment) + (fill.payment - seller_reservation)
}

/// Social welfare increment of a set of executed fills: the sum of both
/// participants' economic surpluses, additive across fills.
pub fn welfare_increment(
    fills: &[Fill],
    profiles: &[IntentionProfile],
    config: &MarketConfig,
) -> f64 {
    let units: i64 = fills
        .iter()
        .map(|f| fill_surplus_units(f, profiles, config))
        .sum();
    config.currency(units)
}

/// Observables of one step given the proposals and the matchmaking outcome.
pub fn step_metrics(
    time: u32,
    actions: &[TradeAction],
    outcome: &MatchOutcome,
    profiles: &[IntentionProfile],
    config: &MarketConfig,
) -> StepMetrics {
    let proposals = actions.iter().filter(|a| !a.is_zero()).count();
    let accomplished = actions
        .iter()
        .zip(&outcome.residuals)
        .filter(|(a, r)| !a.is_zero() && r.dv == 0)
        .count();
    let (welfare, traded_volume, unit_prices) = if outcome.cleared {
        let volume: i64 = outcome.fills.iter().map(|f| f.volume).sum();
        let prices = actions
            .iter()
            .zip(&outcome.residuals)
            .filter(|(a, r)| a.dv - r.dv != 0)
            .map(|(a, r)| {
                let dv = a.dv - r.dv;
                let dc = a.dc - r.dc;
                (dc as f64 * config.uc) / (dv as f64 * config.uv)
            })
            .collect();
        (
            welfare_increment(&outcome.fills, profiles, config),
            config.volume(volume),
            prices,
        )
    } else {
        (0.0, 0.0, Vec::new())
    };
    StepMetrics {
        time,
        proposals,
        accomplished,
        welfare,
        traded_volume,
        unit_prices,
    }
}

/// Everything measured about one evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReport {
    pub method: String,
    pub seed: u64,
    pub steps: Vec<StepMetrics>,
    /// Sum of per-step welfare.
    pub cumulative_welfare: f64,
    /// Steps in which at least one fill executed.
    pub trade_count: usize,
    /// False when the episode hit the step cap before targets were met.
    pub completed: bool,
    pub config: MarketConfig,
}

/// Builds the report for a finished episode.
pub fn episode_report(
    method: &str,
    seed: u64,
    run: &crate::env::EpisodeRun,
    profiles: &[IntentionProfile],
    config: &MarketConfig,
) -> EpisodeReport {
    let steps: Vec<StepMetrics> = run
        .steps
        .iter()
        .map(|s| {
            step_metrics(
                s.state.time,
                &s.actions,
                &s.result.outcome,
                profiles,
                config,
            )
        })
        .collect();
    let cumulative_welfare = steps.iter().map(|s| s.welfare).sum();
    let trade_count = steps.iter().filter(|s| s.traded_volume > 0.0).count();
    EpisodeReport {
        method: method.to_string(),
        seed,
        steps,
        cumulative_welfare,
        trade_count,
        completed: run.completed,
        config: config.clone(),
    }
}

/// One comparison row: episode-level metric values for a (method, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRow {
    pub method: String,
    pub seed: u64,
    pub times: usize,
    pub phi_f: f64,
    pub phi_e: f64,
    pub phi_r: f64,
    pub sum_w: f64,
    pub completed: bool,
}

/// Episode-level metric values: ratios are pooled over the whole episode
/// rather than averaged per step, and fairness pools every executed unit
/// price.
pub fn episode_scalars(report: &EpisodeReport) -> SeedRow {
    let mp: usize = report.steps.iter().map(|s| s.proposals).sum();
    let ma: usize = report.steps.iter().map(|s| s.accomplished).sum();
    let phi_f = if mp == 0 { 1.0 } else { ma as f64 / mp as f64 };
    let volume: f64 = report.steps.iter().map(|s| s.traded_volume).sum();
    let phi_e = if volume == 0.0 {
        0.0
    } else {
        report.cumulative_welfare / volume
    };
    let pooled: Vec<f64> = report
        .steps
        .iter()
        .flat_map(|s| s.unit_prices.iter().copied())
        .collect();
    SeedRow {
        method: report.method.clone(),
        seed: report.seed,
        times: report.trade_count,
        phi_f,
        phi_e,
        phi_r: fairness_metric(&pooled),
        sum_w: report.cumulative_welfare,
        completed: report.completed,
    }
}

/// Per-method averages over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    pub mean_times: f64,
    pub mean_phi_f: f64,
    pub mean_phi_e: f64,
    pub mean_phi_r: f64,
    pub mean_sum_w: f64,
}

/// A rendered comparison: per-seed rows plus per-method averages, both in
/// deterministic order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<SeedRow>,
    pub methods: Vec<MethodSummary>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("no reports to compare")]
    Empty,
    #[error("reports mix different market configurations")]
    ConfigMismatch,
}

/// Aggregates episode reports into a comparison table.
pub fn compare_report(reports: &[EpisodeReport]) -> Result<ComparisonTable, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::Empty);
    }
    if reports.iter().any(|r| r.config != reports[0].config) {
        return Err(ReportError::ConfigMismatch);
    }
    let mut rows: Vec<SeedRow> = reports.iter().map(episode_scalars).collect();
    rows.sort_by(|a, b| (&a.method, a.seed).cmp(&(&b.method, b.seed)));
    let mut groups: BTreeMap<&str, Vec<&SeedRow>> = BTreeMap::new();
    for row in &rows {
        groups.entry(&row.method).or_default().push(row);
    }
    let methods = groups
        .into_iter()
        .map(|(method, rows)| {
            let n = rows.len() as f64;
            MethodSummary {
                method: method.to_string(),
                runs: rows.len(),
                mean_times: rows.iter().map(|r| r.times as f64).sum::<f64>() / n,
                mean_phi_f: rows.iter().map(|r| r.phi_f).sum::<f64>() / n,
                mean_phi_e: rows.iter().map(|r| r.phi_e).sum::<f64>() / n,
                mean_phi_r: rows.iter().map(|r| r.phi_r).sum::<f64>() / n,
                mean_sum_w: rows.iter().map(|r| r.sum_w).sum::<f64>() / n,
            }
        })
        .collect();
    Ok(ComparisonTable { rows, methods })
}

/// Shortest round-trip decimal rendering, shared by every CSV writer.
pub fn format_float(x: f64) -> String {
    format!("{x}")
}

/// One row per (method, seed, step) with the raw operands and the three
/// per-step metric values.
pub fn steps_csv<W: io::Write>(out: &mut W, reports: &[EpisodeReport]) -> io::Result<()> {
    writeln!(out, "method,seed,time,m_p,m_a,w,v,phi_f,phi_e,phi_r")?;
    for r in reports {
        for s in &r.steps {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.method,
                r.seed,
                s.time,
                s.proposals,
                s.accomplished,
                format_float(s.welfare),
                format_float(s.traded_volume),
                format_float(feasibility(s)),
                format_float(efficiency(s)),
                format_float(fairness_metric(&s.unit_prices)),
            )?;
        }
    }
    Ok(())
}

/// Episode-level rows mirroring the comparison columns.
pub fn summary_csv<W: io::Write>(out: &mut W, rows: &[SeedRow]) -> io::Result<()> {
    writeln!(out, "method,seed,times,phi_f,phi_e,phi_r,sum_w,completed")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.method,
            r.seed,
            r.times,
            format_float(r.phi_f),
            format_float(r.phi_e),
            format_float(r.phi_r),
            format_float(r.sum_w),
            r.completed,
        )?;
    }
    Ok(())
}

/// Per-seed rows followed by per-method mean rows.
pub fn comparison_csv<W: io::Write>(out: &mut W, table: &ComparisonTable) -> io::Result<()> {
    writeln!(out, "method,scope,times,phi_f,phi_e,phi_r,sum_w")?;
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            r.seed,
            r.times,
            format_float(r.phi_f),
            format_float(r.phi_e),
            format_float(r.phi_r),
            format_float(r.sum_w),
        )?;
    }
    for m in &table.methods {
        writeln!(
            out,
            "{},mean,{},{},{},{},{}",
            m.method,
            format_float(m.mean_times),
            format_float(m.mean_phi_f),
            format_float(m.mean_phi_e),
            format_float(m.mean_phi_r),
            format_float(m.mean_sum_w),
        )?;
    }
    Ok(())
}
