//! Criterion 3: welfare dominance over uniform pricing at desk scale.
//!
//! The two-trader market {[10,0,9],[0,10,0]} is run end to end with the
//! default parameters (1e6 pretraining iterations) for 20 seeds under both
//! the learned pricing method and the uniform baseline. Learned pricing must
//! deliver at least twice the uniform baseline's mean cumulative welfare and
//! at least as many executed trades on average. Exact welfare numbers vary
//! with the sampled intentions, so the bar is the ratio, not a point value.

use swdpm_cli::runner::run_experiment;
use swdpm_cli::spec::{ExperimentSpec, Method, StartStates};
use swdpm_core::{MarketConfig, TraderState};

use crate::support;

const SEED_COUNT: u64 = 20;
const DOMINANCE_FACTOR: f64 = 2.0;
const BUDGET_SECS: f64 = 600.0;

#[test]
fn criterion_3_welfare_dominance_over_uniform_pricing() {
    support::timed(3, "welfare dominance over uniform pricing", BUDGET_SECS, || {
        let spec = ExperimentSpec {
            market: MarketConfig::default(),
            seeds: (1..=SEED_COUNT).collect(),
            methods: vec![Method::Swdpm, Method::Uniform],
            start: StartStates::Fixed(vec![
                TraderState::new(10, 0, 9),
                TraderState::new(0, 10, 0),
            ]),
            history_episodes: 500,
            out_dir: None,
        };
        let dir = tempfile::tempdir().expect("creating a scratch directory");
        let artifacts = match run_experiment(&spec, dir.path()) {
            Ok(a) => a,
            Err(err) => return (false, format!("experiment failed to run: {err:#}")),
        };

        let mean = |method: &str, value: fn(&swdpm_core::EpisodeReport) -> f64| -> f64 {
            let picked: Vec<f64> = artifacts
                .reports
                .iter()
                .filter(|r| r.method == method)
                .map(value)
                .collect();
            picked.iter().sum::<f64>() / picked.len() as f64
        };
        let learned_welfare = mean("swdpm", |r| r.cumulative_welfare);
        let uniform_welfare = mean("uniform", |r| r.cumulative_welfare);
        let learned_trades = mean("swdpm", |r| r.trade_count as f64);
        let uniform_trades = mean("uniform", |r| r.trade_count as f64);

        let welfare_ok = learned_welfare >= DOMINANCE_FACTOR * uniform_welfare;
        let trades_ok = learned_trades >= uniform_trades;
        (
            welfare_ok && trades_ok,
            format!(
                "mean cumulative welfare {learned_welfare:.2} vs uniform {uniform_welfare:.2} \
                 (need >= {DOMINANCE_FACTOR}x), mean trades {learned_trades:.1} vs uniform \
                 {uniform_trades:.1} over {SEED_COUNT} seeds"
            ),
        )
    });
}
