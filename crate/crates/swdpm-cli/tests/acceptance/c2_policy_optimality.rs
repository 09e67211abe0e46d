//! Criterion 2: learned pricing optimality on a micro market.
//!
//! Two traders at target scale 2-3 give a joint MDP small enough to solve
//! exactly. The learner pretrains on a hand-built dataset covering every
//! (state, joint action) pair, then runs greedily; across 100 seeds it must
//! reach the all-targets terminal state in at least 95 runs, and each
//! successful run's realized discounted system return must match the exact
//! value-iteration optimum within 5% relative tolerance.

use std::collections::{HashMap, VecDeque};

use swdpm_core::env;
use swdpm_core::market::sample_intentions;
use swdpm_core::qlearning::{finetune, pretrain, JointActionSpace, TransitionRecord};
use swdpm_core::rng::stream;
use swdpm_core::{HistoryDataset, IntentionProfile, MarketConfig, MarketState, QTable, TraderState};

use crate::support;

const RUNS: u64 = 100;
const MIN_SUCCESSES: usize = 95;
const REL_TOL: f64 = 0.05;
const PRETRAIN_ITERATIONS: u64 = 100_000;
const MAX_STATE_ACTION_PAIRS: usize = 5_000;
const VI_THRESHOLD: f64 = 1e-10;
const BUDGET_SECS: f64 = 120.0;

fn start_state() -> MarketState {
    MarketState::new(vec![TraderState::new(2, 0, 3), TraderState::new(0, 2, 0)])
}

/// One record per reachable (state, joint action) pair. Two-trader matching
/// is order-independent, so the transition function is deterministic and a
/// single pass covers the whole MDP.
fn exhaustive_dataset(
    start: &MarketState,
    profiles: &[IntentionProfile],
    config: &MarketConfig,
) -> HistoryDataset {
    let mut records = Vec::new();
    let mut seen = vec![start.traders.clone()];
    let mut queue = VecDeque::from([start.traders.clone()]);
    let mut rng = stream(0, &["acceptance", "optimality", "expand"]);

    while let Some(traders) = queue.pop_front() {
        let state = MarketState::new(traders);
        if state.all_at_target() {
            continue;
        }
        let space = JointActionSpace::build(&state, config);
        for actions in space.iter() {
            let result = env::step(&state, &actions, profiles, config, &mut rng)
                .expect("enumerated joint actions are feasible");
            let next = result.next_state.traders.clone();
            if !seen.contains(&next) {
                seen.push(next.clone());
                queue.push_back(next);
            }
            records.push(TransitionRecord {
                state: state.clone(),
                actions,
                system_reward: result.system_reward,
                next_state: result.next_state,
            });
        }
    }
    HistoryDataset { records }
}

/// Exact optimal state values for the infinite-horizon discounted MDP
/// defined by the dataset's (deterministic) transitions.
fn value_iteration(data: &HistoryDataset, config: &MarketConfig) -> HashMap<Vec<TraderState>, f64> {
    let mut transitions: HashMap<Vec<TraderState>, Vec<(f64, Vec<TraderState>, bool)>> =
        HashMap::new();
    for r in &data.records {
        transitions.entry(r.state.traders.clone()).or_default().push((
            r.system_reward,
            r.next_state.traders.clone(),
            r.next_state.all_at_target(),
        ));
    }

    let mut values: HashMap<Vec<TraderState>, f64> =
        transitions.keys().map(|s| (s.clone(), 0.0)).collect();
    loop {
        let mut change = 0.0f64;
        for (state, arrivals) in &transitions {
            let best = arrivals
                .iter()
                .map(|(reward, next, terminal)| {
                    let bootstrap = if *terminal {
                        0.0
                    } else {
                        *values.get(next).unwrap_or(&0.0)
                    };
                    reward + config.gamma * bootstrap
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let old = values[state];
            change = change.max((best - old).abs());
            values.insert(state.clone(), best);
        }
        if change < VI_THRESHOLD {
            return values;
        }
    }
}

fn discounted_return(run: &swdpm_core::EpisodeRun, config: &MarketConfig) -> f64 {
    run.steps
        .iter()
        .enumerate()
        .map(|(t, s)| config.gamma.powi(t as i32) * s.result.system_reward)
        .sum()
}

#[test]
fn criterion_2_pricing_policy_optimality_on_a_micro_market() {
    support::timed(2, "pricing policy optimality on a micro market", BUDGET_SECS, || {
        let config = MarketConfig::default();
        let start = start_state();

        let mut successes = 0usize;
        let mut worst_rel = 0.0f64;
        let mut pair_count = 0usize;
        let mut failure: Option<String> = None;

        for seed in 1..=RUNS {
            let profiles =
                sample_intentions(&mut stream(seed, &["intentions"]), &config, &start.traders);
            let data = exhaustive_dataset(&start, &profiles, &config);
            pair_count = pair_count.max(data.records.len());
            if data.records.len() >= MAX_STATE_ACTION_PAIRS {
                failure = Some(format!(
                    "joint enumeration has {} state-action pairs, expected < {MAX_STATE_ACTION_PAIRS}",
                    data.records.len()
                ));
                break;
            }

            let optimal = value_iteration(&data, &config)[&start.traders];

            let mut table = QTable::new();
            pretrain(
                &mut table,
                &data,
                &config,
                PRETRAIN_ITERATIONS,
                &mut stream(seed, &["pretrain"]),
            );
            let run = finetune(
                &mut table,
                &start,
                &profiles,
                &config,
                &mut stream(seed, &["match", "swdpm"]),
                &mut stream(seed, &["tie"]),
            );

            if run.completed {
                successes += 1;
                let realized = discounted_return(&run, &config);
                let scale = optimal.abs().max(f64::MIN_POSITIVE);
                let rel = (realized - optimal).abs() / scale;
                worst_rel = worst_rel.max(rel);
                if rel > REL_TOL {
                    failure = Some(format!(
                        "seed {seed}: realized return {realized:.6} vs optimum {optimal:.6} \
                         ({:.1}% off, tolerance {:.0}%)",
                        rel * 100.0,
                        REL_TOL * 100.0
                    ));
                    break;
                }
            }
        }

        if failure.is_none() && successes < MIN_SUCCESSES {
            failure = Some(format!(
                "only {successes}/{RUNS} greedy runs reached every target (need {MIN_SUCCESSES})"
            ));
        }

        match failure {
            Some(why) => (false, why),
            None => (
                true,
                format!(
                    "{successes}/{RUNS} greedy runs reached every target, worst value gap \
                     {:.3}% of optimum (tolerance {:.0}%), {pair_count} state-action pairs",
                    worst_rel * 100.0,
                    REL_TOL * 100.0
                ),
            ),
        }
    });
}
