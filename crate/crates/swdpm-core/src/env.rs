//! Multi-round trading environment.
//!
//! One step takes every trader's proposal, matches them, and transfers
//! volume and currency only if the whole step cleared (every proposal's
//! volume residual reached zero). A failed step leaves every trader where it
//! was; only time advances. Rewards always reflect what actually executed:
//! on a failed step nothing did, so the reward reduces to the unexecuted
//! volume penalty.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{FairnessMeanMode, MarketConfig, SurplusMode};
use crate::market::{action_feasible, min_price, IntentionProfile, TradeAction, TraderState};
use crate::matching::{match_step, MatchOutcome};

/// Joint market state: every trader plus the step counter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MarketState {
    pub traders: Vec<TraderState>,
    pub time: u32,
}

impl MarketState {
    pub fn new(traders: Vec<TraderState>) -> Self {
        MarketState { traders, time: 0 }
    }

    pub fn all_at_target(&self) -> bool {
        self.traders.iter().all(|t| t.at_target())
    }
}

/// Everything produced by one environment step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub next_state: MarketState,
    /// Signed (dv, dc) actually transferred per trader; all zero when the
    /// step failed to clear.
    pub executed: Vec<TradeAction>,
    pub rewards: Vec<f64>,
    pub system_reward: f64,
    pub outcome: MatchOutcome,
    /// True when the next state ends the episode (targets met or step cap).
    pub done: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StepError {
    #[error("expected {expected} actions, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("action ({dv}, {dc}) is not feasible for trader {trader}")]
    InfeasibleAction { trader: usize, dv: i64, dc: i64 },
}

/// Whether the episode is over in `state`: every trader at target, or the
/// step cap reached.
pub fn is_terminal(state: &MarketState, config: &MarketConfig) -> bool {
    state.all_at_target() || state.time >= config.max_steps_per_episode
}

/// Surplus of one trader's executed quantities under the configured mode,
/// in real currency. Zero when nothing executed.
pub fn surplus(dv: i64, dc: i64, profile: &IntentionProfile, config: &MarketConfig) -> f64 {
    surplus_in_mode(dv, dc, profile, config, config.surplus_mode)
}

/// Surplus under an explicit mode; reporting always uses `Economic`
/// regardless of what the reward is configured with.
pub fn surplus_in_mode(
    dv: i64,
    dc: i64,
    profile: &IntentionProfile,
    config: &MarketConfig,
    mode: SurplusMode,
) -> f64 {
    if dv == 0 {
        return 0.0;
    }
    let reservation = min_price(profile, config, dv).abs();
    let paid = dc.abs();
    let units = match mode {
        SurplusMode::Literal => paid - reservation,
        SurplusMode::Economic => {
            if dv > 0 {
                reservation - paid
            } else {
                paid - reservation
            }
        }
    };
    config.currency(units)
}

/// Deviation of one trader's executed unit price from the market's reference
/// mean. Zero for traders that executed nothing.
pub fn fairness_term(pair: &TradeAction, all: &[TradeAction], config: &MarketConfig) -> f64 {
    if pair.dv == 0 {
        return 0.0;
    }
    let unit_price =
        |a: &TradeAction| (a.dc as f64 * config.uc) / (a.dv as f64 * config.uv);
    let active: Vec<&TradeAction> = all.iter().filter(|a| a.dv != 0).collect();
    debug_assert!(!active.is_empty());
    let mean = match config.fairness_mean_mode {
        FairnessMeanMode::TraderMean => {
            active.iter().map(|a| unit_price(a)).sum::<f64>() / active.len() as f64
        }
        FairnessMeanMode::VolumeWeighted => {
            let dc_sum: i64 = active.iter().map(|a| a.dc.abs()).sum();
            let dv_sum: i64 = active.iter().map(|a| a.dv.abs()).sum();
            -(dc_sum as f64 * config.uc) / (dv_sum as f64 * config.uv)
        }
    };
    unit_price(pair) - mean
}

/// Per-trader reward: executed surplus, weighted fairness deviation, and the
/// penalty on unexecuted proposal volume.
pub fn reward(
    trader: usize,
    executed: &[TradeAction],
    outcome: &MatchOutcome,
    profiles: &[IntentionProfile],
    config: &MarketConfig,
) -> f64 {
    let pair = executed[trader];
    let w = surplus(pair.dv, pair.dc, &profiles[trader], config);
    let f = fairness_term(&pair, executed, config);
    let unexecuted = config.volume(outcome.residuals[trader].dv.abs());
    w + config.theta * f + config.lambda * unexecuted
}

/// System reward: the sum over traders.
pub fn system_reward(rewards: &[f64]) -> f64 {
    rewards.iter().sum()
}

/// Advances the market by one step.
pub fn step<R: Rng>(
    state: &MarketState,
    actions: &[TradeAction],
    profiles: &[IntentionProfile],
    config: &MarketConfig,
    rng: &mut R,
) -> Result<StepResult, StepError> {
    if actions.len() != state.traders.len() {
        return Err(StepError::WrongArity {
            expected: state.traders.len(),
            got: actions.len(),
        });
    }
    for (i, (t, a)) in state.traders.iter().zip(actions).enumerate() {
        if !action_feasible(t, a, config) {
            return Err(StepError::InfeasibleAction {
                trader: i,
                dv: a.dv,
                dc: a.dc,
            });
        }
    }

    let outcome = match_step(actions, profiles, config, rng);

    let executed: Vec<TradeAction> = if outcome.cleared {
        actions
            .iter()
            .zip(&outcome.residuals)
            .map(|(a, r)| TradeAction::new(a.dv - r.dv, a.dc - r.dc))
            .collect()
    } else {
        vec![TradeAction::zero(); actions.len()]
    };

    let mut traders = state.traders.clone();
    if outcome.cleared {
        for (t, e) in traders.iter_mut().zip(&executed) {
            t.v += e.dv;
            t.c += e.dc;
        }
    }
    let next_state = MarketState {
        traders,
        time: state.time + 1,
    };

    let rewards: Vec<f64> = (0..actions.len())
        .map(|i| reward(i, &executed, &outcome, profiles, config))
        .collect();
    let system_reward = system_reward(&rewards);
    let done = is_terminal(&next_state, config);

    Ok(StepResult {
        next_state,
        executed,
        rewards,
        system_reward,
        outcome,
        done,
    })
}

/// One recorded environment step inside an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    /// State the step was taken from.
    pub state: MarketState,
    pub actions: Vec<TradeAction>,
    pub result: StepResult,
}

/// A full episode trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRun {
    pub steps: Vec<EpisodeStep>,
    pub final_state: MarketState,
    /// True when every trader reached its target (not a step-cap truncation).
    pub completed: bool,
}

/// Rolls `policy` through the environment until the episode ends.
pub fn run_policy_episode<R: Rng>(
    start: &MarketState,
    profiles: &[IntentionProfile],
    config: &MarketConfig,
    mut policy: impl FnMut(&MarketState) -> Vec<TradeAction>,
    match_rng: &mut R,
) -> Result<EpisodeRun, StepError> {
    let mut state = start.clone();
    let mut steps = Vec::new();
    while !is_terminal(&state, config) {
        let actions = policy(&state);
        let result = step(&state, &actions, profiles, config, match_rng)?;
        let next = result.next_state.clone();
        steps.push(EpisodeStep {
            state,
            actions,
            result,
        });
        state = next;
    }
    let completed = state.all_at_target();
    Ok(EpisodeRun {
        steps,
        final_state: state,
        completed,
    })
}
