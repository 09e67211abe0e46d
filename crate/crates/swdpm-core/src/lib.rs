//! Deterministic simulator of multi-round data trading with learned pricing.
//!
//! A market of traders moves volume and currency on a discrete grid. Each
//! round every trader proposes a trade action, a maker/taker matchmaking
//! pass clears the proposals, and the environment executes them atomically:
//! either every proposal resolves its volume and the transfers happen, or
//! the round fails and only time moves. A centralized tabular Q-learning
//! agent prices trades by choosing the joint action; uniform list-price and
//! subscription policies serve as comparison methods, and the evaluation
//! module scores all of them on feasibility, efficiency, fairness, and
//! social welfare.
//!
//! Everything is seed-reproducible: every random decision draws from a
//! named, independently derived stream (see [`rng`]).

pub mod baselines;
pub mod config;
pub mod env;
pub mod market;
pub mod matching;
pub mod metrics;
pub mod qlearning;
pub mod rng;

pub use config::{FairnessMeanMode, MarketConfig, SurplusMode};
pub use env::{EpisodeRun, EpisodeStep, MarketState, StepError, StepResult};
pub use market::{IntentionProfile, Role, TradeAction, TraderState};
pub use matching::{Fill, MatchOutcome};
pub use metrics::{ComparisonTable, EpisodeReport, ReportError, SeedRow, StepMetrics};
pub use qlearning::{HistoryDataset, HistoryParams, JointActionSpace, QTable, QTableIoError};
