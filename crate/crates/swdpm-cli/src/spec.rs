//! Experiment specification: a TOML file naming the market, the traders,
//! the methods to compare, and the seeds to run.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use swdpm_core::{MarketConfig, TraderState};
use thiserror::Error;

/// Pricing method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Swdpm,
    Uniform,
    Subscription,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Swdpm => "swdpm",
            Method::Uniform => "uniform",
            Method::Subscription => "subscription",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "swdpm" => Some(Method::Swdpm),
            "uniform" => Some(Method::Uniform),
            "subscription" => Some(Method::Subscription),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where each run's initial trader states come from.
#[derive(Debug, Clone, PartialEq)]
pub enum StartStates {
    /// The same explicit trader list for every seed.
    Fixed(Vec<TraderState>),
    /// Per seed, draw `traders` states from the candidate pool, uniformly
    /// with replacement.
    Pool { pool: Vec<TraderState>, traders: usize },
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub market: MarketConfig,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub start: StartStates,
    /// Episodes of random behavior recorded before pretraining.
    pub history_episodes: usize,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read spec file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse spec file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid spec: field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> SpecError {
    SpecError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    seeds: Vec<u64>,
    methods: Option<Vec<String>>,
    out_dir: Option<PathBuf>,
    history_episodes: Option<usize>,
    initial_states: Option<Vec<[i64; 3]>>,
    initial_state_pool: Option<Vec<[i64; 3]>>,
    traders: Option<usize>,
    #[serde(default)]
    market: MarketConfig,
}

fn to_traders(raw: &[[i64; 3]], field: &str) -> Result<Vec<TraderState>, SpecError> {
    raw.iter()
        .map(|[vt, v, c]| {
            if *vt < 0 || *v < 0 || *c < 0 {
                Err(invalid(field, format!("[{vt}, {v}, {c}] has a negative component")))
            } else {
                Ok(TraderState::new(*vt, *v, *c))
            }
        })
        .collect()
}

/// Parses and validates a spec file. Market parameters not present in the
/// file keep their defaults.
pub fn load_spec(path: &Path) -> Result<ExperimentSpec, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spec(&text)
}

/// Parses and validates spec text.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec, SpecError> {
    let raw: RawSpec = toml::from_str(text)?;

    if raw.seeds.is_empty() {
        return Err(invalid("seeds", "at least one seed is required"));
    }
    if let Err(field) = raw.market.validate() {
        return Err(invalid(&format!("market.{field}"), "out of range"));
    }

    let methods = match &raw.methods {
        None => vec![Method::Swdpm, Method::Uniform, Method::Subscription],
        Some(names) => {
            if names.is_empty() {
                return Err(invalid("methods", "at least one method is required"));
            }
            let mut methods = Vec::with_capacity(names.len());
            for name in names {
                let m = Method::parse(name).ok_or_else(|| {
                    invalid(
                        "methods",
                        format!("unknown method `{name}` (expected swdpm, uniform, or subscription)"),
                    )
                })?;
                if methods.contains(&m) {
                    return Err(invalid("methods", format!("method `{name}` listed twice")));
                }
                methods.push(m);
            }
            methods
        }
    };

    let start = match (&raw.initial_states, &raw.initial_state_pool) {
        (Some(_), Some(_)) => {
            return Err(invalid(
                "initial_states",
                "give either initial_states or initial_state_pool, not both",
            ));
        }
        (Some(states), None) => {
            if raw.traders.is_some_and(|n| n != states.len()) {
                return Err(invalid(
                    "traders",
                    "contradicts the length of initial_states",
                ));
            }
            let traders = to_traders(states, "initial_states")?;
            if traders.len() < 2 {
                return Err(invalid("initial_states", "a market needs at least 2 traders"));
            }
            StartStates::Fixed(traders)
        }
        (None, Some(pool)) => {
            let traders = raw
                .traders
                .ok_or_else(|| invalid("traders", "required with initial_state_pool"))?;
            if traders < 2 {
                return Err(invalid("traders", "a market needs at least 2 traders"));
            }
            let pool = to_traders(pool, "initial_state_pool")?;
            if pool.is_empty() {
                return Err(invalid("initial_state_pool", "must not be empty"));
            }
            StartStates::Pool { pool, traders }
        }
        (None, None) => {
            return Err(invalid(
                "initial_states",
                "either initial_states or initial_state_pool is required",
            ));
        }
    };

    let history_episodes = raw.history_episodes.unwrap_or(500);
    if history_episodes == 0 {
        return Err(invalid("history_episodes", "must be at least 1"));
    }

    Ok(ExperimentSpec {
        market: raw.market,
        seeds: raw.seeds,
        methods,
        start,
        history_episodes,
        out_dir: raw.out_dir,
    })
}
