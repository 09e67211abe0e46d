//! Centralized tabular Q-learning over joint trade actions.
//!
//! The pricing agent controls every trader's proposal at once: its action is
//! the Cartesian product of per-trader feasible actions and its reward is the
//! system reward. States are keyed on trader inventories only — the step
//! counter is an episode truncation device, not part of the market state.
//!
//! The table stores only visited pairs; anything unwritten reads as zero, and
//! the max over a state's feasible actions accounts for unwritten entries
//! without enumerating them.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::config::MarketConfig;
use crate::env::{is_terminal, step, EpisodeRun, EpisodeStep, MarketState};
use crate::market::{feasible_actions, IntentionProfile, TradeAction};

/// Table key for a market state: `(vt, v, c)` per trader, time excluded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey(pub Vec<i64>);

/// Table key for a joint action: `(dv, dc)` per trader.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionKey(pub Vec<i64>);

pub fn encode_state(state: &MarketState) -> StateKey {
    let mut k = Vec::with_capacity(state.traders.len() * 3);
    for t in &state.traders {
        k.extend_from_slice(&[t.vt, t.v, t.c]);
    }
    StateKey(k)
}

pub fn encode_action(actions: &[TradeAction]) -> ActionKey {
    let mut k = Vec::with_capacity(actions.len() * 2);
    for a in actions {
        k.extend_from_slice(&[a.dv, a.dc]);
    }
    ActionKey(k)
}

pub fn decode_action(key: &ActionKey) -> Vec<TradeAction> {
    key.0
        .chunks_exact(2)
        .map(|p| TradeAction::new(p[0], p[1]))
        .collect()
}

/// The joint feasible action set of a state, indexable without
/// materializing the product.
#[derive(Debug, Clone)]
pub struct JointActionSpace {
    per_trader: Vec<Vec<TradeAction>>,
    strides: Vec<usize>,
    len: usize,
}

impl JointActionSpace {
    pub fn build(state: &MarketState, config: &MarketConfig) -> Self {
        let per_trader: Vec<Vec<TradeAction>> = state
            .traders
            .iter()
            .map(|t| feasible_actions(t, config))
            .collect();
        let mut strides = vec![1usize; per_trader.len()];
        let mut len = 1usize;
        for i in (0..per_trader.len()).rev() {
            strides[i] = len;
            len = len
                .checked_mul(per_trader[i].len())
                .expect("joint action space too large to index");
        }
        JointActionSpace {
            per_trader,
            strides,
            len,
        }
    }

    /// Number of joint actions (always at least one: all-zero).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Joint action at a flat index; trader 0 varies slowest.
    pub fn action_at(&self, mut idx: usize) -> Vec<TradeAction> {
        assert!(idx < self.len);
        let mut out = Vec::with_capacity(self.per_trader.len());
        for (list, stride) in self.per_trader.iter().zip(&self.strides) {
            out.push(list[idx / stride]);
            idx %= stride;
        }
        out
    }

    pub fn contains(&self, actions: &[TradeAction]) -> bool {
        actions.len() == self.per_trader.len()
            && actions
                .iter()
                .zip(&self.per_trader)
                .all(|(a, list)| list.contains(a))
    }

    /// Uniform draw over the whole product.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<TradeAction> {
        self.action_at(rng.gen_range(0..self.len))
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<TradeAction>> + '_ {
        (0..self.len).map(|i| self.action_at(i))
    }
}

#[derive(Debug, Clone, Default)]
struct StateSlot {
    q: HashMap<ActionKey, f64>,
    /// Cached maximum over written entries.
    best: Option<(ActionKey, f64)>,
    /// Cached size of the state's joint feasible set.
    feasible_len: Option<usize>,
}

impl StateSlot {
    fn recompute_best(&mut self) {
        self.best = self
            .q
            .iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite action values"))
            .map(|(k, v)| (k.clone(), *v));
    }
}

/// Sparse action-value table with a cached per-state maximum.
#[derive(Debug, Clone, Default)]
pub struct QTable {
    slots: HashMap<StateKey, StateSlot>,
}

#[derive(Debug, Error)]
pub enum QTableIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid table file: {0}")]
    Format(String),
}

const TABLE_MAGIC: [u8; 4] = *b"SWQT";
const TABLE_VERSION: u32 = 1;

impl QTable {
    pub fn new() -> Self {
        QTable::default()
    }

    /// Number of written state-action entries.
    pub fn len(&self) -> usize {
        self.slots.values().map(|s| s.q.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Value of a pair; unwritten pairs read as zero.
    pub fn get(&self, state: &StateKey, action: &ActionKey) -> f64 {
        self.slots
            .get(state)
            .and_then(|s| s.q.get(action))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn set(&mut self, state: StateKey, action: ActionKey, value: f64) {
        let slot = self.slots.entry(state).or_default();
        slot.q.insert(action.clone(), value);
        match &mut slot.best {
            None => slot.best = Some((action, value)),
            Some((bk, bv)) => {
                if *bk == action {
                    if value >= *bv {
                        *bv = value;
                    } else {
                        slot.recompute_best();
                    }
                } else if value > *bv {
                    *bk = action;
                    *bv = value;
                }
            }
        }
    }

    /// `max_a Q(state, a)` over the state's feasible set, counting unwritten
    /// actions as zero.
    pub fn max_value(&mut self, state: &MarketState, config: &MarketConfig) -> f64 {
        let key = encode_state(state);
        let Some(slot) = self.slots.get_mut(&key) else {
            return 0.0;
        };
        if slot.best.is_none() {
            slot.recompute_best();
        }
        let feasible = *slot
            .feasible_len
            .get_or_insert_with(|| JointActionSpace::build(state, config).len());
        let written_best = slot.best.as_ref().map(|(_, v)| *v).unwrap_or(0.0);
        if slot.q.len() < feasible {
            written_best.max(0.0)
        } else {
            written_best
        }
    }

    /// Writes the table sorted by key. Grid parameters are stored so a load
    /// into a mismatched configuration fails loudly.
    pub fn save(&self, path: &Path, config: &MarketConfig) -> Result<(), QTableIoError> {
        let mut rows: Vec<(&StateKey, &ActionKey, f64)> = self
            .slots
            .iter()
            .flat_map(|(sk, slot)| slot.q.iter().map(move |(ak, v)| (sk, ak, *v)))
            .collect();
        rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let trader_count = rows.first().map(|(sk, _, _)| sk.0.len() / 3).unwrap_or(0);

        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&TABLE_MAGIC)?;
        w.write_all(&TABLE_VERSION.to_le_bytes())?;
        w.write_all(&(trader_count as u32).to_le_bytes())?;
        w.write_all(&config.uv.to_le_bytes())?;
        w.write_all(&config.uc.to_le_bytes())?;
        w.write_all(&(rows.len() as u64).to_le_bytes())?;
        for (sk, ak, v) in rows {
            if sk.0.len() != trader_count * 3 || ak.0.len() != trader_count * 2 {
                return Err(QTableIoError::Format(
                    "inconsistent trader count across entries".into(),
                ));
            }
            for x in &sk.0 {
                w.write_all(&x.to_le_bytes())?;
            }
            for x in &ak.0 {
                w.write_all(&x.to_le_bytes())?;
            }
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a table written by [`QTable::save`], refusing grids that do not
    /// match `config`.
    pub fn load(path: &Path, config: &MarketConfig) -> Result<QTable, QTableIoError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if magic != TABLE_MAGIC {
            return Err(QTableIoError::Format("bad magic".into()));
        }
        if read_u32(&mut r)? != TABLE_VERSION {
            return Err(QTableIoError::Format("unsupported version".into()));
        }
        let trader_count = read_u32(&mut r)? as usize;
        let uv = read_f64(&mut r)?;
        let uc = read_f64(&mut r)?;
        if uv.to_bits() != config.uv.to_bits() || uc.to_bits() != config.uc.to_bits() {
            return Err(QTableIoError::Format(format!(
                "grid mismatch: file has uv={uv}, uc={uc}"
            )));
        }
        let count = read_u64(&mut r)?;
        let mut table = QTable::new();
        for _ in 0..count {
            let mut sk = Vec::with_capacity(trader_count * 3);
            for _ in 0..trader_count * 3 {
                sk.push(read_i64(&mut r)?);
            }
            let mut ak = Vec::with_capacity(trader_count * 2);
            for _ in 0..trader_count * 2 {
                ak.push(read_i64(&mut r)?);
            }
            let v = read_f64(&mut r)?;
            table
                .slots
                .entry(StateKey(sk))
                .or_default()
                .q
                .insert(ActionKey(ak), v);
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(QTableIoError::Format("trailing bytes".into()));
        }
        Ok(table)
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), QTableIoError> {
    r.read_exact(buf)
        .map_err(|_| QTableIoError::Format("truncated file".into()))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, QTableIoError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, QTableIoError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_i64<R: Read>(r: &mut R) -> Result<i64, QTableIoError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(i64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, QTableIoError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// One observed transition: the joint action taken in a state and what the
/// market returned.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub state: MarketState,
    pub actions: Vec<TradeAction>,
    pub system_reward: f64,
    pub next_state: MarketState,
}

/// A replayable set of transitions.
#[derive(Debug, Clone, Default)]
pub struct HistoryDataset {
    pub records: Vec<TransitionRecord>,
}

/// Knobs for history generation.
#[derive(Debug, Clone)]
pub struct HistoryParams {
    pub episodes: usize,
    /// Probability of taking the reference table's greedy action instead of
    /// a uniform draw; ignored without a reference table.
    pub epsilon: f64,
}

impl Default for HistoryParams {
    fn default() -> Self {
        HistoryParams {
            episodes: 500,
            epsilon: 0.0,
        }
    }
}

/// Applies one Bellman update from a recorded transition. The bootstrap term
/// is zero only past an all-targets-met state; step-cap truncation is not a
/// market outcome and bootstraps through.
pub fn q_update(table: &mut QTable, rec: &TransitionRecord, config: &MarketConfig) {
    let s = encode_state(&rec.state);
    let a = encode_action(&rec.actions);
    let next = if rec.next_state.all_at_target() {
        0.0
    } else {
        table.max_value(&rec.next_state, config)
    };
    let old = table.get(&s, &a);
    let target = rec.system_reward + config.gamma * next;
    table.set(s, a, old + config.alpha * (target - old));
}

/// Greedy joint action, ties broken uniformly at random.
pub fn best_joint_action<R: Rng>(
    table: &QTable,
    state: &MarketState,
    space: &JointActionSpace,
    tie_rng: &mut R,
) -> Vec<TradeAction> {
    let skey = encode_state(state);
    let mut best: Option<(Vec<TradeAction>, f64)> = None;
    let mut ties = 0u64;
    for a in space.iter() {
        let q = table.get(&skey, &encode_action(&a));
        match &mut best {
            None => {
                best = Some((a, q));
                ties = 1;
            }
            Some((ba, bq)) => {
                if q > *bq {
                    *ba = a;
                    *bq = q;
                    ties = 1;
                } else if q == *bq {
                    ties += 1;
                    if tie_rng.gen_range(0..ties) == 0 {
                        *ba = a;
                    }
                }
            }
        }
    }
    best.expect("joint action space is never empty").0
}

/// Plays random-behavior episodes and records every transition. Episode `k`
/// starts from `starts[k % starts.len()]`.
pub fn generate_history<R: Rng>(
    starts: &[MarketState],
    profiles: &[IntentionProfile],
    config: &MarketConfig,
    params: &HistoryParams,
    reference: Option<&QTable>,
    rng: &mut R,
) -> HistoryDataset {
    assert!(!starts.is_empty(), "need at least one start state");
    let mut data = HistoryDataset::default();
    for ep in 0..params.episodes {
        let mut state = starts[ep % starts.len()].clone();
        state.time = 0;
        while !is_terminal(&state, config) {
            let space = JointActionSpace::build(&state, config);
            let actions = match reference {
                Some(table) if params.epsilon > 0.0 && rng.gen_bool(params.epsilon) => {
                    best_joint_action(table, &state, &space, rng)
                }
                _ => space.sample(rng),
            };
            let result = step(&state, &actions, profiles, config, rng)
                .expect("feasible actions drawn from the joint space");
            data.records.push(TransitionRecord {
                state: state.clone(),
                actions,
                system_reward: result.system_reward,
                next_state: result.next_state.clone(),
            });
            state = result.next_state;
        }
    }
    data
}

/// Replays uniformly sampled records from the dataset `iterations` times.
pub fn pretrain<R: Rng>(
    table: &mut QTable,
    data: &HistoryDataset,
    config: &MarketConfig,
    iterations: u64,
    rng: &mut R,
) {
    if data.records.is_empty() {
        return;
    }
    for _ in 0..iterations {
        let rec = &data.records[rng.gen_range(0..data.records.len())];
        q_update(table, rec, config);
    }
}

/// Plays one greedy episode, updating the table online from each observed
/// transition.
pub fn finetune<R: Rng, T: Rng>(
    table: &mut QTable,
    start: &MarketState,
    profiles: &[IntentionProfile],
    config: &MarketConfig,
    match_rng: &mut R,
    tie_rng: &mut T,
) -> EpisodeRun {
    let mut state = start.clone();
    let mut steps = Vec::new();
    while !is_terminal(&state, config) {
        let space = JointActionSpace::build(&state, config);
        let actions = best_joint_action(table, &state, &space, tie_rng);
        let result = step(&state, &actions, profiles, config, match_rng)
            .expect("greedy action drawn from the feasible set");
        q_update(
            table,
            &TransitionRecord {
                state: state.clone(),
                actions: actions.clone(),
                system_reward: result.system_reward,
                next_state: result.next_state.clone(),
            },
            config,
        );
        let next = result.next_state.clone();
        steps.push(EpisodeStep {
            state,
            actions,
            result,
        });
        state = next;
    }
    let completed = state.all_at_target();
    EpisodeRun {
        steps,
        final_state: state,
        completed,
    }
}
