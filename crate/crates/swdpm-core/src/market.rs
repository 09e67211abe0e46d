//! Traders, trade actions, and private acceptance intentions.
//!
//! A trader's state is `(vt, v, c)`: target volume, currently traded volume,
//! and currency on hand, all in grid units. Roles are fixed by the relation
//! between `v` and `vt` and trading is unidirectional: a buyer only ever
//! increases `v`, a seller only decreases it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::MarketConfig;

/// Trading direction implied by a trader's state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Buyer,
    Seller,
    Idle,
}

/// Per-trader market state in grid units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraderState {
    /// Target information volume.
    pub vt: i64,
    /// Information volume traded so far.
    pub v: i64,
    /// Currency on hand.
    pub c: i64,
}

impl TraderState {
    pub fn new(vt: i64, v: i64, c: i64) -> Self {
        TraderState { vt, v, c }
    }

    pub fn at_target(&self) -> bool {
        self.v == self.vt
    }
}

/// A proposed (or residual) trade: volume delta and currency delta, signed
/// from the acting trader's perspective. Buying volume costs currency, so
/// `dv > 0` couples with `dc <= 0` and `dv < 0` with `dc >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TradeAction {
    pub dv: i64,
    pub dc: i64,
}

impl TradeAction {
    pub fn new(dv: i64, dc: i64) -> Self {
        TradeAction { dv, dc }
    }

    pub fn zero() -> Self {
        TradeAction { dv: 0, dc: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.dv == 0 && self.dc == 0
    }

    /// Sign coupling: paying while buying, receiving while selling.
    pub fn sign_coupled(&self) -> bool {
        (self.dv >= 0 || self.dc >= 0) && (self.dv <= 0 || self.dc <= 0)
    }
}

/// A trader's private acceptance intention, sampled once per episode.
///
/// The trader accepts a proposal `(dv, dc)` iff `dc >= dc_min(dv)` where
/// `dc_min = -rho * eta * dv` snapped toward zero onto the currency grid.
/// `rho` scales the standard price: buyers value volume at or above it
/// (`rho` in `[1, 1+delta]`), sellers part with volume at or below it
/// (`rho` in `[1-delta, 1]`), so mutually agreeable prices exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntentionProfile {
    /// Reservation factor relative to the standard price. Never mutated.
    pub rho: f64,
    /// Role the trader had when the profile was drawn.
    pub role_at_sampling: Role,
}

/// Role implied by the gap between traded and target volume.
pub fn role_of(state: &TraderState) -> Role {
    use std::cmp::Ordering::*;
    match state.v.cmp(&state.vt) {
        Less => Role::Buyer,
        Greater => Role::Seller,
        Equal => Role::Idle,
    }
}

/// Minimum acceptable currency delta for trading `dv` volume units, in
/// currency units, snapped toward zero onto the `uc` grid.
///
/// Panics if `dv` points against the profile's role: that is a contract
/// violation by the caller.
pub fn min_price(profile: &IntentionProfile, config: &MarketConfig, dv: i64) -> i64 {
    match profile.role_at_sampling {
        Role::Buyer => assert!(dv >= 0, "buyer intention queried with dv = {dv}"),
        Role::Seller => assert!(dv <= 0, "seller intention queried with dv = {dv}"),
        Role::Idle => assert!(dv == 0, "idle intention queried with dv = {dv}"),
    }
    if dv == 0 {
        return 0;
    }
    let raw = -profile.rho * config.grid_price() * dv as f64;
    raw.trunc() as i64
}

/// Whether the trader accepts a proposal of `dv` volume units for `dc`
/// currency units.
pub fn accepts(profile: &IntentionProfile, config: &MarketConfig, dv: i64, dc: i64) -> bool {
    dc >= min_price(profile, config, dv)
}

/// Largest currency amount worth offering for `dv` volume units: one grid
/// step above the highest possible reservation.
fn price_cap(config: &MarketConfig, dv: i64) -> i64 {
    ((1.0 + config.delta) * config.grid_price() * dv as f64).ceil() as i64
}

/// Whether `action` lies in the trader's feasible set without enumerating it.
pub fn action_feasible(state: &TraderState, action: &TradeAction, config: &MarketConfig) -> bool {
    if action.dv == 0 {
        return action.dc == 0;
    }
    match role_of(state) {
        Role::Idle => false,
        Role::Buyer => {
            let dv_max = (state.vt - state.v).min(config.max_volume_per_action);
            action.dv >= 1
                && action.dv <= dv_max
                && action.dc <= 0
                && -action.dc <= state.c.min(price_cap(config, action.dv))
        }
        Role::Seller => {
            let dv_max = (state.v - state.vt).min(config.max_volume_per_action);
            action.dv <= -1
                && -action.dv <= dv_max
                && action.dc >= 0
                && action.dc <= price_cap(config, -action.dv)
        }
    }
}

/// Every action the trader may propose this step, ordered by |dv| then dc.
///
/// Buyers may offer anything from free up to `min(c, ceil((1+delta) * eta *
/// dv))`: one grid step above the highest reservation any seller can hold, so
/// no admissible counterparty price is unreachable. Sellers symmetrically ask
/// anything from free up to the same cap. The zero action is always feasible.
pub fn feasible_actions(state: &TraderState, config: &MarketConfig) -> Vec<TradeAction> {
    let mut out = vec![TradeAction::zero()];
    match role_of(state) {
        Role::Idle => {}
        Role::Buyer => {
            let dv_max = (state.vt - state.v).min(config.max_volume_per_action);
            for dv in 1..=dv_max {
                let lo = -state.c.min(price_cap(config, dv));
                for dc in lo..=0 {
                    out.push(TradeAction::new(dv, dc));
                }
            }
        }
        Role::Seller => {
            let dv_max = (state.v - state.vt).min(config.max_volume_per_action);
            for dv in 1..=dv_max {
                for dc in 0..=price_cap(config, dv) {
                    out.push(TradeAction::new(-dv, dc));
                }
            }
        }
    }
    debug_assert!(out.iter().all(|a| action_feasible(state, a, config) || a.is_zero()));
    out
}

/// Draws one intention profile per trader from `rng`, in trader order.
/// Idle traders get `rho = 1` (their intention is never consulted).
pub fn sample_intentions<R: Rng>(
    rng: &mut R,
    config: &MarketConfig,
    states: &[TraderState],
) -> Vec<IntentionProfile> {
    states
        .iter()
        .map(|s| {
            let role = role_of(s);
            let rho = match role {
                Role::Buyer => rng.gen_range(1.0..=1.0 + config.delta),
                Role::Seller => rng.gen_range(1.0 - config.delta..=1.0),
                Role::Idle => 1.0,
            };
            IntentionProfile {
                rho,
                role_at_sampling: role,
            }
        })
        .collect()
}
