//! Comparison pricing policies: uniform list-price trading and
//! subscription offers posted by sellers.
//!
//! Both emit joint actions through the same environment and matchmaking as
//! the learned policy, so differences in outcomes come from pricing behavior
//! alone, not from a different market mechanism.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::MarketConfig;
use crate::market::{accepts, role_of, IntentionProfile, Role, TradeAction};

/// Standard-price currency for `volume` units, snapped to the nearest
/// currency grid point.
fn list_price_units(volume: i64, unit_price: f64, config: &MarketConfig) -> i64 {
    (unit_price * volume as f64 * config.uv / config.uc).round() as i64
}

/// Largest volume not exceeding `bound` that `budget_units` can pay for at
/// `unit_price`.
fn affordable_volume(bound: i64, budget_units: i64, unit_price: f64, config: &MarketConfig) -> i64 {
    let mut k = bound;
    while k > 0 && list_price_units(k, unit_price, config) > budget_units {
        k -= 1;
    }
    k
}

/// Uniform pricing: every non-idle trader offers a uniformly random volume
/// toward its target, priced at exactly the standard unit price. No
/// negotiation happens; success depends entirely on the other side drawing a
/// compatible volume.
pub fn uniform_policy<R: Rng>(
    state: &crate::env::MarketState,
    config: &MarketConfig,
    rng: &mut R,
) -> Vec<TradeAction> {
    state
        .traders
        .iter()
        .map(|t| match role_of(t) {
            Role::Idle => TradeAction::zero(),
            Role::Buyer => {
                let bound = (t.vt - t.v).min(config.max_volume_per_action);
                let vmax = affordable_volume(bound, t.c, config.eta, config);
                if vmax < 1 {
                    return TradeAction::zero();
                }
                let dv = rng.gen_range(1..=vmax);
                TradeAction::new(dv, -list_price_units(dv, config.eta, config))
            }
            Role::Seller => {
                let vmax = (t.v - t.vt).min(config.max_volume_per_action);
                if vmax < 1 {
                    return TradeAction::zero();
                }
                let dv = rng.gen_range(1..=vmax);
                TradeAction::new(-dv, list_price_units(dv, config.eta, config))
            }
        })
        .collect()
}

/// A seller's posted subscription terms, fixed for the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubscriptionOffer {
    pub seller_id: usize,
    /// Real currency per volume unit, within [eta, (1+delta)·eta].
    pub unit_price: f64,
    /// Volume units offered per period.
    pub bundle: i64,
}

/// Posts one offer per current seller. Prices are drawn once, uniformly
/// from [eta, (1+delta)·eta]; the bundle defaults to two volume units.
pub fn init_subscription_offers<R: Rng>(
    state: &crate::env::MarketState,
    config: &MarketConfig,
    rng: &mut R,
) -> Vec<SubscriptionOffer> {
    state
        .traders
        .iter()
        .enumerate()
        .filter(|(_, t)| role_of(t) == Role::Seller)
        .map(|(i, _)| SubscriptionOffer {
            seller_id: i,
            unit_price: rng.gen_range(config.eta..=(1.0 + config.delta) * config.eta),
            bundle: 2,
        })
        .collect()
}

/// Subscription pricing: sellers offer their bundle at their posted price;
/// buyers bid for the cheapest still-active offer, but only when the posted
/// price passes their own acceptance intention. Deterministic given the
/// offers.
pub fn subscription_policy(
    state: &crate::env::MarketState,
    profiles: &[IntentionProfile],
    offers: &[SubscriptionOffer],
    config: &MarketConfig,
) -> Vec<TradeAction> {
    let offer_for = |i: usize| offers.iter().find(|o| o.seller_id == i);
    let cheapest = offers
        .iter()
        .filter(|o| {
            state
                .traders
                .get(o.seller_id)
                .map(|t| role_of(t) == Role::Seller)
                .unwrap_or(false)
        })
        .min_by(|a, b| {
            a.unit_price
                .partial_cmp(&b.unit_price)
                .expect("finite offer prices")
                .then(a.seller_id.cmp(&b.seller_id))
        });
    // With every posted seller at target, nobody proposes anything.
    let Some(best) = cheapest else {
        return vec![TradeAction::zero(); state.traders.len()];
    };

    state
        .traders
        .iter()
        .enumerate()
        .map(|(i, t)| match role_of(t) {
            Role::Idle => TradeAction::zero(),
            Role::Seller => {
                let Some(offer) = offer_for(i) else {
                    return TradeAction::zero();
                };
                let vol = offer
                    .bundle
                    .min(t.v - t.vt)
                    .min(config.max_volume_per_action);
                if vol < 1 {
                    return TradeAction::zero();
                }
                TradeAction::new(-vol, list_price_units(vol, offer.unit_price, config))
            }
            Role::Buyer => {
                let bound = best
                    .bundle
                    .min(t.vt - t.v)
                    .min(config.max_volume_per_action);
                let vol = affordable_volume(bound, t.c, best.unit_price, config);
                if vol < 1 {
                    return TradeAction::zero();
                }
                let action = TradeAction::new(vol, -list_price_units(vol, best.unit_price, config));
                // The posted price must clear the buyer's own reservation,
                // or it walks away for this period.
                if accepts(&profiles[i], config, action.dv, action.dc) {
                    action
                } else {
                    TradeAction::zero()
                }
            }
        })
        .collect()
}
