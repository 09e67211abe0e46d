//! Maker/taker matchmaking over one step's joint proposals.
//!
//! Matching runs in passes. Each pass visits the still-unsolved proposals in
//! a freshly shuffled order; a maker matches the first counterparty whose
//! entire residual it can absorb (opposite direction, no larger in volume or
//! currency) and whose reversed terms it accepts. The taker's residual is
//! fully consumed; the maker keeps the arithmetic remainder. A proposal is
//! solved once its volume residual reaches zero; leftover currency residual
//! is simply not spent. Matching stops when nothing is unsolved or a full
//! pass produces no match.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::MarketConfig;
use crate::market::{accepts, IntentionProfile, TradeAction};

/// One executed match: the taker's full residual volume at the taker's
/// residual price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fill {
    pub maker_id: usize,
    pub taker_id: usize,
    /// Volume transferred, unsigned grid units.
    pub volume: i64,
    /// Currency paid by the buying side, unsigned grid units.
    pub payment: i64,
}

/// Result of matching one step's proposals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOutcome {
    /// Matches in the order they occurred.
    pub fills: Vec<Fill>,
    /// Per-trader residual after matching, indexed like the input actions.
    pub residuals: Vec<TradeAction>,
    /// True iff every residual volume is zero.
    pub cleared: bool,
}

/// Volume left unexecuted for `trader` after matching, unsigned.
pub fn unexecuted_volume(outcome: &MatchOutcome, trader: usize) -> i64 {
    outcome.residuals[trader].dv.abs()
}

/// Matches one step's proposals against each other.
///
/// `actions[i]` must be feasible for trader `i`; intentions are consulted
/// only on the maker side, mirroring how a posted proposal is taken at its
/// own terms while the absorbing party must agree to them.
pub fn match_step<R: Rng>(
    actions: &[TradeAction],
    profiles: &[IntentionProfile],
    config: &MarketConfig,
    rng: &mut R,
) -> MatchOutcome {
    assert_eq!(actions.len(), profiles.len());
    let mut residuals: Vec<TradeAction> = actions.to_vec();
    let mut unsolved: Vec<usize> = (0..actions.len()).collect();
    let mut fills = Vec::new();

    let mut matched = usize::MAX;
    while !unsolved.is_empty() && matched != 0 {
        unsolved.shuffle(rng);
        matched = 0;
        let order = unsolved.clone();
        for &i in &order {
            if !unsolved.contains(&i) {
                continue;
            }
            if residuals[i].dv == 0 {
                unsolved.retain(|&k| k != i);
                continue;
            }
            let candidate = order
                .iter()
                .copied()
                .filter(|&j| j != i && unsolved.contains(&j))
                .find(|&j| {
                    let (a, b) = (residuals[i], residuals[j]);
                    b.dv * a.dv < 0
                        && b.dv.abs() <= a.dv.abs()
                        && b.dc.abs() <= a.dc.abs()
                        && accepts(&profiles[i], config, -b.dv, -b.dc)
                });
            if let Some(j) = candidate {
                let taken = residuals[j];
                fills.push(Fill {
                    maker_id: i,
                    taker_id: j,
                    volume: taken.dv.abs(),
                    payment: taken.dc.abs(),
                });
                residuals[i] = TradeAction::new(
                    residuals[i].dv + taken.dv,
                    residuals[i].dc + taken.dc,
                );
                residuals[j] = TradeAction::zero();
                unsolved.retain(|&k| k != j);
                if residuals[i].dv == 0 {
                    unsolved.retain(|&k| k != i);
                }
                matched += 1;
            }
        }
    }

    let cleared = residuals.iter().all(|r| r.dv == 0);
    MatchOutcome {
        fills,
        residuals,
        cleared,
    }
}
