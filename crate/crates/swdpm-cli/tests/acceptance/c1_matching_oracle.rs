//! Criterion 1: matchmaking oracle equivalence.
//!
//! Every market with at most three traders and proposals on the unit grid
//! with |dv| <= 3, |dc| <= 4 is generated exhaustively. For each one, an
//! independent brute-force enumerator derives the set of outcomes reachable
//! under *any* per-pass visiting order; seeded runs of the production
//! matcher must land inside that set, and every enumerated outcome must
//! conserve volume and currency.

use swdpm_core::market::{accepts, IntentionProfile, Role, TradeAction};
use swdpm_core::matching::{match_step, Fill, MatchOutcome};
use swdpm_core::rng::stream;
use swdpm_core::MarketConfig;

use crate::support;

const DV_MAX: i64 = 3;
const DC_MAX: i64 = 4;
const SEEDS_PER_CASE: u64 = 3;
const BUDGET_SECS: f64 = 60.0;

/// Every proposal a trader of the given role may submit within the grid.
fn role_actions(role: Role) -> Vec<TradeAction> {
    let mut out = vec![TradeAction::zero()];
    match role {
        Role::Buyer => {
            for dv in 1..=DV_MAX {
                for dc in -DC_MAX..=0 {
                    out.push(TradeAction::new(dv, dc));
                }
            }
        }
        Role::Seller => {
            for dv in 1..=DV_MAX {
                for dc in 0..=DC_MAX {
                    out.push(TradeAction::new(-dv, dc));
                }
            }
        }
        Role::Idle => {}
    }
    out
}

const BUYER_RHO: [f64; 5] = [1.0, 1.05, 1.1, 1.15, 1.2];
const SELLER_RHO: [f64; 5] = [1.0, 0.95, 0.9, 0.85, 0.8];

fn profile_for(role: Role, palette: usize) -> IntentionProfile {
    let rho = match role {
        Role::Buyer => BUYER_RHO[palette % BUYER_RHO.len()],
        Role::Seller => SELLER_RHO[palette % SELLER_RHO.len()],
        Role::Idle => 1.0,
    };
    IntentionProfile {
        rho,
        role_at_sampling: role,
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (k, &head) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(k);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// One matching pass over `order`, with exactly the production semantics:
/// visit each still-unsolved proposal, match it as maker against the first
/// unsolved counterparty in pass order that is opposite in direction, no
/// larger in volume or currency, and acceptable at reversed terms.
fn simulate_pass(
    order: &[usize],
    residuals: &mut [TradeAction],
    unsolved: &mut Vec<usize>,
    fills: &mut Vec<Fill>,
    profiles: &[IntentionProfile],
    config: &MarketConfig,
) -> usize {
    let mut matched = 0;
    for &i in order {
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
            residuals[i] = TradeAction::new(residuals[i].dv + taken.dv, residuals[i].dc + taken.dc);
            residuals[j] = TradeAction::zero();
            unsolved.retain(|&k| k != j);
            if residuals[i].dv == 0 {
                unsolved.retain(|&k| k != i);
            }
            matched += 1;
        }
    }
    matched
}

fn record(out: &mut Vec<MatchOutcome>, residuals: Vec<TradeAction>, fills: Vec<Fill>) {
    let cleared = residuals.iter().all(|r| r.dv == 0);
    let outcome = MatchOutcome {
        fills,
        residuals,
        cleared,
    };
    if !out.contains(&outcome) {
        out.push(outcome);
    }
}

fn explore(
    residuals: Vec<TradeAction>,
    unsolved: Vec<usize>,
    fills: Vec<Fill>,
    profiles: &[IntentionProfile],
    config: &MarketConfig,
    out: &mut Vec<MatchOutcome>,
) {
    if unsolved.is_empty() {
        record(out, residuals, fills);
        return;
    }
    for order in permutations(&unsolved) {
        let mut r = residuals.clone();
        let mut u = unsolved.clone();
        let mut f = fills.clone();
        let matched = simulate_pass(&order, &mut r, &mut u, &mut f, profiles, config);
        if matched == 0 || u.is_empty() {
            record(out, r, f);
        } else {
            explore(r, u, f, profiles, config, out);
        }
    }
}

/// All outcomes the matcher can produce for these proposals under any
/// sequence of per-pass shuffle orders.
fn enumerate_outcomes(
    actions: &[TradeAction],
    profiles: &[IntentionProfile],
    config: &MarketConfig,
) -> Vec<MatchOutcome> {
    let mut out = Vec::new();
    explore(
        actions.to_vec(),
        (0..actions.len()).collect(),
        Vec::new(),
        profiles,
        config,
        &mut out,
    );
    out
}

fn conserves(actions: &[TradeAction], outcome: &MatchOutcome) -> bool {
    let mut dv_sum = 0;
    let mut dc_sum = 0;
    for (a, r) in actions.iter().zip(&outcome.residuals) {
        if r.dv.abs() > a.dv.abs() || r.dv * a.dv < 0 {
            return false;
        }
        if r.dc.abs() > a.dc.abs() || r.dc * a.dc < 0 {
            return false;
        }
        dv_sum += a.dv - r.dv;
        dc_sum += a.dc - r.dc;
    }
    dv_sum == 0
        && dc_sum == 0
        && outcome.cleared == outcome.residuals.iter().all(|r| r.dv == 0)
}

fn role_combos(n: usize) -> Vec<Vec<Role>> {
    let mut combos = vec![Vec::new()];
    for _ in 0..n {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                [Role::Buyer, Role::Seller].into_iter().map(move |r| {
                    let mut next = c.clone();
                    next.push(r);
                    next
                })
            })
            .collect();
    }
    combos
}

fn action_tuples(roles: &[Role]) -> Vec<Vec<TradeAction>> {
    let per_trader: Vec<Vec<TradeAction>> = roles.iter().map(|&r| role_actions(r)).collect();
    let mut tuples = vec![Vec::new()];
    for options in &per_trader {
        tuples = tuples
            .into_iter()
            .flat_map(|t| {
                options.iter().map(move |&a| {
                    let mut next = t.clone();
                    next.push(a);
                    next
                })
            })
            .collect();
    }
    tuples
}

#[test]
fn criterion_1_matchmaking_oracle_equivalence() {
    support::timed(1, "matchmaking oracle equivalence", BUDGET_SECS, || {
        let config = MarketConfig::default();
        let mut cases = 0u64;
        let mut max_outcomes = 0usize;
        let mut failure: Option<String> = None;

        'all: for n in 1..=3usize {
            for roles in role_combos(n) {
                for actions in action_tuples(&roles) {
                    let profiles: Vec<IntentionProfile> = roles
                        .iter()
                        .enumerate()
                        .map(|(i, &r)| profile_for(r, cases as usize + i))
                        .collect();

                    let oracle = enumerate_outcomes(&actions, &profiles, &config);
                    max_outcomes = max_outcomes.max(oracle.len());
                    if let Some(bad) = oracle.iter().find(|o| !conserves(&actions, o)) {
                        failure = Some(format!(
                            "enumerated outcome violates conservation: {actions:?} -> {bad:?}"
                        ));
                        break 'all;
                    }

                    for k in 0..SEEDS_PER_CASE {
                        let mut rng = stream(cases * SEEDS_PER_CASE + k, &["acceptance", "match"]);
                        let got = match_step(&actions, &profiles, &config, &mut rng);
                        if !conserves(&actions, &got) {
                            failure = Some(format!(
                                "matcher outcome violates conservation: {actions:?} -> {got:?}"
                            ));
                            break 'all;
                        }
                        if !oracle.contains(&got) {
                            failure = Some(format!(
                                "matcher outcome not reachable by the oracle: \
                                 actions {actions:?}, profiles {profiles:?}, got {got:?}"
                            ));
                            break 'all;
                        }
                    }
                    cases += 1;
                }
            }
        }

        match failure {
            Some(why) => (false, why),
            None => (
                true,
                format!(
                    "{cases} markets exhausted, {} matcher runs all inside the oracle set, \
                     conservation on 100%, largest outcome set {max_outcomes}",
                    cases * SEEDS_PER_CASE
                ),
            ),
        }
    });
}
