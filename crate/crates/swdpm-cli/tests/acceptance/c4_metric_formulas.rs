//! Criterion 4: metric formulas and ranges.
//!
//! Hand-computed feasibility, efficiency, and fairness cases must come out
//! exactly; the division conventions (no proposals, no traded volume, fewer
//! than two prices) must behave as documented; and the bounded ranges
//! (feasibility in [0,1], fairness <= 1) must hold across 10,000 randomized
//! fill sets.

use rand::Rng;
use swdpm_core::metrics::{efficiency, fairness_metric, feasibility, StepMetrics};
use swdpm_core::rng::stream;

use crate::support;

const RANDOM_SETS: usize = 10_000;

fn metrics_of(proposals: usize, accomplished: usize, welfare: f64, volume: f64) -> StepMetrics {
    StepMetrics {
        time: 0,
        proposals,
        accomplished,
        welfare,
        traded_volume: volume,
        unit_prices: Vec::new(),
    }
}

#[test]
fn criterion_4_metric_formulas_and_ranges() {
    support::timed(4, "metric formulas and ranges", 60.0, || {
        let mut checks: Vec<(&str, bool)> = Vec::new();

        // Hand-computed anchors.
        checks.push((
            "261 accomplished of 1000 proposals is 0.261",
            feasibility(&metrics_of(1000, 261, 0.0, 0.0)) == 0.261,
        ));
        checks.push((
            "welfare 3.6 over volume 2 is 1.8",
            efficiency(&metrics_of(2, 2, 3.6, 2.0)) == 1.8,
        ));
        checks.push((
            "half accomplished is 0.5",
            feasibility(&metrics_of(2, 1, 0.0, 0.0)) == 0.5,
        ));
        checks.push((
            "prices {-1,-1,-2,-2} deviate by 0.5",
            fairness_metric(&[-1.0, -1.0, -2.0, -2.0]) == 0.5,
        ));
        checks.push((
            "equal prices are perfectly fair",
            fairness_metric(&[-1.5, -1.5, -1.5]) == 1.0,
        ));

        // Division conventions.
        checks.push((
            "no proposals counts as fully feasible",
            feasibility(&metrics_of(0, 0, 0.0, 0.0)) == 1.0,
        ));
        checks.push((
            "no traded volume has zero efficiency",
            efficiency(&metrics_of(3, 0, 0.0, 0.0)) == 0.0,
        ));
        checks.push((
            "a single price is trivially fair",
            fairness_metric(&[-2.0]) == 1.0,
        ));
        checks.push(("no prices are trivially fair", fairness_metric(&[]) == 1.0));

        // Range invariants over randomized fill sets.
        let mut rng = stream(4, &["acceptance", "metric-ranges"]);
        let mut ranges_ok = true;
        for _ in 0..RANDOM_SETS {
            let proposals = rng.gen_range(0..=40usize);
            let accomplished = rng.gen_range(0..=proposals.max(1)).min(proposals);
            let f = feasibility(&metrics_of(proposals, accomplished, 0.0, 0.0));
            ranges_ok &= (0.0..=1.0).contains(&f);

            let fills = rng.gen_range(0..=32usize);
            let prices: Vec<f64> = (0..fills)
                .map(|_| {
                    let volume = rng.gen_range(1..=5i64);
                    let payment = rng.gen_range(0..=8i64);
                    -(payment as f64) / volume as f64
                })
                .collect();
            ranges_ok &= fairness_metric(&prices) <= 1.0;
        }
        checks.push((
            "feasibility stays in [0,1] and fairness <= 1 on randomized fill sets",
            ranges_ok,
        ));

        let failed: Vec<&str> = checks
            .iter()
            .filter(|(_, ok)| !ok)
            .map(|(name, _)| *name)
            .collect();
        if failed.is_empty() {
            (
                true,
                format!(
                    "{} exact cases and conventions, ranges held on {RANDOM_SETS} randomized sets",
                    checks.len() - 1
                ),
            )
        } else {
            (false, format!("failed checks: {}", failed.join("; ")))
        }
    });
}
