//! Criterion 6: determinism and persistence.
//!
//! Running the same experiment spec twice must produce byte-identical
//! artifacts (CSVs, metadata, pricing tables); a saved pricing table must
//! reload and re-save to the same bytes; and the metrics recomputed from the
//! written trade logs must equal the emitted metric files.

use std::fs;
use std::path::{Path, PathBuf};

use swdpm_cli::logs;
use swdpm_cli::runner::run_experiment;
use swdpm_cli::spec::{ExperimentSpec, Method, StartStates};
use swdpm_core::{MarketConfig, QTable, TraderState};

use crate::support;

const BUDGET_SECS: f64 = 120.0;

fn spec() -> ExperimentSpec {
    ExperimentSpec {
        market: MarketConfig {
            xi: 100_000,
            ..MarketConfig::default()
        },
        seeds: vec![11, 12],
        methods: vec![Method::Swdpm, Method::Uniform, Method::Subscription],
        start: StartStates::Fixed(vec![TraderState::new(4, 0, 5), TraderState::new(0, 4, 0)]),
        history_episodes: 200,
        out_dir: None,
    }
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).expect("listing an output directory") {
        let path = entry.expect("reading a directory entry").path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_6_determinism_and_persistence() {
    support::timed(6, "determinism and persistence", BUDGET_SECS, || {
        let spec = spec();
        let first = tempfile::tempdir().expect("scratch dir");
        let second = tempfile::tempdir().expect("scratch dir");
        if let Err(err) = run_experiment(&spec, first.path()) {
            return (false, format!("first run failed: {err:#}"));
        }
        if let Err(err) = run_experiment(&spec, second.path()) {
            return (false, format!("second run failed: {err:#}"));
        }

        // Identical (spec, seed) must give byte-identical artifacts.
        let files = walk(first.path());
        if files.is_empty() {
            return (false, "the experiment wrote no files".to_string());
        }
        for path in &files {
            let rel = path.strip_prefix(first.path()).expect("walked path is relative");
            let twin = second.path().join(rel);
            let (a, b) = (fs::read(path), fs::read(&twin));
            match (a, b) {
                (Ok(a), Ok(b)) if a == b => {}
                (Ok(_), Ok(_)) => {
                    return (false, format!("{} differs between identical runs", rel.display()))
                }
                _ => return (false, format!("{} missing from the rerun", rel.display())),
            }
        }

        // Every run directory must verify against its own trade log, and
        // every saved pricing table must round-trip bit-exactly.
        let mut run_dirs = 0usize;
        let mut tables = 0usize;
        for entry in fs::read_dir(first.path()).expect("listing run dirs") {
            let dir = entry.expect("run dir entry").path();
            if !dir.join(logs::META_FILE).is_file() {
                continue;
            }
            run_dirs += 1;
            if let Err(err) = logs::verify_run_dir(&dir) {
                return (
                    false,
                    format!("recomputed metrics differ in {}: {err:#}", dir.display()),
                );
            }
            let table_path = dir.join(logs::QTABLE_FILE);
            if table_path.is_file() {
                tables += 1;
                let original = fs::read(&table_path).expect("reading the saved table");
                let loaded = match QTable::load(&table_path, &spec.market) {
                    Ok(t) => t,
                    Err(err) => return (false, format!("table failed to load: {err}")),
                };
                let resaved_path = dir.join("resaved-table.bin");
                if let Err(err) = loaded.save(&resaved_path, &spec.market) {
                    return (false, format!("table failed to re-save: {err}"));
                }
                let resaved = fs::read(&resaved_path).expect("reading the re-saved table");
                fs::remove_file(&resaved_path).ok();
                if original != resaved {
                    return (
                        false,
                        format!("table round-trip not bit-exact in {}", dir.display()),
                    );
                }
            }
        }
        if run_dirs != spec.seeds.len() * spec.methods.len() || tables != spec.seeds.len() {
            return (
                false,
                format!("expected 6 run dirs with 2 tables, found {run_dirs} and {tables}"),
            );
        }

        (
            true,
            format!(
                "{} files byte-identical across reruns, {run_dirs} run dirs re-verified, \
                 {tables} pricing tables round-tripped bit-exactly",
                files.len()
            ),
        )
    });
}
