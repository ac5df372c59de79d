use std::fs;

use proptest::prelude::*;

use swarmsec::framework::{certify_record, run_bca, run_bca_on, BcaConfig, Network, Scheme};
use swarmsec::harness::{aggregate, read_rows, read_summary, run_to_dir, ExperimentConfig, RESULTS_FILE, SUMMARY_FILE};
use swarmsec::scenario::{Region, Scenario};

fn small_region() -> Region {
    Region { x_max: 400.0, y_max: 400.0, ..Region::table_defaults() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_scheme_yields_a_consistent_state(seed in 0u64..10_000, n in 4usize..40, k in 0usize..6, c in 1usize..5) {
        let region = small_region();
        let (scenario, rng) = Scenario::sample_nonempty(region, n, 0.5, seed, 0).unwrap();
        let scheme = Scheme::ALL[k];
        let config = scheme.configure(&BcaConfig { n_subchannels: c, n_it: 3, ..BcaConfig::default() });
        let network = Network::from_scenario(&scenario, &config).unwrap();
        let rec = run_bca_on(&network, &config, &mut rng.fork(1)).unwrap();

        prop_assert!(rec.powers.within_budget());
        prop_assert!(rec.deployment.within(&region));
        for (m, p) in rec.deployment.positions.iter().enumerate() {
            prop_assert_eq!(p[2], rec.deployment.grid[rec.deployment.levels[m]]);
        }
        let mut seen = std::collections::HashSet::new();
        for l in 0..rec.assoc.n_legit() {
            if let Some(r) = rec.assoc.serving(l) {
                prop_assert!(seen.insert(r));
                prop_assert_eq!(rec.assoc.occupant(r), Some(l));
            }
        }
        // enough resources for everyone, so greedy-style schemes serve all nodes
        if matches!(scheme, Scheme::Greedy | Scheme::AdaptedGreedy) {
            prop_assert_eq!(rec.assoc.n_associated(), rec.assoc.n_legit());
        }
        prop_assert_eq!(rec.iterations.len(), 3);
        for it in &rec.iterations {
            prop_assert!(it.sum_secrecy_rate.is_finite() && it.sum_secrecy_rate >= 0.0);
            prop_assert!((0.0..=100.0).contains(&it.positive_secrecy_pct));
        }
        if rec.converged && config.positioning == swarmsec::framework::PositioningScheme::KMeansBestResponse {
            prop_assert!(certify_record(&network, &rec).unwrap().is_clean());
        }
    }
}

#[test]
fn scenario_record_reproduces_the_run() {
    let region = Region::table_defaults();
    let (scenario, rng) = Scenario::sample_nonempty(region, 50, 0.5, 5, 3).unwrap();
    let reloaded = Scenario::from_record(region, 0.5, &scenario.to_record()).unwrap();
    let config = BcaConfig::default();
    let a = run_bca(&scenario, &config, &mut rng.clone()).unwrap();
    let b = run_bca(&reloaded, &config, &mut rng.clone()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn summary_file_is_a_function_of_results_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        n_nodes: 30,
        n_it: 2,
        realizations: 3,
        sweep_values: vec![-20.0, 0.0, 20.0],
        schemes: vec![Scheme::Proposed, Scheme::Greedy, Scheme::MaxSumRate],
        ..ExperimentConfig::default()
    };
    let out = run_to_dir(&config, dir.path()).unwrap();
    assert_eq!(out.rows.len(), 3 * 3 * 3);
    let rows = read_rows(fs::File::open(dir.path().join(RESULTS_FILE)).unwrap()).unwrap();
    assert_eq!(rows, out.rows);
    let summary = read_summary(fs::File::open(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary, aggregate(&rows).unwrap());
    assert_eq!(summary.len(), 9);
    assert!(summary.iter().all(|s| s.count == 3));
}
