use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use encourage_core::construct::{construct, construct_outcome, diagnose};
use encourage_core::inequality::{brute_force_partition_check, check, check_outcome};
use encourage_core::lp::{feasible, feasible_outcome};
use encourage_core::random::{random_measure, random_outcome_measure, random_outcome_table, random_table_of_kind, TableKind};
use encourage_core::rational::{ratio, Rational};
use encourage_core::response_types::{enumerate_admissible, is_admissible};
use encourage_core::stats::{population_agrees, population_agrees_outcome};
use encourage_core::{DesignConfig, ResponseMeasure};

const CONFIGS: [(usize, usize); 7] = [(2, 0), (2, 1), (3, 0), (3, 1), (3, 2), (4, 0), (4, 2)];

fn config_strategy() -> impl Strategy<Value = DesignConfig> {
    (0..CONFIGS.len()).prop_map(|i| DesignConfig::new(CONFIGS[i].0, CONFIGS[i].1).unwrap())
}

fn kind_strategy() -> impl Strategy<Value = TableKind> {
    prop_oneof![
        Just(TableKind::Feasible),
        Just(TableKind::Boundary),
        Just(TableKind::Unrestricted)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pushforward_is_linear(config in config_strategy(), seed in any::<u64>(), num in 0i64..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_measure(&config, &mut rng, 6).unwrap();
        let b = random_measure(&config, &mut rng, 6).unwrap();
        let w = ratio(num, 8);
        let mut mix: BTreeMap<_, Rational> = BTreeMap::new();
        for (t, m) in a.masses() {
            *mix.entry(t.clone()).or_insert_with(Rational::zero) += &w * m;
        }
        for (t, m) in b.masses() {
            *mix.entry(t.clone()).or_insert_with(Rational::zero) += (ratio(1, 1) - &w) * m;
        }
        let q = ResponseMeasure::new(config.clone(), mix).unwrap();
        let (pa, pb, pq) = (a.pushforward(), b.pushforward(), q.pushforward());
        for zi in 0..config.num_instruments() {
            for j in 0..config.num_choices() {
                let expected = &w * pa.at(zi, j) + (ratio(1, 1) - &w) * pb.at(zi, j);
                prop_assert_eq!(pq.at(zi, j), &expected);
            }
        }
    }

    #[test]
    fn construction_roundtrips_model_tables(config in config_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_measure(&config, &mut rng, 10).unwrap().pushforward();
        prop_assert!(check(&p).unwrap().passed);
        let q = construct(&p).unwrap();
        prop_assert!(q.masses().keys().all(|t| is_admissible(&config, t)));
        prop_assert_eq!(q.pushforward(), p);
    }

    #[test]
    fn three_oracles_agree(config in config_strategy(), kind in kind_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_table_of_kind(&config, &mut rng, kind).unwrap();
        let by_check = check(&p).unwrap().passed;
        let lp = feasible(&p).unwrap();
        let by_construct = construct(&p).is_ok();
        prop_assert_eq!(by_check, lp.feasible);
        prop_assert_eq!(by_check, by_construct);
        prop_assert_eq!(by_check, diagnose(&p).first_negative().is_none());
        if let Some(cert) = lp.certificate {
            prop_assert!(cert.masses().values().all(|m| m.is_positive()));
            prop_assert_eq!(cert.pushforward(), p.clone());
        }
        prop_assert!(population_agrees(&p).unwrap());
    }

    #[test]
    fn outcome_check_matches_literal_partitions(
        j0 in 0usize..=1,
        ny in 2usize..=3,
        seed in any::<u64>(),
    ) {
        let config = DesignConfig::new(3, j0).unwrap();
        let ys: Vec<i64> = (0..ny as i64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let py = random_outcome_table(&config, &ys, &mut rng).unwrap();
        let passed = check_outcome(&py).unwrap().passed;
        prop_assert_eq!(passed, brute_force_partition_check(&py).unwrap());
        prop_assert_eq!(passed, construct_outcome(&py).is_ok());
        prop_assert!(population_agrees_outcome(&py).unwrap());
    }

    #[test]
    fn outcome_construction_roundtrips(config in config_strategy(), ny in 1usize..=3, seed in any::<u64>()) {
        let ys: Vec<i64> = (0..ny as i64).map(|y| 10 * y - 5).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let py = random_outcome_measure(&config, &ys, &mut rng, 8).unwrap().pushforward();
        let q = construct_outcome(&py).unwrap();
        prop_assert_eq!(q.pushforward(), py.clone());
        // the treatment part of the witness is a witness for the marginal table
        prop_assert_eq!(q.response_marginal().pushforward(), py.marginal());
        if ny == 1 {
            prop_assert_eq!(check(&py.marginal()).unwrap().passed, check_outcome(&py).unwrap().passed);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn outcome_lp_agrees_with_check(j0 in 0usize..=1, seed in any::<u64>()) {
        let config = DesignConfig::new(2, j0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let py = random_outcome_table(&config, &[0, 1], &mut rng).unwrap();
        let v = feasible_outcome(&py).unwrap();
        prop_assert_eq!(v.feasible, check_outcome(&py).unwrap().passed);
        if let Some(cert) = v.certificate {
            prop_assert_eq!(cert.pushforward(), py);
        }
    }
}

#[test]
fn outcome_lp_on_three_choices() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for j0 in [0, 1] {
        let config = DesignConfig::new(3, j0).unwrap();
        for _ in 0..15 {
            let py = random_outcome_table(&config, &[0, 1], &mut rng).unwrap();
            assert_eq!(feasible_outcome(&py).unwrap().feasible, check_outcome(&py).unwrap().passed);
        }
    }
}

#[test]
fn single_outcome_lp_matches_choice_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let config = DesignConfig::new(3, 1).unwrap();
    for kind in [TableKind::Feasible, TableKind::Unrestricted] {
        for _ in 0..10 {
            let p = random_table_of_kind(&config, &mut rng, kind).unwrap();
            let blocks = p.rows().iter().map(|r| r.iter().map(|v| vec![v.clone()]).collect()).collect();
            let py = encourage_core::OutcomeDistribution::new(config.clone(), vec![0], blocks, None).unwrap();
            assert_eq!(feasible_outcome(&py).unwrap().feasible, feasible(&p).unwrap().feasible);
        }
    }
}

#[test]
fn every_admissible_point_mass_is_reconstructed() {
    for (j, j0) in CONFIGS {
        let config = DesignConfig::new(j, j0).unwrap();
        for t in enumerate_admissible(&config).unwrap().types() {
            let q = ResponseMeasure::new(config.clone(), [(t.clone(), ratio(1, 1))].into()).unwrap();
            let p = q.pushforward();
            let rebuilt = construct(&p).unwrap();
            assert_eq!(rebuilt.pushforward(), p, "type {t} under {config}");
        }
    }
}
