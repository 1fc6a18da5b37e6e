//! Random instances: measures, tables and model specifications.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::construct::OutcomeResponseMeasure;
use crate::design::{DesignConfig, ObservedDistribution, OutcomeDistribution, ResponseMeasure};
use crate::error::Result;
use crate::rational::{int, ratio, Rational};
use crate::response_types::enumerate_admissible;
use crate::simulate::{EpsilonDist, RumSpec};

/// Positive integer weights normalized to sum to one.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, len: usize, max_weight: i64) -> Vec<Rational> {
    let w: Vec<i64> = (0..len).map(|_| rng.random_range(1..=max_weight)).collect();
    let total: i64 = w.iter().sum();
    w.into_iter().map(|x| ratio(x, total)).collect()
}

/// Nonnegative weights, some of them zero, normalized to sum to one.
pub fn random_sparse_simplex<R: Rng + ?Sized>(rng: &mut R, len: usize, max_weight: i64) -> Vec<Rational> {
    loop {
        let w: Vec<i64> = (0..len)
            .map(|_| if rng.random_bool(0.4) { 0 } else { rng.random_range(1..=max_weight) })
            .collect();
        let total: i64 = w.iter().sum();
        if total > 0 {
            return w.into_iter().map(|x| ratio(x, total)).collect();
        }
    }
}

/// A measure on a random subset of at most `max_support` admissible types.
pub fn random_measure<R: Rng + ?Sized>(config: &DesignConfig, rng: &mut R, max_support: usize) -> Result<ResponseMeasure> {
    let types = enumerate_admissible(config)?.types().to_vec();
    let k = rng.random_range(1..=max_support.clamp(1, types.len()));
    let chosen: Vec<_> = types.choose_multiple(rng, k).cloned().collect();
    let w = random_simplex(rng, k, 20);
    ResponseMeasure::new(config.clone(), chosen.into_iter().zip(w).collect())
}

/// A table with independently drawn rows; often infeasible.
pub fn random_table<R: Rng + ?Sized>(config: &DesignConfig, rng: &mut R) -> Result<ObservedDistribution> {
    let rows = (0..config.num_instruments())
        .map(|_| random_sparse_simplex(rng, config.num_choices(), 12))
        .collect();
    ObservedDistribution::new(config.clone(), rows, None)
}

/// Moves a random amount of probability between two cells of one row.
pub fn perturb_table<R: Rng + ?Sized>(p: &ObservedDistribution, rng: &mut R) -> Result<ObservedDistribution> {
    let mut rows = p.rows().to_vec();
    let zi = rng.random_range(0..rows.len());
    let from = rng.random_range(0..rows[zi].len());
    let mut to = rng.random_range(0..rows[zi].len() - 1);
    if to >= from {
        to += 1;
    }
    let share = ratio(rng.random_range(1..=4), 4);
    let delta = &rows[zi][from] * share;
    rows[zi][from] -= &delta;
    rows[zi][to] += delta;
    ObservedDistribution::new(p.config().clone(), rows, None)
}

/// The three kinds of table used in oracle comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableKind {
    /// Pushforward of a random measure.
    Feasible,
    /// Pushforward of a measure on one or two types; zero slacks are common.
    Boundary,
    /// Independent rows or a perturbed feasible table.
    Unrestricted,
}

pub fn random_table_of_kind<R: Rng + ?Sized>(
    config: &DesignConfig,
    rng: &mut R,
    kind: TableKind,
) -> Result<ObservedDistribution> {
    match kind {
        TableKind::Feasible => Ok(random_measure(config, rng, 8)?.pushforward()),
        TableKind::Boundary => Ok(random_measure(config, rng, 2)?.pushforward()),
        TableKind::Unrestricted => {
            if rng.random_bool(0.5) {
                random_table(config, rng)
            } else {
                let p = random_measure(config, rng, 8)?.pushforward();
                perturb_table(&p, rng)
            }
        }
    }
}

/// A measure over (type, potential-outcome vector) pairs with at most
/// `max_support` atoms.
pub fn random_outcome_measure<R: Rng + ?Sized>(
    config: &DesignConfig,
    y_support: &[i64],
    rng: &mut R,
    max_support: usize,
) -> Result<OutcomeResponseMeasure> {
    let types = enumerate_admissible(config)?.types().to_vec();
    let k = rng.random_range(1..=max_support.max(1));
    let w = random_simplex(rng, k, 20);
    let mut mass: BTreeMap<_, Rational> = BTreeMap::new();
    for m in w {
        let t = types.choose(rng).expect("nonempty admissible set").clone();
        let ys: Vec<i64> = (0..config.num_choices())
            .map(|_| *y_support.choose(rng).expect("nonempty outcome support"))
            .collect();
        *mass.entry((t, ys)).or_insert_with(Rational::zero) += m;
    }
    OutcomeResponseMeasure::new(config.clone(), y_support.to_vec(), mass)
}

/// An outcome table: either a pushforward (feasible), a perturbed
/// pushforward, or independently drawn blocks.
pub fn random_outcome_table<R: Rng + ?Sized>(
    config: &DesignConfig,
    y_support: &[i64],
    rng: &mut R,
) -> Result<OutcomeDistribution> {
    let ny = y_support.len();
    let jj = config.num_choices();
    let choice = rng.random_range(0..3);
    let blocks: Vec<Vec<Vec<Rational>>> = if choice == 2 {
        (0..config.num_instruments())
            .map(|_| {
                let flat = random_sparse_simplex(rng, jj * ny, 10);
                flat.chunks(ny).map(<[Rational]>::to_vec).collect()
            })
            .collect()
    } else {
        let mut b = random_outcome_measure(config, y_support, rng, 10)?.pushforward().blocks().to_vec();
        if choice == 1 {
            let zi = rng.random_range(0..b.len());
            let cells: Vec<(usize, usize)> = (0..jj).flat_map(|j| (0..ny).map(move |y| (j, y))).collect();
            let mut picked: Vec<_> = cells.choose_multiple(rng, 2).copied().collect();
            picked.shuffle(rng);
            let (a, c) = (picked[0], picked[1]);
            let delta = &b[zi][a.0][a.1] * ratio(rng.random_range(1..=4), 4);
            b[zi][a.0][a.1] -= &delta;
            b[zi][c.0][c.1] += delta;
        }
        b
    };
    OutcomeDistribution::new(config.clone(), y_support.to_vec(), blocks, None)
}

/// A random model: targeted `beta_j` in `[0.5, 3]`, instrument marginal
/// bounded away from zero.
pub fn random_rum_spec<R: Rng + ?Sized>(
    config: &DesignConfig,
    rng: &mut R,
    epsilon: EpsilonDist,
    n: u64,
) -> Result<RumSpec> {
    let betas = (0..config.num_choices())
        .map(|j| {
            if j < config.num_unaffected() {
                0.0
            } else {
                rng.random_range(0.5..=3.0)
            }
        })
        .collect();
    let raw: Vec<f64> = (0..config.num_instruments()).map(|_| rng.random_range(1.0..3.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut pz: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = pz[..pz.len() - 1].iter().sum();
    *pz.last_mut().expect("nonempty support") = 1.0 - head;
    RumSpec::new(config.clone(), betas, epsilon, pz, n, rng.random())
}

/// A table at exact distance `gap` below zero on one pairwise inequality
/// of a binary design: `P{D=1|Z=0} = P{D=1|Z=1} + gap`.
pub fn violating_binary_table(base: Rational, gap: Rational) -> Result<ObservedDistribution> {
    let config = DesignConfig::new(2, 0)?;
    let high = &base + &gap;
    if high > int(1) || base.is_negative() {
        return Err(crate::error::Error::InvalidParameter("violation does not fit in [0, 1]".into()));
    }
    ObservedDistribution::new(
        config,
        vec![vec![int(1) - &high, high], vec![int(1) - &base, base]],
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inequality::check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_produce_valid_objects() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = DesignConfig::new(3, 1).unwrap();
        for kind in [TableKind::Feasible, TableKind::Boundary, TableKind::Unrestricted] {
            for _ in 0..20 {
                random_table_of_kind(&c, &mut rng, kind).unwrap();
            }
        }
        for _ in 0..20 {
            random_outcome_table(&c, &[0, 1, 2], &mut rng).unwrap();
            random_rum_spec(&c, &mut rng, EpsilonDist::Gumbel, 10).unwrap();
        }
    }

    #[test]
    fn violating_table_has_the_requested_slack() {
        let p = violating_binary_table(ratio(2, 5), ratio(1, 5)).unwrap();
        let r = check(&p).unwrap();
        assert!(!r.passed);
        assert_eq!(r.min_slack, ratio(-1, 5));
    }
}
