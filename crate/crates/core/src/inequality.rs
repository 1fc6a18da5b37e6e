//! Sharp inequality families on conditional choice probabilities, with and
//! without an outcome, and their exact evaluation.
//!
//! Without an outcome the family is indexed by selectors `z(j)`, one
//! instrument value per choice drawn from [`DesignConfig::targeted_set`]:
//! `sum_j P{D = j | Z = z(j)} <= 1`. With a base state the family reduces
//! to the pairwise comparisons `P{D = j | Z = k} <= P{D = j | Z = 0}`.
//!
//! With a discrete outcome the partition inequalities become a single
//! cellwise-max inequality, since each `(j, y)` cell picks its instrument
//! value independently, and the Borel-set comparisons become pointwise
//! comparisons on cells.

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::design::{DesignConfig, ObservedDistribution, OutcomeDistribution};
use crate::error::{Error, Result};
use crate::rational::Rational;

/// Default cap on the number of inequalities (or partitions) enumerated.
pub const DEFAULT_FAMILY_CAP: u128 = 1 << 20;

/// Right-hand side of an inequality.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Bound {
    One,
    /// `P{D = j | Z = z}` given as `(z, j)`.
    Cell { z: usize, j: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum InequalityKind {
    /// `sum_j P{D = j | Z = selector[j]} <= 1`.
    SumForm { selector: Vec<usize> },
    /// `P{D = j | Z = lower} <= P{D = j | Z = upper}`.
    Pairwise { j: usize, lower: usize, upper: usize },
}

/// One linear inequality `sum(terms) <= bound` over `(z, j)` coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct InequalitySpec {
    pub kind: InequalityKind,
    /// Left-hand coordinates as `(z, j)` instrument/choice values.
    pub terms: Vec<(usize, usize)>,
    pub bound: Bound,
}

impl InequalitySpec {
    pub fn sum_form(selector: Vec<usize>) -> Self {
        let terms = selector.iter().enumerate().map(|(j, &z)| (z, j)).collect();
        InequalitySpec {
            kind: InequalityKind::SumForm { selector },
            terms,
            bound: Bound::One,
        }
    }

    pub fn pairwise(j: usize, lower: usize, upper: usize) -> Self {
        InequalitySpec {
            kind: InequalityKind::Pairwise { j, lower, upper },
            terms: vec![(lower, j)],
            bound: Bound::Cell { z: upper, j },
        }
    }

    /// `bound - lhs`, exactly. Negative means violated.
    pub fn slack(&self, p: &ObservedDistribution) -> Result<Rational> {
        let mut lhs = Rational::zero();
        for &(z, j) in &self.terms {
            lhs += p.prob(z, j)?;
        }
        let rhs = match self.bound {
            Bound::One => Rational::one(),
            Bound::Cell { z, j } => p.prob(z, j)?.clone(),
        };
        Ok(rhs - lhs)
    }
}

impl fmt::Display for InequalitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .terms
            .iter()
            .map(|(z, j)| format!("P(D={j}|Z={z})"))
            .collect();
        write!(f, "{} <= ", terms.join(" + "))?;
        match self.bound {
            Bound::One => write!(f, "1"),
            Bound::Cell { z, j } => write!(f, "P(D={j}|Z={z})"),
        }
    }
}

/// Outcome of evaluating a family of inequalities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckReport<S> {
    pub passed: bool,
    /// Violated inequalities with their (negative) slack, in family order.
    pub violations: Vec<(S, Rational)>,
    pub min_slack: Rational,
    pub num_checked: usize,
}

impl<S: Clone> CheckReport<S> {
    fn from_slacks(items: Vec<(S, Rational)>) -> Self {
        let num_checked = items.len();
        let min_slack = items
            .iter()
            .map(|(_, s)| s)
            .min()
            .cloned()
            .unwrap_or_else(Rational::zero);
        let violations: Vec<(S, Rational)> =
            items.into_iter().filter(|(_, s)| s.is_negative()).collect();
        CheckReport {
            passed: violations.is_empty(),
            violations,
            min_slack,
            num_checked,
        }
    }
}

fn selector_count(config: &DesignConfig) -> u128 {
    (0..config.num_choices())
        .map(|j| config.targeted_set(j).len() as u128)
        .fold(1u128, |acc, n| acc.saturating_mul(n))
}

/// Every selector `z(j) in Z(j)`, in lexicographic order of the selector.
pub fn generate_full(config: &DesignConfig) -> Result<Vec<InequalitySpec>> {
    generate_full_capped(config, DEFAULT_FAMILY_CAP)
}

pub fn generate_full_capped(config: &DesignConfig, cap: u128) -> Result<Vec<InequalitySpec>> {
    let required = selector_count(config);
    if required > cap {
        return Err(Error::Capacity {
            what: "selector family",
            required,
            cap,
        });
    }
    let options: Vec<Vec<usize>> = (0..config.num_choices())
        .map(|j| config.targeted_set(j))
        .collect();
    let mut specs = Vec::with_capacity(required as usize);
    let mut idx = vec![0usize; options.len()];
    loop {
        specs.push(InequalitySpec::sum_form(
            idx.iter().zip(&options).map(|(&i, o)| o[i]).collect(),
        ));
        let mut pos = options.len();
        loop {
            if pos == 0 {
                return Ok(specs);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < options[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Base-state comparisons `P{D = j | Z = k} <= P{D = j | Z = 0}` for every
/// choice `j` and targeting value `k != j`.
pub fn generate_reduced(config: &DesignConfig) -> Result<Vec<InequalitySpec>> {
    if !config.has_base_state() {
        return Err(Error::Domain(format!(
            "the reduced family needs a base state (J0 > 0), got {config}"
        )));
    }
    let mut specs = Vec::new();
    for j in 0..config.num_choices() {
        for &k in &config.z_support()[1..] {
            if k != j {
                specs.push(InequalitySpec::pairwise(j, k, 0));
            }
        }
    }
    Ok(specs)
}

/// The family that [`check`] evaluates: the full selector family when
/// `J0 = 0`, the reduced base-state family otherwise.
pub fn generate(config: &DesignConfig) -> Result<Vec<InequalitySpec>> {
    if config.has_base_state() {
        generate_reduced(config)
    } else {
        generate_full(config)
    }
}

/// `P{D = j | Z = k} <= P{D = j | Z = j}` for each targeted `j` and every
/// other instrument value `k`. Implied by the sharp family.
pub fn encouragement_family(config: &DesignConfig) -> Vec<InequalitySpec> {
    let mut specs = Vec::new();
    for j in (0..config.num_choices()).filter(|&j| config.is_targeted(j)) {
        for &k in config.z_support() {
            if k != j {
                specs.push(InequalitySpec::pairwise(j, k, j));
            }
        }
    }
    specs
}

pub fn check_family(
    p: &ObservedDistribution,
    family: &[InequalitySpec],
) -> Result<CheckReport<InequalitySpec>> {
    let items = family
        .iter()
        .map(|s| Ok((s.clone(), s.slack(p)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport::from_slacks(items))
}

/// Evaluates [`generate`] on `p`. Passing is equivalent to the table being
/// generated by the model.
pub fn check(p: &ObservedDistribution) -> Result<CheckReport<InequalitySpec>> {
    check_family(p, &generate(p.config())?)
}

/// An inequality on outcome-treatment cells `P{Y = y, D = j | Z = z}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum OutcomeInequality {
    /// `P{Y = y, D = j | Z = lower} <= P{Y = y, D = j | Z = upper}`.
    Pointwise {
        y: i64,
        j: usize,
        lower: usize,
        upper: usize,
    },
    /// `sum_j sum_y P{Y = y, D = j | Z = assignment[j][yi]} <= 1`; the
    /// assignment for `j` partitions the outcome support across `Z(j)`.
    Partition { assignment: Vec<Vec<usize>> },
}

impl OutcomeInequality {
    /// Left-hand coordinates `(z, j, yi)` and right-hand side.
    pub fn linear_form(&self, py: &OutcomeDistribution) -> Result<(Vec<Cell>, OutcomeBound)> {
        match self {
            OutcomeInequality::Pointwise { y, j, lower, upper } => {
                let yi = py
                    .y_support()
                    .binary_search(y)
                    .map_err(|_| Error::Domain(format!("outcome {y} not in support")))?;
                Ok((
                    vec![(*lower, *j, yi)],
                    OutcomeBound::Cell {
                        z: *upper,
                        j: *j,
                        yi,
                    },
                ))
            }
            OutcomeInequality::Partition { assignment } => {
                let terms = assignment
                    .iter()
                    .enumerate()
                    .flat_map(|(j, zs)| zs.iter().enumerate().map(move |(yi, &z)| (z, j, yi)))
                    .collect();
                Ok((terms, OutcomeBound::One))
            }
        }
    }

    pub fn slack(&self, py: &OutcomeDistribution) -> Result<Rational> {
        let config = py.config();
        let (terms, bound) = self.linear_form(py)?;
        let mut lhs = Rational::zero();
        for (z, j, yi) in terms {
            lhs += py.at(config.require_z_index(z)?, j, yi);
        }
        let rhs = match bound {
            OutcomeBound::One => Rational::one(),
            OutcomeBound::Cell { z, j, yi } => py.at(config.require_z_index(z)?, j, yi).clone(),
        };
        Ok(rhs - lhs)
    }
}

/// An outcome-table coordinate `(z, j, yi)`.
pub type Cell = (usize, usize, usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OutcomeBound {
    One,
    Cell { z: usize, j: usize, yi: usize },
}

impl fmt::Display for OutcomeInequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeInequality::Pointwise { y, j, lower, upper } => write!(
                f,
                "P(Y={y},D={j}|Z={lower}) <= P(Y={y},D={j}|Z={upper})"
            ),
            OutcomeInequality::Partition { assignment } => {
                write!(f, "partition ")?;
                for (j, zs) in assignment.iter().enumerate() {
                    write!(f, "[D={j}: Z={zs:?}]")?;
                }
                write!(f, " sums to <= 1")
            }
        }
    }
}

/// The pointwise comparisons that the outcome check evaluates:
/// encouragement (`Z = j` maximizes every `(y, j)` cell of a targeted `j`)
/// and, with a base state, `Z = 0` dominating every other targeting value.
pub fn outcome_pointwise_family(config: &DesignConfig, y_support: &[i64]) -> Vec<OutcomeInequality> {
    let mut family = Vec::new();
    for &y in y_support {
        for j in 0..config.num_choices() {
            if config.has_base_state() {
                for &k in &config.z_support()[1..] {
                    if k != j {
                        family.push(OutcomeInequality::Pointwise {
                            y,
                            j,
                            lower: k,
                            upper: 0,
                        });
                    }
                }
            }
            if config.is_targeted(j) {
                for &k in config.z_support() {
                    if k != j {
                        family.push(OutcomeInequality::Pointwise {
                            y,
                            j,
                            lower: k,
                            upper: j,
                        });
                    }
                }
            }
        }
    }
    family.sort_by_key(|ineq| match ineq {
        OutcomeInequality::Pointwise { y, j, lower, upper } => (*y, *j, *upper, *lower),
        OutcomeInequality::Partition { .. } => unreachable!(),
    });
    family.dedup();
    family
}

fn partition_count(config: &DesignConfig, num_outcomes: usize) -> u128 {
    (0..config.num_choices())
        .map(|j| (config.targeted_set(j).len() as u128).saturating_pow(num_outcomes as u32))
        .fold(1u128, |acc, n| acc.saturating_mul(n))
}

/// Calls `visit` with every tuple of partitions, one per choice, where each
/// outcome cell of choice `j` is assigned one value of `Z(j)`.
fn for_each_partition(
    config: &DesignConfig,
    num_outcomes: usize,
    cap: u128,
    mut visit: impl FnMut(&[Vec<usize>]),
) -> Result<()> {
    let required = partition_count(config, num_outcomes);
    if required > cap {
        return Err(Error::Capacity {
            what: "partition enumeration",
            required,
            cap,
        });
    }
    let options: Vec<Vec<usize>> = (0..config.num_choices())
        .map(|j| config.targeted_set(j))
        .collect();
    let slots: Vec<usize> = (0..config.num_choices())
        .flat_map(|j| std::iter::repeat_n(j, num_outcomes))
        .collect();
    let mut idx = vec![0usize; slots.len()];
    let mut assignment: Vec<Vec<usize>> = options.iter().map(|o| vec![o[0]; num_outcomes]).collect();
    loop {
        for (slot, (&j, &i)) in slots.iter().zip(&idx).enumerate() {
            assignment[j][slot % num_outcomes] = options[j][i];
        }
        visit(&assignment);
        let mut pos = slots.len();
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < options[slots[pos]].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Every partition inequality, enumerated literally.
pub fn outcome_partition_family(
    config: &DesignConfig,
    num_outcomes: usize,
    cap: u128,
) -> Result<Vec<OutcomeInequality>> {
    let mut family = Vec::new();
    for_each_partition(config, num_outcomes, cap, |assignment| {
        family.push(OutcomeInequality::Partition {
            assignment: assignment.to_vec(),
        })
    })?;
    Ok(family)
}

/// The linear family equivalent to the outcome check: the pointwise family
/// and, when `J0 = 0`, every partition inequality. With a base state the
/// partition inequalities are implied by the pointwise ones.
pub fn outcome_family(
    config: &DesignConfig,
    y_support: &[i64],
    cap: u128,
) -> Result<Vec<OutcomeInequality>> {
    let mut family = outcome_pointwise_family(config, y_support);
    if !config.has_base_state() {
        family.extend(outcome_partition_family(config, y_support.len(), cap)?);
    }
    Ok(family)
}

/// The partition that maximizes the left-hand side: each `(j, y)` cell takes
/// the largest probability over `Z(j)`, ties to the smallest `z`.
pub fn worst_partition(py: &OutcomeDistribution) -> Vec<Vec<usize>> {
    let config = py.config();
    (0..config.num_choices())
        .map(|j| {
            let allowed = config.targeted_set(j);
            (0..py.num_outcomes())
                .map(|yi| {
                    let mut best = allowed[0];
                    let mut best_p = py.at(config.z_index(best).unwrap(), j, yi);
                    for &z in &allowed[1..] {
                        let pz = py.at(config.z_index(z).unwrap(), j, yi);
                        if pz > best_p {
                            best = z;
                            best_p = pz;
                        }
                    }
                    best
                })
                .collect()
        })
        .collect()
}

/// Checks an outcome table.
///
/// With `J0 = 0`: pointwise encouragement on every cell plus the single
/// worst-case partition inequality. With a base state: pointwise base-state
/// dominance plus pointwise encouragement.
pub fn check_outcome(py: &OutcomeDistribution) -> Result<CheckReport<OutcomeInequality>> {
    let config = py.config();
    let mut items = Vec::new();
    for ineq in outcome_pointwise_family(config, py.y_support()) {
        let slack = ineq.slack(py)?;
        items.push((ineq, slack));
    }
    if !config.has_base_state() {
        let worst = OutcomeInequality::Partition {
            assignment: worst_partition(py),
        };
        let slack = worst.slack(py)?;
        items.push((worst, slack));
    }
    Ok(CheckReport::from_slacks(items))
}

/// Literal oracle for [`check_outcome`]: every partition tuple of the
/// outcome support and every subset `B` of it, evaluated directly.
pub fn brute_force_partition_check(py: &OutcomeDistribution) -> Result<bool> {
    brute_force_partition_check_capped(py, DEFAULT_FAMILY_CAP)
}

pub fn brute_force_partition_check_capped(py: &OutcomeDistribution, cap: u128) -> Result<bool> {
    let config = py.config();
    let ny = py.num_outcomes();
    let subsets = 1u128.checked_shl(ny as u32).unwrap_or(u128::MAX);
    if subsets > cap {
        return Err(Error::Capacity {
            what: "outcome subset enumeration",
            required: subsets,
            cap,
        });
    }
    let cell = |z: usize, j: usize, yi: usize| py.at(config.z_index(z).unwrap(), j, yi);

    let mut partitions_ok = true;
    for_each_partition(config, ny, cap, |assignment| {
        if !partitions_ok {
            return;
        }
        let mut total = Rational::zero();
        for (j, zs) in assignment.iter().enumerate() {
            for (yi, &z) in zs.iter().enumerate() {
                total += cell(z, j, yi);
            }
        }
        if total > Rational::one() {
            partitions_ok = false;
        }
    })?;
    if !partitions_ok {
        return Ok(false);
    }

    for mask in 1..(1usize << ny) {
        let in_set = |yi: usize| mask & (1 << yi) != 0;
        for j in (0..config.num_choices()).filter(|&j| config.is_targeted(j)) {
            let on_target: Rational = (0..ny).filter(|&yi| in_set(yi)).map(|yi| cell(j, j, yi)).sum();
            for &k in config.z_support().iter().filter(|&&k| k != j) {
                let other: Rational = (0..ny).filter(|&yi| in_set(yi)).map(|yi| cell(k, j, yi)).sum();
                if other > on_target {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}
