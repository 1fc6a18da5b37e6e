//! Explicit witness measures for tables that pass the inequality check.
//!
//! For each target choice `j` the instrument values are sorted by
//! `P{D = j | Z = z}` (targeting value last). Step 1 gives the smallest
//! probability to the "always `j`" type; step `l` gives the increment between
//! the `l`-th and `(l-1)`-th values to the type that complies with the first
//! `l - 1` instrument values and takes `j` elsewhere. What is left goes to
//! the all-compliant type, or with a base state to one all-compliant type
//! per untargeted default.
//!
//! The outcome version runs the same steps separately on every outcome
//! cell and spreads the potential outcomes of the other choices with
//! normalized weights, so each `(z, j, y)` coordinate is reproduced exactly.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};

use crate::design::{DesignConfig, ObservedDistribution, OutcomeDistribution, ResponseMeasure, ResponseType};
use crate::error::{Error, Result};
use crate::rational::{format_rational, Rational};
use crate::response_types::admissible_count;

/// Default cap on the size of the dense (type, outcome-vector) table.
pub const DEFAULT_OUTCOME_TABLE_CAP: u128 = 1_000_000;

/// The order in which instrument values are visited for one target choice
/// (and, for outcome tables, one outcome value).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstrumentOrdering {
    pub target: usize,
    pub outcome: Option<i64>,
    /// A permutation of the instrument support.
    pub order: Vec<usize>,
    /// How many leading entries of `order` drive construction steps.
    pub num_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AssignmentRole {
    /// Step `l` (1-based) for a target choice.
    Step(usize),
    /// The all-compliant type when `J0 = 0`.
    Diagonal,
    /// The all-compliant type with untargeted default `D_0` when `J0 > 0`.
    BaseDiagonal,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MassAssignment {
    /// Target choice; the default choice for a base diagonal, `None` for the
    /// all-compliant diagonal.
    pub target: Option<usize>,
    pub outcome: Option<i64>,
    pub role: AssignmentRole,
    pub response_type: ResponseType,
    pub mass: Rational,
}

impl MassAssignment {
    fn describe(&self) -> String {
        let role = match self.role {
            AssignmentRole::Step(l) => format!("step {l}"),
            AssignmentRole::Diagonal => "diagonal".to_string(),
            AssignmentRole::BaseDiagonal => "base-state diagonal".to_string(),
        };
        let mut out = format!("{role} for type {}", self.response_type);
        if let Some(j) = self.target {
            out.push_str(&format!(", target {j}"));
        }
        if let Some(y) = self.outcome {
            out.push_str(&format!(", outcome {y}"));
        }
        out
    }
}

/// Every ordering and mass assignment of a construction run, including
/// negative would-be masses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstructionTrace {
    pub config: DesignConfig,
    pub orderings: Vec<InstrumentOrdering>,
    pub assignments: Vec<MassAssignment>,
}

impl ConstructionTrace {
    pub fn first_negative(&self) -> Option<&MassAssignment> {
        self.assignments.iter().find(|a| a.mass.is_negative())
    }

    /// Mass left for the all-compliant type (`J0 = 0` only).
    pub fn diagonal_remainder(&self) -> Option<&Rational> {
        self.assignments
            .iter()
            .find(|a| a.role == AssignmentRole::Diagonal)
            .map(|a| &a.mass)
    }

    /// Sum of step masses for a target choice.
    pub fn step_total(&self, target: usize) -> Rational {
        self.assignments
            .iter()
            .filter(|a| a.target == Some(target) && matches!(a.role, AssignmentRole::Step(_)))
            .map(|a| &a.mass)
            .sum()
    }
}

/// Sorts instrument values for target `j`: non-targeting values ascending by
/// `value` (ties by instrument value), then the base state `0` when there is
/// one, then `j` itself when `j` is targeted.
fn ordering_for(config: &DesignConfig, j: usize, value: impl Fn(usize) -> Rational) -> (Vec<usize>, usize) {
    let base = config.has_base_state();
    let mut free: Vec<(Rational, usize)> = config
        .z_support()
        .iter()
        .copied()
        .filter(|&z| z != j && !(base && z == 0))
        .map(|z| (value(z), z))
        .collect();
    free.sort();
    let mut order: Vec<usize> = free.into_iter().map(|(_, z)| z).collect();
    let num_steps = if base && config.is_targeted(j) {
        order.len() + 1
    } else {
        order.len()
    };
    if base {
        order.push(0);
    }
    if config.is_targeted(j) {
        order.push(j);
    }
    (order, num_steps)
}

/// The type that complies with `prefix` and takes `j` everywhere else.
fn step_type(config: &DesignConfig, j: usize, prefix: &[usize]) -> ResponseType {
    ResponseType::from_vec(
        config
            .z_support()
            .iter()
            .map(|&z| if prefix.contains(&z) { z } else { j })
            .collect(),
    )
}

fn diagonal_type(config: &DesignConfig, default: usize) -> ResponseType {
    ResponseType::from_vec(
        config
            .z_support()
            .iter()
            .map(|&z| if config.has_base_state() && z == 0 { default } else { z })
            .collect(),
    )
}

/// Step assignments for one target (and outcome cell). Returns the total
/// mass assigned, which is the value at the last step.
fn push_steps(
    config: &DesignConfig,
    j: usize,
    outcome: Option<i64>,
    value: impl Fn(usize) -> Rational,
    orderings: &mut Vec<InstrumentOrdering>,
    assignments: &mut Vec<MassAssignment>,
) -> Rational {
    let (order, num_steps) = ordering_for(config, j, &value);
    let values: Vec<Rational> = order[..num_steps].iter().map(|&z| value(z)).collect();
    for step in 1..=num_steps {
        let mass = if step == 1 {
            values[0].clone()
        } else {
            &values[step - 1] - &values[step - 2]
        };
        assignments.push(MassAssignment {
            target: Some(j),
            outcome,
            role: AssignmentRole::Step(step),
            response_type: step_type(config, j, &order[..step - 1]),
            mass,
        });
    }
    orderings.push(InstrumentOrdering {
        target: j,
        outcome,
        order,
        num_steps,
    });
    values.last().cloned().unwrap_or_else(Rational::zero)
}

/// Runs the construction without failing on negative masses.
pub fn diagnose(p: &ObservedDistribution) -> ConstructionTrace {
    let config = p.config();
    let mut orderings = Vec::new();
    let mut assignments = Vec::new();
    for j in 0..config.num_choices() {
        let value = |z: usize| p.prob(z, j).cloned().unwrap_or_else(|_| Rational::zero());
        let total = push_steps(config, j, None, value, &mut orderings, &mut assignments);
        if config.has_base_state() && !config.is_targeted(j) {
            assignments.push(MassAssignment {
                target: Some(j),
                outcome: None,
                role: AssignmentRole::BaseDiagonal,
                response_type: diagonal_type(config, j),
                mass: p.at(0, j) - total,
            });
        }
    }
    if !config.has_base_state() {
        let steps_total: Rational = (0..config.num_choices())
            .map(|j| {
                assignments
                    .iter()
                    .filter(|a| a.target == Some(j))
                    .map(|a| &a.mass)
                    .sum::<Rational>()
            })
            .sum();
        assignments.push(MassAssignment {
            target: None,
            outcome: None,
            role: AssignmentRole::Diagonal,
            response_type: diagonal_type(config, 0),
            mass: Rational::one() - steps_total,
        });
    }
    ConstructionTrace {
        config: config.clone(),
        orderings,
        assignments,
    }
}

/// Builds a witness measure `Q` over admissible types with
/// `Q.pushforward() == p`. Fails with [`Error::NegativeMass`] exactly when
/// `p` violates the inequality check.
pub fn construct(p: &ObservedDistribution) -> Result<ResponseMeasure> {
    let trace = diagnose(p);
    if let Some(neg) = trace.first_negative() {
        return Err(Error::NegativeMass {
            step: neg.describe(),
            mass: format_rational(&neg.mass),
        });
    }
    let mut mass = BTreeMap::new();
    for a in &trace.assignments {
        let previous = mass.insert(a.response_type.clone(), a.mass.clone());
        debug_assert!(previous.is_none(), "type {} assigned twice", a.response_type);
    }
    ResponseMeasure::new(p.config().clone(), mass)?
        .with_instrument_marginal(p.instrument_marginal().map(<[Rational]>::to_vec))
}

/// Exact measure over (response type, potential-outcome vector) pairs.
/// Potential outcomes `(Y_0, ..., Y_{J-1})` are stored as outcome values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeResponseMeasure {
    config: DesignConfig,
    y_support: Vec<i64>,
    mass: BTreeMap<(ResponseType, Vec<i64>), Rational>,
    pz: Option<Vec<Rational>>,
}

impl OutcomeResponseMeasure {
    pub fn new(
        config: DesignConfig,
        y_support: Vec<i64>,
        mass: BTreeMap<(ResponseType, Vec<i64>), Rational>,
    ) -> Result<Self> {
        let mut total = Rational::zero();
        for ((rt, ys), m) in &mass {
            if m.is_negative() {
                return Err(Error::InvalidDistribution(format!(
                    "negative mass {} at {rt}",
                    format_rational(m)
                )));
            }
            if rt.len() != config.num_instruments()
                || rt.choices().iter().any(|&d| d >= config.num_choices())
                || (m.is_positive() && !crate::response_types::is_admissible(&config, rt))
            {
                return Err(Error::InvalidDistribution(format!(
                    "type {rt} is not admissible under {config}"
                )));
            }
            if ys.len() != config.num_choices()
                || ys.iter().any(|y| y_support.binary_search(y).is_err())
            {
                return Err(Error::InvalidDistribution(format!(
                    "potential outcomes {ys:?} do not match the outcome support"
                )));
            }
            total += m;
        }
        if !total.is_one() {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {}",
                format_rational(&total)
            )));
        }
        let mass = mass.into_iter().filter(|(_, m)| !m.is_zero()).collect();
        Ok(OutcomeResponseMeasure {
            config,
            y_support,
            mass,
            pz: None,
        })
    }

    pub fn with_instrument_marginal(mut self, pz: Option<Vec<Rational>>) -> Result<Self> {
        if let Some(pz) = &pz {
            OutcomeDistribution::new(
                self.config.clone(),
                self.y_support.clone(),
                self.pushforward().blocks().to_vec(),
                Some(pz.clone()),
            )?;
        }
        self.pz = pz;
        Ok(self)
    }

    pub fn config(&self) -> &DesignConfig {
        &self.config
    }

    pub fn y_support(&self) -> &[i64] {
        &self.y_support
    }

    pub fn masses(&self) -> &BTreeMap<(ResponseType, Vec<i64>), Rational> {
        &self.mass
    }

    pub fn instrument_marginal(&self) -> Option<&[Rational]> {
        self.pz.as_deref()
    }

    /// `Q{Y_j = y, D_z = j}` for every `(z, j, y)`, which is the implied
    /// `P{Y = y, D = j | Z = z}`.
    pub fn pushforward(&self) -> OutcomeDistribution {
        let config = &self.config;
        let ny = self.y_support.len();
        let mut p = vec![vec![vec![Rational::zero(); ny]; config.num_choices()]; config.num_instruments()];
        for ((rt, ys), m) in &self.mass {
            for (zi, block) in p.iter_mut().enumerate() {
                let j = rt.at_index(zi);
                let yi = self.y_support.binary_search(&ys[j]).expect("validated outcome");
                block[j][yi] += m;
            }
        }
        OutcomeDistribution::new(config.clone(), self.y_support.clone(), p, self.pz.clone())
            .expect("pushforward of a probability measure is a valid table")
    }

    /// Sums out the potential outcomes.
    pub fn response_marginal(&self) -> ResponseMeasure {
        let mut mass: BTreeMap<ResponseType, Rational> = BTreeMap::new();
        for ((rt, _), m) in &self.mass {
            *mass.entry(rt.clone()).or_insert_with(Rational::zero) += m;
        }
        ResponseMeasure::new(self.config.clone(), mass)
            .expect("marginal of a valid measure is valid")
            .with_instrument_marginal(self.pz.clone())
            .expect("validated marginal")
    }
}

/// Mixing weights for the potential outcome of each choice when it is not
/// the one pinned by a construction step.
///
/// For a targeted `j` the weight of cell `y` is proportional to
/// `P{Y=y, D=j | Z=j} - P{Y=y, D=j | Z=z'}` with `z'` the last non-targeting
/// value in the cell's ordering; a zero total falls back to uniform weights,
/// as do untargeted choices.
fn outcome_weights(
    py: &OutcomeDistribution,
    orderings: &[InstrumentOrdering],
) -> Result<Vec<Vec<Rational>>> {
    let config = py.config();
    let ny = py.num_outcomes();
    let uniform = vec![Rational::new(1.into(), (ny as i64).into()); ny];
    let mut weights = Vec::with_capacity(config.num_choices());
    for j in 0..config.num_choices() {
        if !config.is_targeted(j) {
            weights.push(uniform.clone());
            continue;
        }
        let jz = config.z_index(j).expect("targeted choice is in the support");
        let mut numerators = Vec::with_capacity(ny);
        for (yi, &y) in py.y_support().iter().enumerate() {
            let ordering = orderings
                .iter()
                .find(|o| o.target == j && o.outcome == Some(y))
                .expect("ordering recorded for every cell");
            let last = ordering.order[ordering.num_steps - 1];
            let lz = config.z_index(last).expect("ordering uses support values");
            let numerator = py.at(jz, j, yi) - py.at(lz, j, yi);
            if numerator.is_negative() {
                return Err(Error::NegativeMass {
                    step: format!("outcome weight for choice {j}, outcome {y}"),
                    mass: format_rational(&numerator),
                });
            }
            numerators.push(numerator);
        }
        let total: Rational = numerators.iter().sum();
        if total.is_zero() {
            weights.push(uniform.clone());
        } else {
            weights.push(numerators.into_iter().map(|n| n / &total).collect());
        }
    }
    Ok(weights)
}

/// Calls `visit` with every outcome-index vector of length `len`.
fn for_each_index_vector(len: usize, base: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; len];
    loop {
        visit(&idx);
        let mut pos = len;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < base {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Per-cell construction trace for an outcome table.
pub fn diagnose_outcome(py: &OutcomeDistribution) -> ConstructionTrace {
    let config = py.config();
    let mut orderings = Vec::new();
    let mut assignments = Vec::new();
    let mut last_values = Rational::zero();
    for j in 0..config.num_choices() {
        for (yi, &y) in py.y_support().iter().enumerate() {
            let value = |z: usize| py.at(config.z_index(z).unwrap(), j, yi).clone();
            let total = push_steps(config, j, Some(y), value, &mut orderings, &mut assignments);
            if config.has_base_state() && !config.is_targeted(j) {
                assignments.push(MassAssignment {
                    target: Some(j),
                    outcome: Some(y),
                    role: AssignmentRole::BaseDiagonal,
                    response_type: diagonal_type(config, j),
                    mass: py.at(0, j, yi) - &total,
                });
            }
            last_values += total;
        }
    }
    if !config.has_base_state() {
        assignments.push(MassAssignment {
            target: None,
            outcome: None,
            role: AssignmentRole::Diagonal,
            response_type: diagonal_type(config, 0),
            mass: Rational::one() - last_values,
        });
    }
    ConstructionTrace {
        config: config.clone(),
        orderings,
        assignments,
    }
}

pub fn construct_outcome(py: &OutcomeDistribution) -> Result<OutcomeResponseMeasure> {
    construct_outcome_capped(py, DEFAULT_OUTCOME_TABLE_CAP)
}

/// Builds a witness over (type, potential outcomes) whose coordinate
/// pushforward reproduces `py` exactly.
pub fn construct_outcome_capped(py: &OutcomeDistribution, cap: u128) -> Result<OutcomeResponseMeasure> {
    let config = py.config();
    let ny = py.num_outcomes();
    let nj = config.num_choices();
    let required = admissible_count(config).saturating_mul((ny as u128).saturating_pow(nj as u32));
    if required > cap {
        return Err(Error::Capacity {
            what: "outcome witness table",
            required,
            cap,
        });
    }
    let trace = diagnose_outcome(py);
    if let Some(neg) = trace.first_negative() {
        return Err(Error::NegativeMass {
            step: neg.describe(),
            mass: format_rational(&neg.mass),
        });
    }
    let weights = outcome_weights(py, &trace.orderings)?;
    let ys = py.y_support();

    let mut mass: BTreeMap<(ResponseType, Vec<i64>), Rational> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for a in &trace.assignments {
        if a.mass.is_zero() {
            continue;
        }
        debug_assert!(
            seen.insert((a.response_type.clone(), a.target, a.outcome)),
            "type {} assigned twice",
            a.response_type
        );
        match (a.target, a.outcome) {
            (Some(j), Some(y)) => {
                // Y_j is pinned to the cell; the others follow their weights.
                for_each_index_vector(nj - 1, ny, |others| {
                    let mut yvec = Vec::with_capacity(nj);
                    let mut m = a.mass.clone();
                    let mut rest = others.iter();
                    for (k, w) in weights.iter().enumerate() {
                        if k == j {
                            yvec.push(y);
                        } else {
                            let yi = *rest.next().unwrap();
                            m *= &w[yi];
                            yvec.push(ys[yi]);
                        }
                    }
                    if !m.is_zero() {
                        *mass
                            .entry((a.response_type.clone(), yvec))
                            .or_insert_with(Rational::zero) += m;
                    }
                });
            }
            _ => {
                for_each_index_vector(nj, ny, |all| {
                    let mut m = a.mass.clone();
                    for (k, &yi) in all.iter().enumerate() {
                        m *= &weights[k][yi];
                    }
                    if !m.is_zero() {
                        let yvec = all.iter().map(|&yi| ys[yi]).collect();
                        *mass
                            .entry((a.response_type.clone(), yvec))
                            .or_insert_with(Rational::zero) += m;
                    }
                });
            }
        }
    }
    let mut measure = OutcomeResponseMeasure::new(config.clone(), ys.to_vec(), mass)?;
    measure.pz = py.instrument_marginal().map(<[Rational]>::to_vec);
    Ok(measure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inequality::check;
    use crate::rational::{int, ratio};

    fn table(j: usize, j0: usize, rows: Vec<Vec<Rational>>) -> ObservedDistribution {
        ObservedDistribution::new(DesignConfig::new(j, j0).unwrap(), rows, None).unwrap()
    }

    fn rt(config: &DesignConfig, d: &[usize]) -> ResponseType {
        ResponseType::new(config, d.to_vec()).unwrap()
    }

    #[test]
    fn uniform_table_gives_constant_types() {
        let p = table(3, 0, vec![vec![ratio(1, 3); 3]; 3]);
        let q = construct(&p).unwrap();
        let c = p.config();
        let expected: BTreeMap<ResponseType, Rational> =
            (0..3).map(|j| (rt(c, &[j, j, j]), ratio(1, 3))).collect();
        assert_eq!(q.masses(), &expected);
        assert_eq!(q.pushforward(), p);

        let trace = diagnose(&p);
        assert_eq!(trace.diagonal_remainder(), Some(&int(0)));
        let step_ones: Vec<&Rational> = trace
            .assignments
            .iter()
            .filter(|a| a.role == AssignmentRole::Step(1))
            .map(|a| &a.mass)
            .collect();
        assert_eq!(step_ones, vec![&ratio(1, 3); 3]);
        assert!(trace
            .assignments
            .iter()
            .filter(|a| a.role == AssignmentRole::Step(2))
            .all(|a| a.mass.is_zero()));
    }

    #[test]
    fn perfect_compliance_gives_the_diagonal() {
        let rows = (0..3)
            .map(|z| (0..3).map(|j| if z == j { int(1) } else { int(0) }).collect())
            .collect();
        let p = table(3, 0, rows);
        let q = construct(&p).unwrap();
        assert_eq!(q.masses().len(), 1);
        assert_eq!(q.mass_of(&rt(p.config(), &[0, 1, 2])), int(1));
        let trace = diagnose(&p);
        assert_eq!(trace.diagonal_remainder(), Some(&int(1)));
        assert!(trace
            .assignments
            .iter()
            .filter(|a| matches!(a.role, AssignmentRole::Step(_)))
            .all(|a| a.mass.is_zero()));
    }

    #[test]
    fn binary_base_state_recovers_compliance_types() {
        let p = table(
            2,
            1,
            vec![vec![ratio(3, 4), ratio(1, 4)], vec![ratio(1, 2), ratio(1, 2)]],
        );
        let q = construct(&p).unwrap();
        let c = p.config();
        let expected = BTreeMap::from([
            (rt(c, &[0, 0]), ratio(1, 2)),
            (rt(c, &[0, 1]), ratio(1, 4)),
            (rt(c, &[1, 1]), ratio(1, 4)),
        ]);
        assert_eq!(q.masses(), &expected);
        assert_eq!(q.pushforward(), p);
    }

    #[test]
    fn violation_shows_as_negative_diagonal() {
        let p = table(
            2,
            0,
            vec![vec![ratio(2, 5), ratio(3, 5)], vec![ratio(3, 5), ratio(2, 5)]],
        );
        let trace = diagnose(&p);
        assert_eq!(trace.diagonal_remainder(), Some(&ratio(-1, 5)));
        match construct(&p) {
            Err(Error::NegativeMass { mass, .. }) => assert_eq!(mass, "-1/5"),
            other => panic!("expected negative mass, got {other:?}"),
        }
        assert!(!check(&p).unwrap().passed);
    }

    #[test]
    fn base_state_violation_is_a_negative_step() {
        // J = 3, J0 = 1: P(D=2|Z=1) = 1/2 > P(D=2|Z=0) = 1/4.
        let p = table(
            3,
            1,
            vec![
                vec![ratio(1, 2), ratio(1, 4), ratio(1, 4)],
                vec![ratio(1, 4), ratio(1, 4), ratio(1, 2)],
                vec![ratio(1, 4), ratio(1, 4), ratio(1, 2)],
            ],
        );
        assert!(!check(&p).unwrap().passed);
        let neg = diagnose(&p).first_negative().cloned().unwrap();
        assert_eq!(neg.target, Some(2));
        assert!(construct(&p).is_err());
    }

    #[test]
    fn orderings_put_targeting_value_last() {
        let p = table(
            3,
            1,
            vec![
                vec![ratio(1, 2), ratio(1, 4), ratio(1, 4)],
                vec![ratio(1, 4), ratio(1, 2), ratio(1, 4)],
                vec![ratio(1, 4), ratio(1, 4), ratio(1, 2)],
            ],
        );
        let trace = diagnose(&p);
        let by_target: BTreeMap<usize, &InstrumentOrdering> =
            trace.orderings.iter().map(|o| (o.target, o)).collect();
        assert_eq!(by_target[&0].order, vec![1, 2, 0]);
        assert_eq!(by_target[&0].num_steps, 2);
        assert_eq!(by_target[&1].order, vec![2, 0, 1]);
        assert_eq!(by_target[&1].num_steps, 2);
        assert_eq!(by_target[&2].order, vec![1, 0, 2]);
        let q = construct(&p).unwrap();
        assert_eq!(q.pushforward(), p);
    }

    fn outcome(j: usize, j0: usize, ys: Vec<i64>, p: Vec<Vec<Vec<Rational>>>) -> OutcomeDistribution {
        OutcomeDistribution::new(DesignConfig::new(j, j0).unwrap(), ys, p, None).unwrap()
    }

    #[test]
    fn single_outcome_reduces_to_plain_construction() {
        let rows = vec![
            vec![ratio(1, 2), ratio(1, 4), ratio(1, 4)],
            vec![ratio(1, 4), ratio(1, 2), ratio(1, 4)],
            vec![ratio(1, 6), ratio(1, 3), ratio(1, 2)],
        ];
        let p = table(3, 0, rows.clone());
        let blocks = rows
            .iter()
            .map(|r| r.iter().map(|x| vec![x.clone()]).collect())
            .collect();
        let py = outcome(3, 0, vec![5], blocks);
        let qy = construct_outcome(&py).unwrap();
        assert_eq!(qy.pushforward(), py);
        assert_eq!(qy.response_marginal(), construct(&p).unwrap());
    }

    #[test]
    fn binary_outcome_roundtrip() {
        let p = vec![
            vec![vec![ratio(3, 10), ratio(2, 10)], vec![ratio(1, 10), ratio(4, 10)]],
            vec![vec![ratio(1, 10), ratio(1, 10)], vec![ratio(2, 10), ratio(6, 10)]],
        ];
        for j0 in [0, 1] {
            let py = outcome(2, j0, vec![0, 1], p.clone());
            let qy = construct_outcome(&py).unwrap();
            assert_eq!(qy.pushforward(), py);
        }
    }

    #[test]
    fn outcome_violation_is_reported() {
        let p = vec![
            vec![vec![ratio(2, 10), ratio(2, 10)], vec![ratio(3, 10), ratio(3, 10)]],
            vec![vec![ratio(1, 10), ratio(1, 10)], vec![ratio(1, 10), ratio(7, 10)]],
        ];
        let py = outcome(2, 0, vec![0, 1], p);
        assert!(matches!(construct_outcome(&py), Err(Error::NegativeMass { .. })));
    }

    #[test]
    fn outcome_table_cap() {
        let p = vec![vec![vec![ratio(1, 4), ratio(1, 4)], vec![ratio(1, 4), ratio(1, 4)]]; 2];
        let py = outcome(2, 0, vec![0, 1], p);
        assert!(matches!(
            construct_outcome_capped(&py, 5),
            Err(Error::Capacity { .. })
        ));
    }
}
