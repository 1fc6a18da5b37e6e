//! Exact feasibility oracle: phase-one simplex with Bland's rule over
//! rationals, with one variable per admissible type (or per type and
//! potential-outcome vector).

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use crate::construct::OutcomeResponseMeasure;
use crate::design::{ObservedDistribution, OutcomeDistribution, ResponseMeasure, ResponseType};
use crate::error::{Error, Result};
use crate::rational::{one, Rational};
use crate::response_types::{admissible_count, enumerate_admissible};

/// Default cap on the number of LP variables.
pub const DEFAULT_LP_VARIABLE_CAP: u128 = 50_000;

/// One equality row: the sum of the listed variables equals `rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub variables: Vec<usize>,
    pub rhs: Rational,
}

/// `A x = b`, `x >= 0` with 0/1 coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeasibilityProblem<V> {
    pub variables: Vec<V>,
    pub constraints: Vec<Constraint>,
}

impl<V> FeasibilityProblem<V> {
    /// Returns a feasible point, or `None` when the system has no
    /// nonnegative solution.
    pub fn solve(&self) -> Option<Vec<Rational>> {
        let columns: Vec<Vec<usize>> = {
            let mut cols = vec![Vec::new(); self.variables.len()];
            for (row, c) in self.constraints.iter().enumerate() {
                for &v in &c.variables {
                    cols[v].push(row);
                }
            }
            cols
        };
        let rhs: Vec<Rational> = self.constraints.iter().map(|c| c.rhs.clone()).collect();
        phase_one(self.variables.len(), &columns, rhs)
    }
}

/// Dense tableau phase one. Column `k < n` is structural, `n + i` is the
/// artificial for row `i`.
fn phase_one(n: usize, columns: &[Vec<usize>], rhs: Vec<Rational>) -> Option<Vec<Rational>> {
    let m = rhs.len();
    let width = n + m;
    let mut tableau: Vec<Vec<Rational>> = vec![vec![Rational::zero(); width + 1]; m];
    for (k, rows) in columns.iter().enumerate() {
        for &i in rows {
            tableau[i][k] += one();
        }
    }
    for (i, b) in rhs.into_iter().enumerate() {
        if b.is_negative() {
            for entry in tableau[i].iter_mut() {
                *entry = -entry.clone();
            }
            tableau[i][width] = -b;
        } else {
            tableau[i][width] = b;
        }
        tableau[i][n + i] = one();
    }
    let mut basis: Vec<usize> = (n..width).collect();

    // Reduced costs of the phase-one objective (sum of artificials).
    let mut cost = vec![Rational::zero(); width + 1];
    for row in &tableau {
        for k in 0..n {
            if !row[k].is_zero() {
                cost[k] -= &row[k];
            }
        }
        cost[width] -= &row[width];
    }

    while let Some(enter) = (0..width).find(|&k| cost[k].is_negative()) {
        let mut leave: Option<(usize, Rational)> = None;
        for i in 0..m {
            let a = &tableau[i][enter];
            if a.is_positive() {
                let ratio = &tableau[i][width] / a;
                let better = match &leave {
                    None => true,
                    Some((l, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // Phase one is bounded below by zero, so a pivot row always exists.
        let (r, _) = leave?;
        pivot(&mut tableau, &mut cost, r, enter);
        basis[r] = enter;
    }

    if !cost[width].is_zero() {
        return None;
    }
    let mut x = vec![Rational::zero(); n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = tableau[i][width].clone();
        }
    }
    Some(x)
}

fn pivot(tableau: &mut [Vec<Rational>], cost: &mut [Rational], r: usize, c: usize) {
    let p = tableau[r][c].clone();
    for entry in tableau[r].iter_mut() {
        if !entry.is_zero() {
            *entry /= &p;
        }
    }
    let pivot_row = tableau[r].clone();
    let nonzero: Vec<usize> = (0..pivot_row.len()).filter(|&k| !pivot_row[k].is_zero()).collect();
    for (i, row) in tableau.iter_mut().enumerate() {
        if i == r || row[c].is_zero() {
            continue;
        }
        let factor = row[c].clone();
        for &k in &nonzero {
            row[k] -= &factor * &pivot_row[k];
        }
    }
    if !cost[c].is_zero() {
        let factor = cost[c].clone();
        for &k in &nonzero {
            cost[k] -= &factor * &pivot_row[k];
        }
    }
}

fn check_cap(required: u128, cap: u128) -> Result<()> {
    if required > cap {
        return Err(Error::Capacity {
            what: "LP variable set",
            required,
            cap,
        });
    }
    Ok(())
}

/// The feasibility problem for a choice table.
pub fn problem(p: &ObservedDistribution) -> Result<FeasibilityProblem<ResponseType>> {
    problem_capped(p, DEFAULT_LP_VARIABLE_CAP)
}

pub fn problem_capped(p: &ObservedDistribution, cap: u128) -> Result<FeasibilityProblem<ResponseType>> {
    let config = p.config();
    check_cap(admissible_count(config), cap)?;
    let types = enumerate_admissible(config)?.types().to_vec();
    let mut constraints = Vec::new();
    for zi in 0..config.num_instruments() {
        for j in 0..config.num_choices() {
            constraints.push(Constraint {
                variables: (0..types.len()).filter(|&v| types[v].at_index(zi) == j).collect(),
                rhs: p.at(zi, j).clone(),
            });
        }
    }
    constraints.push(Constraint {
        variables: (0..types.len()).collect(),
        rhs: one(),
    });
    Ok(FeasibilityProblem {
        variables: types,
        constraints,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpVerdict<C> {
    pub feasible: bool,
    pub certificate: Option<C>,
}

/// Exact feasibility of a choice table, with a witness when feasible.
pub fn feasible(p: &ObservedDistribution) -> Result<LpVerdict<ResponseMeasure>> {
    feasible_capped(p, DEFAULT_LP_VARIABLE_CAP)
}

pub fn feasible_capped(p: &ObservedDistribution, cap: u128) -> Result<LpVerdict<ResponseMeasure>> {
    let lp = problem_capped(p, cap)?;
    let Some(x) = lp.solve() else {
        return Ok(LpVerdict {
            feasible: false,
            certificate: None,
        });
    };
    let mass: BTreeMap<ResponseType, Rational> = lp.variables.into_iter().zip(x).collect();
    let q = ResponseMeasure::new(p.config().clone(), mass)?
        .with_instrument_marginal(p.instrument_marginal().map(|s| s.to_vec()))?;
    Ok(LpVerdict {
        feasible: true,
        certificate: Some(q),
    })
}

/// Variables are (type, potential-outcome index vector) pairs.
pub fn outcome_problem_capped(
    py: &OutcomeDistribution,
    cap: u128,
) -> Result<FeasibilityProblem<(ResponseType, Vec<usize>)>> {
    let config = py.config();
    let ny = py.num_outcomes() as u128;
    let jj = config.num_choices() as u32;
    let required = ny
        .checked_pow(jj)
        .and_then(|v| v.checked_mul(admissible_count(config)))
        .unwrap_or(u128::MAX);
    check_cap(required, cap)?;
    let types = enumerate_admissible(config)?.types().to_vec();
    let mut variables = Vec::with_capacity(required as usize);
    for t in &types {
        let mut y = vec![0usize; config.num_choices()];
        loop {
            variables.push((t.clone(), y.clone()));
            let mut k = 0;
            while k < y.len() {
                y[k] += 1;
                if y[k] < py.num_outcomes() {
                    break;
                }
                y[k] = 0;
                k += 1;
            }
            if k == y.len() {
                break;
            }
        }
    }
    let mut constraints = Vec::new();
    for zi in 0..config.num_instruments() {
        for j in 0..config.num_choices() {
            for yi in 0..py.num_outcomes() {
                constraints.push(Constraint {
                    variables: (0..variables.len())
                        .filter(|&v| variables[v].0.at_index(zi) == j && variables[v].1[j] == yi)
                        .collect(),
                    rhs: py.at(zi, j, yi).clone(),
                });
            }
        }
    }
    constraints.push(Constraint {
        variables: (0..variables.len()).collect(),
        rhs: one(),
    });
    Ok(FeasibilityProblem { variables, constraints })
}

/// Exact feasibility of an outcome table, with a witness when feasible.
pub fn feasible_outcome(py: &OutcomeDistribution) -> Result<LpVerdict<OutcomeResponseMeasure>> {
    feasible_outcome_capped(py, DEFAULT_LP_VARIABLE_CAP)
}

pub fn feasible_outcome_capped(py: &OutcomeDistribution, cap: u128) -> Result<LpVerdict<OutcomeResponseMeasure>> {
    let lp = outcome_problem_capped(py, cap)?;
    let Some(x) = lp.solve() else {
        return Ok(LpVerdict {
            feasible: false,
            certificate: None,
        });
    };
    let ys = py.y_support();
    let mut mass = BTreeMap::new();
    for ((t, yi), m) in lp.variables.into_iter().zip(x) {
        if !m.is_zero() {
            mass.insert((t, yi.iter().map(|&i| ys[i]).collect()), m);
        }
    }
    let q = OutcomeResponseMeasure::new(
        py.config().clone(),
        ys.to_vec(),
        mass,
    )?
    .with_instrument_marginal(py.instrument_marginal().map(|s| s.to_vec()))?;
    Ok(LpVerdict {
        feasible: true,
        certificate: Some(q),
    })
}
