//! A finite-sample test of the model from micro-data.
//!
//! Every inequality of the sharp family is a linear moment `s(p) >= 0` of
//! the arm-level cell frequencies. The statistic is the largest studentized
//! violation `max(0, max_k -s_k / se_k)`. Its critical value comes from a
//! Gaussian multiplier bootstrap of the recentred moments, with every
//! moment treated as binding.

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};
use rand_distr::{Distribution, StandardNormal};

use crate::design::{DesignConfig, ObservedDistribution, OutcomeDistribution};
use crate::error::{Error, Result};
use crate::inequality::{check, check_outcome, generate, outcome_family, Bound, OutcomeBound, DEFAULT_FAMILY_CAP};
use crate::rational::{one, to_f64, Rational};
use crate::simulate::{run_chunks, Counts, MicroData};

/// Standard errors below this are replaced by it and flagged.
pub const SE_FLOOR: f64 = 1e-6;

/// Smallest accepted bootstrap replication count.
pub const MIN_REPLICATIONS: usize = 99;

/// Arm-level cell frequencies estimated from micro-data.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub counts: Counts,
    pub table: ObservedDistribution,
    pub outcome_table: Option<OutcomeDistribution>,
}

impl Estimate {
    /// Observations per instrument value, as `(z, n_z)`.
    pub fn arm_sizes(&self) -> Vec<(usize, u64)> {
        self.counts
            .config
            .z_support()
            .iter()
            .copied()
            .zip(self.counts.arm_totals.iter().copied())
            .collect()
    }
}

/// Cell frequencies within each instrument arm. Outcomes are used when the
/// rows carry them; without `y_support` the alphabet is the set of observed
/// values.
pub fn estimate(data: &MicroData, config: &DesignConfig, y_support: Option<&[i64]>) -> Result<Estimate> {
    let inferred: Option<Vec<i64>> = match y_support {
        Some(s) => {
            if s.is_empty() || s.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter("outcome support must be strictly increasing".into()));
            }
            Some(s.to_vec())
        }
        None if data.has_outcome() => {
            Some(data.rows.iter().filter_map(|r| r.y).collect::<BTreeSet<_>>().into_iter().collect())
        }
        None => None,
    };
    if inferred.is_none() {
        if let Some(row) = data.rows.iter().position(|r| r.y.is_some()) {
            return Err(Error::Row {
                row: row + 1,
                message: "outcome value present in a file without an outcome column".into(),
            });
        }
    }
    let counts = Counts::tally(config, &data.rows, inferred.as_deref())?;
    Ok(Estimate {
        table: counts.table()?,
        outcome_table: counts.outcome_table()?,
        counts,
    })
}

/// `constant + sum coef * p[zi][cell]`, with `cell = j * |Y| + yi`.
#[derive(Clone, Debug, PartialEq)]
pub struct Moment {
    pub label: String,
    pub constant: Rational,
    pub terms: Vec<(usize, usize, Rational)>,
}

impl Moment {
    fn evaluate_exact(&self, cell: impl Fn(usize, usize) -> Rational) -> Rational {
        let mut s = self.constant.clone();
        for (zi, c, a) in &self.terms {
            s += a * cell(*zi, *c);
        }
        s
    }
}

/// The moment family for a design: the sharp choice family, or the outcome
/// family when `y_support` is given.
pub fn moment_family(config: &DesignConfig, y_support: Option<&[i64]>) -> Result<Vec<Moment>> {
    let zi = |z: usize| config.require_z_index(z);
    match y_support {
        None => generate(config)?
            .into_iter()
            .map(|spec| {
                let mut terms = Vec::new();
                for &(z, j) in &spec.terms {
                    terms.push((zi(z)?, j, -one()));
                }
                let constant = match spec.bound {
                    Bound::One => one(),
                    Bound::Cell { z, j } => {
                        terms.push((zi(z)?, j, one()));
                        Rational::zero()
                    }
                };
                Ok(Moment {
                    label: spec.to_string(),
                    constant,
                    terms,
                })
            })
            .collect(),
        Some(ys) => {
            let ny = ys.len();
            // a trivial table only supplies the outcome support to linear_form
            let probe = OutcomeDistribution::new(
                config.clone(),
                ys.to_vec(),
                (0..config.num_instruments())
                    .map(|_| {
                        let mut b = vec![vec![Rational::zero(); ny]; config.num_choices()];
                        b[0][0] = one();
                        b
                    })
                    .collect(),
                None,
            )?;
            outcome_family(config, ys, DEFAULT_FAMILY_CAP)?
                .into_iter()
                .map(|ineq| {
                    let (lhs, bound) = ineq.linear_form(&probe)?;
                    let mut terms = Vec::new();
                    for (z, j, yi) in lhs {
                        terms.push((zi(z)?, j * ny + yi, -one()));
                    }
                    let constant = match bound {
                        OutcomeBound::One => one(),
                        OutcomeBound::Cell { z, j, yi } => {
                            terms.push((zi(z)?, j * ny + yi, one()));
                            Rational::zero()
                        }
                    };
                    Ok(Moment {
                        label: ineq.to_string(),
                        constant,
                        terms,
                    })
                })
                .collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentReport {
    pub label: String,
    pub slack: f64,
    pub se: f64,
    /// The standard error was below [`SE_FLOOR`] and replaced by it.
    pub floored: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestReport {
    pub arm_sizes: Vec<(usize, u64)>,
    /// Estimated `P{D = j | Z = z}` by support position.
    pub table: Vec<Vec<f64>>,
    pub y_support: Option<Vec<i64>>,
    /// Estimated `P{Y = y, D = j | Z = z}` when outcomes are used.
    pub outcome_table: Option<Vec<Vec<Vec<f64>>>>,
    pub moments: Vec<MomentReport>,
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub seed: u64,
    pub replications: usize,
}

/// Dense per-moment coefficients `[zi][cell]` in floating point.
fn dense(moments: &[Moment], arms: usize, cells: usize) -> Vec<(f64, Vec<Vec<f64>>)> {
    moments
        .iter()
        .map(|m| {
            let mut a = vec![vec![0.0; cells]; arms];
            for (zi, c, coef) in &m.terms {
                a[*zi][*c] += to_f64(coef);
            }
            (to_f64(&m.constant), a)
        })
        .collect()
}

/// Runs the test on micro-data at level `alpha` with `replications`
/// bootstrap draws.
pub fn test_model(
    data: &MicroData,
    config: &DesignConfig,
    y_support: Option<&[i64]>,
    alpha: f64,
    replications: usize,
    seed: u64,
) -> Result<TestReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if replications < MIN_REPLICATIONS {
        return Err(Error::InvalidParameter(format!(
            "B = {replications} is below the minimum of {MIN_REPLICATIONS}"
        )));
    }
    let est = estimate(data, config, y_support)?;
    let counts = &est.counts;
    let ny = counts.y_support.as_ref().map_or(1, Vec::len);
    let arms = config.num_instruments();
    let cells = config.num_choices() * ny;
    let moments = moment_family(config, counts.y_support.as_deref())?;
    let coefs = dense(&moments, arms, cells);

    // p_hat[zi][cell]
    let p_hat: Vec<Vec<f64>> = counts
        .cells
        .iter()
        .zip(&counts.arm_totals)
        .map(|(arm, &n)| arm.iter().flatten().map(|&k| k as f64 / n as f64).collect())
        .collect();
    let n_arm: Vec<f64> = counts.arm_totals.iter().map(|&n| n as f64).collect();

    let mut reports = Vec::with_capacity(moments.len());
    let mut centred = Vec::with_capacity(moments.len());
    let mut statistic: f64 = 0.0;
    for (m, (constant, a)) in moments.iter().zip(&coefs) {
        let mut slack = *constant;
        let mut var = 0.0;
        let mut arm_means = vec![0.0; arms];
        for zi in 0..arms {
            let mean: f64 = (0..cells).map(|c| a[zi][c] * p_hat[zi][c]).sum();
            let second: f64 = (0..cells).map(|c| a[zi][c] * a[zi][c] * p_hat[zi][c]).sum();
            slack += mean;
            var += ((second - mean * mean).max(0.0)) / n_arm[zi];
            arm_means[zi] = mean;
        }
        let raw_se = var.sqrt();
        let floored = raw_se < SE_FLOOR;
        let se = raw_se.max(SE_FLOOR);
        statistic = statistic.max(-slack / se);
        centred.push(arm_means);
        reports.push(MomentReport {
            label: m.label.clone(),
            slack,
            se,
            floored,
        });
    }

    // Summing N_zc i.i.d. standard normal multipliers gives N(0, N_zc).
    let sd: Vec<Vec<f64>> = counts
        .cells
        .iter()
        .map(|arm| arm.iter().flatten().map(|&k| (k as f64).sqrt()).collect())
        .collect();
    let draws: Vec<f64> = run_chunks(replications as u64, seed, |rng, len| {
        let mut g = vec![vec![0.0; cells]; arms];
        (0..len)
            .map(|_| {
                for zi in 0..arms {
                    for c in 0..cells {
                        let e: f64 = StandardNormal.sample(rng);
                        g[zi][c] = sd[zi][c] * e;
                    }
                }
                let mut t: f64 = 0.0;
                for (k, (_, a)) in coefs.iter().enumerate() {
                    let mut delta = 0.0;
                    for zi in 0..arms {
                        let mut s = 0.0;
                        for c in 0..cells {
                            s += (a[zi][c] - centred[k][zi]) * g[zi][c];
                        }
                        delta += s / n_arm[zi];
                    }
                    t = t.max(-delta / reports[k].se);
                }
                t
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();

    let mut sorted = draws.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = ((1.0 - alpha) * replications as f64).ceil() as usize;
    let critical_value = sorted[rank.clamp(1, replications) - 1];
    let exceed = draws.iter().filter(|&&t| t >= statistic).count();
    let p_value = (1 + exceed) as f64 / (replications + 1) as f64;

    Ok(TestReport {
        arm_sizes: est.arm_sizes(),
        table: est.table.rows().iter().map(|r| r.iter().map(to_f64).collect()).collect(),
        y_support: counts.y_support.clone(),
        outcome_table: est
            .outcome_table
            .as_ref()
            .map(|py| py.blocks().iter().map(|b| b.iter().map(|r| r.iter().map(to_f64).collect()).collect()).collect()),
        moments: reports,
        statistic,
        critical_value,
        p_value,
        alpha,
        reject: statistic > critical_value,
        seed,
        replications,
    })
}

/// Decision with the exact table in place of estimates: every standard
/// error is zero, so the model is rejected exactly when some moment is
/// negative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PopulationDecision {
    pub reject: bool,
    pub min_slack: Rational,
}

pub fn population_decision(p: &ObservedDistribution) -> Result<PopulationDecision> {
    let moments = moment_family(p.config(), None)?;
    let slacks = moments.iter().map(|m| m.evaluate_exact(|zi, c| p.at(zi, c).clone()));
    decide(slacks)
}

pub fn population_decision_outcome(py: &OutcomeDistribution) -> Result<PopulationDecision> {
    let ny = py.num_outcomes();
    let moments = moment_family(py.config(), Some(py.y_support()))?;
    let slacks = moments
        .iter()
        .map(|m| m.evaluate_exact(|zi, c| py.at(zi, c / ny, c % ny).clone()));
    decide(slacks)
}

fn decide(slacks: impl Iterator<Item = Rational>) -> Result<PopulationDecision> {
    let min_slack = slacks
        .min()
        .ok_or_else(|| Error::Domain("empty moment family".into()))?;
    Ok(PopulationDecision {
        reject: min_slack.is_negative(),
        min_slack,
    })
}

/// Agreement of the population decision with the exact checks, for use in
/// tests and diagnostics.
pub fn population_agrees(p: &ObservedDistribution) -> Result<bool> {
    Ok(population_decision(p)?.reject != check(p)?.passed)
}

pub fn population_agrees_outcome(py: &OutcomeDistribution) -> Result<bool> {
    Ok(population_decision_outcome(py)?.reject != check_outcome(py)?.passed)
}
