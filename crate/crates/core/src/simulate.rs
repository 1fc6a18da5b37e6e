//! Monte Carlo draws from additive random utility models and from fixed
//! probability tables.
//!
//! Utilities are `U_j(z) + eps_j` with `U_j(z) = beta_j * I{z = j}`. Draws are
//! split into fixed-size chunks; chunk `c` uses a ChaCha8 stream `c` keyed by
//! the seed, so output does not depend on the thread count.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_traits::Zero;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gumbel, StandardNormal};
use rayon::prelude::*;

use crate::design::{DesignConfig, ObservedDistribution, OutcomeDistribution, ResponseType};
use crate::error::{Error, Result};
use crate::rational::{frequency, Rational};
use crate::response_types::is_admissible;

/// Draws per chunk in every chunked Monte Carlo loop.
pub const CHUNK_SIZE: u64 = 4096;

/// Consecutive tied draws tolerated before giving up.
const MAX_TIE_RETRIES: usize = 1000;

/// The rng for chunk `chunk` of a run seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Runs `body` on each chunk of `n` draws in parallel and returns the
/// per-chunk results in chunk order.
pub fn run_chunks<T, F>(n: u64, seed: u64, body: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK_SIZE);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = CHUNK_SIZE.min(n - c * CHUNK_SIZE);
            body(&mut rng, len)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum EpsilonDist {
    /// i.i.d. standard Gumbel.
    Gumbel,
    /// Standard normal, i.i.d. or correlated through a lower Cholesky factor.
    Normal { cholesky: Option<DMatrix<f64>> },
    /// i.i.d. Uniform(-1, 1).
    Uniform,
}

impl EpsilonDist {
    pub fn normal() -> Self {
        EpsilonDist::Normal { cholesky: None }
    }

    /// Correlated normal errors with the given covariance matrix.
    pub fn correlated_normal(covariance: &[Vec<f64>]) -> Result<Self> {
        let n = covariance.len();
        if n == 0 || covariance.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter("covariance must be a square matrix".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| covariance[i][j]);
        if (&m - m.transpose()).abs().max() > 1e-12 {
            return Err(Error::InvalidParameter("covariance must be symmetric".into()));
        }
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("covariance is not positive definite".into()))?;
        Ok(EpsilonDist::Normal {
            cholesky: Some(chol.l()),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            EpsilonDist::Gumbel => "gumbel",
            EpsilonDist::Normal { .. } => "normal",
            EpsilonDist::Uniform => "uniform",
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            EpsilonDist::Gumbel => {
                let g = Gumbel::new(0.0, 1.0).expect("unit Gumbel");
                out.iter_mut().for_each(|e| *e = g.sample(rng));
            }
            EpsilonDist::Normal { cholesky } => {
                out.iter_mut().for_each(|e| *e = StandardNormal.sample(rng));
                if let Some(l) = cholesky {
                    let v = l * DVector::from_column_slice(out);
                    out.copy_from_slice(v.as_slice());
                }
            }
            EpsilonDist::Uniform => {
                out.iter_mut().for_each(|e| *e = rng.random_range(-1.0..1.0));
            }
        }
    }
}

impl std::str::FromStr for EpsilonDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gumbel" => Ok(EpsilonDist::Gumbel),
            "normal" => Ok(EpsilonDist::normal()),
            "uniform" => Ok(EpsilonDist::Uniform),
            other => Err(Error::InvalidParameter(format!(
                "unknown error distribution {other:?}; expected gumbel, normal or uniform"
            ))),
        }
    }
}

/// Independent potential outcomes: `Y_j` is drawn from `probs[j]` over
/// `y_support`, independently of everything else.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeModel {
    pub y_support: Vec<i64>,
    pub probs: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RumSpec {
    pub config: DesignConfig,
    pub betas: Vec<f64>,
    pub epsilon: EpsilonDist,
    pub pz: Vec<f64>,
    pub n: u64,
    pub seed: u64,
    pub outcome: Option<OutcomeModel>,
}

impl RumSpec {
    pub fn new(
        config: DesignConfig,
        betas: Vec<f64>,
        epsilon: EpsilonDist,
        pz: Vec<f64>,
        n: u64,
        seed: u64,
    ) -> Result<Self> {
        let spec = RumSpec {
            config,
            betas,
            epsilon,
            pz,
            n,
            seed,
            outcome: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_outcome(mut self, outcome: OutcomeModel) -> Result<Self> {
        self.outcome = Some(outcome);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        if self.betas.len() != c.num_choices() {
            return Err(Error::InvalidParameter(format!(
                "{} betas given for {} choices",
                self.betas.len(),
                c.num_choices()
            )));
        }
        for (j, &b) in self.betas.iter().enumerate() {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::InvalidParameter(format!("beta_{j} = {b} must be finite and >= 0")));
            }
            if j < c.num_unaffected() && b != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "beta_{j} must be 0 because choice {j} is not targeted"
                )));
            }
        }
        validate_weights(&self.pz, c.num_instruments(), "instrument marginal")?;
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if let EpsilonDist::Normal { cholesky: Some(l) } = &self.epsilon {
            if l.nrows() != c.num_choices() {
                return Err(Error::InvalidParameter(format!(
                    "covariance is {0}x{0}, expected {1}x{1}",
                    l.nrows(),
                    c.num_choices()
                )));
            }
        }
        if let Some(o) = &self.outcome {
            if o.y_support.is_empty() || o.y_support.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter("outcome support must be strictly increasing".into()));
            }
            if o.probs.len() != c.num_choices() {
                return Err(Error::InvalidParameter("one outcome distribution per choice is required".into()));
            }
            for row in &o.probs {
                validate_weights(row, o.y_support.len(), "outcome distribution")?;
            }
        }
        Ok(())
    }
}

fn validate_weights(w: &[f64], len: usize, what: &str) -> Result<()> {
    if w.len() != len {
        return Err(Error::InvalidParameter(format!("{what} has {} entries, expected {len}", w.len())));
    }
    if w.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
        return Err(Error::InvalidParameter(format!("{what} has a negative or non-finite entry")));
    }
    if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("{what} does not sum to 1")));
    }
    Ok(())
}

/// `D_z = argmax_j (beta_j I{z = j} + eps_j)` for every instrument value.
pub fn potential_vector(config: &DesignConfig, betas: &[f64], eps: &[f64]) -> Result<ResponseType> {
    if betas.len() != config.num_choices() || eps.len() != config.num_choices() {
        return Err(Error::InvalidParameter(format!(
            "expected {} utilities, got betas {} and errors {}",
            config.num_choices(),
            betas.len(),
            eps.len()
        )));
    }
    let mut d = Vec::with_capacity(config.num_instruments());
    for &z in config.z_support() {
        let utility = |j: usize| if j == z { betas[j] + eps[j] } else { eps[j] };
        let mut best = 0;
        let mut tied = false;
        for j in 1..eps.len() {
            let (u, b) = (utility(j), utility(best));
            if u > b {
                best = j;
                tied = false;
            } else if u == b {
                tied = true;
            }
        }
        if tied {
            return Err(Error::Tie);
        }
        d.push(best);
    }
    Ok(ResponseType::from_vec(d))
}

/// Whether every coordinate is `z` or `jstar`, with `D_0 = jstar` under a
/// base state.
pub fn explained_by_default(config: &DesignConfig, rt: &ResponseType, jstar: usize) -> bool {
    if config.has_base_state() && rt.at_index(0) != jstar {
        return false;
    }
    config
        .z_support()
        .iter()
        .zip(rt.choices())
        .all(|(&z, &d)| d == z || d == jstar)
}

/// One observed record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Observation {
    pub y: Option<i64>,
    pub d: usize,
    pub z: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Rum(Box<RumSpec>),
    Table { seed: u64 },
    External,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MicroData {
    pub rows: Vec<Observation>,
    pub provenance: Provenance,
}

impl MicroData {
    pub fn external(rows: Vec<Observation>) -> Self {
        MicroData {
            rows,
            provenance: Provenance::External,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has_outcome(&self) -> bool {
        self.rows.first().is_some_and(|r| r.y.is_some())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub data: MicroData,
    pub empirical: ObservedDistribution,
    pub empirical_outcome: Option<OutcomeDistribution>,
    /// Counts of realized potential-treatment vectors.
    pub type_counts: BTreeMap<ResponseType, u64>,
    /// Draws whose vector fell outside the admissible set.
    pub inadmissible: u64,
    /// Draws whose vector is not explained by `argmax_j eps_j`.
    pub default_mismatches: u64,
    /// Tied draws that were resampled.
    pub ties: u64,
}

impl Simulation {
    pub fn type_frequencies(&self) -> BTreeMap<ResponseType, Rational> {
        let n = self.data.len() as u64;
        self.type_counts
            .iter()
            .map(|(t, &c)| (t.clone(), frequency(c, n)))
            .collect()
    }
}

struct ChunkResult {
    rows: Vec<Observation>,
    types: BTreeMap<ResponseType, u64>,
    inadmissible: u64,
    default_mismatches: u64,
    ties: u64,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for j in 1..v.len() {
        if v[j] > v[best] {
            best = j;
        }
    }
    best
}

/// `n` i.i.d. draws from the model, with `Z` drawn independently of the
/// errors.
pub fn simulate(spec: &RumSpec) -> Result<Simulation> {
    spec.validate()?;
    let config = &spec.config;
    let z_dist = WeightedIndex::new(&spec.pz).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let y_dists = match &spec.outcome {
        Some(o) => Some(
            o.probs
                .iter()
                .map(WeightedIndex::new)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidParameter(e.to_string()))?,
        ),
        None => None,
    };
    let chunks = run_chunks(spec.n, spec.seed, |rng, len| -> Result<ChunkResult> {
        let mut out = ChunkResult {
            rows: Vec::with_capacity(len as usize),
            types: BTreeMap::new(),
            inadmissible: 0,
            default_mismatches: 0,
            ties: 0,
        };
        let mut eps = vec![0.0; config.num_choices()];
        for _ in 0..len {
            let mut retries = 0;
            let rt = loop {
                spec.epsilon.sample(rng, &mut eps);
                match potential_vector(config, &spec.betas, &eps) {
                    Ok(rt) => break rt,
                    Err(Error::Tie) if retries < MAX_TIE_RETRIES => {
                        retries += 1;
                        out.ties += 1;
                    }
                    Err(Error::Tie) => {
                        return Err(Error::Sampling("error distribution keeps producing ties".into()));
                    }
                    Err(e) => return Err(e),
                }
            };
            if !is_admissible(config, &rt) {
                out.inadmissible += 1;
            }
            if !explained_by_default(config, &rt, argmax(&eps)) {
                out.default_mismatches += 1;
            }
            let zi = z_dist.sample(rng);
            let d = rt.at_index(zi);
            let y = match (&y_dists, &spec.outcome) {
                (Some(dists), Some(o)) => Some(o.y_support[dists[d].sample(rng)]),
                _ => None,
            };
            out.rows.push(Observation {
                y,
                d,
                z: config.z_support()[zi],
            });
            *out.types.entry(rt).or_insert(0) += 1;
        }
        Ok(out)
    });

    let mut rows = Vec::with_capacity(spec.n as usize);
    let mut type_counts = BTreeMap::new();
    let (mut inadmissible, mut default_mismatches, mut ties) = (0, 0, 0);
    for chunk in chunks {
        let chunk = chunk?;
        rows.extend(chunk.rows);
        for (t, c) in chunk.types {
            *type_counts.entry(t).or_insert(0) += c;
        }
        inadmissible += chunk.inadmissible;
        default_mismatches += chunk.default_mismatches;
        ties += chunk.ties;
    }
    let y_support = spec.outcome.as_ref().map(|o| o.y_support.as_slice());
    let counts = Counts::tally(config, &rows, y_support)?;
    Ok(Simulation {
        empirical: counts.table()?,
        empirical_outcome: counts.outcome_table()?,
        data: MicroData {
            rows,
            provenance: Provenance::Rum(Box::new(spec.clone())),
        },
        type_counts,
        inadmissible,
        default_mismatches,
        ties,
    })
}

/// Cell counts per instrument arm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counts {
    pub config: DesignConfig,
    pub y_support: Option<Vec<i64>>,
    /// `[zi][j][yi]`; a single outcome cell when there is no outcome.
    pub cells: Vec<Vec<Vec<u64>>>,
    pub arm_totals: Vec<u64>,
}

impl Counts {
    /// Tallies rows, validating `d`, `z` and `y` ranges. With `y_support`
    /// given every row must carry a `y` in it. Row numbers in errors count
    /// from 1.
    pub fn tally(config: &DesignConfig, rows: &[Observation], y_support: Option<&[i64]>) -> Result<Self> {
        let ny = y_support.map_or(1, |s| s.len());
        let mut cells = vec![vec![vec![0u64; ny]; config.num_choices()]; config.num_instruments()];
        let mut arm_totals = vec![0u64; config.num_instruments()];
        for (i, obs) in rows.iter().enumerate() {
            let row = i + 1;
            let zi = config.z_index(obs.z).ok_or_else(|| Error::Row {
                row,
                message: format!("z = {} is outside the instrument support {:?}", obs.z, config.z_support()),
            })?;
            if obs.d >= config.num_choices() {
                return Err(Error::Row {
                    row,
                    message: format!("d = {} is outside 0..{}", obs.d, config.num_choices()),
                });
            }
            let yi = match y_support {
                None => 0,
                Some(support) => {
                    let y = obs.y.ok_or_else(|| Error::Row {
                        row,
                        message: "missing outcome value".into(),
                    })?;
                    support.binary_search(&y).map_err(|_| Error::Row {
                        row,
                        message: format!("y = {y} is outside the outcome support {support:?}"),
                    })?
                }
            };
            cells[zi][obs.d][yi] += 1;
            arm_totals[zi] += 1;
        }
        if let Some(zi) = arm_totals.iter().position(|&t| t == 0) {
            return Err(Error::EmptyArm(config.z_support()[zi]));
        }
        Ok(Counts {
            config: config.clone(),
            y_support: y_support.map(<[i64]>::to_vec),
            cells,
            arm_totals,
        })
    }

    /// Conditional choice frequencies, exact.
    pub fn table(&self) -> Result<ObservedDistribution> {
        let p = self
            .cells
            .iter()
            .zip(&self.arm_totals)
            .map(|(arm, &n)| arm.iter().map(|c| frequency(c.iter().sum(), n)).collect())
            .collect();
        ObservedDistribution::new(self.config.clone(), p, None)
    }

    /// Conditional outcome-choice frequencies, exact; `None` without outcomes.
    pub fn outcome_table(&self) -> Result<Option<OutcomeDistribution>> {
        let Some(support) = &self.y_support else {
            return Ok(None);
        };
        let p = self
            .cells
            .iter()
            .zip(&self.arm_totals)
            .map(|(arm, &n)| {
                arm.iter()
                    .map(|c| c.iter().map(|&k| frequency(k, n)).collect())
                    .collect()
            })
            .collect();
        OutcomeDistribution::new(self.config.clone(), support.clone(), p, None).map(Some)
    }
}

/// `n` i.i.d. rows from a fixed table: `Z ~ pz`, then `D | Z` from `p`.
pub fn sample_from_table(p: &ObservedDistribution, pz: &[f64], n: u64, seed: u64) -> Result<MicroData> {
    let cells: Vec<Vec<f64>> = p
        .rows()
        .iter()
        .map(|r| r.iter().map(crate::rational::to_f64).collect())
        .collect();
    sample_cells(p.config(), &cells, None, pz, n, seed)
}

/// `n` i.i.d. rows from a fixed outcome table: `Z ~ pz`, then `(D, Y) | Z`.
pub fn sample_from_outcome_table(py: &OutcomeDistribution, pz: &[f64], n: u64, seed: u64) -> Result<MicroData> {
    let cells: Vec<Vec<f64>> = py
        .blocks()
        .iter()
        .map(|b| b.iter().flatten().map(crate::rational::to_f64).collect())
        .collect();
    sample_cells(py.config(), &cells, Some(py.y_support()), pz, n, seed)
}

fn sample_cells(
    config: &DesignConfig,
    cells: &[Vec<f64>],
    y_support: Option<&[i64]>,
    pz: &[f64],
    n: u64,
    seed: u64,
) -> Result<MicroData> {
    validate_weights(pz, config.num_instruments(), "instrument marginal")?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let ny = y_support.map_or(1, <[i64]>::len);
    let z_dist = WeightedIndex::new(pz).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let arm_dists = cells
        .iter()
        .map(WeightedIndex::new)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let chunks = run_chunks(n, seed, |rng, len| {
        (0..len)
            .map(|_| {
                let zi = z_dist.sample(rng);
                let cell = arm_dists[zi].sample(rng);
                Observation {
                    y: y_support.map(|s| s[cell % ny]),
                    d: cell / ny,
                    z: config.z_support()[zi],
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(MicroData {
        rows: chunks.into_iter().flatten().collect(),
        provenance: Provenance::Table { seed },
    })
}

/// Largest absolute gap between two exact tables, in floating point.
pub fn max_abs_difference(a: &ObservedDistribution, b: &ObservedDistribution) -> f64 {
    a.rows()
        .iter()
        .flatten()
        .zip(b.rows().iter().flatten())
        .map(|(x, y)| crate::rational::to_f64(&(x - y)).abs())
        .fold(0.0, f64::max)
}

/// Rational weights rounded from floating-point probabilities; used to
/// attach an instrument marginal to exact tables.
pub fn rational_weights(w: &[f64]) -> Vec<Rational> {
    let den = 1_000_000i64;
    let mut out: Vec<Rational> = w
        .iter()
        .map(|&x| crate::rational::ratio((x * den as f64).round() as i64, den))
        .collect();
    let total: Rational = out.iter().sum();
    if let Some(last) = out.last_mut() {
        *last += crate::rational::one() - total;
    }
    if out.iter().any(|x| x.is_zero()) {
        return vec![crate::rational::ratio(1, w.len() as i64); w.len()];
    }
    out
}
