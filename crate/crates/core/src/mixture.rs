//! Error distributions that reproduce a given measure over response types.
//!
//! Each positively weighted type gets a region of error space on which the
//! random utility model, with encouragement weights `beta`, produces exactly
//! that type. Errors are uniform on each region, intersected with the box
//! `|eps_j| <= M`, and the regions are mixed with the type masses as
//! weights.
//!
//! For an off-diagonal type with default `j*` and complier set `L`:
//! `eps_{j*} > eps_k` for all `k`, `beta_j + eps_j > eps_{j*}` for `j` in
//! `L`, and `beta_j + eps_j < eps_{j*}` for the remaining targeted `j`. The
//! all-compliant type of a design without base state uses
//! `beta_j + eps_j > eps_k` for all `j != k`.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::design::{DesignConfig, ResponseMeasure, ResponseType};
use crate::error::{Error, Result};
use crate::rational::{to_f64, Rational};
use crate::response_types::default_choice;
use crate::simulate::{potential_vector, run_chunks};

/// Minimum acceptance rate of the region sampler.
pub const EFFICIENCY_FLOOR: f64 = 1e-3;

/// Proposals made before the efficiency floor is enforced.
const EFFICIENCY_WARMUP: u64 = 10_000;

/// `eps[hi] - eps[lo] > gap`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gap {
    pub lo: usize,
    pub hi: usize,
    pub gap: f64,
}

/// A convex polytope of error vectors, together with a proposal: the anchor
/// coordinate is uniform on `[-M, M]` and every other coordinate `k` lies in
/// `anchor + windows[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub gaps: Vec<Gap>,
    pub anchor: usize,
    pub windows: Vec<(f64, f64)>,
}

impl Region {
    pub fn contains(&self, eps: &[f64], bound: f64) -> bool {
        eps.iter().all(|e| e.abs() <= bound) && self.gaps.iter().all(|g| eps[g.hi] - eps[g.lo] > g.gap)
    }

    /// One uniform draw from the region within the box, by weighted
    /// rejection. Returns the draw and the number of proposals used.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, bound: f64, out: &mut [f64]) -> Result<u64> {
        let mut proposals = 0u64;
        loop {
            proposals += 1;
            if proposals > EFFICIENCY_WARMUP && (proposals as f64) * EFFICIENCY_FLOOR > 1.0 {
                return Err(Error::Sampling(format!(
                    "region sampler accepted 1 of {proposals} proposals; increase the bound M"
                )));
            }
            let a = rng.random_range(-bound..=bound);
            out[self.anchor] = a;
            let mut weight = 1.0;
            let mut empty = false;
            for (k, &(lo, hi)) in self.windows.iter().enumerate() {
                if k == self.anchor {
                    continue;
                }
                let from = (a + lo).max(-bound);
                let to = (a + hi).min(bound);
                if to <= from {
                    empty = true;
                    break;
                }
                weight *= (to - from) / (hi - lo);
                out[k] = rng.random_range(from..to);
            }
            if empty || rng.random::<f64>() >= weight {
                continue;
            }
            if self.contains(out, bound) {
                return Ok(proposals);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionComponent {
    pub response_type: ResponseType,
    pub weight: Rational,
    pub region: Region,
    /// A point strictly inside the region and the box.
    pub interior_point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionMixture {
    pub config: DesignConfig,
    pub bound: f64,
    pub betas: Vec<f64>,
    pub components: Vec<RegionComponent>,
}

/// `beta_j = 1` when some positively weighted type has `D_j = j` and
/// `D_k != j` for some `k`, else 0. Untargeted choices keep `beta_j = 0`.
pub fn mixture_betas(q: &ResponseMeasure) -> Vec<f64> {
    let config = q.config();
    (0..config.num_choices())
        .map(|j| {
            let Some(ji) = config.z_index(j).filter(|_| config.is_targeted(j)) else {
                return 0.0;
            };
            let hit = q.masses().iter().any(|(t, m)| {
                m.is_positive() && t.at_index(ji) == j && t.choices().iter().any(|&d| d != j)
            });
            if hit {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

fn region_for(config: &DesignConfig, rt: &ResponseType, betas: &[f64], bound: f64) -> Result<(Region, Vec<f64>)> {
    let defaults = default_choice(config, rt)?;
    let jj = config.num_choices();
    let beta_max = betas.iter().cloned().fold(0.0, f64::max);
    if defaults.len() > 1 {
        // all-compliant type without a base state
        let mut gaps = Vec::new();
        for (j, beta) in betas.iter().enumerate() {
            for k in 0..jj {
                if j != k {
                    gaps.push(Gap { lo: k, hi: j, gap: -beta });
                }
            }
        }
        let windows = (0..jj).map(|k| (-betas[k], betas[0])).collect();
        let region = Region { gaps, anchor: 0, windows };
        return Ok((region, vec![0.0; jj]));
    }
    let jstar = *defaults.iter().next().expect("nonempty default set");
    let mut gaps = Vec::new();
    let mut windows = vec![(0.0, 0.0); jj];
    let mut point = vec![0.0; jj];
    for k in 0..jj {
        if k == jstar {
            continue;
        }
        gaps.push(Gap { lo: k, hi: jstar, gap: 0.0 });
        let complies = config.z_index(k).is_some_and(|ki| config.is_targeted(k) && rt.at_index(ki) == k);
        if complies {
            gaps.push(Gap { lo: jstar, hi: k, gap: -betas[k] });
            windows[k] = (-betas[k], 0.0);
            point[k] = -betas[k] / 2.0;
        } else {
            if config.is_targeted(k) {
                gaps.push(Gap { lo: k, hi: jstar, gap: betas[k] });
            }
            windows[k] = (-2.0 * bound, -betas[k]);
            point[k] = -beta_max - 1.0;
        }
    }
    Ok((
        Region {
            gaps,
            anchor: jstar,
            windows,
        },
        point,
    ))
}

/// Builds the mixture for `q`, with `M = 3 (1 + max beta) + J`, escalated
/// tenfold once if some region has no interior point.
pub fn build_epsilon_mixture(q: &ResponseMeasure) -> Result<RegionMixture> {
    let config = q.config().clone();
    let betas = mixture_betas(q);
    let beta_max = betas.iter().cloned().fold(0.0, f64::max);
    let base_bound = 3.0 * (1.0 + beta_max) + config.num_choices() as f64;
    let mut last_failure = None;
    for bound in [base_bound, 10.0 * base_bound] {
        let mut components = Vec::new();
        let mut ok = true;
        for (rt, m) in q.masses() {
            if !m.is_positive() {
                continue;
            }
            let (region, point) = region_for(&config, rt, &betas, bound)?;
            let reproduces = potential_vector(&config, &betas, &point).ok().as_ref() == Some(rt);
            if !region.contains(&point, bound) || !reproduces {
                ok = false;
                last_failure = Some(rt.clone());
                break;
            }
            components.push(RegionComponent {
                response_type: rt.clone(),
                weight: m.clone(),
                region,
                interior_point: point,
            });
        }
        if ok {
            return Ok(RegionMixture {
                config,
                bound,
                betas,
                components,
            });
        }
    }
    Err(Error::Sampling(format!(
        "region for type {} is empty even after enlarging the bound",
        last_failure.expect("failure recorded")
    )))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureReport {
    pub n: u64,
    pub max_error: f64,
    pub frequencies: BTreeMap<ResponseType, f64>,
    /// Draws whose realized type differs from their region's type.
    pub mismatches: u64,
    pub acceptance_rate: f64,
}

/// Samples `n` error vectors from the mixture, maps them to response types
/// and compares type frequencies with `q`.
pub fn verify_mixture(mix: &RegionMixture, q: &ResponseMeasure, n: u64, seed: u64) -> Result<MixtureReport> {
    mix.config.ensure_same(q.config())?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if mix.components.is_empty() {
        return Err(Error::InvalidParameter("mixture has no components".into()));
    }
    let weights: Vec<f64> = mix.components.iter().map(|c| to_f64(&c.weight)).collect();
    let pick = WeightedIndex::new(&weights).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let jj = mix.config.num_choices();
    let chunks = run_chunks(n, seed, |rng, len| -> Result<(BTreeMap<ResponseType, u64>, u64, u64)> {
        let mut counts = BTreeMap::new();
        let (mut mismatches, mut proposals) = (0u64, 0u64);
        let mut eps = vec![0.0; jj];
        for _ in 0..len {
            let c = &mix.components[pick.sample(rng)];
            proposals += c.region.sample(rng, mix.bound, &mut eps)?;
            let rt = potential_vector(&mix.config, &mix.betas, &eps)?;
            if rt != c.response_type {
                mismatches += 1;
            }
            *counts.entry(rt).or_insert(0u64) += 1;
        }
        Ok((counts, mismatches, proposals))
    });
    let mut counts: BTreeMap<ResponseType, u64> = BTreeMap::new();
    let (mut mismatches, mut proposals) = (0, 0);
    for chunk in chunks {
        let (c, m, p) = chunk?;
        for (t, k) in c {
            *counts.entry(t).or_insert(0) += k;
        }
        mismatches += m;
        proposals += p;
    }
    let frequencies: BTreeMap<ResponseType, f64> =
        counts.into_iter().map(|(t, k)| (t, k as f64 / n as f64)).collect();
    let mut max_error: f64 = 0.0;
    for (t, m) in q.masses() {
        max_error = max_error.max((frequencies.get(t).copied().unwrap_or(0.0) - to_f64(m)).abs());
    }
    for (t, f) in &frequencies {
        if q.mass_of(t).is_zero() {
            max_error = max_error.max(*f);
        }
    }
    Ok(MixtureReport {
        n,
        max_error,
        frequencies,
        mismatches,
        acceptance_rate: n as f64 / proposals as f64,
    })
}
