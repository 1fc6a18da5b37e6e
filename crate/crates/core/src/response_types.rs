//! The admissible set of potential-treatment vectors and the behavioral
//! restrictions it is compared against.
//!
//! A vector is admissible when some default choice `j*` explains every
//! coordinate: under instrument value `z` the agent takes either the
//! targeted choice `z` or `j*`. With a base state (`J0 > 0`) the default is
//! pinned to `D_0`.

use std::collections::BTreeSet;

use crate::design::{DesignConfig, ResponseType};
use crate::error::{Error, Result};

/// Default cap on the number of candidate vectors a brute-force
/// enumeration may visit.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 22;

pub fn is_admissible(config: &DesignConfig, rt: &ResponseType) -> bool {
    let d = rt.choices();
    let support = config.z_support();
    if config.has_base_state() {
        let default = d[0];
        support
            .iter()
            .zip(d)
            .skip(1)
            .all(|(&z, &dz)| dz == z || dz == default)
    } else {
        let mut off_diagonal = support
            .iter()
            .zip(d)
            .filter(|(&z, &dz)| dz != z)
            .map(|(_, &dz)| dz);
        match off_diagonal.next() {
            None => true,
            Some(first) => off_diagonal.all(|dz| dz == first),
        }
    }
}

/// The admissible response types of a design, in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdmissibleSet {
    config: DesignConfig,
    types: Vec<ResponseType>,
}

impl AdmissibleSet {
    pub fn config(&self) -> &DesignConfig {
        &self.config
    }

    pub fn types(&self) -> &[ResponseType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn contains(&self, rt: &ResponseType) -> bool {
        self.types.binary_search(rt).is_ok()
    }

    pub fn position(&self, rt: &ResponseType) -> Option<usize> {
        self.types.binary_search(rt).ok()
    }
}

/// `J^|Z|`, the number of candidate vectors.
pub fn candidate_count(config: &DesignConfig) -> u128 {
    (config.num_choices() as u128).saturating_pow(config.num_instruments() as u32)
}

/// Closed-form size of the admissible set.
pub fn admissible_count(config: &DesignConfig) -> u128 {
    let j = config.num_choices() as u32;
    let j0 = config.num_unaffected() as u32;
    if j0 == 0 {
        j as u128 * (1u128 << (j - 1)) - (j as u128 - 1)
    } else {
        j0 as u128 * (1u128 << (j - j0)) + (j - j0) as u128 * (1u128 << (j - j0 - 1))
    }
}

pub fn enumerate_admissible(config: &DesignConfig) -> Result<AdmissibleSet> {
    enumerate_admissible_capped(config, DEFAULT_ENUMERATION_CAP)
}

/// Filters every vector in `{0..J}^|Z|` through [`is_admissible`].
pub fn enumerate_admissible_capped(config: &DesignConfig, cap: u128) -> Result<AdmissibleSet> {
    let required = candidate_count(config);
    if required > cap {
        return Err(Error::Capacity {
            what: "response-type enumeration",
            required,
            cap,
        });
    }
    let width = config.num_instruments();
    let base = config.num_choices();
    let mut types = Vec::new();
    let mut digits = vec![0usize; width];
    // Odometer with the last coordinate fastest, so output is lexicographic.
    loop {
        let candidate = ResponseType::from_vec(digits.clone());
        if is_admissible(config, &candidate) {
            types.push(candidate);
        }
        let mut pos = width;
        loop {
            if pos == 0 {
                return Ok(AdmissibleSet {
                    config: config.clone(),
                    types,
                });
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < base {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// Every default choice `j*` consistent with an admissible vector.
///
/// Off the diagonal the default is unique. The all-compliant vector is
/// consistent with any default when `J0 = 0`; with a base state the default
/// is always `D_0`.
pub fn default_choice(config: &DesignConfig, rt: &ResponseType) -> Result<BTreeSet<usize>> {
    if rt.len() != config.num_instruments() || !is_admissible(config, rt) {
        return Err(Error::Domain(format!(
            "response type {rt} is not admissible under {config}"
        )));
    }
    if config.has_base_state() {
        return Ok(BTreeSet::from([rt.at_index(0)]));
    }
    Ok((0..config.num_choices())
        .filter(|&j| {
            config
                .z_support()
                .iter()
                .zip(rt.choices())
                .all(|(&z, &dz)| dz == z || dz == j)
        })
        .collect())
}

/// The pairwise restriction "anyone who takes `j` under some other
/// instrument value also takes `j` when encouraged towards it":
/// `D_k = j` for some `k != j` implies `D_j = j`.
pub fn satisfies_pairwise_restriction(config: &DesignConfig, rt: &ResponseType) -> Result<bool> {
    if config.has_base_state() {
        return Err(Error::Domain(
            "the pairwise restriction is defined for J0 = 0 only".into(),
        ));
    }
    let d = rt.choices();
    Ok((0..config.num_choices()).all(|j| {
        let taken_elsewhere = d.iter().enumerate().any(|(k, &dk)| k != j && dk == j);
        !taken_elsewhere || d[j] == j
    }))
}

/// The behavioral restrictions of the two three-choice applications,
/// evaluated literally on a deterministic vector.
///
/// * `(J=3, J0=2)`, support `{0, 2}`: switching under the offer means
///   switching to choice 2 (`D_0 != D_2` implies `D_2 = 2`).
/// * `(J=3, J0=1)`, support `{0, 1, 2}`: monotonicity (`D_0 = k` implies
///   `D_k = k` for `k = 1, 2`) and irrelevance (if neither `D_0` nor `D_k`
///   is `k`, then `D_k` equals the other field `m` exactly when `D_0` does).
pub fn satisfies_example_restrictions(config: &DesignConfig, rt: &ResponseType) -> Result<bool> {
    let implies = |a: bool, b: bool| !a || b;
    match (config.num_choices(), config.num_unaffected()) {
        (3, 2) => {
            let (d0, d2) = (rt.at_index(0), rt.at_index(1));
            Ok(implies(d0 != d2, d2 == 2))
        }
        (3, 1) => {
            let d = |z: usize| rt.at_index(z);
            let monotone = |k: usize| implies(d(0) == k, d(k) == k);
            let irrelevant = |k: usize, other: usize| {
                implies(d(0) != k && d(k) != k, (d(k) == other) == (d(0) == other))
            };
            Ok(monotone(1) && monotone(2) && irrelevant(1, 2) && irrelevant(2, 1))
        }
        _ => Err(Error::Domain(format!(
            "example restrictions are defined for (J=3, J0=1) and (J=3, J0=2), not {config}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(j: usize, j0: usize) -> DesignConfig {
        DesignConfig::new(j, j0).unwrap()
    }

    fn rt(config: &DesignConfig, d: &[usize]) -> ResponseType {
        ResponseType::new(config, d.to_vec()).unwrap()
    }

    #[test]
    fn admissibility_examples() {
        let c30 = cfg(3, 0);
        assert!(is_admissible(&c30, &rt(&c30, &[0, 1, 0])));
        let c31 = cfg(3, 1);
        assert!(!is_admissible(&c31, &rt(&c31, &[0, 1, 1])));
        let c20 = cfg(2, 0);
        assert!(!is_admissible(&c20, &rt(&c20, &[1, 0])));
    }

    #[test]
    fn three_choice_set_has_ten_members() {
        let c = cfg(3, 0);
        let set = enumerate_admissible(&c).unwrap();
        let expected: BTreeSet<Vec<usize>> = [
            [0, 0, 0],
            [1, 1, 1],
            [2, 2, 2],
            [0, 1, 0],
            [0, 0, 2],
            [1, 1, 2],
            [0, 1, 1],
            [2, 1, 2],
            [0, 2, 2],
            [0, 1, 2],
        ]
        .iter()
        .map(|v| v.to_vec())
        .collect();
        let got: BTreeSet<Vec<usize>> = set.types().iter().map(|t| t.choices().to_vec()).collect();
        assert_eq!(got, expected);
        assert!(set.types().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn base_state_sets() {
        let c = cfg(2, 1);
        let got: Vec<Vec<usize>> = enumerate_admissible(&c)
            .unwrap()
            .types()
            .iter()
            .map(|t| t.choices().to_vec())
            .collect();
        assert_eq!(got, vec![vec![0, 0], vec![0, 1], vec![1, 1]]);

        let c = cfg(3, 2);
        let got: Vec<Vec<usize>> = enumerate_admissible(&c)
            .unwrap()
            .types()
            .iter()
            .map(|t| t.choices().to_vec())
            .collect();
        assert_eq!(
            got,
            vec![vec![0, 0], vec![0, 2], vec![1, 1], vec![1, 2], vec![2, 2]]
        );
    }

    #[test]
    fn closed_form_counts_match_the_filter() {
        for j in 2..=6 {
            for j0 in 0..j {
                let c = cfg(j, j0);
                let set = enumerate_admissible(&c).unwrap();
                assert_eq!(set.len() as u128, admissible_count(&c), "{c}");
            }
        }
    }

    #[test]
    fn enumeration_respects_cap() {
        let c = cfg(4, 0);
        assert!(matches!(
            enumerate_admissible_capped(&c, 100),
            Err(Error::Capacity { required: 256, .. })
        ));
        assert!(enumerate_admissible_capped(&c, 256).is_ok());
    }

    #[test]
    fn default_choice_examples() {
        let c30 = cfg(3, 0);
        assert_eq!(
            default_choice(&c30, &rt(&c30, &[0, 1, 0])).unwrap(),
            BTreeSet::from([0])
        );
        assert_eq!(
            default_choice(&c30, &rt(&c30, &[0, 1, 2])).unwrap(),
            BTreeSet::from([0, 1, 2])
        );
        let c31 = cfg(3, 1);
        assert_eq!(
            default_choice(&c31, &rt(&c31, &[1, 1, 2])).unwrap(),
            BTreeSet::from([1])
        );
        assert!(default_choice(&c30, &rt(&c30, &[1, 2, 2])).is_err());
    }

    #[test]
    fn non_diagonal_defaults_are_unique() {
        for j in 2..=5 {
            for j0 in 0..j {
                let c = cfg(j, j0);
                for t in enumerate_admissible(&c).unwrap().types() {
                    let defaults = default_choice(&c, t).unwrap();
                    let diagonal =
                        !c.has_base_state() && c.z_support().iter().zip(t.choices()).all(|(z, d)| z == d);
                    if diagonal {
                        assert_eq!(defaults.len(), j);
                    } else {
                        assert_eq!(defaults.len(), 1, "{c} {t}");
                    }
                }
            }
        }
    }

    #[test]
    fn pairwise_restriction_is_weaker_from_four_choices() {
        let c = cfg(4, 0);
        let witness = rt(&c, &[1, 1, 2, 2]);
        assert!(satisfies_pairwise_restriction(&c, &witness).unwrap());
        assert!(!is_admissible(&c, &witness));

        let c3 = cfg(3, 0);
        let set = enumerate_admissible_capped(&c3, 27).unwrap();
        let mut digits = [0usize; 3];
        for code in 0..27 {
            digits[0] = code / 9;
            digits[1] = (code / 3) % 3;
            digits[2] = code % 3;
            let t = rt(&c3, &digits);
            assert_eq!(
                satisfies_pairwise_restriction(&c3, &t).unwrap(),
                set.contains(&t),
                "{t}"
            );
        }

        for t in enumerate_admissible(&c).unwrap().types() {
            assert!(satisfies_pairwise_restriction(&c, t).unwrap());
        }
        assert!(satisfies_pairwise_restriction(&cfg(3, 1), &witness).is_err());
    }

    #[test]
    fn example_restrictions_match_admissibility() {
        for j0 in [1, 2] {
            let c = cfg(3, j0);
            let width = c.num_instruments();
            for code in 0..3usize.pow(width as u32) {
                let d: Vec<usize> = (0..width)
                    .map(|i| (code / 3usize.pow((width - 1 - i) as u32)) % 3)
                    .collect();
                let t = rt(&c, &d);
                assert_eq!(
                    satisfies_example_restrictions(&c, &t).unwrap(),
                    is_admissible(&c, &t),
                    "{c} {t}"
                );
            }
        }
        let c32 = cfg(3, 2);
        assert!(satisfies_example_restrictions(&c32, &rt(&c32, &[1, 2])).unwrap());
        assert!(!satisfies_example_restrictions(&c32, &rt(&c32, &[1, 0])).unwrap());
        let c31 = cfg(3, 1);
        assert!(satisfies_example_restrictions(&c31, &rt(&c31, &[2, 1, 2])).unwrap());
        assert!(satisfies_example_restrictions(&cfg(3, 0), &rt(&cfg(3, 0), &[0, 1, 2])).is_err());
    }

    #[test]
    fn base_state_set_nests_in_the_unrestricted_one() {
        // Same support {0,1,2}: the J0 = 1 set keeps the J0 = 0 vectors whose
        // default is D_0.
        let full = enumerate_admissible(&cfg(3, 0)).unwrap();
        let c31 = cfg(3, 1);
        let nested = enumerate_admissible(&c31).unwrap();
        let filtered: Vec<&ResponseType> = full
            .types()
            .iter()
            .filter(|t| {
                let d = default_choice(&cfg(3, 0), t).unwrap();
                d.contains(&t.at_index(0))
            })
            .collect();
        assert_eq!(nested.len(), 8);
        assert_eq!(filtered.len(), 8);
        for t in filtered {
            assert!(nested.contains(t));
        }
        assert!(!nested.contains(&rt(&c31, &[0, 1, 1])));
        assert!(!nested.contains(&rt(&c31, &[0, 2, 2])));
    }
}
