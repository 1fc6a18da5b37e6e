//! Design configuration, exact probability tables and the observation map.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{format_rational, Rational};

/// The pair `(J, J0)`: `J` choices, of which the first `J0` are not
/// targeted by any instrument value.
///
/// With `J0 = 0` the instrument support is `{0, ..., J-1}` and value `z`
/// targets choice `z`. With `J0 > 0` the support is `{0, J0, ..., J-1}` and
/// `z = 0` is the base state that changes no utility.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DesignConfig {
    num_choices: usize,
    num_unaffected: usize,
    z_support: Vec<usize>,
}

impl DesignConfig {
    pub fn new(num_choices: usize, num_unaffected: usize) -> Result<Self> {
        if num_choices < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 choices, got J = {num_choices}"
            )));
        }
        if num_unaffected >= num_choices {
            return Err(Error::InvalidConfig(format!(
                "J0 must lie in 0..=J-1, got J = {num_choices}, J0 = {num_unaffected}"
            )));
        }
        let z_support = if num_unaffected == 0 {
            (0..num_choices).collect()
        } else {
            std::iter::once(0).chain(num_unaffected..num_choices).collect()
        };
        Ok(DesignConfig {
            num_choices,
            num_unaffected,
            z_support,
        })
    }

    /// `J`.
    pub fn num_choices(&self) -> usize {
        self.num_choices
    }

    /// `J0`.
    pub fn num_unaffected(&self) -> usize {
        self.num_unaffected
    }

    /// Instrument values in ascending order.
    pub fn z_support(&self) -> &[usize] {
        &self.z_support
    }

    pub fn num_instruments(&self) -> usize {
        self.z_support.len()
    }

    pub fn has_base_state(&self) -> bool {
        self.num_unaffected > 0
    }

    /// Position of instrument value `z` inside [`Self::z_support`].
    pub fn z_index(&self, z: usize) -> Option<usize> {
        self.z_support.binary_search(&z).ok()
    }

    pub fn require_z_index(&self, z: usize) -> Result<usize> {
        self.z_index(z).ok_or_else(|| {
            Error::Domain(format!(
                "instrument value {z} is outside the support {:?}",
                self.z_support
            ))
        })
    }

    /// Whether some instrument value encourages choice `j`.
    pub fn is_targeted(&self, j: usize) -> bool {
        j >= self.num_unaffected
    }

    /// The instrument values `z` allowed for choice `j` in the sum-form
    /// inequalities: all of them for untargeted choices, all but `j`
    /// otherwise.
    pub fn targeted_set(&self, j: usize) -> Vec<usize> {
        self.z_support
            .iter()
            .copied()
            .filter(|&z| !(self.is_targeted(j) && z == j))
            .collect()
    }

    pub(crate) fn ensure_same(&self, other: &DesignConfig) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::ConfigMismatch {
                expected: self.to_string(),
                found: other.to_string(),
            })
        }
    }
}

impl fmt::Display for DesignConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(J={}, J0={})", self.num_choices, self.num_unaffected)
    }
}

/// Potential treatments `(D_z : z in support)`, stored in support order.
///
/// Any vector with in-range entries is representable; admissibility is
/// checked separately by [`crate::response_types::is_admissible`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResponseType(Vec<usize>);

impl ResponseType {
    pub fn new(config: &DesignConfig, choices: Vec<usize>) -> Result<Self> {
        if choices.len() != config.num_instruments() {
            return Err(Error::Domain(format!(
                "response type {choices:?} has length {}, expected {} for {config}",
                choices.len(),
                config.num_instruments()
            )));
        }
        if let Some(&bad) = choices.iter().find(|&&d| d >= config.num_choices()) {
            return Err(Error::Domain(format!(
                "choice {bad} out of range for {config}"
            )));
        }
        Ok(ResponseType(choices))
    }

    /// Unchecked constructor for vectors built inside the crate.
    pub(crate) fn from_vec(choices: Vec<usize>) -> Self {
        ResponseType(choices)
    }

    /// Choices in instrument-support order.
    pub fn choices(&self) -> &[usize] {
        &self.0
    }

    /// `D_z` for the instrument value at support position `zi`.
    pub fn at_index(&self, zi: usize) -> usize {
        self.0[zi]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for ResponseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

/// The observation map: the treatment actually taken by type `rt` when
/// assigned instrument value `z`.
pub fn observation_map(config: &DesignConfig, rt: &ResponseType, z: usize) -> Result<usize> {
    let zi = config.require_z_index(z)?;
    if rt.len() != config.num_instruments() {
        return Err(Error::Domain(format!(
            "response type {rt} does not match {config}"
        )));
    }
    Ok(rt.at_index(zi))
}

fn validate_marginal(config: &DesignConfig, pz: &[Rational]) -> Result<()> {
    if pz.len() != config.num_instruments() {
        return Err(Error::InvalidDistribution(format!(
            "instrument marginal has {} entries, expected {}",
            pz.len(),
            config.num_instruments()
        )));
    }
    for (zi, w) in pz.iter().enumerate() {
        if !w.is_positive() {
            return Err(Error::InvalidDistribution(format!(
                "P{{Z = {}}} = {} must be strictly positive",
                config.z_support()[zi],
                format_rational(w)
            )));
        }
    }
    let total: Rational = pz.iter().sum();
    if !total.is_one() {
        return Err(Error::InvalidDistribution(format!(
            "instrument marginal sums to {}",
            format_rational(&total)
        )));
    }
    Ok(())
}

/// Conditional choice probabilities `P{D = j | Z = z}`.
///
/// Rows are indexed by support position of `z`, columns by choice `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservedDistribution {
    config: DesignConfig,
    p: Vec<Vec<Rational>>,
    pz: Option<Vec<Rational>>,
}

impl ObservedDistribution {
    pub fn new(
        config: DesignConfig,
        p: Vec<Vec<Rational>>,
        pz: Option<Vec<Rational>>,
    ) -> Result<Self> {
        if p.len() != config.num_instruments() {
            return Err(Error::InvalidDistribution(format!(
                "{} rows given, {config} has {} instrument values",
                p.len(),
                config.num_instruments()
            )));
        }
        for (zi, row) in p.iter().enumerate() {
            let z = config.z_support()[zi];
            if row.len() != config.num_choices() {
                return Err(Error::InvalidDistribution(format!(
                    "row z={z} has {} entries, expected {}",
                    row.len(),
                    config.num_choices()
                )));
            }
            if let Some(bad) = row.iter().find(|x| x.is_negative() || **x > Rational::one()) {
                return Err(Error::InvalidDistribution(format!(
                    "row z={z} has probability {} outside [0, 1]",
                    format_rational(bad)
                )));
            }
            let total: Rational = row.iter().sum();
            if !total.is_one() {
                return Err(Error::InvalidDistribution(format!(
                    "row z={z} sums to {}",
                    format_rational(&total)
                )));
            }
        }
        if let Some(pz) = &pz {
            validate_marginal(&config, pz)?;
        }
        Ok(ObservedDistribution { config, p, pz })
    }

    pub fn config(&self) -> &DesignConfig {
        &self.config
    }

    /// `P{D = j | Z = z}` for the instrument at support position `zi`.
    pub fn at(&self, zi: usize, j: usize) -> &Rational {
        &self.p[zi][j]
    }

    /// `P{D = j | Z = z}` addressed by instrument value.
    pub fn prob(&self, z: usize, j: usize) -> Result<&Rational> {
        let zi = self.config.require_z_index(z)?;
        self.p[zi].get(j).ok_or_else(|| {
            Error::Domain(format!("choice {j} out of range for {}", self.config))
        })
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.p
    }

    pub fn instrument_marginal(&self) -> Option<&[Rational]> {
        self.pz.as_deref()
    }

    pub fn with_instrument_marginal(mut self, pz: Vec<Rational>) -> Result<Self> {
        validate_marginal(&self.config, &pz)?;
        self.pz = Some(pz);
        Ok(self)
    }
}

/// Joint outcome-treatment probabilities `P{Y = y, D = j | Z = z}` over a
/// finite, integer-coded outcome alphabet.
///
/// Indexed `[zi][j][yi]` with `zi` the support position of `z` and `yi` the
/// position of `y` in `y_support`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeDistribution {
    config: DesignConfig,
    y_support: Vec<i64>,
    p: Vec<Vec<Vec<Rational>>>,
    pz: Option<Vec<Rational>>,
}

impl OutcomeDistribution {
    pub fn new(
        config: DesignConfig,
        y_support: Vec<i64>,
        p: Vec<Vec<Vec<Rational>>>,
        pz: Option<Vec<Rational>>,
    ) -> Result<Self> {
        if y_support.is_empty() {
            return Err(Error::InvalidDistribution("empty outcome support".into()));
        }
        if y_support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDistribution(
                "outcome support must be strictly increasing".into(),
            ));
        }
        if p.len() != config.num_instruments() {
            return Err(Error::InvalidDistribution(format!(
                "{} instrument blocks given, {config} has {}",
                p.len(),
                config.num_instruments()
            )));
        }
        for (zi, block) in p.iter().enumerate() {
            let z = config.z_support()[zi];
            if block.len() != config.num_choices()
                || block.iter().any(|cells| cells.len() != y_support.len())
            {
                return Err(Error::InvalidDistribution(format!(
                    "block z={z} does not have shape {} x {}",
                    config.num_choices(),
                    y_support.len()
                )));
            }
            if let Some(bad) = block.iter().flatten().find(|x| x.is_negative()) {
                return Err(Error::InvalidDistribution(format!(
                    "block z={z} has negative entry {}",
                    format_rational(bad)
                )));
            }
            let total: Rational = block.iter().flatten().sum();
            if !total.is_one() {
                return Err(Error::InvalidDistribution(format!(
                    "block z={z} sums to {}",
                    format_rational(&total)
                )));
            }
        }
        if let Some(pz) = &pz {
            validate_marginal(&config, pz)?;
        }
        Ok(OutcomeDistribution {
            config,
            y_support,
            p,
            pz,
        })
    }

    pub fn config(&self) -> &DesignConfig {
        &self.config
    }

    pub fn y_support(&self) -> &[i64] {
        &self.y_support
    }

    pub fn num_outcomes(&self) -> usize {
        self.y_support.len()
    }

    /// `P{Y = y, D = j | Z = z}` by support positions.
    pub fn at(&self, zi: usize, j: usize, yi: usize) -> &Rational {
        &self.p[zi][j][yi]
    }

    pub fn blocks(&self) -> &[Vec<Vec<Rational>>] {
        &self.p
    }

    pub fn instrument_marginal(&self) -> Option<&[Rational]> {
        self.pz.as_deref()
    }

    /// Sums out the outcome: `P{D = j | Z = z}`.
    pub fn marginal(&self) -> ObservedDistribution {
        let p = self
            .p
            .iter()
            .map(|block| block.iter().map(|cells| cells.iter().sum()).collect())
            .collect();
        ObservedDistribution {
            config: self.config.clone(),
            p,
            pz: self.pz.clone(),
        }
    }
}

/// An exact probability measure over response types.
///
/// The joint law with `Z` is always the product with the instrument
/// marginal, so instrument exogeneity holds by construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResponseMeasure {
    config: DesignConfig,
    mass: BTreeMap<ResponseType, Rational>,
    pz: Option<Vec<Rational>>,
}

impl ResponseMeasure {
    /// Validates masses (nonnegative, total one, admissible support).
    /// Zero-mass entries are dropped.
    pub fn new(config: DesignConfig, mass: BTreeMap<ResponseType, Rational>) -> Result<Self> {
        let mut total = Rational::zero();
        for (rt, m) in &mass {
            if rt.len() != config.num_instruments()
                || rt.choices().iter().any(|&d| d >= config.num_choices())
            {
                return Err(Error::InvalidDistribution(format!(
                    "response type {rt} is malformed for {config}"
                )));
            }
            if m.is_negative() {
                return Err(Error::InvalidDistribution(format!(
                    "response type {rt} has negative mass {}",
                    format_rational(m)
                )));
            }
            if m.is_positive() && !crate::response_types::is_admissible(&config, rt) {
                return Err(Error::InvalidDistribution(format!(
                    "response type {rt} is not admissible under {config}"
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
        Ok(ResponseMeasure {
            config,
            mass,
            pz: None,
        })
    }

    pub fn with_instrument_marginal(mut self, pz: Option<Vec<Rational>>) -> Result<Self> {
        if let Some(pz) = &pz {
            validate_marginal(&self.config, pz)?;
        }
        self.pz = pz;
        Ok(self)
    }

    pub fn config(&self) -> &DesignConfig {
        &self.config
    }

    /// Positive masses keyed by response type, in lexicographic order.
    pub fn masses(&self) -> &BTreeMap<ResponseType, Rational> {
        &self.mass
    }

    pub fn mass_of(&self, rt: &ResponseType) -> Rational {
        self.mass.get(rt).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn instrument_marginal(&self) -> Option<&[Rational]> {
        self.pz.as_deref()
    }

    /// `P{D = j | Z = z} = Q{D_z = j}`, summed exactly.
    pub fn pushforward(&self) -> ObservedDistribution {
        let config = &self.config;
        let mut p = vec![vec![Rational::zero(); config.num_choices()]; config.num_instruments()];
        for (rt, m) in &self.mass {
            for (zi, row) in p.iter_mut().enumerate() {
                row[rt.at_index(zi)] += m;
            }
        }
        ObservedDistribution {
            config: config.clone(),
            p,
            pz: self.pz.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn rt(config: &DesignConfig, d: &[usize]) -> ResponseType {
        ResponseType::new(config, d.to_vec()).unwrap()
    }

    #[test]
    fn config_support_shapes() {
        let c = DesignConfig::new(3, 0).unwrap();
        assert_eq!(c.z_support(), &[0, 1, 2]);
        assert_eq!(c.targeted_set(1), vec![0, 2]);

        let c = DesignConfig::new(4, 2).unwrap();
        assert_eq!(c.z_support(), &[0, 2, 3]);
        assert_eq!(c.num_instruments(), 4 - 2 + 1);
        assert_eq!(c.targeted_set(0), vec![0, 2, 3]);
        assert_eq!(c.targeted_set(1), vec![0, 2, 3]);
        assert_eq!(c.targeted_set(3), vec![0, 2]);

        let c = DesignConfig::new(3, 2).unwrap();
        assert_eq!(c.z_support(), &[0, 2]);
    }

    #[test]
    fn config_rejects_out_of_range() {
        assert!(DesignConfig::new(1, 0).is_err());
        assert!(DesignConfig::new(3, 3).is_err());
        assert!(DesignConfig::new(2, 1).is_ok());
    }

    #[test]
    fn observation_map_reads_coordinates() {
        let c = DesignConfig::new(3, 0).unwrap();
        assert_eq!(observation_map(&c, &rt(&c, &[0, 1, 2]), 1).unwrap(), 1);
        assert_eq!(observation_map(&c, &rt(&c, &[0, 1, 0]), 2).unwrap(), 0);

        let c = DesignConfig::new(3, 2).unwrap();
        let t = rt(&c, &[1, 2]);
        assert_eq!(observation_map(&c, &t, 2).unwrap(), 2);
        assert_eq!(observation_map(&c, &t, 0).unwrap(), 1);
        assert!(matches!(observation_map(&c, &t, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn response_type_validation() {
        let c = DesignConfig::new(3, 1).unwrap();
        assert!(ResponseType::new(&c, vec![0, 1]).is_err());
        assert!(ResponseType::new(&c, vec![0, 1, 3]).is_err());
        assert!(ResponseType::new(&c, vec![0, 1, 2]).is_ok());
    }

    #[test]
    fn pushforward_examples() {
        let c = DesignConfig::new(3, 0).unwrap();
        let diag = ResponseMeasure::new(
            c.clone(),
            BTreeMap::from([(rt(&c, &[0, 1, 2]), ratio(1, 1))]),
        )
        .unwrap();
        let p = diag.pushforward();
        for zi in 0..3 {
            for j in 0..3 {
                let expected = if zi == j { ratio(1, 1) } else { ratio(0, 1) };
                assert_eq!(p.at(zi, j), &expected);
            }
        }

        let constants = ResponseMeasure::new(
            c.clone(),
            (0..3).map(|j| (rt(&c, &[j, j, j]), ratio(1, 3))).collect(),
        )
        .unwrap();
        let p = constants.pushforward();
        assert!(p.rows().iter().flatten().all(|x| *x == ratio(1, 3)));

        let c = DesignConfig::new(2, 1).unwrap();
        let q = ResponseMeasure::new(
            c.clone(),
            BTreeMap::from([
                (rt(&c, &[0, 0]), ratio(1, 2)),
                (rt(&c, &[0, 1]), ratio(1, 4)),
                (rt(&c, &[1, 1]), ratio(1, 4)),
            ]),
        )
        .unwrap();
        let p = q.pushforward();
        assert_eq!(p.rows()[0], vec![ratio(3, 4), ratio(1, 4)]);
        assert_eq!(p.rows()[1], vec![ratio(1, 2), ratio(1, 2)]);
    }

    #[test]
    fn measure_rejects_bad_input() {
        let c = DesignConfig::new(2, 0).unwrap();
        let inadmissible = BTreeMap::from([(rt(&c, &[1, 0]), ratio(1, 1))]);
        assert!(ResponseMeasure::new(c.clone(), inadmissible).is_err());
        let short = BTreeMap::from([(rt(&c, &[0, 0]), ratio(1, 2))]);
        assert!(ResponseMeasure::new(c.clone(), short).is_err());
        let negative = BTreeMap::from([
            (rt(&c, &[0, 0]), ratio(3, 2)),
            (rt(&c, &[1, 1]), ratio(-1, 2)),
        ]);
        assert!(ResponseMeasure::new(c, negative).is_err());
    }

    #[test]
    fn table_validation() {
        let c = DesignConfig::new(2, 0).unwrap();
        let ok = vec![vec![ratio(1, 2), ratio(1, 2)], vec![ratio(1, 3), ratio(2, 3)]];
        assert!(ObservedDistribution::new(c.clone(), ok.clone(), None).is_ok());
        let bad_sum = vec![vec![ratio(1, 2), ratio(1, 3)], vec![ratio(1, 3), ratio(2, 3)]];
        assert!(ObservedDistribution::new(c.clone(), bad_sum, None).is_err());
        let bad_pz = Some(vec![ratio(1, 1), ratio(0, 1)]);
        assert!(ObservedDistribution::new(c.clone(), ok.clone(), bad_pz).is_err());
        let good_pz = Some(vec![ratio(1, 4), ratio(3, 4)]);
        assert!(ObservedDistribution::new(c, ok, good_pz).is_ok());
    }
}
