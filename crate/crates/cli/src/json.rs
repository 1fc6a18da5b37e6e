//! JSON forms of tables, measures, inequalities and reports.
//!
//! Rationals are written as canonical `"a/b"` strings. Objects use sorted
//! keys, so equal values always print identically.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use encourage_core::construct::{AssignmentRole, ConstructionTrace, OutcomeResponseMeasure};
use encourage_core::inequality::{Bound, CheckReport, InequalityKind, InequalitySpec, OutcomeInequality};
use encourage_core::rational::{format_rational, parse_rational, Rational};
use encourage_core::{DesignConfig, ObservedDistribution, OutcomeDistribution, ResponseMeasure, ResponseType};

use crate::CliError;

pub fn rational(r: &Rational) -> Value {
    Value::String(format_rational(r))
}

/// A parsed distribution file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Distribution {
    Choice(ObservedDistribution),
    Outcome(OutcomeDistribution),
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn get_usize(doc: &Map<String, Value>, key: &str) -> Result<usize, CliError> {
    doc.get(key)
        .ok_or_else(|| bad(format!("missing key {key:?}")))?
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| bad(format!("{key:?} must be a nonnegative integer")))
}

fn number(v: &Value, at: &str) -> Result<Rational, CliError> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return Err(bad(format!("{at}: expected a number or a string such as \"1/3\""))),
    };
    parse_rational(&text).map_err(|e| bad(format!("{at}: {e}")))
}

fn object<'a>(v: &'a Value, at: &str) -> Result<&'a Map<String, Value>, CliError> {
    v.as_object().ok_or_else(|| bad(format!("{at}: expected an object")))
}

fn index_key(key: &str, at: &str) -> Result<i64, CliError> {
    key.trim()
        .parse()
        .map_err(|_| bad(format!("{at}: key {key:?} is not an integer")))
}

fn design(doc: &Map<String, Value>) -> Result<DesignConfig, CliError> {
    Ok(DesignConfig::new(get_usize(doc, "J")?, get_usize(doc, "J0")?)?)
}

fn config_from(doc: &Map<String, Value>) -> Result<DesignConfig, CliError> {
    let config = design(doc)?;
    if let Some(zs) = doc.get("z_support") {
        let listed: Option<Vec<usize>> = zs
            .as_array()
            .and_then(|a| a.iter().map(|v| v.as_u64().map(|x| x as usize)).collect());
        if listed.as_deref() != Some(config.z_support()) {
            return Err(bad(format!(
                "\"z_support\" does not match the design {config}, which has {:?}",
                config.z_support()
            )));
        }
    }
    Ok(config)
}

fn instrument_marginal(doc: &Map<String, Value>, config: &DesignConfig) -> Result<Option<Vec<Rational>>, CliError> {
    let Some(pz) = doc.get("pz") else {
        return Ok(None);
    };
    let mut out = vec![Rational::default(); config.num_instruments()];
    let mut seen = vec![false; config.num_instruments()];
    match pz {
        Value::Array(items) => {
            if items.len() != out.len() {
                return Err(bad(format!("\"pz\" has {} entries, expected {}", items.len(), out.len())));
            }
            for (i, v) in items.iter().enumerate() {
                out[i] = number(v, "pz")?;
                seen[i] = true;
            }
        }
        Value::Object(map) => {
            for (k, v) in map {
                let z = index_key(k, "pz")?;
                let zi = usize::try_from(z)
                    .ok()
                    .and_then(|z| config.z_index(z))
                    .ok_or_else(|| bad(format!("pz: instrument value {z} is not in {:?}", config.z_support())))?;
                out[zi] = number(v, &format!("pz[{z}]"))?;
                seen[zi] = true;
            }
        }
        _ => return Err(bad("\"pz\" must be an array or an object")),
    }
    if let Some(zi) = seen.iter().position(|s| !s) {
        return Err(bad(format!("pz: missing instrument value {}", config.z_support()[zi])));
    }
    Ok(Some(out))
}

fn choice_index(key: &str, config: &DesignConfig, at: &str) -> Result<usize, CliError> {
    let j = index_key(key, at)?;
    usize::try_from(j)
        .ok()
        .filter(|&j| j < config.num_choices())
        .ok_or_else(|| bad(format!("{at}: choice {j} is outside 0..{}", config.num_choices())))
}

/// Parses a distribution file; `"y_support"` selects the outcome form.
/// Missing choice or outcome cells are zero.
pub fn parse_distribution(text: &str) -> Result<Distribution, CliError> {
    let root: Value = serde_json::from_str(text).map_err(|e| bad(format!("invalid JSON: {e}")))?;
    let doc = object(&root, "document")?;
    let config = config_from(doc)?;
    let pz = instrument_marginal(doc, &config)?;
    let p = object(doc.get("p").ok_or_else(|| bad("missing key \"p\""))?, "p")?;
    for key in p.keys() {
        let z = index_key(key, "p")?;
        if usize::try_from(z).ok().and_then(|z| config.z_index(z)).is_none() {
            return Err(bad(format!("p: instrument value {z} is not in {:?}", config.z_support())));
        }
    }
    let arm = |z: usize| -> Result<&Map<String, Value>, CliError> {
        let entry = p
            .iter()
            .find(|(k, _)| index_key(k, "p").ok() == Some(z as i64))
            .map(|(_, v)| v)
            .ok_or_else(|| bad(format!("p: missing instrument value {z}")))?;
        object(entry, &format!("p[{z}]"))
    };
    match doc.get("y_support") {
        None => {
            let mut rows = Vec::new();
            for &z in config.z_support() {
                let mut row = vec![Rational::default(); config.num_choices()];
                for (k, v) in arm(z)? {
                    let j = choice_index(k, &config, &format!("p[{z}]"))?;
                    row[j] = number(v, &format!("p[{z}][{j}]"))?;
                }
                rows.push(row);
            }
            Ok(Distribution::Choice(ObservedDistribution::new(config, rows, pz)?))
        }
        Some(ys) => {
            let ys: Vec<i64> = ys
                .as_array()
                .and_then(|a| a.iter().map(Value::as_i64).collect())
                .ok_or_else(|| bad("\"y_support\" must be an array of integers"))?;
            let mut blocks = Vec::new();
            for &z in config.z_support() {
                let mut block = vec![vec![Rational::default(); ys.len()]; config.num_choices()];
                for (k, v) in arm(z)? {
                    let j = choice_index(k, &config, &format!("p[{z}]"))?;
                    for (yk, value) in object(v, &format!("p[{z}][{j}]"))? {
                        let y = index_key(yk, &format!("p[{z}][{j}]"))?;
                        let yi = ys
                            .iter()
                            .position(|&s| s == y)
                            .ok_or_else(|| bad(format!("p[{z}][{j}]: outcome {y} is not in y_support")))?;
                        block[j][yi] = number(value, &format!("p[{z}][{j}][{y}]"))?;
                    }
                }
                blocks.push(block);
            }
            Ok(Distribution::Outcome(OutcomeDistribution::new(config, ys, blocks, pz)?))
        }
    }
}

fn design_fields(config: &DesignConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("J".into(), json!(config.num_choices()));
    m.insert("J0".into(), json!(config.num_unaffected()));
    m
}

fn pz_json(config: &DesignConfig, pz: Option<&[Rational]>) -> Option<Value> {
    pz.map(|pz| {
        Value::Object(
            config
                .z_support()
                .iter()
                .zip(pz)
                .map(|(z, v)| (z.to_string(), rational(v)))
                .collect(),
        )
    })
}

pub fn distribution_json(p: &ObservedDistribution) -> Value {
    let config = p.config();
    let mut m = design_fields(config);
    let table: Map<String, Value> = config
        .z_support()
        .iter()
        .zip(p.rows())
        .map(|(z, row)| {
            let cells = row.iter().enumerate().map(|(j, v)| (j.to_string(), rational(v))).collect();
            (z.to_string(), Value::Object(cells))
        })
        .collect();
    m.insert("p".into(), Value::Object(table));
    if let Some(pz) = pz_json(config, p.instrument_marginal()) {
        m.insert("pz".into(), pz);
    }
    Value::Object(m)
}

pub fn outcome_distribution_json(py: &OutcomeDistribution) -> Value {
    let config = py.config();
    let mut m = design_fields(config);
    let table: Map<String, Value> = config
        .z_support()
        .iter()
        .zip(py.blocks())
        .map(|(z, block)| {
            let arm = block
                .iter()
                .enumerate()
                .map(|(j, cells)| {
                    let by_y = py
                        .y_support()
                        .iter()
                        .zip(cells)
                        .map(|(y, v)| (y.to_string(), rational(v)))
                        .collect();
                    (j.to_string(), Value::Object(by_y))
                })
                .collect();
            (z.to_string(), Value::Object(arm))
        })
        .collect();
    m.insert("p".into(), Value::Object(table));
    m.insert("y_support".into(), json!(py.y_support()));
    if let Some(pz) = pz_json(config, py.instrument_marginal()) {
        m.insert("pz".into(), pz);
    }
    Value::Object(m)
}

pub fn measure_json(q: &ResponseMeasure) -> Value {
    let config = q.config();
    let mut m = design_fields(config);
    m.insert("z_support".into(), json!(config.z_support()));
    let mass: Vec<Value> = q
        .masses()
        .iter()
        .map(|(t, w)| json!({"type": t.choices(), "mass": rational(w)}))
        .collect();
    m.insert("mass".into(), Value::Array(mass));
    if let Some(pz) = pz_json(config, q.instrument_marginal()) {
        m.insert("pz".into(), pz);
    }
    Value::Object(m)
}

pub fn outcome_measure_json(q: &OutcomeResponseMeasure) -> Value {
    let config = q.config();
    let mut m = design_fields(config);
    m.insert("z_support".into(), json!(config.z_support()));
    m.insert("y_support".into(), json!(q.y_support()));
    let mass: Vec<Value> = q
        .masses()
        .iter()
        .map(|((t, ys), w)| json!({"type": t.choices(), "y": ys, "mass": rational(w)}))
        .collect();
    m.insert("mass".into(), Value::Array(mass));
    if let Some(pz) = pz_json(config, q.instrument_marginal()) {
        m.insert("pz".into(), pz);
    }
    Value::Object(m)
}

fn mass_entries(doc: &Map<String, Value>) -> Result<&Vec<Value>, CliError> {
    doc.get("mass")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("\"mass\" must be an array of {\"type\", \"mass\"} entries"))
}

fn type_of(entry: &Map<String, Value>, config: &DesignConfig, i: usize) -> Result<ResponseType, CliError> {
    let choices: Vec<usize> = entry
        .get("type")
        .and_then(Value::as_array)
        .and_then(|a| a.iter().map(|v| v.as_u64().map(|x| x as usize)).collect())
        .ok_or_else(|| bad(format!("mass[{i}]: \"type\" must be an array of choices")))?;
    Ok(ResponseType::new(config, choices)?)
}

/// Parses a witness file written by [`measure_json`].
pub fn parse_measure(text: &str) -> Result<ResponseMeasure, CliError> {
    let root: Value = serde_json::from_str(text).map_err(|e| bad(format!("invalid JSON: {e}")))?;
    let doc = object(&root, "document")?;
    let config = config_from(doc)?;
    let mut mass: BTreeMap<ResponseType, Rational> = BTreeMap::new();
    for (i, entry) in mass_entries(doc)?.iter().enumerate() {
        let entry = object(entry, &format!("mass[{i}]"))?;
        let t = type_of(entry, &config, i)?;
        let w = number(entry.get("mass").unwrap_or(&Value::Null), &format!("mass[{i}]"))?;
        *mass.entry(t).or_default() += w;
    }
    let pz = instrument_marginal(doc, &config)?;
    Ok(ResponseMeasure::new(config, mass)?.with_instrument_marginal(pz)?)
}

/// Parses an outcome witness file written by [`outcome_measure_json`].
pub fn parse_outcome_measure(text: &str) -> Result<OutcomeResponseMeasure, CliError> {
    let root: Value = serde_json::from_str(text).map_err(|e| bad(format!("invalid JSON: {e}")))?;
    let doc = object(&root, "document")?;
    let config = config_from(doc)?;
    let ys: Vec<i64> = doc
        .get("y_support")
        .and_then(Value::as_array)
        .and_then(|a| a.iter().map(Value::as_i64).collect())
        .ok_or_else(|| bad("\"y_support\" must be an array of integers"))?;
    let mut mass: BTreeMap<(ResponseType, Vec<i64>), Rational> = BTreeMap::new();
    for (i, entry) in mass_entries(doc)?.iter().enumerate() {
        let entry = object(entry, &format!("mass[{i}]"))?;
        let t = type_of(entry, &config, i)?;
        let y: Vec<i64> = entry
            .get("y")
            .and_then(Value::as_array)
            .and_then(|a| a.iter().map(Value::as_i64).collect())
            .ok_or_else(|| bad(format!("mass[{i}]: \"y\" must be an array of outcomes")))?;
        let w = number(entry.get("mass").unwrap_or(&Value::Null), &format!("mass[{i}]"))?;
        *mass.entry((t, y)).or_default() += w;
    }
    let pz = instrument_marginal(doc, &config)?;
    Ok(OutcomeResponseMeasure::new(config, ys, mass)?.with_instrument_marginal(pz)?)
}

pub fn inequality_json(spec: &InequalitySpec) -> Value {
    let mut m = Map::new();
    match &spec.kind {
        InequalityKind::SumForm { selector } => {
            m.insert("kind".into(), json!("sum"));
            m.insert("selector".into(), json!(selector));
        }
        InequalityKind::Pairwise { j, lower, upper } => {
            m.insert("kind".into(), json!("pairwise"));
            m.insert("j".into(), json!(j));
            m.insert("lower".into(), json!(lower));
            m.insert("upper".into(), json!(upper));
        }
    }
    let terms: Vec<Value> = spec.terms.iter().map(|(z, j)| json!({"z": z, "j": j})).collect();
    m.insert("terms".into(), Value::Array(terms));
    m.insert(
        "bound".into(),
        match spec.bound {
            Bound::One => json!("1"),
            Bound::Cell { z, j } => json!({"z": z, "j": j}),
        },
    );
    m.insert("text".into(), json!(spec.to_string()));
    Value::Object(m)
}

pub fn outcome_inequality_json(ineq: &OutcomeInequality) -> Value {
    match ineq {
        OutcomeInequality::Pointwise { y, j, lower, upper } => json!({
            "kind": "pointwise",
            "y": y,
            "j": j,
            "lower": lower,
            "upper": upper,
            "text": ineq.to_string(),
        }),
        OutcomeInequality::Partition { assignment } => json!({
            "kind": "partition",
            "assignment": assignment,
            "text": ineq.to_string(),
        }),
    }
}

pub fn report_json<S>(report: &CheckReport<S>, describe: impl Fn(&S) -> Value) -> Value {
    let violations: Vec<Value> = report
        .violations
        .iter()
        .map(|(s, slack)| json!({"inequality": describe(s), "slack": rational(slack)}))
        .collect();
    json!({
        "passed": report.passed,
        "min_slack": rational(&report.min_slack),
        "num_checked": report.num_checked,
        "violations": violations,
    })
}

pub fn trace_json(trace: &ConstructionTrace) -> Value {
    let orderings: Vec<Value> = trace
        .orderings
        .iter()
        .map(|o| {
            json!({
                "target": o.target,
                "outcome": o.outcome,
                "order": o.order,
                "num_steps": o.num_steps,
            })
        })
        .collect();
    let assignments: Vec<Value> = trace
        .assignments
        .iter()
        .map(|a| {
            let role = match a.role {
                AssignmentRole::Step(l) => json!({"step": l}),
                AssignmentRole::Diagonal => json!("diagonal"),
                AssignmentRole::BaseDiagonal => json!("base_diagonal"),
            };
            json!({
                "target": a.target,
                "outcome": a.outcome,
                "role": role,
                "type": a.response_type.choices(),
                "mass": rational(&a.mass),
            })
        })
        .collect();
    json!({"orderings": orderings, "assignments": assignments})
}
