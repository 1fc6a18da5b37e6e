//! The `encourage` command line: parses arguments, reads JSON and CSV
//! inputs, runs the core operations and prints one JSON document.
//!
//! Exit codes: 0 success, 1 usage error, 2 input or validation error,
//! 3 negative verdict (inconsistent table, failed construction, rejected
//! test), 4 capacity cap exceeded.

pub mod data;
pub mod json;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use encourage_core::construct::{construct, construct_outcome, diagnose, diagnose_outcome};
use encourage_core::inequality::{
    check, check_outcome, generate, generate_full, generate_reduced, InequalitySpec, OutcomeInequality,
};
use encourage_core::lp::{feasible, feasible_outcome};
use encourage_core::mixture::{build_epsilon_mixture, verify_mixture};
use encourage_core::response_types::enumerate_admissible;
use encourage_core::simulate::{simulate, EpsilonDist, OutcomeModel, RumSpec};
use encourage_core::stats::test_model;
use encourage_core::{DesignConfig, ErrorKind};

use crate::json::Distribution;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_VERDICT: i32 = 3;
pub const EXIT_CAPACITY: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] encourage_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Input => EXIT_INPUT,
                ErrorKind::Verdict => EXIT_VERDICT,
                ErrorKind::Capacity => EXIT_CAPACITY,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "encourage", version, about = "Consistency checks for encouragement designs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Number of choices.
    #[arg(long = "J")]
    pub j: usize,
    /// Number of choices no instrument value targets.
    #[arg(long = "J0", default_value_t = 0)]
    pub j0: usize,
}

impl DesignArgs {
    fn config(&self) -> Result<DesignConfig, CliError> {
        Ok(DesignConfig::new(self.j, self.j0)?)
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Distribution file (JSON).
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    /// Distribution file (JSON).
    #[arg(long)]
    pub input: PathBuf,
    /// Where to write the witness measure.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Include every ordering and step mass.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    /// Encouragement weights, comma separated.
    #[arg(long)]
    pub betas: String,
    /// Error distribution: gumbel, normal or uniform.
    #[arg(long, default_value = "gumbel")]
    pub eps: String,
    /// Covariance for normal errors, rows separated by ';'.
    #[arg(long)]
    pub cov: Option<String>,
    /// Instrument marginal over the support, comma separated (default uniform).
    #[arg(long)]
    pub pz: Option<String>,
    #[arg(long)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Outcome support for independent potential outcomes.
    #[arg(long = "y-support")]
    pub y_support: Option<String>,
    /// Outcome distribution per choice, rows separated by ';'.
    #[arg(long = "y-probs")]
    pub y_probs: Option<String>,
    /// Write the micro-data CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    /// Micro-data CSV with columns d, z and optionally y.
    #[arg(long)]
    pub data: PathBuf,
    /// Use the outcome column.
    #[arg(long)]
    pub y: bool,
    /// Outcome support (default: observed values).
    #[arg(long = "y-support")]
    pub y_support: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Bootstrap replications.
    #[arg(long = "B", default_value_t = 999)]
    pub b: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the admissible response types.
    Enumerate(DesignArgs),
    /// List the inequality family of a design.
    Inequalities {
        #[command(flatten)]
        design: DesignArgs,
        /// The full selector family instead of the reduced one.
        #[arg(long)]
        full: bool,
    },
    /// Check a choice table against the sharp inequalities.
    Check(InputArgs),
    /// Build a witness measure for a choice table.
    Construct(ConstructArgs),
    /// Decide feasibility of a choice table by linear programming.
    LpCheck(InputArgs),
    /// Check an outcome table.
    CheckY(InputArgs),
    /// Build a witness measure for an outcome table.
    ConstructY(ConstructArgs),
    /// Decide feasibility of an outcome table by linear programming.
    LpCheckY(InputArgs),
    /// Draw micro-data from a random utility model.
    Simulate(SimulateArgs),
    /// Reproduce a witness measure by sampling errors from its regions.
    MixtureVerify {
        /// Witness measure file.
        #[arg(long)]
        q: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Test the model on micro-data.
    Test(TestArgs),
}

/// Exit code and the text for each stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn document(code: i32, doc: &Value) -> Self {
        Outcome {
            code,
            stdout: render(doc),
            stderr: String::new(),
        }
    }
}

pub fn render(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// Runs one invocation. `args` includes the program name.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    match dispatch(cli.command) {
        Ok(out) => out,
        Err(e) => Outcome {
            code: e.exit_code(),
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn choice_input(path: &Path) -> Result<encourage_core::ObservedDistribution, CliError> {
    match json::parse_distribution(&read(path)?)? {
        Distribution::Choice(p) => Ok(p),
        Distribution::Outcome(_) => Err(CliError::Input(format!(
            "{} has \"y_support\"; use the -y variant of this command",
            path.display()
        ))),
    }
}

fn outcome_input(path: &Path) -> Result<encourage_core::OutcomeDistribution, CliError> {
    match json::parse_distribution(&read(path)?)? {
        Distribution::Outcome(p) => Ok(p),
        Distribution::Choice(_) => Err(CliError::Input(format!(
            "{} has no \"y_support\"; outcome commands need an outcome table",
            path.display()
        ))),
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--{what}: cannot parse {s:?}")))
        })
        .collect()
}

fn parse_matrix(text: &str, what: &str) -> Result<Vec<Vec<f64>>, CliError> {
    text.split(';').map(|row| parse_list(row, what)).collect()
}

fn verdict(passed: bool) -> i32 {
    if passed {
        EXIT_OK
    } else {
        EXIT_VERDICT
    }
}

fn dispatch(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Enumerate(d) => {
            let config = d.config()?;
            let set = enumerate_admissible(&config)?;
            let types: Vec<&[usize]> = set.types().iter().map(|t| t.choices()).collect();
            Ok(Outcome::document(
                EXIT_OK,
                &json!({
                    "J": config.num_choices(),
                    "J0": config.num_unaffected(),
                    "z_support": config.z_support(),
                    "count": set.len(),
                    "types": types,
                }),
            ))
        }
        Command::Inequalities { design, full } => {
            let config = design.config()?;
            let (family, name) = if full || !config.has_base_state() {
                (generate_full(&config)?, "full")
            } else {
                (generate_reduced(&config)?, "reduced")
            };
            debug_assert!(full || family == generate(&config)?);
            let list: Vec<Value> = family.iter().map(json::inequality_json).collect();
            Ok(Outcome::document(
                EXIT_OK,
                &json!({
                    "J": config.num_choices(),
                    "J0": config.num_unaffected(),
                    "family": name,
                    "count": list.len(),
                    "inequalities": list,
                }),
            ))
        }
        Command::Check(a) => {
            let p = choice_input(&a.input)?;
            let report = check(&p)?;
            let doc = json::report_json(&report, |s: &InequalitySpec| json::inequality_json(s));
            Ok(Outcome::document(verdict(report.passed), &doc))
        }
        Command::Construct(a) => {
            let p = choice_input(&a.input)?;
            let trace = a.trace.then(|| diagnose(&p));
            match construct(&p) {
                Ok(q) => {
                    let witness = json::measure_json(&q);
                    if let Some(path) = &a.output {
                        write(path, &render(&witness))?;
                    }
                    let mut doc = json!({"constructed": true, "witness": witness});
                    if let Some(t) = &trace {
                        doc["trace"] = json::trace_json(t);
                    }
                    Ok(Outcome::document(EXIT_OK, &doc))
                }
                Err(e @ encourage_core::Error::NegativeMass { .. }) => {
                    let t = trace.unwrap_or_else(|| diagnose(&p));
                    let doc = json!({
                        "constructed": false,
                        "reason": e.to_string(),
                        "trace": json::trace_json(&t),
                    });
                    Ok(Outcome::document(EXIT_VERDICT, &doc))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::LpCheck(a) => {
            let p = choice_input(&a.input)?;
            let v = feasible(&p)?;
            let doc = json!({
                "feasible": v.feasible,
                "certificate": v.certificate.as_ref().map(json::measure_json),
            });
            Ok(Outcome::document(verdict(v.feasible), &doc))
        }
        Command::CheckY(a) => {
            let py = outcome_input(&a.input)?;
            let report = check_outcome(&py)?;
            let doc = json::report_json(&report, |s: &OutcomeInequality| json::outcome_inequality_json(s));
            Ok(Outcome::document(verdict(report.passed), &doc))
        }
        Command::ConstructY(a) => {
            let py = outcome_input(&a.input)?;
            let trace = a.trace.then(|| diagnose_outcome(&py));
            match construct_outcome(&py) {
                Ok(q) => {
                    let witness = json::outcome_measure_json(&q);
                    if let Some(path) = &a.output {
                        write(path, &render(&witness))?;
                    }
                    let mut doc = json!({"constructed": true, "witness": witness});
                    if let Some(t) = &trace {
                        doc["trace"] = json::trace_json(t);
                    }
                    Ok(Outcome::document(EXIT_OK, &doc))
                }
                Err(e @ encourage_core::Error::NegativeMass { .. }) => {
                    let t = trace.unwrap_or_else(|| diagnose_outcome(&py));
                    let doc = json!({
                        "constructed": false,
                        "reason": e.to_string(),
                        "trace": json::trace_json(&t),
                    });
                    Ok(Outcome::document(EXIT_VERDICT, &doc))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::LpCheckY(a) => {
            let py = outcome_input(&a.input)?;
            let v = feasible_outcome(&py)?;
            let doc = json!({
                "feasible": v.feasible,
                "certificate": v.certificate.as_ref().map(json::outcome_measure_json),
            });
            Ok(Outcome::document(verdict(v.feasible), &doc))
        }
        Command::Simulate(a) => run_simulate(a),
        Command::MixtureVerify { q, n, seed } => {
            let q = json::parse_measure(&read(&q)?)?;
            let mix = build_epsilon_mixture(&q)?;
            let r = verify_mixture(&mix, &q, n, seed)?;
            let freqs: Vec<Value> = r
                .frequencies
                .iter()
                .map(|(t, f)| {
                    json!({
                        "type": t.choices(),
                        "frequency": f,
                        "target": encourage_core::rational::to_f64(&q.mass_of(t)),
                    })
                })
                .collect();
            let doc = json!({
                "n": n,
                "seed": seed,
                "bound": mix.bound,
                "betas": mix.betas,
                "components": mix.components.len(),
                "max_error": r.max_error,
                "mismatches": r.mismatches,
                "acceptance_rate": r.acceptance_rate,
                "frequencies": freqs,
            });
            Ok(Outcome::document(EXIT_OK, &doc))
        }
        Command::Test(a) => run_test(a),
    }
}

fn run_simulate(a: SimulateArgs) -> Result<Outcome, CliError> {
    let config = a.design.config()?;
    let betas: Vec<f64> = parse_list(&a.betas, "betas")?;
    let mut epsilon: EpsilonDist = a.eps.parse().map_err(|e: encourage_core::Error| CliError::Usage(e.to_string()))?;
    if let Some(cov) = &a.cov {
        if !matches!(epsilon, EpsilonDist::Normal { .. }) {
            return Err(CliError::Usage("--cov requires --eps normal".into()));
        }
        epsilon = EpsilonDist::correlated_normal(&parse_matrix(cov, "cov")?)?;
    }
    let pz = match &a.pz {
        Some(text) => parse_list(text, "pz")?,
        None => vec![1.0 / config.num_instruments() as f64; config.num_instruments()],
    };
    let mut spec = RumSpec::new(config.clone(), betas, epsilon, pz, a.n, a.seed)?;
    match (&a.y_support, &a.y_probs) {
        (Some(ys), Some(probs)) => {
            spec = spec.with_outcome(OutcomeModel {
                y_support: parse_list(ys, "y-support")?,
                probs: parse_matrix(probs, "y-probs")?,
            })?;
        }
        (None, None) => {}
        _ => return Err(CliError::Usage("--y-support and --y-probs go together".into())),
    }
    let sim = simulate(&spec)?;
    if let Some(path) = &a.out {
        let file = fs::File::create(path)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        data::write_micro_data(std::io::BufWriter::new(file), &sim.data)?;
    }
    let types: Vec<Value> = sim
        .type_counts
        .iter()
        .map(|(t, &c)| json!({"type": t.choices(), "count": c, "frequency": c as f64 / a.n as f64}))
        .collect();
    let mut doc = json!({
        "n": a.n,
        "seed": a.seed,
        "eps": spec.epsilon.name(),
        "betas": spec.betas,
        "empirical": json::distribution_json(&sim.empirical),
        "types": types,
        "inadmissible": sim.inadmissible,
        "default_mismatches": sim.default_mismatches,
        "ties_resampled": sim.ties,
    });
    if let Some(py) = &sim.empirical_outcome {
        doc["empirical_outcome"] = json::outcome_distribution_json(py);
    }
    if let Some(path) = &a.out {
        doc["out"] = json!(path.display().to_string());
    }
    Ok(Outcome::document(EXIT_OK, &doc))
}

fn run_test(a: TestArgs) -> Result<Outcome, CliError> {
    let config = a.design.config()?;
    if a.y_support.is_some() && !a.y {
        return Err(CliError::Usage("--y-support requires --y".into()));
    }
    let y_support: Option<Vec<i64>> = a.y_support.as_deref().map(|s| parse_list(s, "y-support")).transpose()?;
    let file = fs::File::open(&a.data)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", a.data.display())))?;
    let micro = data::read_micro_data(file, a.y)?;
    let r = test_model(&micro, &config, y_support.as_deref(), a.alpha, a.b, a.seed)?;
    let arms: Vec<Value> = r.arm_sizes.iter().map(|(z, n)| json!({"z": z, "n": n})).collect();
    let moments: Vec<Value> = r
        .moments
        .iter()
        .map(|m| json!({"inequality": m.label, "slack": m.slack, "se": m.se, "se_floored": m.floored}))
        .collect();
    let doc = json!({
        "arms": arms,
        "table": r.table,
        "y_support": r.y_support,
        "outcome_table": r.outcome_table,
        "moments": moments,
        "statistic": r.statistic,
        "critical_value": r.critical_value,
        "p_value": r.p_value,
        "alpha": r.alpha,
        "reject": r.reject,
        "seed": r.seed,
        "B": r.replications,
    });
    Ok(Outcome::document(if r.reject { EXIT_VERDICT } else { EXIT_OK }, &doc))
}
