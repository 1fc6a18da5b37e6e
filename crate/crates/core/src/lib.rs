//! Exact consistency checks, witness construction and simulation for
//! multinomial-choice encouragement designs.
//!
//! An encouragement design has choices `0..J`, the first `J0` of which no
//! instrument value targets. Instrument value `z > 0` nudges toward choice
//! `z`; `z = 0` is the base state. Observed data are tables
//! `P{D = j | Z = z}`, optionally refined by a discrete outcome `Y`.

pub mod construct;
pub mod design;
pub mod error;
pub mod inequality;
pub mod lp;
pub mod mixture;
pub mod random;
pub mod rational;
pub mod response_types;
pub mod simulate;
pub mod stats;

pub use design::{DesignConfig, ObservedDistribution, OutcomeDistribution, ResponseMeasure, ResponseType};
pub use error::{Error, ErrorKind, Result};
pub use rational::Rational;
