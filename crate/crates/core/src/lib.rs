//! Simulator and verifier for language-model mechanisms on finite
//! discrete information structures.
//!
//! The crate models a mechanism that elicits one report per agent, asks a
//! world model for an outcome, and pays agents either from the model's
//! realized forecasting error (observable-outcomes rule) or from a
//! consistency score (zero-shot rule). An exact Bayesian oracle stands in
//! for the world model, with degraded and external-subprocess backends
//! alongside it. The verifier turns the sufficiency conditions for
//! truthfulness and efficiency into executable certificates, and an LMSR
//! prediction market provides the baseline the mechanism is compared
//! against.

pub mod cli;
pub mod error;
pub mod info;
pub mod market;
pub mod mechanism;
pub mod oracle;
pub mod rng;
pub mod scenarios;
pub mod verifier;

pub use error::{Error, Result};
pub use info::{
    InformationStructure, OutcomeSpace, ReportProfile, ScenarioJson, SignalChannel, WorldSpace,
};
pub use mechanism::{DeviationMap, EvalMode, MechanismResult, PaymentRule};
pub use oracle::{Oracle, OracleSpec, OracleVerdict};
pub use verifier::{ConditionCertificate, ConditionKind, Verdict};
