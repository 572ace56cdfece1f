//! The mechanism proper: collect a report profile, ask the world model
//! for an outcome, and pay agents under one of two rules.
//!
//! * observable outcomes: `t_i(r) = α · (K − ε(r))`, with ε the realized
//!   Brier score of the model's posterior. With worlds ≥ 2 the Brier
//!   maximum is 2, so `K = 2` keeps payments nonnegative.
//! * zero-shot: `t_i(r) = β · c(r)`, with c the consistency score.
//!
//! Deviations are deterministic report maps over the agent's alphabet.
//! Mixed deviations are convex combinations of these, so checking all
//! pure maps covers every unilateral deviation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{InformationStructure, ReportProfile};
use crate::oracle::{self, Oracle, OracleSpec, OracleVerdict};
use crate::rng;

/// Maximum attainable Brier score over any world set with >= 2 worlds.
pub const BRIER_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PaymentRule {
    Observable { alpha: f64, k: f64 },
    ZeroShot { beta: f64 },
}

impl PaymentRule {
    pub fn observable(alpha: f64, k: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if k < BRIER_MAX {
            return Err(Error::InvalidParameter(format!(
                "K must be at least the maximum forecasting error {BRIER_MAX}, got {k}"
            )));
        }
        Ok(PaymentRule::Observable { alpha, k })
    }

    pub fn zero_shot(beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {beta}"
            )));
        }
        Ok(PaymentRule::ZeroShot { beta })
    }

    /// Per-agent payment given the verdict and the realized world.
    /// Payments are identical across agents: both ε and c are
    /// profile-level quantities.
    pub fn payment(&self, verdict: &OracleVerdict, realized_world: usize) -> f64 {
        match *self {
            PaymentRule::Observable { alpha, k } => {
                alpha * (k - oracle::forecasting_error(verdict, realized_world))
            }
            PaymentRule::ZeroShot { beta } => beta * verdict.consistency,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MechanismResult {
    pub outcome: usize,
    pub outcome_name: String,
    pub payments: Vec<f64>,
    pub realized_world: usize,
    pub epsilon: f64,
    pub consistency: f64,
    /// Induced welfare W(outcome, profile).
    pub welfare: f64,
}

/// One full mechanism execution on a fixed report profile and realized
/// world. Deterministic given the RNG state.
pub fn run<R: rand::Rng + ?Sized>(
    structure: &InformationStructure,
    oracle: &mut Oracle,
    rule: &PaymentRule,
    profile: &ReportProfile,
    realized_world: usize,
    rng: &mut R,
) -> Result<MechanismResult> {
    if realized_world >= structure.world_count() {
        return Err(Error::UnknownWorld(realized_world));
    }
    let verdict = oracle.evaluate(structure, profile, rng)?;
    verdict.validate(structure)?;
    let epsilon = oracle::forecasting_error(&verdict, realized_world);
    let payment = rule.payment(&verdict, realized_world);
    let welfare =
        structure.induced_welfare_from_posterior(verdict.selected_outcome, &verdict.posterior_worlds);
    Ok(MechanismResult {
        outcome: verdict.selected_outcome,
        outcome_name: structure.outcome_space().outcomes()[verdict.selected_outcome].clone(),
        payments: vec![payment; structure.agent_count()],
        realized_world,
        epsilon,
        consistency: verdict.consistency,
        welfare,
    })
}

/// A pure reporting strategy for one agent: `map[true_symbol]` is the
/// reported symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviationMap {
    pub agent: usize,
    pub map: Vec<usize>,
}

impl DeviationMap {
    pub fn identity(agent: usize, alphabet_len: usize) -> Self {
        Self {
            agent,
            map: (0..alphabet_len).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &m)| i == m)
    }

    pub fn validate(&self, structure: &InformationStructure) -> Result<()> {
        if self.agent >= structure.agent_count() {
            return Err(Error::InvalidParameter(format!(
                "deviation for unknown agent {}",
                self.agent
            )));
        }
        let size = structure.channel(self.agent).alphabet_len();
        if self.map.len() != size || self.map.iter().any(|&m| m >= size) {
            return Err(Error::InvalidParameter(format!(
                "deviation map {:?} does not map agent {}'s alphabet into itself",
                self.map, self.agent
            )));
        }
        Ok(())
    }

    pub fn apply(&self, profile: &ReportProfile) -> ReportProfile {
        let mut symbols = profile.symbols.clone();
        symbols[self.agent] = self.map[symbols[self.agent]];
        ReportProfile::new(symbols)
    }

    /// All `|A|^|A|` pure maps for one agent, identity included,
    /// lexicographic order.
    pub fn all_for_agent(agent: usize, alphabet_len: usize) -> Vec<DeviationMap> {
        let mut maps = Vec::new();
        let mut current = vec![0usize; alphabet_len];
        loop {
            maps.push(DeviationMap {
                agent,
                map: current.clone(),
            });
            let mut pos = alphabet_len;
            loop {
                if pos == 0 {
                    return maps;
                }
                pos -= 1;
                current[pos] += 1;
                if current[pos] < alphabet_len {
                    break;
                }
                current[pos] = 0;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EvalMode {
    Exhaustive,
    MonteCarlo { trials: u64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExpectedPayment {
    pub mean: f64,
    /// Standard error of the estimate; `None` in exhaustive mode.
    pub stderr: Option<f64>,
}

/// Per-profile quantities the payment rules consume, memoized across an
/// enumeration sweep.
pub(crate) struct ProfileStatsCache<'a> {
    structure: &'a InformationStructure,
    oracle: Oracle,
    seed: u64,
    cache: HashMap<Vec<usize>, (Option<Vec<f64>>, f64)>,
}

impl<'a> ProfileStatsCache<'a> {
    pub fn new(structure: &'a InformationStructure, spec: &OracleSpec, seed: u64) -> Self {
        Self {
            structure,
            oracle: Oracle::new(spec.clone()),
            seed,
            cache: HashMap::new(),
        }
    }

    /// (posterior over worlds if the profile is possible, consistency).
    pub fn stats(&mut self, profile: &ReportProfile) -> Result<(Option<Vec<f64>>, f64)> {
        if let Some(hit) = self.cache.get(&profile.symbols) {
            return Ok(hit.clone());
        }
        let entry = match self.oracle.spec() {
            OracleSpec::External { .. } => {
                let mut rng = rng::stream(self.seed, "oracle.external");
                let verdict = self.oracle.evaluate(self.structure, profile, &mut rng)?;
                (Some(verdict.posterior_worlds), verdict.consistency)
            }
            // exact and degraded share posterior and consistency; the
            // degradation only touches outcome selection
            _ => {
                let posterior = match self.structure.posterior_over_worlds(profile) {
                    Ok(p) => Some(p),
                    Err(Error::ImpossibleProfile) => None,
                    Err(e) => return Err(e),
                };
                let c = oracle::consistency(self.structure, profile)?;
                (posterior, c)
            }
        };
        self.cache.insert(profile.symbols.clone(), entry.clone());
        Ok(entry)
    }

    pub fn payment(
        &mut self,
        rule: &PaymentRule,
        profile: &ReportProfile,
        realized_world: usize,
    ) -> Result<f64> {
        let (posterior, consistency) = self.stats(profile)?;
        match *rule {
            PaymentRule::ZeroShot { beta } => Ok(beta * consistency),
            PaymentRule::Observable { alpha, k } => {
                let posterior = posterior.ok_or(Error::ImpossibleProfile)?;
                Ok(alpha * (k - oracle::brier_score(&posterior, realized_world)))
            }
        }
    }
}

/// Expected payment to `deviation.agent` when it plays `deviation` and
/// everyone else reports truthfully.
///
/// Exhaustive mode is the exact expectation over all (world, signal
/// profile) pairs; Monte Carlo mode is an unbiased seeded estimate with
/// its standard error.
pub fn expected_payment(
    structure: &InformationStructure,
    oracle_spec: &OracleSpec,
    rule: &PaymentRule,
    deviation: &DeviationMap,
    mode: EvalMode,
    seed: u64,
    budget: u128,
) -> Result<ExpectedPayment> {
    deviation.validate(structure)?;
    let mut cache = ProfileStatsCache::new(structure, oracle_spec, seed);
    match mode {
        EvalMode::Exhaustive => {
            let mut total = 0.0;
            for (signals, _) in structure.enumerate_profiles(budget)? {
                let reports = deviation.apply(&signals);
                for world in 0..structure.world_count() {
                    let p = structure.joint_probability(world, &signals)?;
                    if p == 0.0 {
                        continue;
                    }
                    total += p * cache.payment(rule, &reports, world)?;
                }
            }
            Ok(ExpectedPayment {
                mean: total,
                stderr: None,
            })
        }
        EvalMode::MonteCarlo { trials } => {
            if trials == 0 {
                return Err(Error::InvalidParameter("monte carlo needs trials > 0".into()));
            }
            let mut rng = rng::stream(seed, "mechanism.expected_payment");
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..trials {
                let (world, signals) = structure.sample_realization(&mut rng);
                let reports = deviation.apply(&signals);
                let t = cache.payment(rule, &reports, world)?;
                sum += t;
                sum_sq += t * t;
            }
            let n = trials as f64;
            let mean = sum / n;
            let var = ((sum_sq / n) - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
            Ok(ExpectedPayment {
                mean,
                stderr: Some((var / n).sqrt()),
            })
        }
    }
}
