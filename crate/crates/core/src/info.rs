//! Finite-world, finite-signal information structures with exact
//! probability semantics: joint probabilities, Bayesian posteriors,
//! exhaustive profile enumeration, and seeded sampling.
//!
//! All types are immutable after construction and safe to share across
//! threads. Sampling takes a caller-owned RNG; there is no hidden global
//! state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for "sums to one" checks on stored probability vectors.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Default cap on `Π_i |alphabet_i|` for exhaustive enumeration.
pub const DEFAULT_ENUM_BUDGET: u128 = 10_000_000;

/// Latent world set with its prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpace {
    worlds: Vec<String>,
    prior: Vec<f64>,
}

impl WorldSpace {
    pub fn new(worlds: Vec<String>, prior: Vec<f64>) -> Result<Self> {
        if worlds.len() < 2 {
            return Err(Error::InvalidStructure("need at least 2 worlds".into()));
        }
        if worlds.len() != prior.len() {
            return Err(Error::InvalidStructure(format!(
                "{} worlds but {} prior entries",
                worlds.len(),
                prior.len()
            )));
        }
        check_unique(&worlds, "world")?;
        check_prob_vector(&prior, "prior")?;
        Ok(Self { worlds, prior })
    }

    pub fn len(&self) -> usize {
        self.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worlds.is_empty()
    }

    pub fn worlds(&self) -> &[String] {
        &self.worlds
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }
}

/// One agent's signal alphabet and conditional distribution P(signal | world).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalChannel {
    agent: usize,
    alphabet: Vec<String>,
    /// Rows indexed by world, columns by symbol.
    likelihood: Vec<Vec<f64>>,
}

impl SignalChannel {
    pub fn new(agent: usize, alphabet: Vec<String>, likelihood: Vec<Vec<f64>>) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(Error::InvalidStructure(format!(
                "agent {agent}: empty alphabet"
            )));
        }
        check_unique(&alphabet, &format!("agent {agent} symbol"))?;
        for (w, row) in likelihood.iter().enumerate() {
            if row.len() != alphabet.len() {
                return Err(Error::InvalidStructure(format!(
                    "agent {agent}: likelihood row {w} has {} entries, alphabet has {}",
                    row.len(),
                    alphabet.len()
                )));
            }
            check_prob_vector(row, &format!("agent {agent} likelihood row {w}"))?;
        }
        Ok(Self {
            agent,
            alphabet,
            likelihood,
        })
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn alphabet_len(&self) -> usize {
        self.alphabet.len()
    }

    /// P(symbol | world).
    pub fn likelihood(&self, world: usize, symbol: usize) -> f64 {
        self.likelihood[world][symbol]
    }

    pub fn likelihood_rows(&self) -> &[Vec<f64>] {
        &self.likelihood
    }
}

/// Outcome set with per-(outcome, world) welfare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSpace {
    outcomes: Vec<String>,
    /// Rows indexed by outcome, columns by world.
    welfare: Vec<Vec<f64>>,
}

impl OutcomeSpace {
    pub fn new(outcomes: Vec<String>, welfare: Vec<Vec<f64>>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::InvalidStructure("need at least 1 outcome".into()));
        }
        check_unique(&outcomes, "outcome")?;
        if welfare.len() != outcomes.len() {
            return Err(Error::InvalidStructure(format!(
                "{} outcomes but {} welfare rows",
                outcomes.len(),
                welfare.len()
            )));
        }
        for (x, row) in welfare.iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidStructure(format!(
                    "non-finite welfare in outcome row {x}"
                )));
            }
        }
        Ok(Self { outcomes, welfare })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    /// W(outcome, world).
    pub fn welfare(&self, outcome: usize, world: usize) -> f64 {
        self.welfare[outcome][world]
    }

    pub fn welfare_rows(&self) -> &[Vec<f64>] {
        &self.welfare
    }
}

/// One report symbol per agent, stored as alphabet indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReportProfile {
    pub symbols: Vec<usize>,
}

impl ReportProfile {
    pub fn new(symbols: Vec<usize>) -> Self {
        Self { symbols }
    }
}

/// A complete finite information structure: worlds, one channel per agent,
/// and the outcome space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformationStructure {
    world_space: WorldSpace,
    channels: Vec<SignalChannel>,
    outcome_space: OutcomeSpace,
}

impl InformationStructure {
    pub fn new(
        world_space: WorldSpace,
        channels: Vec<SignalChannel>,
        outcome_space: OutcomeSpace,
    ) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidStructure("need at least 1 agent".into()));
        }
        for (i, ch) in channels.iter().enumerate() {
            if ch.agent() != i {
                return Err(Error::InvalidStructure(format!(
                    "channel {i} labeled for agent {}",
                    ch.agent()
                )));
            }
            if ch.likelihood_rows().len() != world_space.len() {
                return Err(Error::InvalidStructure(format!(
                    "agent {i}: {} likelihood rows for {} worlds",
                    ch.likelihood_rows().len(),
                    world_space.len()
                )));
            }
        }
        for row in outcome_space.welfare_rows() {
            if row.len() != world_space.len() {
                return Err(Error::InvalidStructure(format!(
                    "welfare row has {} entries for {} worlds",
                    row.len(),
                    world_space.len()
                )));
            }
        }
        Ok(Self {
            world_space,
            channels,
            outcome_space,
        })
    }

    pub fn world_space(&self) -> &WorldSpace {
        &self.world_space
    }

    pub fn channels(&self) -> &[SignalChannel] {
        &self.channels
    }

    pub fn channel(&self, agent: usize) -> &SignalChannel {
        &self.channels[agent]
    }

    pub fn outcome_space(&self) -> &OutcomeSpace {
        &self.outcome_space
    }

    pub fn agent_count(&self) -> usize {
        self.channels.len()
    }

    pub fn world_count(&self) -> usize {
        self.world_space.len()
    }

    pub fn outcome_count(&self) -> usize {
        self.outcome_space.len()
    }

    /// `Π_i |alphabet_i|`.
    pub fn profile_count(&self) -> u128 {
        self.channels
            .iter()
            .map(|c| c.alphabet_len() as u128)
            .product()
    }

    fn check_profile(&self, profile: &ReportProfile) -> Result<()> {
        if profile.symbols.len() != self.agent_count() {
            return Err(Error::ProfileLengthMismatch {
                expected: self.agent_count(),
                got: profile.symbols.len(),
            });
        }
        for (agent, (&sym, ch)) in profile.symbols.iter().zip(&self.channels).enumerate() {
            if sym >= ch.alphabet_len() {
                return Err(Error::SymbolOutOfAlphabet {
                    agent,
                    symbol: sym,
                    alphabet_len: ch.alphabet_len(),
                });
            }
        }
        Ok(())
    }

    /// P(world) · Π_i P(s_i | world).
    pub fn joint_probability(&self, world: usize, profile: &ReportProfile) -> Result<f64> {
        if world >= self.world_count() {
            return Err(Error::UnknownWorld(world));
        }
        self.check_profile(profile)?;
        let mut p = self.world_space.prior()[world];
        for (ch, &sym) in self.channels.iter().zip(&profile.symbols) {
            p *= ch.likelihood(world, sym);
        }
        Ok(p)
    }

    /// Σ_world joint_probability.
    pub fn marginal_probability(&self, profile: &ReportProfile) -> Result<f64> {
        self.check_profile(profile)?;
        let mut total = 0.0;
        for world in 0..self.world_count() {
            let mut p = self.world_space.prior()[world];
            for (ch, &sym) in self.channels.iter().zip(&profile.symbols) {
                p *= ch.likelihood(world, sym);
            }
            total += p;
        }
        Ok(total)
    }

    /// Normalized posterior P(world | profile).
    pub fn posterior_over_worlds(&self, profile: &ReportProfile) -> Result<Vec<f64>> {
        self.check_profile(profile)?;
        let mut joint = Vec::with_capacity(self.world_count());
        let mut total = 0.0;
        for world in 0..self.world_count() {
            let p = self.joint_probability(world, profile)?;
            joint.push(p);
            total += p;
        }
        if total <= 0.0 {
            return Err(Error::ImpossibleProfile);
        }
        for p in &mut joint {
            *p /= total;
        }
        Ok(joint)
    }

    /// Induced welfare W(outcome, profile) = Σ_world P(world | profile) · W(outcome, world).
    pub fn induced_welfare(&self, outcome: usize, profile: &ReportProfile) -> Result<f64> {
        let posterior = self.posterior_over_worlds(profile)?;
        Ok(self.induced_welfare_from_posterior(outcome, &posterior))
    }

    /// Same as [`induced_welfare`](Self::induced_welfare) with a precomputed posterior.
    pub fn induced_welfare_from_posterior(&self, outcome: usize, posterior: &[f64]) -> f64 {
        posterior
            .iter()
            .enumerate()
            .map(|(w, p)| p * self.outcome_space.welfare(outcome, w))
            .sum()
    }

    /// The outcome maximizing induced welfare, ties broken by lowest index.
    pub fn best_outcome(&self, posterior: &[f64]) -> usize {
        let mut best = 0;
        let mut best_w = f64::NEG_INFINITY;
        for x in 0..self.outcome_count() {
            let w = self.induced_welfare_from_posterior(x, posterior);
            if w > best_w {
                best_w = w;
                best = x;
            }
        }
        best
    }

    /// Exhaustively enumerate all report profiles in lexicographic order
    /// (agent 0 most significant) together with their marginal probability.
    pub fn enumerate_profiles(&self, budget: u128) -> Result<ProfileIter<'_>> {
        let count = self.profile_count();
        if count > budget {
            return Err(Error::BudgetExceeded { count, budget });
        }
        Ok(ProfileIter {
            structure: self,
            current: Some(vec![0; self.agent_count()]),
        })
    }

    /// Draw (world, profile) from the joint distribution.
    pub fn sample_realization<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, ReportProfile) {
        let world = sample_index(self.world_space.prior(), rng);
        let symbols = self
            .channels
            .iter()
            .map(|ch| sample_index(&ch.likelihood_rows()[world], rng))
            .collect();
        (world, ReportProfile::new(symbols))
    }
}

/// Lexicographic stream of (profile, marginal probability). Independently
/// restartable via a fresh call to `enumerate_profiles`.
pub struct ProfileIter<'a> {
    structure: &'a InformationStructure,
    current: Option<Vec<usize>>,
}

impl Iterator for ProfileIter<'_> {
    type Item = (ReportProfile, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let symbols = self.current.clone()?;
        let profile = ReportProfile::new(symbols);
        let marginal = self
            .structure
            .marginal_probability(&profile)
            .expect("enumerated profile is valid");
        // advance: last agent varies fastest
        let next = self.current.as_mut().unwrap();
        let mut pos = next.len();
        loop {
            if pos == 0 {
                self.current = None;
                break;
            }
            pos -= 1;
            next[pos] += 1;
            if next[pos] < self.structure.channel(pos).alphabet_len() {
                break;
            }
            next[pos] = 0;
        }
        Some((profile, marginal))
    }
}

/// Inverse-CDF draw from a finite distribution.
fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn check_unique(items: &[String], what: &str) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for item in items {
        if !seen.insert(item) {
            return Err(Error::InvalidStructure(format!(
                "duplicate {what} identifier {item:?}"
            )));
        }
    }
    Ok(())
}

fn check_prob_vector(v: &[f64], what: &str) -> Result<()> {
    for &p in v {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidStructure(format!(
                "{what}: entries must be finite and nonnegative"
            )));
        }
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidStructure(format!(
            "{what}: sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// On-disk scenario schema, row-major matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioJson {
    pub worlds: Vec<String>,
    pub prior: Vec<f64>,
    pub agents: Vec<ScenarioAgentJson>,
    pub outcomes: Vec<String>,
    /// Row-major outcome × world.
    pub welfare: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioAgentJson {
    pub alphabet: Vec<String>,
    /// Row-major world × symbol.
    pub likelihood: Vec<f64>,
}

impl ScenarioJson {
    pub fn from_structure(s: &InformationStructure) -> Self {
        Self {
            worlds: s.world_space().worlds().to_vec(),
            prior: s.world_space().prior().to_vec(),
            agents: s
                .channels()
                .iter()
                .map(|ch| ScenarioAgentJson {
                    alphabet: ch.alphabet().to_vec(),
                    likelihood: ch.likelihood_rows().iter().flatten().copied().collect(),
                })
                .collect(),
            outcomes: s.outcome_space().outcomes().to_vec(),
            welfare: s
                .outcome_space()
                .welfare_rows()
                .iter()
                .flatten()
                .copied()
                .collect(),
        }
    }

    pub fn into_structure(self) -> Result<InformationStructure> {
        let n_worlds = self.worlds.len();
        let world_space = WorldSpace::new(self.worlds, self.prior)?;
        let mut channels = Vec::with_capacity(self.agents.len());
        for (i, agent) in self.agents.into_iter().enumerate() {
            let cols = agent.alphabet.len();
            if cols == 0 || agent.likelihood.len() != n_worlds * cols {
                return Err(Error::InvalidStructure(format!(
                    "agent {i}: likelihood has {} entries, expected {} ({} worlds x {} symbols)",
                    agent.likelihood.len(),
                    n_worlds * cols,
                    n_worlds,
                    cols
                )));
            }
            let rows = agent
                .likelihood
                .chunks(cols)
                .map(|r| r.to_vec())
                .collect::<Vec<_>>();
            channels.push(SignalChannel::new(i, agent.alphabet, rows)?);
        }
        let n_outcomes = self.outcomes.len();
        if n_outcomes == 0 || self.welfare.len() != n_outcomes * n_worlds {
            return Err(Error::InvalidStructure(format!(
                "welfare has {} entries, expected {} ({} outcomes x {} worlds)",
                self.welfare.len(),
                n_outcomes * n_worlds,
                n_outcomes,
                n_worlds
            )));
        }
        let welfare = self
            .welfare
            .chunks(n_worlds)
            .map(|r| r.to_vec())
            .collect::<Vec<_>>();
        let outcome_space = OutcomeSpace::new(self.outcomes, welfare)?;
        InformationStructure::new(world_space, channels, outcome_space)
    }
}
