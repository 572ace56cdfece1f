//! The mechanism's world model, as an abstract interface with three
//! backends:
//!
//! * `exact` — full Bayesian posterior over worlds, welfare-maximizing
//!   outcome selection, leave-one-out posterior-predictive consistency.
//! * `degraded` — as exact, but with probability `q` the selected outcome
//!   is replaced by a uniform draw over the remaining outcomes. Used to
//!   probe approximate-efficiency behaviour as model quality drops.
//! * `external` — a subprocess speaking newline-delimited JSON, the
//!   extension point for plugging in a real model.
//!
//! The forecasting error is the Brier score of the posterior over worlds
//! against the realized world. The consistency score is the mean
//! leave-one-out posterior predictive `c(r) = (1/n) Σ_i P(r_i | r_{-i})`;
//! an alternative (normalized profile likelihood) would also work but is
//! not implemented.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{InformationStructure, ReportProfile, ScenarioJson};

pub const DEFAULT_EXTERNAL_TIMEOUT_SECS: f64 = 30.0;

/// Which world-model backend to use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum OracleSpec {
    Exact,
    Degraded {
        /// Outcome-flip probability, in [0, 1).
        q: f64,
    },
    External {
        /// Program plus arguments.
        command: Vec<String>,
        timeout_secs: f64,
    },
}

impl OracleSpec {
    pub fn exact() -> Self {
        OracleSpec::Exact
    }

    pub fn degraded(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!(
                "degradation q must be in [0, 1], got {q}"
            )));
        }
        Ok(OracleSpec::Degraded { q })
    }

    pub fn external(command: Vec<String>, timeout_secs: f64) -> Result<Self> {
        if command.is_empty() {
            return Err(Error::InvalidParameter("empty external command".into()));
        }
        if !(timeout_secs > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "timeout must be positive, got {timeout_secs}"
            )));
        }
        Ok(OracleSpec::External {
            command,
            timeout_secs,
        })
    }
}

/// The world model's full response to a report profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub posterior_worlds: Vec<f64>,
    pub forecast_outcomes: Vec<f64>,
    pub selected_outcome: usize,
    pub consistency: f64,
}

impl OracleVerdict {
    /// Check normalization and range invariants against a structure.
    pub fn validate(&self, structure: &InformationStructure) -> Result<()> {
        check_normalized(&self.posterior_worlds, structure.world_count(), "posterior_worlds")?;
        check_normalized(&self.forecast_outcomes, structure.outcome_count(), "forecast_outcomes")?;
        if self.selected_outcome >= structure.outcome_count() {
            return Err(Error::MalformedVerdict(format!(
                "selected_outcome {} out of range",
                self.selected_outcome
            )));
        }
        if !(0.0..=1.0).contains(&self.consistency) {
            return Err(Error::MalformedVerdict(format!(
                "consistency {} outside [0, 1]",
                self.consistency
            )));
        }
        Ok(())
    }
}

fn check_normalized(v: &[f64], expected_len: usize, what: &str) -> Result<()> {
    if v.len() != expected_len {
        return Err(Error::MalformedVerdict(format!(
            "{what} has {} entries, expected {expected_len}",
            v.len()
        )));
    }
    if v.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::MalformedVerdict(format!(
            "{what} has negative or non-finite entries"
        )));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::MalformedVerdict(format!(
            "{what} sums to {sum}, expected 1 within 1e-9"
        )));
    }
    Ok(())
}

/// Mean leave-one-out posterior predictive `c(r) = (1/n) Σ_i P(r_i | r_{-i})`.
///
/// A term whose conditioning event has zero probability contributes 0, so
/// the score is defined for impossible profiles as well. For a single
/// agent the conditioning set is empty and the term is the prior
/// predictive `P(r_1)`.
pub fn consistency(structure: &InformationStructure, profile: &ReportProfile) -> Result<f64> {
    let joint = structure.marginal_probability(profile)?;
    let n = structure.agent_count();
    let mut total = 0.0;
    for agent in 0..n {
        let mut denom = 0.0;
        let mut alt = profile.clone();
        for sym in 0..structure.channel(agent).alphabet_len() {
            alt.symbols[agent] = sym;
            denom += structure.marginal_probability(&alt)?;
        }
        if denom > 0.0 {
            total += joint / denom;
        }
    }
    Ok(total / n as f64)
}

/// Brier score of the verdict's posterior over worlds against the realized
/// world: `Σ_w (p_w − 1{w = realized})²`, in [0, 2].
pub fn forecasting_error(verdict: &OracleVerdict, realized_world: usize) -> f64 {
    brier_score(&verdict.posterior_worlds, realized_world)
}

/// Brier score of an arbitrary forecast vector against a realized index.
pub fn brier_score(forecast: &[f64], realized: usize) -> f64 {
    forecast
        .iter()
        .enumerate()
        .map(|(w, &p)| {
            let target = if w == realized { 1.0 } else { 0.0 };
            (p - target) * (p - target)
        })
        .sum()
}

/// A world-model instance. Exact and degraded backends are pure given
/// their RNG; the external backend holds one subprocess with at most one
/// in-flight request.
pub struct Oracle {
    spec: OracleSpec,
    client: Option<ExternalClient>,
}

impl Oracle {
    pub fn new(spec: OracleSpec) -> Self {
        Self { spec, client: None }
    }

    pub fn spec(&self) -> &OracleSpec {
        &self.spec
    }

    /// Evaluate a report profile. Deterministic given (spec, structure,
    /// profile, RNG state).
    pub fn evaluate<R: Rng + ?Sized>(
        &mut self,
        structure: &InformationStructure,
        profile: &ReportProfile,
        rng: &mut R,
    ) -> Result<OracleVerdict> {
        match &self.spec {
            OracleSpec::Exact => exact_verdict(structure, profile),
            OracleSpec::Degraded { q } => {
                let q = *q;
                let mut verdict = exact_verdict(structure, profile)?;
                let m = structure.outcome_count();
                let u: f64 = rng.random();
                if u < q && m > 1 {
                    let mut pick = rng.random_range(0..m - 1);
                    if pick >= verdict.selected_outcome {
                        pick += 1;
                    }
                    verdict.selected_outcome = pick;
                }
                Ok(verdict)
            }
            OracleSpec::External {
                command,
                timeout_secs,
            } => {
                if self.client.is_none() {
                    self.client = Some(ExternalClient::spawn(command, *timeout_secs)?);
                }
                let verdict = self
                    .client
                    .as_mut()
                    .unwrap()
                    .request(structure, profile)?;
                verdict.validate(structure)?;
                Ok(verdict)
            }
        }
    }
}

fn exact_verdict(
    structure: &InformationStructure,
    profile: &ReportProfile,
) -> Result<OracleVerdict> {
    let posterior = structure.posterior_over_worlds(profile)?;
    let selected = structure.best_outcome(&posterior);

    // Forecast over outcomes: posterior mass on each outcome being the
    // per-world welfare maximizer.
    let mut forecast = vec![0.0; structure.outcome_count()];
    for (w, &p) in posterior.iter().enumerate() {
        let mut best = 0;
        let mut best_w = f64::NEG_INFINITY;
        for x in 0..structure.outcome_count() {
            let v = structure.outcome_space().welfare(x, w);
            if v > best_w {
                best_w = v;
                best = x;
            }
        }
        forecast[best] += p;
    }

    let c = consistency(structure, profile)?;
    Ok(OracleVerdict {
        posterior_worlds: posterior,
        forecast_outcomes: forecast,
        selected_outcome: selected,
        consistency: c,
    })
}

#[derive(Serialize)]
struct WireRequest<'a> {
    id: u64,
    structure: &'a ScenarioJson,
    profile: &'a [usize],
}

#[derive(Deserialize)]
struct WireReply {
    id: u64,
    posterior_worlds: Vec<f64>,
    selected_outcome: usize,
    consistency: f64,
}

struct ExternalClient {
    child: Child,
    stdin: ChildStdin,
    lines: mpsc::Receiver<std::io::Result<String>>,
    timeout: Duration,
    next_id: u64,
}

impl ExternalClient {
    fn spawn(command: &[String], timeout_secs: f64) -> Result<Self> {
        let mut child = Command::new(&command[0])
            .args(&command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::Backend {
                message: format!("failed to spawn {:?}: {e}", command[0]),
                payload: None,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
            timeout: Duration::from_secs_f64(timeout_secs),
            next_id: 0,
        })
    }

    fn request(
        &mut self,
        structure: &InformationStructure,
        profile: &ReportProfile,
    ) -> Result<OracleVerdict> {
        let id = self.next_id;
        self.next_id += 1;

        let scenario = ScenarioJson::from_structure(structure);
        let request = WireRequest {
            id,
            structure: &scenario,
            profile: &profile.symbols,
        };
        let mut line = serde_json::to_string(&request)?;
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| Error::Backend {
                message: format!("writing request to backend: {e}"),
                payload: None,
            })?;

        let deadline = Instant::now() + self.timeout;
        loop {
            let remaining = deadline
                .checked_duration_since(Instant::now())
                .ok_or_else(|| Error::Backend {
                    message: "timed out waiting for backend reply".into(),
                    payload: None,
                })?;
            let line = match self.lines.recv_timeout(remaining) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => {
                    return Err(Error::Backend {
                        message: format!("reading backend reply: {e}"),
                        payload: None,
                    })
                }
                Err(mpsc::RecvTimeoutError::Timeout) => {
                    return Err(Error::Backend {
                        message: "timed out waiting for backend reply".into(),
                        payload: None,
                    })
                }
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    return Err(Error::Backend {
                        message: "backend closed its stdout".into(),
                        payload: None,
                    })
                }
            };
            let reply: WireReply = match serde_json::from_str(&line) {
                Ok(reply) => reply,
                Err(e) => {
                    return Err(Error::Backend {
                        message: format!("malformed backend reply: {e}"),
                        payload: Some(line),
                    })
                }
            };
            if reply.id != id {
                // stale reply from an earlier timed-out request
                continue;
            }
            return Ok(OracleVerdict {
                forecast_outcomes: point_mass(
                    structure.outcome_count(),
                    reply.selected_outcome,
                ),
                posterior_worlds: reply.posterior_worlds,
                selected_outcome: reply.selected_outcome,
                consistency: reply.consistency,
            });
        }
    }
}

fn point_mass(len: usize, at: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    if at < len {
        v[at] = 1.0;
    }
    v
}

impl Drop for ExternalClient {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
