//! Executable condition checks: inter-agent information
//! over-determination (observable and zero-shot settings), information
//! monotonicity, incentive compatibility under either payment rule, and
//! δ-sufficiency of the world model.
//!
//! Every check quantifies over all pure deviation maps per agent
//! (`|A|^|A|` maps, identity excluded) with the other agents truthful,
//! and returns a certificate with per-deviation margins. Margins are
//! oriented so that positive is good:
//!
//! * over-determination (observable): `E[ε(dev)] − E[ε(truth)]`, strict;
//! * over-determination (zero-shot): `E[c(truth)] − E[c(dev)]`, strict;
//! * information monotonicity: `E[ε(dev)] − E[ε(truth)]`, weak;
//! * incentive compatibility: `E[t(truth)] − E[t(dev)]`, weak.
//!
//! Exhaustive certificates are deterministic; Monte Carlo certificates
//! are paired-sample estimates that reproduce exactly under a fixed seed
//! and use a 3-standard-error decision threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{InformationStructure, ReportProfile, DEFAULT_ENUM_BUDGET};
use crate::mechanism::{DeviationMap, EvalMode, PaymentRule, ProfileStatsCache};
use crate::oracle::{self, Oracle, OracleSpec};
use crate::rng;
use crate::scenarios::{self, ErrorTable, RandomBounds};

/// Numerical slack for weak-inequality verdicts.
pub const WEAK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionKind {
    #[serde(rename = "OD_observable")]
    OdObservable,
    #[serde(rename = "OD_zero_shot")]
    OdZeroShot,
    #[serde(rename = "IM")]
    InformationMonotonicity,
    #[serde(rename = "IC")]
    IncentiveCompatibility,
    #[serde(rename = "delta_efficiency")]
    DeltaEfficiency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub agent: usize,
    /// The deviation map's image, indexed by true symbol.
    pub deviation: Vec<usize>,
    pub truthful: f64,
    pub deviating: f64,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
}

/// Per-(true symbol, report) conditional margin for one agent, reported
/// alongside the map-level margins on over-determination checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionalMargin {
    pub agent: usize,
    pub true_symbol: usize,
    pub report: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionCertificate {
    pub condition: ConditionKind,
    pub verdict: Verdict,
    pub mode: EvalMode,
    /// Violations when the verdict is `fails`; the minimum-margin entry
    /// when it `holds`.
    pub witnesses: Vec<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_measured: Option<f64>,
    /// Constant added to welfare before the δ ratio when the structure
    /// has negative welfare entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub welfare_shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conditional_margins: Vec<ConditionalMargin>,
}

impl ConditionCertificate {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub mode: EvalMode,
    pub seed: u64,
    pub budget: u128,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            mode: EvalMode::Exhaustive,
            seed: 0,
            budget: DEFAULT_ENUM_BUDGET,
        }
    }
}

/// What a deviation changes, per report profile (and realized world where
/// relevant).
enum Metric<'a> {
    /// Realized Brier score of the model's posterior.
    OracleBrier,
    /// World-independent error table.
    Table(&'a ErrorTable),
    /// Consistency score.
    Consistency,
    /// Payment under a rule.
    Payment(PaymentRule),
}

impl Metric<'_> {
    fn world_dependent(&self) -> bool {
        matches!(
            self,
            Metric::OracleBrier | Metric::Payment(PaymentRule::Observable { .. })
        )
    }

    fn eval(
        &self,
        cache: &mut ProfileStatsCache<'_>,
        reports: &ReportProfile,
        world: usize,
    ) -> Result<f64> {
        match self {
            Metric::OracleBrier => {
                let (posterior, _) = cache.stats(reports)?;
                let posterior = posterior.ok_or(Error::ImpossibleProfile)?;
                Ok(oracle::brier_score(&posterior, world))
            }
            Metric::Table(table) => Ok(table.value(reports)),
            Metric::Consistency => Ok(cache.stats(reports)?.1),
            Metric::Payment(rule) => cache.payment(rule, reports, world),
        }
    }
}

/// Exact `E[metric(dev(s), s_{-i}; ω)]` over the joint distribution.
fn expected_metric_exhaustive(
    structure: &InformationStructure,
    cache: &mut ProfileStatsCache<'_>,
    metric: &Metric<'_>,
    deviation: &DeviationMap,
    budget: u128,
) -> Result<f64> {
    let mut total = 0.0;
    for (signals, marginal) in structure.enumerate_profiles(budget)? {
        if marginal == 0.0 {
            continue;
        }
        let reports = deviation.apply(&signals);
        if metric.world_dependent() {
            for world in 0..structure.world_count() {
                let p = structure.joint_probability(world, &signals)?;
                if p > 0.0 {
                    total += p * metric.eval(cache, &reports, world)?;
                }
            }
        } else {
            total += marginal * metric.eval(cache, &reports, 0)?;
        }
    }
    Ok(total)
}

/// Paired Monte Carlo estimate of `(E[truth], E[dev], E[dev − truth], SE)`.
fn paired_metric_mc(
    structure: &InformationStructure,
    cache: &mut ProfileStatsCache<'_>,
    metric: &Metric<'_>,
    deviation: &DeviationMap,
    trials: u64,
    seed: u64,
) -> Result<(f64, f64, f64, f64)> {
    let label = format!("verifier.pair.{}.{:?}", deviation.agent, deviation.map);
    let mut rng = rng::stream(seed, &label);
    let mut sum_t = 0.0;
    let mut sum_d = 0.0;
    let mut sum_diff = 0.0;
    let mut sum_diff_sq = 0.0;
    for _ in 0..trials {
        let (world, signals) = structure.sample_realization(&mut rng);
        let reports = deviation.apply(&signals);
        let t = metric.eval(cache, &signals, world)?;
        let d = metric.eval(cache, &reports, world)?;
        sum_t += t;
        sum_d += d;
        let diff = d - t;
        sum_diff += diff;
        sum_diff_sq += diff * diff;
    }
    let n = trials as f64;
    let mean_diff = sum_diff / n;
    let var = ((sum_diff_sq / n) - mean_diff * mean_diff).max(0.0) * n / (n - 1.0).max(1.0);
    Ok((sum_t / n, sum_d / n, mean_diff, (var / n).sqrt()))
}

/// How the margin relates to the truthful/deviating expectations, and
/// whether the inequality is strict.
struct MarginSpec {
    condition: ConditionKind,
    /// `true`: margin = deviating − truthful (error-like metrics);
    /// `false`: margin = truthful − deviating (value-like metrics).
    deviating_minus_truthful: bool,
    strict: bool,
}

fn deviation_sweep(
    structure: &InformationStructure,
    cache: &mut ProfileStatsCache<'_>,
    metric: &Metric<'_>,
    spec: MarginSpec,
    opts: &VerifyOptions,
) -> Result<ConditionCertificate> {
    let mut witnesses = Vec::new();
    let mut min_entry: Option<Witness> = None;

    for agent in 0..structure.agent_count() {
        let alphabet_len = structure.channel(agent).alphabet_len();
        let truthful_exhaustive = match opts.mode {
            EvalMode::Exhaustive => Some(expected_metric_exhaustive(
                structure,
                cache,
                metric,
                &DeviationMap::identity(agent, alphabet_len),
                opts.budget,
            )?),
            EvalMode::MonteCarlo { .. } => None,
        };
        for deviation in DeviationMap::all_for_agent(agent, alphabet_len) {
            if deviation.is_identity() {
                continue;
            }
            let (truthful, deviating, stderr) = match opts.mode {
                EvalMode::Exhaustive => {
                    let d = expected_metric_exhaustive(
                        structure, cache, metric, &deviation, opts.budget,
                    )?;
                    (truthful_exhaustive.unwrap(), d, None)
                }
                EvalMode::MonteCarlo { trials } => {
                    let (t, d, _, se) = paired_metric_mc(
                        structure, cache, metric, &deviation, trials, opts.seed,
                    )?;
                    (t, d, Some(se))
                }
            };
            let margin = if spec.deviating_minus_truthful {
                deviating - truthful
            } else {
                truthful - deviating
            };
            let threshold = match (spec.strict, stderr) {
                (true, None) => 0.0,
                (true, Some(se)) => 3.0 * se,
                (false, None) => -WEAK_TOL,
                (false, Some(se)) => -3.0 * se,
            };
            let violated = if spec.strict {
                margin <= threshold
            } else {
                margin < threshold
            };
            let witness = Witness {
                agent,
                deviation: deviation.map.clone(),
                truthful,
                deviating,
                margin,
                stderr,
            };
            if violated {
                witnesses.push(witness.clone());
            }
            if min_entry
                .as_ref()
                .map(|w| margin < w.margin)
                .unwrap_or(true)
            {
                min_entry = Some(witness);
            }
        }
    }

    let verdict = if witnesses.is_empty() {
        Verdict::Holds
    } else {
        Verdict::Fails
    };
    let min_margin = min_entry.as_ref().map(|w| w.margin);
    if witnesses.is_empty() {
        if let Some(w) = min_entry {
            witnesses.push(w);
        }
    }
    Ok(ConditionCertificate {
        condition: spec.condition,
        verdict,
        mode: opts.mode,
        witnesses,
        min_margin,
        delta_measured: None,
        welfare_shift: None,
        conditional_margins: Vec::new(),
    })
}

/// Per-(true symbol, report) conditional margins for over-determination
/// checks in exhaustive mode.
fn conditional_margins(
    structure: &InformationStructure,
    cache: &mut ProfileStatsCache<'_>,
    metric: &Metric<'_>,
    deviating_minus_truthful: bool,
    budget: u128,
) -> Result<Vec<ConditionalMargin>> {
    let mut out = Vec::new();
    for agent in 0..structure.agent_count() {
        let alphabet_len = structure.channel(agent).alphabet_len();
        for true_symbol in 0..alphabet_len {
            // P(s_i = a) and conditional expectations in one sweep
            let mut mass = 0.0;
            let mut diff = vec![0.0; alphabet_len];
            for (signals, marginal) in structure.enumerate_profiles(budget)? {
                if signals.symbols[agent] != true_symbol || marginal == 0.0 {
                    continue;
                }
                mass += marginal;
                for report in 0..alphabet_len {
                    if report == true_symbol {
                        continue;
                    }
                    let mut reports = signals.clone();
                    reports.symbols[agent] = report;
                    if metric.world_dependent() {
                        for world in 0..structure.world_count() {
                            let p = structure.joint_probability(world, &signals)?;
                            if p > 0.0 {
                                diff[report] += p
                                    * (metric.eval(cache, &reports, world)?
                                        - metric.eval(cache, &signals, world)?);
                            }
                        }
                    } else {
                        diff[report] += marginal
                            * (metric.eval(cache, &reports, 0)?
                                - metric.eval(cache, &signals, 0)?);
                    }
                }
            }
            if mass == 0.0 {
                continue;
            }
            for report in 0..alphabet_len {
                if report == true_symbol {
                    continue;
                }
                let raw = diff[report] / mass;
                out.push(ConditionalMargin {
                    agent,
                    true_symbol,
                    report,
                    margin: if deviating_minus_truthful { raw } else { -raw },
                });
            }
        }
    }
    Ok(out)
}

fn with_conditionals(
    mut cert: ConditionCertificate,
    structure: &InformationStructure,
    cache: &mut ProfileStatsCache<'_>,
    metric: &Metric<'_>,
    deviating_minus_truthful: bool,
    opts: &VerifyOptions,
) -> Result<ConditionCertificate> {
    if matches!(opts.mode, EvalMode::Exhaustive) {
        cert.conditional_margins = conditional_margins(
            structure,
            cache,
            metric,
            deviating_minus_truthful,
            opts.budget,
        )?;
    }
    Ok(cert)
}

/// Def 2, observable setting: every unilateral misreport must strictly
/// raise the expected forecasting error.
pub fn check_over_determination_observable(
    structure: &InformationStructure,
    oracle_spec: &OracleSpec,
    opts: &VerifyOptions,
) -> Result<ConditionCertificate> {
    let mut cache = ProfileStatsCache::new(structure, oracle_spec, opts.seed);
    let metric = Metric::OracleBrier;
    let cert = deviation_sweep(
        structure,
        &mut cache,
        &metric,
        MarginSpec {
            condition: ConditionKind::OdObservable,
            deviating_minus_truthful: true,
            strict: true,
        },
        opts,
    )?;
    with_conditionals(cert, structure, &mut cache, &metric, true, opts)
}

/// Def 2, zero-shot setting: every unilateral misreport must strictly
/// lower the expected consistency score.
pub fn check_over_determination_zero_shot(
    structure: &InformationStructure,
    oracle_spec: &OracleSpec,
    opts: &VerifyOptions,
) -> Result<ConditionCertificate> {
    let mut cache = ProfileStatsCache::new(structure, oracle_spec, opts.seed);
    let metric = Metric::Consistency;
    let cert = deviation_sweep(
        structure,
        &mut cache,
        &metric,
        MarginSpec {
            condition: ConditionKind::OdZeroShot,
            deviating_minus_truthful: false,
            strict: true,
        },
        opts,
    )?;
    with_conditionals(cert, structure, &mut cache, &metric, false, opts)
}

/// Weak counterpart of the observable condition: no misreport may lower
/// expected forecasting error.
pub fn check_information_monotonicity(
    structure: &InformationStructure,
    oracle_spec: &OracleSpec,
    opts: &VerifyOptions,
) -> Result<ConditionCertificate> {
    let mut cache = ProfileStatsCache::new(structure, oracle_spec, opts.seed);
    deviation_sweep(
        structure,
        &mut cache,
        &Metric::OracleBrier,
        MarginSpec {
            condition: ConditionKind::InformationMonotonicity,
            deviating_minus_truthful: true,
            strict: false,
        },
        opts,
    )
}

/// Observable over-determination against a literal error table instead of
/// the model-induced Brier score.
pub fn check_over_determination_table(
    structure: &InformationStructure,
    table: &ErrorTable,
    opts: &VerifyOptions,
) -> Result<ConditionCertificate> {
    let mut cache = ProfileStatsCache::new(structure, &OracleSpec::Exact, opts.seed);
    deviation_sweep(
        structure,
        &mut cache,
        &Metric::Table(table),
        MarginSpec {
            condition: ConditionKind::OdObservable,
            deviating_minus_truthful: true,
            strict: true,
        },
        opts,
    )
}

/// Information monotonicity against a literal error table.
pub fn check_information_monotonicity_table(
    structure: &InformationStructure,
    table: &ErrorTable,
    opts: &VerifyOptions,
) -> Result<ConditionCertificate> {
    let mut cache = ProfileStatsCache::new(structure, &OracleSpec::Exact, opts.seed);
    deviation_sweep(
        structure,
        &mut cache,
        &Metric::Table(table),
        MarginSpec {
            condition: ConditionKind::InformationMonotonicity,
            deviating_minus_truthful: true,
            strict: false,
        },
        opts,
    )
}

/// Truthful reporting is a best response in expectation under `rule`.
pub fn check_incentive_compatibility(
    structure: &InformationStructure,
    oracle_spec: &OracleSpec,
    rule: &PaymentRule,
    opts: &VerifyOptions,
) -> Result<ConditionCertificate> {
    let mut cache = ProfileStatsCache::new(structure, oracle_spec, opts.seed);
    deviation_sweep(
        structure,
        &mut cache,
        &Metric::Payment(*rule),
        MarginSpec {
            condition: ConditionKind::IncentiveCompatibility,
            deviating_minus_truthful: false,
            strict: false,
        },
        opts,
    )
}

/// Expected welfare of the model's selected outcome vs the per-profile
/// optimum, as a ratio: holds iff `E[W(x*)] ≥ (1 − δ) · E[W(x_opt)]`.
///
/// Welfare is shifted by a reported constant when negative entries are
/// present, since the ratio form is ill-posed under sign changes.
pub fn check_delta_sufficiency(
    structure: &InformationStructure,
    oracle_spec: &OracleSpec,
    delta: f64,
    opts: &VerifyOptions,
) -> Result<ConditionCertificate> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "delta must be in [0, 1), got {delta}"
        )));
    }
    let min_welfare = structure
        .outcome_space()
        .welfare_rows()
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let shift = if min_welfare < 0.0 { -min_welfare } else { 0.0 };
    let shifted = |x: usize, w: usize| structure.outcome_space().welfare(x, w) + shift;

    let (e_star, e_opt) = match opts.mode {
        EvalMode::Exhaustive => {
            let mut e_star = 0.0;
            let mut e_opt = 0.0;
            let mut oracle = Oracle::new(oracle_spec.clone());
            for (signals, marginal) in structure.enumerate_profiles(opts.budget)? {
                if marginal == 0.0 {
                    continue;
                }
                let posterior = structure.posterior_over_worlds(&signals)?;
                let best = structure.best_outcome(&posterior);
                for (world, &post) in posterior.iter().enumerate() {
                    let p = marginal * post;
                    if p == 0.0 {
                        continue;
                    }
                    e_opt += p * shifted(best, world);
                    match oracle_spec {
                        OracleSpec::Exact => e_star += p * shifted(best, world),
                        OracleSpec::Degraded { q } => {
                            // expectation over the outcome flip, in closed form
                            let m = structure.outcome_count();
                            if m > 1 {
                                let others: f64 = (0..m)
                                    .filter(|&x| x != best)
                                    .map(|x| shifted(x, world))
                                    .sum::<f64>()
                                    / (m - 1) as f64;
                                e_star += p * ((1.0 - q) * shifted(best, world) + q * others);
                            } else {
                                e_star += p * shifted(best, world);
                            }
                        }
                        OracleSpec::External { .. } => {
                            let mut rng = rng::stream(opts.seed, "verifier.delta.external");
                            let verdict = oracle.evaluate(structure, &signals, &mut rng)?;
                            e_star += p * shifted(verdict.selected_outcome, world);
                        }
                    }
                }
            }
            (e_star, e_opt)
        }
        EvalMode::MonteCarlo { trials } => {
            let mut rng = rng::stream(opts.seed, "verifier.delta.mc");
            let mut oracle = Oracle::new(oracle_spec.clone());
            let mut sum_star = 0.0;
            let mut sum_opt = 0.0;
            for _ in 0..trials {
                let (world, signals) = structure.sample_realization(&mut rng);
                let verdict = oracle.evaluate(structure, &signals, &mut rng)?;
                let best = structure.best_outcome(&verdict.posterior_worlds);
                sum_star += shifted(verdict.selected_outcome, world);
                sum_opt += shifted(best, world);
            }
            (sum_star / trials as f64, sum_opt / trials as f64)
        }
    };

    if e_opt <= 0.0 {
        return Err(Error::DegenerateWelfare);
    }
    let delta_measured = 1.0 - e_star / e_opt;
    let verdict = if delta_measured <= delta + WEAK_TOL {
        Verdict::Holds
    } else {
        Verdict::Fails
    };
    Ok(ConditionCertificate {
        condition: ConditionKind::DeltaEfficiency,
        verdict,
        mode: opts.mode,
        witnesses: Vec::new(),
        min_margin: None,
        delta_measured: Some(delta_measured),
        welfare_shift: if shift > 0.0 { Some(shift) } else { None },
        conditional_margins: Vec::new(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImplicationSummary {
    pub checked: usize,
    pub od_holds: usize,
    /// Structure seeds where over-determination held but monotonicity
    /// failed. Any entry is an implementation bug, not a property of the
    /// theory.
    pub violations: Vec<u64>,
}

/// Sample `count` random structures and confirm that over-determination
/// (observable) implies information monotonicity on every one.
pub fn check_od_implies_im(
    bounds: &RandomBounds,
    count: usize,
    seed: u64,
) -> Result<ImplicationSummary> {
    let mut summary = ImplicationSummary {
        checked: 0,
        od_holds: 0,
        violations: Vec::new(),
    };
    for i in 0..count {
        let structure_seed = seed.wrapping_add(i as u64);
        let structure = scenarios::build_random(bounds, structure_seed)?;
        let opts = VerifyOptions {
            mode: EvalMode::Exhaustive,
            seed: structure_seed,
            budget: DEFAULT_ENUM_BUDGET,
        };
        let od = check_over_determination_observable(&structure, &OracleSpec::Exact, &opts)?;
        summary.checked += 1;
        if od.holds() {
            summary.od_holds += 1;
            let im = check_information_monotonicity(&structure, &OracleSpec::Exact, &opts)?;
            if !im.holds() {
                summary.violations.push(structure_seed);
            }
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::{
        InformationStructure, OutcomeSpace, SignalChannel, WorldSpace,
    };
    use crate::scenarios::{build_prop2_counterexample, build_xor, build_xor_with_noise_agents};

    fn xor() -> InformationStructure {
        build_xor(2.0 / 3.0, 3).unwrap()
    }

    fn opts() -> VerifyOptions {
        VerifyOptions::default()
    }

    fn single_agent(prior: Vec<f64>) -> InformationStructure {
        let ws = WorldSpace::new(vec!["w0".into(), "w1".into()], prior).unwrap();
        let ch = SignalChannel::new(
            0,
            vec!["0".into(), "1".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let os = OutcomeSpace::new(
            vec!["x0".into(), "x1".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        InformationStructure::new(ws, vec![ch], os).unwrap()
    }

    #[test]
    fn xor_od_observable_holds_with_golden_margin() {
        let cert =
            check_over_determination_observable(&xor(), &OracleSpec::Exact, &opts()).unwrap();
        assert!(cert.holds());
        // worst deviation loses exactly 8680/177147 in expected error
        let min = cert.min_margin.unwrap();
        assert!((min - 8680.0 / 177147.0).abs() < 1e-12, "min {min}");
        assert_eq!(cert.witnesses.len(), 1);
        assert!(!cert.conditional_margins.is_empty());
        for cm in &cert.conditional_margins {
            assert!(cm.margin > 0.0 || cm.true_symbol == cm.report);
        }
    }

    #[test]
    fn xor_od_zero_shot_holds_with_golden_margin() {
        let cert =
            check_over_determination_zero_shot(&xor(), &OracleSpec::Exact, &opts()).unwrap();
        assert!(cert.holds());
        let min = cert.min_margin.unwrap();
        assert!((min - 1.0 / 270.0).abs() < 1e-12, "min {min}");
    }

    #[test]
    fn xor_information_monotonicity_and_ic_hold() {
        let s = xor();
        assert!(check_information_monotonicity(&s, &OracleSpec::Exact, &opts())
            .unwrap()
            .holds());
        let obs = PaymentRule::observable(1.0, 2.0).unwrap();
        let ic = check_incentive_compatibility(&s, &OracleSpec::Exact, &obs, &opts()).unwrap();
        assert!(ic.holds());
        // with alpha = 1 the payment margin equals the error margin
        assert!((ic.min_margin.unwrap() - 8680.0 / 177147.0).abs() < 1e-12);
        let zs = PaymentRule::zero_shot(1.0).unwrap();
        let ic_zs = check_incentive_compatibility(&s, &OracleSpec::Exact, &zs, &opts()).unwrap();
        assert!(ic_zs.holds());
        assert!((ic_zs.min_margin.unwrap() - 1.0 / 270.0).abs() < 1e-12);
    }

    #[test]
    fn noise_agent_breaks_strict_od_but_not_weak_im() {
        let s = build_xor_with_noise_agents(2.0 / 3.0, 2, &[3]).unwrap();
        let od = check_over_determination_observable(&s, &OracleSpec::Exact, &opts()).unwrap();
        assert!(!od.holds());
        // the noise agent's deviations shift the expectation by exactly 0
        assert!(od
            .witnesses
            .iter()
            .all(|w| w.agent == 3 && w.margin.abs() < 1e-12));
        let im = check_information_monotonicity(&s, &OracleSpec::Exact, &opts()).unwrap();
        assert!(im.holds());
    }

    #[test]
    fn single_agent_noiseless_od_observable_holds() {
        let cert = check_over_determination_observable(
            &single_agent(vec![0.5, 0.5]),
            &OracleSpec::Exact,
            &opts(),
        )
        .unwrap();
        assert!(cert.holds());
        // constant maps are wrong half the time (expected error 1); the
        // flip map is always wrong (error 2); truth scores 0
        assert!((cert.min_margin.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_agent_od_zero_shot_fails() {
        // uniform prior: every unilateral report has the same prior
        // predictive mass, so no deviation is strictly worse
        let uniform = check_over_determination_zero_shot(
            &single_agent(vec![0.5, 0.5]),
            &OracleSpec::Exact,
            &opts(),
        )
        .unwrap();
        assert!(!uniform.holds());
        assert!(uniform.min_margin.unwrap().abs() < 1e-12);

        // non-uniform prior: always reporting the modal symbol strictly
        // beats truth-telling (0.7 vs prior-weighted 0.58)
        let skewed = check_over_determination_zero_shot(
            &single_agent(vec![0.7, 0.3]),
            &OracleSpec::Exact,
            &opts(),
        )
        .unwrap();
        assert!(!skewed.holds());
        let worst = skewed
            .witnesses
            .iter()
            .map(|w| w.margin)
            .fold(f64::INFINITY, f64::min);
        assert!((worst - (0.58 - 0.7)).abs() < 1e-12, "worst {worst}");
    }

    #[test]
    fn literal_table_splits_monotonicity_from_over_determination() {
        // two pure-noise agents with the agreement table e(r) = 1{r1 != r2}:
        // expectation is 1/2 under truth and every unilateral deviation,
        // so monotonicity holds weakly while over-determination fails
        let (s, table) = build_prop2_counterexample();
        let im = check_information_monotonicity_table(&s, &table, &opts()).unwrap();
        assert!(im.holds());
        assert!(im.min_margin.unwrap().abs() < 1e-12);
        let od = check_over_determination_table(&s, &table, &opts()).unwrap();
        assert!(!od.holds());
        for w in &od.witnesses {
            assert!(w.margin.abs() < 1e-12);
            assert!((w.truthful - 0.5).abs() < 1e-12);
            assert!((w.deviating - 0.5).abs() < 1e-12);
        }
        // the model-induced error on the same structure is constant too
        let induced = check_over_determination_observable(&s, &OracleSpec::Exact, &opts()).unwrap();
        assert!(!induced.holds());
    }

    #[test]
    fn delta_sufficiency_exact_and_degraded() {
        let s = xor();
        let exact = check_delta_sufficiency(&s, &OracleSpec::Exact, 0.0, &opts()).unwrap();
        assert!(exact.holds());
        assert!(exact.delta_measured.unwrap().abs() < 1e-12);

        // measured delta is linear in q: q * (1 - 280/449); at q = 0.1
        // that is 169/4490
        let spec = OracleSpec::degraded(0.1).unwrap();
        let d = check_delta_sufficiency(&s, &spec, 0.5, &opts()).unwrap();
        assert!(d.holds());
        assert!((d.delta_measured.unwrap() - 169.0 / 4490.0).abs() < 1e-12);
        let tight = check_delta_sufficiency(&s, &spec, 0.01, &opts()).unwrap();
        assert!(!tight.holds());

        let half = check_delta_sufficiency(&s, &OracleSpec::degraded(0.5).unwrap(), 0.5, &opts())
            .unwrap();
        assert!((half.delta_measured.unwrap() - 169.0 / 898.0).abs() < 1e-12);
    }

    #[test]
    fn delta_sufficiency_shifts_negative_welfare() {
        let ws = WorldSpace::new(vec!["w0".into(), "w1".into()], vec![0.5, 0.5]).unwrap();
        let ch = SignalChannel::new(
            0,
            vec!["0".into(), "1".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let os = OutcomeSpace::new(
            vec!["x0".into(), "x1".into()],
            vec![vec![1.0, -1.0], vec![-1.0, 1.0]],
        )
        .unwrap();
        let s = InformationStructure::new(ws, vec![ch], os).unwrap();
        let cert = check_delta_sufficiency(&s, &OracleSpec::Exact, 0.0, &opts()).unwrap();
        assert!(cert.holds());
        assert_eq!(cert.welfare_shift, Some(1.0));
    }

    #[test]
    fn delta_rejects_bad_parameter() {
        assert!(check_delta_sufficiency(&xor(), &OracleSpec::Exact, 1.0, &opts()).is_err());
        assert!(check_delta_sufficiency(&xor(), &OracleSpec::Exact, -0.1, &opts()).is_err());
    }

    #[test]
    fn monte_carlo_mode_agrees_on_xor() {
        let s = xor();
        let mc = VerifyOptions {
            mode: EvalMode::MonteCarlo { trials: 40_000 },
            seed: 13,
            budget: DEFAULT_ENUM_BUDGET,
        };
        let cert = check_over_determination_observable(&s, &OracleSpec::Exact, &mc).unwrap();
        // true min margin 0.049 is large relative to the paired standard
        // error at this sample size
        assert!(cert.holds());
        assert!(cert.witnesses.iter().all(|w| w.stderr.is_some()));
    }

    #[test]
    fn implication_survey_finds_no_violations() {
        let summary = check_od_implies_im(&RandomBounds::default(), 25, 7).unwrap();
        assert_eq!(summary.checked, 25);
        assert!(summary.violations.is_empty());

        let empty = check_od_implies_im(&RandomBounds::default(), 0, 0).unwrap();
        assert_eq!(empty.checked, 0);
        assert!(empty.violations.is_empty());
    }
}
