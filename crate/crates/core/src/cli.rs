//! Command-line front end: `run`, `verify`, `sweep`, and `market`
//! subcommands over the scenario / oracle / payment-rule configuration.
//!
//! Reports are machine-readable JSON (CSV for sweeps and trade logs) and
//! embed the fully resolved configuration plus its hash and the seed, so
//! any report can be reproduced from itself. Exit codes: 0 success (all
//! requested conditions hold), 1 a condition fails, 2 usage or config
//! error, 3 oracle backend error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::info::{InformationStructure, ScenarioJson, DEFAULT_ENUM_BUDGET};
use crate::market;
use crate::mechanism::{self, DeviationMap, EvalMode, PaymentRule};
use crate::oracle::{Oracle, OracleSpec, DEFAULT_EXTERNAL_TIMEOUT_SECS};
use crate::rng;
use crate::scenarios::{self, ErrorTable};
use crate::verifier::{self, ConditionCertificate, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONDITION_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Parser)]
#[command(name = "lmm", version, about = "Language model mechanism simulator and verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a realization and run the mechanism once.
    Run(RunArgs),
    /// Check conditions and emit certificates.
    Verify(VerifyArgs),
    /// Sweep a parameter and emit a plot-ready CSV.
    Sweep(SweepArgs),
    /// Run the LMSR baseline market on the scenario.
    Market(MarketArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Scenario: `xor`, `prop2`, or a path to a scenario JSON file.
    #[arg(long, default_value = "xor")]
    scenario: String,

    /// XOR signal accuracy.
    #[arg(long, default_value_t = 2.0 / 3.0)]
    p: f64,

    /// XOR signals per variable (agents = 2k).
    #[arg(long, default_value_t = 3)]
    k: usize,

    /// Oracle backend: exact, degraded, external.
    #[arg(long, default_value = "exact")]
    oracle: String,

    /// Outcome-flip probability for the degraded backend.
    #[arg(long, default_value_t = 0.1)]
    q: f64,

    /// External backend command line (whitespace-split).
    #[arg(long)]
    cmd: Option<String>,

    /// External backend timeout in seconds.
    #[arg(long, default_value_t = DEFAULT_EXTERNAL_TIMEOUT_SECS)]
    timeout: f64,

    /// Payment rule: observable or zero_shot.
    #[arg(long, default_value = "observable")]
    rule: String,

    #[arg(long, default_value_t = 1.0)]
    alpha: f64,

    /// The K constant of the observable rule.
    #[arg(long, default_value_t = 2.0)]
    kconst: f64,

    #[arg(long, default_value_t = 1.0)]
    beta: f64,

    /// Evaluation mode: exhaustive or monte_carlo.
    #[arg(long, default_value = "exhaustive")]
    mode: String,

    #[arg(long, default_value_t = 100_000)]
    trials: u64,

    /// Cap on profile count for exhaustive enumeration.
    #[arg(long, default_value_t = DEFAULT_ENUM_BUDGET)]
    budget: u128,

    /// Root seed; required whenever anything is sampled.
    #[arg(long)]
    seed: Option<u64>,

    /// Write the report here (atomically) instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Comma-separated subset of od_obs, od_zs, im, ic_obs, ic_zs, delta,
    /// od_table, im_table.
    #[arg(long, default_value = "od_obs,od_zs,im,ic_obs,ic_zs")]
    conditions: String,

    /// δ threshold for the delta condition.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// One of q, p, k, b, trials.
    #[arg(long)]
    param: String,

    /// Comma-separated grid values.
    #[arg(long, default_value = "")]
    grid: String,
}

#[derive(Args)]
struct MarketArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// LMSR liquidity.
    #[arg(long, default_value_t = 10.0)]
    b: f64,

    /// Trading order as comma-separated agent indices; defaults to 0..n.
    #[arg(long)]
    order: Option<String>,
}

/// Fully resolved configuration, embedded into every report.
#[derive(Serialize, Deserialize, Clone)]
struct ResolvedConfig {
    scenario_name: String,
    scenario: ScenarioJson,
    oracle: OracleSpec,
    rule: PaymentRule,
    mode: EvalMode,
    budget: u128,
    seed: u64,
}

struct Resolved {
    structure: InformationStructure,
    /// Literal error table, present for the prop2 scenario.
    table: Option<ErrorTable>,
    config: ResolvedConfig,
}

fn config_hash(config: &ResolvedConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        write!(hex, "{byte:02x}").unwrap();
    }
    hex
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn resolve(common: &CommonArgs, needs_seed: bool) -> Result<Resolved, Error> {
    let mode = match common.mode.as_str() {
        "exhaustive" => EvalMode::Exhaustive,
        "monte_carlo" | "mc" => EvalMode::MonteCarlo {
            trials: common.trials,
        },
        other => return Err(usage(format!("unknown mode {other:?}"))),
    };
    let oracle = match common.oracle.as_str() {
        "exact" => OracleSpec::exact(),
        "degraded" => OracleSpec::degraded(common.q)?,
        "external" => {
            let cmd = common
                .cmd
                .as_ref()
                .ok_or_else(|| usage("--oracle external requires --cmd"))?;
            let parts: Vec<String> = cmd.split_whitespace().map(str::to_owned).collect();
            OracleSpec::external(parts, common.timeout)?
        }
        other => return Err(usage(format!("unknown oracle backend {other:?}"))),
    };
    let rule = match common.rule.as_str() {
        "observable" => PaymentRule::observable(common.alpha, common.kconst)?,
        "zero_shot" => PaymentRule::zero_shot(common.beta)?,
        other => return Err(usage(format!("unknown payment rule {other:?}"))),
    };
    let stochastic = needs_seed
        || matches!(mode, EvalMode::MonteCarlo { .. })
        || matches!(oracle, OracleSpec::Degraded { .. });
    let seed = match common.seed {
        Some(seed) => seed,
        None if stochastic => return Err(usage("--seed is required for stochastic runs")),
        None => 0,
    };

    let (name, structure, table) = match common.scenario.as_str() {
        "xor" => (
            format!("xor(p={}, k={})", common.p, common.k),
            scenarios::build_xor(common.p, common.k)?,
            None,
        ),
        "prop2" => {
            let (structure, table) = scenarios::build_prop2_counterexample();
            ("prop2".to_string(), structure, Some(table))
        }
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                usage(format!("cannot read scenario file {path:?}: {e}"))
            })?;
            let json: ScenarioJson = serde_json::from_str(&text)
                .map_err(|e| usage(format!("scenario file {path:?}: {e}")))?;
            (path.to_string(), json.into_structure()?, None)
        }
    };

    let config = ResolvedConfig {
        scenario_name: name,
        scenario: ScenarioJson::from_structure(&structure),
        oracle,
        rule,
        mode,
        budget: common.budget,
        seed,
    };
    Ok(Resolved {
        structure,
        table,
        config,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        None => {
            println!("{text}");
            Ok(())
        }
        Some(path) => write_atomic(path, text),
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<(), Error> {
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Serialize)]
struct RunReport {
    config: ResolvedConfig,
    config_hash: String,
    seed: u64,
    realized_world: usize,
    realized_world_name: String,
    profile: Vec<usize>,
    result: mechanism::MechanismResult,
}

fn cmd_run(args: &RunArgs) -> Result<bool, Error> {
    let resolved = resolve(&args.common, true)?;
    let seed = resolved.config.seed;
    let mut realization_rng = rng::stream(seed, "run.realization");
    let (world, profile) = resolved.structure.sample_realization(&mut realization_rng);
    let mut oracle = Oracle::new(resolved.config.oracle.clone());
    let mut oracle_rng = rng::stream(seed, "run.oracle");
    let result = mechanism::run(
        &resolved.structure,
        &mut oracle,
        &resolved.config.rule,
        &profile,
        world,
        &mut oracle_rng,
    )?;
    let report = RunReport {
        config_hash: config_hash(&resolved.config),
        seed,
        realized_world: world,
        realized_world_name: resolved.structure.world_space().worlds()[world].clone(),
        profile: profile.symbols.clone(),
        result,
        config: resolved.config,
    };
    emit(
        args.common.out.as_deref(),
        &serde_json::to_string_pretty(&report)?,
    )?;
    Ok(true)
}

#[derive(Serialize)]
struct CertificateReport {
    name: String,
    #[serde(flatten)]
    certificate: ConditionCertificate,
    seed: u64,
    config_hash: String,
}

#[derive(Serialize)]
struct VerifyReport {
    config: ResolvedConfig,
    config_hash: String,
    all_hold: bool,
    certificates: Vec<CertificateReport>,
}

fn cmd_verify(args: &VerifyArgs) -> Result<bool, Error> {
    let resolved = resolve(&args.common, false)?;
    let opts = VerifyOptions {
        mode: resolved.config.mode,
        seed: resolved.config.seed,
        budget: resolved.config.budget,
    };
    let hash = config_hash(&resolved.config);
    let structure = &resolved.structure;
    let oracle = &resolved.config.oracle;

    let mut certificates = Vec::new();
    for name in args.conditions.split(',').filter(|s| !s.is_empty()) {
        let cert = match name {
            "od_obs" => verifier::check_over_determination_observable(structure, oracle, &opts)?,
            "od_zs" => verifier::check_over_determination_zero_shot(structure, oracle, &opts)?,
            "im" => verifier::check_information_monotonicity(structure, oracle, &opts)?,
            "ic_obs" => {
                let rule = PaymentRule::observable(args.common.alpha, args.common.kconst)?;
                verifier::check_incentive_compatibility(structure, oracle, &rule, &opts)?
            }
            "ic_zs" => {
                let rule = PaymentRule::zero_shot(args.common.beta)?;
                verifier::check_incentive_compatibility(structure, oracle, &rule, &opts)?
            }
            "delta" => verifier::check_delta_sufficiency(structure, oracle, args.delta, &opts)?,
            "od_table" | "im_table" => {
                let table = resolved.table.as_ref().ok_or_else(|| {
                    usage(format!("condition {name} requires the prop2 scenario"))
                })?;
                if name == "od_table" {
                    verifier::check_over_determination_table(structure, table, &opts)?
                } else {
                    verifier::check_information_monotonicity_table(structure, table, &opts)?
                }
            }
            other => return Err(usage(format!("unknown condition {other:?}"))),
        };
        certificates.push(CertificateReport {
            name: name.to_string(),
            certificate: cert,
            seed: resolved.config.seed,
            config_hash: hash.clone(),
        });
    }

    let all_hold = certificates.iter().all(|c| c.certificate.holds());
    for cert in &certificates {
        eprintln!(
            "{}: {}",
            cert.name,
            if cert.certificate.holds() { "holds" } else { "fails" }
        );
    }
    let report = VerifyReport {
        config_hash: hash,
        all_hold,
        certificates,
        config: resolved.config,
    };
    emit(
        args.common.out.as_deref(),
        &serde_json::to_string_pretty(&report)?,
    )?;
    Ok(all_hold)
}

fn min_ic_margin(
    structure: &InformationStructure,
    oracle: &OracleSpec,
    rule: &PaymentRule,
    opts: &VerifyOptions,
) -> Result<f64, Error> {
    let cert = verifier::check_incentive_compatibility(structure, oracle, rule, opts)?;
    cert.min_margin
        .ok_or_else(|| usage("certificate carries no margin"))
}

fn cmd_sweep(args: &SweepArgs) -> Result<bool, Error> {
    let resolved = resolve(&args.common, false)?;
    let opts = VerifyOptions {
        mode: EvalMode::Exhaustive,
        seed: resolved.config.seed,
        budget: resolved.config.budget,
    };
    let grid: Vec<f64> = args
        .grid
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|e| usage(format!("grid value {s:?}: {e}"))))
        .collect::<Result<_, _>>()?;

    let mut csv = String::from("param_value,metric,value,stderr\n");
    for &value in &grid {
        match args.param.as_str() {
            "q" => {
                let oracle = OracleSpec::degraded(value)?;
                let cert =
                    verifier::check_delta_sufficiency(&resolved.structure, &oracle, 0.999, &opts)?;
                writeln!(
                    csv,
                    "{value},delta_measured,{},",
                    cert.delta_measured.unwrap()
                )
                .unwrap();
            }
            "p" | "k" => {
                let (p, k) = if args.param == "p" {
                    (value, args.common.k)
                } else {
                    (args.common.p, value as usize)
                };
                let structure = scenarios::build_xor(p, k)?;
                let margin = min_ic_margin(
                    &structure,
                    &resolved.config.oracle,
                    &resolved.config.rule,
                    &opts,
                )?;
                writeln!(csv, "{value},min_ic_margin,{margin},").unwrap();
            }
            "b" => {
                // expected L1 distance between final and initial price,
                // over all signal realizations
                let structure = &resolved.structure;
                let map = welfare_argmax_map(structure);
                let order: Vec<usize> = (0..structure.agent_count()).collect();
                let n_market = map.iter().max().unwrap() + 1;
                let initial = vec![1.0 / n_market as f64; n_market];
                let mut deviation = 0.0;
                for (profile, marginal) in
                    structure.enumerate_profiles(resolved.config.budget)?
                {
                    if marginal == 0.0 {
                        continue;
                    }
                    let run = market::run_market(structure, &map, &order, &profile, value)?;
                    let l1: f64 = run
                        .final_price
                        .iter()
                        .zip(&initial)
                        .map(|(a, b)| (a - b).abs())
                        .sum();
                    deviation += marginal * l1;
                }
                writeln!(csv, "{value},market_price_deviation,{deviation},").unwrap();
            }
            "trials" => {
                let agent0 = DeviationMap::identity(
                    0,
                    resolved.structure.channel(0).alphabet_len(),
                );
                let exact = mechanism::expected_payment(
                    &resolved.structure,
                    &resolved.config.oracle,
                    &resolved.config.rule,
                    &agent0,
                    EvalMode::Exhaustive,
                    resolved.config.seed,
                    resolved.config.budget,
                )?;
                let mc = mechanism::expected_payment(
                    &resolved.structure,
                    &resolved.config.oracle,
                    &resolved.config.rule,
                    &agent0,
                    EvalMode::MonteCarlo {
                        trials: value as u64,
                    },
                    resolved.config.seed,
                    resolved.config.budget,
                )?;
                writeln!(
                    csv,
                    "{value},abs_payment_error,{},{}",
                    (mc.mean - exact.mean).abs(),
                    mc.stderr.unwrap()
                )
                .unwrap();
            }
            other => return Err(usage(format!("unknown sweep parameter {other:?}"))),
        }
    }
    emit(args.common.out.as_deref(), csv.trim_end())?;
    Ok(true)
}

/// Per-world welfare-maximizing outcome, the default world → market
/// outcome map. For the XOR scenario this is exactly the parity of Z.
fn welfare_argmax_map(structure: &InformationStructure) -> Vec<usize> {
    (0..structure.world_count())
        .map(|w| {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for x in 0..structure.outcome_count() {
                let v = structure.outcome_space().welfare(x, w);
                if v > best_v {
                    best_v = v;
                    best = x;
                }
            }
            best
        })
        .collect()
}

#[derive(Serialize)]
struct MarketReport {
    config: ResolvedConfig,
    config_hash: String,
    seed: u64,
    realized_world: usize,
    profile: Vec<usize>,
    final_price: Vec<f64>,
    trade_count: usize,
    trade_log_csv: String,
    /// Exhaustive expected welfare of the mechanism's selected outcome;
    /// with 0/1 welfare this is its outcome accuracy.
    lmm_expected_accuracy: f64,
}

/// Exhaustive `E[W(x*(s), ω)]` for the exact world model.
pub fn lmm_expected_accuracy(
    structure: &InformationStructure,
    budget: u128,
) -> Result<f64, Error> {
    let mut total = 0.0;
    for (profile, marginal) in structure.enumerate_profiles(budget)? {
        if marginal == 0.0 {
            continue;
        }
        let posterior = structure.posterior_over_worlds(&profile)?;
        let best = structure.best_outcome(&posterior);
        for (world, &post) in posterior.iter().enumerate() {
            total += marginal * post * structure.outcome_space().welfare(best, world);
        }
    }
    Ok(total)
}

fn cmd_market(args: &MarketArgs) -> Result<bool, Error> {
    let resolved = resolve(&args.common, true)?;
    let structure = &resolved.structure;
    let seed = resolved.config.seed;
    let mut realization_rng = rng::stream(seed, "market.realization");
    let (world, profile) = structure.sample_realization(&mut realization_rng);

    let order: Vec<usize> = match &args.order {
        None => (0..structure.agent_count()).collect(),
        Some(text) => text
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.trim().parse().map_err(|e| usage(format!("order entry {s:?}: {e}"))))
            .collect::<Result<_, _>>()?,
    };
    let map = welfare_argmax_map(structure);
    let run = market::run_market(structure, &map, &order, &profile, args.b)?;
    let accuracy = lmm_expected_accuracy(structure, resolved.config.budget)?;

    let report = MarketReport {
        config_hash: config_hash(&resolved.config),
        seed,
        realized_world: world,
        profile: profile.symbols.clone(),
        final_price: run.final_price,
        trade_count: run.trade_log.len(),
        trade_log_csv: market::trade_log_csv(&run.trade_log),
        lmm_expected_accuracy: accuracy,
        config: resolved.config,
    };
    emit(
        args.common.out.as_deref(),
        &serde_json::to_string_pretty(&report)?,
    )?;
    Ok(true)
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Backend { .. } | Error::MalformedVerdict(_) => EXIT_BACKEND,
        _ => EXIT_USAGE,
    }
}

/// Entry point used by the `lmm` binary. Returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version via "error" variants with exit 0
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Market(args) => cmd_market(args),
    };
    match outcome {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CONDITION_FAILED,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}
