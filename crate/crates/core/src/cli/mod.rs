//! Command-line harness: `run`, `verify`, `bench` and `validate-magic`.
//!
//! Settings come from flags and optionally from one JSON file passed with
//! `--config`; flags win. Reports are single JSON documents, traces are
//! newline-delimited JSON, bench tables are CSV. Every file is written to a
//! temporary sibling and renamed into place.
//!
//! Exit codes:
//!
//! | command        | codes                                                        |
//! |----------------|--------------------------------------------------------------|
//! | run            | 0 completed, 2 deadlock, 3 budget exceeded, 4 unsupported magic, 7 fault |
//! | verify         | 0 all properties hold, 5 tree too large, 8 a property failed |
//! | bench          | 0 all budgets hold, 8 a budget check failed                  |
//! | validate-magic | 0 all supported, 6 only odd `m` unsupported, 8 an even `m` unsupported |
//!
//! Any configuration error exits with 1.

use std::fs;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::protocols::{ConfigError, ProtocolConfig, ProtocolName, DEFAULT_BUDGET};
use crate::runtime::{HungerSpec, Outcome, PolicyKind, SchedulerPolicy};
use crate::verify::{
    audit, check, explore, outcome_histogram, sample, validate_magic, Property, VerifyError,
    DEFAULT_THRESHOLD,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DEADLOCK: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_UNSUPPORTED_MAGIC: i32 = 4;
pub const EXIT_TREE_TOO_LARGE: i32 = 5;
pub const EXIT_ODD_MAGIC: i32 = 6;
pub const EXIT_FAULT: i32 = 7;
pub const EXIT_CHECK_FAILED: i32 = 8;

/// Largest ring accepted by exhaustive verification.
pub const EXHAUSTIVE_MAX_N: usize = 5;
pub const SEED_ENV: &str = "RINGSIM_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad config file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Parser)]
#[command(name = "ringsim", version, about = "Anonymous-ring protocol simulator and verifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute one run and write its trace and report.
    Run(RunArgs),
    /// Check properties exhaustively over measurement branches or by sampling.
    Verify(VerifyArgs),
    /// Audit complexity over a range of ring sizes.
    Bench(BenchArgs),
    /// Validate the magic unitaries for a range of parameters.
    ValidateMagic(MagicArgs),
}

/// Run settings as they appear in a `--config` file. Every field is
/// optional; flags override what the file says.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: Option<ProtocolName>,
    pub n: Option<usize>,
    #[serde(rename = "N")]
    pub bound: Option<u32>,
    pub courteous: Option<bool>,
    pub policy: Option<PolicyKind>,
    pub seed: Option<u64>,
    pub target: Option<usize>,
    pub fairness: Option<u64>,
    pub hunger: Option<HungerSpec>,
    pub eligible: Option<Vec<bool>>,
    pub leader: Option<usize>,
    pub budget: Option<u64>,
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl RunConfig {
    /// `other` wins wherever it has a value.
    pub fn merged(self, other: RunConfig) -> RunConfig {
        RunConfig {
            protocol: other.protocol.or(self.protocol),
            n: other.n.or(self.n),
            bound: other.bound.or(self.bound),
            courteous: other.courteous.or(self.courteous),
            policy: other.policy.or(self.policy),
            seed: other.seed.or(self.seed),
            target: other.target.or(self.target),
            fairness: other.fairness.or(self.fairness),
            hunger: other.hunger.or(self.hunger),
            eligible: other.eligible.or(self.eligible),
            leader: other.leader.or(self.leader),
            budget: other.budget.or(self.budget),
            trace: other.trace.or(self.trace),
            report: other.report.or(self.report),
        }
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// The protocol configuration. The seed falls back to `RINGSIM_SEED`,
    /// then to 0.
    pub fn protocol_config(&self) -> Result<ProtocolConfig, CliError> {
        let protocol = self
            .protocol
            .ok_or_else(|| CliError::Invalid("--protocol is required".into()))?;
        let n = self
            .n
            .ok_or_else(|| CliError::Invalid("--n is required".into()))?;
        let seed = match self.seed {
            Some(s) => s,
            None => env_seed()?.unwrap_or(0),
        };
        let mut policy = SchedulerPolicy::new(self.policy.unwrap_or(PolicyKind::RoundRobin), seed);
        policy.fairness = self.fairness;
        policy.target = self.target.unwrap_or(0);
        let cfg = ProtocolConfig {
            protocol,
            n,
            bound: self.bound,
            courteous: self.courteous.unwrap_or(false),
            hunger: self.hunger.clone().unwrap_or_default(),
            eligible: self.eligible.clone(),
            leader: self.leader,
            policy,
            seed,
            budget: self.budget.unwrap_or(DEFAULT_BUDGET),
            constant_coin: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Invalid(format!("{SEED_ENV}={v:?} is not a seed"))),
        Err(_) => Ok(None),
    }
}

fn parse_eligible(s: &str) -> Result<Vec<bool>, String> {
    let items: Vec<&str> = if s.contains(',') {
        s.split(',').map(str::trim).collect()
    } else {
        s.trim().split("").filter(|x| !x.is_empty()).collect()
    };
    items
        .into_iter()
        .map(|x| match x {
            "1" | "true" => Ok(true),
            "0" | "false" => Ok(false),
            other => Err(format!("bad eligibility entry {other:?}")),
        })
        .collect()
}

fn parse_protocol(s: &str) -> Result<ProtocolName, String> {
    s.parse().map_err(|e: ConfigError| e.to_string())
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    PolicyKind::parse(s).ok_or_else(|| format!("unknown policy {s:?}"))
}

fn parse_hunger(s: &str) -> Result<HungerSpec, String> {
    s.parse().map_err(|e: crate::runtime::HungerError| e.to_string())
}

/// `a..b` (inclusive) or a single number.
pub fn parse_range(s: &str) -> Result<RangeInclusive<u64>, String> {
    let bad = || format!("bad range {s:?}");
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (s, s),
    };
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    Ok(a..=b)
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON file with run settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_protocol)]
    pub protocol: Option<ProtocolName>,
    /// Ring size. `bench` also takes an inclusive range such as `3..10`.
    #[arg(long, value_parser = parse_range)]
    pub n: Option<RangeInclusive<u64>>,
    /// Upper bound on the ring size for the bounded variants.
    #[arg(long = "N", alias = "bound")]
    pub bound: Option<u32>,
    #[arg(long)]
    pub courteous: bool,
    #[arg(long, value_parser = parse_policy)]
    pub policy: Option<PolicyKind>,
    /// Seed for scheduling, measurements and coins. Defaults to $RINGSIM_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Party targeted by the one-starved and channel-delay policies.
    #[arg(long)]
    pub target: Option<usize>,
    /// Fairness bound in steps.
    #[arg(long)]
    pub fairness: Option<u64>,
    /// `all`, `none`, `one:<i>` or `list:<i@t,...>`.
    #[arg(long, value_parser = parse_hunger)]
    pub hunger: Option<HungerSpec>,
    /// Eligibility pattern for dp-prime, e.g. `10011` or `1,0,0,1,1`.
    #[arg(long, value_parser = parse_eligible)]
    pub eligible: Option<Vec<bool>>,
    /// Take dp groups from this leader instead of symmetry breaking.
    #[arg(long)]
    pub leader: Option<usize>,
    #[arg(long)]
    pub budget: Option<u64>,
    /// Leave the wall-clock timestamp out of reports.
    #[arg(long)]
    pub no_timestamp: bool,
}

impl ConfigArgs {
    fn flags(&self) -> Result<RunConfig, CliError> {
        let n = match &self.n {
            Some(r) if r.start() == r.end() => Some(*r.start() as usize),
            Some(r) => {
                return Err(CliError::Invalid(format!(
                    "--n {}..{} is a range; this command takes one size",
                    r.start(),
                    r.end()
                )))
            }
            None => None,
        };
        Ok(RunConfig {
            protocol: self.protocol,
            n,
            bound: self.bound,
            courteous: self.courteous.then_some(true),
            policy: self.policy,
            seed: self.seed,
            target: self.target,
            fairness: self.fairness,
            hunger: self.hunger.clone(),
            eligible: self.eligible.clone(),
            leader: self.leader,
            budget: self.budget,
            trace: None,
            report: None,
        })
    }

    fn resolve(&self, extra: RunConfig) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Ok(file.merged(self.flags()?).merged(extra))
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Where to write the NDJSON trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Where to write the JSON report. Printed to stdout otherwise.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Enumerate every measurement branch under round-robin scheduling.
    #[arg(long)]
    pub exhaustive: bool,
    /// Property to check; repeatable. Defaults depend on the protocol.
    #[arg(long = "property")]
    pub properties: Vec<String>,
    /// Sampled runs when not exhaustive.
    #[arg(long, default_value_t = 200)]
    pub seeds: u64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MagicArgs {
    /// Parameter range, e.g. `2..6`.
    #[arg(long, default_value = "2..6")]
    pub m: String,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub no_timestamp: bool,
}

/// Writes `contents` to a temporary sibling of `path`, then renames it.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let err = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(err)?;
    f.write_all(contents).map_err(err)?;
    f.sync_all().map_err(err)?;
    drop(f);
    fs::rename(&tmp, path).map_err(err)
}

fn stamp(mut v: Value, no_timestamp: bool) -> Value {
    if !no_timestamp {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        v["timestamp"] = json!(secs);
    }
    v
}

fn emit(v: &Value, path: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn outcome_exit_code(o: &Outcome) -> i32 {
    match o {
        Outcome::Completed => EXIT_OK,
        Outcome::Deadlock { .. } => EXIT_DEADLOCK,
        Outcome::BudgetExceeded => EXIT_BUDGET,
        Outcome::UnsupportedMagic { .. } => EXIT_UNSUPPORTED_MAGIC,
        Outcome::Pruned | Outcome::Fault { .. } => EXIT_FAULT,
    }
}

fn fail(e: CliError) -> i32 {
    eprintln!("error: {e}");
    EXIT_CONFIG
}

pub fn cmd_run(args: &RunArgs) -> i32 {
    match run_inner(args) {
        Ok(code) => code,
        Err(e) => fail(e),
    }
}

fn run_inner(args: &RunArgs) -> Result<i32, CliError> {
    let rc = args.cfg.resolve(RunConfig {
        trace: args.trace.clone(),
        report: args.report.clone(),
        ..RunConfig::default()
    })?;
    let cfg = rc.protocol_config()?;
    let report = cfg.build()?.with_trace(rc.trace.is_some()).run(cfg.budget);
    if let (Some(path), Some(trace)) = (&rc.trace, &report.trace) {
        write_atomic(path, trace.to_ndjson().as_bytes())?;
    }
    let leaders = report
        .outputs
        .iter()
        .filter(|o| o.leader == Some(true))
        .count();
    let v = stamp(
        json!({
            "config": cfg,
            "summary": {
                "outcome": report.outcome.name(),
                "leaders": leaders,
                "first_eat_step": report.first_eat_step,
                "steps": report.ledger.steps,
            },
            "report": report,
        }),
        args.cfg.no_timestamp,
    );
    emit(&v, rc.report.as_deref())?;
    eprintln!(
        "{} n={} outcome={} steps={}",
        cfg.protocol,
        cfg.n,
        report.outcome.name(),
        report.ledger.steps
    );
    Ok(outcome_exit_code(&report.outcome))
}

pub fn cmd_verify(args: &VerifyArgs) -> i32 {
    match verify_inner(args) {
        Ok(code) => code,
        Err(CliError::Verify(VerifyError::TreeTooLarge(k))) => {
            eprintln!("error: branch tree too large ({k} nodes)");
            EXIT_TREE_TOO_LARGE
        }
        Err(e) => fail(e),
    }
}

fn verify_inner(args: &VerifyArgs) -> Result<i32, CliError> {
    let rc = args.cfg.resolve(RunConfig {
        report: args.report.clone(),
        ..RunConfig::default()
    })?;
    let mut cfg = rc.protocol_config()?;
    let props: Vec<Property> = if args.properties.is_empty() {
        Property::defaults_for(cfg.protocol)
    } else {
        args.properties
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()?
    };
    let traces = props.iter().any(|p| p.needs_trace());
    let (leaves, tree_stats) = if args.exhaustive {
        if cfg.n > EXHAUSTIVE_MAX_N {
            return Err(CliError::Invalid(format!(
                "exhaustive mode needs n <= {EXHAUSTIVE_MAX_N}, got {}",
                cfg.n
            )));
        }
        cfg.policy.kind = PolicyKind::RoundRobin;
        let tree = explore(&cfg, args.threshold, traces)?;
        let stats = json!({
            "leaves": tree.leaves.len(),
            "nodes": tree.node_count(),
            "leaf_mass": tree.leaf_mass(),
            "pruned_mass": tree.pruned_mass(),
            "conservation_error": tree.conservation_error(),
        });
        (tree.leaves, Some(stats))
    } else {
        let start = cfg.seed;
        (sample(&cfg, start..start + args.seeds.max(1), traces)?, None)
    };
    let report = check(&cfg, &leaves, &props)?;
    let v = stamp(
        json!({
            "config": cfg,
            "mode": if args.exhaustive { "exhaustive" } else { "sampled" },
            "tree": tree_stats,
            "outcomes": outcome_histogram(&leaves),
            "passed": report.passed(),
            "properties": report.results,
        }),
        args.cfg.no_timestamp,
    );
    emit(&v, rc.report.as_deref())?;
    for r in &report.results {
        eprintln!(
            "{:<22} {} ({} checked)",
            r.property.name(),
            if r.passed { "pass" } else { "FAIL" },
            r.checked
        );
    }
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

pub fn cmd_bench(args: &BenchArgs) -> i32 {
    match bench_inner(args) {
        Ok(code) => code,
        Err(e) => fail(e),
    }
}

fn bench_inner(args: &BenchArgs) -> Result<i32, CliError> {
    let mut extra = RunConfig {
        report: args.report.clone(),
        ..RunConfig::default()
    };
    let sizes: Vec<usize> = match &args.cfg.n {
        Some(r) => r.clone().map(|x| x as usize).collect(),
        None => Vec::new(),
    };
    if sizes.is_empty() {
        return Err(CliError::Invalid("--n must name a non-empty range".into()));
    }
    // Validate against the smallest size; the template is resized per row.
    extra.n = Some(sizes[0]);
    let cfg_args = ConfigArgs {
        n: None,
        ..args.cfg.clone()
    };
    let rc = cfg_args.resolve(extra)?;
    let mut template = rc.protocol_config()?;
    if template.protocol.is_dining() && template.hunger.is_empty() {
        template.hunger = HungerSpec::All;
    }
    let rep = audit(&template, &sizes, args.seeds)?;
    if let Some(p) = &args.csv {
        write_atomic(p, rep.to_csv().as_bytes())?;
    } else if args.report.is_none() {
        print!("{}", rep.to_csv());
    }
    if let Some(p) = &rc.report {
        let v = stamp(
            json!({
                "config": template,
                "passed": rep.passed(),
                "audit": rep,
            }),
            args.cfg.no_timestamp,
        );
        emit(&v, Some(p))?;
    }
    for c in &rep.checks {
        eprintln!(
            "{:<18} observed {:>10.4} limit {:>8.3} {}",
            c.name,
            c.observed,
            c.constant,
            if c.passed { "pass" } else { "FAIL" }
        );
    }
    Ok(if rep.passed() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

pub fn cmd_validate_magic(args: &MagicArgs) -> i32 {
    let range = match parse_range(&args.m) {
        Ok(r) if *r.start() <= u64::from(u32::MAX) && *r.end() <= u64::from(u32::MAX) => {
            (*r.start() as u32)..=(*r.end() as u32)
        }
        Ok(_) => return fail(CliError::Invalid(format!("range {} too large", args.m))),
        Err(e) => return fail(CliError::Invalid(e)),
    };
    let rep = match validate_magic(range) {
        Ok(r) => r,
        Err(e) => return fail(e.into()),
    };
    let v = stamp(json!({ "rows": rep.rows }), args.no_timestamp);
    if let Err(e) = emit(&v, args.report.as_deref()) {
        return fail(e);
    }
    for r in &rep.rows {
        eprintln!(
            "m={:<3} supported={:<5} variant={:<28} defect={:.2e} residue={:.2e}",
            r.m,
            r.supported,
            r.variant.as_deref().unwrap_or("-"),
            r.unitarity_defect,
            r.support_residue
        );
    }
    if !rep.all_even_supported() {
        EXIT_CHECK_FAILED
    } else if !rep.odd_unsupported().is_empty() {
        EXIT_ODD_MAGIC
    } else {
        EXIT_OK
    }
}

/// Parses `args` (including the program name) and dispatches.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
        Command::ValidateMagic(a) => cmd_validate_magic(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_are_inclusive() {
        assert_eq!(parse_range("3..10").unwrap(), 3..=10);
        assert_eq!(parse_range("2..=6").unwrap(), 2..=6);
        assert_eq!(parse_range("4").unwrap(), 4..=4);
        assert!(parse_range("a..b").is_err());
    }

    #[test]
    fn eligibility_patterns_parse() {
        assert_eq!(parse_eligible("101").unwrap(), vec![true, false, true]);
        assert_eq!(parse_eligible("1,0").unwrap(), vec![true, false]);
        assert!(parse_eligible("12").is_err());
    }

    #[test]
    fn flags_override_the_file() {
        let file = RunConfig {
            protocol: Some(ProtocolName::Le),
            n: Some(4),
            seed: Some(3),
            ..RunConfig::default()
        };
        let flags = RunConfig {
            n: Some(6),
            ..RunConfig::default()
        };
        let m = file.merged(flags);
        assert_eq!(m.n, Some(6));
        assert_eq!(m.seed, Some(3));
        assert_eq!(m.protocol, Some(ProtocolName::Le));
    }
}
