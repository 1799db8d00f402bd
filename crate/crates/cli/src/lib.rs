//! Command dispatch for the `ipmech` binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use ipmech::benchmarks::{
    payoff_comparison_report_with, plot_csv, solve_ex_ante_optimal_with, solve_full_information,
    BenchmarkError,
};
use ipmech::checks::Checks;
use ipmech::env::{check_constraints, efficient_rule, environment_from_json, Allocation, Environment};
use ipmech::refine::{
    check_core, check_fgp_exists, check_snp_exists, check_strong_solution, polygon_csv,
    seller_payoff_set, ExistenceCheck, RefineError,
};
use ipmech::rsw::{solve_rsw, solve_rsw_weighted, RswError};
use ipmech::Rational;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;
pub const EXIT_PRECONDITION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ipmech", version, about = "Exact solvers for informed-principal bilateral trade")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Include wall-clock timing in the report.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute an allocation.
    Solve {
        kind: SolveKind,
        env_file: PathBuf,
        /// Comma-separated positive objective weights for the relaxed problem.
        #[arg(long)]
        weights: Option<String>,
        /// Add seller interim participation to the ex-ante problem.
        #[arg(long)]
        seller_iir: bool,
    },
    /// Decide a property of an environment or allocation.
    Check {
        kind: CheckKind,
        env_file: PathBuf,
        /// Allocation file, required by `feasible` and `core`.
        #[arg(long)]
        alloc: Option<PathBuf>,
    },
    /// Run the comparison report and every existence check.
    Report {
        env_file: PathBuf,
        /// Directory for plot-ready CSV files.
        #[arg(long)]
        csv_dir: Option<PathBuf>,
        /// Add seller interim participation to the ex-ante problem.
        #[arg(long)]
        seller_iir: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolveKind {
    Rsw,
    FullInfo,
    ExAnte,
    Efficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Feasible,
    Core,
    StrongSolution,
    Fgp,
    Snp,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Precondition(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Precondition(_) => EXIT_PRECONDITION,
            CliError::Internal(_) => EXIT_VERIFICATION,
        }
    }
}

impl From<RswError> for CliError {
    fn from(e: RswError) -> Self {
        match e {
            RswError::BadWeights => CliError::Input(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<BenchmarkError> for CliError {
    fn from(e: BenchmarkError) -> Self {
        match e {
            BenchmarkError::MonotonicityHypothesisFails { .. } => CliError::Precondition(e.to_string()),
            BenchmarkError::Allocation(_) => CliError::Input(e.to_string()),
            BenchmarkError::Rsw(r) => r.into(),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<RefineError> for CliError {
    fn from(e: RefineError) -> Self {
        match e {
            RefineError::PreconditionFailed(_)
            | RefineError::InfeasibleInput(_)
            | RefineError::UnsupportedDimension(_) => CliError::Precondition(e.to_string()),
            RefineError::Allocation(_) => CliError::Input(e.to_string()),
            RefineError::Rsw(r) => r.into(),
            other => CliError::Internal(other.to_string()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub environment_digest: String,
    pub outputs: Value,
    pub verification: Checks,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.verification.all_passed()
    }
}

/// Hex SHA-256 of the canonical JSON form.
pub fn environment_digest(env: &Environment) -> String {
    hex::encode(Sha256::digest(env.canonical_json().as_bytes()))
}

pub fn load_environment(path: &Path) -> Result<Environment, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    environment_from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn load_allocation(path: &Path, env: &Environment) -> Result<Allocation, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Allocation::from_json(&text, env.x_size(), env.y_size())
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn parse_weights(text: &str) -> Result<Vec<Rational>, CliError> {
    text.split(',')
        .map(|w| {
            w.trim()
                .parse::<Rational>()
                .map_err(|e| CliError::Input(format!("weight {w:?}: {e}")))
        })
        .collect()
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Internal(e.to_string()))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn solve(
    env: &Environment,
    kind: SolveKind,
    weights: Option<&str>,
    seller_iir: bool,
) -> Result<(Value, Checks), CliError> {
    match kind {
        SolveKind::Rsw => {
            let sol = match weights {
                Some(w) => solve_rsw_weighted(env, &parse_weights(w)?)?,
                None => solve_rsw(env)?,
            };
            Ok((to_value(&sol)?, sol.verification))
        }
        SolveKind::FullInfo => {
            let sol = solve_full_information(env);
            Ok((to_value(&sol)?, sol.verification))
        }
        SolveKind::ExAnte => {
            let sol = solve_ex_ante_optimal_with(env, seller_iir)?;
            Ok((to_value(&sol)?, sol.verification))
        }
        SolveKind::Efficient => Ok((json!({ "rule": to_value(&efficient_rule(env))? }), Checks::new())),
    }
}

fn check(env: &Environment, kind: CheckKind, alloc: Option<&Path>) -> Result<Value, CliError> {
    let need_alloc = || {
        alloc
            .ok_or_else(|| CliError::Input("--alloc is required for this check".into()))
            .and_then(|p| load_allocation(p, env))
    };
    Ok(match kind {
        CheckKind::Feasible => {
            let report = check_constraints(env, &need_alloc()?, &env.prior());
            json!({ "verdict": report.flags.feasible, "constraints": to_value(&report)? })
        }
        CheckKind::Core => {
            let c = check_core(env, &need_alloc()?)?;
            json!({ "verdict": c.core, "detail": to_value(&c)? })
        }
        CheckKind::StrongSolution => {
            let c = check_strong_solution(env)?;
            json!({ "verdict": c.holds, "detail": to_value(&c)? })
        }
        CheckKind::Fgp => {
            let c = check_fgp_exists(env)?;
            json!({ "verdict": c.exists, "detail": to_value(&c)? })
        }
        CheckKind::Snp => {
            let c = check_snp_exists(env)?;
            json!({ "verdict": c.exists, "detail": to_value(&c)? })
        }
    })
}

fn report(
    env: &Environment,
    csv_dir: Option<&Path>,
    seller_iir: bool,
) -> Result<(Value, Checks), CliError> {
    let comparison = payoff_comparison_report_with(env, seller_iir)?;
    let strong = check_strong_solution(env)?;
    let fgp = ExistenceCheck {
        exists: strong.holds,
        allocation: strong.holds.then(|| strong.rsw.clone()),
    };
    let snp = check_snp_exists(env)?;
    let polygon = if env.x_size() == 2 {
        Some(seller_payoff_set(env)?)
    } else {
        None
    };
    if let Some(dir) = csv_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
        write_file(&dir.join("allocation_rules.csv"), &plot_csv(&comparison))?;
        if let Some(p) = &polygon {
            write_file(&dir.join("payoff_set.csv"), &polygon_csv(p))?;
        }
    }
    let outputs = json!({
        "comparison": to_value(&comparison)?,
        "strong_solution": strong.holds,
        "fgp": fgp.exists,
        "fgp_detail": to_value(&fgp)?,
        "snp": snp.exists,
        "snp_detail": to_value(&snp)?,
        "payoff_set": to_value(&polygon)?,
    });
    Ok((outputs, comparison.checks))
}

/// Runs a parsed command and returns the report.
pub fn execute(cli: &Cli) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let (name, env_file) = match &cli.command {
        Command::Solve { kind, env_file, .. } => (
            format!("solve {}", kind.to_possible_value().expect("named").get_name()),
            env_file,
        ),
        Command::Check { kind, env_file, .. } => (
            format!("check {}", kind.to_possible_value().expect("named").get_name()),
            env_file,
        ),
        Command::Report { env_file, .. } => ("report".to_string(), env_file),
    };
    let env = load_environment(env_file)?;
    let (outputs, verification) = match &cli.command {
        Command::Solve {
            kind,
            weights,
            seller_iir,
            ..
        } => solve(&env, *kind, weights.as_deref(), *seller_iir)?,
        Command::Check { kind, alloc, .. } => (check(&env, *kind, alloc.as_deref())?, Checks::new()),
        Command::Report {
            csv_dir,
            seller_iir,
            ..
        } => report(&env, csv_dir.as_deref(), *seller_iir)?,
    };
    Ok(RunReport {
        command: name,
        environment_digest: environment_digest(&env),
        outputs,
        verification,
        timing_ms: cli.timing.then(|| start.elapsed().as_secs_f64() * 1e3),
    })
}

/// Executes, writes the report and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(report) => {
            let text = serde_json::to_string_pretty(&report).expect("serializable report") + "\n";
            match &cli.out {
                Some(path) => {
                    if let Err(e) = write_file(path, &text) {
                        eprintln!("error: {e}");
                        return e.exit_code();
                    }
                }
                None => print!("{text}"),
            }
            if report.passed() {
                EXIT_OK
            } else {
                eprintln!("error: verification failed: {}", report.verification.failures().join(", "));
                EXIT_VERIFICATION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(CliError::Input(String::new()).exit_code(), EXIT_INPUT);
        assert_eq!(CliError::Precondition(String::new()).exit_code(), EXIT_PRECONDITION);
        assert_eq!(CliError::Internal(String::new()).exit_code(), EXIT_VERIFICATION);
        let e: CliError = RefineError::Verification(vec!["x".into()]).into();
        assert_eq!(e.exit_code(), EXIT_VERIFICATION);
        let e: CliError = RefineError::UnsupportedDimension(3).into();
        assert_eq!(e.exit_code(), EXIT_PRECONDITION);
        let e: CliError = BenchmarkError::MonotonicityHypothesisFails { x: 1 }.into();
        assert_eq!(e.exit_code(), EXIT_PRECONDITION);
        let e: CliError = RswError::BadWeights.into();
        assert_eq!(e.exit_code(), EXIT_INPUT);
    }

    #[test]
    fn failed_verification_forces_nonzero_exit() {
        let mut report = RunReport {
            command: "solve rsw".into(),
            environment_digest: String::new(),
            outputs: Value::Null,
            verification: Checks::new(),
            timing_ms: None,
        };
        assert!(report.passed());
        report.verification.push("seller_bic", false);
        assert!(!report.passed());
    }

    #[test]
    fn weights_parse_exactly() {
        let w = parse_weights("1, 2/3,4").unwrap();
        assert_eq!(w, vec![Rational::from_integer(1), Rational::new(2, 3), Rational::from_integer(4)]);
        assert!(parse_weights("1,x").is_err());
    }
}
