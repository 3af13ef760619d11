//! `mjls`: solve, simulate and verify delayed Markov jump LQ problems.
//!
//! Exit codes: 0 success, 1 input error, 2 not solvable, 3 path budget or QP
//! size exceeded, 4 verification failed.

mod output;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mjls_core::controller::{optimal_cost, ClosedLoop};
use mjls_core::io::{GainsDump, PolicyTreeDump, QpDump, TablesDump, TrajectoryRecord};
use mjls_core::model::Problem;
use mjls_core::oracle::{build_qp, is_positive_definite, solve_qp};
use mjls_core::policy::{PolicyContext, PolicyRegistry};
use mjls_core::riccati::solve_riccati;
use mjls_core::simulate::{exact_expected_cost, monte_carlo_cost, run_trajectory};
use mjls_core::{Error, SCHEMA_VERSION};

#[derive(Parser, Debug)]
#[command(name = "mjls", version, about = "LQ control of Markov jump linear systems with input delay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the Riccati sweep and print every table.
    Solve(ModelArgs),
    /// Print the feedback gain schedule.
    Gains(ModelArgs),
    /// Monte Carlo cost of a policy over sampled chain paths.
    Simulate(SimulateArgs),
    /// Exact expected cost of a policy by full path enumeration.
    Cost(CostArgs),
    /// Build and solve the exact policy-tree QP.
    Oracle(OracleArgs),
    /// Cross-check the Riccati solution against the oracle.
    Verify(VerifyArgs),
    /// Compare against the reference two-mode example.
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model file (JSON).
    #[arg(value_name = "MODEL", conflicts_with = "model")]
    path: Option<PathBuf>,
    /// Model file (JSON); alternative to the positional argument.
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Largest number of full chain paths any enumeration may visit.
    #[arg(long, default_value_t = 1_000_000)]
    budget: u128,
}

impl ModelArgs {
    fn load(&self) -> Result<Problem, Failure> {
        let path = self.path.as_ref().or(self.model.as_ref()).ok_or_else(|| {
            Failure::input("no model file given (positional MODEL or --model PATH)".to_string())
        })?;
        let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        Problem::from_json(&text).map_err(|e| Failure::from_error(e).context(&path.display().to_string()))
    }
}

#[derive(Args, Debug)]
struct PolicyArgs {
    /// Policy name; see the error message for the registered names.
    #[arg(long, default_value = "riccati")]
    policy: String,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Write every trajectory to this file as JSON lines.
    #[arg(long, value_name = "PATH")]
    dump: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CostArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Write the QP (H, b, c) and the optimal policy tree to this file.
    #[arg(long, value_name = "PATH")]
    dump: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Relative tolerance applied to every check.
    #[arg(long, default_value_t = mjls_core::verify::DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    runs: usize,
    #[arg(long, default_value_t = 1_000_000)]
    budget: u128,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: String) -> Self {
        Self { code: 1, message }
    }

    fn from_error(e: Error) -> Self {
        let code = match e {
            Error::WNotPositiveDefinite { .. } | Error::NotSolvable | Error::HessianNotPD | Error::Singular(_) => 2,
            Error::PathBudgetExceeded { .. } | Error::QpTooLarge { .. } => 3,
            _ => 1,
        };
        Self { code, message: e.to_string() }
    }

    fn context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::from_error(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::input(e.to_string())
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::input(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn build_policy(problem: &Problem, name: &str, budget: u128) -> Result<Box<dyn mjls_core::policy::Policy>, Failure> {
    let registry = PolicyRegistry::with_builtins();
    registry.build(name, &PolicyContext { problem, budget }).map_err(|e| {
        let unknown = matches!(e, Error::UnknownPolicy(_));
        let mut f = Failure::from_error(e);
        if unknown {
            let names: Vec<&str> = registry.names().map(|(n, _)| n).collect();
            f.message = format!("{} (available: {})", f.message, names.join(", "));
        }
        f
    })
}

fn cmd_solve(args: &ModelArgs) -> Result<(), Failure> {
    let problem = args.load()?;
    let tables = solve_riccati(&problem.model);
    let dump = TablesDump::new(&tables);
    match args.format {
        Format::Json => print_json(&dump)?,
        Format::Csv => output::tables_csv(&dump)?,
    }
    match &dump.failing {
        Some(f) => Err(Failure {
            code: 2,
            message: format!("W is not positive definite at t={}, mode {}", f.time, f.mode),
        }),
        None => Ok(()),
    }
}

fn cmd_gains(args: &ModelArgs) -> Result<(), Failure> {
    let problem = args.load()?;
    let cl = ClosedLoop::solve(&problem.model)?;
    let dump = GainsDump::new(&cl.schedule);
    match args.format {
        Format::Json => print_json(&dump),
        Format::Csv => output::gains_csv(&dump),
    }
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    schema_version: u32,
    policy: &'a str,
    runs: usize,
    seed: u64,
    mean: f64,
    std_error: f64,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let problem = args.model.load()?;
    let policy = build_policy(&problem, &args.policy.policy, args.model.budget)?;
    let (md, init) = (&problem.model, &problem.init);
    let summary = monte_carlo_cost(md, policy.as_ref(), init, args.runs, args.seed, args.threads)?;
    if let Some(path) = &args.dump {
        let mut out = BufWriter::new(fs::File::create(path)?);
        for run in 0..args.runs as u64 {
            let tr = run_trajectory(md, policy.as_ref(), init, args.seed, run)?;
            let line = serde_json::to_string(&TrajectoryRecord::new(&tr, args.seed, run))
                .map_err(|e| Failure::input(e.to_string()))?;
            writeln!(out, "{line}")?;
        }
        out.flush()?;
    }
    let result = SimulateOutput {
        schema_version: SCHEMA_VERSION,
        policy: &args.policy.policy,
        runs: summary.runs,
        seed: summary.seed,
        mean: summary.mean,
        std_error: summary.std_error,
    };
    match args.model.format {
        Format::Json => print_json(&result),
        Format::Csv => output::single_row_csv(&result),
    }
}

#[derive(Serialize)]
struct CostOutput<'a> {
    schema_version: u32,
    policy: &'a str,
    exact_expected_cost: f64,
    /// Optimal cost from the Riccati tables, when they are solvable.
    optimal_cost: Option<f64>,
}

fn cmd_cost(args: &CostArgs) -> Result<(), Failure> {
    let problem = args.model.load()?;
    let policy = build_policy(&problem, &args.policy.policy, args.model.budget)?;
    let exact = exact_expected_cost(&problem.model, policy.as_ref(), &problem.init, args.model.budget)?;
    let tables = solve_riccati(&problem.model);
    let optimal = if tables.is_solvable() { Some(optimal_cost(&problem.model, &tables, &problem.init)?) } else { None };
    let result = CostOutput {
        schema_version: SCHEMA_VERSION,
        policy: &args.policy.policy,
        exact_expected_cost: exact,
        optimal_cost: optimal,
    };
    match args.model.format {
        Format::Json => print_json(&result),
        Format::Csv => output::single_row_csv(&result),
    }
}

#[derive(Serialize)]
struct OracleOutput {
    schema_version: u32,
    variables: usize,
    hessian_positive_definite: bool,
    minimum: f64,
    solve_residual: f64,
}

#[derive(Serialize)]
struct OracleDump {
    schema_version: u32,
    qp: QpDump,
    tree: PolicyTreeDump,
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), Failure> {
    let problem = args.model.load()?;
    let qp = build_qp(&problem.model, &problem.init, args.model.budget)?;
    let pd = is_positive_definite(&qp);
    let sol = solve_qp(&qp)?;
    if let Some(path) = &args.dump {
        let dump = OracleDump { schema_version: SCHEMA_VERSION, qp: QpDump::new(&qp), tree: PolicyTreeDump::new(&sol.tree) };
        fs::write(path, serde_json::to_string(&dump).map_err(|e| Failure::input(e.to_string()))?)?;
    }
    let result = OracleOutput {
        schema_version: SCHEMA_VERSION,
        variables: qp.layout.variable_count(),
        hessian_positive_definite: pd,
        minimum: sol.minimum,
        solve_residual: sol.residual,
    };
    match args.model.format {
        Format::Json => print_json(&result),
        Format::Csv => output::single_row_csv(&result),
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Failure> {
    let problem = args.model.load()?;
    let report = mjls_core::verify::verify(&problem, args.model.budget, args.tol)?;
    match args.model.format {
        Format::Json => print_json(&report)?,
        Format::Csv => output::verify_csv(&report)?,
    }
    for check in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAIL {}: {:e} > {:e}", check.name, check.value, check.tol);
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure { code: 4, message: "verification failed".into() })
    }
}

fn cmd_reproduce(args: &ReproduceArgs) -> Result<(), Failure> {
    let report = mjls_core::reproduce::reproduce(args.runs, args.seed, args.budget)?;
    match args.format {
        Format::Json => print_json(&report)?,
        Format::Csv => output::reproduce_csv(&report)?,
    }
    let cost = &report.optimal_cost;
    eprintln!(
        "optimal cost: closed form {:.6}, QP {:.6}, exact {:.6}; reference {} ({:?})",
        cost.closed_form, cost.qp_minimum, cost.exact_expected, cost.printed, cost.status
    );
    if report.passed {
        Ok(())
    } else {
        Err(Failure { code: 4, message: "a reference value not flagged ambiguous was not reproduced".into() })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Gains(a) => cmd_gains(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Cost(a) => cmd_cost(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
