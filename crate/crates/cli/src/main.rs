use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use regplace::bench::{
    self, compare, load_scenario_file, random_scenario, render, run_policy, BenchError,
    GeneratorConfig, OutputFormat, Policy, RunReport, Scenario, SolveOptions,
};
use regplace::cost::{CacheMode, CostError};
use regplace::game::{GameError, DEFAULT_MAX_ITERS, DEFAULT_SPACE_LIMIT};

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_SPACE_TOO_LARGE: u8 = 4;
const EXIT_NO_EQUILIBRIUM: u8 = 5;

#[derive(Parser)]
#[command(
    name = "regplace",
    version,
    about = "Registry-aware energy placement for microservice DAGs"
)]
struct Cli {
    /// Increase log verbosity (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario document.
    Validate(ScenarioArg),
    /// Solve a scenario under one or all policies.
    Solve(SolveArgs),
    /// Full-space optimum compared against the exclusive-registry policies.
    Oracle(SolveArgs),
    /// Solve both bundled case studies and evaluate the acceptance checks.
    PaperRepro(OutArg),
    /// Write a seeded random scenario.
    Gen(GenArgs),
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario document.
    #[arg(value_name = "PATH", required_unless_present = "scenario")]
    path: Option<PathBuf>,
    #[arg(long, value_name = "PATH", conflicts_with = "path")]
    scenario: Option<PathBuf>,
}

impl ScenarioArg {
    fn path(&self) -> &Path {
        self.scenario
            .as_deref()
            .or(self.path.as_deref())
            .expect("clap enforces one of the two")
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    HubOnly,
    RegionalOnly,
    Hybrid,
    Oracle,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum CacheArg {
    Cold,
    Warm,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct OutArg {
    /// Write output here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[arg(long, value_enum, default_value = "hybrid")]
    policy: PolicyArg,
    /// Same as `--policy all`.
    #[arg(long)]
    all: bool,
    /// Defaults to the scenario's own cache mode (cold unless stated).
    #[arg(long, value_enum)]
    cache: Option<CacheArg>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Largest joint strategy space enumerated exhaustively.
    #[arg(long, default_value_t = DEFAULT_SPACE_LIMIT)]
    limit: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    #[command(flatten)]
    out: OutArg,
    /// Exit with status 5 unless the hybrid policy reaches a pure equilibrium.
    #[arg(long)]
    require_nash: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    max_players: usize,
    #[arg(long, default_value_t = 2)]
    max_devices: usize,
    #[command(flatten)]
    out: OutArg,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        let code = match &e {
            BenchError::Parse(_) | BenchError::Model(_) | BenchError::UnknownRegistry(_) => {
                EXIT_VALIDATION
            }
            BenchError::Io { .. } => EXIT_IO,
            BenchError::Game(GameError::SpaceTooLarge { .. }) => EXIT_SPACE_TOO_LARGE,
            BenchError::Game(GameError::Model(_) | GameError::NoFeasibleStrategy(_))
            | BenchError::Cost(CostError::Model(_)) => EXIT_VALIDATION,
            _ => EXIT_FAILURE,
        };
        Failure::new(code, e.to_string())
    }
}

fn write_output(out: &OutArg, text: &str) -> Result<(), Failure> {
    match &out.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(arg: &ScenarioArg) -> Result<Scenario, Failure> {
    let path = arg.path();
    info!("loading {}", path.display());
    Ok(load_scenario_file(path)?)
}

fn validate(arg: &ScenarioArg) -> Result<(), Failure> {
    let s = load(arg)?;
    let sys = &s.system;
    println!(
        "ok: {} ({} microservices, {} dataflows, {} devices, {} registries)",
        s.name,
        sys.microservices().len(),
        sys.application().dataflows.len(),
        sys.devices().len(),
        sys.registries().len()
    );
    Ok(())
}

fn solve(args: &SolveArgs, policies: &[Policy], reference: Policy) -> Result<(), Failure> {
    let scenario = load(&args.scenario)?;
    let mode = match args.cache {
        Some(CacheArg::Cold) => CacheMode::Cold,
        Some(CacheArg::Warm) => CacheMode::Warm,
        None => scenario.cache_mode,
    };
    let opts = SolveOptions {
        max_iters: args.max_iters,
        limit: args.limit,
    };
    let mut reports = Vec::with_capacity(policies.len());
    for &p in policies {
        info!("solving {} with {p}", scenario.name);
        reports.push(run_policy(&scenario, p, mode, opts)?);
    }
    let savings = if reports.len() > 1 {
        compare(&reports, reference)
    } else {
        Vec::new()
    };
    let run = RunReport {
        scenario: scenario.name.clone(),
        cache_mode: mode,
        reports,
        savings,
    };
    let format = match args.format {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    };
    write_output(&args.out, &render(&run, format)?)?;

    if args.require_nash {
        for r in run.reports.iter().filter(|r| r.policy == Policy::Hybrid) {
            let eq = r
                .equilibrium
                .as_ref()
                .expect("hybrid carries dynamics outcome");
            if !(eq.converged && eq.is_pure_nash) {
                return Err(Failure::new(
                    EXIT_NO_EQUILIBRIUM,
                    format!("no pure equilibrium after {} sweeps", eq.iterations),
                ));
            }
        }
    }
    Ok(())
}

fn solve_policies(args: &SolveArgs) -> Vec<Policy> {
    if args.all {
        return Policy::ALL.to_vec();
    }
    match args.policy {
        PolicyArg::HubOnly => vec![Policy::HubOnly],
        PolicyArg::RegionalOnly => vec![Policy::RegionalOnly],
        PolicyArg::Hybrid => vec![Policy::Hybrid],
        PolicyArg::Oracle => vec![Policy::Oracle],
        PolicyArg::All => Policy::ALL.to_vec(),
    }
}

fn paper_repro(out: &OutArg) -> Result<(), Failure> {
    let outcome = bench::paper_repro(SolveOptions::default())?;
    write_output(out, &outcome.text)?;
    if outcome.passed() {
        Ok(())
    } else {
        let names: Vec<&str> = outcome.failures().map(|c| c.name.as_str()).collect();
        Err(Failure::new(
            EXIT_FAILURE,
            format!("violated: {}", names.join("; ")),
        ))
    }
}

fn gen(args: &GenArgs) -> Result<(), Failure> {
    let cfg = GeneratorConfig {
        max_players: args.max_players,
        max_devices: args.max_devices,
        ..GeneratorConfig::default()
    };
    write_output(&args.out, &random_scenario(args.seed, cfg).to_json())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate(arg) => validate(arg),
        Command::Solve(args) => solve(args, &solve_policies(args), Policy::Hybrid),
        Command::Oracle(args) => solve(
            args,
            &[Policy::HubOnly, Policy::RegionalOnly, Policy::Oracle],
            Policy::Oracle,
        ),
        Command::PaperRepro(out) => paper_repro(out),
        Command::Gen(args) => gen(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
