use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use agct::concolic::{ConcolicConfig, Strategy, StrategyKind};
use agct::driver::{crabs_run, serialize_suite, BudgetConfig, RunConfig, RunReport};
use agct::ir::GoalSet;
use agct::monitor::monitor_to_dot;
use agct::parse::parse_program;

#[derive(Parser)]
#[command(name = "agct", version, about = "Abstraction-guided concolic test generation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a branch-covering test suite for a program.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Program source (.imp)
    file: PathBuf,
    /// Total fuel budget for the whole run
    #[arg(long, default_value_t = 200_000)]
    budget_total: u64,
    /// Per-iteration concolic fuel (default: 80% of a fifth of the total)
    #[arg(long)]
    budget_concolic: Option<u64>,
    /// Per-iteration model-checking fuel (default: 20% of a fifth of the total)
    #[arg(long)]
    budget_mc: Option<u64>,
    /// Branch-selection strategy
    #[arg(long, default_value = "cfg", value_parser = parse_strategy)]
    strategy: StrategyKind,
    /// Random seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// randVal() range: values drawn from [-N, N]
    #[arg(long, default_value_t = 1000)]
    rand_range: i64,
    /// Per-run executed-transition cap
    #[arg(long, default_value_t = 10_000)]
    step_cap: u64,
    /// Write the coverage report as JSON
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the generated test suite as JSON
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Write per-iteration ARGs as DOT files into this directory
    #[arg(long)]
    dump_arg: Option<PathBuf>,
    /// Write per-iteration monitors as DOT files into this directory
    #[arg(long)]
    dump_monitor: Option<PathBuf>,
    /// Write the program control-flow graph as DOT
    #[arg(long)]
    dump_cfg: Option<PathBuf>,
    /// Log every solver query to a file, one conjunct per line
    #[arg(long)]
    dump_queries: Option<PathBuf>,
    /// Pure concolic testing, no model checking; coverage is reported
    /// against the graph-reachable branch count
    #[arg(long)]
    baseline_concolic: bool,
    /// Comma-separated testing/checking percentage splits, e.g.
    /// `100/0,80/20,50/50,20/80,0/100`; emits one report row per split
    #[arg(long)]
    ratio_sweep: Option<String>,
}

fn parse_strategy(s: &str) -> Result<StrategyKind, String> {
    StrategyKind::parse(s).ok_or_else(|| format!("unknown strategy `{s}` (dfs|rnd-branch|unf-rnd|cfg)"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Cmd::Run(args) = cli.command;
    match run(args) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(args: RunArgs) -> Result<ExitCode, String> {
    if let Some(path) = &args.dump_queries {
        agct::solver::set_query_dump(path).map_err(|e| e.to_string())?;
    }
    let source = std::fs::read_to_string(&args.file)
        .map_err(|e| format!("{}: {e}", args.file.display()))?;
    let program = parse_program(&source).map_err(|e| e.to_string())?;
    if let Some(path) = &args.dump_cfg {
        std::fs::write(path, program.to_dot("cfg")).map_err(|e| e.to_string())?;
    }
    let goals: GoalSet = program.branches();
    let defaults = BudgetConfig::with_default_split(args.budget_total);
    let budget = BudgetConfig {
        total: args.budget_total,
        concolic: args.budget_concolic.unwrap_or(defaults.concolic),
        mc: if args.baseline_concolic {
            0
        } else {
            args.budget_mc.unwrap_or(defaults.mc)
        },
    };
    let cfg = RunConfig {
        budget,
        strategy: Strategy { kind: args.strategy, seed: args.seed },
        concolic: ConcolicConfig { rand_range: args.rand_range, step_cap: args.step_cap },
        baseline: args.baseline_concolic,
    };

    if let Some(spec) = &args.ratio_sweep {
        return ratio_sweep(&program, &goals, &cfg, spec, &args);
    }

    let (report, artifacts) = crabs_run(&program, &goals, &cfg);
    emit(&args, &program, &cfg, &report, &artifacts)?;
    print_summary(&report, &artifacts);
    Ok(exit_code(&report, &artifacts))
}

fn exit_code(_report: &RunReport, artifacts: &agct::driver::RunArtifacts) -> ExitCode {
    if artifacts.remaining.is_empty() {
        ExitCode::from(0)
    } else if artifacts.stalled {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn print_summary(report: &RunReport, artifacts: &agct::driver::RunArtifacts) {
    let r = report.branches - report.unreachable.len() as u64;
    println!(
        "branches: {}  covered: {}/{}  unreachable: {}  ratio: {:.1}%  tests: {}  fuel: {}",
        report.branches,
        report.covered,
        r,
        report.unreachable.len(),
        report.ratio * 100.0,
        artifacts.suite.len(),
        artifacts.fuel_spent,
    );
    if !artifacts.remaining.is_empty() {
        let left: Vec<String> = artifacts.remaining.iter().map(|t| t.to_string()).collect();
        println!("uncovered: {}", left.join(", "));
    }
}

fn emit(
    args: &RunArgs,
    program: &agct::Program,
    cfg: &RunConfig,
    report: &RunReport,
    artifacts: &agct::driver::RunArtifacts,
) -> Result<(), String> {
    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
        std::fs::write(path, json).map_err(|e| e.to_string())?;
    }
    if let Some(path) = &args.suite {
        let file = serialize_suite(program, &artifacts.suite, &cfg.concolic, cfg.strategy.seed);
        let json = serde_json::to_string_pretty(&file).map_err(|e| e.to_string())?;
        std::fs::write(path, json).map_err(|e| e.to_string())?;
    }
    if let Some(dir) = &args.dump_arg {
        std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
        for (i, arg) in artifacts.args.iter().enumerate() {
            let path = dir.join(format!("iter{}_arg.dot", i + 1));
            std::fs::write(path, arg.to_dot(program)).map_err(|e| e.to_string())?;
        }
    }
    if let Some(dir) = &args.dump_monitor {
        std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
        for (i, mon) in artifacts.monitors.iter().enumerate() {
            let path = dir.join(format!("iter{}_monitor.dot", i + 1));
            std::fs::write(path, monitor_to_dot(mon)).map_err(|e| e.to_string())?;
        }
    }
    Ok(())
}

fn ratio_sweep(
    program: &agct::Program,
    goals: &GoalSet,
    base: &RunConfig,
    spec: &str,
    args: &RunArgs,
) -> Result<ExitCode, String> {
    let mut rows = Vec::new();
    let chunk = (base.budget.total / 5).max(1);
    for part in spec.split(',') {
        let (c, m) = part
            .trim()
            .split_once('/')
            .ok_or_else(|| format!("bad ratio `{part}`, expected like 80/20"))?;
        let c: u64 = c.parse().map_err(|_| format!("bad ratio `{part}`"))?;
        let m: u64 = m.parse().map_err(|_| format!("bad ratio `{part}`"))?;
        if c + m != 100 {
            return Err(format!("ratio `{part}` does not sum to 100"));
        }
        let mut cfg = base.clone();
        cfg.budget = BudgetConfig {
            total: base.budget.total,
            concolic: (chunk * c / 100).max(if c > 0 { 1 } else { 0 }),
            mc: (chunk * m / 100).max(if m > 0 { 1 } else { 0 }),
        };
        cfg.baseline = m == 0;
        let (report, artifacts) = crabs_run(program, goals, &cfg);
        println!(
            "ratio {part}: covered {}/{} unreachable {} fuel {}",
            report.covered,
            report.branches - report.unreachable.len() as u64,
            report.unreachable.len(),
            artifacts.fuel_spent,
        );
        rows.push(serde_json::json!({ "split": part.trim(), "report": report }));
    }
    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&rows).map_err(|e| e.to_string())?;
        std::fs::write(path, json).map_err(|e| e.to_string())?;
    }
    Ok(ExitCode::from(0))
}
