use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use proxkit_bench::runner::{
    run, run_compare, BenchmarkSpec, ProblemName, RunOutcome, Sizes, SolverName,
};

#[derive(Parser, Debug)]
#[command(
    name = "proxkit-bench",
    version,
    about = "Solve benchmark problems and record convergence traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a problem, solve it and write a CSV trace plus a JSON status file.
    Run(RunArgs),
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    #[arg(long, value_enum)]
    problem: ProblemName,
    #[arg(long, value_enum, default_value_t = SolverName::Panoc)]
    solver: SolverName,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace CSV; the status JSON goes beside it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run every applicable solver on the same instance, concurrently.
    #[arg(long)]
    compare: bool,
    /// Add the normalized error column against a cached high-accuracy solution.
    #[arg(long)]
    reference: bool,
    #[command(flatten)]
    sizes: Sizes,
}

fn report(solver: SolverName, outcome: &RunOutcome) {
    // a closed pipe (e.g. `| head`) must not turn a finished solve into a panic
    let mut out = io::stdout().lock();
    let _ = writeln!(
        out,
        "{solver}: {:?} after {} iterations, residual {:.3e}",
        outcome.status,
        outcome.iterations(),
        outcome.final_residual()
    );
    for (name, value) in &outcome.metrics {
        let _ = writeln!(out, "  {name} = {value:.6e}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { 1 } else { 0 });
        }
    };
    let Command::Run(args) = cli.command;
    let spec = BenchmarkSpec {
        problem: args.problem,
        sizes: args.sizes,
        seed: args.seed,
        solver: args.solver,
        tol: args.tol,
        max_iters: args.max_iters,
        reference: args.reference,
        out: args.out,
    };
    if args.compare {
        let results = match run_compare(&spec) {
            Ok(results) => results,
            Err(err) => {
                eprintln!("error: {err}");
                return ExitCode::from(1);
            }
        };
        let mut code = 0;
        for (solver, result) in results {
            match result {
                Ok(outcome) => {
                    report(solver, &outcome);
                    code = code.max(outcome.exit_code());
                }
                Err(err) => {
                    eprintln!("error ({solver}): {err}");
                    code = 1;
                }
            }
        }
        return ExitCode::from(code as u8);
    }
    match run(&spec) {
        Ok(outcome) => {
            report(spec.solver, &outcome);
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
