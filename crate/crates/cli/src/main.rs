//! `axdiff`: satisfiability and interpolation for arrays with `diff`.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use axdiff::cli::{parse, run, Command, RunOptions, EXIT_PARSE, EXIT_USAGE};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "axdiff", version, about = "Arrays with diff: satisfiability and interpolants")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide satisfiability of all assertions.
    Check(Common),
    /// Compute an interpolant of the A and B assertions.
    Interp(Common),
}

#[derive(Args)]
struct Common {
    /// Problem file.
    file: PathBuf,
    /// Print a model when satisfiable.
    #[arg(long)]
    model: bool,
    /// Write a JSON trace to FILE.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Check the interpolant with the independent validator.
    #[arg(long)]
    validate: bool,
    /// Seed for the branching order.
    #[arg(long)]
    seed: Option<u64>,
    /// Upper bound on proof tree branches.
    #[arg(long, default_value_t = 100_000)]
    max_branches: usize,
    /// Print the interpolant as reconstructed.
    #[arg(long)]
    no_simplify: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    let (cmd, args) = match cli.cmd {
        Cmd::Check(a) => (Command::Check, a),
        Cmd::Interp(a) => (Command::Interp, a),
    };
    let text = match fs::read_to_string(&args.file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.file.display());
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let prob = match parse(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{}:{e}", args.file.display());
            return ExitCode::from(EXIT_PARSE as u8);
        }
    };
    let opts = RunOptions {
        model: args.model,
        trace: args.trace.is_some(),
        validate: args.validate,
        seed: args.seed,
        max_branches: args.max_branches,
        simplify: !args.no_simplify,
    };
    let out = run(cmd, &prob, &opts);
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    if let (Some(path), Some(trace)) = (&args.trace, &out.trace) {
        let body = serde_json::to_string_pretty(trace).expect("trace is valid JSON");
        if let Err(e) = fs::write(path, body) {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(EXIT_USAGE as u8);
        }
    }
    ExitCode::from(out.code as u8)
}
