mod commands;
mod error;
mod matrix;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use commands::{ApproxArgs, CdfArgs, DecomposeArgs, InfdivArgs, Outcome, ValidateArgs, VerifyArgs};
use error::{CliError, EXIT_HYPOTHESIS, EXIT_INCONCLUSIVE, EXIT_INPUT, EXIT_OK, EXIT_UNCONVERGED};
use report::{write_atomic, RunReport, Versions};

/// Multivariate gamma CDFs, infinite divisibility and correlation-inequality checks.
#[derive(Parser)]
#[command(name = "mvgamma", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    pretty: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a matrix is a valid correlation matrix.
    Validate(ValidateArgs),
    /// Evaluate the lower-orthant CDF.
    Cdf(CdfArgs),
    /// Test infinite divisibility.
    Infdiv(InfdivArgs),
    /// Run a theorem check along its matrix path.
    Verify(VerifyArgs),
    /// Tail and Taylor approximations for equicorrelated structures.
    Approx(ApproxArgs),
    /// Factor representation of a matrix.
    Decompose(DecomposeArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Cdf(_) => "cdf",
            Command::Infdiv(_) => "infdiv",
            Command::Verify(_) => "verify",
            Command::Approx(_) => "approx",
            Command::Decompose(_) => "decompose",
        }
    }

    fn run(&self) -> Result<Outcome, CliError> {
        match self {
            Command::Validate(a) => commands::validate(a),
            Command::Cdf(a) => commands::cdf(a),
            Command::Infdiv(a) => commands::infdiv(a),
            Command::Verify(a) => commands::verify(a),
            Command::Approx(a) => commands::approx(a),
            Command::Decompose(a) => commands::decompose_cmd(a),
        }
    }
}

fn status_name(code: i32) -> &'static str {
    match code {
        EXIT_OK => "ok",
        EXIT_INPUT => "input-error",
        EXIT_HYPOTHESIS => "hypothesis-failure",
        EXIT_INCONCLUSIVE => "inconclusive",
        EXIT_UNCONVERGED => "unconverged",
        _ => "error",
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("MVGAMMA_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("MVGAMMA_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let argv: Vec<String> = std::env::args().collect();
    let outcome = init_threads().and_then(|_| cli.command.run());
    let outcome = outcome.unwrap_or_else(|e| Outcome {
        results: serde_json::Value::Null,
        exit: e.exit_code(),
        digest: None,
        seed: None,
        error: Some(e.to_json()),
    });
    let mut report = RunReport {
        command: cli.command.name().to_string(),
        argv,
        input_digest: outcome.digest,
        seed: outcome.seed,
        versions: Versions::default(),
        status: status_name(outcome.exit).to_string(),
        exit_code: outcome.exit,
        results: outcome.results,
        error: outcome.error,
        threads: rayon::current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let mut text = report.to_json(cli.pretty);
    text.push('\n');
    match &cli.output {
        None => print!("{text}"),
        Some(p) => {
            if let Err(e) = write_atomic(p, &text) {
                report.exit_code = EXIT_INPUT;
                report.status = status_name(EXIT_INPUT).to_string();
                report.error = Some(e.to_json());
                println!("{}", report.to_json(cli.pretty));
            }
        }
    }
    if let Some(e) = &report.error {
        eprintln!("mvgamma {}: {}", report.command, e["message"].as_str().unwrap_or("error"));
    }
    ExitCode::from(report.exit_code as u8)
}
