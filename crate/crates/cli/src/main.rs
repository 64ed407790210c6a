mod args;
mod commands;
mod exit;
mod settings;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::RefineArgs;
use exit::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version requests are not errors
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    init_logging(cli.global.verbose, cli.global.quiet);
    let code = match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(code)) => code,
        Ok(Err(err)) => {
            eprintln!("error: {err}");
            err.code
        }
        Err(_) => {
            eprintln!("error: internal failure");
            exit::INFRASTRUCTURE
        }
    };
    ExitCode::from(code)
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => tracing::Level::ERROR,
        (false, 0) => tracing::Level::WARN,
        (false, 1) => tracing::Level::INFO,
        (false, 2) => tracing::Level::DEBUG,
        _ => tracing::Level::TRACE,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    if let Command::Report {
        results,
        out_dir,
        group_by,
        max_k,
    } = &cli.command
    {
        return commands::report(results, out_dir, group_by, *max_k);
    }
    let settings = settings::resolve(&cli.global)?;
    if !cli.global.quiet {
        eprint!("{}", settings.describe());
    }
    match &cli.command {
        Command::Decompile {
            binary,
            sidecar,
            raw,
            out,
        } => commands::decompile(&settings, binary, sidecar.as_ref(), *raw, out.as_deref()),
        Command::Oracle { binary, inputs, out } => commands::oracle(&settings, binary, inputs, out.as_deref()),
        Command::Validate { source, tests, harness } => commands::validate(&settings, source, tests, harness.as_ref()),
        Command::Refine {
            binary,
            tests,
            inputs,
            harness,
            sidecar,
            out,
            outcome,
        } => commands::refine(
            &settings,
            RefineArgs {
                binary,
                tests: tests.as_deref(),
                inputs: inputs.as_deref(),
                harness: harness.as_ref(),
                sidecar: sidecar.as_ref(),
                out: out.as_deref(),
                outcome: outcome.as_deref(),
            },
        ),
        Command::Bench { corpus, results } => commands::bench(&settings, corpus, results.as_deref()),
        Command::Report { .. } => unreachable!("handled above"),
    }
}
