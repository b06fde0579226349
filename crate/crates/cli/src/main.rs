//! `cosparse`: command-line front end.
//!
//! Exit codes: 0 success, 1 domain failure (falsified property, solver
//! without a certificate, numerical errors), 2 usage error. Errors go to
//! stderr as one line of JSON, `{"code": ..., "message": ...}`.

mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use cosparse_core::Error;
use serde_json::json;

use args::{Cli, Command};
use commands::{Ctx, Output};

fn fail(code: &str, message: &str, exit: u8) -> ExitCode {
    eprintln!("{}", json!({"code": code, "message": message}));
    ExitCode::from(exit)
}

fn exit_for(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = err.print();
                    ExitCode::SUCCESS
                }
                _ => fail("usage", err.render().to_string().trim_end(), 2),
            };
        }
    };

    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads as usize)
        .build_global()
    {
        return fail("threads", &e.to_string(), 1);
    }

    let seed_given = cli.seed.is_some();
    let mut ctx = Ctx {
        seed: cli.seed.unwrap_or_else(rand::random),
        out: cli.out.clone(),
        format: cli.format,
        quiet: cli.quiet,
    };
    let result = match &cli.command {
        Command::Frame(a) => commands::frame(&ctx, a),
        Command::Signal(a) => commands::signal(&ctx, a),
        Command::Solve(a) => commands::solve(&ctx, a),
        Command::Bounds(a) => commands::bounds(&ctx, a),
        Command::Width(a) => commands::width(&ctx, a),
        Command::Nsp(a) => commands::nsp(&ctx, a),
        Command::Phase(a) => commands::phase(&ctx, a, seed_given).map(|(out, seed)| {
            ctx.seed = seed;
            out
        }),
    };
    if !ctx.quiet {
        eprintln!("seed: {}", ctx.seed);
    }
    match result {
        Ok(Output { stdout, failed }) => {
            let mut lock = std::io::stdout().lock();
            if lock.write_all(stdout.as_bytes()).and_then(|_| lock.flush()).is_err() {
                return ExitCode::from(1);
            }
            if failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => fail(e.code(), &e.to_string(), exit_for(&e)),
    }
}
