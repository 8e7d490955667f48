//! The `sevbench` command line. [`run`] is the whole program; [`run_with`]
//! takes the environment and output streams explicitly so it can be driven
//! in-process.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::{CommandFactory, FromArgMatches};

use args::{BenchCommand, Cli, Command, TreeCommand};
pub use commands::{CoresetFile, CurvesFile, EstimateReport};
pub use error::CliError;

/// Parses and runs one invocation, returning the process exit code: 0 on
/// success, 1 on a domain error, 2 on a usage error. Errors go to `err` as
/// one JSON line.
pub fn run_with(
    argv: Vec<OsString>,
    env: &dyn Fn(&str) -> Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    // Help and version are successful outcomes, not usage errors.
    if let Err(e) = Cli::command().try_get_matches_from(&argv) {
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    }
    match dispatch(argv, env, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", e.to_json_line());
            e.exit_code()
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv = args.into_iter().map(Into::into).collect();
    run_with(
        argv,
        &|k| std::env::var(k).ok(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}

fn dispatch(argv: Vec<OsString>, env: &dyn Fn(&str) -> Option<String>, out: &mut dyn Write) -> Result<(), CliError> {
    let argv = config::layer_argv(argv, env)?;
    let matches = Cli::command().try_get_matches_from(argv)?;
    let cli = Cli::from_arg_matches(&matches)?;
    let seed = cli.seed;
    match &cli.command {
        Command::Synth(a) => commands::synth(a, seed, out),
        Command::Embed(a) => commands::embed_cmd(a, seed, out),
        Command::Sample(a) => commands::sample(a, seed, out),
        Command::Enqueue(a) => commands::enqueue(a, out),
        Command::Estimate(a) => commands::estimate(a, out),
        Command::EvalSampling(a) => commands::eval_sampling(a, seed, out),
        Command::Bench { command } => match command {
            BenchCommand::Partition(a) => commands::bench_partition(a, seed, out),
            BenchCommand::Merge(a) => commands::bench_merge(a, out),
            BenchCommand::Replay(a) => commands::bench_replay(a, out),
            BenchCommand::Adopt(a) => commands::bench_adopt(a, out),
        },
        Command::Serve(a) => commands::serve(a, out),
        Command::Tree { command } => match command {
            TreeCommand::Validate { tree } => commands::tree_validate(tree.as_deref(), out),
            TreeCommand::Export { out: path } => commands::tree_export(path.as_deref(), out),
        },
    }
}
