//! Command-line front end: exact laws, simulation, and hitting analysis for
//! multi-jump Poisson streams and their randomly time-changed variants.

mod commands;
mod manifest;
mod output;
mod suites;

use std::io::Write;

use clap::{Parser, Subcommand};

use commands::{Execution, HitArgs, OutputArgs, PmfArgs, ReplayArgs, SimulateArgs, VerifyArgs};
use output::Format;

/// Exact laws, simulation, and hitting analysis for multi-jump Poisson
/// streams and their randomly time-changed variants.
#[derive(Parser)]
#[command(name = "orderk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the exact terminal distribution.
    Pmf(PmfArgs),
    /// Sample paths and summarize the terminal values.
    Simulate(SimulateArgs),
    /// Compare closed-form, renewal-recursion, and Monte Carlo hitting
    /// probabilities for one level.
    Hit(HitArgs),
    /// Run a self-verification suite and report per-check rows.
    Verify(VerifyArgs),
    /// Re-execute a recorded manifest and compare output checksums.
    Replay(ReplayArgs),
}

fn main() {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(classify(&err));
        }
    }
}

fn run(command: &Command) -> anyhow::Result<i32> {
    let exec = match command {
        Command::Pmf(args) => commands::run_pmf(args)?,
        Command::Simulate(args) => commands::run_simulate(args)?,
        Command::Hit(args) => commands::run_hit(args)?,
        Command::Verify(args) => suites::run_verify(args)?,
        Command::Replay(args) => return run_replay(args),
    };
    let output = output_of(command).expect("replay returned above");
    if let Some(dir) = &output.out {
        manifest::persist(dir, &exec)?;
    }
    emit(&exec, output.format)?;
    Ok(exec.exit)
}

fn output_of(command: &Command) -> Option<&OutputArgs> {
    match command {
        Command::Pmf(args) => Some(&args.output),
        Command::Simulate(args) => Some(&args.output),
        Command::Hit(args) => Some(&args.output),
        Command::Verify(args) => Some(&args.output),
        Command::Replay(_) => None,
    }
}

fn emit(exec: &Execution, format: Format) -> anyhow::Result<()> {
    match format {
        Format::Human => print!("{}", exec.human),
        Format::Json => std::io::stdout().write_all(exec.json())?,
        Format::Csv => print!("{}", exec.csv),
    }
    Ok(())
}

fn run_replay(args: &ReplayArgs) -> anyhow::Result<i32> {
    let stored = manifest::load(&args.manifest)?;
    let mut argv: Vec<std::ffi::OsString> = vec!["orderk".into()];
    for item in &stored.argv {
        argv.push(item.into());
    }
    argv.push("--out".into());
    argv.push(args.out.clone().into_os_string());

    let cli = Cli::try_parse_from(&argv)
        .map_err(|err| anyhow::anyhow!("manifest argv does not parse: {err}"))?;
    let exec = match &cli.command {
        Command::Pmf(inner) => commands::run_pmf(inner)?,
        Command::Simulate(inner) => commands::run_simulate(inner)?,
        Command::Hit(inner) => commands::run_hit(inner)?,
        Command::Verify(inner) => suites::run_verify(inner)?,
        Command::Replay(_) => anyhow::bail!("a replay manifest cannot itself be a replay"),
    };
    manifest::persist(&args.out, &exec)?;

    let mut all_match = true;
    for (name, bytes) in &exec.files {
        let sha = manifest::sha256_hex(bytes);
        match stored.checksums.get(*name) {
            Some(expected) if *expected == sha => {
                println!("match     {name}  {}", &sha[..12]);
            }
            Some(expected) => {
                all_match = false;
                println!("MISMATCH  {name}  {} vs recorded {}", &sha[..12], &expected[..12]);
            }
            None => {
                all_match = false;
                println!("MISSING   {name}  absent from the manifest");
            }
        }
    }
    for name in stored.checksums.keys() {
        if !exec.files.iter().any(|(produced, _)| produced == name) {
            all_match = false;
            println!("EXTRA     {name}  recorded but not produced");
        }
    }
    Ok(i32::from(!all_match))
}

/// Maps failures to the documented exit codes: 2 for rejected parameters or
/// degenerate inputs, 3 for requests outside the implemented capabilities,
/// 1 otherwise.
fn classify(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(lib) = cause.downcast_ref::<orderk::Error>() {
            return match lib {
                orderk::Error::Domain { .. } | orderk::Error::Degenerate(_) => 2,
                orderk::Error::DerivativeUnavailable { .. } | orderk::Error::Unsupported(_) => 3,
            };
        }
    }
    1
}
