//! `wsol` — command-line front-end for the WSOL evaluation toolkit.
//!
//! Every subcommand prints a machine-readable JSON summary to stdout.
//! Exit codes: 0 success, 1 validation error, 2 I/O error.

mod commands;
mod workspace;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "wsol",
    about = "Pseudo bounding-box annotation, threshold estimation, and localization scoring",
    version
)]
struct Cli {
    /// Worker threads for per-image parallelism (0 = all cores). Results do
    /// not depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate Selective Search proposals for a directory of images.
    Propose(commands::propose::Args),
    /// Build pseudo ground-truth boxes from proposals or maps.
    Annotate(commands::annotate::Args),
    /// Apply seeded noise to ground-truth boxes.
    Perturb(commands::perturb::Args),
    /// Score localization maps against reference boxes.
    Eval(commands::eval::Args),
    /// Estimate the binarization threshold on a validation split.
    Tau(commands::tau::Args),
    /// Early stopping, configuration selection, and the protocol matrix.
    Select(commands::select::Args),
    /// Emit CSV tables and SVG plots from run manifests.
    Report(commands::report::Args),
    /// Check every artifact referenced by a workspace manifest.
    Validate(commands::validate::Args),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not errors.
            if err.use_stderr() {
                eprintln!("{err}");
                std::process::exit(1);
            }
            err.print().ok();
            std::process::exit(0);
        }
    };

    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .ok();
    }

    let result = match cli.command {
        Command::Propose(args) => commands::propose::run(args),
        Command::Annotate(args) => commands::annotate::run(args),
        Command::Perturb(args) => commands::perturb::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Tau(args) => commands::tau::run(args),
        Command::Select(args) => commands::select::run(args),
        Command::Report(args) => commands::report::run(args),
        Command::Validate(args) => commands::validate::run(args),
    };

    match result {
        Ok(summary) => {
            println!("{summary}");
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code(&err));
        }
    }
}

/// 2 for filesystem failures, 1 for everything else (validation).
fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<wsol_core::Error>() {
            if core.is_io() {
                return 2;
            }
            return 1;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}
