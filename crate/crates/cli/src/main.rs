//! `mdlsynth` command-line front end.

mod args;
mod commands;
mod paths;
mod quickstart;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use mdlsynth::par::Execution;
use mdlsynth::rng::derive_seed;
use serde_json::json;

use args::{Cli, Command};
use paths::OutDir;

/// Settings shared by every subcommand.
pub struct Ctx {
    pub seed: u64,
    pub exec: Execution,
    pub out: OutDir,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run_id = format!("{:08x}", derive_seed(cli.seed, "run-id", 0) as u32);
    init_logging(&cli.log_level, run_id);

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = if e.downcast_ref::<std::io::Error>().is_some() {
                "io"
            } else if e.downcast_ref::<mdlsynth::Error>().is_some() {
                "synthesis"
            } else {
                "operational"
            };
            let chain: Vec<String> = e.chain().skip(1).map(ToString::to_string).collect();
            let body =
                json!({ "error": { "kind": kind, "message": e.to_string(), "causes": chain } });
            eprintln!("{body}");
            ExitCode::from(1)
        }
    }
}

fn init_logging(level: &str, run_id: String) {
    env_logger::Builder::new()
        .parse_filters(level)
        .format(move |buf, record| {
            writeln!(
                buf,
                "level={} run={} target={} msg={:?}",
                record.level(),
                run_id,
                record.target(),
                record.args().to_string()
            )
        })
        .init();
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let exec = match cli.workers {
        Some(0) => anyhow::bail!("--workers must be at least 1"),
        Some(1) => Execution::Sequential,
        Some(w) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build_global()?;
            Execution::Parallel
        }
        None => Execution::Parallel,
    };
    let ctx = Ctx {
        seed: cli.seed,
        exec,
        out: OutDir::new(cli.out_dir),
    };
    log::info!("output directory {}", ctx.out.root().display());
    match cli.command {
        Command::Gen(a) => commands::gen(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Oracle(a) => commands::oracle(&ctx, a),
        Command::Optimize(a) => commands::optimize(&ctx, a),
        Command::Bench(a) => commands::bench(&ctx, a),
        Command::MetricsTrace(a) => commands::metrics_trace(&ctx, a),
        Command::Quickstart(a) => quickstart::run(&ctx, a),
    }
}
