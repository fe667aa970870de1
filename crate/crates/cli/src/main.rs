mod args;
mod commands;
mod config;

use std::process::ExitCode;

use anyhow::{Context, Result};

use crate::args::Command;
use crate::commands::Ctx;
use crate::config::{RunManifest, UsageError};

fn run() -> Result<()> {
    let resolved = config::resolve(std::env::args_os().collect())?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = resolved.jobs {
        builder = builder.num_threads(jobs);
    }
    let pool = builder.build().context("starting worker threads")?;

    std::fs::create_dir_all(&resolved.out_dir)
        .with_context(|| format!("creating {}", resolved.out_dir.display()))?;
    let mut ctx = Ctx {
        seed: resolved.seed,
        out_dir: resolved.out_dir.clone(),
        written: Vec::new(),
    };
    let name = resolved.command.name();
    pool.install(|| match &resolved.command {
        Command::Synth(a) => commands::synth(a, &mut ctx),
        Command::Ingest(a) => commands::ingest(a, &mut ctx),
        Command::Corr(a) => commands::corr(a, &mut ctx),
        Command::Simulate(a) => commands::simulate(a, &mut ctx),
        Command::Nowcast(a) => commands::nowcast(a, &mut ctx),
        Command::Vintages(a) => commands::vintages(a, &mut ctx),
    })?;

    let manifest = RunManifest {
        command: name.to_string(),
        config: resolved.config,
        master_seed: resolved.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: config::timestamp(),
    };
    let path = resolved.out_dir.join(RunManifest::file_name(name));
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    for p in &ctx.written {
        println!("wrote {}", p.display());
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// Kind and exit status for an error: 2 for usage, 1 otherwise.
fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return ("usage", 2);
        }
        if let Some(e) = cause.downcast_ref::<trends_core::Error>() {
            return (e.kind(), 1);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return ("io", 1);
        }
    }
    ("runtime", 1)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (kind, status) = classify(&err);
            let report = serde_json::json!({ "error": kind, "message": format!("{err:#}") });
            eprintln!("{report}");
            ExitCode::from(status)
        }
    }
}
