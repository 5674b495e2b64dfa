mod args;
mod commands;
mod manifest;
mod resolve;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;
use zoss_core::config::Config;

use args::{Cli, Command};
use manifest::{CheckEntry, RunManifest};
use resolve::Resolver;

const EXIT_FAILED_CHECK: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Stability(_) => "stability",
        Command::Generalize(_) => "generalize",
        Command::SweepBatch(_) => "sweep-batch",
        Command::SgdLimit(_) => "sgd-limit",
        Command::VerifyLemma1(_) => "verify-lemma1",
        Command::VerifyMoments(_) => "verify-moments",
        Command::Bounds(_) => "bounds",
    }
}

/// Returns whether every check passed.
fn run(cli: Cli) -> Result<bool> {
    let started = Instant::now();
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let mut r = Resolver::new(cfg)?;
    let seed = r.value("seed", cli.seed, 42u64)?;
    let out_dir = r.value("out", cli.out.clone(), PathBuf::from("zoss-out"))?;
    if let Some(t) = r.optional("threads", cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }

    let sub = subcommand_name(&cli.command);
    let output = commands::dispatch(&cli.command, &mut r, seed)?;

    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for (name, body) in &output.files {
        let path = out_dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    let config: BTreeMap<_, _> = r
        .used()
        .iter()
        .filter(|(k, _)| k.as_str() != "out" && k.as_str() != "threads")
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let (outputs, outputs_hash) = manifest::output_entries(&output.files);
    let pass = output.checks.iter().all(|c| c.pass);
    let m = RunManifest {
        command: std::env::args().collect(),
        subcommand: sub.into(),
        config_hash: manifest::config_hash(sub, &config),
        config,
        outputs,
        outputs_hash,
        versions: BTreeMap::from([
            ("zoss-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("zoss-core".to_string(), zoss_core::VERSION.to_string()),
        ]),
        threads: rayon::current_num_threads(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        pass,
        checks: output
            .checks
            .iter()
            .map(|c| CheckEntry {
                label: c.label.clone(),
                pass: c.pass,
            })
            .collect(),
    };
    m.write(&out_dir)?;

    print!("{}", output.stdout);
    for c in output.checks.iter().filter(|c| !c.pass) {
        eprintln!("failed: {}: {}", c.label, c.detail);
    }
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED_CHECK),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
