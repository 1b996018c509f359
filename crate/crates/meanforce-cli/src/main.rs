//! `meanforce` — thermodynamics of a damped 3-D oscillator from a TOML
//! description of its bath susceptibility.
//!
//! Reads one config, runs exactly one task, writes `report.json` (always)
//! and `results.csv` (for tabular tasks) into the output directory. Exit
//! code 0 means the task ran and reported no failures.

mod config;
mod tasks;

use anyhow::{Context, Result};
use clap::Parser;
use std::path::PathBuf;

use config::Config;

#[derive(Parser)]
#[command(name = "meanforce", version, about)]
struct Cli {
    /// TOML configuration file
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory for report.json / results.csv
    /// (overrides [output].dir; default ".")
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the [sim] seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (overrides MEANFORCE_THREADS; default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => {}
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let threads = cli.threads.or_else(|| {
        std::env::var("MEANFORCE_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }

    let mut cfg = Config::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        match &mut cfg.sim {
            Some(sim) => sim.seed = seed,
            None => anyhow::bail!("--seed given but the config has no [sim] section"),
        }
    }

    let out_dir = cli
        .output_dir
        .or_else(|| {
            cfg.output
                .as_ref()
                .and_then(|o| o.dir.as_ref())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let output = tasks::run(&cfg)?;

    let report_path = out_dir.join("report.json");
    let mut report_text = serde_json::to_string_pretty(&output.report)?;
    report_text.push('\n');
    std::fs::write(&report_path, report_text)
        .with_context(|| format!("writing {}", report_path.display()))?;
    println!("wrote {}", report_path.display());

    if let Some((header, rows)) = &output.csv {
        let csv_path = out_dir.join("results.csv");
        let mut text = String::with_capacity(rows.len() * 128 + header.len() + 1);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        std::fs::write(&csv_path, text)
            .with_context(|| format!("writing {}", csv_path.display()))?;
        println!("wrote {}", csv_path.display());
    }

    for f in &output.failures {
        eprintln!("failure: {f}");
    }
    Ok(output.failures.is_empty())
}
