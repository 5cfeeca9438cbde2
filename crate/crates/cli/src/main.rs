use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use snpd_cli::{fixtures, run_points, write_outputs, RunConfig};
use snpd_core::sim::{synth_trace, SynthSpec};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "snpd",
    version,
    about = "Secure neighbor position discovery experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario or sweep and write results.csv, summary.json, report.txt and config.toml.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; all cores when omitted.
        #[arg(long)]
        jobs: Option<usize>,
        /// Override the configured base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write golden wire dumps, figure scenarios and statistical test settings.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic mobility trace from a TOML spec.
    TraceGen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(config: PathBuf, out: PathBuf, jobs: Option<usize>, seed: Option<u64>) -> Result<()> {
    let mut run = RunConfig::load(&config)?;
    if let Some(seed) = seed {
        run.scenario.seed = seed;
    }
    let points = run.points()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("building worker pool")?;
    let results = pool.install(|| run_points(&points))?;
    write_outputs(&out, &run, &results)?;
    print!("{}", snpd_cli::render_report(&run, &results));
    Ok(())
}

fn trace_gen(spec: PathBuf, out: PathBuf) -> Result<()> {
    let text =
        std::fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
    let spec: SynthSpec =
        toml::from_str(&text).with_context(|| format!("in {}", spec.display()))?;
    let trace = synth_trace(&spec)?;
    let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    trace.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Run {
            config,
            out,
            jobs,
            seed,
        } => run(config, out, jobs, seed),
        Command::Fixtures { out } => fixtures::write_fixtures(&out),
        Command::TraceGen { spec, out } => trace_gen(spec, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
