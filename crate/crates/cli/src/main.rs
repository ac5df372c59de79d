use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use swarmsec::framework::{certify_record, run_bca_on, Network, Scheme};
use swarmsec::harness::{self, ExperimentConfig, SUMMARY_FILE};
use swarmsec::scenario::Scenario;

#[derive(Parser)]
#[command(name = "swarmsec", version, about = "Secure UAV swarm deployment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write results, iterations and summary CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's worker count (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Summarize a results CSV into mean and standard error per scheme and sweep value.
    Aggregate {
        /// results.csv produced by `run`.
        #[arg(long)]
        input: PathBuf,
        /// Defaults to summary.csv next to the input.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a single realization and dump every intermediate trace.
    Demo {
        #[arg(long)]
        out: PathBuf,
        /// Base parameters; the first sweep value is used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        realization: usize,
        #[arg(long, default_value = "proposed")]
        scheme: String,
    },
}

fn load(config: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(config: PathBuf, out: PathBuf, seed: Option<u64>, workers: Option<usize>) -> Result<()> {
    let mut cfg = load(Some(&config))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let output = harness::run_to_dir(&cfg, &out)?;
    println!("{} rows written to {}", output.rows.len(), out.display());
    Ok(())
}

fn aggregate(input: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let rows = harness::read_rows(File::open(&input).with_context(|| format!("opening {}", input.display()))?)?;
    let out = out.unwrap_or_else(|| input.with_file_name(SUMMARY_FILE));
    let summary = harness::aggregate(&rows)?;
    harness::write_summary(&summary, BufWriter::new(File::create(&out)?))?;
    println!("{} groups written to {}", summary.len(), out.display());
    Ok(())
}

fn demo(out: PathBuf, config: Option<PathBuf>, seed: u64, realization: usize, scheme: &str) -> Result<()> {
    let cfg = ExperimentConfig { seed, ..load(config.as_ref())? };
    let scheme: Scheme = scheme.parse()?;
    let value = cfg.sweep_values[0];
    let (n_nodes, base) = cfg.bca_config(value);
    let bca = scheme.configure(&base);
    let (scenario, rng) =
        Scenario::sample_nonempty(cfg.region, n_nodes, cfg.q, cfg.seed, cfg.stream_id(value, realization))?;
    let network = Network::from_scenario(&scenario, &bca)?;
    let record = run_bca_on(&network, &bca, &mut rng.clone())?;

    fs::create_dir_all(&out)?;
    let file = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(out.join(name))?)) };
    fs::write(out.join("scenario.txt"), scenario.to_record())?;
    record.snapshot.write_csv(file("links.csv")?)?;
    let mut deployments = file("deployment.csv")?;
    for (i, d) in record.deployments.iter().enumerate() {
        d.write_csv(i + 1, i == 0, &mut deployments)?;
    }
    drop(deployments);
    record.write_association_trace(file("association_trace.csv")?)?;
    record.allocation.write_csv(&record.gains, file("power.csv")?)?;
    record.write_iterations_csv(realization, true, file("iterations.csv")?)?;

    let last = record.final_metrics();
    let report = certify_record(&network, &record)?;
    println!(
        "scheme {scheme}: L={} E={} M={} sum secrecy rate {:.4} bits/s/Hz, positive secrecy {:.1}%",
        network.nodes.legit.len(),
        network.nodes.eaves.len(),
        network.n_uavs,
        last.sum_secrecy_rate,
        last.positive_secrecy_pct,
    );
    println!(
        "converged: {}; open association deviations: {}; open altitude deviations: {}",
        record.converged,
        report.association.len(),
        report.altitude.len()
    );
    println!("traces written to {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, out, seed, workers } => run(config, out, seed, workers),
        Command::Aggregate { input, out } => aggregate(input, out),
        Command::Demo { out, config, seed, realization, scheme } => demo(out, config, seed, realization, &scheme),
    }
}
