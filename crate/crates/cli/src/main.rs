use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use platoon_cosim::experiments::{platoon_report, platoon_scenario, sweep_delay, Execution};
use platoon_cosim::logio::{events_path, export_csv, export_sweep, export_trace, read_column};
use platoon_cosim::scenario::Scenario;
use platoon_cosim::sim::run;
use platoon_cosim::stats::{bootstrap_ci, histogram, summarize};
use platoon_cosim::vehicle::VehicleId;

/// Deterministic CACC platoon and collision-warning simulator.
#[derive(Parser)]
#[command(name = "platoon-cosim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its per-tick log.
    Run {
        /// Scenario file, or a built-in fixture name.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write message deliveries to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Rerun a two-vehicle scenario once per link delay and tabulate the
    /// leader/follower speed difference.
    SweepDelay {
        #[arg(long, default_value = "delay_sweep")]
        scenario: String,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,0.5,1.0")]
        delays: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Run the delays one after another instead of in parallel.
        #[arg(long)]
        sequential: bool,
    },
    /// Run the four-vehicle platoon and report spacing statistics.
    Platoon {
        #[arg(long, default_value_t = 0.01)]
        delay: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario and list its collision warnings.
    Das {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summary statistics of one CSV column.
    Stats {
        #[command(flatten)]
        column: ColumnArgs,
        #[arg(long)]
        bootstrap: bool,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value_t = 10_000)]
        resamples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Equal-width histogram of one CSV column.
    Histogram {
        #[command(flatten)]
        column: ColumnArgs,
        #[arg(long)]
        bins: usize,
    },
}

#[derive(Args)]
struct ColumnArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    column: String,
    /// Only rows whose `id` column equals this vehicle.
    #[arg(long)]
    vehicle: Option<u32>,
}

impl ColumnArgs {
    fn load(&self) -> Result<Vec<f64>> {
        let values = read_column(&self.input, &self.column, self.vehicle.map(VehicleId))?;
        if values.is_empty() {
            bail!("{}: column '{}' has no values", self.input.display(), self.column);
        }
        Ok(values)
    }
}

fn load(spec: &str) -> Result<Scenario> {
    Scenario::resolve(spec).with_context(|| format!("scenario '{spec}'"))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { scenario, out, seed, trace } => {
            let mut s = load(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let log = run(&s)?;
            export_csv(&log, &out)?;
            if let Some(trace) = trace {
                export_trace(&log, &trace)?;
            }
            println!("{}: {} rows, {} warnings -> {}", s.name, log.rows.len(), log.warnings.len(), out.display());
        }
        Command::SweepDelay { scenario, delays, out, sequential } => {
            let base = load(&scenario)?;
            let execution = if sequential { Execution::Sequential } else { Execution::Parallel };
            let rows = sweep_delay(&base, &delays, execution)?;
            export_sweep(&rows, &out)?;
            println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "delay", "mean(L-F)", "std(L-F)", "var(L-F)", "max|L-F|");
            for r in &rows {
                let s = &r.signed_diff;
                println!(
                    "{:>8} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                    r.delay, s.mean, s.std, s.variance, r.abs_diff.max
                );
            }
        }
        Command::Platoon { delay, out } => {
            let s = platoon_scenario(delay)?;
            let log = run(&s)?;
            let report = platoon_report(&s, &log)?;
            if let Some(out) = out {
                export_csv(&log, &out)?;
            }
            println!(
                "delay {} s, followers {:?}",
                report.delay,
                report.followers.iter().map(|id| id.0).collect::<Vec<_>>()
            );
            for (i, j, r) in &report.gap_correlations {
                println!("gap correlation {} vs {}: {r:.4}", report.followers[*i], report.followers[*j]);
            }
            println!("pooled spacing error std: {:.4} m", report.pooled_spacing_std);
            println!("minimum bumper gap: {:.4} m", report.min_gap);
        }
        Command::Das { scenario, out } => {
            let s = load(&scenario)?;
            if s.das.is_none() {
                bail!("scenario '{}' has no [controller.das] section", s.name);
            }
            let log = run(&s)?;
            if let Some(out) = &out {
                export_csv(&log, out)?;
            }
            for t in &log.triggers {
                println!("{:>8.2} s  vehicle {} {:?}", t.time, t.vehicle, t.kind);
            }
            println!("{} warnings", log.warnings.len());
            if let Some(w) = log.warnings.first() {
                println!(
                    "first warning at {:.2} s: follower {} leader {} d_a {:.3} m < d_sf {:.3} m",
                    w.time, w.follower_id, w.leader_id, w.d_a, w.d_sf
                );
            }
            if let Some(out) = out {
                println!("events -> {}", events_path(&out).display());
            }
        }
        Command::Stats { column, bootstrap, level, resamples, seed } => {
            let values = column.load()?;
            let s = summarize(&values)?;
            println!("n {}", s.n);
            println!("mean {}", s.mean);
            println!("median {}", s.median);
            println!("std {}", s.std);
            println!("variance {}", s.variance);
            println!("min {}", s.min);
            println!("max {}", s.max);
            if bootstrap {
                let ci = bootstrap_ci(&values, level, resamples, seed)?;
                println!("ci {} {} {}", ci.level, ci.lo, ci.hi);
            }
        }
        Command::Histogram { column, bins } => {
            let bins = histogram(&column.load()?, bins)?;
            println!("bin_lo,bin_hi,count");
            for b in bins {
                println!("{},{},{}", b.lo, b.hi, b.count);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // library errors already embed their source text
            let mut msg = String::new();
            for cause in e.chain() {
                let text = cause.to_string();
                if !msg.contains(&text) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&text);
                }
            }
            // parser messages can span lines; diagnostics stay on one
            let one_line: Vec<&str> = msg.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            eprintln!("error: {}", one_line.join(" "));
            ExitCode::FAILURE
        }
    }
}
