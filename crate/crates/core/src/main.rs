use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use aoi_tandem::config::{self, load_config};
use aoi_tandem::experiment::{self, SweepAxis};
use aoi_tandem::optimizer::GapOptions;
use aoi_tandem::simulator::SimConfig;
use aoi_tandem::{Error, RateVector, SystemConfig};

#[derive(Parser)]
#[command(name = "aoi-tandem", version, about = "Peak age-of-information analysis, simulation and rate optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Three sensors, 10/7/5 Mbit raw, 2 Mbit processed.
    Table2,
    /// J sensors with C_j = 24 - 2(j-1) Mbit.
    Sec5c,
}

#[derive(Args)]
struct SystemArgs {
    /// JSON system description.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in system; rates follow lambda_j = (J - j + 1) * lambda_b.
    #[arg(long)]
    preset: Option<Preset>,
    /// Equivalent processing rate r/tau of a preset, Mbit/s.
    #[arg(long, default_value_t = 5.0)]
    rate_mbps: f64,
    /// Base arrival rate of a preset, packets/s.
    #[arg(long, default_value_t = 0.05)]
    lambda_b: f64,
    /// Sensor count of the sec5c preset.
    #[arg(long, default_value_t = 6)]
    sensors: usize,
    /// Processed packet size of the sec5c preset, Mbit.
    #[arg(long, default_value_t = 4.0)]
    processed_mbits: f64,
}

impl SystemArgs {
    fn load(&self) -> Result<SystemConfig, Error> {
        match (&self.config, self.preset) {
            (Some(path), _) => load_config(path),
            (None, Some(Preset::Table2)) => config::table2(self.rate_mbps * 1e6, self.lambda_b),
            (None, Some(Preset::Sec5c)) => config::scaling(
                self.sensors,
                self.processed_mbits * 1e6,
                self.rate_mbps * 1e6,
                self.lambda_b,
            ),
            (None, None) => Err(Error::InvalidConfig("either --config or --preset is required".into())),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Per-sensor analytic PAoI breakdown.
    Analytic {
        #[command(flatten)]
        system: SystemArgs,
        /// Comma-separated rates; defaults to the rates in the config.
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Discrete-event simulation of the tandem queue.
    Simulate {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Measured deliveries per sensor.
        #[arg(long, default_value_t = 1_000_000)]
        packets: usize,
        #[arg(long, default_value_t = 1_000)]
        warmup: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic versus simulated PAoI across a lambda_b grid.
    Validate {
        #[command(flatten)]
        system: SystemArgs,
        /// lambda_b:START:STOP:COUNT
        #[arg(long)]
        sweep: SweepAxis,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 100_000)]
        packets: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic PAoI across a lambda_b or cpu_hz grid.
    Sweep {
        #[command(flatten)]
        system: SystemArgs,
        /// NAME:START:STOP:COUNT with NAME one of lambda_b, cpu_hz
        #[arg(long)]
        sweep: SweepAxis,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// GAP rate optimization against the proportional baseline.
    Optimize {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "1.1,1.3,1.5,2.0")]
        ppt_k: Vec<f64>,
        #[arg(long, default_value_t = 1e-5)]
        phi_min: f64,
        /// Overrides the default binding radius cap.
        #[arg(long)]
        epsilon_max: Option<f64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes a preset system as a JSON config.
    Preset {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, body: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn rates_or_default(system: &SystemConfig, rates: Option<Vec<f64>>) -> RateVector {
    rates.map(RateVector::new).unwrap_or_else(|| system.default_rates())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Analytic { system, rates, out } => {
            let cfg = system.load()?;
            let rates = rates_or_default(&cfg, rates);
            emit(out.as_deref(), &experiment::analytic_table(&cfg, &rates)?)
        }
        Command::Simulate { system, rates, seed, packets, warmup, out } => {
            let cfg = system.load()?;
            let rates = rates_or_default(&cfg, rates);
            let sim = SimConfig { seed, packets_per_sensor: packets, warmup_packets: warmup };
            emit(out.as_deref(), &experiment::simulate_table(&cfg, &rates, sim)?)
        }
        Command::Validate { system, sweep, seeds, packets, out } => {
            let cfg = system.load()?;
            let spec = experiment::ExperimentSpec {
                kind: experiment::ExperimentKind::Validate,
                system: cfg,
                sweep: Some(sweep),
                seeds,
            };
            spec.validate()?;
            let grid = spec.sweep.as_ref().map(SweepAxis::points).unwrap_or_default();
            let rows = experiment::validation_rows(&spec.system, &grid, &spec.seeds, packets)?;
            emit(out.as_deref(), &experiment::validation_csv(&rows)?)
        }
        Command::Sweep { system, sweep, out } => {
            let cfg = system.load()?;
            emit(out.as_deref(), &experiment::sweep_table(&cfg, &sweep)?)
        }
        Command::Optimize { system, seeds, ppt_k, phi_min, epsilon_max, out } => {
            let cfg = system.load()?;
            let options = GapOptions { phi_min, epsilon_max, ..GapOptions::default() };
            let report = experiment::optimize_study(&cfg, &seeds, &ppt_k, &options)?;
            report.write_to(&out)?;
            eprintln!(
                "GAP mean {:.4} s (min {:.4}, max {:.4}); best PPT {:.4} s; improvement {:.2}%",
                report.gap_mean(),
                report.gap_min(),
                report.gap_max(),
                report.best_ppt(),
                report.improvement_percent()
            );
            Ok(())
        }
        Command::Preset { system, out } => {
            let cfg = system.load()?;
            emit(out.as_deref(), &(config::to_json(&cfg) + "\n"))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_)
                | Error::InvalidRates(_)
                | Error::UnstableProcessing { .. }
                | Error::UnstableTransmission { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
