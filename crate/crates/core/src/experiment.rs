//! Experiment workflows behind the command-line tool.
//!
//! Every workflow returns its CSV as a string; rows are always emitted in
//! grid/seed order regardless of how the work was scheduled.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::analytic::PaoiModel;
use crate::config::{base_rates, with_cpu_speed};
use crate::error::{Error, Result};
use crate::model::{RateVector, SystemConfig};
use crate::optimizer::{gap_search, ppt_baseline, ConstraintSystem, GapOptions, GapOutcome};
use crate::simulator::{self, SimConfig, TandemModel};

/// Environment variable capping worker threads (`0` or unset = all cores).
pub const THREADS_ENV: &str = "AOI_TANDEM_THREADS";

pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| {
            Error::InvalidConfig(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))
        })?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Io(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Analytic,
    Simulate,
    Validate,
    Optimize,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisParameter {
    /// Base rate `λ_b` with `λ_j = (J − j + 1)·λ_b`.
    BaseRate,
    /// CPU speed `r`, cycles per second.
    CpuSpeed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub parameter: AxisParameter,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl SweepAxis {
    /// Evenly spaced grid including both ends; a single point sits at `start`.
    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => {
                let last = (n - 1) as f64;
                (0..n)
                    .map(|i| (self.start * (last - i as f64) + self.stop * i as f64) / last)
                    .collect()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self.parameter {
            AxisParameter::BaseRate => "lambda_b",
            AxisParameter::CpuSpeed => "cpu_hz",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    /// Parses `NAME:START:STOP:COUNT`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("sweep must look like lambda_b:START:STOP:COUNT, got {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(bad());
        }
        let parameter = match parts[0] {
            "lambda_b" => AxisParameter::BaseRate,
            "cpu_hz" => AxisParameter::CpuSpeed,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown sweep parameter {other:?} (expected lambda_b or cpu_hz)"
                )))
            }
        };
        let start: f64 = parts[1].parse().map_err(|_| bad())?;
        let stop: f64 = parts[2].parse().map_err(|_| bad())?;
        let count: usize = parts[3].parse().map_err(|_| bad())?;
        if !(start.is_finite() && stop.is_finite() && start > 0.0 && stop > 0.0) {
            return Err(Error::InvalidConfig("sweep bounds must be finite and positive".into()));
        }
        Ok(Self { parameter, start, stop, count })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub system: SystemConfig,
    pub sweep: Option<SweepAxis>,
    pub seeds: Vec<u64>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let needs_axis = matches!(self.kind, ExperimentKind::Validate | ExperimentKind::Sweep);
        if needs_axis != self.sweep.is_some() {
            return Err(Error::InvalidConfig(if needs_axis {
                "this experiment requires a sweep axis".into()
            } else {
                "a sweep axis is only accepted by validate and sweep".into()
            }));
        }
        if self.kind == ExperimentKind::Validate
            && self.sweep.as_ref().map(|a| a.parameter) != Some(AxisParameter::BaseRate)
        {
            return Err(Error::InvalidConfig("validation sweeps run over lambda_b".into()));
        }
        if matches!(self.kind, ExperimentKind::Validate | ExperimentKind::Optimize | ExperimentKind::Simulate)
            && self.seeds.is_empty()
        {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        Ok(())
    }
}

fn fmt(x: f64) -> String {
    x.to_string()
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn io(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

const ANALYTIC_HEADER: [&str; 8] = [
    "sensor",
    "lambda",
    "inter_arrival",
    "processing_service",
    "processing_wait",
    "transmission_service",
    "transmission_wait",
    "total",
];

/// One row per sensor with the five PAoI terms and their sum.
pub fn analytic_table(config: &SystemConfig, rates: &RateVector) -> Result<String> {
    let rows = PaoiModel::new(config)?.breakdown(rates)?;
    let mut w = writer();
    w.write_record(ANALYTIC_HEADER).map_err(io)?;
    for (j, (b, l)) in rows.iter().zip(rates.as_slice()).enumerate() {
        w.write_record([
            (j + 1).to_string(),
            fmt(*l),
            fmt(b.inter_arrival),
            fmt(b.processing_service),
            fmt(b.processing_wait),
            fmt(b.transmission_service),
            fmt(b.transmission_wait),
            fmt(b.total),
        ])
        .map_err(io)?;
    }
    finish(w)
}

/// Per-sensor simulation statistics.
pub fn simulate_table(config: &SystemConfig, rates: &RateVector, sim: SimConfig) -> Result<String> {
    let stats = simulator::run(config, rates, sim)?;
    let mut w = writer();
    w.write_record([
        "sensor",
        "lambda",
        "mean_paoi",
        "stderr",
        "mean_processing_wait",
        "mean_transmission_wait",
        "samples",
        "delivered",
        "saturated",
    ])
    .map_err(io)?;
    for (j, (s, l)) in stats.sensors.iter().zip(rates.as_slice()).enumerate() {
        w.write_record([
            (j + 1).to_string(),
            fmt(*l),
            fmt(s.mean_paoi),
            fmt(s.paoi_stderr),
            fmt(s.mean_processing_wait),
            fmt(s.mean_transmission_wait),
            s.samples.to_string(),
            s.delivered.to_string(),
            stats.saturated.to_string(),
        ])
        .map_err(io)?;
    }
    finish(w)
}

/// One grid point of an analytic-versus-simulation comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub lambda_b: f64,
    pub sensor: usize,
    pub lambda: f64,
    pub analytic: f64,
    pub simulated: f64,
    pub stderr: f64,
    pub feasible: bool,
    pub saturated: bool,
}

impl ValidationRow {
    pub fn relative_gap(&self) -> f64 {
        if self.feasible {
            (self.analytic - self.simulated) / self.simulated
        } else {
            f64::INFINITY
        }
    }
}

/// Analytic and simulated PAoI for every sensor at every `λ_b` in `grid`.
///
/// Replications over `seeds` are averaged; the reported standard error
/// combines the per-run batch-means errors. Points outside the stable region
/// are reported with `+∞` and `feasible = false` rather than dropped.
pub fn validation_rows(
    config: &SystemConfig,
    grid: &[f64],
    seeds: &[u64],
    packets_per_sensor: usize,
) -> Result<Vec<ValidationRow>> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let model = PaoiModel::new(config)?;
    let tandem = TandemModel::from_config(config);
    let n = config.num_sensors();
    let jobs: Vec<(usize, u64)> = (0..grid.len())
        .flat_map(|g| seeds.iter().map(move |&s| (g, s)))
        .collect();
    let feasible: Vec<bool> = grid
        .iter()
        .map(|&lb| model.max_paoi(base_rates(n, lb).as_slice()).is_finite())
        .collect();

    let pool = thread_pool()?;
    let runs: Vec<Option<simulator::SimulationStats>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(g, seed)| {
                if !feasible[g] {
                    return Ok(None);
                }
                let sim = SimConfig { seed, packets_per_sensor, ..SimConfig::default() };
                simulator::run_model(&tandem, &base_rates(n, grid[g]), sim).map(Some)
            })
            .collect::<Result<_>>()
    })?;

    let mut rows = Vec::with_capacity(grid.len() * n);
    for (g, &lb) in grid.iter().enumerate() {
        let rates = base_rates(n, lb);
        let reps = &runs[g * seeds.len()..(g + 1) * seeds.len()];
        let analytic = if feasible[g] { Some(model.breakdown(&rates)?) } else { None };
        for j in 0..n {
            let (simulated, stderr, saturated) = if feasible[g] {
                let k = reps.len() as f64;
                let stats: Vec<_> = reps.iter().map(|r| r.as_ref().expect("feasible point was simulated")).collect();
                let mean = stats.iter().map(|s| s.sensors[j].mean_paoi).sum::<f64>() / k;
                let se = stats.iter().map(|s| s.sensors[j].paoi_stderr.powi(2)).sum::<f64>().sqrt() / k;
                (mean, se, stats.iter().any(|s| s.saturated))
            } else {
                (f64::INFINITY, f64::INFINITY, false)
            };
            rows.push(ValidationRow {
                lambda_b: lb,
                sensor: j + 1,
                lambda: rates.as_slice()[j],
                analytic: analytic.as_ref().map_or(f64::INFINITY, |a| a[j].total),
                simulated,
                stderr,
                feasible: feasible[g],
                saturated,
            });
        }
    }
    Ok(rows)
}

pub fn validation_csv(rows: &[ValidationRow]) -> Result<String> {
    let mut w = writer();
    w.write_record([
        "lambda_b", "sensor", "lambda", "analytic", "simulated", "stderr", "relative_gap", "feasible",
        "saturated",
    ])
    .map_err(io)?;
    for r in rows {
        w.write_record([
            fmt(r.lambda_b),
            r.sensor.to_string(),
            fmt(r.lambda),
            fmt(r.analytic),
            fmt(r.simulated),
            fmt(r.stderr),
            fmt(r.relative_gap()),
            r.feasible.to_string(),
            r.saturated.to_string(),
        ])
        .map_err(io)?;
    }
    finish(w)
}

/// Analytic PAoI across a sweep axis; unstable points carry `+∞`.
pub fn sweep_table(config: &SystemConfig, axis: &SweepAxis) -> Result<String> {
    let n = config.num_sensors();
    let mut w = writer();
    let mut header = vec![axis.name().to_string(), "sensor".into(), "lambda".into()];
    header.extend(ANALYTIC_HEADER[2..].iter().map(|s| s.to_string()));
    header.push("feasible".into());
    w.write_record(&header).map_err(io)?;
    let cached = PaoiModel::new(config)?;
    for x in axis.points() {
        let (model, rates) = match axis.parameter {
            AxisParameter::BaseRate => (cached.clone(), base_rates(n, x)),
            AxisParameter::CpuSpeed => {
                (PaoiModel::new(&with_cpu_speed(config, x)?)?, config.default_rates())
            }
        };
        let rows = model.breakdown(&rates).ok();
        for j in 0..n {
            let mut rec = vec![fmt(x), (j + 1).to_string(), fmt(rates.as_slice()[j])];
            match &rows {
                Some(b) => {
                    let b = &b[j];
                    rec.extend(
                        [
                            b.inter_arrival,
                            b.processing_service,
                            b.processing_wait,
                            b.transmission_service,
                            b.transmission_wait,
                            b.total,
                        ]
                        .map(fmt),
                    );
                    rec.push("true".into());
                }
                None => {
                    rec.extend((0..6).map(|_| fmt(f64::INFINITY)));
                    rec.push("false".into());
                }
            }
            w.write_record(&rec).map_err(io)?;
        }
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PptResult {
    pub k: f64,
    pub rates: RateVector,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationReport {
    pub seeds: Vec<u64>,
    pub runs: Vec<GapOutcome>,
    pub ppt: Vec<PptResult>,
}

impl OptimizationReport {
    pub fn gap_mean(&self) -> f64 {
        self.runs.iter().map(|r| r.objective).sum::<f64>() / self.runs.len() as f64
    }

    pub fn gap_min(&self) -> f64 {
        self.runs.iter().map(|r| r.objective).fold(f64::INFINITY, f64::min)
    }

    pub fn gap_max(&self) -> f64 {
        self.runs.iter().map(|r| r.objective).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn best_ppt(&self) -> f64 {
        self.ppt.iter().map(|p| p.objective).fold(f64::INFINITY, f64::min)
    }

    /// Percent reduction of the mean GAP objective relative to the best PPT.
    pub fn improvement_percent(&self) -> f64 {
        100.0 * (self.best_ppt() - self.gap_mean()) / self.best_ppt()
    }

    pub fn gap_runs_csv(&self) -> Result<String> {
        let dim = self.runs.first().map_or(0, |r| r.point.len());
        let mut w = writer();
        let mut header: Vec<String> =
            ["seed", "objective", "iterations", "final_step", "hit_iteration_cap"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        header.extend((1..=dim).map(|j| format!("lambda_{j}")));
        w.write_record(&header).map_err(io)?;
        for (seed, r) in self.seeds.iter().zip(&self.runs) {
            let mut rec = vec![
                seed.to_string(),
                fmt(r.objective),
                r.trace.iterations().to_string(),
                fmt(r.final_step),
                r.hit_iteration_cap.to_string(),
            ];
            rec.extend(r.point.as_slice().iter().map(|x| fmt(*x)));
            w.write_record(&rec).map_err(io)?;
        }
        finish(w)
    }

    pub fn ppt_csv(&self) -> Result<String> {
        let dim = self.ppt.first().map_or(0, |p| p.rates.len());
        let mut w = writer();
        let mut header = vec!["k".to_string(), "objective".into()];
        header.extend((1..=dim).map(|j| format!("lambda_{j}")));
        w.write_record(&header).map_err(io)?;
        for p in &self.ppt {
            let mut rec = vec![fmt(p.k), fmt(p.objective)];
            rec.extend(p.rates.as_slice().iter().map(|x| fmt(*x)));
            w.write_record(&rec).map_err(io)?;
        }
        finish(w)
    }

    pub fn summary_csv(&self) -> Result<String> {
        let mut w = writer();
        w.write_record(["runs", "gap_mean", "gap_min", "gap_max", "best_ppt", "improvement_percent"])
            .map_err(io)?;
        w.write_record([
            self.runs.len().to_string(),
            fmt(self.gap_mean()),
            fmt(self.gap_min()),
            fmt(self.gap_max()),
            fmt(self.best_ppt()),
            fmt(self.improvement_percent()),
        ])
        .map_err(io)?;
        finish(w)
    }

    /// Writes `trace_seed_<seed>.csv` per run plus `gap_runs.csv`, `ppt.csv`
    /// and `summary.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let put = |name: &str, body: String| {
            fs::write(dir.join(name), body).map_err(|e| Error::Io(format!("{name}: {e}")))
        };
        fs::create_dir_all(dir).map_err(|e| Error::Io(e.to_string()))?;
        for (seed, r) in self.seeds.iter().zip(&self.runs) {
            let mut buf = Vec::new();
            r.trace.write_csv(&mut buf)?;
            put(&format!("trace_seed_{seed}.csv"), String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))?)?;
        }
        put("gap_runs.csv", self.gap_runs_csv()?)?;
        put("ppt.csv", self.ppt_csv()?)?;
        put("summary.csv", self.summary_csv()?)
    }
}

/// Runs GAP once per seed and the proportional baseline once per `K`.
pub fn optimize_study(
    config: &SystemConfig,
    seeds: &[u64],
    ppt_k: &[f64],
    base: &GapOptions,
) -> Result<OptimizationReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let model = PaoiModel::new(config)?;
    let cs = ConstraintSystem::from_service_times(model.service_times())?;
    let pool = thread_pool()?;
    let runs: Vec<GapOutcome> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let options = GapOptions { seed, ..base.clone() };
                gap_search(&cs, |r| model.max_paoi(r), &options)
            })
            .collect::<Result<_>>()
    })?;
    let ppt = ppt_k
        .iter()
        .map(|&k| {
            let rates = ppt_baseline(model.service_times(), k)?;
            let objective = model.max_paoi(rates.as_slice());
            Ok(PptResult { k, rates, objective })
        })
        .collect::<Result<_>>()?;
    Ok(OptimizationReport { seeds: seeds.to_vec(), runs, ppt })
}
