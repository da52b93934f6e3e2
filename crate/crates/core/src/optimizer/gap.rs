//! Generating-set search with ε-active tangent directions.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{binding_set, tangent_generators, ConstraintSystem};
use crate::analytic::PaoiModel;
use crate::error::{Error, Result};
use crate::model::{RateVector, SystemConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct GapOptions {
    /// Search stops once the step falls below this.
    pub phi_min: f64,
    /// Defaults to the largest reciprocal mean service time.
    pub initial_step: Option<f64>,
    /// Cap on the binding radius; defaults to the initial step.
    pub epsilon_max: Option<f64>,
    /// `c` in the acceptance test `f(y) < f(x) − c·Φ_s²`.
    pub sufficient_decrease: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Overrides the random start; must be strictly feasible.
    pub start: Option<Vec<f64>>,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self {
            phi_min: 1e-5,
            initial_step: None,
            epsilon_max: None,
            sufficient_decrease: 1e-4,
            max_iterations: 100_000,
            seed: 1,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRecord {
    pub iteration: usize,
    /// Incumbent after this iteration.
    pub point: Vec<f64>,
    pub objective: f64,
    /// Step in force during this iteration.
    pub step: f64,
    pub n_binding: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GapTrace {
    pub start: Vec<f64>,
    pub start_objective: f64,
    pub records: Vec<GapRecord>,
}

impl GapTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn is_monotone(&self) -> bool {
        let mut prev = self.start_objective;
        self.records.iter().all(|r| {
            let ok = r.objective <= prev;
            prev = r.objective;
            ok
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = self.start.len();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["iteration", "objective", "step", "n_binding", "accepted"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((1..=dim).map(|j| format!("lambda_{j}")));
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.records {
            let mut row = vec![
                r.iteration.to_string(),
                r.objective.to_string(),
                r.step.to_string(),
                r.n_binding.to_string(),
                r.accepted.to_string(),
            ];
            row.extend(r.point.iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapOutcome {
    pub point: RateVector,
    pub objective: f64,
    pub final_step: f64,
    pub trace: GapTrace,
    /// True only if `max_iterations` stopped the search.
    pub hit_iteration_cap: bool,
}

fn random_start(cs: &ConstraintSystem, seed: u64) -> Vec<f64> {
    let n = cs.dimension() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cs.processing_times()
        .iter()
        .zip(cs.transmission_times())
        .map(|(zp, zt)| {
            let u = 0.999 * (1.0 / (n * zp)).min(1.0 / (n * zt));
            loop {
                let v: f64 = rng.random();
                if v > 0.0 {
                    break u * v;
                }
            }
        })
        .collect()
}

/// Minimizes `objective` over the strict interior of `cs`.
///
/// Each iteration probes `Λ + (ε/‖s‖)s` for every tangent generator `s` of the
/// constraints within `ε = min(ε_max, Φ)`, moves to the best probe passing the
/// sufficient-decrease test (lowest index on ties), and halves `Φ` when none
/// does. Probes are evaluated in parallel and reduced in index order.
pub fn gap_search<F>(cs: &ConstraintSystem, objective: F, options: &GapOptions) -> Result<GapOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !(options.phi_min > 0.0) {
        return Err(Error::InvalidConfig("phi_min must be positive".into()));
    }
    let phi0 = match options.initial_step {
        Some(p) => p,
        None => cs
            .processing_times()
            .iter()
            .chain(cs.transmission_times())
            .map(|z| 1.0 / z)
            .fold(f64::NEG_INFINITY, f64::max),
    };
    if !(phi0.is_finite() && phi0 > 0.0) {
        return Err(Error::InvalidConfig(format!("initial step must be positive, got {phi0}")));
    }
    let eps_max = options.epsilon_max.unwrap_or(phi0);

    let mut x = match &options.start {
        Some(s) => {
            if !cs.is_strictly_feasible(s) {
                return Err(Error::InvalidRates("starting point is not strictly feasible".into()));
            }
            s.clone()
        }
        None => random_start(cs, options.seed),
    };
    let mut fx = objective(&x);
    let mut trace = GapTrace {
        start: x.clone(),
        start_objective: fx,
        records: Vec::new(),
    };
    let mut phi = phi0;
    let mut hit_cap = false;

    while phi >= options.phi_min {
        if trace.records.len() >= options.max_iterations {
            hit_cap = true;
            break;
        }
        let eps = eps_max.min(phi);
        let binding = binding_set(cs, &x, eps);
        let cone = tangent_generators(cs, &binding)?;
        let trials: Vec<(f64, Vec<f64>, f64)> = cone
            .tangent_generators
            .par_iter()
            .map(|s| {
                let step = eps / s.iter().map(|v| v * v).sum::<f64>().sqrt();
                let y: Vec<f64> = x.iter().zip(s).map(|(a, d)| a + step * d).collect();
                let fy = if cs.is_strictly_feasible(&y) {
                    objective(&y)
                } else {
                    f64::INFINITY
                };
                (step, y, fy)
            })
            .collect();

        let mut best: Option<usize> = None;
        for (i, (step, _, fy)) in trials.iter().enumerate() {
            let passes = *fy < fx - options.sufficient_decrease * step * step;
            if passes && best.map_or(true, |b| *fy < trials[b].2) {
                best = Some(i);
            }
        }
        let accepted = best.is_some();
        let step_used = phi;
        match best {
            Some(i) => {
                let (_, y, fy) = trials.into_iter().nth(i).expect("index in range");
                x = y;
                fx = fy;
            }
            None => phi *= 0.5,
        }
        trace.records.push(GapRecord {
            iteration: trace.records.len() + 1,
            point: x.clone(),
            objective: fx,
            step: step_used,
            n_binding: binding.len(),
            accepted,
        });
    }

    Ok(GapOutcome {
        point: RateVector::new(x),
        objective: fx,
        final_step: phi,
        trace,
        hit_iteration_cap: hit_cap,
    })
}

/// Minimizes the largest per-sensor average PAoI of `config`.
pub fn gap_optimize(config: &SystemConfig, options: &GapOptions) -> Result<GapOutcome> {
    let model = PaoiModel::new(config)?;
    let cs = ConstraintSystem::from_service_times(model.service_times())?;
    gap_search(&cs, |r| model.max_paoi(r), options)
}
