//! Rate optimization over the stability region.
//!
//! The feasible set is `{Λ : ZΛᵀ < bᵀ}` with two stage-stability rows
//! (processing and transmission mean service times, bound 1) followed by the
//! rows `−e_j` (bound 0) enforcing positive rates.

mod cone;
mod gap;

pub use cone::{tangent_generators, ConeBasis, ConeKind};
pub use gap::{gap_optimize, gap_search, GapOptions, GapOutcome, GapRecord, GapTrace};

use crate::analytic::ServiceTimes;
use crate::error::{Error, Result};
use crate::model::{RateVector, SystemConfig};

/// Which stage-stability rows survive in a [`ConstraintSystem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityRows {
    Both,
    /// Rows were parallel; only the processing row (the tighter) is kept.
    ProcessingOnly,
    /// Rows were parallel; only the transmission row (the tighter) is kept.
    TransmissionOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    processing: Vec<f64>,
    transmission: Vec<f64>,
    rows: Vec<Vec<f64>>,
    bounds: Vec<f64>,
    norms: Vec<f64>,
    stability: StabilityRows,
}

impl ConstraintSystem {
    /// Assembles `Z` and `b` from per-class mean service times.
    pub fn new(processing: &[f64], transmission: &[f64]) -> Result<Self> {
        let n = processing.len();
        if n == 0 || transmission.len() != n {
            return Err(Error::InvalidConfig(
                "service time vectors must be non-empty and of equal length".into(),
            ));
        }
        if processing
            .iter()
            .chain(transmission)
            .any(|&z| !(z.is_finite() && z > 0.0))
        {
            return Err(Error::InvalidConfig(
                "mean service times must be finite and positive".into(),
            ));
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (np, nt) = (norm(processing), norm(transmission));
        let dot: f64 = processing.iter().zip(transmission).map(|(a, b)| a * b).sum();
        let parallel = dot >= (1.0 - 1e-12) * np * nt;
        let stability = match (parallel, np >= nt) {
            (false, _) => StabilityRows::Both,
            (true, true) => StabilityRows::ProcessingOnly,
            (true, false) => StabilityRows::TransmissionOnly,
        };

        let mut rows = Vec::with_capacity(n + 2);
        if stability != StabilityRows::TransmissionOnly {
            rows.push(processing.to_vec());
        }
        if stability != StabilityRows::ProcessingOnly {
            rows.push(transmission.to_vec());
        }
        let mut bounds = vec![1.0; rows.len()];
        for j in 0..n {
            let mut row = vec![0.0; n];
            row[j] = -1.0;
            rows.push(row);
            bounds.push(0.0);
        }
        let norms = rows.iter().map(|r| norm(r)).collect();
        Ok(Self {
            processing: processing.to_vec(),
            transmission: transmission.to_vec(),
            rows,
            bounds,
            norms,
            stability,
        })
    }

    pub fn from_service_times(times: &ServiceTimes) -> Result<Self> {
        Self::new(&times.processing, &times.transmission)
    }

    pub fn from_config(config: &SystemConfig) -> Result<Self> {
        Self::from_service_times(&ServiceTimes::from_config(config)?)
    }

    pub fn dimension(&self) -> usize {
        self.processing.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.rows[l]
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn row_norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn stability_rows(&self) -> StabilityRows {
        self.stability
    }

    pub fn processing_times(&self) -> &[f64] {
        &self.processing
    }

    pub fn transmission_times(&self) -> &[f64] {
        &self.transmission
    }

    /// `b_l − z_l·Λ` for every row.
    pub fn slacks(&self, point: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.bounds)
            .map(|(row, b)| b - dot(row, point))
            .collect()
    }

    pub fn is_strictly_feasible(&self, point: &[f64]) -> bool {
        point.len() == self.dimension()
            && self
                .rows
                .iter()
                .zip(&self.bounds)
                .all(|(row, b)| dot(row, point) < *b)
    }

    /// Euclidean distance from `point` to the hyperplane of row `l`.
    pub fn distance(&self, l: usize, point: &[f64]) -> f64 {
        (self.bounds[l] - dot(&self.rows[l], point)) / self.norms[l]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Indices of constraints whose hyperplane lies within `epsilon` of `point`.
pub fn binding_set(cs: &ConstraintSystem, point: &[f64], epsilon: f64) -> Vec<usize> {
    (0..cs.rows.len())
        .filter(|&l| cs.distance(l, point) <= epsilon)
        .collect()
}

/// Largest reciprocal mean service time over both stages and all classes.
pub fn initial_step(times: &ServiceTimes) -> f64 {
    times
        .processing
        .iter()
        .chain(&times.transmission)
        .map(|z| 1.0 / z)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn initial_step_for_config(config: &SystemConfig) -> Result<f64> {
    Ok(initial_step(&ServiceTimes::from_config(config)?))
}

/// Proportional baseline: `λ_j = min{1/E[Z_j^P], 1/E[Z_j^T]} / (K·J)`.
///
/// Both stage loads of the result are at most `1/K`.
pub fn ppt_baseline(times: &ServiceTimes, k: f64) -> Result<RateVector> {
    if !(k.is_finite() && k > 1.0) {
        return Err(Error::InvalidConfig(format!("PPT constant must exceed 1, got {k}")));
    }
    let n = times.num_classes() as f64;
    Ok(RateVector::new(
        times
            .processing
            .iter()
            .zip(&times.transmission)
            .map(|(zp, zt)| (1.0 / zp).min(1.0 / zt) / (k * n))
            .collect(),
    ))
}
