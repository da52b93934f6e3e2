//! Average peak-age evaluation for the tandem system.
//!
//! Per sensor `j` the average PAoI decomposes as
//! `A_j = 1/λ_j + E[Z_j^P] + E[W_j^P] + E[Z_j^T] + E[W_j^T]`:
//! inter-arrival time, deterministic processing time, priority-queue wait,
//! mean fading-channel transmission time and the maximum-entropy
//! approximation of the FCFS transmission-queue wait.

use crate::error::{Error, Result};
use crate::model::{mean_snr, RateVector, SystemConfig, MIN_FADING_GAIN};
use crate::quadrature::{self, Tolerance};

/// A stage counts as stable only while its load stays below `1 - STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-9;

fn is_stable(load: f64) -> bool {
    load < 1.0 - STABILITY_MARGIN
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerClassLoads {
    pub rho: Vec<f64>,
    pub busy_probability: f64,
}

impl PerClassLoads {
    pub fn new(processing_times: &[f64], rates: &[f64]) -> Self {
        let rho: Vec<f64> = rates.iter().zip(processing_times).map(|(l, z)| l * z).collect();
        let busy_probability = rho.iter().sum();
        Self { rho, busy_probability }
    }

    pub fn is_stable(&self) -> bool {
        is_stable(self.busy_probability)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaoiBreakdown {
    pub inter_arrival: f64,
    pub processing_service: f64,
    pub processing_wait: f64,
    pub transmission_service: f64,
    pub transmission_wait: f64,
    pub total: f64,
}

impl PaoiBreakdown {
    fn new(
        inter_arrival: f64,
        processing_service: f64,
        processing_wait: f64,
        transmission_service: f64,
        transmission_wait: f64,
    ) -> Self {
        Self {
            inter_arrival,
            processing_service,
            processing_wait,
            transmission_service,
            transmission_wait,
            total: inter_arrival
                + processing_service
                + processing_wait
                + transmission_service
                + transmission_wait,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmeIntermediates {
    pub mu: Vec<f64>,
    /// Row `j` holds `H_{j,1..=j}`.
    pub h_profile: Vec<Vec<f64>>,
    pub aggregate_transmission_mean: f64,
    pub transmission_load: f64,
}

/// Expected transmission time of a packet with time constant `xi`
/// (`C̃ ln2 / B`) over a Rayleigh channel with unit-gain SNR `snr`.
///
/// With `u = ξ/t` the mean becomes
/// `ξ/s ∫ exp(u + (1 − e^u)/s) du/u` over `u ≥ ln(1 + s·h_min)`; the gain floor
/// contributes an atom at the largest transmission time.
pub fn expected_transmission_time(xi: f64, snr: f64) -> Result<f64> {
    if xi == 0.0 {
        return Ok(0.0);
    }
    if !(xi.is_finite() && xi > 0.0 && snr.is_finite() && snr > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "transmission time needs positive xi and snr, got xi={xi}, snr={snr}"
        )));
    }
    let lower = (snr * MIN_FADING_GAIN).ln_1p();
    // beyond this point the integrand is below e^-790 of its scale
    let upper = (snr * 800.0).ln_1p();
    let integrand = |u: f64| (u - u.exp_m1() / snr).exp() / u;

    let mut breaks = vec![lower];
    let mut x = lower;
    while x * 10.0 < upper {
        x *= 10.0;
        breaks.push(x);
    }
    let peak = snr.ln();
    if peak > lower && peak < upper {
        breaks.push(peak);
    }
    breaks.push(upper);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let est = quadrature::integrate(integrand, &breaks, Tolerance::default())?;
    let atom = -(-MIN_FADING_GAIN).exp_m1() / lower;
    Ok(xi * (est.value / snr + atom))
}

/// Per-class mean service times of both stages; everything the analytic
/// model needs besides the rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceTimes {
    pub processing: Vec<f64>,
    pub transmission: Vec<f64>,
}

impl ServiceTimes {
    pub fn from_config(config: &SystemConfig) -> Result<Self> {
        let channel = config.channel();
        let snr = mean_snr(&channel);
        let transmission = config
            .sensors()
            .iter()
            .map(|s| expected_transmission_time(channel.xi(s.processed_size_bits), snr))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            processing: config.processing_times(),
            transmission,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.processing.len()
    }

    pub fn transmission_load(&self, rates: &[f64]) -> f64 {
        rates.iter().zip(&self.transmission).map(|(l, z)| l * z).sum()
    }

    pub fn processing_load(&self, rates: &[f64]) -> f64 {
        rates.iter().zip(&self.processing).map(|(l, z)| l * z).sum()
    }
}

/// Non-preemptive priority waits `E[W_j^P]` for every class, written into `out`.
///
/// Fails at the first class whose cumulative load reaches 1; classes before it
/// are still written.
fn processing_waits_into(times: &[f64], rates: &[f64], out: &mut [f64]) -> Result<()> {
    // residual work: Σ λ_i E[(Z_i^P)^2] / 2 with deterministic service
    let residual: f64 = rates.iter().zip(times).map(|(l, z)| l * z * z).sum::<f64>() / 2.0;
    let mut before = 0.0;
    for (j, (l, z)) in rates.iter().zip(times).enumerate() {
        let upto = before + l * z;
        if !is_stable(upto) {
            return Err(Error::UnstableProcessing { sensor: j + 1, load: upto });
        }
        out[j] = residual / ((1.0 - upto) * (1.0 - before));
        before = upto;
    }
    Ok(())
}

pub fn processing_waits(times: &ServiceTimes, rates: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; rates.len()];
    processing_waits_into(&times.processing, rates, &mut out)?;
    Ok(out)
}

fn check_class(config: &SystemConfig, j: usize) -> Result<()> {
    if j == 0 || j > config.num_sensors() {
        return Err(Error::InvalidConfig(format!(
            "sensor index {j} out of range 1..={}",
            config.num_sensors()
        )));
    }
    Ok(())
}

/// `E[W_j^P]` for 1-based sensor `j`. Only classes `1..=j` need to be stable.
pub fn processing_wait(config: &SystemConfig, rates: &RateVector, j: usize) -> Result<f64> {
    check_class(config, j)?;
    rates.check(config.num_sensors(), false)?;
    let times = config.processing_times();
    let r = rates.as_slice();
    let residual: f64 = r.iter().zip(&times).map(|(l, z)| l * z * z).sum::<f64>() / 2.0;
    let before: f64 = r[..j - 1].iter().zip(&times).map(|(l, z)| l * z).sum();
    let upto = before + r[j - 1] * times[j - 1];
    if !is_stable(upto) {
        return Err(Error::UnstableProcessing { sensor: j, load: upto });
    }
    Ok(residual / ((1.0 - upto) * (1.0 - before)))
}

/// `E[Z_j^T]` for 1-based sensor `j`, by adaptive quadrature.
pub fn transmission_time_expectation(config: &SystemConfig, j: usize) -> Result<f64> {
    check_class(config, j)?;
    let channel = config.channel();
    let sensor = &config.sensors()[j - 1];
    expected_transmission_time(channel.xi(sensor.processed_size_bits), mean_snr(&channel))
}

/// Ratio numerator of `μ_j` (0-based `j`), with `max{·, 0}` clamp.
fn mu_term(times: &ServiceTimes, rates: &[f64], wp: &[f64], j: usize, base: f64) -> f64 {
    let mut profile = rates[j] * wp[j] * times.transmission[j];
    for i in 0..j {
        profile += rates[i] * (wp[i] + wp[j]) * times.transmission[i];
    }
    base + (profile - (wp[j] + times.processing[j])).max(0.0)
}

/// Transmission waits for every class, given processing waits `wp`.
fn pme_waits_into(times: &ServiceTimes, rates: &[f64], wp: &[f64], out: &mut [f64]) -> Result<()> {
    let load = times.transmission_load(rates);
    if !is_stable(load) {
        return Err(Error::UnstableTransmission { load });
    }
    let total_rate: f64 = rates.iter().sum();
    if total_rate == 0.0 {
        out.iter_mut().for_each(|w| *w = 0.0);
        return Ok(());
    }
    let mean_service = load / total_rate;
    let busy = times.processing_load(rates);
    let base = busy * mean_service;
    let denom = mu_term(times, rates, wp, 0, base);
    let mut weighted = 0.0;
    for j in 0..rates.len() {
        let mu = if j == 0 { 1.0 } else { mu_term(times, rates, wp, j, base) / denom };
        out[j] = mu;
        weighted += rates[j] * mu;
    }
    let scale = load * load / (weighted * (1.0 - load));
    out.iter_mut().for_each(|w| *w *= scale);
    Ok(())
}

/// The μ ratios and packet profiles behind the transmission-wait approximation.
pub fn pme_intermediates(times: &ServiceTimes, rates: &[f64]) -> Result<PmeIntermediates> {
    let wp = processing_waits(times, rates)?;
    let load = times.transmission_load(rates);
    let total_rate: f64 = rates.iter().sum();
    let mean_service = if total_rate > 0.0 { load / total_rate } else { 0.0 };
    let base = times.processing_load(rates) * mean_service;
    let denom = mu_term(times, rates, &wp, 0, base);
    let mu = (0..rates.len())
        .map(|j| if j == 0 { 1.0 } else { mu_term(times, rates, &wp, j, base) / denom })
        .collect();
    let h_profile = (0..rates.len())
        .map(|j| {
            (0..=j)
                .map(|i| if i == j { rates[j] * wp[j] } else { rates[i] * (wp[i] + wp[j]) })
                .collect()
        })
        .collect();
    Ok(PmeIntermediates {
        mu,
        h_profile,
        aggregate_transmission_mean: mean_service,
        transmission_load: load,
    })
}

pub fn pme_waits(times: &ServiceTimes, rates: &[f64]) -> Result<Vec<f64>> {
    let wp = processing_waits(times, rates)?;
    let mut out = vec![0.0; rates.len()];
    pme_waits_into(times, rates, &wp, &mut out)?;
    Ok(out)
}

/// `E[W_j^T]` for 1-based sensor `j`.
pub fn pme_wait(config: &SystemConfig, rates: &RateVector, j: usize) -> Result<f64> {
    check_class(config, j)?;
    rates.check(config.num_sensors(), false)?;
    let times = ServiceTimes::from_config(config)?;
    Ok(pme_waits(&times, rates.as_slice())?[j - 1])
}

/// Evaluates the analytic model repeatedly for one system; the quadrature
/// runs once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PaoiModel {
    times: ServiceTimes,
}

impl PaoiModel {
    pub fn new(config: &SystemConfig) -> Result<Self> {
        Ok(Self { times: ServiceTimes::from_config(config)? })
    }

    pub fn from_service_times(times: ServiceTimes) -> Self {
        Self { times }
    }

    pub fn service_times(&self) -> &ServiceTimes {
        &self.times
    }

    pub fn breakdown(&self, rates: &RateVector) -> Result<Vec<PaoiBreakdown>> {
        let n = self.times.num_classes();
        rates.check(n, true)?;
        let r = rates.as_slice();
        let mut wp = vec![0.0; n];
        let mut wt = vec![0.0; n];
        processing_waits_into(&self.times.processing, r, &mut wp)?;
        pme_waits_into(&self.times, r, &wp, &mut wt)?;
        Ok((0..n)
            .map(|j| {
                PaoiBreakdown::new(
                    1.0 / r[j],
                    self.times.processing[j],
                    wp[j],
                    self.times.transmission[j],
                    wt[j],
                )
            })
            .collect())
    }

    /// `max_j A_j`, or `+∞` if the point is outside the stable region.
    pub fn max_paoi(&self, rates: &[f64]) -> f64 {
        const STACK: usize = 32;
        let n = self.times.num_classes();
        if rates.len() != n || rates.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return f64::INFINITY;
        }
        let mut heap_buf;
        let mut stack_buf = [0.0; 2 * STACK];
        let buf: &mut [f64] = if n <= STACK {
            &mut stack_buf[..2 * n]
        } else {
            heap_buf = vec![0.0; 2 * n];
            &mut heap_buf
        };
        let (wp, wt) = buf.split_at_mut(n);
        if processing_waits_into(&self.times.processing, rates, wp).is_err()
            || pme_waits_into(&self.times, rates, wp, wt).is_err()
        {
            return f64::INFINITY;
        }
        (0..n)
            .map(|j| {
                1.0 / rates[j] + self.times.processing[j] + wp[j] + self.times.transmission[j] + wt[j]
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn average_paoi(config: &SystemConfig, rates: &RateVector) -> Result<Vec<PaoiBreakdown>> {
    PaoiModel::new(config)?.breakdown(rates)
}

/// Max-PAoI objective; `+∞` for unstable or otherwise invalid points.
pub fn objective_max_paoi(config: &SystemConfig, rates: &RateVector) -> f64 {
    match PaoiModel::new(config) {
        Ok(model) => model.max_paoi(rates.as_slice()),
        Err(_) => f64::INFINITY,
    }
}
