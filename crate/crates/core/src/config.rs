//! JSON configuration files and named reproduction presets.
//!
//! Files use human-friendly units (Mbit, dBm/Hz); everything is converted to
//! bits/Hz/mW on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelConfig, ProcessorConfig, RateVector, SensorProfile, SystemConfig};

const BITS_PER_MBIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorEntry {
    pub lambda: f64,
    pub raw_mbits: f64,
    pub processed_mbits: f64,
    pub cycles_per_bit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessorEntry {
    pub cpu_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    pub power_mw: f64,
    pub bandwidth_hz: f64,
    pub distance_m: f64,
    pub alpha: f64,
    pub noise_dbm_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub sensors: Vec<SensorEntry>,
    pub processor: ProcessorEntry,
    pub channel: ChannelEntry,
}

// Mbit value whose product with 1e6 reproduces `bits` exactly, so that a
// written config reads back bit-identically.
fn to_mbits(bits: f64) -> f64 {
    let mut m = bits / BITS_PER_MBIT;
    for _ in 0..4 {
        let back = m * BITS_PER_MBIT;
        if back == bits {
            break;
        }
        m = if back < bits { m.next_up() } else { m.next_down() };
    }
    m
}

impl ConfigFile {
    pub fn into_system(self) -> Result<SystemConfig> {
        let sensors = self
            .sensors
            .into_iter()
            .enumerate()
            .map(|(i, s)| SensorProfile {
                index: i + 1,
                arrival_rate: s.lambda,
                raw_size_bits: s.raw_mbits * BITS_PER_MBIT,
                processed_size_bits: s.processed_mbits * BITS_PER_MBIT,
                cycles_per_bit: s.cycles_per_bit,
            })
            .collect();
        SystemConfig::new(
            sensors,
            ProcessorConfig { cpu_speed: self.processor.cpu_hz },
            ChannelConfig {
                transmit_power_mw: self.channel.power_mw,
                bandwidth_hz: self.channel.bandwidth_hz,
                distance_m: self.channel.distance_m,
                path_loss_exponent: self.channel.alpha,
                noise_density_dbm_per_hz: self.channel.noise_dbm_hz,
            },
        )
    }

    pub fn from_system(config: &SystemConfig) -> Self {
        let ch = config.channel();
        Self {
            sensors: config
                .sensors()
                .iter()
                .map(|s| SensorEntry {
                    lambda: s.arrival_rate,
                    raw_mbits: to_mbits(s.raw_size_bits),
                    processed_mbits: to_mbits(s.processed_size_bits),
                    cycles_per_bit: s.cycles_per_bit,
                })
                .collect(),
            processor: ProcessorEntry { cpu_hz: config.processor().cpu_speed },
            channel: ChannelEntry {
                power_mw: ch.transmit_power_mw,
                bandwidth_hz: ch.bandwidth_hz,
                distance_m: ch.distance_m,
                alpha: ch.path_loss_exponent,
                noise_dbm_hz: ch.noise_density_dbm_per_hz,
            },
        }
    }
}

pub fn parse_config(text: &str) -> Result<SystemConfig> {
    let file: ConfigFile = serde_json::from_str(text)
        .map_err(|e| Error::InvalidConfig(format!("malformed config: {e}")))?;
    file.into_system()
}

pub fn to_json(config: &SystemConfig) -> String {
    serde_json::to_string_pretty(&ConfigFile::from_system(config))
        .expect("config serializes")
}

pub fn load_config(path: &Path) -> Result<SystemConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn save_config(path: &Path, config: &SystemConfig) -> Result<()> {
    fs::write(path, to_json(config) + "\n").map_err(|e| Error::Io(e.to_string()))
}

/// Rates `λ_j = (J − j + 1)·λ_b`: higher priority sensors update more often.
pub fn base_rates(num_sensors: usize, lambda_b: f64) -> RateVector {
    RateVector::new(
        (1..=num_sensors)
            .map(|j| (num_sensors - j + 1) as f64 * lambda_b)
            .collect(),
    )
}

/// Replaces every sensor's stored arrival rate.
pub fn with_rates(config: &SystemConfig, rates: &RateVector) -> Result<SystemConfig> {
    rates.check(config.num_sensors(), true)?;
    let sensors = config
        .sensors()
        .iter()
        .zip(rates.as_slice())
        .map(|(s, &lambda)| SensorProfile { arrival_rate: lambda, ..*s })
        .collect();
    SystemConfig::new(sensors, config.processor(), config.channel())
}

/// Replaces the CPU speed.
pub fn with_cpu_speed(config: &SystemConfig, cpu_speed: f64) -> Result<SystemConfig> {
    SystemConfig::new(config.sensors().to_vec(), ProcessorConfig { cpu_speed }, config.channel())
}

fn reference_channel() -> ChannelConfig {
    ChannelConfig {
        transmit_power_mw: 100.0,
        bandwidth_hz: 1e5,
        distance_m: 300.0,
        path_loss_exponent: 3.0,
        noise_density_dbm_per_hz: -174.0,
    }
}

fn build(raw_bits: &[f64], processed_bits: f64, rate_bits_per_s: f64, lambda_b: f64) -> Result<SystemConfig> {
    let rates = base_rates(raw_bits.len(), lambda_b);
    let sensors = raw_bits
        .iter()
        .zip(rates.as_slice())
        .enumerate()
        .map(|(i, (&c, &lambda))| SensorProfile {
            index: i + 1,
            arrival_rate: lambda,
            raw_size_bits: c,
            processed_size_bits: processed_bits,
            cycles_per_bit: 1.0,
        })
        .collect();
    SystemConfig::new(
        sensors,
        ProcessorConfig { cpu_speed: rate_bits_per_s },
        reference_channel(),
    )
}

/// Three-sensor reference system (10/7/5 Mbit raw, 2 Mbit processed).
///
/// `rate_bits_per_s` is the equivalent processing rate `r/τ`; `τ` is fixed at 1.
pub fn table2(rate_bits_per_s: f64, lambda_b: f64) -> Result<SystemConfig> {
    build(&[10e6, 7e6, 5e6], 2e6, rate_bits_per_s, lambda_b)
}

/// Scaling study: `J` sensors with `C_j = 24 − 2(j−1)` Mbit and a common
/// processed size.
pub fn scaling(
    num_sensors: usize,
    processed_bits: f64,
    rate_bits_per_s: f64,
    lambda_b: f64,
) -> Result<SystemConfig> {
    if num_sensors == 0 || num_sensors > 11 {
        return Err(Error::InvalidConfig(format!(
            "scaling preset supports 1..=11 sensors, got {num_sensors}"
        )));
    }
    let raw: Vec<f64> = (0..num_sensors).map(|i| (24.0 - 2.0 * i as f64) * 1e6).collect();
    build(&raw, processed_bits, rate_bits_per_s, lambda_b)
}
