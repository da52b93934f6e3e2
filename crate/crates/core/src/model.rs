//! Physical description of the sensor network: sensors, the aggregator's
//! processor and the aggregator-to-destination fading channel.
//!
//! Everything here is stored in canonical units (bits, seconds, hertz,
//! meters, milliwatts). The only logarithmic quantity kept as-is is the noise
//! density, in dBm/Hz.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Smallest fading power gain the channel can take.
///
/// Under Rayleigh fading the exact expected transmission time diverges
/// logarithmically (the gain density is positive at zero), so the gain is
/// floored here. Both the quadrature and the simulator use the same floor.
pub const MIN_FADING_GAIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SensorProfile {
    /// 1-based priority; 1 is served first.
    pub index: usize,
    /// Poisson arrival rate, packets per second.
    pub arrival_rate: f64,
    pub raw_size_bits: f64,
    pub processed_size_bits: f64,
    pub cycles_per_bit: f64,
}

impl SensorProfile {
    pub fn validate(&self) -> Result<()> {
        let j = self.index;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "sensor {j}: {name} must be finite and positive, got {v}"
                )))
            }
        };
        positive("arrival rate", self.arrival_rate)?;
        positive("raw size", self.raw_size_bits)?;
        positive("processed size", self.processed_size_bits)?;
        positive("cycles per bit", self.cycles_per_bit)?;
        if self.processed_size_bits >= self.raw_size_bits {
            return Err(Error::InvalidConfig(format!(
                "sensor {j}: processed size {} must be below raw size {}",
                self.processed_size_bits, self.raw_size_bits
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessorConfig {
    /// CPU cycles per second.
    pub cpu_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub transmit_power_mw: f64,
    pub bandwidth_hz: f64,
    pub distance_m: f64,
    pub path_loss_exponent: f64,
    pub noise_density_dbm_per_hz: f64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("transmit power", self.transmit_power_mw),
            ("bandwidth", self.bandwidth_hz),
            ("distance", self.distance_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "channel {name} must be finite and positive, got {v}"
                )));
            }
        }
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent > 2.0) {
            return Err(Error::InvalidConfig(format!(
                "path loss exponent must exceed 2, got {}",
                self.path_loss_exponent
            )));
        }
        if !self.noise_density_dbm_per_hz.is_finite() {
            return Err(Error::InvalidConfig("noise density must be finite".into()));
        }
        Ok(())
    }

    /// Time-scale constant `C̃ ln2 / B` of a packet of the given size.
    pub fn xi(&self, processed_size_bits: f64) -> f64 {
        processed_size_bits * LN_2 / self.bandwidth_hz
    }
}

/// A validated system. Sensors are kept in priority order.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    sensors: Vec<SensorProfile>,
    processor: ProcessorConfig,
    channel: ChannelConfig,
}

impl SystemConfig {
    pub fn new(
        sensors: Vec<SensorProfile>,
        processor: ProcessorConfig,
        channel: ChannelConfig,
    ) -> Result<Self> {
        if sensors.is_empty() {
            return Err(Error::InvalidConfig("at least one sensor is required".into()));
        }
        for (pos, s) in sensors.iter().enumerate() {
            if s.index != pos + 1 {
                return Err(Error::InvalidConfig(format!(
                    "sensor at position {} carries index {}; indices must be 1..J in order",
                    pos + 1,
                    s.index
                )));
            }
            s.validate()?;
        }
        if !(processor.cpu_speed.is_finite() && processor.cpu_speed > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "cpu speed must be finite and positive, got {}",
                processor.cpu_speed
            )));
        }
        channel.validate()?;
        Ok(Self {
            sensors,
            processor,
            channel,
        })
    }

    pub fn sensors(&self) -> &[SensorProfile] {
        &self.sensors
    }

    pub fn sensor(&self, index: usize) -> Option<&SensorProfile> {
        index.checked_sub(1).and_then(|i| self.sensors.get(i))
    }

    pub fn processor(&self) -> ProcessorConfig {
        self.processor
    }

    pub fn channel(&self) -> ChannelConfig {
        self.channel
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    /// Per-class deterministic processing times, seconds.
    pub fn processing_times(&self) -> Vec<f64> {
        self.sensors
            .iter()
            .map(|s| processing_time(s, &self.processor))
            .collect()
    }

    /// Arrival rates stored with the sensors.
    pub fn default_rates(&self) -> RateVector {
        RateVector::new(self.sensors.iter().map(|s| s.arrival_rate).collect())
    }
}

/// Per-sensor arrival rates, packets per second, in priority order.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector(Vec<f64>);

impl RateVector {
    pub fn new(rates: Vec<f64>) -> Self {
        Self(rates)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Checks length against `expected` and that every entry is finite and
    /// non-negative (`strict` additionally rejects zeros).
    pub fn check(&self, expected: usize, strict: bool) -> Result<()> {
        if self.0.len() != expected {
            return Err(Error::InvalidRates(format!(
                "expected {expected} rates, got {}",
                self.0.len()
            )));
        }
        for (i, &r) in self.0.iter().enumerate() {
            let bad = !r.is_finite() || r < 0.0 || (strict && r == 0.0);
            if bad {
                return Err(Error::InvalidRates(format!(
                    "rate of sensor {} must be finite and {}, got {r}",
                    i + 1,
                    if strict { "positive" } else { "non-negative" }
                )));
            }
        }
        Ok(())
    }
}

impl From<Vec<f64>> for RateVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// `τ_j (C_j − C̃_j) / r`, seconds.
pub fn processing_time(sensor: &SensorProfile, processor: &ProcessorConfig) -> f64 {
    sensor.cycles_per_bit * (sensor.raw_size_bits - sensor.processed_size_bits) / processor.cpu_speed
}

/// Noise power over the channel bandwidth, milliwatts.
pub fn noise_power_mw(channel: &ChannelConfig) -> f64 {
    let dbm = channel.noise_density_dbm_per_hz + 10.0 * channel.bandwidth_hz.log10();
    10f64.powf(dbm / 10.0)
}

/// Received SNR at unit fading gain.
pub fn mean_snr(channel: &ChannelConfig) -> f64 {
    channel.transmit_power_mw * channel.distance_m.powf(-channel.path_loss_exponent)
        / noise_power_mw(channel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel() -> ChannelConfig {
        ChannelConfig {
            transmit_power_mw: 100.0,
            bandwidth_hz: 1e5,
            distance_m: 300.0,
            path_loss_exponent: 3.0,
            noise_density_dbm_per_hz: -174.0,
        }
    }

    fn sensor(index: usize, raw: f64, processed: f64) -> SensorProfile {
        SensorProfile {
            index,
            arrival_rate: 0.1,
            raw_size_bits: raw,
            processed_size_bits: processed,
            cycles_per_bit: 1.0,
        }
    }

    #[test]
    fn processing_time_examples() {
        let cpu = ProcessorConfig { cpu_speed: 5e6 };
        assert!((processing_time(&sensor(1, 10e6, 2e6), &cpu) - 1.6).abs() < 1e-12);
        assert!((processing_time(&sensor(1, 7e6, 2e6), &cpu) - 1.0).abs() < 1e-12);
        let tiny = processing_time(&sensor(1, 2e6 + 1e-3, 2e6), &cpu);
        assert!(tiny > 0.0 && tiny < 1e-9);
    }

    #[test]
    fn processing_time_monotone() {
        let s = sensor(1, 10e6, 2e6);
        let mut last = f64::INFINITY;
        for k in 1..50 {
            let t = processing_time(&s, &ProcessorConfig { cpu_speed: k as f64 * 1e6 });
            assert!(t < last);
            last = t;
        }
        let cpu = ProcessorConfig { cpu_speed: 5e6 };
        let mut last = 0.0;
        for k in 1..50 {
            let t = processing_time(&sensor(1, 2e6 + k as f64 * 1e5, 2e6), &cpu);
            assert!(t > last);
            last = t;
        }
    }

    #[test]
    fn noise_power_examples() {
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(noise_power_mw(&channel()), 10f64.powf(-12.4)) < 1e-12);
        assert!(rel(noise_power_mw(&channel()), 3.981e-13) < 1e-3);
        let unit = ChannelConfig { bandwidth_hz: 1.0, ..channel() };
        assert!(rel(noise_power_mw(&unit), 10f64.powf(-17.4)) < 1e-12);
        let ten = ChannelConfig {
            bandwidth_hz: 10.0,
            noise_density_dbm_per_hz: -170.0,
            ..channel()
        };
        assert!(rel(noise_power_mw(&ten), 1e-16) < 1e-12);
    }

    #[test]
    fn mean_snr_examples() {
        let snr = mean_snr(&channel());
        assert!(((snr - 9.30e6) / 9.30e6).abs() < 2e-3, "{snr}");

        // p_A = σ² at d = 1 m
        let mut unit = ChannelConfig { distance_m: 1.0, ..channel() };
        unit.transmit_power_mw = noise_power_mw(&unit);
        assert!((mean_snr(&unit) - 1.0).abs() < 1e-12);

        let doubled = ChannelConfig { transmit_power_mw: 200.0, ..channel() };
        assert!((mean_snr(&doubled) / snr - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mean_snr_decreasing_in_distance_and_exponent() {
        let mut last = f64::INFINITY;
        for k in 1..40 {
            let c = ChannelConfig { distance_m: 1.5 + 10.0 * k as f64, ..channel() };
            let s = mean_snr(&c);
            assert!(s < last);
            last = s;
        }
        let mut last = f64::INFINITY;
        for k in 0..40 {
            let c = ChannelConfig { path_loss_exponent: 2.05 + 0.1 * k as f64, ..channel() };
            let s = mean_snr(&c);
            assert!(s < last);
            last = s;
        }
    }

    #[test]
    fn pure_functions_are_bit_identical() {
        let c = channel();
        assert_eq!(mean_snr(&c).to_bits(), mean_snr(&c).to_bits());
        assert_eq!(noise_power_mw(&c).to_bits(), noise_power_mw(&c).to_bits());
    }

    #[test]
    fn rejects_bad_configs() {
        let cpu = ProcessorConfig { cpu_speed: 5e6 };
        assert!(SystemConfig::new(vec![], cpu, channel()).is_err());
        assert!(SystemConfig::new(vec![sensor(2, 10e6, 2e6)], cpu, channel()).is_err());
        assert!(SystemConfig::new(vec![sensor(1, 2e6, 2e6)], cpu, channel()).is_err());
        let bad_alpha = ChannelConfig { path_loss_exponent: 2.0, ..channel() };
        assert!(SystemConfig::new(vec![sensor(1, 10e6, 2e6)], cpu, bad_alpha).is_err());
        let bad_cpu = ProcessorConfig { cpu_speed: 0.0 };
        assert!(SystemConfig::new(vec![sensor(1, 10e6, 2e6)], bad_cpu, channel()).is_err());
        let mut zero_rate = sensor(1, 10e6, 2e6);
        zero_rate.arrival_rate = 0.0;
        assert!(SystemConfig::new(vec![zero_rate], cpu, channel()).is_err());
        assert!(SystemConfig::new(
            vec![sensor(1, 10e6, 2e6), sensor(2, 7e6, 2e6)],
            cpu,
            channel()
        )
        .is_ok());
    }

    #[test]
    fn rate_vector_checks() {
        let r = RateVector::new(vec![0.1, 0.0]);
        assert!(r.check(2, false).is_ok());
        assert!(r.check(2, true).is_err());
        assert!(r.check(3, false).is_err());
        assert!(RateVector::new(vec![f64::NAN]).check(1, false).is_err());
    }
}
