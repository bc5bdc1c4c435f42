//! Seeded sensor models: barometer, gas sensor, GPS, IMU and bus monitor.
//!
//! All channels draw Gaussian noise from one ChaCha stream in a fixed order,
//! so a given seed and truth sequence always yields the same readings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descent::{altitude_to_pressure, pressure_to_altitude, AirEnvironment, VehicleState};

/// Factor applied to the attitude-rate noise sigma while the gyro detumbles.
pub const STABILIZED_RATE_DAMPING: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorError {
    #[error("{channel}: {message}")]
    Invalid {
        channel: &'static str,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub bias: f64,
    pub sigma: f64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec {
        bias: 0.0,
        sigma: 0.0,
    };

    pub fn new(bias: f64, sigma: f64) -> Self {
        Self { bias, sigma }
    }

    fn validate(&self, channel: &'static str) -> Result<(), SensorError> {
        if self.sigma >= 0.0 && self.bias.is_finite() && self.sigma.is_finite() {
            Ok(())
        } else {
            Err(SensorError::Invalid {
                channel,
                message: format!("sigma must be finite and >= 0, got {}", self.sigma),
            })
        }
    }
}

/// Static description of the on-board sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSuiteConfig {
    /// Barometer noise, hPa.
    pub altimeter: NoiseSpec,
    /// Gas sensor noise, ppm.
    pub gas: NoiseSpec,
    pub baseline_ppm: f64,
    /// GPS noise, degrees.
    pub gps: NoiseSpec,
    pub site_lat: f64,
    pub site_lon: f64,
    /// Attitude rate and acceleration noise, shared by all six channels.
    pub imu: NoiseSpec,
    /// Bus voltage noise, V.
    pub power: NoiseSpec,
    pub bus_voltage_nominal: f64,
    /// Bus current noise, mA.
    pub current: NoiseSpec,
    pub bus_current_nominal: f64,
}

impl Default for SensorSuiteConfig {
    fn default() -> Self {
        Self {
            altimeter: NoiseSpec::new(0.0, 0.03),
            gas: NoiseSpec::new(0.0, 3.0),
            baseline_ppm: 50.26,
            gps: NoiseSpec::new(0.0, 1e-5),
            site_lat: 23.11,
            site_lon: 72.49,
            imu: NoiseSpec::new(0.0, 0.02),
            power: NoiseSpec::new(0.0, 0.05),
            bus_voltage_nominal: 12.0,
            current: NoiseSpec::new(0.0, 5.0),
            bus_current_nominal: 250.0,
        }
    }
}

impl SensorSuiteConfig {
    pub fn validate(&self) -> Result<(), SensorError> {
        self.altimeter.validate("altimeter")?;
        self.gas.validate("gas")?;
        self.gps.validate("gps")?;
        self.imu.validate("imu")?;
        self.power.validate("power")?;
        self.current.validate("current")?;
        if !(self.baseline_ppm > 0.0) {
            return Err(SensorError::Invalid {
                channel: "gas",
                message: format!("baseline_ppm must be > 0, got {}", self.baseline_ppm),
            });
        }
        Ok(())
    }

    /// A suite that reports truth exactly.
    pub fn noiseless(&self) -> Self {
        Self {
            altimeter: NoiseSpec::NONE,
            gas: NoiseSpec::NONE,
            gps: NoiseSpec::NONE,
            imu: NoiseSpec::NONE,
            power: NoiseSpec::NONE,
            current: NoiseSpec::NONE,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorReadings {
    /// hPa
    pub pressure: f64,
    /// Barometric altitude from `pressure`, m.
    pub derived_altitude: f64,
    pub ppm: f64,
    pub lat: f64,
    pub lon: f64,
    pub rot_x: f64,
    pub rot_y: f64,
    pub rot_z: f64,
    /// g
    pub acc_x: f64,
    pub acc_y: f64,
    pub acc_z: f64,
    /// V
    pub bus_voltage: f64,
    /// mA
    pub current: f64,
}

impl SensorReadings {
    /// Bus power, mW.
    pub fn power_mw(&self) -> f64 {
        self.bus_voltage * self.current
    }
}

/// A sensor suite together with its noise generator.
#[derive(Debug, Clone)]
pub struct SensorSuite {
    config: SensorSuiteConfig,
    rng: ChaCha8Rng,
}

impl SensorSuite {
    pub fn new(config: SensorSuiteConfig, seed: u64) -> Result<Self, SensorError> {
        config.validate()?;
        Ok(Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn config(&self) -> &SensorSuiteConfig {
        &self.config
    }

    fn draw(&mut self, spec: NoiseSpec) -> f64 {
        // Always consume a draw so the stream layout does not depend on sigma.
        let n: f64 = StandardNormal.sample(&mut self.rng);
        spec.bias + spec.sigma * n
    }

    /// Read every channel once. Draw order: pressure, ppm, lat, lon,
    /// rot x/y/z, acc x/y/z, bus voltage, bus current.
    pub fn sample(
        &mut self,
        truth: &VehicleState,
        env: &AirEnvironment,
        stabilized: bool,
    ) -> SensorReadings {
        let cfg = self.config.clone();

        let true_pressure = altitude_to_pressure(truth.altitude.max(0.0), env.p0);
        let pressure = (true_pressure + self.draw(cfg.altimeter)).max(f64::MIN_POSITIVE);
        let derived_altitude = pressure_to_altitude(pressure.min(env.p0 * 1.05), env.p0)
            .expect("pressure clamped into the barometric domain");

        let ppm = (cfg.baseline_ppm + self.draw(cfg.gas)).max(0.0);
        let lat = cfg.site_lat + self.draw(cfg.gps);
        let lon = cfg.site_lon + self.draw(cfg.gps);

        let rate = if stabilized {
            NoiseSpec::new(cfg.imu.bias, cfg.imu.sigma * STABILIZED_RATE_DAMPING)
        } else {
            cfg.imu
        };
        let rot_x = self.draw(rate);
        let rot_y = self.draw(rate);
        let rot_z = self.draw(rate);
        let acc_x = self.draw(cfg.imu);
        let acc_y = self.draw(cfg.imu);
        let acc_z = self.draw(cfg.imu);

        let bus_voltage = cfg.bus_voltage_nominal + self.draw(cfg.power);
        let current = (cfg.bus_current_nominal + self.draw(cfg.current)).max(0.0);

        SensorReadings {
            pressure,
            derived_altitude,
            ppm,
            lat,
            lon,
            rot_x,
            rot_y,
            rot_z,
            acc_x,
            acc_y,
            acc_z,
            bus_voltage,
            current,
        }
    }
}

/// Linear air-temperature profile, °C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureProfile {
    pub surface_temp: f64,
    /// °C per metre of altitude.
    pub lapse: f64,
}

impl Default for TemperatureProfile {
    fn default() -> Self {
        Self {
            surface_temp: 41.3,
            lapse: 0.0,
        }
    }
}

impl TemperatureProfile {
    pub fn temperature_at(&self, truth: &VehicleState) -> f64 {
        self.surface_temp - self.lapse * truth.altitude
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsm::FlightMode;

    fn truth(altitude: f64) -> VehicleState {
        VehicleState::at_rest(altitude, FlightMode::PrimaryDescent)
    }

    #[test]
    fn noiseless_identity() {
        let cfg = SensorSuiteConfig::default().noiseless();
        let env = AirEnvironment::default();
        let mut suite = SensorSuite::new(cfg.clone(), 1).unwrap();
        let r = suite.sample(&truth(0.0), &env, false);
        assert_eq!(r.pressure, env.p0);
        assert_eq!(r.derived_altitude, 0.0);
        assert_eq!(r.ppm, cfg.baseline_ppm);
        assert_eq!((r.lat, r.lon), (cfg.site_lat, cfg.site_lon));
        assert_eq!((r.rot_x, r.acc_z), (0.0, 0.0));
    }

    #[test]
    fn noiseless_round_trip_through_pressure() {
        let env = AirEnvironment::default();
        let mut suite = SensorSuite::new(SensorSuiteConfig::default().noiseless(), 1).unwrap();
        for alt in [0.0, 2.0, 150.44, 500.0, 770.38, 900.0] {
            let r = suite.sample(&truth(alt), &env, false);
            assert!((r.derived_altitude - alt).abs() < 0.01, "{alt} -> {}", r.derived_altitude);
        }
    }

    #[test]
    fn ppm_stays_in_recorded_envelope() {
        let env = AirEnvironment::default();
        let mut suite = SensorSuite::new(SensorSuiteConfig::default(), 7).unwrap();
        for i in 0..14 {
            let r = suite.sample(&truth(150.0 + 45.0 * i as f64), &env, false);
            assert!((40.98..=59.54).contains(&r.ppm), "ppm {}", r.ppm);
            assert_eq!((r.lat * 100.0).round() / 100.0, 23.11);
            assert_eq!((r.lon * 100.0).round() / 100.0, 72.49);
        }
    }

    #[test]
    fn ppm_never_negative() {
        let cfg = SensorSuiteConfig {
            gas: NoiseSpec::new(-100.0, 1.0),
            ..SensorSuiteConfig::default()
        };
        let mut suite = SensorSuite::new(cfg, 3).unwrap();
        let r = suite.sample(&truth(10.0), &AirEnvironment::default(), false);
        assert_eq!(r.ppm, 0.0);
    }

    #[test]
    fn seeded_determinism() {
        let env = AirEnvironment::default();
        let run = |seed| {
            let mut s = SensorSuite::new(SensorSuiteConfig::default(), seed).unwrap();
            (0..50)
                .map(|i| s.sample(&truth(900.0 - i as f64), &env, i % 2 == 0))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }

    #[test]
    fn rejects_negative_sigma() {
        let cfg = SensorSuiteConfig {
            imu: NoiseSpec::new(0.0, -1.0),
            ..SensorSuiteConfig::default()
        };
        assert!(SensorSuite::new(cfg, 0).is_err());
        let cfg = SensorSuiteConfig {
            baseline_ppm: 0.0,
            ..SensorSuiteConfig::default()
        };
        assert!(SensorSuite::new(cfg, 0).is_err());
    }

    #[test]
    fn temperature_examples() {
        let flat = TemperatureProfile {
            surface_temp: 41.3,
            lapse: 0.0,
        };
        assert_eq!(flat.temperature_at(&truth(0.0)), 41.3);
        assert_eq!(flat.temperature_at(&truth(900.0)), 41.3);
        let standard = TemperatureProfile {
            surface_temp: 41.3,
            lapse: 0.0065,
        };
        assert!((standard.temperature_at(&truth(770.38)) - 36.29).abs() < 0.005);
    }
}
