//! Mission configuration.
//!
//! The file format is line based: `key = value`, dotted keys for sections,
//! `#` starts a comment. Keys not present keep their defaults. Repeated
//! `component` lines replace the default parts list as a whole:
//!
//! ```text
//! fsm.secondary_deploy_altitude = 500
//! chute.primary.target_v = 11
//! component = Xbee S2C Pro | 15 | 3.3V | 60
//! ```

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::budgets::{reference_components, Battery, CanGeometry, ComponentEntry, Rail};
use crate::descent::{AirEnvironment, DescentBody, MAX_STEP};
use crate::fsm::FsmConfig;
use crate::parachute::{size_for_descent, ParachuteSpec, DEFAULT_CANOPY_CD, GUIDELINE_SPILL_RATIO};
use crate::sensors::{NoiseSpec, SensorSuiteConfig, TemperatureProfile};
use crate::telemetry::{LinkParams, DEFAULT_CADENCE};

/// The documented default configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.cfg");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("config key `{key}`: {message}")]
    Field { key: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn field_err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        key: key.to_string(),
        message: message.into(),
    }
}

/// How a canopy's size is given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChuteSizing {
    /// Canopy diameter, m.
    Diameter(f64),
    /// Size the canopy so the can alone falls at this speed under it, m/s.
    TargetSpeed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChuteConfig {
    pub name: String,
    pub sizing: ChuteSizing,
    pub spill_ratio: f64,
    pub cd: f64,
    pub deploy_altitude: f64,
    pub material: String,
}

impl ChuteConfig {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            sizing: ChuteSizing::TargetSpeed(3.0),
            spill_ratio: GUIDELINE_SPILL_RATIO,
            cd: DEFAULT_CANOPY_CD,
            deploy_altitude: 0.0,
            material: "nylon".into(),
        }
    }

    pub fn resolve(&self, body: &DescentBody, env: &AirEnvironment) -> Result<ParachuteSpec, ConfigError> {
        let key = |f: &str| format!("chute.{}.{f}", self.name);
        let canopy_diameter = match self.sizing {
            ChuteSizing::Diameter(d) => d,
            ChuteSizing::TargetSpeed(v) => {
                size_for_descent(body.mass, v, self.cd, env, self.spill_ratio)
                    .map_err(|e| field_err(&key("target_v"), e.to_string()))?
                    .canopy_diameter
            }
        };
        let spec = ParachuteSpec {
            name: self.name.clone(),
            canopy_diameter,
            spill_ratio: self.spill_ratio,
            cd: self.cd,
            deploy_altitude: self.deploy_altitude,
            material: self.material.clone(),
        };
        if let Some(v) = crate::parachute::validate_spec(&spec, false).first() {
            return Err(field_err(&key(v.field), format!("expected {}, got {}", v.expected, v.actual)));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionConfig {
    pub mission_id: String,
    pub start_time: String,
    pub seed: u64,

    /// Integrator step, s.
    pub dt: f64,
    /// Telemetry period, s.
    pub cadence: f64,
    /// Carrier climb speed before release, m/s.
    pub climb_rate: f64,
    /// Keep running this long after touchdown, s.
    pub post_landing: f64,
    /// Stop after this much simulated time, s, even if not landed.
    pub max_duration: Option<f64>,

    pub env: AirEnvironment,
    pub body: DescentBody,
    pub fsm: FsmConfig,
    pub chutes: Vec<ChuteConfig>,
    pub sensors: SensorSuiteConfig,
    pub temperature: TemperatureProfile,
    pub link: LinkParams,
    /// Horizontal distance from the ground station to the drop point, m.
    pub ground_offset: f64,

    pub components: Vec<ComponentEntry>,
    pub battery: Battery,
    pub regulator_efficiency: f64,
    pub can: CanGeometry,
}

impl Default for MissionConfig {
    fn default() -> Self {
        let primary = ChuteConfig {
            sizing: ChuteSizing::TargetSpeed(11.0),
            deploy_altitude: 900.0,
            ..ChuteConfig::new("primary")
        };
        let secondary = ChuteConfig {
            sizing: ChuteSizing::TargetSpeed(3.0),
            deploy_altitude: 500.0,
            ..ChuteConfig::new("secondary")
        };
        Self {
            mission_id: "cansat-drop".into(),
            start_time: "2024-04-16T10:00:00Z".into(),
            seed: 42,
            dt: 0.01,
            cadence: DEFAULT_CADENCE,
            climb_rate: 5.0,
            post_landing: 10.0,
            max_duration: None,
            env: AirEnvironment::default(),
            body: DescentBody {
                mass: 0.7276,
                body_cd: 0.8,
                body_area: 0.012272,
            },
            fsm: FsmConfig::default(),
            chutes: vec![primary, secondary],
            sensors: SensorSuiteConfig::default(),
            temperature: TemperatureProfile::default(),
            link: LinkParams::default(),
            ground_offset: 200.0,
            components: reference_components(),
            battery: Battery::default(),
            regulator_efficiency: 0.85,
            can: CanGeometry::default(),
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| field_err(key, format!("expected a number, got {value:?}")))
}

fn parse_u64(key: &str, value: &str) -> Result<u64, ConfigError> {
    value
        .parse::<u64>()
        .map_err(|_| field_err(key, format!("expected a non-negative integer, got {value:?}")))
}

fn parse_component(key: &str, value: &str) -> Result<ComponentEntry, ConfigError> {
    let parts: Vec<&str> = value.split('|').map(str::trim).collect();
    let [name, mass, rail, current] = parts.as_slice() else {
        return Err(field_err(key, "expected `name | mass_g | rail | current_ma`"));
    };
    if name.is_empty() {
        return Err(field_err(key, "component name is empty"));
    }
    let rail: Rail = rail.parse().map_err(|e: String| field_err(key, e))?;
    let entry = ComponentEntry::new(name, parse_f64(key, mass)?, rail, parse_f64(key, current)?);
    entry.validate().map_err(|e| field_err(key, e.to_string()))?;
    Ok(entry)
}

impl MissionConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut components: Option<Vec<ComponentEntry>> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    message: format!("expected `key = value`, got {line:?}"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key == "component" {
                components
                    .get_or_insert_with(Vec::new)
                    .push(parse_component(key, value)?);
            } else {
                cfg.set(key, value)?;
            }
        }
        if let Some(c) = components {
            cfg.components = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    fn chute_mut(&mut self, name: &str) -> &mut ChuteConfig {
        if let Some(i) = self.chutes.iter().position(|c| c.name == name) {
            &mut self.chutes[i]
        } else {
            self.chutes.push(ChuteConfig::new(name));
            self.chutes.last_mut().expect("just pushed")
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let f = || parse_f64(key, value);
        match key {
            "mission.id" => self.mission_id = value.to_string(),
            "mission.start_time" => self.start_time = value.to_string(),
            "mission.seed" => self.seed = parse_u64(key, value)?,
            "sim.dt" => self.dt = f()?,
            "sim.cadence" => self.cadence = f()?,
            "sim.climb_rate" => self.climb_rate = f()?,
            "sim.post_landing" => self.post_landing = f()?,
            "sim.max_duration" => {
                let v = f()?;
                self.max_duration = (v > 0.0).then_some(v);
            }
            "env.rho" => self.env.rho = f()?,
            "env.g" => self.env.g = f()?,
            "env.p0" => self.env.p0 = f()?,
            "body.mass" => self.body.mass = f()?,
            "body.cd" => self.body.body_cd = f()?,
            "body.area" => self.body.body_area = f()?,
            "fsm.release_altitude" => self.fsm.release_altitude = f()?,
            "fsm.secondary_deploy_altitude" => self.fsm.secondary_deploy_altitude = f()?,
            "fsm.landed_altitude" => self.fsm.landed_altitude = f()?,
            "fsm.debounce_samples" => {
                self.fsm.debounce_samples = u32::try_from(parse_u64(key, value)?)
                    .map_err(|_| field_err(key, "too large"))?
            }
            "sensors.altimeter.bias" => self.sensors.altimeter.bias = f()?,
            "sensors.altimeter.sigma" => self.sensors.altimeter.sigma = f()?,
            "sensors.gas.baseline" => self.sensors.baseline_ppm = f()?,
            "sensors.gas.bias" => self.sensors.gas.bias = f()?,
            "sensors.gas.sigma" => self.sensors.gas.sigma = f()?,
            "sensors.gps.site_lat" => self.sensors.site_lat = f()?,
            "sensors.gps.site_lon" => self.sensors.site_lon = f()?,
            "sensors.gps.bias" => self.sensors.gps.bias = f()?,
            "sensors.gps.sigma" => self.sensors.gps.sigma = f()?,
            "sensors.imu.bias" => self.sensors.imu.bias = f()?,
            "sensors.imu.sigma" => self.sensors.imu.sigma = f()?,
            "sensors.power.nominal_voltage" => self.sensors.bus_voltage_nominal = f()?,
            "sensors.power.bias" => self.sensors.power.bias = f()?,
            "sensors.power.sigma" => self.sensors.power.sigma = f()?,
            "sensors.current.nominal" => self.sensors.bus_current_nominal = f()?,
            "sensors.current.bias" => self.sensors.current.bias = f()?,
            "sensors.current.sigma" => self.sensors.current.sigma = f()?,
            "sensors.temp.surface" => self.temperature.surface_temp = f()?,
            "sensors.temp.lapse" => self.temperature.lapse = f()?,
            "link.nominal_range" => self.link.nominal_range = f()?,
            "link.clear_fraction" => self.link.clear_fraction = f()?,
            "link.cutoff_fraction" => self.link.cutoff_fraction = f()?,
            "link.corrupt_probability" => self.link.corrupt_probability = f()?,
            "link.ground_offset" => self.ground_offset = f()?,
            "battery.capacity" => self.battery.capacity = f()?,
            "battery.nominal_voltage" => self.battery.nominal_voltage = f()?,
            "power.regulator_efficiency" => self.regulator_efficiency = f()?,
            "can.height" => self.can.height = f()?,
            "can.diameter" => self.can.diameter = f()?,
            "can.wall_thickness" => self.can.wall_thickness = f()?,
            _ => {
                let Some(rest) = key.strip_prefix("chute.") else {
                    return Err(field_err(key, "unknown key"));
                };
                let Some((name, field)) = rest.rsplit_once('.') else {
                    return Err(field_err(key, "expected chute.<name>.<field>"));
                };
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(field_err(key, "invalid chute name"));
                }
                let value_f = f;
                let chute = self.chute_mut(name);
                match field {
                    "diameter" => chute.sizing = ChuteSizing::Diameter(value_f()?),
                    "target_v" => chute.sizing = ChuteSizing::TargetSpeed(value_f()?),
                    "spill_ratio" => chute.spill_ratio = value_f()?,
                    "cd" => chute.cd = value_f()?,
                    "deploy_altitude" => chute.deploy_altitude = value_f()?,
                    "material" => chute.material = value.to_string(),
                    _ => return Err(field_err(key, "unknown chute field")),
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt > 0.0 && self.dt <= MAX_STEP) {
            return Err(field_err("sim.dt", format!("must be in (0, {MAX_STEP}], got {}", self.dt)));
        }
        if !(self.cadence >= self.dt) {
            return Err(field_err("sim.cadence", "must be at least sim.dt"));
        }
        if !(self.climb_rate > 0.0) {
            return Err(field_err("sim.climb_rate", "must be > 0"));
        }
        if !(self.post_landing >= 0.0) {
            return Err(field_err("sim.post_landing", "must be >= 0"));
        }
        self.env.validate().map_err(|e| field_err("env", e.to_string()))?;
        self.body.validate().map_err(|e| field_err("body", e.to_string()))?;
        self.fsm.validate().map_err(|e| field_err("fsm", e.to_string()))?;
        self.sensors
            .validate()
            .map_err(|e| field_err("sensors", e.to_string()))?;
        self.link.validate().map_err(|e| field_err("link", e.to_string()))?;
        if !(self.ground_offset >= 0.0) {
            return Err(field_err("link.ground_offset", "must be >= 0"));
        }
        self.battery
            .validate()
            .map_err(|e| field_err("battery", e.to_string()))?;
        if !(self.regulator_efficiency > 0.0 && self.regulator_efficiency <= 1.0) {
            return Err(field_err("power.regulator_efficiency", "must be in (0, 1]"));
        }
        self.can.validate().map_err(|e| field_err("can", e.to_string()))?;
        if self.chutes.is_empty() {
            return Err(field_err("chute", "at least one parachute is required"));
        }
        self.parachutes()?;
        Ok(())
    }

    /// Resolve every configured canopy against the body it carries.
    pub fn parachutes(&self) -> Result<Vec<ParachuteSpec>, ConfigError> {
        self.chutes
            .iter()
            .map(|c| c.resolve(&self.body, &self.env))
            .collect()
    }

    pub fn sensor_seed(&self) -> u64 {
        self.seed
    }

    pub fn link_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    /// Render every setting back into the text format. Parsing the result
    /// gives back an equal configuration.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("mission.id", self.mission_id.clone());
        kv("mission.start_time", self.start_time.clone());
        kv("mission.seed", self.seed.to_string());
        kv("sim.dt", self.dt.to_string());
        kv("sim.cadence", self.cadence.to_string());
        kv("sim.climb_rate", self.climb_rate.to_string());
        kv("sim.post_landing", self.post_landing.to_string());
        kv("sim.max_duration", self.max_duration.unwrap_or(0.0).to_string());
        kv("env.rho", self.env.rho.to_string());
        kv("env.g", self.env.g.to_string());
        kv("env.p0", self.env.p0.to_string());
        kv("body.mass", self.body.mass.to_string());
        kv("body.cd", self.body.body_cd.to_string());
        kv("body.area", self.body.body_area.to_string());
        kv("fsm.release_altitude", self.fsm.release_altitude.to_string());
        kv("fsm.secondary_deploy_altitude", self.fsm.secondary_deploy_altitude.to_string());
        kv("fsm.landed_altitude", self.fsm.landed_altitude.to_string());
        kv("fsm.debounce_samples", self.fsm.debounce_samples.to_string());
        for c in &self.chutes {
            let k = |f: &str| format!("chute.{}.{f}", c.name);
            match c.sizing {
                ChuteSizing::Diameter(d) => kv(&k("diameter"), d.to_string()),
                ChuteSizing::TargetSpeed(v) => kv(&k("target_v"), v.to_string()),
            }
            kv(&k("spill_ratio"), c.spill_ratio.to_string());
            kv(&k("cd"), c.cd.to_string());
            kv(&k("deploy_altitude"), c.deploy_altitude.to_string());
            kv(&k("material"), c.material.clone());
        }
        let s = &self.sensors;
        let noise = |kv: &mut dyn FnMut(&str, String), prefix: &str, n: &NoiseSpec| {
            kv(&format!("{prefix}.bias"), n.bias.to_string());
            kv(&format!("{prefix}.sigma"), n.sigma.to_string());
        };
        noise(&mut kv, "sensors.altimeter", &s.altimeter);
        kv("sensors.gas.baseline", s.baseline_ppm.to_string());
        noise(&mut kv, "sensors.gas", &s.gas);
        kv("sensors.gps.site_lat", s.site_lat.to_string());
        kv("sensors.gps.site_lon", s.site_lon.to_string());
        noise(&mut kv, "sensors.gps", &s.gps);
        noise(&mut kv, "sensors.imu", &s.imu);
        kv("sensors.power.nominal_voltage", s.bus_voltage_nominal.to_string());
        noise(&mut kv, "sensors.power", &s.power);
        kv("sensors.current.nominal", s.bus_current_nominal.to_string());
        noise(&mut kv, "sensors.current", &s.current);
        kv("sensors.temp.surface", self.temperature.surface_temp.to_string());
        kv("sensors.temp.lapse", self.temperature.lapse.to_string());
        kv("link.nominal_range", self.link.nominal_range.to_string());
        kv("link.clear_fraction", self.link.clear_fraction.to_string());
        kv("link.cutoff_fraction", self.link.cutoff_fraction.to_string());
        kv("link.corrupt_probability", self.link.corrupt_probability.to_string());
        kv("link.ground_offset", self.ground_offset.to_string());
        kv("battery.capacity", self.battery.capacity.to_string());
        kv("battery.nominal_voltage", self.battery.nominal_voltage.to_string());
        kv("power.regulator_efficiency", self.regulator_efficiency.to_string());
        kv("can.height", self.can.height.to_string());
        kv("can.diameter", self.can.diameter.to_string());
        kv("can.wall_thickness", self.can.wall_thickness.to_string());
        for c in &self.components {
            kv(
                "component",
                format!("{} | {} | {} | {}", c.name, c.mass, c.rail, c.current_draw),
            );
        }
        out
    }
}
