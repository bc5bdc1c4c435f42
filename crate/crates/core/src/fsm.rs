//! Flight mode sequencing.
//!
//! The mission runs through a fixed chain of modes:
//!
//! ```text
//! PRELAUNCH -> ASCENT -> PRIMARY_DESCENT -> SECONDARY_DESCENT -> LANDED
//! ```
//!
//! `ASCENT` covers the carry to altitude and ends with the release command,
//! `PRIMARY_DESCENT` is the fall under the eye-hook chute, `SECONDARY_DESCENT`
//! starts when the altimeter confirms the deployment altitude (the servo
//! deployed canopy plus gyro stabilisation), and `LANDED` drives the recovery
//! buzzer. Telemetry runs in every mode and is not a state of its own.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FlightMode {
    Prelaunch,
    Ascent,
    PrimaryDescent,
    SecondaryDescent,
    Landed,
}

impl FlightMode {
    pub const ALL: [FlightMode; 5] = [
        FlightMode::Prelaunch,
        FlightMode::Ascent,
        FlightMode::PrimaryDescent,
        FlightMode::SecondaryDescent,
        FlightMode::Landed,
    ];

    /// Wire code, 0..=4.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FlightMode::Prelaunch => "PRELAUNCH",
            FlightMode::Ascent => "ASCENT",
            FlightMode::PrimaryDescent => "PRIMARY_DESCENT",
            FlightMode::SecondaryDescent => "SECONDARY_DESCENT",
            FlightMode::Landed => "LANDED",
        }
    }

    pub fn is_descending(self) -> bool {
        matches!(self, FlightMode::PrimaryDescent | FlightMode::SecondaryDescent)
    }

    fn successor(self) -> Option<Self> {
        Self::from_code(self.code() + 1)
    }
}

impl fmt::Display for FlightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FlightMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown flight mode {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsmConfig {
    pub release_altitude: f64,
    pub secondary_deploy_altitude: f64,
    pub landed_altitude: f64,
    pub debounce_samples: u32,
}

impl Default for FsmConfig {
    fn default() -> Self {
        Self {
            release_altitude: 900.0,
            secondary_deploy_altitude: 500.0,
            landed_altitude: 2.0,
            debounce_samples: 3,
        }
    }
}

impl FsmConfig {
    pub fn validate(&self) -> Result<(), FsmError> {
        let ordered = self.release_altitude > self.secondary_deploy_altitude
            && self.secondary_deploy_altitude > self.landed_altitude
            && self.landed_altitude >= 0.0;
        if !ordered {
            return Err(FsmError::InvalidConfig(
                "expected release_altitude > secondary_deploy_altitude > landed_altitude >= 0".into(),
            ));
        }
        if self.debounce_samples == 0 {
            return Err(FsmError::InvalidConfig("debounce_samples must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub t: f64,
    pub from: FlightMode,
    pub to: FlightMode,
    /// Altitude sample that completed the trigger, m. Commanded transitions
    /// carry the last altitude seen, if any.
    pub trigger_altitude: Option<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsmError {
    #[error("invalid transition: {event} not allowed in {mode}")]
    InvalidTransition { event: &'static str, mode: FlightMode },
    #[error("non-monotone time: sample at t={t} after t={last}")]
    NonMonotoneTime { t: f64, last: f64 },
    #[error("invalid fsm config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuzzerPattern {
    Silent,
    Chirp,
    Continuous,
}

#[derive(Debug, Clone)]
pub struct FlightStateMachine {
    config: FsmConfig,
    mode: FlightMode,
    log: Vec<Transition>,
    last_t: Option<f64>,
    last_altitude: Option<f64>,
    qualifying: u32,
}

impl FlightStateMachine {
    pub fn new(config: FsmConfig) -> Result<Self, FsmError> {
        config.validate()?;
        Ok(Self {
            config,
            mode: FlightMode::Prelaunch,
            log: Vec::new(),
            last_t: None,
            last_altitude: None,
            qualifying: 0,
        })
    }

    pub fn mode(&self) -> FlightMode {
        self.mode
    }

    pub fn config(&self) -> &FsmConfig {
        &self.config
    }

    pub fn event_log(&self) -> &[Transition] {
        &self.log
    }

    /// Power-on complete, carrier starts climbing.
    pub fn begin_ascent(&mut self, t: f64) -> Result<Transition, FsmError> {
        self.command(FlightMode::Prelaunch, "begin_ascent", t)
    }

    /// The carrier lets go of the can. The eye-hook chute is live from here.
    pub fn trigger_release(&mut self, t: f64) -> Result<Transition, FsmError> {
        self.command(FlightMode::Ascent, "trigger_release", t)
    }

    fn command(
        &mut self,
        required: FlightMode,
        event: &'static str,
        t: f64,
    ) -> Result<Transition, FsmError> {
        if self.mode != required {
            return Err(FsmError::InvalidTransition {
                event,
                mode: self.mode,
            });
        }
        if let Some(last) = self.log.last().map(|e| e.t) {
            if t <= last {
                return Err(FsmError::NonMonotoneTime { t, last });
            }
        }
        Ok(self.advance(t, self.last_altitude))
    }

    fn advance(&mut self, t: f64, trigger_altitude: Option<f64>) -> Transition {
        let from = self.mode;
        let to = from.successor().expect("LANDED has no successor");
        let event = Transition {
            t,
            from,
            to,
            trigger_altitude,
        };
        self.mode = to;
        self.qualifying = 0;
        self.log.push(event);
        event
    }

    /// Feed one altimeter sample. Samples must arrive in strictly increasing
    /// time order; an out-of-order sample is rejected and leaves the machine
    /// untouched.
    pub fn on_altitude_sample(
        &mut self,
        altitude: f64,
        t: f64,
    ) -> Result<Option<Transition>, FsmError> {
        if let Some(last) = self.last_t {
            if t <= last {
                return Err(FsmError::NonMonotoneTime { t, last });
            }
        }
        let previous = self.last_altitude;
        self.last_t = Some(t);
        self.last_altitude = Some(altitude);

        let qualifies = match self.mode {
            FlightMode::PrimaryDescent => {
                altitude <= self.config.secondary_deploy_altitude
                    && previous.is_some_and(|p| altitude < p)
            }
            FlightMode::SecondaryDescent => altitude <= self.config.landed_altitude,
            _ => return Ok(None),
        };
        if !qualifies {
            self.qualifying = 0;
            return Ok(None);
        }
        self.qualifying += 1;
        if self.qualifying >= self.config.debounce_samples {
            Ok(Some(self.advance(t, Some(altitude))))
        } else {
            Ok(None)
        }
    }

    /// Gyro detumbling runs only under the secondary canopy.
    pub fn stabilization_active(&self) -> bool {
        self.mode == FlightMode::SecondaryDescent
    }

    pub fn buzzer_pattern(&self, frame_just_sent: bool) -> BuzzerPattern {
        match self.mode {
            FlightMode::Landed => BuzzerPattern::Continuous,
            FlightMode::Prelaunch => BuzzerPattern::Silent,
            _ if frame_just_sent => BuzzerPattern::Chirp,
            _ => BuzzerPattern::Silent,
        }
    }
}
