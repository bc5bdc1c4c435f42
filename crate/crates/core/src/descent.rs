//! Vertical descent physics: quadratic drag, terminal velocity, the barometric
//! altitude conversion and a fixed-step integrator for a body hanging under
//! zero or more parachutes.
//!
//! Everything here is one-dimensional. Altitude is metres above ground level,
//! velocity is positive upwards (a descending vehicle has `v < 0`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::FlightMode;
use crate::parachute::ParachuteSpec;

/// Standard gravity used throughout the simulator, m/s².
pub const STANDARD_GRAVITY: f64 = 9.81;
/// Sea-level air density, kg/m³. Held constant over the whole drop.
pub const SEA_LEVEL_DENSITY: f64 = 1.225;
/// Reference pressure for the barometric conversion, hPa.
pub const SEA_LEVEL_PRESSURE_HPA: f64 = 1013.25;

/// Largest step `step_descent` accepts, s.
pub const MAX_STEP: f64 = 0.1;

const BARO_SCALE_M: f64 = 44330.0;
const BARO_EXPONENT: f64 = 5.255;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("{name} must be {requirement}, got {value}")]
    Domain {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
}

pub(crate) fn require(
    ok: bool,
    name: &'static str,
    requirement: &'static str,
    value: f64,
) -> Result<(), PhysicsError> {
    if ok {
        Ok(())
    } else {
        Err(PhysicsError::Domain {
            name,
            requirement,
            value,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirEnvironment {
    /// Air density, kg/m³.
    pub rho: f64,
    /// Gravitational acceleration, m/s².
    pub g: f64,
    /// Ground-level reference pressure, hPa.
    pub p0: f64,
}

impl Default for AirEnvironment {
    fn default() -> Self {
        Self {
            rho: SEA_LEVEL_DENSITY,
            g: STANDARD_GRAVITY,
            p0: SEA_LEVEL_PRESSURE_HPA,
        }
    }
}

impl AirEnvironment {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        require(self.rho > 0.0, "rho", "> 0", self.rho)?;
        require(self.g > 0.0, "g", "> 0", self.g)?;
        require(self.p0 > 0.0, "p0", "> 0", self.p0)
    }
}

/// The can itself, without any decelerator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentBody {
    /// kg
    pub mass: f64,
    pub body_cd: f64,
    /// Frontal area of the bare can, m².
    pub body_area: f64,
}

impl DescentBody {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        require(self.mass > 0.0, "mass", "> 0", self.mass)?;
        require(self.body_cd >= 0.0, "body_cd", ">= 0", self.body_cd)?;
        require(self.body_area >= 0.0, "body_area", ">= 0", self.body_area)
    }

    pub fn weight(&self, env: &AirEnvironment) -> f64 {
        self.mass * env.g
    }
}

/// Simulator truth for the vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub t: f64,
    /// Metres above ground, never negative once clamped.
    pub altitude: f64,
    /// Vertical velocity, m/s, negative when descending.
    pub v: f64,
    /// Names of the deployed parachutes.
    pub active_chutes: Vec<String>,
    pub mode: FlightMode,
}

impl VehicleState {
    pub fn at_rest(altitude: f64, mode: FlightMode) -> Self {
        Self {
            t: 0.0,
            altitude,
            v: 0.0,
            active_chutes: Vec::new(),
            mode,
        }
    }

    pub fn on_ground(&self) -> bool {
        self.altitude <= 0.0
    }
}

/// Magnitude of aerodynamic drag, N. The caller applies the direction.
pub fn drag_force(cd: f64, rho: f64, v: f64, area: f64) -> Result<f64, PhysicsError> {
    require(cd >= 0.0, "cd", ">= 0", cd)?;
    require(rho > 0.0, "rho", "> 0", rho)?;
    require(area >= 0.0, "area", ">= 0", area)?;
    Ok(0.5 * cd * rho * v * v * area)
}

/// Speed at which drag balances `weight`, m/s.
pub fn terminal_velocity(weight: f64, cd: f64, rho: f64, area: f64) -> Result<f64, PhysicsError> {
    require(weight >= 0.0, "weight", ">= 0", weight)?;
    require(rho > 0.0, "rho", "> 0", rho)?;
    require(cd >= 0.0, "cd", ">= 0", cd)?;
    require(area >= 0.0, "area", ">= 0", area)?;
    let drag_area = cd * rho * area;
    require(drag_area > 0.0, "cd * rho * area", "> 0", drag_area)?;
    Ok((2.0 * weight / drag_area).sqrt())
}

/// Barometric altitude above the `p0` reference level, m.
pub fn pressure_to_altitude(p: f64, p0: f64) -> Result<f64, PhysicsError> {
    require(p0 > 0.0, "p0", "> 0", p0)?;
    require(p > 0.0, "pressure", "> 0", p)?;
    require(p <= p0 * 1.05, "pressure", "<= 1.05 * p0", p)?;
    Ok(BARO_SCALE_M * (1.0 - (p / p0).powf(1.0 / BARO_EXPONENT)))
}

/// Inverse of [`pressure_to_altitude`], hPa.
pub fn altitude_to_pressure(altitude: f64, p0: f64) -> f64 {
    p0 * (1.0 - altitude / BARO_SCALE_M).powf(BARO_EXPONENT)
}

/// Sum of Cd·A over the bare body and every deployed chute, m².
pub fn effective_drag_area(body: &DescentBody, chutes: &[ParachuteSpec]) -> f64 {
    body.body_cd * body.body_area
        + chutes
            .iter()
            .map(|c| c.cd * c.effective_area())
            .sum::<f64>()
}

/// Terminal descent speed of `body` under `chutes`, m/s.
pub fn descent_rate(
    body: &DescentBody,
    chutes: &[ParachuteSpec],
    env: &AirEnvironment,
) -> Result<f64, PhysicsError> {
    terminal_velocity(
        body.weight(env),
        effective_drag_area(body, chutes),
        env.rho,
        1.0,
    )
}

/// Advance the vehicle by one semi-implicit Euler step.
///
/// Velocity is updated from the forces at the start of the step, then the
/// altitude is advanced with the new velocity. Touching the ground clamps the
/// altitude to zero and stops the vehicle.
pub fn step_descent(
    state: VehicleState,
    body: &DescentBody,
    chutes: &[ParachuteSpec],
    env: &AirEnvironment,
    dt: f64,
) -> Result<VehicleState, PhysicsError> {
    require(dt > 0.0, "dt", "> 0", dt)?;
    require(dt <= MAX_STEP, "dt", "<= 0.1 s", dt)?;

    let mut next = state;
    next.t += dt;
    if next.on_ground() && next.v <= 0.0 {
        next.altitude = 0.0;
        next.v = 0.0;
        return Ok(next);
    }

    let drag = drag_force(effective_drag_area(body, chutes), env.rho, next.v, 1.0)?;
    let accel = -env.g - next.v.signum() * drag / body.mass;
    next.v += accel * dt;
    next.altitude += next.v * dt;

    if next.altitude <= 0.0 {
        next.altitude = 0.0;
        next.v = 0.0;
    }
    Ok(next)
}
