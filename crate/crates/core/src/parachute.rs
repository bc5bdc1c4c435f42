//! Spill-hole parachute geometry and sizing.

use std::f64::consts::FRAC_PI_4;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::descent::{require, AirEnvironment, PhysicsError};

/// Spill-hole diameter as a fraction of canopy diameter recommended for a
/// stable round canopy.
pub const GUIDELINE_SPILL_RATIO: f64 = 0.20;
pub const GUIDELINE_SPILL_TOLERANCE: f64 = 0.005;
/// Drag coefficient assumed for a spill-hole round canopy when none is given.
pub const DEFAULT_CANOPY_CD: f64 = 1.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParachuteSpec {
    pub name: String,
    /// m
    pub canopy_diameter: f64,
    /// Spill-hole diameter divided by canopy diameter.
    pub spill_ratio: f64,
    pub cd: f64,
    /// Altitude at which the chute opens, m. Zero means it opens at release.
    pub deploy_altitude: f64,
    pub material: String,
}

impl ParachuteSpec {
    /// Canopy area with the spill hole removed, m².
    pub fn effective_area(&self) -> f64 {
        effective_area(self)
    }

    pub fn spill_hole_diameter(&self) -> f64 {
        self.canopy_diameter * self.spill_ratio
    }
}

pub fn effective_area(spec: &ParachuteSpec) -> f64 {
    FRAC_PI_4 * spec.canopy_diameter.powi(2) * (1.0 - spec.spill_ratio.powi(2))
}

/// Size a canopy so that `mass` descends at `target_v` under it alone.
pub fn size_for_descent(
    mass: f64,
    target_v: f64,
    cd: f64,
    env: &AirEnvironment,
    spill_ratio: f64,
) -> Result<ParachuteSpec, PhysicsError> {
    require(mass > 0.0, "mass", "> 0", mass)?;
    require(target_v > 0.0, "target_v", "> 0", target_v)?;
    require(cd > 0.0, "cd", "> 0", cd)?;
    require(
        (0.0..1.0).contains(&spill_ratio),
        "spill_ratio",
        "in [0, 1)",
        spill_ratio,
    )?;
    env.validate()?;

    let area = 2.0 * mass * env.g / (cd * env.rho * target_v * target_v);
    let diameter = (area / (FRAC_PI_4 * (1.0 - spill_ratio * spill_ratio))).sqrt();
    Ok(ParachuteSpec {
        name: format!("canopy-{target_v}mps"),
        canopy_diameter: diameter,
        spill_ratio,
        cd,
        deploy_altitude: 0.0,
        material: "nylon".into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub expected: String,
    pub actual: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: expected {}, got {}", self.field, self.expected, self.actual)
    }
}

/// List every invariant breach of `spec`. With `check_guideline` the spill
/// ratio must also sit within ±0.005 of 0.20.
pub fn validate_spec(spec: &ParachuteSpec, check_guideline: bool) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, field, expected: &str, actual| {
        if !ok {
            out.push(Violation {
                field,
                expected: expected.to_string(),
                actual,
            });
        }
    };

    let d = spec.canopy_diameter;
    check(d > 0.0, "canopy_diameter", "> 0", d);
    let r = spec.spill_ratio;
    check((0.0..1.0).contains(&r), "spill_ratio", "in [0, 1)", r);
    check(spec.cd > 0.0, "cd", "> 0", spec.cd);
    let h = spec.deploy_altitude;
    check(h >= 0.0, "deploy_altitude", ">= 0", h);
    if check_guideline && (0.0..1.0).contains(&r) {
        check(
            (r - GUIDELINE_SPILL_RATIO).abs() <= GUIDELINE_SPILL_TOLERANCE,
            "spill_ratio",
            "within 0.005 of 0.20 (spill-hole guideline)",
            r,
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descent::terminal_velocity;
    use approx::assert_relative_eq;

    fn canopy(d: f64, ratio: f64) -> ParachuteSpec {
        ParachuteSpec {
            name: "test".into(),
            canopy_diameter: d,
            spill_ratio: ratio,
            cd: DEFAULT_CANOPY_CD,
            deploy_altitude: 500.0,
            material: "nylon".into(),
        }
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn area_examples() {
        assert_relative_eq!(canopy(1.0, 0.0).effective_area(), 0.785398, epsilon = 1e-6);
        assert_relative_eq!(canopy(1.0, 0.2).effective_area(), 0.753982, epsilon = 1e-6);
        assert_relative_eq!(canopy(0.30, 0.2).effective_area(), 0.067859, epsilon = 1e-6);
        assert_relative_eq!(canopy(0.30, 0.0).effective_area(), 0.070686, epsilon = 1e-6);
    }

    #[test]
    fn sizing_examples() {
        let env = AirEnvironment::default();
        let slow = size_for_descent(0.7276, 3.0, 1.75, &env, 0.2).unwrap();
        assert_relative_eq!(slow.effective_area(), 0.73990, epsilon = 1e-5);
        assert_relative_eq!(slow.canopy_diameter, 0.990620, epsilon = 1e-6);

        let fast = size_for_descent(0.7276, 11.0, 1.75, &env, 0.2).unwrap();
        assert_relative_eq!(fast.effective_area(), 0.0550341, epsilon = 1e-7);
        assert_relative_eq!(fast.canopy_diameter, 0.27017, epsilon = 1e-5);

        let v = terminal_velocity(0.7276 * env.g, slow.cd, env.rho, slow.effective_area()).unwrap();
        assert_relative_eq!(v, 3.0, max_relative = 1e-9);

        let tiny = size_for_descent(0.7276, 1e6, 1.75, &env, 0.2).unwrap();
        assert!(tiny.canopy_diameter < 1e-5);
    }

    #[test]
    fn sizing_rejects_zero_speed() {
        let env = AirEnvironment::default();
        assert!(size_for_descent(0.7276, 0.0, 1.75, &env, 0.2).is_err());
        assert!(size_for_descent(0.0, 3.0, 1.75, &env, 0.2).is_err());
        assert!(size_for_descent(0.7276, 3.0, 0.0, &env, 0.2).is_err());
    }

    #[test]
    fn guideline_spec_is_clean() {
        assert!(validate_spec(&canopy(0.3, 0.20), true).is_empty());
    }

    #[test]
    fn wide_spill_hole_breaks_guideline() {
        let v = validate_spec(&canopy(0.3, 0.5), true);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "spill_ratio");
        assert!(validate_spec(&canopy(0.3, 0.5), false).is_empty());
    }

    #[test]
    fn zero_cd_is_reported() {
        let mut spec = canopy(0.3, 0.2);
        spec.cd = 0.0;
        let v = validate_spec(&spec, true);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "cd");
        assert!(v[0].to_string().contains("> 0"));
    }
}
