//! Mass, volume and power budgets for the can.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const REFERENCE_TOTAL_MASS_G: f64 = 727.6;
pub const REFERENCE_VOLUME_CM3: f64 = 3804.27;
pub const REQUIRED_ENDURANCE_MIN: f64 = 25.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BudgetError {
    #[error("component {name:?}: {message}")]
    Component { name: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rail {
    #[serde(rename = "3.3V")]
    V3_3,
    #[serde(rename = "5V")]
    V5,
    #[serde(rename = "12V")]
    V12,
    #[serde(rename = "NONE")]
    None,
}

impl Rail {
    pub fn volts(self) -> f64 {
        match self {
            Rail::V3_3 => 3.3,
            Rail::V5 => 5.0,
            Rail::V12 => 12.0,
            Rail::None => 0.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Rail::V3_3 => "3.3V",
            Rail::V5 => "5V",
            Rail::V12 => "12V",
            Rail::None => "NONE",
        }
    }
}

impl fmt::Display for Rail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Rail {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "3.3V" | "3V3" | "3.3" => Ok(Rail::V3_3),
            "5V" | "5" => Ok(Rail::V5),
            "12V" | "12" => Ok(Rail::V12),
            "NONE" | "-" => Ok(Rail::None),
            other => Err(format!("unknown rail {other:?} (expected 3.3V, 5V, 12V or NONE)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentEntry {
    pub name: String,
    /// g
    pub mass: f64,
    pub rail: Rail,
    /// mA, zero for unpowered parts.
    pub current_draw: f64,
}

impl ComponentEntry {
    pub fn new(name: &str, mass: f64, rail: Rail, current_draw: f64) -> Self {
        Self {
            name: name.to_string(),
            mass,
            rail,
            current_draw,
        }
    }

    pub fn validate(&self) -> Result<(), BudgetError> {
        let fail = |message: String| BudgetError::Component {
            name: self.name.clone(),
            message,
        };
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return Err(fail(format!("mass must be >= 0, got {}", self.mass)));
        }
        if !(self.current_draw >= 0.0 && self.current_draw.is_finite()) {
            return Err(fail(format!("current_draw must be >= 0, got {}", self.current_draw)));
        }
        Ok(())
    }
}

/// The flight build's parts list. Masses are the as-built roll-up; current
/// draws are datasheet-typical placeholders and meant to be overridden from
/// the mission config once measured.
pub fn reference_components() -> Vec<ComponentEntry> {
    use Rail::*;
    vec![
        ComponentEntry::new("Can Structure", 300.0, None, 0.0),
        ComponentEntry::new("Xbee S2C Pro", 15.0, V3_3, 60.0),
        ComponentEntry::new("MPU-6050", 5.0, V3_3, 4.0),
        ComponentEntry::new("MQ135", 10.0, V3_3, 150.0),
        ComponentEntry::new("BME180", 3.0, V3_3, 1.0),
        ComponentEntry::new("INA219", 6.0, V3_3, 1.0),
        ComponentEntry::new("SD card module", 15.0, V5, 30.0),
        ComponentEntry::new("Neo-6M", 10.0, V3_3, 45.0),
        ComponentEntry::new("Arduino Uno", 25.0, V5, 50.0),
        ComponentEntry::new("Servo Motors x2", 40.0, V3_3, 20.0),
        ComponentEntry::new("Buzzer", 5.3, V5, 30.0),
        ComponentEntry::new("Pla Sheet", 25.3, None, 0.0),
        ComponentEntry::new("Arduino nano", 15.0, V5, 20.0),
        ComponentEntry::new("BO motors x3", 100.0, V12, 450.0),
        ComponentEntry::new("Camera Module", 40.0, V5, 150.0),
        ComponentEntry::new("Voltage regulator module", 10.0, None, 0.0),
        ComponentEntry::new("Battery", 100.0, None, 0.0),
        ComponentEntry::new("Switch", 3.0, None, 0.0),
    ]
}

/// Sum of component masses, g.
///
/// Masses are accumulated as integer milligrams so the total is exact and
/// independent of ordering.
pub fn total_mass(components: &[ComponentEntry]) -> Result<f64, BudgetError> {
    let mut milligrams: i128 = 0;
    for c in components {
        if !(c.mass >= 0.0 && c.mass.is_finite()) {
            return Err(BudgetError::Component {
                name: c.name.clone(),
                message: format!("mass must be >= 0, got {}", c.mass),
            });
        }
        milligrams += (c.mass * 1000.0).round() as i128;
    }
    Ok(milligrams as f64 / 1000.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanGeometry {
    /// mm
    pub height: f64,
    /// mm
    pub diameter: f64,
    /// mm, reported only; the volume uses the outer envelope.
    pub wall_thickness: f64,
}

impl Default for CanGeometry {
    fn default() -> Self {
        Self {
            height: 310.0,
            diameter: 125.0,
            wall_thickness: 3.0,
        }
    }
}

impl CanGeometry {
    pub fn validate(&self) -> Result<(), BudgetError> {
        if !(self.height >= 0.0 && self.diameter > 0.0 && self.wall_thickness > 0.0) {
            return Err(BudgetError::Invalid(
                "can geometry dimensions must be positive".into(),
            ));
        }
        if self.wall_thickness >= self.diameter / 2.0 {
            return Err(BudgetError::Invalid(
                "wall_thickness must be less than half the diameter".into(),
            ));
        }
        Ok(())
    }
}

/// Outer envelope volume, cm³.
pub fn can_volume(geom: &CanGeometry) -> f64 {
    let radius_cm = geom.diameter / 20.0;
    let height_cm = geom.height / 10.0;
    PI * radius_cm * radius_cm * height_cm
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    /// mAh
    pub capacity: f64,
    /// V
    pub nominal_voltage: f64,
}

impl Default for Battery {
    fn default() -> Self {
        Self {
            capacity: 1090.0,
            nominal_voltage: 12.0,
        }
    }
}

impl Battery {
    pub fn validate(&self) -> Result<(), BudgetError> {
        if self.capacity > 0.0 && self.nominal_voltage > 0.0 {
            Ok(())
        } else {
            Err(BudgetError::Invalid(
                "battery capacity and nominal voltage must be positive".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endurance {
    Minutes(f64),
    /// Nothing draws from the pack.
    Unbounded,
}

impl Endurance {
    pub fn at_least(&self, minutes: f64) -> bool {
        match self {
            Endurance::Minutes(m) => *m >= minutes,
            Endurance::Unbounded => true,
        }
    }
}

impl fmt::Display for Endurance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endurance::Minutes(m) => write!(f, "{m:.1} min"),
            Endurance::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// Current drawn from the battery, mA. Regulated rails are referred back to
/// the pack voltage through the regulator efficiency; the 12 V rail is taken
/// straight off the pack.
pub fn battery_current(
    battery: &Battery,
    components: &[ComponentEntry],
    regulator_efficiency: f64,
) -> Result<f64, BudgetError> {
    battery.validate()?;
    if !(regulator_efficiency > 0.0 && regulator_efficiency <= 1.0) {
        return Err(BudgetError::Invalid(format!(
            "regulator_efficiency must be in (0, 1], got {regulator_efficiency}"
        )));
    }
    let mut total = 0.0;
    for c in components {
        c.validate()?;
        total += match c.rail {
            Rail::None => 0.0,
            Rail::V12 => c.current_draw,
            rail => rail.volts() * c.current_draw / (battery.nominal_voltage * regulator_efficiency),
        };
    }
    Ok(total)
}

pub fn endurance_minutes(
    battery: &Battery,
    components: &[ComponentEntry],
    regulator_efficiency: f64,
) -> Result<Endurance, BudgetError> {
    let current = battery_current(battery, components, regulator_efficiency)?;
    if current <= 0.0 {
        return Ok(Endurance::Unbounded);
    }
    Ok(Endurance::Minutes(battery.capacity / current * 60.0))
}

/// Expected rail per part family, matched on the normalised component name.
const RAIL_RULES: [(&str, Rail); 9] = [
    ("mq135", Rail::V3_3),
    ("mpu6050", Rail::V3_3),
    ("bme180", Rail::V3_3),
    ("servo", Rail::V3_3),
    ("neo6m", Rail::V3_3),
    ("xbee", Rail::V3_3),
    ("arduinouno", Rail::V5),
    ("arduinonano", Rail::V5),
    ("bomotor", Rail::V12),
];

fn normalise(name: &str) -> String {
    name.chars()
        .filter(char::is_ascii_alphanumeric)
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RailViolation {
    pub component: String,
    pub expected: Rail,
    pub actual: Rail,
}

impl fmt::Display for RailViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} is on the {} rail, expected {}",
            self.component, self.actual, self.expected
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RailReport {
    pub violations: Vec<RailViolation>,
    /// Components with no rail rule, checked by nobody.
    pub skipped: Vec<String>,
}

/// Check sensors and radio sit on 3.3 V, controllers on 5 V and the
/// stabiliser motors directly on the 12 V pack.
pub fn validate_rails(components: &[ComponentEntry]) -> RailReport {
    let mut report = RailReport::default();
    for c in components {
        let key = normalise(&c.name);
        match RAIL_RULES.iter().find(|(pattern, _)| key.contains(pattern)) {
            Some(&(_, expected)) if expected != c.rail => report.violations.push(RailViolation {
                component: c.name.clone(),
                expected,
                actual: c.rail,
            }),
            Some(_) => {}
            None => report.skipped.push(c.name.clone()),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_mass_rollup() {
        let parts = reference_components();
        assert_eq!(parts.len(), 18);
        assert_eq!(total_mass(&parts).unwrap(), 727.6);
        assert_eq!(total_mass(&[]).unwrap(), 0.0);
        let without_battery: Vec<_> = parts.into_iter().filter(|c| c.name != "Battery").collect();
        assert_eq!(total_mass(&without_battery).unwrap(), 627.6);
    }

    #[test]
    fn negative_mass_rejected() {
        let parts = [ComponentEntry::new("ghost", -1.0, Rail::None, 0.0)];
        assert!(total_mass(&parts).is_err());
    }

    #[test]
    fn volume_examples() {
        let v = can_volume(&CanGeometry::default());
        assert!((v - 3804.27).abs() < 0.01, "{v}");
        let flat = CanGeometry {
            height: 0.0,
            ..CanGeometry::default()
        };
        assert_eq!(can_volume(&flat), 0.0);
        let wide = CanGeometry {
            diameter: 250.0,
            ..CanGeometry::default()
        };
        assert!((can_volume(&wide) - 4.0 * v).abs() < 1e-9);
    }

    #[test]
    fn endurance_examples() {
        let battery = Battery::default();
        let load = [ComponentEntry::new("motor", 0.0, Rail::V12, 500.0)];
        match endurance_minutes(&battery, &load, 1.0).unwrap() {
            Endurance::Minutes(m) => assert!((m - 130.8).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        assert_eq!(endurance_minutes(&battery, &[], 0.85).unwrap(), Endurance::Unbounded);
        let reference = endurance_minutes(&battery, &reference_components(), 0.85).unwrap();
        assert!(reference.at_least(REQUIRED_ENDURANCE_MIN), "{reference}");
    }

    #[test]
    fn regulated_rail_referred_to_pack() {
        let battery = Battery::default();
        let load = [ComponentEntry::new("mcu", 0.0, Rail::V5, 120.0)];
        let i = battery_current(&battery, &load, 0.5).unwrap();
        assert!((i - 100.0).abs() < 1e-12);
        assert!(battery_current(&battery, &load, 0.0).is_err());
        assert!(battery_current(&battery, &load, 1.5).is_err());
    }

    #[test]
    fn reference_rails_are_clean() {
        let report = validate_rails(&reference_components());
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        assert!(report.skipped.contains(&"Camera Module".to_string()));
    }

    #[test]
    fn motor_on_wrong_rail() {
        let mut parts = reference_components();
        parts.iter_mut().find(|c| c.name.starts_with("BO")).unwrap().rail = Rail::V3_3;
        let report = validate_rails(&parts);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].expected, Rail::V12);
    }

    #[test]
    fn unknown_part_skipped() {
        let report = validate_rails(&[ComponentEntry::new("Flux capacitor", 1.0, Rail::V5, 1.0)]);
        assert!(report.violations.is_empty());
        assert_eq!(report.skipped, vec!["Flux capacitor".to_string()]);
    }

    #[test]
    fn rail_parsing() {
        assert_eq!("3.3v".parse::<Rail>().unwrap(), Rail::V3_3);
        assert_eq!("NONE".parse::<Rail>().unwrap(), Rail::None);
        assert!("24V".parse::<Rail>().is_err());
    }
}
