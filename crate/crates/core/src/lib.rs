//! Flight software, link and ground segment models for a can-sized
//! satellite dropped under a two-stage parachute.

// Negated comparisons are how validation rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod budgets;
pub mod config;
pub mod descent;
pub mod flight_record;
pub mod fsm;
pub mod ground_station;
pub mod mission;
pub mod parachute;
pub mod sensors;
pub mod telemetry;
