//! Deterministic co-simulation of cooperative adaptive cruise control
//! platoons and a V2V collision-warning assistant.
//!
//! One simulation loop owns three logical parts: the vehicle world
//! ([`vehicle`]), the message network ([`network`]) and the controllers
//! ([`cacc`], [`das`], scripted behaviors in [`scenario`]). [`sim`] wires them
//! together and [`stats`] / [`experiments`] analyse the resulting logs.

pub mod cacc;
pub mod das;
pub mod experiments;
pub mod logio;
pub mod network;
pub mod scenario;
pub mod sim;
pub mod stats;
pub mod vehicle;

pub use cacc::{CaccParams, GapMeasurement};
pub use das::{DasParams, WarningEvent};
pub use network::{KinematicMessage, NetworkModel};
pub use scenario::Scenario;
pub use sim::{run, SimError, SimLog};
pub use vehicle::{ActuatorLimits, VehicleId, VehicleState};
