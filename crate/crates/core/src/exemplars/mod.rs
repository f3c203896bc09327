//! Desk-scale reference simulators for two vehicle studies.
//!
//! * [`fev`]: drivetrain layout of a full electric vehicle, trading
//!   acceleration time against cycle energy across two topologies.
//! * [`yaw`]: stability gain of active yaw control for 2WD and 4WD.
//!
//! The physics are deliberately small and every constant lives in one
//! `*Constants` struct. Both simulators are pure and thread-safe, and both
//! ship as line-protocol executables (`hse-fev-sim`, `hse-yaw-sim`).

pub mod fev;
pub mod yaw;

pub use fev::{fev_space, FevSimulator};
pub use yaw::{yaw_space, YawSimulator};

use crate::hyperspace::HyperSpace;
use crate::runner::Simulator;

/// Builtin simulators by name: `fev` or `yaw`.
pub fn builtin(name: &str) -> Option<(HyperSpace, Box<dyn Simulator>)> {
    match name {
        "fev" => Some((fev_space(), Box::new(FevSimulator::default()))),
        "yaw" => Some((yaw_space(), Box::new(YawSimulator::default()))),
        _ => None,
    }
}

#[cfg(test)]
mod tests;
