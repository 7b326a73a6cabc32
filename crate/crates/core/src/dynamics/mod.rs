//! Battery model: power flows from kinematics, recuperation, range extender
//! and SOC integration, plus the drive-profile integrator.

mod drive;
mod params;
mod power;
mod trace;

use thiserror::Error;

use crate::network::EdgeId;

pub use drive::{
    drive_segment, simulate_leg, DriveTrace, EnergyTotals, LegOutcome, LegPlan, Segment, SegmentOutcome, SpeedProfile, TraceSample,
    VehicleState,
};
pub use params::{Environment, RangeExtenderParams, VehicleParams};
pub use power::{
    battery_flow, battery_power, integrate_soc, range_extender_flag, range_extender_step, traction_power, BatteryFlow, RangeExtenderOutput,
    J_PER_KWH,
};
pub use trace::{write_drive_traces, DRIVE_TRACE_HEADER};

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("invalid vehicle parameter {field}: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("integration step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("infeasible drive on edge {edge}: {reason}")]
    Infeasible { edge: EdgeId, reason: String },
}
