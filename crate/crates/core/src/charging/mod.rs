//! Charging infrastructure: stations on edges, per-slot plug powers, a
//! simultaneity limit and FIFO queues managed centrally.

mod manager;
mod station;

use thiserror::Error;

use crate::fleet::VehicleId;

pub use manager::{charge_duration, ChargeGrant, ChargingManager, DivertPolicy, Promotion, QueueEstimate, Reach, StationChoice};
pub use station::{ChargeDemand, ChargingStation, PlugType, Session, Slot, SlotId, StationId, Waiting};

#[derive(Debug, Error, PartialEq)]
pub enum ChargingError {
    #[error("unknown station {0}")]
    UnknownStation(StationId),
    #[error("station {station} has no slot {}", slot.0)]
    UnknownSlot { station: StationId, slot: SlotId },
    #[error("vehicle {vehicle} is already charging or queued at station {station}")]
    AlreadyPresent { vehicle: VehicleId, station: StationId },
    #[error("slot {} at station {station} is not occupied", slot.0)]
    SlotFree { station: StationId, slot: SlotId },
}
