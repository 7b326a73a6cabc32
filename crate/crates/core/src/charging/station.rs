use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::EventHandle;
use crate::fleet::VehicleId;
use crate::network::EdgeId;
use crate::time::SimTime;

/// A plug standard modeled as a constant charging power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlugType {
    pub name: String,
    pub power_w: f64,
}

impl PlugType {
    pub const SCHUKO_W: f64 = 2300.0;
    pub const IEC_TYPE2_W: f64 = 3600.0;

    pub fn schuko() -> Self {
        Self { name: "schuko".into(), power_w: Self::SCHUKO_W }
    }

    pub fn iec_type2() -> Self {
        Self { name: "iec_type2".into(), power_w: Self::IEC_TYPE2_W }
    }

    /// Built-in plug by name.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "schuko" => Some(Self::schuko()),
            "iec_type2" => Some(Self::iec_type2()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StationId(pub u32);

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotId(pub u32);

#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub id: SlotId,
    pub plug: String,
    pub power_w: f64,
}

/// What a vehicle asks of a station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeDemand {
    pub vehicle: VehicleId,
    /// Battery-side energy to add.
    pub deficit_wh: f64,
    pub capacity_wh: f64,
    pub vehicle_max_w: f64,
    pub efficiency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waiting {
    pub demand: ChargeDemand,
    pub enqueue_t: SimTime,
}

/// An active or finished charging session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Session {
    pub station: StationId,
    pub slot: SlotId,
    pub demand: ChargeDemand,
    pub enqueue_t: SimTime,
    pub grant_t: SimTime,
    pub complete_t: SimTime,
    /// Exact (unrounded) duration.
    pub duration_s: f64,
    /// Plug power after the vehicle cap.
    pub effective_power_w: f64,
    pub handle: Option<EventHandle>,
}

impl Session {
    /// Energy delivered into the battery.
    pub fn battery_energy_wh(&self) -> f64 {
        self.effective_power_w * self.duration_s * self.demand.efficiency / 3600.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChargingStation {
    pub id: StationId,
    pub name: String,
    pub location: EdgeId,
    pub slots: Vec<Slot>,
    pub max_simultaneous: usize,
    pub queue: VecDeque<Waiting>,
    /// Indexed by slot position.
    pub occupancy: Vec<Option<Session>>,
}

impl ChargingStation {
    pub fn new(id: StationId, name: impl Into<String>, location: EdgeId, slots: Vec<Slot>, max_simultaneous: usize) -> Self {
        let occupancy = vec![None; slots.len()];
        Self { id, name: name.into(), location, slots, max_simultaneous, queue: VecDeque::new(), occupancy }
    }

    pub fn occupied(&self) -> usize {
        self.occupancy.iter().filter(|o| o.is_some()).count()
    }

    /// Free slot with the highest power (lowest id on ties), if the simultaneity
    /// limit allows another session.
    pub fn best_free_slot(&self) -> Option<usize> {
        if self.occupied() >= self.max_simultaneous {
            return None;
        }
        let mut best: Option<usize> = None;
        for (i, slot) in self.slots.iter().enumerate() {
            if self.occupancy[i].is_some() {
                continue;
            }
            match best {
                Some(b) if self.slots[b].power_w > slot.power_w => {}
                Some(b) if self.slots[b].power_w == slot.power_w && self.slots[b].id <= slot.id => {}
                _ => best = Some(i),
            }
        }
        best
    }

    pub fn has_capacity(&self) -> bool {
        self.best_free_slot().is_some()
    }

    pub fn slot_index(&self, slot: SlotId) -> Option<usize> {
        self.slots.iter().position(|s| s.id == slot)
    }

    pub fn mean_slot_power(&self) -> f64 {
        self.slots.iter().map(|s| s.power_w).sum::<f64>() / self.slots.len() as f64
    }
}
