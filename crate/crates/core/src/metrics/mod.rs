//! Per-tick records, trip and session logs, and the analyses built on them.

mod analysis;
mod export;

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::EnergyTotals;
use crate::fleet::{Lifecycle, TripId, VehicleId};
use crate::time::SimTime;

pub use analysis::{
    distance_histogram, power_flow_summary, state_durations, unused_vehicles_series, DistanceHistogram, Period, PowerFlowSummary,
    StateDurations, UsageClass, UtilizationRow, UtilizationSeries,
};
pub use export::{FileEntry, Manifest, ManifestInfo};

pub const TICK_HEADER: [&str; 10] =
    ["time_s", "vehicle_id", "state", "v_mps", "a_mps2", "soc", "p_traction_w", "p_battery_w", "p_recup_w", "p_re_w"];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("metrics I/O: {0}")]
    Io(#[from] io::Error),
    #[error("metrics CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("non-finite {field} for vehicle {vehicle} at t={at}")]
    NonFinite { field: &'static str, vehicle: VehicleId, at: SimTime },
    #[error("unknown vehicle {0}")]
    UnknownVehicle(VehicleId),
}

/// One vehicle sample at a metrics tick. Powers are in watts; battery power is
/// positive when discharging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub t: SimTime,
    pub vehicle: VehicleId,
    pub state: Lifecycle,
    pub v_mps: f64,
    pub a_mps2: f64,
    pub soc: f64,
    pub p_traction_w: f64,
    pub p_battery_w: f64,
    pub p_recup_w: f64,
    pub p_re_w: f64,
}

#[derive(Serialize)]
struct TickRow {
    time_s: f64,
    vehicle_id: u32,
    state: &'static str,
    v_mps: f64,
    a_mps2: f64,
    soc: f64,
    p_traction_w: f64,
    p_battery_w: f64,
    p_recup_w: f64,
    p_re_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TripStatus {
    /// Back at the depot.
    Completed,
    /// Dispatched but not back when the run ended.
    InProgress,
    Stranded,
    /// Never dispatched before the run ended.
    Pending,
    /// No route to or from the destination.
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripRecord {
    pub trip_id: u32,
    pub vehicle_id: Option<u32>,
    pub depart_t: f64,
    pub airline_m: f64,
    pub driven_out_m: Option<f64>,
    pub driven_return_m: Option<f64>,
    pub dwell_s: f64,
    pub delay_s: Option<f64>,
    pub status: TripStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionRecord {
    pub station_id: String,
    pub slot_id: u32,
    pub vehicle_id: u32,
    pub enqueue_t: f64,
    pub grant_t: f64,
    pub complete_t: f64,
    pub energy_wh: f64,
    #[serde(skip)]
    pub duration_s: f64,
    #[serde(skip)]
    pub effective_power_w: f64,
    /// The vehicle limit, not the slot, set the power.
    #[serde(skip)]
    pub vehicle_capped: bool,
}

impl SessionRecord {
    pub fn wait_s(&self) -> f64 {
        self.grant_t - self.enqueue_t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub t: SimTime,
    pub vehicle: VehicleId,
    pub from: Lifecycle,
    pub to: Lifecycle,
}

/// End-of-run energy and usage for one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleRecord {
    pub vehicle: VehicleId,
    pub energy: EnergyTotals,
    pub grid_charged_wh: f64,
    pub soc_start: f64,
    pub soc_end: f64,
    pub capacity_wh: f64,
    pub n_trips: u32,
}

impl VehicleRecord {
    /// `capacity * (soc_end - soc_start)` minus the sum of the signed flows, in Wh.
    pub fn ledger_residual_wh(&self) -> f64 {
        let stored = self.capacity_wh * (self.soc_end - self.soc_start);
        let flows = self.grid_charged_wh + self.energy.recuperated_wh + self.energy.range_extended_wh - self.energy.consumed_wh;
        stored - flows
    }
}

/// Collects everything the exporters need. Ticks stream straight to their
/// sink; the remaining logs are small and stay in memory.
pub struct MetricsCollector {
    fleet_size: u32,
    ticks: csv::Writer<Box<dyn Write>>,
    tick_rows: u64,
    pub trips: Vec<TripRecord>,
    pub sessions: Vec<SessionRecord>,
    pub transitions: Vec<Transition>,
    pub vehicles: Vec<VehicleRecord>,
    pub end: SimTime,
}

impl MetricsCollector {
    /// `buffer_bytes` bounds the in-memory tick buffer before it is flushed.
    pub fn new(fleet_size: u32, tick_sink: Box<dyn Write>, buffer_bytes: usize) -> Result<Self, MetricsError> {
        let mut ticks = csv::WriterBuilder::new().has_headers(false).buffer_capacity(buffer_bytes.max(1)).from_writer(tick_sink);
        ticks.write_record(TICK_HEADER)?;
        Ok(Self {
            fleet_size,
            ticks,
            tick_rows: 0,
            trips: Vec::new(),
            sessions: Vec::new(),
            transitions: Vec::new(),
            vehicles: Vec::new(),
            end: SimTime::ZERO,
        })
    }

    /// Collector whose ticks are counted but discarded.
    pub fn discarding(fleet_size: u32) -> Self {
        Self::new(fleet_size, Box::new(io::sink()), 8 * 1024).expect("sink never fails")
    }

    pub fn fleet_size(&self) -> u32 {
        self.fleet_size
    }

    pub fn tick_rows(&self) -> u64 {
        self.tick_rows
    }

    pub fn record_tick(&mut self, r: TickRecord) -> Result<(), MetricsError> {
        let fields = [
            ("v", r.v_mps),
            ("a", r.a_mps2),
            ("soc", r.soc),
            ("p_traction", r.p_traction_w),
            ("p_battery", r.p_battery_w),
            ("p_recup", r.p_recup_w),
            ("p_re", r.p_re_w),
        ];
        if let Some((field, _)) = fields.iter().find(|(_, x)| !x.is_finite()) {
            return Err(MetricsError::NonFinite { field, vehicle: r.vehicle, at: r.t });
        }
        self.ticks.serialize(TickRow {
            time_s: r.t.as_secs_f64(),
            vehicle_id: r.vehicle.0,
            state: r.state.as_str(),
            v_mps: r.v_mps,
            a_mps2: r.a_mps2,
            soc: r.soc,
            p_traction_w: r.p_traction_w,
            p_battery_w: r.p_battery_w,
            p_recup_w: r.p_recup_w,
            p_re_w: r.p_re_w,
        })?;
        self.tick_rows += 1;
        Ok(())
    }

    pub fn flush_ticks(&mut self) -> Result<(), MetricsError> {
        self.ticks.flush()?;
        Ok(())
    }

    pub fn record_transition(&mut self, t: SimTime, vehicle: VehicleId, from: Lifecycle, to: Lifecycle) {
        if from != to {
            self.transitions.push(Transition { t, vehicle, from, to });
        }
    }

    pub fn trip_mut(&mut self, id: TripId) -> Option<&mut TripRecord> {
        self.trips.get_mut(id.0 as usize)
    }

    pub fn vehicle(&self, id: VehicleId) -> Result<&VehicleRecord, MetricsError> {
        self.vehicles.get(id.0 as usize).ok_or(MetricsError::UnknownVehicle(id))
    }

    /// Trips that found routes.
    pub fn accepted_trips(&self) -> impl Iterator<Item = &TripRecord> {
        self.trips.iter().filter(|t| t.status != TripStatus::Rejected)
    }
}
