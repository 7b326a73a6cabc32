//! Trip generation and the vehicle lifecycle.

mod control;
mod demand;
mod lifecycle;
mod schedule;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::VehicleState;
use crate::network::{Coord, EdgeId, RoadNetwork, Route};
use crate::time::SimTime;

pub use control::{ControlCenter, Numerics, Policies, SimError, SimEvent};
pub use demand::{DemandProfile, DistanceBin, DwellDistribution, TripsPerDay};
pub use lifecycle::{IllegalTransition, Lifecycle, LifecycleInput};
pub use schedule::{demand_rng, generate_day_schedule, sample_trip};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TripId(pub u32);

impl fmt::Display for TripId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FleetError {
    #[error("invalid demand profile {field}: {reason}")]
    InvalidProfile { field: &'static str, reason: String },
    #[error("vehicle {vehicle}: {source}")]
    Transition {
        vehicle: VehicleId,
        #[source]
        source: IllegalTransition,
    },
    #[error("unknown vehicle {0}")]
    UnknownVehicle(VehicleId),
}

/// Home base of the fleet. Parked vehicles sit at the end of the depot edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Depot {
    pub edge: EdgeId,
    pub point: Coord,
}

impl Depot {
    pub fn new(net: &RoadNetwork, edge: EdgeId) -> Self {
        Self { edge, point: net.edge_end(edge) }
    }
}

/// A depot-based round trip: out, dwell, back.
#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    pub id: TripId,
    pub depart: SimTime,
    pub origin: EdgeId,
    pub sampled_airline_m: f64,
    /// Sampled point the destination edge was snapped from.
    pub target_point: Coord,
    pub destination: EdgeId,
    pub snap_distance_m: f64,
    pub outbound: Option<Route>,
    pub inbound: Option<Route>,
    pub dwell_s: f64,
    /// Why routing failed, for rejected trips.
    pub rejection: Option<String>,
}

impl Trip {
    pub fn is_rejected(&self) -> bool {
        self.rejection.is_some()
    }
}

/// One fleet vehicle and its bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetVehicle {
    pub id: VehicleId,
    pub state: VehicleState,
    pub lifecycle: Lifecycle,
    pub soc_start: f64,
    /// Battery-side energy received at charging stations.
    pub grid_charged_wh: f64,
    pub n_trips: u32,
    pub trip: Option<TripId>,
    /// Edge the vehicle is parked at or last drove.
    pub edge: EdgeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetState {
    pub vehicles: Vec<FleetVehicle>,
    pub depot: Depot,
}

/// Picks which idle vehicle serves a trip.
pub trait DispatchStrategy {
    fn choose(&self, idle: &[&FleetVehicle], feasible: &mut dyn FnMut(&FleetVehicle) -> bool) -> Option<VehicleId>;
}

/// Highest SOC first (lowest id on ties), provided it can make the round trip.
///
/// Vehicles share one parameter set, so if the fullest vehicle cannot make the
/// trip no emptier one can either.
#[derive(Debug, Clone, Copy, Default)]
pub struct HighestSoc;

impl DispatchStrategy for HighestSoc {
    fn choose(&self, idle: &[&FleetVehicle], feasible: &mut dyn FnMut(&FleetVehicle) -> bool) -> Option<VehicleId> {
        let best = idle.iter().copied().min_by(|a, b| b.state.soc.total_cmp(&a.state.soc).then(a.id.cmp(&b.id)))?;
        feasible(best).then_some(best.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispatchOutcome {
    Assigned(VehicleId),
    /// No idle vehicle could take the trip now.
    Delayed,
}

impl FleetState {
    pub fn new(depot: Depot, size: u32, initial_soc: f64) -> Self {
        let vehicles = (0..size)
            .map(|i| FleetVehicle {
                id: VehicleId(i),
                state: VehicleState::parked(initial_soc),
                lifecycle: Lifecycle::Idle,
                soc_start: initial_soc,
                grid_charged_wh: 0.0,
                n_trips: 0,
                trip: None,
                edge: depot.edge,
            })
            .collect();
        Self { vehicles, depot }
    }

    pub fn vehicle(&self, id: VehicleId) -> Result<&FleetVehicle, FleetError> {
        self.vehicles.get(id.0 as usize).ok_or(FleetError::UnknownVehicle(id))
    }

    pub fn vehicle_mut(&mut self, id: VehicleId) -> Result<&mut FleetVehicle, FleetError> {
        self.vehicles.get_mut(id.0 as usize).ok_or(FleetError::UnknownVehicle(id))
    }

    /// Moves a vehicle through the state machine. Returns `(from, to)`.
    pub fn transition(&mut self, id: VehicleId, input: LifecycleInput) -> Result<(Lifecycle, Lifecycle), FleetError> {
        let v = self.vehicle_mut(id)?;
        let from = v.lifecycle;
        let to = from.next(input).map_err(|source| FleetError::Transition { vehicle: id, source })?;
        v.lifecycle = to;
        Ok((from, to))
    }

    pub fn idle(&self) -> Vec<&FleetVehicle> {
        self.vehicles.iter().filter(|v| v.lifecycle == Lifecycle::Idle).collect()
    }

    /// Assigns a trip to an idle vehicle chosen by `strategy`; the vehicle
    /// becomes `EnRoute`.
    pub fn dispatch<S: DispatchStrategy + ?Sized>(
        &mut self,
        strategy: &S,
        trip: TripId,
        feasible: &mut dyn FnMut(&FleetVehicle) -> bool,
    ) -> Result<DispatchOutcome, FleetError> {
        let chosen = strategy.choose(&self.idle(), feasible);
        let Some(id) = chosen else { return Ok(DispatchOutcome::Delayed) };
        self.transition(id, LifecycleInput::Dispatched)?;
        let v = self.vehicle_mut(id)?;
        v.trip = Some(trip);
        v.n_trips += 1;
        Ok(DispatchOutcome::Assigned(id))
    }
}
