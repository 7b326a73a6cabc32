//! The control center: spawns trips, dispatches vehicles and walks each one
//! through driving, dwelling and charging on the event loop.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DispatchOutcome, DispatchStrategy, FleetError, FleetState, FleetVehicle, Lifecycle, LifecycleInput, Trip, TripId, VehicleId};
use crate::charging::{ChargeDemand, ChargeGrant, ChargingError, ChargingManager, Reach, SlotId, StationChoice, StationId};
use crate::dynamics::{drive_segment, simulate_leg, DriveTrace, DynamicsError, Environment, LegPlan, VehicleParams, VehicleState};
use crate::engine::{Disposition, EngineError, EventPayload, Fired, Handler, Scheduler};
use crate::metrics::{MetricsCollector, MetricsError, SessionRecord, TickRecord, TripRecord, TripStatus, VehicleRecord};
use crate::network::{EdgeId, NetworkError, RoadNetwork, RouteWeight, TravelCost};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub enum SimEvent {
    VehicleSpawn { trip: TripId },
    SegmentComplete { vehicle: VehicleId, edge: EdgeId },
    ArriveDestination { vehicle: VehicleId, edge: EdgeId },
    DwellComplete { vehicle: VehicleId },
    ChargeRequest { vehicle: VehicleId, station: StationId },
    SlotGranted { vehicle: VehicleId, station: StationId, slot: SlotId },
    ChargeComplete { vehicle: VehicleId, station: StationId, slot: SlotId },
    RangeExtenderToggle { vehicle: VehicleId, on: bool },
    Stranded { vehicle: VehicleId, edge: EdgeId },
    MetricsTick,
    SimulationEnd,
}

impl SimEvent {
    fn vehicle(&self) -> Option<VehicleId> {
        use SimEvent::*;
        match self {
            SegmentComplete { vehicle, .. }
            | ArriveDestination { vehicle, .. }
            | DwellComplete { vehicle }
            | ChargeRequest { vehicle, .. }
            | SlotGranted { vehicle, .. }
            | ChargeComplete { vehicle, .. }
            | RangeExtenderToggle { vehicle, .. }
            | Stranded { vehicle, .. } => Some(*vehicle),
            VehicleSpawn { .. } | MetricsTick | SimulationEnd => None,
        }
    }
}

impl EventPayload for SimEvent {
    fn kind(&self) -> &'static str {
        use SimEvent::*;
        match self {
            VehicleSpawn { .. } => "VehicleSpawn",
            SegmentComplete { .. } => "SegmentComplete",
            ArriveDestination { .. } => "ArriveDestination",
            DwellComplete { .. } => "DwellComplete",
            ChargeRequest { .. } => "ChargeRequest",
            SlotGranted { .. } => "SlotGranted",
            ChargeComplete { .. } => "ChargeComplete",
            RangeExtenderToggle { .. } => "RangeExtenderToggle",
            Stranded { .. } => "Stranded",
            MetricsTick => "MetricsTick",
            SimulationEnd => "SimulationEnd",
        }
    }

    fn payload_ids(&self) -> String {
        use SimEvent::*;
        match self {
            VehicleSpawn { trip } => format!("trip={trip}"),
            SegmentComplete { vehicle, edge } | ArriveDestination { vehicle, edge } | Stranded { vehicle, edge } => {
                format!("vehicle={vehicle};edge={}", edge.0)
            }
            DwellComplete { vehicle } => format!("vehicle={vehicle}"),
            ChargeRequest { vehicle, station } => format!("vehicle={vehicle};station={station}"),
            SlotGranted { vehicle, station, slot } | ChargeComplete { vehicle, station, slot } => {
                format!("vehicle={vehicle};station={station};slot={}", slot.0)
            }
            RangeExtenderToggle { vehicle, on } => format!("vehicle={vehicle};on={on}"),
            MetricsTick | SimulationEnd => String::new(),
        }
    }
}

/// Operating rules of the control center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Policies {
    pub routing_weight: RouteWeight,
    /// SOC that must remain after the estimated round trip.
    pub dispatch_reserve_soc: f64,
    /// Vehicles back at the depot below this SOC request charging.
    pub depot_charge_threshold: f64,
    pub target_soc: f64,
}

impl Default for Policies {
    fn default() -> Self {
        Self { routing_weight: RouteWeight::TravelTime, dispatch_reserve_soc: 0.10, depot_charge_threshold: 0.95, target_soc: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub dynamics_dt_s: f64,
    /// Interval between tick records; zero disables ticks.
    pub metrics_tick_s: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self { dynamics_dt_s: 1.0, metrics_tick_s: 10.0 }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{source}; vehicle state: {dump}")]
    Transition {
        #[source]
        source: FleetError,
        dump: String,
    },
    #[error(transparent)]
    Fleet(#[from] FleetError),
    #[error(transparent)]
    Charging(#[from] ChargingError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("event log: {0}")]
    Io(#[from] std::io::Error),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LegKind {
    Outbound,
    Return,
    ToStation(StationId),
}

struct PendingSegment {
    start: SimTime,
    state: VehicleState,
    trace: DriveTrace,
}

struct ActiveLeg {
    kind: LegKind,
    plan: LegPlan,
    next: usize,
    pending: Option<PendingSegment>,
}

#[derive(Debug, Clone, Copy)]
struct ChargingNow {
    grant_t: SimTime,
    soc_at_grant: f64,
    battery_w: f64,
}

/// Everything the event handlers mutate.
pub struct ControlCenter<'a> {
    net: &'a RoadNetwork,
    params: VehicleParams,
    /// Same vehicle without a range extender, for energy estimates.
    dry_params: VehicleParams,
    env: Environment,
    policies: Policies,
    numerics: Numerics,
    horizon: SimTime,
    pub fleet: FleetState,
    trips: Vec<Trip>,
    waiting_trips: VecDeque<TripId>,
    pub chargers: ChargingManager,
    depot_stations: Vec<StationId>,
    strategy: Box<dyn DispatchStrategy + Send>,
    legs: Vec<Option<ActiveLeg>>,
    charging: Vec<Option<ChargingNow>>,
    diverted: Vec<bool>,
    pub metrics: MetricsCollector,
    check_invariants: bool,
}

impl<'a> ControlCenter<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        net: &'a RoadNetwork,
        params: VehicleParams,
        env: Environment,
        policies: Policies,
        numerics: Numerics,
        horizon: SimTime,
        fleet: FleetState,
        trips: Vec<Trip>,
        chargers: ChargingManager,
        strategy: Box<dyn DispatchStrategy + Send>,
        mut metrics: MetricsCollector,
    ) -> Self {
        let n = fleet.vehicles.len();
        let depot_stations = chargers.stations().iter().filter(|s| s.location == fleet.depot.edge).map(|s| s.id).collect();
        metrics.trips = trips.iter().map(|t| trip_record(net, t)).collect();
        let dry_params = VehicleParams { range_extender: None, ..params.clone() };
        Self {
            net,
            params,
            dry_params,
            env,
            policies,
            numerics,
            horizon,
            fleet,
            trips,
            waiting_trips: VecDeque::new(),
            chargers,
            depot_stations,
            strategy,
            legs: (0..n).map(|_| None).collect(),
            charging: vec![None; n],
            diverted: vec![false; n],
            metrics,
            check_invariants: cfg!(debug_assertions),
        }
    }

    /// Enables or disables the per-event charging invariant scan.
    pub fn with_invariant_checks(mut self, on: bool) -> Self {
        self.check_invariants = on;
        self
    }

    /// Schedules trip spawns, the first metrics tick and the end marker.
    pub fn prime(&self, sched: &mut Scheduler<SimEvent>) -> Result<(), SimError> {
        if self.numerics.metrics_tick_s > 0.0 {
            sched.schedule(SimEvent::MetricsTick, sched.now())?;
        }
        for trip in self.trips.iter().filter(|t| !t.is_rejected()) {
            sched.schedule(SimEvent::VehicleSpawn { trip: trip.id }, trip.depart)?;
        }
        sched.schedule(SimEvent::SimulationEnd, self.horizon)?;
        Ok(())
    }

    pub fn trips(&self) -> &[Trip] {
        &self.trips
    }

    /// Closes the books: per-vehicle energy records and the end time.
    pub fn finish(mut self, end: SimTime) -> MetricsCollector {
        self.metrics.vehicles = self
            .fleet
            .vehicles
            .iter()
            .map(|v| VehicleRecord {
                vehicle: v.id,
                energy: v.state.cumulative,
                grid_charged_wh: v.grid_charged_wh,
                soc_start: v.soc_start,
                soc_end: v.state.soc,
                capacity_wh: self.params.battery_capacity_wh,
                n_trips: v.n_trips,
            })
            .collect();
        self.metrics.end = end;
        self.metrics
    }

    fn transition(&mut self, at: SimTime, id: VehicleId, input: LifecycleInput) -> Result<(), SimError> {
        match self.fleet.transition(id, input) {
            Ok((from, to)) => {
                self.metrics.record_transition(at, id, from, to);
                Ok(())
            }
            Err(source) => {
                let dump = format!("{:?}", self.fleet.vehicle(id)?);
                Err(SimError::Transition { source, dump })
            }
        }
    }

    fn vehicle(&self, id: VehicleId) -> &FleetVehicle {
        &self.fleet.vehicles[id.0 as usize]
    }

    fn vehicle_mut(&mut self, id: VehicleId) -> &mut FleetVehicle {
        &mut self.fleet.vehicles[id.0 as usize]
    }

    fn cost(&self, at: SimTime) -> TravelCost {
        TravelCost { weight: self.policies.routing_weight, hour: at.hour_of_day() }
    }

    fn start_leg(&mut self, sched: &mut Scheduler<SimEvent>, id: VehicleId, kind: LegKind, edges: &[EdgeId]) -> Result<(), SimError> {
        let plan = LegPlan::new(self.net, edges, sched.now().hour_of_day(), &self.params);
        self.legs[id.0 as usize] = Some(ActiveLeg { kind, plan, next: 0, pending: None });
        if edges.is_empty() {
            let edge = self.vehicle(id).edge;
            sched.schedule_now(SimEvent::ArriveDestination { vehicle: id, edge });
            return Ok(());
        }
        self.drive_next(sched, id)
    }

    /// Integrates the next edge of the active leg and schedules its end.
    /// The resulting state is committed when the segment completes.
    fn drive_next(&mut self, sched: &mut Scheduler<SimEvent>, id: VehicleId) -> Result<(), SimError> {
        let now = sched.now();
        let mut state = self.vehicle(id).state.clone();
        let leg = self.legs[id.0 as usize].as_mut().expect("driving vehicle has a leg");
        let (seg, v_in, v_out) = leg.plan.segments[leg.next];
        leg.next += 1;
        let was_on = state.range_extender_on;
        let out = drive_segment(&mut state, &seg, v_in, v_out, &self.params, &self.env, self.numerics.dynamics_dt_s)?;
        let mut on = was_on;
        for s in &out.trace.samples {
            if s.re_on != on {
                on = s.re_on;
                sched.schedule(SimEvent::RangeExtenderToggle { vehicle: id, on }, now.offset_secs(s.t_s))?;
            }
        }
        let end = now.offset_secs(out.duration_s);
        let event = if out.stranded {
            SimEvent::Stranded { vehicle: id, edge: seg.edge }
        } else {
            SimEvent::SegmentComplete { vehicle: id, edge: seg.edge }
        };
        sched.schedule(event, end)?;
        leg.pending = Some(PendingSegment { start: now, state, trace: out.trace });
        Ok(())
    }

    fn commit_segment(&mut self, id: VehicleId, edge: EdgeId) {
        let i = id.0 as usize;
        let pending = self.legs[i].as_mut().and_then(|l| l.pending.take()).expect("segment in flight");
        let v = &mut self.fleet.vehicles[i];
        v.state = pending.state;
        v.edge = edge;
    }

    fn on_segment_complete(&mut self, sched: &mut Scheduler<SimEvent>, id: VehicleId, edge: EdgeId) -> Result<(), SimError> {
        self.commit_segment(id, edge);
        let leg = self.legs[id.0 as usize].as_ref().expect("driving vehicle has a leg");
        if leg.next < leg.plan.segments.len() {
            return self.drive_next(sched, id);
        }
        let v = self.vehicle_mut(id);
        v.state.velocity = 0.0;
        if std::mem::take(&mut v.state.range_extender_on) {
            sched.schedule_now(SimEvent::RangeExtenderToggle { vehicle: id, on: false });
        }
        sched.schedule_now(SimEvent::ArriveDestination { vehicle: id, edge });
        Ok(())
    }

    fn on_arrive(&mut self, sched: &mut Scheduler<SimEvent>, id: VehicleId) -> Result<(), SimError> {
        let now = sched.now();
        let leg = self.legs[id.0 as usize].take().expect("arriving vehicle has a leg");
        match leg.kind {
            LegKind::Outbound => {
                self.transition(now, id, LifecycleInput::ArriveDestination)?;
                let trip = self.vehicle(id).trip.expect("outbound vehicle has a trip");
                let dwell = self.trips[trip.0 as usize].dwell_s;
                sched.schedule(SimEvent::DwellComplete { vehicle: id }, now.offset_secs(dwell))?;
            }
            LegKind::Return => self.arrive_depot(sched, id)?,
            LegKind::ToStation(station) => {
                self.transition(now, id, LifecycleInput::ArriveStation)?;
                sched.schedule_now(SimEvent::ChargeRequest { vehicle: id, station });
            }
        }
        Ok(())
    }

    fn arrive_depot(&mut self, sched: &mut Scheduler<SimEvent>, id: VehicleId) -> Result<(), SimError> {
        let now = sched.now();
        if let Some(trip) = self.vehicle_mut(id).trip.take() {
            if let Some(rec) = self.metrics.trip_mut(trip) {
                rec.status = TripStatus::Completed;
            }
        }
        let soc = self.vehicle(id).state.soc;
        let needs_charge = soc < self.policies.depot_charge_threshold && !self.depot_stations.is_empty();
        self.transition(now, id, LifecycleInput::ArriveDepot { needs_charge })?;
        if needs_charge {
            let station = self
                .depot_stations
                .iter()
                .copied()
                .find(|s| self.chargers.stations()[s.0 as usize].has_capacity())
                .unwrap_or(self.depot_stations[0]);
            sched.schedule_now(SimEvent::ChargeRequest { vehicle: id, station });
        } else {
            self.try_dispatch(sched)?;
        }
        Ok(())
    }

    fn on_charge_request(&mut self, sched: &mut Scheduler<SimEvent>, id: VehicleId, station: StationId) -> Result<(), SimError> {
        let now = sched.now();
        let soc = self.vehicle(id).state.soc;
        let capacity = self.params.battery_capacity_wh;
        let deficit_wh = (self.policies.target_soc - soc) * capacity;
        if deficit_wh <= 0.0 {
            return self.leave_station(sched, id, station);
        }
        let st = self.chargers.station(station)?;
        if !st.has_capacity() && !self.diverted[id.0 as usize] {
            let state = self.vehicle(id).state.clone();
            let here = self.vehicle(id).edge;
            let (net, dry, env, dt) = (self.net, &self.dry_params, &self.env, self.numerics.dynamics_dt_s);
            let cost = self.cost(now);
            let mut failure = None;
            let choice = self.chargers.select_station(soc, capacity, station, now, |alt| {
                let route = net.shortest_path(here, alt.location, cost).ok()?;
                let plan = LegPlan::new(net, route.driven_edges(), now.hour_of_day(), dry);
                let mut probe = state.clone();
                match simulate_leg(&mut probe, &plan, dry, env, dt) {
                    Ok(out) if !out.stranded => {
                        Some(Reach { route, travel_time_s: out.duration_s, energy_wh: out.energy.net_battery_wh() })
                    }
                    Ok(_) => None,
                    Err(e) => {
                        failure = Some(e);
                        None
                    }
                }
            });
            if let Some(e) = failure {
                return Err(e.into());
            }
            if let StationChoice::DivertTo { station: target, route, .. } = choice {
                log::debug!("vehicle {id} diverts from station {station} to {target} at t={now}");
                self.diverted[id.0 as usize] = true;
                return self.start_leg(sched, id, LegKind::ToStation(target), route.driven_edges());
            }
        }
        let demand = ChargeDemand {
            vehicle: id,
            deficit_wh,
            capacity_wh: capacity,
            vehicle_max_w: self.params.max_charging_power_w,
            efficiency: self.params.charging_efficiency,
        };
        match self.chargers.request_charge(station, demand, now)? {
            ChargeGrant::Granted { slot, completion } => self.schedule_session(sched, id, station, slot, completion)?,
            ChargeGrant::Queued { position } => {
                log::debug!("vehicle {id} queued at station {station}, position {position}");
                self.transition(now, id, LifecycleInput::Queued)?;
            }
        }
        Ok(())
    }

    fn schedule_session(
        &mut self,
        sched: &mut Scheduler<SimEvent>,
        id: VehicleId,
        station: StationId,
        slot: SlotId,
        completion: SimTime,
    ) -> Result<(), SimError> {
        sched.schedule_now(SimEvent::SlotGranted { vehicle: id, station, slot });
        let handle = sched.schedule(SimEvent::ChargeComplete { vehicle: id, station, slot }, completion)?;
        self.chargers.attach_handle(station, slot, handle)?;
        Ok(())
    }

    fn on_slot_granted(&mut self, at: SimTime, id: VehicleId, station: StationId, slot: SlotId) -> Result<(), SimError> {
        self.transition(at, id, LifecycleInput::SlotGranted)?;
        let session = self.chargers.session(station, slot).ok_or(ChargingError::SlotFree { station, slot })?;
        self.charging[id.0 as usize] = Some(ChargingNow {
            grant_t: session.grant_t,
            soc_at_grant: self.vehicle(id).state.soc,
            battery_w: session.effective_power_w * session.demand.efficiency,
        });
        Ok(())
    }

    fn on_charge_complete(
        &mut self,
        sched: &mut Scheduler<SimEvent>,
        id: VehicleId,
        station: StationId,
        slot: SlotId,
    ) -> Result<(), SimError> {
        let now = sched.now();
        let (session, promotion) = self.chargers.release_slot(station, slot, now)?;
        let energy_wh = session.battery_energy_wh();
        let capacity = self.params.battery_capacity_wh;
        let v = self.vehicle_mut(id);
        v.state.soc += energy_wh / capacity;
        v.grid_charged_wh += energy_wh;
        self.charging[id.0 as usize] = None;
        self.diverted[id.0 as usize] = false;
        let st = self.chargers.station(station)?;
        let slot_power = st.slots[st.slot_index(slot).expect("released slot exists")].power_w;
        let (name, location) = (st.name.clone(), st.location);
        self.metrics.sessions.push(SessionRecord {
            station_id: name,
            slot_id: slot.0,
            vehicle_id: id.0,
            enqueue_t: session.enqueue_t.as_secs_f64(),
            grant_t: session.grant_t.as_secs_f64(),
            complete_t: session.complete_t.as_secs_f64(),
            energy_wh,
            duration_s: session.duration_s,
            effective_power_w: session.effective_power_w,
            vehicle_capped: session.demand.vehicle_max_w < slot_power,
        });
        if let Some(p) = promotion {
            self.schedule_session(sched, p.vehicle, station, p.slot, p.completion)?;
        }
        let at_depot = location == self.fleet.depot.edge;
        self.transition(now, id, LifecycleInput::ChargeComplete { at_depot })?;
        if at_depot {
            self.try_dispatch(sched)
        } else {
            self.head_home(sched, id, location)
        }
    }

    /// A vehicle at a station that needs no charge after all.
    fn leave_station(&mut self, sched: &mut Scheduler<SimEvent>, id: VehicleId, station: StationId) -> Result<(), SimError> {
        let location = self.chargers.station(station)?.location;
        if location == self.fleet.depot.edge {
            self.transition(sched.now(), id, LifecycleInput::ArriveDepot { needs_charge: false })?;
            self.try_dispatch(sched)
        } else {
            self.head_home(sched, id, location)
        }
    }

    fn head_home(&mut self, sched: &mut Scheduler<SimEvent>, id: VehicleId, from: EdgeId) -> Result<(), SimError> {
        let route = self.net.shortest_path(from, self.fleet.depot.edge, self.cost(sched.now()))?;
        self.start_leg(sched, id, LegKind::Return, route.driven_edges())
    }

    /// Offers waiting trips, oldest first, to the idle vehicles.
    fn try_dispatch(&mut self, sched: &mut Scheduler<SimEvent>) -> Result<(), SimError> {
        let now = sched.now();
        let mut i = 0;
        while i < self.waiting_trips.len() {
            if !self.fleet.vehicles.iter().any(|v| v.lifecycle == Lifecycle::Idle) {
                break;
            }
            let tid = self.waiting_trips[i];
            let trip = &self.trips[tid.0 as usize];
            let (net, dry, env, dt) = (self.net, &self.dry_params, &self.env, self.numerics.dynamics_dt_s);
            let reserve = self.policies.dispatch_reserve_soc;
            let mut failure = None;
            let mut feasible = |v: &FleetVehicle| match round_trip_soc(net, trip, v.state.clone(), now, dry, env, dt) {
                Ok(Some(soc_end)) => soc_end >= reserve,
                Ok(None) => false,
                Err(e) => {
                    failure = Some(e);
                    false
                }
            };
            let outcome = self.fleet.dispatch(&*self.strategy, tid, &mut feasible)?;
            if let Some(e) = failure {
                return Err(e.into());
            }
            match outcome {
                DispatchOutcome::Assigned(vid) => {
                    self.waiting_trips.remove(i);
                    let (from, to) = (Lifecycle::Idle, Lifecycle::EnRoute);
                    self.metrics.record_transition(now, vid, from, to);
                    let depart = self.trips[tid.0 as usize].depart;
                    if let Some(rec) = self.metrics.trip_mut(tid) {
                        rec.vehicle_id = Some(vid.0);
                        rec.delay_s = Some(now.saturating_sub(depart).as_secs_f64());
                        rec.status = TripStatus::InProgress;
                    }
                    let edges = self.trips[tid.0 as usize].outbound.as_ref().expect("accepted trip").driven_edges().to_vec();
                    self.start_leg(sched, vid, LegKind::Outbound, &edges)?;
                }
                DispatchOutcome::Delayed => i += 1,
            }
        }
        Ok(())
    }

    fn on_stranded(&mut self, at: SimTime, id: VehicleId, edge: EdgeId) -> Result<(), SimError> {
        self.commit_segment(id, edge);
        self.legs[id.0 as usize] = None;
        let v = self.vehicle_mut(id);
        v.state.velocity = 0.0;
        if let Some(trip) = v.trip {
            if let Some(rec) = self.metrics.trip_mut(trip) {
                rec.status = TripStatus::Stranded;
            }
        }
        log::warn!("vehicle {id} stranded on edge {} at t={at}", self.net.edge_name(edge));
        self.transition(at, id, LifecycleInput::Stranded)
    }

    fn on_tick(&mut self, sched: &mut Scheduler<SimEvent>) -> Result<(), SimError> {
        let now = sched.now();
        let capacity = self.params.battery_capacity_wh;
        for i in 0..self.fleet.vehicles.len() {
            let v = &self.fleet.vehicles[i];
            if v.lifecycle == Lifecycle::Stranded {
                continue;
            }
            let mut rec = TickRecord {
                t: now,
                vehicle: v.id,
                state: v.lifecycle,
                v_mps: 0.0,
                a_mps2: 0.0,
                soc: v.state.soc,
                p_traction_w: 0.0,
                p_battery_w: 0.0,
                p_recup_w: 0.0,
                p_re_w: 0.0,
            };
            if let Some(pending) = self.legs[i].as_ref().and_then(|l| l.pending.as_ref()) {
                let t = (now - pending.start).as_secs_f64();
                let samples = &pending.trace.samples;
                let k = samples.partition_point(|s| s.t_s < t).min(samples.len().saturating_sub(1));
                if let Some(s) = samples.get(k) {
                    rec.v_mps = s.v_mps;
                    rec.a_mps2 = s.a_mps2;
                    rec.soc = s.soc;
                    rec.p_traction_w = s.p_traction_w;
                    rec.p_battery_w = s.p_battery_w;
                    rec.p_recup_w = s.p_recup_w;
                    rec.p_re_w = s.p_re_w;
                }
            } else if let Some(c) = self.charging[i] {
                let elapsed = (now - c.grant_t).as_secs_f64();
                rec.soc = c.soc_at_grant + c.battery_w * elapsed / 3600.0 / capacity;
                rec.p_battery_w = -c.battery_w;
            }
            self.metrics.record_tick(rec)?;
        }
        let next = now.offset_secs(self.numerics.metrics_tick_s);
        if next <= self.horizon && next > now {
            sched.schedule(SimEvent::MetricsTick, next)?;
        }
        Ok(())
    }
}

/// SOC left after driving the trip out and back from `state`, or `None` if
/// the vehicle would strand.
fn round_trip_soc(
    net: &RoadNetwork,
    trip: &Trip,
    mut state: VehicleState,
    now: SimTime,
    params: &VehicleParams,
    env: &Environment,
    dt: f64,
) -> Result<Option<f64>, DynamicsError> {
    let (Some(out), Some(back)) = (trip.outbound.as_ref(), trip.inbound.as_ref()) else { return Ok(None) };
    let plan = LegPlan::new(net, out.driven_edges(), now.hour_of_day(), params);
    let first = simulate_leg(&mut state, &plan, params, env, dt)?;
    if first.stranded {
        return Ok(None);
    }
    let back_hour = now.offset_secs(first.duration_s + trip.dwell_s).hour_of_day();
    let plan = LegPlan::new(net, back.driven_edges(), back_hour, params);
    let second = simulate_leg(&mut state, &plan, params, env, dt)?;
    Ok((!second.stranded).then_some(state.soc))
}

fn trip_record(net: &RoadNetwork, t: &Trip) -> TripRecord {
    TripRecord {
        trip_id: t.id.0,
        vehicle_id: None,
        depart_t: t.depart.as_secs_f64(),
        airline_m: t.sampled_airline_m,
        driven_out_m: t.outbound.as_ref().map(|r| r.driven_length_m(net)),
        driven_return_m: t.inbound.as_ref().map(|r| r.driven_length_m(net)),
        dwell_s: t.dwell_s,
        delay_s: None,
        status: if t.is_rejected() { TripStatus::Rejected } else { TripStatus::Pending },
    }
}

impl Handler<SimEvent> for ControlCenter<'_> {
    type Error = SimError;

    fn handle(&mut self, sched: &mut Scheduler<SimEvent>, fired: Fired<SimEvent>) -> Result<Disposition, SimError> {
        let at = fired.at;
        if let Some(id) = fired.event.vehicle() {
            let stranded = self.fleet.vehicle(id).map(|v| v.lifecycle == Lifecycle::Stranded)?;
            if stranded {
                log::warn!("dropping {:?} for stranded vehicle {id}", fired.event);
                return Ok(Disposition::Dropped);
            }
        }
        match fired.event {
            SimEvent::VehicleSpawn { trip } => {
                self.waiting_trips.push_back(trip);
                self.try_dispatch(sched)?;
            }
            SimEvent::SegmentComplete { vehicle, edge } => self.on_segment_complete(sched, vehicle, edge)?,
            SimEvent::ArriveDestination { vehicle, .. } => self.on_arrive(sched, vehicle)?,
            SimEvent::DwellComplete { vehicle } => {
                self.transition(at, vehicle, LifecycleInput::DwellComplete)?;
                let trip = self.vehicle(vehicle).trip.expect("dwelling vehicle has a trip");
                let edges = self.trips[trip.0 as usize].inbound.as_ref().expect("accepted trip").driven_edges().to_vec();
                self.start_leg(sched, vehicle, LegKind::Return, &edges)?;
            }
            SimEvent::ChargeRequest { vehicle, station } => self.on_charge_request(sched, vehicle, station)?,
            SimEvent::SlotGranted { vehicle, station, slot } => self.on_slot_granted(at, vehicle, station, slot)?,
            SimEvent::ChargeComplete { vehicle, station, slot } => self.on_charge_complete(sched, vehicle, station, slot)?,
            SimEvent::RangeExtenderToggle { vehicle, on } => {
                log::trace!("vehicle {vehicle} range extender {} at t={at}", if on { "on" } else { "off" });
            }
            SimEvent::Stranded { vehicle, edge } => self.on_stranded(at, vehicle, edge)?,
            SimEvent::MetricsTick => self.on_tick(sched)?,
            SimEvent::SimulationEnd => {}
        }
        if self.check_invariants {
            self.chargers.check_invariants().map_err(SimError::Invariant)?;
        }
        Ok(Disposition::Handled)
    }
}
