//! Slot granting, FIFO queues and the wait-or-divert decision.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::station::{ChargeDemand, ChargingStation, Session, SlotId, StationId, Waiting};
use super::ChargingError;
use crate::fleet::VehicleId;
use crate::network::Route;
use crate::time::SimTime;

/// Seconds to add `deficit_wh` at constant power `min(slot, vehicle) * efficiency`.
pub fn charge_duration(deficit_wh: f64, slot_power_w: f64, vehicle_max_w: f64, charging_efficiency: f64) -> f64 {
    if deficit_wh <= 0.0 {
        return 0.0;
    }
    deficit_wh * 3600.0 / (slot_power_w.min(vehicle_max_w) * charging_efficiency)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueEstimate {
    /// Queued vehicles need exactly their stated deficit.
    #[default]
    KnownDeficit,
    /// Queued vehicles are assumed to need a full battery.
    FullBattery,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DivertPolicy {
    pub safety_margin_soc: f64,
    pub queue_estimate: QueueEstimate,
}

impl Default for DivertPolicy {
    fn default() -> Self {
        Self { safety_margin_soc: 0.05, queue_estimate: QueueEstimate::KnownDeficit }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChargeGrant {
    Granted {
        slot: SlotId,
        completion: SimTime,
    },
    /// 1-based position in the queue.
    Queued {
        position: usize,
    },
}

/// A queued vehicle promoted to a slot on release.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Promotion {
    pub vehicle: VehicleId,
    pub slot: SlotId,
    pub completion: SimTime,
}

/// How to get to another station and what it costs.
#[derive(Debug, Clone, PartialEq)]
pub struct Reach {
    pub route: Route,
    pub travel_time_s: f64,
    pub energy_wh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StationChoice {
    WaitHere,
    DivertTo { station: StationId, route: Route, travel_time_s: f64 },
}

#[derive(Debug, Clone, Default)]
pub struct ChargingManager {
    stations: Vec<ChargingStation>,
    policy: DivertPolicy,
    located: HashMap<VehicleId, StationId>,
}

impl ChargingManager {
    /// Station ids must equal their index.
    pub fn new(stations: Vec<ChargingStation>, policy: DivertPolicy) -> Self {
        debug_assert!(stations.iter().enumerate().all(|(i, s)| s.id.0 as usize == i));
        Self { stations, policy, located: HashMap::new() }
    }

    pub fn policy(&self) -> &DivertPolicy {
        &self.policy
    }

    pub fn stations(&self) -> &[ChargingStation] {
        &self.stations
    }

    pub fn station(&self, id: StationId) -> Result<&ChargingStation, ChargingError> {
        self.stations.get(id.0 as usize).ok_or(ChargingError::UnknownStation(id))
    }

    fn station_mut(&mut self, id: StationId) -> Result<&mut ChargingStation, ChargingError> {
        self.stations.get_mut(id.0 as usize).ok_or(ChargingError::UnknownStation(id))
    }

    /// Station a vehicle currently waits or charges at.
    pub fn location_of(&self, vehicle: VehicleId) -> Option<StationId> {
        self.located.get(&vehicle).copied()
    }

    /// Grants the best free slot or appends the vehicle to the queue.
    pub fn request_charge(&mut self, station: StationId, demand: ChargeDemand, at: SimTime) -> Result<ChargeGrant, ChargingError> {
        if let Some(existing) = self.located.get(&demand.vehicle) {
            return Err(ChargingError::AlreadyPresent { vehicle: demand.vehicle, station: *existing });
        }
        let st = self.station_mut(station)?;
        let grant = match st.best_free_slot() {
            Some(idx) => {
                let session = start_session(st, idx, demand, at, at);
                ChargeGrant::Granted { slot: session.slot, completion: session.complete_t }
            }
            None => {
                st.queue.push_back(Waiting { demand, enqueue_t: at });
                ChargeGrant::Queued { position: st.queue.len() }
            }
        };
        assert!(st.occupied() <= st.max_simultaneous, "simultaneity limit exceeded at station {station}");
        self.located.insert(demand.vehicle, station);
        Ok(grant)
    }

    /// Remembers the completion event so it can be cancelled.
    pub fn attach_handle(&mut self, station: StationId, slot: SlotId, handle: crate::engine::EventHandle) -> Result<(), ChargingError> {
        let st = self.station_mut(station)?;
        let idx = st.slot_index(slot).ok_or(ChargingError::UnknownSlot { station, slot })?;
        match st.occupancy[idx].as_mut() {
            Some(session) => {
                session.handle = Some(handle);
                Ok(())
            }
            None => Err(ChargingError::SlotFree { station, slot }),
        }
    }

    pub fn session(&self, station: StationId, slot: SlotId) -> Option<&Session> {
        let st = self.stations.get(station.0 as usize)?;
        st.occupancy[st.slot_index(slot)?].as_ref()
    }

    /// Frees a slot; the queue head, if any, takes it at the same instant.
    pub fn release_slot(&mut self, station: StationId, slot: SlotId, at: SimTime) -> Result<(Session, Option<Promotion>), ChargingError> {
        let st = self.station_mut(station)?;
        let idx = st.slot_index(slot).ok_or(ChargingError::UnknownSlot { station, slot })?;
        let finished = st.occupancy[idx].take().ok_or(ChargingError::SlotFree { station, slot })?;
        let promotion = st.queue.pop_front().map(|head| {
            let session = start_session(st, idx, head.demand, head.enqueue_t, at);
            Promotion { vehicle: head.demand.vehicle, slot: session.slot, completion: session.complete_t }
        });
        assert!(st.occupied() <= st.max_simultaneous, "simultaneity limit exceeded at station {station}");
        self.located.remove(&finished.demand.vehicle);
        Ok((finished, promotion))
    }

    /// Estimated wait before a newly arriving vehicle would get a slot.
    pub fn estimated_wait_s(&self, station: StationId, at: SimTime) -> f64 {
        let st = &self.stations[station.0 as usize];
        if st.has_capacity() {
            return 0.0;
        }
        let remaining: f64 = st.occupancy.iter().flatten().map(|s| s.complete_t.saturating_sub(at).as_secs_f64()).sum();
        let mean_power = st.mean_slot_power();
        let queued: f64 = st
            .queue
            .iter()
            .map(|w| {
                let deficit = match self.policy.queue_estimate {
                    QueueEstimate::KnownDeficit => w.demand.deficit_wh,
                    QueueEstimate::FullBattery => w.demand.capacity_wh,
                };
                charge_duration(deficit, mean_power, w.demand.vehicle_max_w, w.demand.efficiency)
            })
            .sum();
        (remaining + queued) / st.max_simultaneous as f64
    }

    /// Wait at `current` or divert to the cheapest reachable alternative.
    ///
    /// An alternative is reachable if getting there needs at most
    /// `(soc - safety_margin_soc) * capacity`. Its cost is travel time plus
    /// estimated wait on the current occupancy snapshot. Ties favor waiting.
    pub fn select_station<F>(&self, soc: f64, capacity_wh: f64, current: StationId, at: SimTime, mut reach: F) -> StationChoice
    where
        F: FnMut(&ChargingStation) -> Option<Reach>,
    {
        let budget_wh = (soc - self.policy.safety_margin_soc) * capacity_wh;
        let mut best_cost = self.estimated_wait_s(current, at);
        let mut choice = StationChoice::WaitHere;
        for st in &self.stations {
            if st.id == current {
                continue;
            }
            let Some(r) = reach(st) else { continue };
            if r.energy_wh > budget_wh {
                continue;
            }
            let cost = r.travel_time_s + self.estimated_wait_s(st.id, at);
            if cost < best_cost {
                best_cost = cost;
                choice = StationChoice::DivertTo { station: st.id, route: r.route, travel_time_s: r.travel_time_s };
            }
        }
        choice
    }

    /// Scans every station for the simultaneity limit and global vehicle uniqueness.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen: HashMap<VehicleId, StationId> = HashMap::new();
        for st in &self.stations {
            if st.occupied() > st.max_simultaneous {
                return Err(format!("station {} has {} sessions, limit {}", st.id, st.occupied(), st.max_simultaneous));
            }
            let vehicles = st.occupancy.iter().flatten().map(|s| s.demand.vehicle).chain(st.queue.iter().map(|w| w.demand.vehicle));
            for v in vehicles {
                if let Some(other) = seen.insert(v, st.id) {
                    return Err(format!("vehicle {v} present at stations {other} and {}", st.id));
                }
                if self.located.get(&v) != Some(&st.id) {
                    return Err(format!("vehicle {v} location index out of sync"));
                }
            }
        }
        if seen.len() != self.located.len() {
            return Err("location index holds vehicles not present at any station".into());
        }
        Ok(())
    }
}

fn start_session(st: &mut ChargingStation, idx: usize, demand: ChargeDemand, enqueue_t: SimTime, at: SimTime) -> Session {
    let slot = &st.slots[idx];
    let effective_power_w = slot.power_w.min(demand.vehicle_max_w);
    let duration_s = charge_duration(demand.deficit_wh, slot.power_w, demand.vehicle_max_w, demand.efficiency);
    let session = Session {
        station: st.id,
        slot: slot.id,
        demand,
        enqueue_t,
        grant_t: at,
        complete_t: at.offset_secs(duration_s),
        duration_s,
        effective_power_w,
        handle: None,
    };
    st.occupancy[idx] = Some(session);
    session
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charging::station::{PlugType, Slot};
    use crate::network::EdgeId;

    fn two_slot(id: u32, location: u32) -> ChargingStation {
        ChargingStation::new(
            StationId(id),
            format!("S{id}"),
            EdgeId(location),
            vec![
                Slot { id: SlotId(0), plug: "schuko".into(), power_w: PlugType::SCHUKO_W },
                Slot { id: SlotId(1), plug: "iec_type2".into(), power_w: PlugType::IEC_TYPE2_W },
            ],
            2,
        )
    }

    fn demand(v: u32, deficit: f64) -> ChargeDemand {
        ChargeDemand { vehicle: VehicleId(v), deficit_wh: deficit, capacity_wh: 18_000.0, vehicle_max_w: 3600.0, efficiency: 1.0 }
    }

    #[test]
    fn durations() {
        assert_eq!(charge_duration(0.0, 2300.0, 3600.0, 1.0), 0.0);
        assert_eq!(charge_duration(2300.0, 2300.0, 3600.0, 1.0), 3600.0);
        assert_eq!(charge_duration(3600.0, 11_000.0, 3600.0, 1.0), 3600.0);
        assert_eq!(charge_duration(1800.0, 3600.0, 3600.0, 0.5), 3600.0);
    }

    #[test]
    fn grants_highest_power_then_queues() {
        let mut m = ChargingManager::new(vec![two_slot(0, 0)], DivertPolicy::default());
        let t = SimTime::ZERO;
        assert_eq!(
            m.request_charge(StationId(0), demand(1, 3600.0), t).unwrap(),
            ChargeGrant::Granted { slot: SlotId(1), completion: SimTime::from_secs(3600) }
        );
        assert_eq!(
            m.request_charge(StationId(0), demand(2, 2300.0), t).unwrap(),
            ChargeGrant::Granted { slot: SlotId(0), completion: SimTime::from_secs(3600) }
        );
        assert_eq!(m.request_charge(StationId(0), demand(3, 100.0), t).unwrap(), ChargeGrant::Queued { position: 1 });
        m.check_invariants().unwrap();
    }

    #[test]
    fn equal_power_prefers_lowest_slot_id() {
        let mut st = two_slot(0, 0);
        st.slots[1].power_w = PlugType::SCHUKO_W;
        let mut m = ChargingManager::new(vec![st], DivertPolicy::default());
        let g = m.request_charge(StationId(0), demand(1, 10.0), SimTime::ZERO).unwrap();
        assert!(matches!(g, ChargeGrant::Granted { slot: SlotId(0), .. }));
    }

    #[test]
    fn simultaneity_limit_below_slot_count() {
        let mut st = two_slot(0, 0);
        st.max_simultaneous = 1;
        let mut m = ChargingManager::new(vec![st], DivertPolicy::default());
        m.request_charge(StationId(0), demand(1, 10.0), SimTime::ZERO).unwrap();
        let g = m.request_charge(StationId(0), demand(2, 10.0), SimTime::ZERO).unwrap();
        assert_eq!(g, ChargeGrant::Queued { position: 1 });
    }

    #[test]
    fn double_request_and_unknown_station() {
        let mut m = ChargingManager::new(vec![two_slot(0, 0), two_slot(1, 1)], DivertPolicy::default());
        m.request_charge(StationId(0), demand(1, 10.0), SimTime::ZERO).unwrap();
        assert!(matches!(m.request_charge(StationId(1), demand(1, 10.0), SimTime::ZERO), Err(ChargingError::AlreadyPresent { .. })));
        assert_eq!(m.request_charge(StationId(9), demand(2, 10.0), SimTime::ZERO), Err(ChargingError::UnknownStation(StationId(9))));
    }

    #[test]
    fn release_promotes_fifo_head() {
        let mut m = ChargingManager::new(vec![two_slot(0, 0)], DivertPolicy::default());
        for v in 1..=4 {
            m.request_charge(StationId(0), demand(v, 3600.0), SimTime::ZERO).unwrap();
        }
        let at = SimTime::from_secs(3600);
        let (done, next) = m.release_slot(StationId(0), SlotId(1), at).unwrap();
        assert_eq!(done.demand.vehicle, VehicleId(1));
        let next = next.unwrap();
        assert_eq!((next.vehicle, next.slot), (VehicleId(3), SlotId(1)));
        assert_eq!(m.station(StationId(0)).unwrap().queue.len(), 1);
        assert_eq!(m.station(StationId(0)).unwrap().queue[0].demand.vehicle, VehicleId(4));
        m.check_invariants().unwrap();
    }

    #[test]
    fn release_with_empty_queue_and_free_slot_error() {
        let mut m = ChargingManager::new(vec![two_slot(0, 0)], DivertPolicy::default());
        m.request_charge(StationId(0), demand(1, 100.0), SimTime::ZERO).unwrap();
        let (_, next) = m.release_slot(StationId(0), SlotId(1), SimTime::from_secs(100)).unwrap();
        assert!(next.is_none());
        assert_eq!(m.station(StationId(0)).unwrap().occupied(), 0);
        assert_eq!(
            m.release_slot(StationId(0), SlotId(1), SimTime::from_secs(100)).unwrap_err(),
            ChargingError::SlotFree { station: StationId(0), slot: SlotId(1) }
        );
    }

    #[test]
    fn plug_energy_is_power_times_duration() {
        let mut m = ChargingManager::new(vec![two_slot(0, 0)], DivertPolicy::default());
        let d = ChargeDemand { efficiency: 0.9, ..demand(1, 1234.5) };
        m.request_charge(StationId(0), d, SimTime::ZERO).unwrap();
        let s = m.session(StationId(0), SlotId(1)).unwrap();
        assert!(((s.battery_energy_wh() - 1234.5) / 1234.5).abs() < 1e-9);
    }

    fn full_station_manager() -> ChargingManager {
        let mut m = ChargingManager::new(vec![two_slot(0, 0), two_slot(1, 5)], DivertPolicy::default());
        // two sessions of 1 h each at the local station plus one queued
        m.request_charge(StationId(0), demand(1, 3600.0), SimTime::ZERO).unwrap();
        m.request_charge(StationId(0), demand(2, 2300.0), SimTime::ZERO).unwrap();
        m
    }

    fn route() -> Route {
        Route { edges: vec![EdgeId(0), EdgeId(5)], total_length_m: 600.0 }
    }

    #[test]
    fn waits_without_alternatives() {
        let m = ChargingManager::new(vec![two_slot(0, 0)], DivertPolicy::default());
        let choice = m.select_station(0.5, 18_000.0, StationId(0), SimTime::ZERO, |_| None);
        assert_eq!(choice, StationChoice::WaitHere);
    }

    #[test]
    fn diverts_to_free_nearby_station() {
        let m = full_station_manager();
        // local wait = (3600 + 3600) / 2 = 3600 s > 60 s travel
        assert_eq!(m.estimated_wait_s(StationId(0), SimTime::ZERO), 3600.0);
        let choice = m.select_station(0.5, 18_000.0, StationId(0), SimTime::ZERO, |_| {
            Some(Reach { route: route(), travel_time_s: 60.0, energy_wh: 100.0 })
        });
        assert!(matches!(choice, StationChoice::DivertTo { station: StationId(1), .. }));
    }

    #[test]
    fn unreachable_alternative_means_wait() {
        let m = full_station_manager();
        // budget (0.1 - 0.05) * 18 kWh = 900 Wh < 1000 Wh
        let choice = m.select_station(0.1, 18_000.0, StationId(0), SimTime::ZERO, |_| {
            Some(Reach { route: route(), travel_time_s: 60.0, energy_wh: 1000.0 })
        });
        assert_eq!(choice, StationChoice::WaitHere);
    }

    #[test]
    fn tie_favors_waiting() {
        let m = full_station_manager();
        let choice = m.select_station(0.9, 18_000.0, StationId(0), SimTime::ZERO, |_| {
            Some(Reach { route: route(), travel_time_s: 3600.0, energy_wh: 10.0 })
        });
        assert_eq!(choice, StationChoice::WaitHere);
    }
}
