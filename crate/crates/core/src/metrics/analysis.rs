//! Distance histograms, utilization series and per-vehicle power-flow summaries.

use serde::Serialize;

use super::{MetricsCollector, MetricsError, Transition, TripRecord, TripStatus};
use crate::fleet::{Lifecycle, VehicleId};
use crate::time::SimTime;

/// Airline and outbound driven distances over identical bins. The last bin
/// is open-ended so every accepted trip is counted.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceHistogram {
    pub edges: Vec<f64>,
    pub airline: Vec<u64>,
    pub driven: Vec<u64>,
}

impl DistanceHistogram {
    /// `(lower, upper)` of every bin; the last upper is infinite.
    pub fn bins(&self) -> Vec<(f64, f64)> {
        (0..self.edges.len()).map(|i| (self.edges[i], self.edges.get(i + 1).copied().unwrap_or(f64::INFINITY))).collect()
    }

    fn index(&self, x: f64) -> usize {
        self.edges.partition_point(|&e| e <= x).saturating_sub(1)
    }
}

/// Bins are `[edges[i], edges[i+1])` plus `[edges[last], inf)`. Values below
/// the first edge count in the first bin.
pub fn distance_histogram(trips: &[TripRecord], bin_edges: &[f64]) -> DistanceHistogram {
    let edges = if bin_edges.is_empty() { vec![0.0] } else { bin_edges.to_vec() };
    let mut h = DistanceHistogram { airline: vec![0; edges.len()], driven: vec![0; edges.len()], edges };
    for t in trips.iter().filter(|t| t.status != TripStatus::Rejected) {
        let a = h.index(t.airline_m);
        h.airline[a] += 1;
        let d = h.index(t.driven_out_m.unwrap_or(0.0));
        h.driven[d] += 1;
    }
    h
}

/// Coarse state classes for the utilization series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum UsageClass {
    Idle,
    Busy,
    Charging,
    Queued,
    Stranded,
}

impl UsageClass {
    pub fn of(state: Lifecycle) -> Self {
        match state {
            Lifecycle::Idle => UsageClass::Idle,
            Lifecycle::EnRoute | Lifecycle::Dwelling | Lifecycle::Returning => UsageClass::Busy,
            Lifecycle::Charging => UsageClass::Charging,
            Lifecycle::QueuedAtStation => UsageClass::Queued,
            Lifecycle::Stranded => UsageClass::Stranded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UtilizationRow {
    pub bin_start_s: u64,
    pub bin_end_s: u64,
    pub idle: u32,
    pub busy: u32,
    pub charging: u32,
    pub queued: u32,
    pub stranded: u32,
}

impl UtilizationRow {
    pub fn total(&self) -> u32 {
        self.idle + self.busy + self.charging + self.queued + self.stranded
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilizationSeries {
    pub bin_s: f64,
    pub fleet_size: u32,
    pub rows: Vec<UtilizationRow>,
}

impl UtilizationSeries {
    /// Smallest idle count over all bins: the margin by which the fleet is
    /// larger than needed. A run without bins has the whole fleet as margin.
    pub fn min_idle(&self) -> u32 {
        self.rows.iter().map(|r| r.idle).min().unwrap_or(self.fleet_size)
    }
}

/// Per-vehicle state intervals `(start, end, state)` in milliseconds,
/// tiling `[0, end]`.
fn intervals(transitions: &[Transition], fleet_size: u32, end: SimTime) -> Vec<Vec<(u64, u64, Lifecycle)>> {
    let mut out: Vec<Vec<(u64, u64, Lifecycle)>> = vec![Vec::new(); fleet_size as usize];
    let mut current: Vec<(u64, Lifecycle)> = vec![(0, Lifecycle::Idle); fleet_size as usize];
    let end = end.as_millis();
    for tr in transitions {
        let i = tr.vehicle.0 as usize;
        let t = tr.t.as_millis().min(end);
        let (start, state) = current[i];
        if t > start {
            out[i].push((start, t, state));
        }
        current[i] = (t, tr.to);
    }
    for (i, (start, state)) in current.into_iter().enumerate() {
        if end > start || out[i].is_empty() {
            out[i].push((start, end, state));
        }
    }
    out
}

/// Classifies every vehicle in every bin. A vehicle counts as unused only if
/// it was idle for the whole bin; otherwise it takes the non-idle class it
/// spent most of the bin in.
pub fn unused_vehicles_series(transitions: &[Transition], fleet_size: u32, end: SimTime, bin_s: f64) -> UtilizationSeries {
    let bin_ms = SimTime::from_secs_f64(bin_s).as_millis().max(1);
    let end_ms = end.as_millis();
    let n_bins = end_ms.div_ceil(bin_ms) as usize;
    let mut rows: Vec<UtilizationRow> = (0..n_bins)
        .map(|k| UtilizationRow {
            bin_start_s: k as u64 * bin_ms / 1000,
            bin_end_s: ((k as u64 + 1) * bin_ms).min(end_ms) / 1000,
            idle: 0,
            busy: 0,
            charging: 0,
            queued: 0,
            stranded: 0,
        })
        .collect();
    for vehicle in intervals(transitions, fleet_size, end) {
        let mut time = vec![[0u64; 5]; n_bins];
        for (s, e, state) in vehicle {
            let class = UsageClass::of(state) as usize;
            let mut t = s;
            while t < e {
                let k = (t / bin_ms) as usize;
                let upto = e.min((k as u64 + 1) * bin_ms);
                time[k][class] += upto - t;
                t = upto;
            }
        }
        for (k, spent) in time.iter().enumerate() {
            let len = ((k as u64 + 1) * bin_ms).min(end_ms) - k as u64 * bin_ms;
            let class = if spent[0] == len {
                UsageClass::Idle
            } else {
                // first maximum in class order
                let mut best = 1;
                for c in 2..5 {
                    if spent[c] > spent[best] {
                        best = c;
                    }
                }
                [UsageClass::Idle, UsageClass::Busy, UsageClass::Charging, UsageClass::Queued, UsageClass::Stranded][best]
            };
            let row = &mut rows[k];
            match class {
                UsageClass::Idle => row.idle += 1,
                UsageClass::Busy => row.busy += 1,
                UsageClass::Charging => row.charging += 1,
                UsageClass::Queued => row.queued += 1,
                UsageClass::Stranded => row.stranded += 1,
            }
        }
    }
    UtilizationSeries { bin_s: bin_ms as f64 / 1000.0, fleet_size, rows }
}

/// Seconds spent per state over `[0, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDurations {
    pub idle_s: f64,
    pub driving_s: f64,
    pub dwelling_s: f64,
    pub charging_s: f64,
    pub queued_s: f64,
    pub stranded_s: f64,
}

impl StateDurations {
    pub fn total_s(&self) -> f64 {
        self.idle_s + self.driving_s + self.dwelling_s + self.charging_s + self.queued_s + self.stranded_s
    }
}

pub fn state_durations(transitions: &[Transition], fleet_size: u32, end: SimTime) -> Vec<StateDurations> {
    intervals(transitions, fleet_size, end)
        .into_iter()
        .map(|vehicle| {
            let mut d = StateDurations::default();
            for (s, e, state) in vehicle {
                let secs = (e - s) as f64 / 1000.0;
                match state {
                    Lifecycle::Idle => d.idle_s += secs,
                    Lifecycle::EnRoute | Lifecycle::Returning => d.driving_s += secs,
                    Lifecycle::Dwelling => d.dwelling_s += secs,
                    Lifecycle::Charging => d.charging_s += secs,
                    Lifecycle::QueuedAtStation => d.queued_s += secs,
                    Lifecycle::Stranded => d.stranded_s += secs,
                }
            }
            d
        })
        .collect()
}

/// A closed time span and where it was spent.
#[derive(Debug, Clone, PartialEq)]
pub struct Period {
    pub start_s: f64,
    pub end_s: f64,
    pub place: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSummary {
    pub vehicle: VehicleId,
    pub consumed_wh: f64,
    pub recuperated_wh: f64,
    pub range_extended_wh: f64,
    pub grid_charged_wh: f64,
    pub fuel_l: f64,
    pub distance_m: f64,
    pub charging_periods: Vec<Period>,
    pub idle_periods: Vec<Period>,
}

pub fn power_flow_summary(m: &MetricsCollector, vehicle: VehicleId) -> Result<PowerFlowSummary, MetricsError> {
    let rec = m.vehicle(vehicle)?;
    let charging_periods = m
        .sessions
        .iter()
        .filter(|s| s.vehicle_id == vehicle.0)
        .map(|s| Period { start_s: s.grant_t, end_s: s.complete_t, place: format!("{}/{}", s.station_id, s.slot_id) })
        .collect();
    let idle_periods = intervals(&m.transitions, m.fleet_size(), m.end)
        .swap_remove(vehicle.0 as usize)
        .into_iter()
        .filter(|(_, _, state)| *state == Lifecycle::Idle)
        .map(|(s, e, _)| Period { start_s: s as f64 / 1000.0, end_s: e as f64 / 1000.0, place: "depot".into() })
        .collect();
    Ok(PowerFlowSummary {
        vehicle,
        consumed_wh: rec.energy.consumed_wh,
        recuperated_wh: rec.energy.recuperated_wh,
        range_extended_wh: rec.energy.range_extended_wh,
        grid_charged_wh: rec.grid_charged_wh,
        fuel_l: rec.energy.fuel_l,
        distance_m: rec.energy.distance_m,
        charging_periods,
        idle_periods,
    })
}
