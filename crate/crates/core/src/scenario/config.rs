//! Scenario file schema (TOML) and its validation into runnable parts.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::charging::{ChargingStation, DivertPolicy, PlugType, QueueEstimate, Slot, SlotId, StationId};
use crate::dynamics::{DynamicsError, Environment, RangeExtenderParams, VehicleParams};
use crate::fleet::{DemandProfile, Depot, DistanceBin, DwellDistribution, FleetError, Numerics, Policies, TripsPerDay};
use crate::network::{generate_grid, load_network, CongestionProfile, LoadOptions, RoadNetwork, RouteWeight};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Simulated seconds.
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    pub network: NetworkConfig,
    pub depot: DepotConfig,
    #[serde(default)]
    pub fleet: FleetConfig,
    #[serde(default)]
    pub stations: Vec<StationConfig>,
    #[serde(default)]
    pub demand: DemandConfig,
    #[serde(default)]
    pub policies: PolicyConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub environment: Environment,
}

fn default_horizon() -> f64 {
    86_400.0
}

/// Generated grid or `nodes.csv`/`edges.csv` files. File paths are relative
/// to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkConfig {
    Grid {
        rows: usize,
        cols: usize,
        edge_length_m: f64,
        speed_limit_mps: f64,
        /// 24 hourly speed factors.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        congestion: Option<Vec<f64>>,
    },
    Files {
        nodes: PathBuf,
        edges: PathBuf,
        #[serde(default)]
        bidirectional: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        congestion: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepotConfig {
    pub edge_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FleetConfig {
    pub size: u32,
    /// `reference` or `infinite_battery`.
    pub preset: String,
    pub initial_soc: f64,
    pub overrides: VehicleOverrides,
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self { size: 100, preset: "reference".into(), initial_soc: 1.0, overrides: VehicleOverrides::default() }
    }
}

/// Per-field replacements for the preset vehicle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_kg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drag_coefficient: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frontal_area_m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rolling_coefficient: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drivetrain_efficiency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recuperation_efficiency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_recuperation_power_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auxiliary_power_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub battery_capacity_wh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_charging_power_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub charging_efficiency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_acceleration_mps2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_deceleration_mps2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range_extender: Option<RangeExtenderOverrides>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RangeExtenderOverrides {
    /// `false` removes the range extender.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub soc_on: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub soc_off: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub specific_fuel_rate_l_per_kwh: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationConfig {
    pub station_id: String,
    pub edge_id: String,
    #[serde(default = "default_simultaneous")]
    pub max_simultaneous: usize,
    pub slots: Vec<SlotConfig>,
}

fn default_simultaneous() -> usize {
    2
}

/// `plug` is `schuko`, `iec_type2` or any other name; `power_w` is required
/// for other names and overrides the preset power otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotConfig {
    pub plug: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemandConfig {
    /// Number of independent demand sources; defaults to the fleet size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule_sources: Option<u32>,
    pub days: u32,
    pub departure_weights: [f64; 24],
    pub distance_min_m: f64,
    pub distance_bins: Vec<DistanceBin>,
    pub dwell: DwellDistribution,
    pub trips_per_day: TripsPerDay,
}

impl Default for DemandConfig {
    fn default() -> Self {
        let p = DemandProfile::synthetic_company();
        Self {
            schedule_sources: None,
            days: 1,
            departure_weights: p.departure_weights,
            distance_min_m: p.distance_min_m,
            distance_bins: p.distance_bins,
            dwell: p.dwell,
            trips_per_day: p.trips_per_day,
        }
    }
}

impl DemandConfig {
    pub fn profile(&self) -> DemandProfile {
        DemandProfile {
            departure_weights: self.departure_weights,
            distance_min_m: self.distance_min_m,
            distance_bins: self.distance_bins.clone(),
            dwell: self.dwell.clone(),
            trips_per_day: self.trips_per_day.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub routing_weight: RouteWeight,
    pub dispatch_reserve_soc: f64,
    pub depot_charge_threshold: f64,
    pub target_soc: f64,
    pub safety_margin_soc: f64,
    pub queue_estimate: QueueEstimate,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        let p = Policies::default();
        let d = DivertPolicy::default();
        Self {
            routing_weight: p.routing_weight,
            dispatch_reserve_soc: p.dispatch_reserve_soc,
            depot_charge_threshold: p.depot_charge_threshold,
            target_soc: p.target_soc,
            safety_margin_soc: d.safety_margin_soc,
            queue_estimate: d.queue_estimate,
        }
    }
}

impl PolicyConfig {
    pub fn policies(&self) -> Policies {
        Policies {
            routing_weight: self.routing_weight,
            dispatch_reserve_soc: self.dispatch_reserve_soc,
            depot_charge_threshold: self.depot_charge_threshold,
            target_soc: self.target_soc,
        }
    }

    pub fn divert(&self) -> DivertPolicy {
        DivertPolicy { safety_margin_soc: self.safety_margin_soc, queue_estimate: self.queue_estimate }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub dynamics_dt_s: f64,
    pub metrics_tick_s: f64,
    pub utilization_bin_s: f64,
    /// Tick rows are buffered up to this many bytes before being written.
    pub tick_buffer_bytes: usize,
    /// Distance histogram edges; defaults to the demand distance bins.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram_bins_m: Option<Vec<f64>>,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        let n = Numerics::default();
        Self {
            dynamics_dt_s: n.dynamics_dt_s,
            metrics_tick_s: n.metrics_tick_s,
            utilization_bin_s: 900.0,
            tick_buffer_bytes: 1 << 20,
            histogram_bins_m: None,
        }
    }
}

impl NumericsConfig {
    pub fn numerics(&self) -> Numerics {
        Numerics { dynamics_dt_s: self.dynamics_dt_s, metrics_tick_s: self.metrics_tick_s }
    }
}

/// One validation failure, naming the offending key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

/// Validated, ready-to-run pieces of a scenario.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub net: RoadNetwork,
    pub depot: Depot,
    pub params: VehicleParams,
    pub stations: Vec<ChargingStation>,
    pub profile: DemandProfile,
    pub histogram_edges: Vec<f64>,
}

impl VehicleOverrides {
    pub fn apply(&self, mut p: VehicleParams) -> VehicleParams {
        let fields = [
            (self.mass_kg, &mut p.mass_kg),
            (self.drag_coefficient, &mut p.drag_coefficient),
            (self.frontal_area_m2, &mut p.frontal_area_m2),
            (self.rolling_coefficient, &mut p.rolling_coefficient),
            (self.drivetrain_efficiency, &mut p.drivetrain_efficiency),
            (self.recuperation_efficiency, &mut p.recuperation_efficiency),
            (self.max_recuperation_power_w, &mut p.max_recuperation_power_w),
            (self.auxiliary_power_w, &mut p.auxiliary_power_w),
            (self.battery_capacity_wh, &mut p.battery_capacity_wh),
            (self.max_charging_power_w, &mut p.max_charging_power_w),
            (self.charging_efficiency, &mut p.charging_efficiency),
            (self.max_acceleration_mps2, &mut p.max_acceleration_mps2),
            (self.max_deceleration_mps2, &mut p.max_deceleration_mps2),
        ];
        for (value, slot) in fields {
            if let Some(v) = value {
                *slot = v;
            }
        }
        if let Some(re) = &self.range_extender {
            if re.enabled == Some(false) {
                p.range_extender = None;
            } else {
                let base = p.range_extender.clone().unwrap_or(RangeExtenderParams {
                    power_w: 15_000.0,
                    soc_on: 0.2,
                    soc_off: 0.4,
                    specific_fuel_rate_l_per_kwh: 0.3,
                });
                p.range_extender = Some(RangeExtenderParams {
                    power_w: re.power_w.unwrap_or(base.power_w),
                    soc_on: re.soc_on.unwrap_or(base.soc_on),
                    soc_off: re.soc_off.unwrap_or(base.soc_off),
                    specific_fuel_rate_l_per_kwh: re.specific_fuel_rate_l_per_kwh.unwrap_or(base.specific_fuel_rate_l_per_kwh),
                });
            }
        }
        p
    }
}

fn issue(key: impl Into<String>, message: impl Into<String>) -> ConfigIssue {
    ConfigIssue { key: key.into(), message: message.into() }
}

fn unit_interval(issues: &mut Vec<ConfigIssue>, key: &str, x: f64) {
    if !(0.0..=1.0).contains(&x) {
        issues.push(issue(key, format!("must lie in [0, 1], got {x}")));
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// The configuration with every default written out.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }

    /// Demand sources used for schedule generation.
    pub fn schedule_sources(&self) -> u32 {
        self.demand.schedule_sources.unwrap_or(self.fleet.size)
    }

    /// Checks every key and builds the runnable parts, or lists all problems.
    pub fn resolve(&self, base_dir: &Path) -> Result<Resolved, Vec<ConfigIssue>> {
        let mut issues = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            issues.push(issue("schema_version", format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version)));
        }
        if !(self.horizon_s.is_finite() && self.horizon_s >= 0.0) {
            issues.push(issue("horizon_s", format!("must be non-negative, got {}", self.horizon_s)));
        }

        let net = self.build_network(base_dir, &mut issues);

        let depot = net.as_ref().and_then(|net| match net.edge_by_name(&self.depot.edge_id) {
            Some(e) => Some(Depot::new(net, e)),
            None => {
                issues.push(issue("depot.edge_id", format!("unknown edge {:?}", self.depot.edge_id)));
                None
            }
        });

        let params = match VehicleParams::preset(&self.fleet.preset) {
            Some(base) => {
                let p = self.fleet.overrides.apply(base);
                match p.validate() {
                    Ok(()) => Some(p),
                    Err(DynamicsError::InvalidParam { field, reason }) => {
                        issues.push(issue(format!("fleet.overrides.{field}"), reason));
                        None
                    }
                    Err(e) => {
                        issues.push(issue("fleet.overrides", e.to_string()));
                        None
                    }
                }
            }
            None => {
                issues.push(issue("fleet.preset", format!("unknown preset {:?}", self.fleet.preset)));
                None
            }
        };
        unit_interval(&mut issues, "fleet.initial_soc", self.fleet.initial_soc);

        let stations = self.build_stations(net.as_ref(), &mut issues);

        let profile = self.demand.profile();
        if let Err(FleetError::InvalidProfile { field, reason }) = profile.validate() {
            issues.push(issue(format!("demand.{field}"), reason));
        }
        if self.demand.days == 0 {
            issues.push(issue("demand.days", "must be at least 1"));
        }
        if self.demand.schedule_sources == Some(0) {
            issues.push(issue("demand.schedule_sources", "must be at least 1"));
        }

        let p = &self.policies;
        unit_interval(&mut issues, "policies.dispatch_reserve_soc", p.dispatch_reserve_soc);
        unit_interval(&mut issues, "policies.depot_charge_threshold", p.depot_charge_threshold);
        unit_interval(&mut issues, "policies.safety_margin_soc", p.safety_margin_soc);
        if !(p.target_soc > 0.0 && p.target_soc <= 1.0) {
            issues.push(issue("policies.target_soc", format!("must lie in (0, 1], got {}", p.target_soc)));
        }

        let n = &self.numerics;
        if !(n.dynamics_dt_s.is_finite() && n.dynamics_dt_s > 0.0) {
            issues.push(issue("numerics.dynamics_dt_s", format!("must be positive, got {}", n.dynamics_dt_s)));
        }
        if !(n.metrics_tick_s.is_finite() && n.metrics_tick_s >= 0.0) {
            issues.push(issue("numerics.metrics_tick_s", format!("must be non-negative, got {}", n.metrics_tick_s)));
        }
        if !(n.utilization_bin_s.is_finite() && n.utilization_bin_s >= 0.001) {
            issues.push(issue("numerics.utilization_bin_s", format!("must be positive, got {}", n.utilization_bin_s)));
        }
        let histogram_edges = n.histogram_bins_m.clone().unwrap_or_else(|| profile.distance_edges());
        if histogram_edges.is_empty() || histogram_edges.windows(2).any(|w| w[1] <= w[0]) || histogram_edges.iter().any(|x| !x.is_finite())
        {
            issues.push(issue("numerics.histogram_bins_m", "edges must be finite and strictly increasing"));
        }

        if let Err(e) = self.environment.validate() {
            let key = match &e {
                DynamicsError::InvalidParam { field, .. } => format!("environment.{field}"),
                _ => "environment".into(),
            };
            issues.push(issue(key, e.to_string()));
        }

        match (net, depot, params) {
            (Some(net), Some(depot), Some(params)) if issues.is_empty() => {
                Ok(Resolved { net, depot, params, stations, profile, histogram_edges })
            }
            _ => Err(issues),
        }
    }

    fn build_network(&self, base_dir: &Path, issues: &mut Vec<ConfigIssue>) -> Option<RoadNetwork> {
        let (built, congestion) = match &self.network {
            NetworkConfig::Grid { rows, cols, edge_length_m, speed_limit_mps, congestion } => {
                (generate_grid(*rows, *cols, *edge_length_m, *speed_limit_mps), congestion)
            }
            NetworkConfig::Files { nodes, edges, bidirectional, congestion } => {
                (load_network(&base_dir.join(nodes), &base_dir.join(edges), LoadOptions { bidirectional: *bidirectional }), congestion)
            }
        };
        let net = match built {
            Ok(net) => net,
            Err(e) => {
                issues.push(issue("network", e.to_string()));
                return None;
            }
        };
        let Some(factors) = congestion else { return Some(net) };
        let Ok(hourly) = <[f64; 24]>::try_from(factors.as_slice()) else {
            issues.push(issue("network.congestion", format!("need 24 hourly factors, got {}", factors.len())));
            return None;
        };
        match net.with_congestion(CongestionProfile { hourly }) {
            Ok(net) => Some(net),
            Err(e) => {
                issues.push(issue("network.congestion", e.to_string()));
                None
            }
        }
    }

    fn build_stations(&self, net: Option<&RoadNetwork>, issues: &mut Vec<ConfigIssue>) -> Vec<ChargingStation> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (i, sc) in self.stations.iter().enumerate() {
            let key = |field: &str| format!("stations[{i}].{field}");
            if !seen.insert(sc.station_id.as_str()) {
                issues.push(issue(key("station_id"), format!("duplicate station id {:?}", sc.station_id)));
            }
            let location = net.and_then(|net| {
                let e = net.edge_by_name(&sc.edge_id);
                if e.is_none() {
                    issues.push(issue(key("edge_id"), format!("unknown edge {:?}", sc.edge_id)));
                }
                e
            });
            if sc.slots.is_empty() {
                issues.push(issue(key("slots"), "at least one slot required"));
            }
            if sc.max_simultaneous == 0 || sc.max_simultaneous > sc.slots.len() {
                issues.push(issue(
                    key("max_simultaneous"),
                    format!("must lie in [1, {}] (number of slots), got {}", sc.slots.len(), sc.max_simultaneous),
                ));
            }
            let mut slots = Vec::new();
            for (j, slot) in sc.slots.iter().enumerate() {
                let power = slot.power_w.or_else(|| PlugType::preset(&slot.plug).map(|p| p.power_w));
                match power {
                    Some(w) if w.is_finite() && w > 0.0 => slots.push(Slot { id: SlotId(j as u32), plug: slot.plug.clone(), power_w: w }),
                    Some(w) => issues.push(issue(format!("stations[{i}].slots[{j}].power_w"), format!("must be positive, got {w}"))),
                    None => issues.push(issue(
                        format!("stations[{i}].slots[{j}].power_w"),
                        format!("plug {:?} is not a preset and needs a power", slot.plug),
                    )),
                }
            }
            if let Some(location) = location {
                out.push(ChargingStation::new(StationId(i as u32), sc.station_id.clone(), location, slots, sc.max_simultaneous));
            }
        }
        out
    }
}
