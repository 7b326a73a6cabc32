//! Whole-run behavior of the control center on small scenarios.

mod common;

use std::collections::HashMap;

use evfleet::charging::ChargingManager;
use evfleet::fleet::{
    generate_day_schedule, ControlCenter, DispatchStrategy, DistanceBin, FleetState, FleetVehicle, Lifecycle, TripsPerDay, VehicleId,
};
use evfleet::metrics::{MetricsCollector, TripStatus};
use evfleet::scenario::{
    run_scenario, validate_config, NetworkConfig, RangeExtenderOverrides, RunOptions, RunReport, Scenario, ScenarioConfig, ScenarioError,
    SlotConfig, StationConfig, SweepParam,
};
use evfleet::{Engine, SimTime};

fn station(id: &str, edge: &str, max: usize, slots: &[&str]) -> StationConfig {
    StationConfig {
        station_id: id.into(),
        edge_id: edge.into(),
        max_simultaneous: max,
        slots: slots.iter().map(|p| SlotConfig { plug: (*p).into(), power_w: None }).collect(),
    }
}

/// A small city with a busy fleet of short-range cars: one single-plug depot
/// station and one remote station.
fn stressed() -> Scenario {
    let mut s = common::bundled();
    let c = &mut s.config;
    c.seed = 7;
    c.network = NetworkConfig::Grid { rows: 15, cols: 15, edge_length_m: 300.0, speed_limit_mps: 13.9, congestion: None };
    c.depot.edge_id = "r7c7-r7c8".into();
    c.fleet.size = 8;
    c.fleet.overrides.battery_capacity_wh = Some(2_500.0);
    c.stations = vec![station("depot", "r7c7-r7c8", 1, &["schuko"]), station("east", "r7c11-r7c12", 2, &["iec_type2", "iec_type2"])];
    c.demand.schedule_sources = Some(12);
    c.demand.trips_per_day = TripsPerDay::Fixed { count: 3 };
    c.demand.distance_bins = vec![DistanceBin { upper_m: 1500.0, weight: 1.0 }, DistanceBin { upper_m: 3500.0, weight: 2.0 }];
    c.numerics.histogram_bins_m = None;
    s
}

fn run(s: &Scenario) -> RunReport {
    run_scenario(s, &RunOptions::default()).expect("run succeeds")
}

fn status_counts(r: &RunReport) -> HashMap<TripStatus, usize> {
    let mut m = HashMap::new();
    for t in &r.metrics.trips {
        *m.entry(t.status).or_insert(0) += 1;
    }
    m
}

fn assert_ledgers_balance(r: &RunReport) {
    for v in &r.metrics.vehicles {
        let scale = (v.energy.consumed_wh + v.grid_charged_wh).max(1.0);
        assert!(v.ledger_residual_wh().abs() / scale < 1e-6, "vehicle {} residual {} Wh", v.vehicle, v.ledger_residual_wh());
        assert!((0.0..=1.0).contains(&v.soc_end));
    }
}

/// Per-station session intervals never exceed the limit and grants follow arrival order.
fn assert_station_discipline(s: &Scenario, r: &RunReport) {
    for st in &s.config.stations {
        let mut sessions: Vec<_> = r.metrics.sessions.iter().filter(|x| x.station_id == st.station_id).collect();
        let mut points: Vec<(f64, i32)> = sessions.iter().flat_map(|x| [(x.grant_t, 1), (x.complete_t, -1)]).collect();
        // releases before grants at the same instant
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut active = 0;
        for (_, d) in points {
            active += d;
            assert!(active as usize <= st.max_simultaneous, "station {} over its limit", st.station_id);
        }
        sessions.sort_by(|a, b| a.enqueue_t.total_cmp(&b.enqueue_t));
        let queued: Vec<_> = sessions.iter().filter(|x| x.wait_s() > 0.0).collect();
        assert!(queued.windows(2).all(|w| w[0].grant_t <= w[1].grant_t), "FIFO broken at {}", st.station_id);
    }
}

#[test]
fn zero_horizon_dispatches_nothing() {
    let mut s = common::bundled();
    s.config.horizon_s = 0.0;
    let r = run(&s);
    assert_eq!(r.summary.final_clock, SimTime::ZERO);
    assert!(r.metrics.transitions.is_empty());
    assert!(r.metrics.sessions.is_empty());
    assert_eq!(r.min_idle(), 100);
    assert_eq!(r.n_delayed(), 0);
    assert!(r.metrics.trips.iter().all(|t| t.status == TripStatus::Pending || t.status == TripStatus::Rejected));
}

#[test]
fn empty_fleet_leaves_every_trip_waiting() {
    let mut s = common::bundled();
    s.config.demand.schedule_sources = Some(s.config.schedule_sources());
    s.config.fleet.size = 0;
    let r = run(&s);
    assert!(r.metrics.vehicles.is_empty());
    assert!(r.metrics.transitions.is_empty());
    let pending = r.metrics.trips.iter().filter(|t| t.status == TripStatus::Pending).count();
    assert_eq!(pending, r.metrics.accepted_trips().count());
    assert_eq!(r.n_delayed(), pending);
    assert_eq!(r.min_idle(), 0);
}

#[test]
fn infinite_battery_never_charges_or_strands() {
    let mut s = stressed();
    s.config.fleet.preset = "infinite_battery".into();
    s.config.fleet.overrides.battery_capacity_wh = None;
    s.config.fleet.size = 40;
    let r = run(&s);
    assert!(r.metrics.sessions.is_empty());
    assert_eq!(r.n_stranded(), 0);
    assert!(r.metrics.vehicles.iter().all(|v| v.energy.fuel_l == 0.0 && v.grid_charged_wh == 0.0));
    let counts = status_counts(&r);
    assert_eq!(counts.get(&TripStatus::Completed).copied().unwrap_or(0), r.metrics.accepted_trips().count());
    assert_eq!(r.n_delayed(), 0);
    assert_ledgers_balance(&r);
}

#[test]
fn trip_statuses_account_for_every_trip() {
    for s in [common::bundled(), stressed()] {
        let r = run(&s);
        let counts = status_counts(&r);
        let n = |st| counts.get(&st).copied().unwrap_or(0);
        // dispatched trips are finished, underway or stranded; the rest never left
        for t in &r.metrics.trips {
            let on_road = matches!(t.status, TripStatus::Completed | TripStatus::InProgress | TripStatus::Stranded);
            assert_eq!(on_road, t.vehicle_id.is_some(), "trip {} is {:?}", t.trip_id, t.status);
        }
        assert_eq!(n(TripStatus::Rejected), r.metrics.trips.len() - r.metrics.accepted_trips().count());
        let served: u32 = r.metrics.vehicles.iter().map(|v| v.n_trips).sum();
        let dispatched = r.metrics.trips.iter().filter(|t| t.vehicle_id.is_some()).count();
        assert_eq!(served as usize, dispatched);
    }
}

#[test]
fn short_range_fleet_charges_queues_and_balances() {
    let s = stressed();
    let dir = tempfile::tempdir().unwrap();
    let r = run_scenario(&s, &RunOptions { out_dir: Some(dir.path().into()), event_log: true, ..Default::default() }).unwrap();
    assert!(r.metrics.sessions.len() >= 5, "only {} sessions", r.metrics.sessions.len());
    let events = std::fs::read_to_string(dir.path().join("events.csv")).unwrap();
    let requests = events.lines().filter(|l| l.split(',').nth(2) == Some("ChargeRequest")).count();
    assert!(requests >= r.metrics.sessions.len());
    assert!(r.metrics.transitions.iter().any(|t| t.to == Lifecycle::QueuedAtStation), "the single depot plug should build a queue");
    assert_station_discipline(&s, &r);
    assert_ledgers_balance(&r);
    // a completed session adds exactly its energy
    for x in &r.metrics.sessions {
        assert!((x.energy_wh - x.effective_power_w * x.duration_s / 3600.0).abs() < 1e-6);
    }
}

#[test]
fn full_depot_sends_vehicles_to_the_remote_station() {
    let s = stressed();
    let r = run(&s);
    let remote = r.metrics.sessions.iter().filter(|x| x.station_id == "east").count();
    assert!(remote > 0, "no vehicle diverted");
    // after a remote charge the vehicle drives home
    let returning = r.metrics.transitions.iter().filter(|t| t.from == Lifecycle::Charging && t.to == Lifecycle::Returning).count();
    assert!(returning >= remote);
}

/// Takes the first idle vehicle without checking it can make the trip.
struct Reckless;

impl DispatchStrategy for Reckless {
    fn choose(&self, idle: &[&FleetVehicle], _: &mut dyn FnMut(&FleetVehicle) -> bool) -> Option<VehicleId> {
        idle.first().map(|v| v.id)
    }
}

fn run_with_strategy(s: &Scenario, strategy: Box<dyn DispatchStrategy + Send>) -> MetricsCollector {
    let c = &s.config;
    let r = s.resolve().unwrap();
    let trips = generate_day_schedule(c.seed, &r.profile, c.schedule_sources(), c.demand.days, &r.net, &r.depot, c.policies.routing_weight);
    let horizon = SimTime::from_secs_f64(c.horizon_s);
    let mut cc = ControlCenter::new(
        &r.net,
        r.params.clone(),
        c.environment,
        c.policies.policies(),
        c.numerics.numerics(),
        horizon,
        FleetState::new(r.depot, c.fleet.size, c.fleet.initial_soc),
        trips,
        ChargingManager::new(r.stations.clone(), c.policies.divert()),
        strategy,
        MetricsCollector::discarding(c.fleet.size),
    );
    let mut engine = Engine::new();
    cc.prime(engine.scheduler()).unwrap();
    engine.run_until(horizon, &mut cc).unwrap();
    cc.finish(horizon)
}

#[test]
fn feasibility_check_prevents_stranding() {
    let mut s = stressed();
    s.config.fleet.initial_soc = 0.15;
    s.config.fleet.overrides.range_extender = Some(RangeExtenderOverrides { enabled: Some(false), ..Default::default() });
    s.config.stations.clear();
    s.config.policies.dispatch_reserve_soc = 0.0;
    let r = run(&s);
    assert_eq!(r.n_stranded(), 0);
    assert!(r.n_delayed() > 0, "some trips should be out of reach");
}

#[test]
fn empty_battery_without_extender_strands_for_good() {
    let mut s = stressed();
    s.config.fleet.initial_soc = 0.15;
    s.config.fleet.overrides.range_extender = Some(RangeExtenderOverrides { enabled: Some(false), ..Default::default() });
    s.config.stations.clear();
    let m = run_with_strategy(&s, Box::new(Reckless));
    let stranded_at: HashMap<_, _> = m.transitions.iter().filter(|t| t.to == Lifecycle::Stranded).map(|t| (t.vehicle, t.t)).collect();
    assert!(!stranded_at.is_empty());
    for t in &m.transitions {
        if let Some(&at) = stranded_at.get(&t.vehicle) {
            assert!(t.t <= at, "vehicle {} moved after stranding", t.vehicle);
        }
    }
    assert_eq!(m.trips.iter().filter(|t| t.status == TripStatus::Stranded).count(), stranded_at.len());
    for v in &m.vehicles {
        assert_eq!(v.energy.fuel_l, 0.0);
        assert!(v.ledger_residual_wh().abs() < 1e-6 * v.energy.consumed_wh.max(1.0));
        if stranded_at.contains_key(&v.vehicle) {
            assert_eq!(v.soc_end, 0.0);
        }
    }
}

#[test]
fn range_extender_burns_fuel_on_a_small_battery() {
    let mut s = stressed();
    s.config.fleet.initial_soc = 0.3;
    s.config.stations.clear();
    let r = run(&s);
    assert_eq!(r.n_stranded(), 0);
    assert!(r.metrics.vehicles.iter().map(|v| v.energy.fuel_l).sum::<f64>() > 0.0);
    assert_ledgers_balance(&r);
}

#[test]
fn slot_power_sets_session_rate() {
    let base = stressed();
    for power in [2_300.0, 11_000.0] {
        let s = SweepParam::SlotPower.apply(&base, power).unwrap();
        let r = run(&s);
        assert!(!r.metrics.sessions.is_empty());
        for x in &r.metrics.sessions {
            let want = power.min(3_600.0);
            assert_eq!(x.effective_power_w, want);
            assert_eq!(x.vehicle_capped, power > 3_600.0);
            // seconds per Wh follow the plug rate
            assert!((x.duration_s / x.energy_wh - 3_600.0 / want).abs() < 1e-9);
        }
    }
}

#[test]
fn fleet_size_sweep_keeps_demand_fixed() {
    let base = common::bundled();
    let a = run(&SweepParam::FleetSize.apply(&base, 100.0).unwrap());
    let b = run(&SweepParam::FleetSize.apply(&base, 50.0).unwrap());
    let key = |r: &RunReport| r.metrics.trips.iter().map(|t| (t.depart_t, t.airline_m.to_bits())).collect::<Vec<_>>();
    assert_eq!(key(&a), key(&b));
}

#[test]
fn seed_override_changes_demand_and_repeats_exactly() {
    let s = common::bundled();
    let opts = |seed| RunOptions { seed: Some(seed), ..Default::default() };
    let a = run_scenario(&s, &opts(1)).unwrap();
    let b = run_scenario(&s, &opts(1)).unwrap();
    let c = run_scenario(&s, &opts(2)).unwrap();
    assert_eq!(a.metrics.trips, b.metrics.trips);
    assert_ne!(a.metrics.trips, c.metrics.trips);
    assert_eq!(a.seed, 1);
}

#[test]
fn stressed_run_is_deterministic() {
    let s = stressed();
    let (a, b) = (run(&s), run(&s));
    assert_eq!(a.metrics.trips, b.metrics.trips);
    assert_eq!(a.metrics.sessions, b.metrics.sessions);
    assert_eq!(a.metrics.transitions, b.metrics.transitions);
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 1\nnot_a_key = 3\n").unwrap();
    assert_eq!(validate_config(&bad).unwrap_err().exit_code(), 1);
    assert_eq!(validate_config(&dir.path().join("missing.toml")).unwrap_err().exit_code(), 1);

    let mut s = common::bundled();
    s.config.depot.edge_id = "E999".into();
    let err = run_scenario(&s, &RunOptions::default()).err().unwrap();
    assert!(matches!(err, ScenarioError::Invalid(_)));
    assert!(err.to_string().contains("E999"));
    assert_eq!(err.exit_code(), 1);

    assert_eq!("fleet.colour".parse::<SweepParam>().unwrap_err().exit_code(), 1);
    let over = SweepParam::StationCount.apply(&common::bundled(), 99.0).unwrap_err();
    assert_eq!(over.exit_code(), 1);

    // the output directory is a regular file
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "").unwrap();
    let err = run_scenario(&common::bundled(), &RunOptions { out_dir: Some(blocker), ..Default::default() }).err().unwrap();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn effective_config_round_trips() {
    let text = validate_config(&common::bundled_path()).unwrap();
    let again = ScenarioConfig::from_toml(&text).unwrap();
    assert_eq!(again, common::bundled().config);
    assert_eq!(again.to_toml(), text);
}
