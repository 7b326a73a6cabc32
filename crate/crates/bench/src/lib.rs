//! Fixtures shared by the benchmarks.

use std::path::PathBuf;

use evfleet::network::generate_grid;
use evfleet::scenario::Scenario;
use evfleet::{EventPayload, RoadNetwork};

pub fn bundled_scenario() -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/default.toml");
    Scenario::load(&path).expect("bundled scenario loads")
}

/// The bundled scenario cut down to a quarter of its demand and fleet.
pub fn small_scenario() -> Scenario {
    let mut s = bundled_scenario();
    s.config.fleet.size = 25;
    s.config.demand.schedule_sources = Some(25);
    s
}

pub fn city_grid() -> RoadNetwork {
    generate_grid(31, 31, 300.0, 13.9).expect("valid grid")
}

/// Minimal event for queue benchmarks.
#[derive(Debug, Clone, Copy)]
pub struct Ping(pub u64);

impl EventPayload for Ping {
    fn kind(&self) -> &'static str {
        "Ping"
    }

    fn payload_ids(&self) -> String {
        format!("ping={}", self.0)
    }
}
