//! Discrete-event simulation of electric vehicle fleets.

pub mod charging;
pub mod dynamics;
pub mod engine;
pub mod fleet;
pub mod metrics;
pub mod network;
pub mod scenario;
pub mod time;

pub use engine::{Disposition, Engine, EngineError, EventHandle, EventPayload, Fired, Handler, Scheduler, SimulationSummary};
pub use network::{airline_distance, Coord, EdgeId, NetworkError, NodeId, RoadNetwork, Route, RouteWeight};
pub use time::SimTime;
