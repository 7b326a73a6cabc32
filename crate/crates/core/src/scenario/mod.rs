//! Scenario files, single runs and parameter sweeps.

mod config;
mod sweep;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::charging::ChargingManager;
use crate::engine::{Aborted, Engine, SimulationSummary};
use crate::fleet::{generate_day_schedule, ControlCenter, FleetState, HighestSoc, SimError, SimEvent};
use crate::metrics::{FileEntry, Manifest, ManifestInfo, MetricsCollector, MetricsError, TripStatus};
use crate::time::SimTime;

pub use config::{
    ConfigIssue, DemandConfig, DepotConfig, FleetConfig, NetworkConfig, NumericsConfig, PolicyConfig, RangeExtenderOverrides, Resolved,
    ScenarioConfig, SlotConfig, StationConfig, VehicleOverrides, SCHEMA_VERSION,
};
pub use sweep::{sweep, SweepParam, SweepRow, SWEEP_HEADER};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid scenario:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<ConfigIssue>),
    #[error("{0:?} is not sweepable; use fleet.size, stations.count, stations.slot_power or stations.max_simultaneous")]
    NotSweepable(String),
    #[error("sweep value {value} for {param}: {reason}")]
    BadSweepValue { param: String, value: f64, reason: String },
    #[error("simulation failed: {0}")]
    Model(#[from] Aborted<SimError>),
    #[error("setup failed: {0}")]
    Setup(SimError),
    #[error("output: {0}")]
    Output(#[from] MetricsError),
    #[error("output {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ScenarioError {
    /// 1 configuration, 2 model, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Read { .. }
            | ScenarioError::Parse { .. }
            | ScenarioError::Invalid(_)
            | ScenarioError::NotSweepable(_)
            | ScenarioError::BadSweepValue { .. } => 1,
            ScenarioError::Model(a) if matches!(a.source, SimError::Io(_) | SimError::Metrics(_)) => 3,
            ScenarioError::Model(_) | ScenarioError::Setup(_) => 2,
            ScenarioError::Output(_) | ScenarioError::Write { .. } => 3,
        }
    }
}

/// A parsed scenario and the directory its relative paths refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Read { path: path.into(), source })?;
        let config = ScenarioConfig::from_toml(&text).map_err(|e| ScenarioError::Parse { path: path.into(), message: e.to_string() })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    pub fn resolve(&self) -> Result<Resolved, ScenarioError> {
        self.config.resolve(&self.base_dir).map_err(ScenarioError::Invalid)
    }

    /// Hex SHA-256 of the effective configuration.
    pub fn config_hash(&self) -> String {
        Sha256::digest(self.config.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses and validates a scenario file; returns the effective configuration
/// with all defaults filled in.
pub fn validate_config(path: &Path) -> Result<String, ScenarioError> {
    let scenario = Scenario::load(path)?;
    scenario.resolve()?;
    Ok(scenario.config.to_toml())
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    /// Where to write the CSV files and manifest; nothing is written if unset.
    pub out_dir: Option<PathBuf>,
    pub event_log: bool,
}

pub struct RunReport {
    pub seed: u64,
    pub summary: SimulationSummary,
    pub metrics: MetricsCollector,
    pub manifest: Option<Manifest>,
    pub histogram_edges: Vec<f64>,
    pub utilization_bin_s: f64,
    pub capacity_wh: f64,
}

impl RunReport {
    pub fn min_idle(&self) -> u32 {
        crate::metrics::unused_vehicles_series(
            &self.metrics.transitions,
            self.metrics.fleet_size(),
            self.metrics.end,
            self.utilization_bin_s,
        )
        .min_idle()
    }

    pub fn n_stranded(&self) -> usize {
        self.metrics.transitions.iter().filter(|t| t.to == crate::fleet::Lifecycle::Stranded).count()
    }

    /// Trips that waited for a vehicle or never got one before the end.
    pub fn n_delayed(&self) -> usize {
        let end = self.metrics.end.as_secs_f64();
        self.metrics
            .trips
            .iter()
            .filter(|t| match t.status {
                TripStatus::Rejected => false,
                TripStatus::Pending => t.depart_t <= end,
                _ => t.delay_s.is_some_and(|d| d > 0.0),
            })
            .count()
    }

    pub fn mean_wait_s(&self) -> f64 {
        let s = &self.metrics.sessions;
        if s.is_empty() {
            0.0
        } else {
            s.iter().map(|r| r.wait_s()).sum::<f64>() / s.len() as f64
        }
    }
}

fn create(path: &Path) -> Result<File, ScenarioError> {
    File::create(path).map_err(|source| ScenarioError::Write { path: path.into(), source })
}

/// Builds every module from the scenario, runs it to the horizon and exports
/// the results.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport, ScenarioError> {
    let started = Instant::now();
    let mut scenario = scenario.clone();
    if let Some(seed) = opts.seed {
        scenario.config.seed = seed;
    }
    let cfg = &scenario.config;
    let r = scenario.resolve()?;

    let trips =
        generate_day_schedule(cfg.seed, &r.profile, cfg.schedule_sources(), cfg.demand.days, &r.net, &r.depot, cfg.policies.routing_weight);
    let fleet = FleetState::new(r.depot, cfg.fleet.size, cfg.fleet.initial_soc);
    let chargers = ChargingManager::new(r.stations.clone(), cfg.policies.divert());

    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir).map_err(|source| ScenarioError::Write { path: dir.clone(), source })?;
    }
    let metrics = match &opts.out_dir {
        Some(dir) => MetricsCollector::new(cfg.fleet.size, Box::new(create(&dir.join("ticks.csv"))?), cfg.numerics.tick_buffer_bytes)?,
        None => MetricsCollector::discarding(cfg.fleet.size),
    };
    let mut engine = Engine::<SimEvent>::new();
    if opts.event_log {
        if let Some(dir) = &opts.out_dir {
            let path = dir.join("events.csv");
            engine =
                engine.with_event_log(Box::new(BufWriter::new(create(&path)?))).map_err(|source| ScenarioError::Write { path, source })?;
        }
    }

    let horizon = SimTime::from_secs_f64(cfg.horizon_s);
    let mut cc = ControlCenter::new(
        &r.net,
        r.params.clone(),
        cfg.environment,
        cfg.policies.policies(),
        cfg.numerics.numerics(),
        horizon,
        fleet,
        trips,
        chargers,
        Box::new(HighestSoc),
        metrics,
    );
    cc.prime(engine.scheduler()).map_err(ScenarioError::Setup)?;
    let summary = engine.run_until(horizon, &mut cc)?;
    log::info!("{summary}");
    let mut metrics = cc.finish(horizon);

    let mut manifest = None;
    if let Some(dir) = &opts.out_dir {
        let mut extra_files = Vec::new();
        if opts.event_log {
            let path = dir.join("events.csv");
            engine.flush_log().map_err(|source| ScenarioError::Write { path, source })?;
            extra_files.push(FileEntry { name: "events.csv".into(), rows: summary.dispatched });
        }
        let info = ManifestInfo {
            seed: cfg.seed,
            config_sha256: scenario.config_hash(),
            wall_clock_s: started.elapsed().as_secs_f64(),
            extra_files,
        };
        manifest = Some(metrics.export_all(dir, &r.histogram_edges, cfg.numerics.utilization_bin_s, info)?);
    }
    Ok(RunReport {
        seed: cfg.seed,
        summary,
        metrics,
        manifest,
        histogram_edges: r.histogram_edges,
        utilization_bin_s: cfg.numerics.utilization_bin_s,
        capacity_wh: r.params.battery_capacity_wh,
    })
}
