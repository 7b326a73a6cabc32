//! One independent run per parameter value, aggregated into one table.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::{run_scenario, RunOptions, RunReport, Scenario, ScenarioError, SlotConfig};

pub const SWEEP_HEADER: [&str; 7] = ["value", "min_idle", "mean_wait_s", "n_stranded", "n_delayed", "total_grid_wh", "total_fuel_l"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    FleetSize,
    /// Keeps the first `n` configured stations.
    StationCount,
    /// Sets every slot of every station to this power.
    SlotPower,
    MaxSimultaneous,
}

impl FromStr for SweepParam {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fleet.size" => Ok(SweepParam::FleetSize),
            "stations.count" => Ok(SweepParam::StationCount),
            "stations.slot_power" => Ok(SweepParam::SlotPower),
            "stations.max_simultaneous" => Ok(SweepParam::MaxSimultaneous),
            other => Err(ScenarioError::NotSweepable(other.to_string())),
        }
    }
}

impl SweepParam {
    pub fn key(&self) -> &'static str {
        match self {
            SweepParam::FleetSize => "fleet.size",
            SweepParam::StationCount => "stations.count",
            SweepParam::SlotPower => "stations.slot_power",
            SweepParam::MaxSimultaneous => "stations.max_simultaneous",
        }
    }

    /// The scenario with this parameter set to `value`. Fleet-size changes
    /// keep the number of demand sources, so every run sees the same trips.
    pub fn apply(&self, scenario: &Scenario, value: f64) -> Result<Scenario, ScenarioError> {
        let bad = |reason: &str| ScenarioError::BadSweepValue { param: self.key().into(), value, reason: reason.into() };
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as u32)
            } else {
                Err(bad("must be a non-negative integer"))
            }
        };
        let mut s = scenario.clone();
        let c = &mut s.config;
        match self {
            SweepParam::FleetSize => {
                c.demand.schedule_sources = Some(scenario.config.schedule_sources());
                c.fleet.size = count()?;
            }
            SweepParam::StationCount => {
                let n = count()? as usize;
                if n > c.stations.len() {
                    return Err(bad(&format!("only {} stations configured", c.stations.len())));
                }
                c.stations.truncate(n);
            }
            SweepParam::SlotPower => {
                if !(value.is_finite() && value > 0.0) {
                    return Err(bad("must be positive"));
                }
                for slot in c.stations.iter_mut().flat_map(|st| st.slots.iter_mut()) {
                    *slot = SlotConfig { plug: "custom".into(), power_w: Some(value) };
                }
            }
            SweepParam::MaxSimultaneous => {
                let k = count()? as usize;
                for st in &mut c.stations {
                    st.max_simultaneous = k;
                }
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub min_idle: u32,
    pub mean_wait_s: f64,
    pub n_stranded: usize,
    pub n_delayed: usize,
    pub total_grid_wh: f64,
    pub total_fuel_l: f64,
}

impl SweepRow {
    pub fn from_report(value: f64, r: &RunReport) -> Self {
        Self {
            value,
            min_idle: r.min_idle(),
            mean_wait_s: r.mean_wait_s(),
            n_stranded: r.n_stranded(),
            n_delayed: r.n_delayed(),
            total_grid_wh: r.metrics.vehicles.iter().map(|v| v.grid_charged_wh).sum(),
            total_fuel_l: r.metrics.vehicles.iter().map(|v| v.energy.fuel_l).sum(),
        }
    }
}

/// Runs every value in parallel with the scenario seed and, if `out_dir` is
/// given, writes `sweep.csv` there. Rows follow the order of `values`.
pub fn sweep(scenario: &Scenario, param: SweepParam, values: &[f64], out_dir: Option<&Path>) -> Result<Vec<SweepRow>, ScenarioError> {
    let variants = values.iter().map(|&v| param.apply(scenario, v).map(|s| (v, s))).collect::<Result<Vec<_>, _>>()?;
    for (_, s) in &variants {
        s.resolve()?;
    }
    let rows = variants
        .par_iter()
        .map(|(v, s)| run_scenario(s, &RunOptions::default()).map(|r| SweepRow::from_report(*v, &r)))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(dir) = out_dir {
        let path = dir.join("sweep.csv");
        let werr = |source| ScenarioError::Write { path: path.clone(), source };
        std::fs::create_dir_all(dir).map_err(werr)?;
        let file = File::create(&path).map_err(werr)?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
        let csv_err = |e: csv::Error| ScenarioError::Output(e.into());
        w.write_record(SWEEP_HEADER).map_err(csv_err)?;
        for row in &rows {
            w.serialize(row).map_err(csv_err)?;
        }
        w.flush().map_err(werr)?;
    }
    Ok(rows)
}
