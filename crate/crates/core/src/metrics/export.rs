//! CSV exporters and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::analysis::{distance_histogram, state_durations, unused_vehicles_series};
use super::{MetricsCollector, MetricsError};

pub const TRIPS_HEADER: [&str; 9] =
    ["trip_id", "vehicle_id", "depart_t", "airline_m", "driven_out_m", "driven_return_m", "dwell_s", "delay_s", "status"];
pub const SESSIONS_HEADER: [&str; 7] = ["station_id", "slot_id", "vehicle_id", "enqueue_t", "grant_t", "complete_t", "energy_wh"];
pub const SUMMARY_HEADER: [&str; 12] = [
    "vehicle_id",
    "consumed_wh",
    "recuperated_wh",
    "range_extended_wh",
    "grid_charged_wh",
    "fuel_l",
    "distance_m",
    "n_trips",
    "idle_s",
    "charging_s",
    "queued_s",
    "driving_s",
];
pub const UTILIZATION_HEADER: [&str; 7] = ["bin_start_s", "bin_end_s", "idle", "busy", "charging", "queued", "stranded"];
pub const HISTOGRAM_HEADER: [&str; 4] = ["bin_lower_m", "bin_upper_m", "airline_count", "driven_count"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub name: String,
    /// Data rows, header excluded.
    pub rows: u64,
}

/// Run identification written next to the data files.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestInfo {
    pub seed: u64,
    pub config_sha256: String,
    pub wall_clock_s: f64,
    /// Files written elsewhere, such as the event log.
    pub extra_files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub wall_clock_s: f64,
    pub files: Vec<FileEntry>,
}

#[derive(Serialize)]
struct SummaryRow {
    vehicle_id: u32,
    consumed_wh: f64,
    recuperated_wh: f64,
    range_extended_wh: f64,
    grid_charged_wh: f64,
    fuel_l: f64,
    distance_m: f64,
    n_trips: u32,
    idle_s: f64,
    charging_s: f64,
    queued_s: f64,
    driving_s: f64,
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<u64, MetricsError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    let mut n = 0;
    for row in rows {
        w.serialize(row)?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}

impl MetricsCollector {
    /// Writes the five in-memory tables plus `manifest.json` into `out_dir`
    /// and flushes the streamed tick file, which is expected at
    /// `out_dir/ticks.csv`.
    pub fn export_all(
        &mut self,
        out_dir: &Path,
        histogram_edges: &[f64],
        utilization_bin_s: f64,
        info: ManifestInfo,
    ) -> Result<Manifest, MetricsError> {
        self.flush_ticks()?;
        let mut files = vec![FileEntry { name: "ticks.csv".into(), rows: self.tick_rows() }];

        let n = write_csv(&out_dir.join("trips.csv"), &TRIPS_HEADER, &self.trips)?;
        files.push(FileEntry { name: "trips.csv".into(), rows: n });

        let n = write_csv(&out_dir.join("sessions.csv"), &SESSIONS_HEADER, &self.sessions)?;
        files.push(FileEntry { name: "sessions.csv".into(), rows: n });

        let durations = state_durations(&self.transitions, self.fleet_size(), self.end);
        let summary = self.vehicles.iter().zip(&durations).map(|(v, d)| SummaryRow {
            vehicle_id: v.vehicle.0,
            consumed_wh: v.energy.consumed_wh,
            recuperated_wh: v.energy.recuperated_wh,
            range_extended_wh: v.energy.range_extended_wh,
            grid_charged_wh: v.grid_charged_wh,
            fuel_l: v.energy.fuel_l,
            distance_m: v.energy.distance_m,
            n_trips: v.n_trips,
            idle_s: d.idle_s,
            charging_s: d.charging_s,
            queued_s: d.queued_s,
            driving_s: d.driving_s,
        });
        let n = write_csv(&out_dir.join("summary.csv"), &SUMMARY_HEADER, summary)?;
        files.push(FileEntry { name: "summary.csv".into(), rows: n });

        let series = unused_vehicles_series(&self.transitions, self.fleet_size(), self.end, utilization_bin_s);
        let n = write_csv(&out_dir.join("utilization.csv"), &UTILIZATION_HEADER, &series.rows)?;
        files.push(FileEntry { name: "utilization.csv".into(), rows: n });

        let hist = distance_histogram(&self.trips, histogram_edges);
        let rows = hist.bins().into_iter().zip(hist.airline.iter().zip(&hist.driven)).map(|((lo, hi), (a, d))| (lo, hi, *a, *d));
        let n = write_csv(&out_dir.join("histogram.csv"), &HISTOGRAM_HEADER, rows)?;
        files.push(FileEntry { name: "histogram.csv".into(), rows: n });

        files.extend(info.extra_files);
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: info.seed,
            config_sha256: info.config_sha256,
            wall_clock_s: info.wall_clock_s,
            files,
        };
        let mut f = BufWriter::new(File::create(out_dir.join("manifest.json"))?);
        serde_json::to_writer_pretty(&mut f, &manifest)?;
        writeln!(f)?;
        f.flush()?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::SimTime;

    fn info() -> ManifestInfo {
        ManifestInfo { seed: 1, config_sha256: "00".into(), wall_clock_s: 0.0, extra_files: vec![] }
    }

    #[test]
    fn empty_run_writes_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let sink = File::create(dir.path().join("ticks.csv")).unwrap();
        let mut m = MetricsCollector::new(0, Box::new(sink), 1024).unwrap();
        m.end = SimTime::ZERO;
        let manifest = m.export_all(dir.path(), &[0.0, 1000.0], 900.0, info()).unwrap();
        assert_eq!(manifest.files.len(), 6);
        for f in &manifest.files {
            let text = std::fs::read_to_string(dir.path().join(&f.name)).unwrap();
            assert_eq!(text.lines().count() as u64, 1 + f.rows, "{}", f.name);
        }
        assert_eq!(manifest.files.iter().find(|f| f.name == "histogram.csv").unwrap().rows, 2);
        let hist = std::fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
        assert!(hist.lines().nth(2).unwrap().starts_with("1000.0,inf,0,0"));
    }
}
