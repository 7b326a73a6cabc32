use std::io::Write;

use super::DriveTrace;
use crate::network::RoadNetwork;
use crate::time::SimTime;

pub const DRIVE_TRACE_HEADER: &str = "time_s,vehicle_id,edge_id,v_mps,a_mps2,gradient,p_traction_w,p_battery_w,p_recup_w,p_re_w,soc";

/// Writes traces as CSV. Each entry carries the absolute segment start time
/// and the vehicle id.
pub fn write_drive_traces<W: Write>(out: W, net: &RoadNetwork, traces: &[(SimTime, u32, &DriveTrace)]) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(DRIVE_TRACE_HEADER.split(','))?;
    for (start, vehicle, trace) in traces {
        let edge = net.edge_name(trace.edge);
        for s in &trace.samples {
            wtr.write_record([
                format!("{:.3}", start.as_secs_f64() + s.t_s),
                vehicle.to_string(),
                edge.to_string(),
                format!("{:.4}", s.v_mps),
                format!("{:.4}", s.a_mps2),
                format!("{}", s.gradient),
                format!("{:.3}", s.p_traction_w),
                format!("{:.3}", s.p_battery_w),
                format!("{:.3}", s.p_recup_w),
                format!("{:.3}", s.p_re_w),
                format!("{:.9}", s.soc),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{drive_segment, Environment, Segment, VehicleParams, VehicleState};
    use crate::network::generate_grid;

    #[test]
    fn one_row_per_sample() {
        let net = generate_grid(2, 2, 100.0, 10.0).unwrap();
        let e = net.edge_by_name("r0c0-r0c1").unwrap();
        let mut state = VehicleState::parked(0.9);
        let out = drive_segment(
            &mut state,
            &Segment::from_network(&net, e, 0),
            0.0,
            0.0,
            &VehicleParams::reference(),
            &Environment::default(),
            1.0,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_drive_traces(&mut buf, &net, &[(SimTime::from_secs(60), 4, &out.trace)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], DRIVE_TRACE_HEADER);
        assert_eq!(lines.len(), out.trace.samples.len() + 1);
        assert!(lines[1].starts_with("61.000,4,r0c0-r0c1,"));
    }
}
