//! Trapezoidal drive profiles and the per-step energy chain along an edge.

use serde::Serialize;

use super::power::{battery_flow, range_extender_flag, range_extender_step, traction_power};
use super::{DynamicsError, Environment, VehicleParams};
use crate::network::{EdgeId, RoadNetwork};

/// Running energy and distance totals. Every field is non-decreasing except
/// `traction_wh`, which is the signed wheel work.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyTotals {
    pub consumed_wh: f64,
    pub recuperated_wh: f64,
    pub range_extended_wh: f64,
    pub fuel_l: f64,
    pub distance_m: f64,
    pub traction_wh: f64,
}

impl EnergyTotals {
    pub fn add(&mut self, other: &EnergyTotals) {
        self.consumed_wh += other.consumed_wh;
        self.recuperated_wh += other.recuperated_wh;
        self.range_extended_wh += other.range_extended_wh;
        self.fuel_l += other.fuel_l;
        self.distance_m += other.distance_m;
        self.traction_wh += other.traction_wh;
    }

    /// Net battery draw: consumption minus every inflow.
    pub fn net_battery_wh(&self) -> f64 {
        self.consumed_wh - self.recuperated_wh - self.range_extended_wh
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub soc: f64,
    pub velocity: f64,
    /// Edge and offset along it, once the vehicle has driven.
    pub position: Option<(EdgeId, f64)>,
    pub range_extender_on: bool,
    pub cumulative: EnergyTotals,
}

impl VehicleState {
    pub fn parked(soc: f64) -> Self {
        Self { soc, velocity: 0.0, position: None, range_extender_on: false, cumulative: EnergyTotals::default() }
    }
}

/// One integration step, stamped at its end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceSample {
    /// Seconds since the start of the segment.
    pub t_s: f64,
    pub v_mps: f64,
    /// Mean acceleration over the step.
    pub a_mps2: f64,
    pub gradient: f64,
    pub offset_m: f64,
    pub p_traction_w: f64,
    /// Terminal power before the range extender, positive = discharge.
    pub p_battery_w: f64,
    pub p_recup_w: f64,
    pub p_re_w: f64,
    pub soc: f64,
    pub re_on: bool,
}

impl TraceSample {
    pub fn p_battery_net_w(&self) -> f64 {
        self.p_battery_w - self.p_re_w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveTrace {
    pub edge: EdgeId,
    pub v_entry: f64,
    pub soc_entry: f64,
    pub samples: Vec<TraceSample>,
}

impl DriveTrace {
    /// Last sample at or before `t_s`, if any.
    pub fn sample_at(&self, t_s: f64) -> Option<&TraceSample> {
        let idx = self.samples.partition_point(|s| s.t_s <= t_s);
        idx.checked_sub(1).map(|i| &self.samples[i])
    }
}

/// Edge geometry and speed as seen by the driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub edge: EdgeId,
    pub length_m: f64,
    pub gradient: f64,
    /// Speed limit times congestion factor.
    pub cruise_mps: f64,
}

impl Segment {
    pub fn from_network(net: &RoadNetwork, edge: EdgeId, hour: usize) -> Self {
        let e = net.edge(edge);
        Self { edge, length_m: e.length_m, gradient: e.gradient, cruise_mps: net.effective_speed(edge, hour) }
    }
}

/// Accelerate, cruise, decelerate. The cruise phase may be empty (triangular).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedProfile {
    pub v_entry: f64,
    pub v_peak: f64,
    pub v_exit: f64,
    pub accel: f64,
    pub decel: f64,
    pub length_m: f64,
    t_accel: f64,
    t_cruise: f64,
    t_decel: f64,
    d_accel: f64,
    d_cruise: f64,
}

const SPEED_EPS: f64 = 1e-9;

impl SpeedProfile {
    pub fn new(length_m: f64, v_entry: f64, v_exit: f64, v_cruise: f64, accel: f64, decel: f64) -> Result<Self, String> {
        let d_acc_full = (v_cruise * v_cruise - v_entry * v_entry) / (2.0 * accel);
        let d_dec_full = (v_cruise * v_cruise - v_exit * v_exit) / (2.0 * decel);
        let v_peak = if d_acc_full + d_dec_full <= length_m {
            v_cruise
        } else {
            let vp2 = (2.0 * length_m + v_entry * v_entry / accel + v_exit * v_exit / decel) / (1.0 / accel + 1.0 / decel);
            let vp = vp2.max(0.0).sqrt();
            if vp + 1e-6 < v_entry {
                return Err(format!("cannot brake from {v_entry} m/s to {v_exit} m/s within {length_m} m"));
            }
            if vp + 1e-6 < v_exit {
                return Err(format!("cannot accelerate from {v_entry} m/s to {v_exit} m/s within {length_m} m"));
            }
            vp.max(v_entry).max(v_exit)
        };
        let t_accel = (v_peak - v_entry) / accel;
        let t_decel = (v_peak - v_exit) / decel;
        let d_accel = (v_peak * v_peak - v_entry * v_entry) / (2.0 * accel);
        let d_decel = (v_peak * v_peak - v_exit * v_exit) / (2.0 * decel);
        let d_cruise = (length_m - d_accel - d_decel).max(0.0);
        let t_cruise = if d_cruise > 0.0 { d_cruise / v_peak } else { 0.0 };
        Ok(Self { v_entry, v_peak, v_exit, accel, decel, length_m, t_accel, t_cruise, t_decel, d_accel, d_cruise })
    }

    pub fn duration(&self) -> f64 {
        self.t_accel + self.t_cruise + self.t_decel
    }

    pub fn velocity(&self, t: f64) -> f64 {
        if t <= self.t_accel {
            self.v_entry + self.accel * t.max(0.0)
        } else if t <= self.t_accel + self.t_cruise {
            self.v_peak
        } else {
            let td = (t - self.t_accel - self.t_cruise).min(self.t_decel);
            self.v_peak - self.decel * td
        }
    }

    pub fn position(&self, t: f64) -> f64 {
        if t >= self.duration() {
            return self.length_m;
        }
        let t = t.max(0.0);
        if t <= self.t_accel {
            self.v_entry * t + 0.5 * self.accel * t * t
        } else if t <= self.t_accel + self.t_cruise {
            self.d_accel + self.v_peak * (t - self.t_accel)
        } else {
            let td = t - self.t_accel - self.t_cruise;
            self.d_accel + self.d_cruise + self.v_peak * td - 0.5 * self.decel * td * td
        }
        .min(self.length_m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentOutcome {
    pub trace: DriveTrace,
    pub duration_s: f64,
    pub energy: EnergyTotals,
    pub stranded: bool,
}

/// Drives one edge from `v_entry` to `v_exit`, stepping the energy chain every `dt`.
///
/// Mutates `state` to the end of the segment (or the stranding point).
/// Recuperation and range-extender inflow are curtailed so the battery never
/// overfills; if the battery empties mid-step the step is truncated there.
pub fn drive_segment(
    state: &mut VehicleState,
    seg: &Segment,
    v_entry: f64,
    v_exit: f64,
    params: &VehicleParams,
    env: &Environment,
    dt: f64,
) -> Result<SegmentOutcome, DynamicsError> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(DynamicsError::InvalidStep(dt));
    }
    let infeasible = |reason: String| DynamicsError::Infeasible { edge: seg.edge, reason };
    if v_entry > seg.cruise_mps + SPEED_EPS || v_exit > seg.cruise_mps + SPEED_EPS || v_entry < 0.0 || v_exit < 0.0 {
        return Err(infeasible(format!("entry {v_entry} m/s / exit {v_exit} m/s outside [0, {}] m/s", seg.cruise_mps)));
    }
    let profile = SpeedProfile::new(
        seg.length_m,
        v_entry.min(seg.cruise_mps),
        v_exit.min(seg.cruise_mps),
        seg.cruise_mps,
        params.max_acceleration_mps2,
        params.max_deceleration_mps2,
    )
    .map_err(infeasible)?;

    let capacity_j = params.battery_capacity_wh * 3600.0;
    let total = profile.duration();
    let steps = ((total / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut trace = DriveTrace { edge: seg.edge, v_entry, soc_entry: state.soc, samples: Vec::with_capacity(steps) };
    let mut energy = EnergyTotals::default();
    let mut stranded = false;
    let mut elapsed = 0.0;

    for k in 0..steps {
        let t0 = k as f64 * dt;
        let t1 = if k + 1 == steps { total } else { (k + 1) as f64 * dt };
        let mut h = t1 - t0;
        if h <= 0.0 {
            break;
        }
        let (x0, x1) = (profile.position(t0), profile.position(t1));
        let (v0, mut v1) = (profile.velocity(t0), profile.velocity(t1));
        let mut dx = x1 - x0;
        let v_mean = dx / h;
        let a_mean = (v1 - v0) / h;

        let p_traction = traction_power(v_mean, a_mean, seg.gradient, params, env);
        let flow = battery_flow(p_traction, params);
        let re = range_extender_step(state.soc, state.range_extender_on, true, params, h);
        let mut recup_w = flow.recuperation_w;
        let mut re_w = re.power_w;
        let mut fuel_l = re.fuel_l;
        let net_w = flow.consumption_w - recup_w - re_w;
        let mut soc = state.soc - net_w * h / capacity_j;

        if soc > 1.0 {
            // battery full: shed recuperation first, then generator output
            let mut excess_w = (soc - 1.0) * capacity_j / h;
            let shed = excess_w.min(recup_w);
            recup_w -= shed;
            excess_w -= shed;
            if excess_w > 0.0 && re_w > 0.0 {
                let keep = (re_w - excess_w).max(0.0);
                fuel_l *= keep / re_w;
                re_w = keep;
            }
            soc = 1.0;
        } else if soc <= 0.0 && net_w > 0.0 {
            let fraction = (state.soc * capacity_j / (net_w * h)).clamp(0.0, 1.0);
            h *= fraction;
            fuel_l *= fraction;
            dx = profile.position(t0 + h) - x0;
            v1 = profile.velocity(t0 + h);
            soc = 0.0;
            stranded = true;
        }

        elapsed = t0 + h;
        let step = EnergyTotals {
            consumed_wh: flow.consumption_w * h / 3600.0,
            recuperated_wh: recup_w * h / 3600.0,
            range_extended_wh: re_w * h / 3600.0,
            fuel_l,
            distance_m: dx,
            traction_wh: p_traction * h / 3600.0,
        };
        energy.add(&step);
        state.soc = soc;
        state.range_extender_on = match params.range_extender.as_ref() {
            Some(cfg) => range_extender_flag(cfg, soc, re.on),
            None => false,
        };
        trace.samples.push(TraceSample {
            t_s: elapsed,
            v_mps: if stranded { 0.0 } else { v1 },
            a_mps2: a_mean,
            gradient: seg.gradient,
            offset_m: x0 + dx,
            p_traction_w: p_traction,
            p_battery_w: flow.consumption_w - recup_w,
            p_recup_w: recup_w,
            p_re_w: re_w,
            soc,
            re_on: state.range_extender_on,
        });
        if stranded {
            break;
        }
    }

    let offset = trace.samples.last().map_or(0.0, |s| s.offset_m);
    state.position = Some((seg.edge, if stranded { offset } else { seg.length_m }));
    state.velocity = if stranded { 0.0 } else { profile.v_exit };
    state.cumulative.add(&energy);
    if stranded {
        state.range_extender_on = false;
    }
    Ok(SegmentOutcome { trace, duration_s: elapsed, energy, stranded })
}

/// Entry/exit speeds for each edge of a leg that starts and ends at standstill.
#[derive(Debug, Clone, PartialEq)]
pub struct LegPlan {
    pub segments: Vec<(Segment, f64, f64)>,
}

impl LegPlan {
    /// Exit speeds are capped by the next edge's cruise speed, by what braking
    /// allows downstream and by what acceleration allows upstream.
    pub fn new(net: &RoadNetwork, edges: &[EdgeId], hour: usize, params: &VehicleParams) -> Self {
        let segs: Vec<Segment> = edges.iter().map(|&e| Segment::from_network(net, e, hour)).collect();
        let n = segs.len();
        let mut exit: Vec<f64> = (0..n).map(|i| if i + 1 < n { segs[i].cruise_mps.min(segs[i + 1].cruise_mps) } else { 0.0 }).collect();
        let (a, d) = (params.max_acceleration_mps2, params.max_deceleration_mps2);
        for i in (1..n).rev() {
            let max_entry = (exit[i] * exit[i] + 2.0 * d * segs[i].length_m).sqrt();
            exit[i - 1] = exit[i - 1].min(max_entry);
        }
        let mut entry = 0.0;
        let mut segments = Vec::with_capacity(n);
        for i in 0..n {
            let reachable = (entry * entry + 2.0 * a * segs[i].length_m).sqrt();
            exit[i] = exit[i].min(reachable);
            segments.push((segs[i], entry, exit[i]));
            entry = exit[i];
        }
        Self { segments }
    }

    pub fn length_m(&self) -> f64 {
        self.segments.iter().map(|(s, _, _)| s.length_m).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LegOutcome {
    pub duration_s: f64,
    pub energy: EnergyTotals,
    pub stranded: bool,
}

/// Drives a whole leg without recording traces.
pub fn simulate_leg(
    state: &mut VehicleState,
    plan: &LegPlan,
    params: &VehicleParams,
    env: &Environment,
    dt: f64,
) -> Result<LegOutcome, DynamicsError> {
    let mut out = LegOutcome::default();
    for (seg, v_in, v_out) in &plan.segments {
        let seg_out = drive_segment(state, seg, *v_in, *v_out, params, env, dt)?;
        out.duration_s += seg_out.duration_s;
        out.energy.add(&seg_out.energy);
        if seg_out.stranded {
            out.stranded = true;
            break;
        }
    }
    state.range_extender_on = false;
    Ok(out)
}
