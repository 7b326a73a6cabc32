//! Instantaneous power flows and SOC integration.

use super::{Environment, RangeExtenderParams, VehicleParams};

/// Joules per kWh.
pub const J_PER_KWH: f64 = 3.6e6;

/// Signed wheel power: inertia, gradient, rolling and aerodynamic terms times `v`.
///
/// Positive values are propulsion demand, negative values are braking surplus.
/// Rolling resistance only applies while moving.
pub fn traction_power(v: f64, a: f64, gradient: f64, params: &VehicleParams, env: &Environment) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let theta = gradient.atan();
    let m = params.mass_kg;
    let g = env.gravity_mps2;
    let inertia = m * a;
    let climbing = m * g * theta.sin();
    let rolling = params.rolling_coefficient * m * g * theta.cos();
    let aero = 0.5 * env.air_density_kgpm3 * params.drag_coefficient * params.frontal_area_m2 * v * v;
    (inertia + climbing + rolling + aero) * v
}

/// Battery-side split of a wheel power demand.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatteryFlow {
    /// Discharge for traction plus the auxiliary load.
    pub consumption_w: f64,
    /// Inflow from recuperation, after efficiency and cap.
    pub recuperation_w: f64,
}

impl BatteryFlow {
    /// Signed terminal power, positive = discharge.
    pub fn battery_w(&self) -> f64 {
        self.consumption_w - self.recuperation_w
    }
}

pub fn battery_flow(p_traction: f64, params: &VehicleParams) -> BatteryFlow {
    if p_traction >= 0.0 {
        BatteryFlow { consumption_w: p_traction / params.drivetrain_efficiency + params.auxiliary_power_w, recuperation_w: 0.0 }
    } else {
        BatteryFlow {
            consumption_w: params.auxiliary_power_w,
            recuperation_w: (-p_traction * params.recuperation_efficiency).min(params.max_recuperation_power_w),
        }
    }
}

/// Signed battery terminal power for a wheel power; positive = discharge.
pub fn battery_power(p_traction: f64, params: &VehicleParams) -> f64 {
    battery_flow(p_traction, params).battery_w()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RangeExtenderOutput {
    pub power_w: f64,
    pub fuel_l: f64,
    pub on: bool,
}

/// Relay hysteresis: on below `soc_on`, off at or above `soc_off`, otherwise unchanged.
pub fn range_extender_flag(re: &RangeExtenderParams, soc: f64, was_on: bool) -> bool {
    if soc >= re.soc_off {
        false
    } else if soc < re.soc_on {
        true
    } else {
        was_on
    }
}

/// One step of the range extender. Never runs unless the vehicle is driving.
pub fn range_extender_step(soc: f64, was_on: bool, driving: bool, params: &VehicleParams, dt: f64) -> RangeExtenderOutput {
    let Some(re) = params.range_extender.as_ref() else {
        return RangeExtenderOutput::default();
    };
    if !driving {
        return RangeExtenderOutput::default();
    }
    let on = range_extender_flag(re, soc, was_on);
    if !on {
        return RangeExtenderOutput { on, ..Default::default() };
    }
    RangeExtenderOutput { power_w: re.power_w, fuel_l: re.specific_fuel_rate_l_per_kwh * re.power_w * dt / J_PER_KWH, on }
}

/// `soc - p * dt / (capacity * 3600)`, clamped to `[0, 1]`.
pub fn integrate_soc(soc: f64, p_battery_net: f64, dt: f64, capacity_wh: f64) -> f64 {
    (soc - p_battery_net * dt / (capacity_wh * 3600.0)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car() -> VehicleParams {
        VehicleParams { auxiliary_power_w: 200.0, ..VehicleParams::reference() }
    }

    #[test]
    fn traction_power_values() {
        let p = car();
        let env = Environment::default();
        assert_eq!(traction_power(0.0, 3.0, 0.1, &p, &env), 0.0);
        // (0.01*1500*9.81 + 0.5*1.2*0.3*2.2*20^2) * 20, evaluated independently
        assert!((traction_power(20.0, 0.0, 0.0, &p, &env) - 6111.0).abs() < 1e-9);
        let coasting = traction_power(20.0, -1.0, 0.0, &p, &env);
        assert!((coasting - -23_889.0).abs() < 1e-9);
    }

    #[test]
    fn battery_power_branches() {
        let mut p = car();
        assert_eq!(battery_power(0.0, &p), 200.0);
        p.auxiliary_power_w = 0.0;
        p.recuperation_efficiency = 0.6;
        p.max_recuperation_power_w = 30_000.0;
        assert!((battery_power(-10_000.0, &p) - -6_000.0).abs() < 1e-9);
        assert_eq!(battery_power(-100_000.0, &p), -30_000.0);
        p.drivetrain_efficiency = 0.8;
        assert_eq!(battery_power(8_000.0, &p), 10_000.0);
    }

    #[test]
    fn range_extender_hysteresis() {
        let p = car();
        let re = p.range_extender.as_ref().unwrap();
        assert_eq!((re.soc_on, re.soc_off), (0.2, 0.4));
        let off = range_extender_step(0.5, false, true, &p, 1.0);
        assert_eq!(off, RangeExtenderOutput::default());
        let on = range_extender_step(0.15, false, true, &p, 1.0);
        assert!(on.on);
        assert_eq!(on.power_w, re.power_w);
        assert!((on.fuel_l - 0.3 * 15_000.0 / 3.6e6).abs() < 1e-15);
        assert!(range_extender_step(0.3, true, true, &p, 1.0).on);
        assert!(!range_extender_step(0.3, false, true, &p, 1.0).on);
        assert!(!range_extender_step(0.4, true, true, &p, 1.0).on);
        assert!(!range_extender_step(0.1, true, false, &p, 1.0).on);
    }

    #[test]
    fn integrate_soc_values() {
        assert_eq!(integrate_soc(0.5, 0.0, 1.0, 18_000.0), 0.5);
        assert_eq!(integrate_soc(0.5, 18_000.0, 3600.0, 18_000.0), 0.0);
        assert!((integrate_soc(0.5, -3600.0, 1800.0, 18_000.0) - 0.6).abs() < 1e-15);
        assert_eq!(integrate_soc(0.99, -1e6, 3600.0, 18_000.0), 1.0);
    }
}
