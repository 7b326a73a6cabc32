use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// Onboard generator that recharges the battery while driving.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeExtenderParams {
    pub power_w: f64,
    pub soc_on: f64,
    pub soc_off: f64,
    /// Liters of fuel per kWh of electric output.
    pub specific_fuel_rate_l_per_kwh: f64,
}

/// Physical constants of one vehicle model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    pub mass_kg: f64,
    pub drag_coefficient: f64,
    pub frontal_area_m2: f64,
    pub rolling_coefficient: f64,
    pub drivetrain_efficiency: f64,
    pub recuperation_efficiency: f64,
    pub max_recuperation_power_w: f64,
    /// Constant hotel load, drawn while driving.
    pub auxiliary_power_w: f64,
    pub battery_capacity_wh: f64,
    pub max_charging_power_w: f64,
    /// Grid-to-battery efficiency at the plug.
    pub charging_efficiency: f64,
    pub max_acceleration_mps2: f64,
    /// Positive magnitude.
    pub max_deceleration_mps2: f64,
    pub range_extender: Option<RangeExtenderParams>,
}

impl VehicleParams {
    /// Compact urban car used by the bundled scenario. Configuration values, not measurements.
    pub fn reference() -> Self {
        Self {
            mass_kg: 1500.0,
            drag_coefficient: 0.3,
            frontal_area_m2: 2.2,
            rolling_coefficient: 0.01,
            drivetrain_efficiency: 0.9,
            recuperation_efficiency: 0.6,
            max_recuperation_power_w: 30_000.0,
            auxiliary_power_w: 300.0,
            battery_capacity_wh: 18_000.0,
            max_charging_power_w: 3_600.0,
            charging_efficiency: 1.0,
            max_acceleration_mps2: 1.0,
            max_deceleration_mps2: 1.5,
            range_extender: Some(RangeExtenderParams { power_w: 15_000.0, soc_on: 0.20, soc_off: 0.40, specific_fuel_rate_l_per_kwh: 0.3 }),
        }
    }

    /// Reference car with a battery too large to ever run out.
    pub fn infinite_battery() -> Self {
        Self { battery_capacity_wh: 1e9, ..Self::reference() }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "reference" => Some(Self::reference()),
            "infinite_battery" => Some(Self::infinite_battery()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("mass_kg", self.mass_kg),
            ("drag_coefficient", self.drag_coefficient),
            ("frontal_area_m2", self.frontal_area_m2),
            ("rolling_coefficient", self.rolling_coefficient),
            ("max_recuperation_power_w", self.max_recuperation_power_w),
            ("auxiliary_power_w", self.auxiliary_power_w),
            ("battery_capacity_wh", self.battery_capacity_wh),
            ("max_charging_power_w", self.max_charging_power_w),
            ("max_acceleration_mps2", self.max_acceleration_mps2),
            ("max_deceleration_mps2", self.max_deceleration_mps2),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(DynamicsError::InvalidParam { field, reason: format!("must be positive, got {value}") });
            }
        }
        let efficiencies = [
            ("drivetrain_efficiency", self.drivetrain_efficiency),
            ("recuperation_efficiency", self.recuperation_efficiency),
            ("charging_efficiency", self.charging_efficiency),
        ];
        for (field, value) in efficiencies {
            if !(value > 0.0 && value <= 1.0) {
                return Err(DynamicsError::InvalidParam { field, reason: format!("must lie in (0, 1], got {value}") });
            }
        }
        if let Some(re) = &self.range_extender {
            if !(re.power_w.is_finite() && re.power_w > 0.0) {
                return Err(DynamicsError::InvalidParam {
                    field: "range_extender.power_w",
                    reason: format!("must be positive, got {}", re.power_w),
                });
            }
            if !(re.specific_fuel_rate_l_per_kwh.is_finite() && re.specific_fuel_rate_l_per_kwh > 0.0) {
                return Err(DynamicsError::InvalidParam {
                    field: "range_extender.specific_fuel_rate_l_per_kwh",
                    reason: format!("must be positive, got {}", re.specific_fuel_rate_l_per_kwh),
                });
            }
            if !(0.0 <= re.soc_on && re.soc_on < re.soc_off && re.soc_off <= 1.0) {
                return Err(DynamicsError::InvalidParam {
                    field: "range_extender",
                    reason: format!("need 0 <= soc_on < soc_off <= 1, got soc_on={} soc_off={}", re.soc_on, re.soc_off),
                });
            }
        }
        Ok(())
    }
}

/// Constants for the resistance terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Environment {
    pub gravity_mps2: f64,
    pub air_density_kgpm3: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Self { gravity_mps2: 9.81, air_density_kgpm3: 1.2 }
    }
}

impl Environment {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        for (field, value) in [("gravity_mps2", self.gravity_mps2), ("air_density_kgpm3", self.air_density_kgpm3)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(DynamicsError::InvalidParam { field, reason: format!("must be positive, got {value}") });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        VehicleParams::reference().validate().unwrap();
        VehicleParams::infinite_battery().validate().unwrap();
        Environment::default().validate().unwrap();
        assert!(VehicleParams::preset("nope").is_none());
    }

    #[test]
    fn rejects_inverted_hysteresis() {
        let mut p = VehicleParams::reference();
        p.range_extender.as_mut().unwrap().soc_on = 0.5;
        let err = p.validate().unwrap_err();
        assert!(matches!(err, DynamicsError::InvalidParam { field: "range_extender", .. }));
    }

    #[test]
    fn rejects_efficiency_out_of_range() {
        let p = VehicleParams { drivetrain_efficiency: 1.2, ..VehicleParams::reference() };
        assert!(p.validate().is_err());
    }
}
