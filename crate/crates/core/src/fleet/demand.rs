//! Empirical trip-demand distributions.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::{LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use super::FleetError;

/// One distance bin: `(lower, upper]` meters with a relative weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBin {
    pub upper_m: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DwellDistribution {
    /// `ln(seconds) ~ N(mu, sigma)`, truncated at `max_s`.
    LogNormal {
        mu: f64,
        sigma: f64,
        max_s: f64,
    },
    Fixed {
        seconds: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TripsPerDay {
    Fixed { count: u32 },
    Poisson { mean: f64, max: u32 },
}

/// Where and when jobs happen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandProfile {
    /// Relative departure weight for each hour of the day.
    pub departure_weights: [f64; 24],
    /// Lower edge of the first distance bin.
    #[serde(default)]
    pub distance_min_m: f64,
    pub distance_bins: Vec<DistanceBin>,
    pub dwell: DwellDistribution,
    pub trips_per_day: TripsPerDay,
}

impl DemandProfile {
    /// Synthetic weekday profile for a company fleet: departures peak in the
    /// morning and early afternoon, most jobs lie within 5 km. Not derived from
    /// real fleet data.
    pub fn synthetic_company() -> Self {
        let mut departure_weights = [0.0; 24];
        for (h, w) in
            [(6, 1.0), (7, 4.0), (8, 8.0), (9, 9.0), (10, 8.0), (11, 6.0), (12, 4.0), (13, 6.0), (14, 7.0), (15, 5.0), (16, 3.0), (17, 1.0)]
        {
            departure_weights[h] = w;
        }
        Self {
            departure_weights,
            distance_min_m: 0.0,
            distance_bins: vec![
                DistanceBin { upper_m: 1000.0, weight: 3.0 },
                DistanceBin { upper_m: 2000.0, weight: 5.0 },
                DistanceBin { upper_m: 3000.0, weight: 4.0 },
                DistanceBin { upper_m: 4000.0, weight: 2.0 },
                DistanceBin { upper_m: 6000.0, weight: 1.0 },
            ],
            dwell: DwellDistribution::LogNormal { mu: 7.6, sigma: 0.6, max_s: 4.0 * 3600.0 },
            trips_per_day: TripsPerDay::Poisson { mean: 1.2, max: 4 },
        }
    }

    pub fn validate(&self) -> Result<(), FleetError> {
        let bad = |field: &'static str, reason: String| Err(FleetError::InvalidProfile { field, reason });
        if self.departure_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("departure_weights", "weights must be finite and non-negative".into());
        }
        if self.departure_weights.iter().sum::<f64>() <= 0.0 {
            return bad("departure_weights", "weights must have a positive total".into());
        }
        if self.distance_bins.is_empty() {
            return bad("distance_bins", "at least one bin required".into());
        }
        if !(self.distance_min_m.is_finite() && self.distance_min_m >= 0.0) {
            return bad("distance_min_m", format!("must be non-negative, got {}", self.distance_min_m));
        }
        let mut lower = self.distance_min_m;
        for (i, bin) in self.distance_bins.iter().enumerate() {
            let increasing = if i == 0 { bin.upper_m >= lower } else { bin.upper_m > lower };
            if !bin.upper_m.is_finite() || !increasing {
                return bad("distance_bins", format!("bin {i} upper edge {} must exceed {lower}", bin.upper_m));
            }
            if !(bin.weight.is_finite() && bin.weight >= 0.0) {
                return bad("distance_bins", format!("bin {i} weight must be non-negative"));
            }
            lower = bin.upper_m;
        }
        if self.distance_bins.iter().map(|b| b.weight).sum::<f64>() <= 0.0 {
            return bad("distance_bins", "weights must have a positive total".into());
        }
        match self.dwell {
            DwellDistribution::LogNormal { mu, sigma, max_s } => {
                if !(mu.is_finite() && sigma.is_finite() && sigma >= 0.0 && max_s > 0.0) {
                    return bad("dwell", format!("need finite mu, sigma >= 0 and max_s > 0, got {mu}, {sigma}, {max_s}"));
                }
            }
            DwellDistribution::Fixed { seconds } => {
                if !(seconds.is_finite() && seconds >= 0.0) {
                    return bad("dwell", format!("seconds must be non-negative, got {seconds}"));
                }
            }
        }
        if let TripsPerDay::Poisson { mean, .. } = self.trips_per_day {
            if !(mean.is_finite() && mean > 0.0) {
                return bad("trips_per_day", format!("mean must be positive, got {mean}"));
            }
        }
        Ok(())
    }

    /// Bin edges `[min, upper_0, upper_1, ...]`.
    pub fn distance_edges(&self) -> Vec<f64> {
        std::iter::once(self.distance_min_m).chain(self.distance_bins.iter().map(|b| b.upper_m)).collect()
    }

    pub(crate) fn sampler(&self) -> DemandSampler<'_> {
        DemandSampler {
            profile: self,
            hours: WeightedIndex::new(self.departure_weights).expect("validated departure weights"),
            bins: WeightedIndex::new(self.distance_bins.iter().map(|b| b.weight)).expect("validated distance weights"),
        }
    }
}

/// Precomputed categorical samplers over a validated profile.
pub(crate) struct DemandSampler<'a> {
    profile: &'a DemandProfile,
    hours: WeightedIndex<f64>,
    bins: WeightedIndex<f64>,
}

impl DemandSampler<'_> {
    /// Seconds into the day.
    pub fn departure_s<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let hour = self.hours.sample(rng);
        (hour as f64 + rng.gen::<f64>()) * 3600.0
    }

    /// Uniform within a weighted bin.
    pub fn airline_distance_m<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let i = self.bins.sample(rng);
        let lower = if i == 0 { self.profile.distance_min_m } else { self.profile.distance_bins[i - 1].upper_m };
        let upper = self.profile.distance_bins[i].upper_m;
        let u: f64 = rng.gen();
        lower + u * (upper - lower)
    }

    pub fn dwell_s<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.profile.dwell {
            DwellDistribution::Fixed { seconds } => seconds,
            DwellDistribution::LogNormal { mu, sigma, max_s } => {
                let d = LogNormal::new(mu, sigma).expect("validated dwell parameters");
                d.sample(rng).min(max_s)
            }
        }
    }

    pub fn trips_per_day<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match self.profile.trips_per_day {
            TripsPerDay::Fixed { count } => count,
            TripsPerDay::Poisson { mean, max } => {
                let d = Poisson::new(mean).expect("validated trip mean");
                (d.sample(rng) as u32).min(max)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn synthetic_profile_is_valid() {
        DemandProfile::synthetic_company().validate().unwrap();
    }

    #[test]
    fn rejects_bad_bins() {
        let mut p = DemandProfile::synthetic_company();
        p.distance_bins[2].upper_m = 500.0;
        assert!(matches!(p.validate(), Err(FleetError::InvalidProfile { field: "distance_bins", .. })));
        let mut p = DemandProfile::synthetic_company();
        p.departure_weights = [0.0; 24];
        assert!(p.validate().is_err());
    }

    #[test]
    fn degenerate_bin_is_constant() {
        let p = DemandProfile {
            distance_min_m: 500.0,
            distance_bins: vec![DistanceBin { upper_m: 500.0, weight: 1.0 }],
            ..DemandProfile::synthetic_company()
        };
        p.validate().unwrap();
        let s = p.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| s.airline_distance_m(&mut rng) == 500.0));
    }

    #[test]
    fn departures_fall_in_weighted_hours() {
        let p = DemandProfile::synthetic_company();
        let s = p.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let t = s.departure_s(&mut rng);
            assert!(p.departure_weights[(t / 3600.0) as usize] > 0.0);
        }
    }

    #[test]
    fn dwell_is_truncated() {
        let p = DemandProfile {
            dwell: DwellDistribution::LogNormal { mu: 12.0, sigma: 0.1, max_s: 600.0 },
            ..DemandProfile::synthetic_company()
        };
        let s = p.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(s.dwell_s(&mut rng), 600.0);
    }
}
