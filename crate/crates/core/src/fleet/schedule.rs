//! Trip sampling: air-line distance from the empirical histogram, uniform
//! bearing, and the nearest road to the resulting point as destination.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::demand::{DemandProfile, DemandSampler};
use super::{Depot, Trip, TripId};
use crate::network::{Coord, RoadNetwork, RouteWeight, TravelCost};
use crate::time::SimTime;

pub fn sample_trip<R: Rng + ?Sized>(rng: &mut R, profile: &DemandProfile, depot: &Depot, net: &RoadNetwork, weight: RouteWeight) -> Trip {
    sample_with(rng, &profile.sampler(), depot, net, weight, 0.0)
}

fn sample_with<R: Rng + ?Sized>(
    rng: &mut R,
    sampler: &DemandSampler<'_>,
    depot: &Depot,
    net: &RoadNetwork,
    weight: RouteWeight,
    day_offset_s: f64,
) -> Trip {
    let depart = SimTime::from_secs_f64(day_offset_s + sampler.departure_s(rng));
    let airline = sampler.airline_distance_m(rng);
    let bearing = rng.gen::<f64>() * TAU;
    let dwell_s = sampler.dwell_s(rng);

    let point = Coord::new(depot.point.x + airline * bearing.cos(), depot.point.y + airline * bearing.sin());
    let destination = net.nearest_edge(point).expect("network validated non-empty");
    let snap_distance_m = net.distance_to_edge(destination, point);

    let out_cost = TravelCost { weight, hour: depart.hour_of_day() };
    let back_cost = TravelCost { weight, hour: depart.offset_secs(dwell_s).hour_of_day() };
    // a destination on the depot edge itself lies behind the parked vehicle
    let outbound =
        if destination == depot.edge { net.loop_route(depot.edge, out_cost) } else { net.shortest_path(depot.edge, destination, out_cost) };
    let routes = outbound.and_then(|out| Ok((out, net.shortest_path(destination, depot.edge, back_cost)?)));
    let (outbound, inbound, rejection) = match routes {
        Ok((o, i)) => (Some(o), Some(i), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    Trip {
        id: TripId(0),
        depart,
        origin: depot.edge,
        sampled_airline_m: airline,
        target_point: point,
        destination,
        snap_distance_m,
        outbound,
        inbound,
        dwell_s,
        rejection,
    }
}

/// Per-source RNG for the demand pre-pass. Each demand source owns a stream,
/// so source `i` draws the same trips whatever the total number of sources.
pub fn demand_rng(seed: u64, source: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(source as u64 + 1);
    rng
}

/// Trips for `sources` demand sources over `days` days, sorted by departure.
/// Trip ids follow the sorted order.
pub fn generate_day_schedule(
    seed: u64,
    profile: &DemandProfile,
    sources: u32,
    days: u32,
    net: &RoadNetwork,
    depot: &Depot,
    weight: RouteWeight,
) -> Vec<Trip> {
    let sampler = profile.sampler();
    let mut keyed = Vec::new();
    for source in 0..sources {
        let mut rng = demand_rng(seed, source);
        let mut ordinal = 0u32;
        for day in 0..days {
            let n = sampler.trips_per_day(&mut rng);
            for _ in 0..n {
                let trip = sample_with(&mut rng, &sampler, depot, net, weight, day as f64 * 86_400.0);
                keyed.push(((trip.depart, source, ordinal), trip));
                ordinal += 1;
            }
        }
    }
    keyed.sort_by_key(|k| k.0);
    keyed
        .into_iter()
        .enumerate()
        .map(|(i, (_, mut trip))| {
            trip.id = TripId(i as u32);
            trip
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleet::demand::{DistanceBin, TripsPerDay};
    use crate::network::generate_grid;

    fn setup() -> (RoadNetwork, Depot) {
        let net = generate_grid(9, 9, 250.0, 13.9).unwrap();
        let depot = Depot::new(&net, net.edge_by_name("r4c4-r4c5").unwrap());
        (net, depot)
    }

    #[test]
    fn fixed_count_gives_exact_trip_number() {
        let (net, depot) = setup();
        let profile = DemandProfile { trips_per_day: TripsPerDay::Fixed { count: 2 }, ..DemandProfile::synthetic_company() };
        let trips = generate_day_schedule(5, &profile, 1, 1, &net, &depot, RouteWeight::TravelTime);
        assert_eq!(trips.len(), 2);
    }

    #[test]
    fn same_seed_same_schedule() {
        let (net, depot) = setup();
        let profile = DemandProfile::synthetic_company();
        let a = generate_day_schedule(11, &profile, 30, 1, &net, &depot, RouteWeight::TravelTime);
        let b = generate_day_schedule(11, &profile, 30, 1, &net, &depot, RouteWeight::TravelTime);
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].depart <= w[1].depart));
        assert!(a.iter().enumerate().all(|(i, t)| t.id == TripId(i as u32)));
    }

    #[test]
    fn sources_are_independent_of_count() {
        let (net, depot) = setup();
        let profile = DemandProfile::synthetic_company();
        let small = generate_day_schedule(3, &profile, 10, 1, &net, &depot, RouteWeight::TravelTime);
        let large = generate_day_schedule(3, &profile, 20, 1, &net, &depot, RouteWeight::TravelTime);
        for t in &small {
            assert!(large.iter().any(|u| u.depart == t.depart && u.sampled_airline_m == t.sampled_airline_m));
        }
    }

    #[test]
    fn destination_is_nearest_edge_and_route_is_long_enough() {
        let (net, depot) = setup();
        let profile =
            DemandProfile { distance_bins: vec![DistanceBin { upper_m: 1500.0, weight: 1.0 }], ..DemandProfile::synthetic_company() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let trip = sample_trip(&mut rng, &profile, &depot, &net, RouteWeight::Distance);
            assert_eq!(trip.destination, net.nearest_edge(trip.target_point).unwrap());
            let driven = trip.outbound.as_ref().unwrap().driven_length_m(&net);
            assert!(driven + trip.snap_distance_m + 1e-9 >= trip.sampled_airline_m);
        }
    }
}
