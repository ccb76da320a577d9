//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use iov_sim::critic::{Experience, StateObservation};
use iov_sim::geo::Point;
use iov_sim::mobility::ServiceRequest;
use iov_sim::netmodel::{EdgeSet, Placement};
use iov_sim::scenario::{DelayNormalization, EdgeNode, ScenarioConfig, ServiceSpec};
use rand::Rng;

/// Up to 3 services and 3 edges with random demand, small enough for the
/// exhaustive oracle.
pub fn small_instance<R: Rng>(rng: &mut R) -> (ScenarioConfig, Vec<ServiceRequest>) {
    let mut cfg = ScenarioConfig::baseline();
    let n_s = rng.gen_range(1..=3);
    let n_e = rng.gen_range(1..=3);
    cfg.alpha = match rng.gen_range(0..5) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.gen(),
    };
    if rng.gen_bool(0.25) {
        cfg.delay_norm = DelayNormalization::RawMs;
    }
    cfg.services = (1..=n_s)
        .map(|s| ServiceSpec {
            service_id: s,
            resource_req: rng.gen_range(1..=30) as f64,
            delay_threshold: rng.gen_range(5..=30) as f64,
        })
        .collect();
    cfg.edges = (1..=n_e)
        .map(|e| EdgeNode {
            edge_id: e,
            position: random_point(rng),
            capacity: rng.gen_range(10..=60) as f64,
        })
        .collect();
    let requests = (0..rng.gen_range(0..=20))
        .map(|v| ServiceRequest {
            vehicle_id: v,
            service_id: rng.gen_range(1..=n_s),
            location: random_point(rng),
            time: 1,
        })
        .collect();
    (cfg, requests)
}

pub fn random_point<R: Rng>(rng: &mut R) -> Point {
    Point::new(rng.gen_range(0.0..10_000.0), rng.gen_range(0.0..10_000.0))
}

pub fn random_experience<R: Rng>(rng: &mut R, edges: usize, services: usize) -> Experience {
    let demand: Vec<f64> = (0..edges * services).map(|_| rng.gen::<f64>()).collect();
    let state = StateObservation {
        num_edges: edges,
        num_services: services,
        demand,
    };
    let sets = (0..services)
        .map(|_| EdgeSet(rng.gen_range(0..(1u64 << edges))))
        .collect();
    Experience::new(state, &Placement::from_sets(sets), rng.gen_range(0.01..1.0))
}

/// Relative difference, absolute when both sides are effectively zero.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-8 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}
