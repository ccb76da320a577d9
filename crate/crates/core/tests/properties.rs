use std::collections::BTreeSet;

use iov_sim::adversary::{poison, AttackConfig, AttackMode, SybilRoster};
use iov_sim::agent::FeedbackSample;
use iov_sim::geo::Point;
use iov_sim::metrics::jains_index;
use iov_sim::mobility::ServiceRequest;
use iov_sim::netmodel::{associate, utilization, EdgeSet, Placement, Serving};
use iov_sim::scenario::{DelayNormalization, ScenarioConfig};
use iov_sim::seed;
use proptest::prelude::*;

fn non_zero_vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1e3, 1..16).prop_filter("not all zero", |v| v.iter().any(|x| *x > 0.0))
}

fn placement_for(services: usize, edges: usize) -> impl Strategy<Value = Placement> {
    prop::collection::vec(0u64..(1u64 << edges), services)
        .prop_map(|masks| Placement::from_sets(masks.into_iter().map(EdgeSet).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn jain_is_bounded(x in non_zero_vector()) {
        let j = jains_index(&x).unwrap();
        let n = x.len() as f64;
        prop_assert!(j >= 1.0 / n - 1e-12 && j <= 1.0 + 1e-12, "J = {j} for n = {n}");
    }

    #[test]
    fn jain_is_scale_invariant(x in non_zero_vector(), c in 1e-3f64..1e3) {
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        let (a, b) = (jains_index(&x).unwrap(), jains_index(&scaled).unwrap());
        prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

proptest! {
    #[test]
    fn jain_is_one_only_for_equal_entries(v in 1e-3f64..1e3, n in 1usize..10) {
        prop_assert!((jains_index(&vec![v; n]).unwrap() - 1.0).abs() <= 1e-12);
        let mut bumped = vec![v; n + 1];
        bumped[0] *= 2.0;
        prop_assert!(jains_index(&bumped).unwrap() < 1.0);
    }

    #[test]
    fn one_more_instance_raises_one_edge(p in placement_for(8, 6), s in 1u32..=8, e in 1u32..=6) {
        let cfg = ScenarioConfig::baseline();
        prop_assume!(!p.hosts(s).contains(e));
        let before = utilization(&p, &cfg.services, &cfg.edges);
        let mut q = p.clone();
        let mut hosts = q.hosts(s);
        hosts.insert(e);
        q.set_hosts(s, hosts);
        let after = utilization(&q, &cfg.services, &cfg.edges);
        for (i, (b, a)) in before.iter().zip(&after).enumerate() {
            if i as u32 + 1 == e {
                let step = cfg.service(s).resource_req / cfg.edge(e).capacity;
                prop_assert!((a - b - step).abs() < 1e-12);
            } else {
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn association_picks_the_nearest_host(p in placement_for(8, 6), s in 1u32..=8, x in 0.0f64..10_000.0, y in 0.0f64..10_000.0) {
        let cfg = ScenarioConfig::baseline();
        let req = ServiceRequest { vehicle_id: 1, service_id: s, location: Point::new(x, y), time: 1 };
        let hosts: Vec<u32> = p.hosts(s).iter().collect();
        let dist = |e: u32| req.location.distance(&cfg.edge(e).position);
        match associate(&req, &p, &cfg.edges) {
            Serving::Cloud => prop_assert!(hosts.is_empty()),
            Serving::Edge(e) => {
                prop_assert!(hosts.contains(&e));
                for &h in &hosts {
                    prop_assert!(dist(e) < dist(h) || (dist(e) == dist(h) && e <= h));
                }
            }
        }
    }

    #[test]
    fn config_survives_toml(alpha in 0.0f64..=1.0, horizon in 1u32..5000, delta in 1.0f64..50.0,
                            raw in any::<bool>(), proportion in 0.0f64..=1.0, any_mode in any::<bool>()) {
        let mut cfg = ScenarioConfig::baseline();
        cfg.alpha = alpha;
        cfg.horizon = horizon;
        cfg.training.quality_scale = delta;
        cfg.delay_norm = if raw { DelayNormalization::RawMs } else { DelayNormalization::Threshold };
        cfg.attack.enabled = true;
        cfg.attack.proportion = proportion;
        if any_mode {
            cfg.attack.mode = AttackMode::Any;
        }
        let text = cfg.to_toml_string().unwrap();
        prop_assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn poisoning_touches_only_stolen_targeted_reports(
        delays in prop::collection::vec(1.0f64..60.0, 1..12),
        stolen in prop::collection::btree_set(0u32..12, 0..12),
        service in 1u32..=8,
        selective in any::<bool>(),
        tick_seed in any::<u64>(),
    ) {
        let sample = FeedbackSample::new(
            service,
            Serving::Edge(1),
            3,
            delays.iter().enumerate().map(|(v, d)| (v as u32, *d)).collect(),
        );
        let cfg = AttackConfig {
            enabled: true,
            proportion: 0.5,
            mode: if selective { AttackMode::selective_default() } else { AttackMode::Any },
            ..AttackConfig::default()
        };
        let roster = SybilRoster { stolen_ids: stolen.clone(), ..SybilRoster::default() };
        let out = poison(&sample, &roster, &cfg, &mut seed::rng(tick_seed));

        prop_assert_eq!(&out.true_delays, &sample.true_delays);
        prop_assert_eq!(out.time, sample.time);
        prop_assert_eq!(out.serving, sample.serving);
        let targeted = cfg.mode.targets(service);
        for ((v, rep), (_, truth)) in out.reported_delays.iter().zip(&sample.true_delays) {
            if targeted && stolen.contains(v) {
                prop_assert!(cfg.fake_delays.contains(rep));
            } else {
                prop_assert_eq!(rep.to_bits(), truth.to_bits());
            }
        }
        let ids = |s: &FeedbackSample| s.reported_delays.iter().map(|p| p.0).collect::<BTreeSet<_>>();
        prop_assert_eq!(ids(&out), ids(&sample));
        let mean = out.reported_delays.iter().map(|p| p.1).sum::<f64>() / delays.len() as f64;
        prop_assert!((out.avg_reported - mean).abs() < 1e-9);
        if delays.iter().all(|d| *d > 9.0) {
            prop_assert!(out.avg_reported <= out.avg_true);
        }
    }
}
