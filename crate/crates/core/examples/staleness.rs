//! How fast does a placement go stale? For sampled ticks, optimize on that
//! tick's requests and report the per-sample mean delay (what the agent sees)
//! when the placement is still in force `k` ticks later. Prints quantiles
//! over sampled ticks and seeds.
//!
//! `cargo run --release --example staleness -- [config.toml|-] [seeds]`
//! e.g. `... -- configs/default.toml 1,2,3`

use iov_sim::actor::{optimize_placement, SearchParams};
use iov_sim::agent::{collect_feedback, requests_at};
use iov_sim::experiment::synthetic_vehicles;
use iov_sim::netmodel::Placement;
use iov_sim::scenario::{load_config, ScenarioConfig};

const LAGS: [u32; 6] = [0, 10, 30, 60, 120, 240];

fn quantiles(mut v: Vec<f64>) -> String {
    v.sort_by(f64::total_cmp);
    let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
    format!(
        "mean {:6.2}  p10 {:6.2}  p50 {:6.2}  p90 {:6.2}",
        v.iter().sum::<f64>() / v.len() as f64,
        q(0.1),
        q(0.5),
        q(0.9)
    )
}

fn main() {
    let mut args = std::env::args().skip(1);
    let cfg = match args.next() {
        Some(p) if p != "-" => load_config(&p).expect("config"),
        _ => ScenarioConfig::baseline(),
    };
    let seeds: Vec<u64> = args
        .next()
        .map_or(vec![1], |s| s.split(',').map(|x| x.parse().expect("seed")).collect());
    let mut by_lag: Vec<Vec<f64>> = vec![Vec::new(); LAGS.len()];
    let mut instances = Vec::new();
    for &seed in &seeds {
        let vehicles = synthetic_vehicles(&cfg, seed);
        let mut t0 = 1;
        while t0 + LAGS[LAGS.len() - 1] <= cfg.horizon {
            let req = requests_at(&cfg, &vehicles, seed, t0);
            let empty = Placement::empty(cfg.num_services());
            let p = optimize_placement(&req, &cfg, &empty, SearchParams::default()).expect("feasible");
            instances.push(p.instance_count() as f64);
            for (i, &k) in LAGS.iter().enumerate() {
                let r = requests_at(&cfg, &vehicles, seed, t0 + k);
                let fb = collect_feedback(&r, &p, &cfg, t0 + k);
                by_lag[i].push(fb.iter().map(|f| f.avg_true).sum::<f64>() / fb.len() as f64);
            }
            t0 += 23;
        }
    }
    println!("instances {}", quantiles(instances));
    // Per-request true delay over whole runs: a placement frozen at tick 1
    // against one refreshed every 10 ticks, for services 1..=4 and all.
    let (mut frozen, mut fresh) = ([0.0; 2], [0.0; 2]);
    let mut n = [0usize; 2];
    for &seed in &seeds {
        let vehicles = synthetic_vehicles(&cfg, seed);
        let empty = Placement::empty(cfg.num_services());
        let first = optimize_placement(&requests_at(&cfg, &vehicles, seed, 1), &cfg, &empty, SearchParams::default())
            .expect("feasible");
        let mut current = first.clone();
        for t in 1..=cfg.horizon {
            let req = requests_at(&cfg, &vehicles, seed, t);
            if t % 10 == 1 {
                current = optimize_placement(&req, &cfg, &current, SearchParams::default()).expect("feasible");
            }
            for (p, acc) in [(&first, &mut frozen), (&current, &mut fresh)] {
                for f in collect_feedback(&req, p, &cfg, t) {
                    let g = usize::from(f.service_id > 4);
                    acc[g] += f.true_delays.iter().map(|d| d.1).sum::<f64>();
                }
            }
            for f in collect_feedback(&req, &current, &cfg, t) {
                n[usize::from(f.service_id > 4)] += f.true_delays.len();
            }
        }
    }
    for (g, name) in [(0, "1-4"), (1, "5-8")] {
        println!(
            "services {name}: frozen {:6.2}  refreshed {:6.2}  ratio {:.3}",
            frozen[g] / n[g] as f64,
            fresh[g] / n[g] as f64,
            frozen[g] / fresh[g]
        );
    }
    let all = (frozen[0] + frozen[1]) / (fresh[0] + fresh[1]);
    println!("all services ratio {all:.3}");
    for (k, v) in LAGS.iter().zip(by_lag) {
        println!("lag {k:>4}  {}", quantiles(v));
    }
}
