//! Placement policy: minimize `α·max_e util(e) + (1−α)·max_s delay_term(s)`
//! subject to edge capacity and at least one instance per service.
//!
//! [`optimize_placement`] runs a delay-aware greedy construction followed by
//! best-improvement local search from several starts. [`exhaustive_oracle`]
//! enumerates every placement of tiny instances and is the reference the
//! local search is checked against.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::mobility::ServiceRequest;
use crate::netmodel::{self, edge_delay, EdgeSet, Placement};
use crate::scenario::{DelayNormalization, ScenarioConfig};
use crate::seed;
use crate::{EdgeId, ServiceId};

/// Largest instance the oracle accepts, per dimension.
pub const ORACLE_MAX_SERVICES: usize = 3;
pub const ORACLE_MAX_EDGES: usize = 3;

/// Edge counts up to this use a precomputed delay table over all host sets.
const DENSE_TABLE_EDGES: usize = 12;
/// Host-set reassignment enumerates every subset up to this many edges;
/// beyond it only single-edge add/remove/relocate changes are tried.
const FULL_SUBSET_EDGES: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum ActorError {
    #[error("no capacity-feasible placement with one instance per service was found")]
    Infeasible,
    #[error("oracle limited to {ORACLE_MAX_SERVICES} services × {ORACLE_MAX_EDGES} edges, got {services} × {edges}")]
    TooLarge { services: usize, edges: usize },
}

/// Local search settings.
#[derive(Debug, Clone, Copy)]
pub struct SearchParams {
    /// Random feasible starts tried in addition to greedy and the incumbent.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self { restarts: 6, seed: 0 }
    }
}

fn delay_term(mean_delay: f64, threshold: f64, norm: DelayNormalization) -> f64 {
    match norm {
        DelayNormalization::Threshold => mean_delay / threshold,
        DelayNormalization::RawMs => mean_delay,
    }
}

/// Placement cost against a request snapshot. Services nobody requested
/// contribute no delay term.
pub fn objective(placement: &Placement, snapshot: &[ServiceRequest], cfg: &ScenarioConfig) -> f64 {
    let util = netmodel::utilization(placement, &cfg.services, &cfg.edges);
    let max_util = util.iter().copied().fold(0.0, f64::max);
    let mut sums = vec![0.0; cfg.num_services()];
    let mut counts = vec![0usize; cfg.num_services()];
    for r in snapshot {
        let i = r.service_id as usize - 1;
        let serving = netmodel::associate(r, placement, &cfg.edges);
        sums[i] += netmodel::compute_delay(r, serving, &cfg.edges, &cfg.delay_model);
        counts[i] += 1;
    }
    let max_delay = cfg
        .services
        .iter()
        .enumerate()
        .filter(|(i, _)| counts[*i] > 0)
        .map(|(i, s)| delay_term(sums[i] / counts[i] as f64, s.delay_threshold, cfg.delay_norm))
        .fold(0.0, f64::max);
    cfg.alpha * max_util + (1.0 - cfg.alpha) * max_delay
}

/// Snapshot-specific cost evaluator. Per-service mean delay for a host set is
/// looked up rather than recomputed; results are bit-identical to
/// [`objective`] because delays are summed in the same request order.
struct SnapshotEval<'a> {
    cfg: &'a ScenarioConfig,
    services: Vec<ServiceDelays>,
}

struct ServiceDelays {
    /// Requests for the service, in snapshot order.
    count: usize,
    /// Distance from each request to each edge, row per request.
    dist: Vec<f64>,
    /// Delay sum per host-set mask when the table is dense.
    table: Option<Vec<f64>>,
}

impl<'a> SnapshotEval<'a> {
    fn new(snapshot: &[ServiceRequest], cfg: &'a ScenarioConfig) -> Self {
        let e = cfg.num_edges();
        let mut services: Vec<ServiceDelays> = (0..cfg.num_services())
            .map(|_| ServiceDelays {
                count: 0,
                dist: Vec::new(),
                table: None,
            })
            .collect();
        for r in snapshot {
            let sd = &mut services[r.service_id as usize - 1];
            sd.count += 1;
            sd.dist.extend(cfg.edges.iter().map(|n| r.location.distance(&n.position)));
        }
        if e <= DENSE_TABLE_EDGES {
            let masks = 1usize << e;
            for sd in &mut services {
                let mut table = vec![0.0; masks];
                let mut best = vec![f64::INFINITY; masks];
                for row in sd.dist.chunks(e) {
                    for mask in 1..masks {
                        let low = mask.trailing_zeros() as usize;
                        // hosts iterate ascending and keep the first strict
                        // minimum, exactly like `associate`
                        let rest = best[mask & (mask - 1)];
                        best[mask] = if row[low] <= rest { row[low] } else { rest };
                        table[mask] += edge_delay(best[mask], &cfg.delay_model);
                    }
                }
                sd.table = Some(table);
            }
        }
        Self { cfg, services }
    }

    fn delay_sum(&self, s: usize, hosts: EdgeSet) -> f64 {
        let sd = &self.services[s];
        if hosts.is_empty() {
            return (0..sd.count).fold(0.0, |acc, _| acc + self.cfg.delay_model.cloud_fallback_delay);
        }
        if let Some(table) = &sd.table {
            return table[hosts.0 as usize];
        }
        let e = self.cfg.num_edges();
        sd.dist.chunks(e).fold(0.0, |acc, row| {
            let mut best = f64::INFINITY;
            for h in hosts.iter() {
                let d = row[h as usize - 1];
                if d < best {
                    best = d;
                }
            }
            acc + edge_delay(best, &self.cfg.delay_model)
        })
    }

    fn delay_terms(&self, placement: &Placement) -> Vec<Option<f64>> {
        self.cfg
            .services
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let sd = &self.services[i];
                (sd.count > 0).then(|| {
                    let mean = self.delay_sum(i, placement.sets()[i]) / sd.count as f64;
                    delay_term(mean, spec.delay_threshold, self.cfg.delay_norm)
                })
            })
            .collect()
    }

    /// `(cost, plateau tie-breaker)`; the second component is the α-weighted
    /// sum of squared utilization and delay terms.
    fn score(&self, placement: &Placement) -> (f64, f64) {
        let util = netmodel::utilization(placement, &self.cfg.services, &self.cfg.edges);
        let terms = self.delay_terms(placement);
        let max_util = util.iter().copied().fold(0.0, f64::max);
        let max_delay = terms.iter().flatten().copied().fold(0.0, f64::max);
        let a = self.cfg.alpha;
        let cost = a * max_util + (1.0 - a) * max_delay;
        let spread = a * util.iter().map(|u| u * u).sum::<f64>()
            + (1.0 - a) * terms.iter().flatten().map(|t| t * t).sum::<f64>();
        (cost, spread)
    }
}

fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

fn loads(placement: &Placement, cfg: &ScenarioConfig) -> Vec<f64> {
    let mut load = vec![0.0; cfg.num_edges()];
    for (spec, hosts) in cfg.services.iter().zip(placement.sets()) {
        for e in hosts.iter() {
            load[e as usize - 1] += spec.resource_req;
        }
    }
    load
}

/// Largest-first construction putting each service on the fitting edge that
/// minimizes its own mean delay (lowest id on ties). Services without demand
/// go to the edge with the most remaining capacity.
fn greedy(eval: &SnapshotEval, cfg: &ScenarioConfig) -> Option<Placement> {
    let mut order: Vec<usize> = (0..cfg.num_services()).collect();
    order.sort_by(|&a, &b| {
        cfg.services[b]
            .resource_req
            .total_cmp(&cfg.services[a].resource_req)
            .then(a.cmp(&b))
    });
    let mut remaining: Vec<f64> = cfg.edges.iter().map(|e| e.capacity).collect();
    let mut p = Placement::empty(cfg.num_services());
    for s in order {
        let req = cfg.services[s].resource_req;
        let mut best: Option<(usize, f64)> = None;
        for (e, rem) in remaining.iter().enumerate() {
            if *rem < req {
                continue;
            }
            let key = if eval.services[s].count > 0 {
                eval.delay_sum(s, EdgeSet::single(e as EdgeId + 1))
            } else {
                -(rem - req) / cfg.edges[e].capacity
            };
            if best.map_or(true, |(_, k)| key < k) {
                best = Some((e, key));
            }
        }
        let (e, _) = best?;
        remaining[e] -= req;
        p.set_hosts(s as ServiceId + 1, EdgeSet::single(e as EdgeId + 1));
    }
    Some(p)
}

/// First-fit decreasing onto edges ordered by capacity, ignoring delay.
fn first_fit_decreasing(cfg: &ScenarioConfig) -> Option<Placement> {
    let mut order: Vec<usize> = (0..cfg.num_services()).collect();
    order.sort_by(|&a, &b| {
        cfg.services[b]
            .resource_req
            .total_cmp(&cfg.services[a].resource_req)
            .then(a.cmp(&b))
    });
    let mut bins: Vec<usize> = (0..cfg.num_edges()).collect();
    bins.sort_by(|&a, &b| cfg.edges[b].capacity.total_cmp(&cfg.edges[a].capacity).then(a.cmp(&b)));
    let mut remaining: Vec<f64> = cfg.edges.iter().map(|e| e.capacity).collect();
    let mut p = Placement::empty(cfg.num_services());
    for s in order {
        let req = cfg.services[s].resource_req;
        let e = *bins.iter().find(|&&e| remaining[e] >= req)?;
        remaining[e] -= req;
        p.set_hosts(s as ServiceId + 1, EdgeSet::single(e as EdgeId + 1));
    }
    Some(p)
}

fn random_start<R: Rng>(cfg: &ScenarioConfig, rng: &mut R) -> Option<Placement> {
    let mut order: Vec<usize> = (0..cfg.num_services()).collect();
    order.shuffle(rng);
    let mut remaining: Vec<f64> = cfg.edges.iter().map(|e| e.capacity).collect();
    let mut p = Placement::empty(cfg.num_services());
    for s in order {
        let req = cfg.services[s].resource_req;
        let fits: Vec<usize> = (0..cfg.num_edges()).filter(|&e| remaining[e] >= req).collect();
        let &e = fits.choose(rng)?;
        remaining[e] -= req;
        p.set_hosts(s as ServiceId + 1, EdgeSet::single(e as EdgeId + 1));
    }
    Some(p)
}

/// Candidate host sets for one service given its current set.
fn host_set_moves(current: EdgeSet, num_edges: usize) -> Vec<EdgeSet> {
    if num_edges <= FULL_SUBSET_EDGES {
        return (1..1u64 << num_edges).map(EdgeSet).filter(|&m| m != current).collect();
    }
    let mut out = Vec::new();
    for e in 1..=num_edges as EdgeId {
        let mut m = current;
        if current.contains(e) {
            // remove surplus instance
            m.remove(e);
            if !m.is_empty() {
                out.push(m);
            }
            // relocate
            for f in 1..=num_edges as EdgeId {
                if !current.contains(f) {
                    let mut r = current;
                    r.remove(e);
                    r.insert(f);
                    out.push(r);
                }
            }
        } else {
            m.insert(e);
            out.push(m);
        }
    }
    out
}

/// Best-improvement descent over host-set reassignment (covers relocate, add
/// and remove) and instance swaps between two services.
fn local_search(eval: &SnapshotEval, cfg: &ScenarioConfig, start: Placement) -> (Placement, (f64, f64)) {
    let n_s = cfg.num_services();
    let n_e = cfg.num_edges();
    let caps: Vec<f64> = cfg.edges.iter().map(|e| e.capacity).collect();
    let feasible = |p: &Placement| loads(p, cfg).iter().zip(&caps).all(|(l, c)| l <= c);

    let mut cur = start;
    let mut cur_score = eval.score(&cur);
    loop {
        let mut best: Option<(Placement, (f64, f64))> = None;
        let mut consider = |cand: Placement| {
            if !feasible(&cand) {
                return;
            }
            let sc = eval.score(&cand);
            let bar = best.as_ref().map_or(cur_score, |b| b.1);
            if better(sc, bar) {
                best = Some((cand, sc));
            }
        };

        for s in 1..=n_s as ServiceId {
            for m in host_set_moves(cur.hosts(s), n_e) {
                let mut cand = cur.clone();
                cand.set_hosts(s, m);
                consider(cand);
            }
        }
        for s1 in 1..=n_s as ServiceId {
            for s2 in s1 + 1..=n_s as ServiceId {
                let (h1, h2) = (cur.hosts(s1), cur.hosts(s2));
                for e1 in h1.iter() {
                    for e2 in h2.iter() {
                        if e1 == e2 || h1.contains(e2) || h2.contains(e1) {
                            continue;
                        }
                        let mut a = h1;
                        a.remove(e1);
                        a.insert(e2);
                        let mut b = h2;
                        b.remove(e2);
                        b.insert(e1);
                        let mut cand = cur.clone();
                        cand.set_hosts(s1, a);
                        cand.set_hosts(s2, b);
                        consider(cand);
                    }
                }
            }
        }

        match best {
            Some((p, sc)) => {
                cur = p;
                cur_score = sc;
            }
            None => return (cur, cur_score),
        }
    }
}

/// Capacity-feasible placement with ≥1 instance per service whose cost is no
/// worse than `incumbent` (when the incumbent itself is feasible and covers
/// every service).
pub fn optimize_placement(
    snapshot: &[ServiceRequest],
    cfg: &ScenarioConfig,
    incumbent: &Placement,
    params: SearchParams,
) -> Result<Placement, ActorError> {
    let eval = SnapshotEval::new(snapshot, cfg);
    let mut starts = Vec::with_capacity(params.restarts + 2);
    match greedy(&eval, cfg).or_else(|| first_fit_decreasing(cfg)) {
        Some(p) => starts.push(p),
        None => return Err(ActorError::Infeasible),
    }
    if incumbent.num_services() == cfg.num_services()
        && incumbent.covers_all()
        && netmodel::is_feasible(incumbent, &cfg.services, &cfg.edges)
    {
        starts.push(incumbent.clone());
    }
    let mut rng = seed::rng(params.seed);
    for _ in 0..params.restarts {
        if let Some(p) = random_start(cfg, &mut rng) {
            starts.push(p);
        }
    }

    let mut best: Option<(Placement, (f64, f64))> = None;
    for start in starts {
        let (p, sc) = local_search(&eval, cfg, start);
        if best.as_ref().map_or(true, |b| better(sc, b.1)) {
            best = Some((p, sc));
        }
    }
    let (p, _) = best.expect("at least one start");
    debug_assert!(netmodel::is_feasible(&p, &cfg.services, &cfg.edges));
    Ok(p)
}

/// Greedy construction alone, exposed for comparisons against the full search.
pub fn greedy_placement(snapshot: &[ServiceRequest], cfg: &ScenarioConfig) -> Result<Placement, ActorError> {
    let eval = SnapshotEval::new(snapshot, cfg);
    greedy(&eval, cfg)
        .or_else(|| first_fit_decreasing(cfg))
        .ok_or(ActorError::Infeasible)
}

fn lex_key(p: &Placement) -> (u32, Vec<Vec<EdgeId>>) {
    (
        p.instance_count(),
        p.sets().iter().map(|h| h.iter().collect()).collect(),
    )
}

/// Global optimum by enumeration of every non-empty host set per service.
/// Ties on cost go to the fewest instances, then the lexicographically
/// smallest host sets in service order.
pub fn exhaustive_oracle(snapshot: &[ServiceRequest], cfg: &ScenarioConfig) -> Result<Placement, ActorError> {
    let (n_s, n_e) = (cfg.num_services(), cfg.num_edges());
    if n_s > ORACLE_MAX_SERVICES || n_e > ORACLE_MAX_EDGES {
        return Err(ActorError::TooLarge {
            services: n_s,
            edges: n_e,
        });
    }
    let masks = (1u64 << n_e) - 1;
    let total = masks.pow(n_s as u32);
    let mut best: Option<(f64, (u32, Vec<Vec<EdgeId>>), Placement)> = None;
    for code in 0..total {
        let mut c = code;
        let sets = (0..n_s)
            .map(|_| {
                let m = c % masks + 1;
                c /= masks;
                EdgeSet(m)
            })
            .collect();
        let p = Placement::from_sets(sets);
        if !netmodel::is_feasible(&p, &cfg.services, &cfg.edges) {
            continue;
        }
        let cost = objective(&p, snapshot, cfg);
        let key = lex_key(&p);
        let replace = match &best {
            None => true,
            Some((bc, bk, _)) => cost < *bc || (cost == *bc && key < *bk),
        };
        if replace {
            best = Some((cost, key, p));
        }
    }
    best.map(|(_, _, p)| p).ok_or(ActorError::Infeasible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{Area, Point};
    use crate::scenario::{EdgeNode, ServiceSpec};

    fn req(vehicle_id: u32, service_id: ServiceId, x: f64, y: f64) -> ServiceRequest {
        ServiceRequest {
            vehicle_id,
            service_id,
            location: Point::new(x, y),
            time: 1,
        }
    }

    fn small(services: &[(f64, f64)], edges: &[(f64, f64, f64)], alpha: f64) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::baseline();
        cfg.alpha = alpha;
        cfg.area_size = Area::default();
        cfg.services = services
            .iter()
            .enumerate()
            .map(|(i, &(r, d))| ServiceSpec {
                service_id: i as u32 + 1,
                resource_req: r,
                delay_threshold: d,
            })
            .collect();
        cfg.edges = edges
            .iter()
            .enumerate()
            .map(|(i, &(x, y, c))| EdgeNode {
                edge_id: i as u32 + 1,
                position: Point::new(x, y),
                capacity: c,
            })
            .collect();
        cfg
    }

    #[test]
    fn alpha_one_is_max_utilization() {
        let cfg = ScenarioConfig::baseline();
        let mut cfg1 = cfg.clone();
        cfg1.alpha = 1.0;
        let mut p = Placement::empty(8);
        for s in 1..=8 {
            p.set_hosts(s, EdgeSet::single((s - 1) % 6 + 1));
        }
        let snap = vec![req(1, 1, 100.0, 100.0), req(2, 8, 9_000.0, 9_000.0)];
        let util = netmodel::utilization(&p, &cfg.services, &cfg.edges);
        let max_util = util.iter().copied().fold(0.0, f64::max);
        assert_eq!(objective(&p, &snap, &cfg1), max_util);
    }

    #[test]
    fn alpha_zero_is_worst_normalized_delay() {
        let mut cfg = ScenarioConfig::baseline();
        cfg.alpha = 0.0;
        let mut p = Placement::empty(8);
        for s in 1..=8 {
            p.set_hosts(s, EdgeSet::single(1));
        }
        // edge 1 at (1666.7, 2500)
        let e1 = cfg.edges[0].position;
        let snap = vec![req(1, 1, e1.x, e1.y), req(2, 2, e1.x + 3_000.0, e1.y)];
        // service 2: 7 ms / 16 ms beats service 1: 1 ms / 14 ms
        let expected = 7.0 / 16.0;
        assert!((objective(&p, &snap, &cfg) - expected).abs() < 1e-12);
    }

    #[test]
    fn single_edge_hosts_everything() {
        let cfg = small(&[(5.0, 14.0), (10.0, 16.0)], &[(5_000.0, 5_000.0, 20.0)], 0.5);
        let snap = vec![req(1, 1, 0.0, 0.0), req(2, 2, 100.0, 100.0)];
        let p = optimize_placement(&snap, &cfg, &Placement::empty(2), SearchParams::default()).unwrap();
        assert_eq!(p.hosts(1), EdgeSet::single(1));
        assert_eq!(p.hosts(2), EdgeSet::single(1));
    }

    #[test]
    fn infeasible_instance_is_reported() {
        let cfg = small(&[(30.0, 14.0), (30.0, 16.0)], &[(5_000.0, 5_000.0, 40.0)], 0.5);
        let r = optimize_placement(&[], &cfg, &Placement::empty(2), SearchParams::default());
        assert_eq!(r, Err(ActorError::Infeasible));
        assert_eq!(exhaustive_oracle(&[], &cfg), Err(ActorError::Infeasible));
    }

    #[test]
    fn oracle_prefers_nearest_host_for_delay() {
        let cfg = small(&[(5.0, 14.0)], &[(1_000.0, 1_000.0, 20.0), (9_000.0, 9_000.0, 20.0)], 0.0);
        let snap = vec![req(1, 1, 8_900.0, 8_800.0)];
        let p = exhaustive_oracle(&snap, &cfg).unwrap();
        // {2} and {1,2} tie on delay; fewest instances wins
        assert_eq!(p.hosts(1), EdgeSet::single(2));
    }

    #[test]
    fn oracle_tie_break_fewest_then_lexicographic() {
        let cfg = small(
            &[(5.0, 14.0), (5.0, 14.0)],
            &[(1_000.0, 1_000.0, 20.0), (9_000.0, 9_000.0, 20.0)],
            1.0,
        );
        let p = exhaustive_oracle(&[], &cfg).unwrap();
        // {1},{2} and {2},{1} both reach max util 0.25
        assert_eq!(p.hosts(1), EdgeSet::single(1));
        assert_eq!(p.hosts(2), EdgeSet::single(2));

        let one = small(&[(5.0, 14.0)], &[(1_000.0, 1_000.0, 20.0), (9_000.0, 9_000.0, 20.0)], 1.0);
        let p = exhaustive_oracle(&[], &one).unwrap();
        assert_eq!(p.hosts(1), EdgeSet::single(1));
    }

    #[test]
    fn oracle_guard() {
        let cfg = ScenarioConfig::baseline();
        assert_eq!(
            exhaustive_oracle(&[], &cfg),
            Err(ActorError::TooLarge { services: 8, edges: 6 })
        );
    }

    #[test]
    fn three_by_three_matches_oracle() {
        let cfg = small(
            &[(5.0, 14.0), (10.0, 16.0), (15.0, 18.0)],
            &[(1_500.0, 1_500.0, 20.0), (8_000.0, 2_000.0, 20.0), (5_000.0, 8_500.0, 20.0)],
            1.0,
        );
        let snap = vec![req(1, 1, 0.0, 0.0), req(2, 2, 9_000.0, 0.0), req(3, 3, 5_000.0, 9_000.0)];
        let p = optimize_placement(&snap, &cfg, &Placement::empty(3), SearchParams::default()).unwrap();
        let o = exhaustive_oracle(&snap, &cfg).unwrap();
        assert_eq!(objective(&p, &snap, &cfg), objective(&o, &snap, &cfg));
    }

    #[test]
    fn table_cost_is_bit_identical_to_objective() {
        let cfg = ScenarioConfig::baseline();
        let mut rng = seed::rng(5);
        let snap: Vec<ServiceRequest> = (0..300)
            .map(|i| req(i, rng.gen_range(1..=8), rng.gen_range(0.0..10_000.0), rng.gen_range(0.0..10_000.0)))
            .collect();
        let eval = SnapshotEval::new(&snap, &cfg);
        for _ in 0..200 {
            let sets = (0..8).map(|_| EdgeSet(rng.gen_range(0..64))).collect();
            let p = Placement::from_sets(sets);
            assert_eq!(eval.score(&p).0, objective(&p, &snap, &cfg));
        }
    }

    #[test]
    fn sparse_path_agrees_with_objective() {
        // 13 edges forces the on-demand path
        let mut cfg = ScenarioConfig::baseline();
        cfg.edges = crate::scenario::default_edge_positions(&cfg.area_size, 13)
            .into_iter()
            .enumerate()
            .map(|(i, p)| EdgeNode {
                edge_id: i as u32 + 1,
                position: p,
                capacity: 60.0,
            })
            .collect();
        let mut rng = seed::rng(9);
        let snap: Vec<ServiceRequest> = (0..100)
            .map(|i| req(i, rng.gen_range(1..=8), rng.gen_range(0.0..10_000.0), rng.gen_range(0.0..10_000.0)))
            .collect();
        let eval = SnapshotEval::new(&snap, &cfg);
        assert!(eval.services[0].table.is_none());
        for _ in 0..50 {
            let sets = (0..8).map(|_| EdgeSet(rng.gen_range(0..1 << 13))).collect();
            let p = Placement::from_sets(sets);
            assert_eq!(eval.score(&p).0, objective(&p, &snap, &cfg));
        }
        let p = optimize_placement(&snap, &cfg, &Placement::empty(8), SearchParams::default()).unwrap();
        assert!(netmodel::is_feasible(&p, &cfg.services, &cfg.edges) && p.covers_all());
    }

    #[test]
    fn never_worse_than_incumbent_or_greedy() {
        let cfg = ScenarioConfig::baseline();
        let mut rng = seed::rng(21);
        for round in 0..5 {
            let snap: Vec<ServiceRequest> = (0..200)
                .map(|i| req(i, rng.gen_range(1..=8), rng.gen_range(0.0..10_000.0), rng.gen_range(0.0..10_000.0)))
                .collect();
            let g = greedy_placement(&snap, &cfg).unwrap();
            let params = SearchParams { restarts: 2, seed: round };
            let p = optimize_placement(&snap, &cfg, &g, params).unwrap();
            assert!(objective(&p, &snap, &cfg) <= objective(&g, &snap, &cfg));
            assert!(netmodel::is_feasible(&p, &cfg.services, &cfg.edges));
            assert!(p.covers_all());
        }
    }
}
