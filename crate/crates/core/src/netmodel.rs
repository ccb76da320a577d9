//! Ground-truth network model: which edge serves a request under a placement,
//! what delay it sees, and how loaded each edge server is.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geo::Point;
use crate::mobility::ServiceRequest;
use crate::scenario::{DelayModelParams, EdgeNode, ServiceSpec};
use crate::{EdgeId, ServiceId, Tick, VehicleId};

/// Set of edge ids as a bitmask; bit `e - 1` marks edge `e`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeSet(pub u64);

impl EdgeSet {
    pub const EMPTY: EdgeSet = EdgeSet(0);

    pub fn single(e: EdgeId) -> Self {
        EdgeSet(1 << (e - 1))
    }

    pub fn contains(self, e: EdgeId) -> bool {
        self.0 >> (e - 1) & 1 == 1
    }

    pub fn insert(&mut self, e: EdgeId) {
        self.0 |= 1 << (e - 1);
    }

    pub fn remove(&mut self, e: EdgeId) {
        self.0 &= !(1 << (e - 1));
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Edge ids in ascending order.
    pub fn iter(self) -> impl Iterator<Item = EdgeId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros();
            bits &= bits - 1;
            Some(i + 1)
        })
    }
}

impl fmt::Debug for EdgeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl FromIterator<EdgeId> for EdgeSet {
    fn from_iter<I: IntoIterator<Item = EdgeId>>(iter: I) -> Self {
        let mut s = EdgeSet::EMPTY;
        for e in iter {
            s.insert(e);
        }
        s
    }
}

/// Which edges host an instance of each service. Index `s - 1` holds the
/// host set of service `s`. Capacity is not enforced here; see
/// [`utilization`] and [`is_feasible`].
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Placement {
    hosts: Vec<EdgeSet>,
}

impl Placement {
    /// No instances anywhere: every service falls back to the cloud.
    pub fn empty(num_services: usize) -> Self {
        Self {
            hosts: vec![EdgeSet::EMPTY; num_services],
        }
    }

    pub fn from_sets(hosts: Vec<EdgeSet>) -> Self {
        Self { hosts }
    }

    pub fn num_services(&self) -> usize {
        self.hosts.len()
    }

    pub fn hosts(&self, s: ServiceId) -> EdgeSet {
        self.hosts[s as usize - 1]
    }

    pub fn set_hosts(&mut self, s: ServiceId, set: EdgeSet) {
        self.hosts[s as usize - 1] = set;
    }

    pub fn sets(&self) -> &[EdgeSet] {
        &self.hosts
    }

    pub fn instance_count(&self) -> u32 {
        self.hosts.iter().map(|h| h.len()).sum()
    }

    /// Every service has at least one edge instance.
    pub fn covers_all(&self) -> bool {
        self.hosts.iter().all(|h| !h.is_empty())
    }

    /// Binary `[S × E]` encoding, row-major by service.
    pub fn encode(&self, num_edges: usize) -> Vec<f64> {
        self.hosts
            .iter()
            .flat_map(|h| (1..=num_edges as EdgeId).map(move |e| if h.contains(e) { 1.0 } else { 0.0 }))
            .collect()
    }

    pub fn to_map(&self) -> BTreeMap<ServiceId, Vec<EdgeId>> {
        self.hosts
            .iter()
            .enumerate()
            .map(|(i, h)| (i as ServiceId + 1, h.iter().collect()))
            .collect()
    }
}

impl fmt::Debug for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.to_map()).finish()
    }
}

impl Serialize for Placement {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_map().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Placement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<ServiceId, Vec<EdgeId>>::deserialize(deserializer)?;
        let n = map.keys().next_back().copied().unwrap_or(0) as usize;
        let mut p = Placement::empty(n);
        for (s, edges) in map {
            if s == 0 || edges.iter().any(|&e| e == 0 || e > 64) {
                return Err(serde::de::Error::custom("service/edge ids are 1-based, edges <= 64"));
            }
            p.set_hosts(s, edges.into_iter().collect());
        }
        Ok(p)
    }
}

/// Where a request is served from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Serving {
    Edge(EdgeId),
    Cloud,
}

/// Ground-truth delay of one request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayObservation {
    pub vehicle_id: VehicleId,
    pub service_id: ServiceId,
    pub serving: Serving,
    pub true_delay: f64,
    pub time: Tick,
}

/// Nearest edge hosting the requested service, lowest id on ties; the cloud
/// when the service has no edge instance.
pub fn associate(request: &ServiceRequest, placement: &Placement, edges: &[EdgeNode]) -> Serving {
    nearest_in(&request.location, placement.hosts(request.service_id), edges)
        .map_or(Serving::Cloud, Serving::Edge)
}

pub(crate) fn nearest_in(loc: &Point, set: EdgeSet, edges: &[EdgeNode]) -> Option<EdgeId> {
    let mut best: Option<(EdgeId, f64)> = None;
    for e in set.iter() {
        let d = loc.distance(&edges[e as usize - 1].position);
        // ascending iteration, strict < keeps the lowest id on ties
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((e, d));
        }
    }
    best.map(|(e, _)| e)
}

/// Nearest edge to `loc` over all edges, regardless of placement.
pub fn nearest_edge(loc: &Point, edges: &[EdgeNode]) -> EdgeId {
    let all = EdgeSet((1u128 << edges.len()).wrapping_sub(1) as u64);
    nearest_in(loc, all, edges).expect("at least one edge")
}

pub fn edge_delay(distance: f64, params: &DelayModelParams) -> f64 {
    params.proc_delay + params.per_meter_delay * distance
}

/// Linear distance-delay model; the cloud costs a flat fallback delay.
pub fn compute_delay(
    request: &ServiceRequest,
    serving: Serving,
    edges: &[EdgeNode],
    params: &DelayModelParams,
) -> f64 {
    match serving {
        Serving::Edge(e) => edge_delay(request.location.distance(&edges[e as usize - 1].position), params),
        Serving::Cloud => params.cloud_fallback_delay,
    }
}

pub fn observe(
    request: &ServiceRequest,
    placement: &Placement,
    edges: &[EdgeNode],
    params: &DelayModelParams,
) -> DelayObservation {
    let serving = associate(request, placement, edges);
    DelayObservation {
        vehicle_id: request.vehicle_id,
        service_id: request.service_id,
        serving,
        true_delay: compute_delay(request, serving, edges, params),
        time: request.time,
    }
}

/// Per-edge load `Σ R_s / C_e` over services hosted on the edge, indexed by
/// `edge_id - 1`. Values above 1 mean the edge is over capacity.
pub fn utilization(placement: &Placement, services: &[ServiceSpec], edges: &[EdgeNode]) -> Vec<f64> {
    let mut load = vec![0.0; edges.len()];
    for (spec, hosts) in services.iter().zip(placement.sets()) {
        for e in hosts.iter() {
            load[e as usize - 1] += spec.resource_req;
        }
    }
    load.iter().zip(edges).map(|(l, e)| l / e.capacity).collect()
}

/// Capacity holds on every edge: `Σ_{s on e} R_s ≤ C_e`.
pub fn is_feasible(placement: &Placement, services: &[ServiceSpec], edges: &[EdgeNode]) -> bool {
    let mut load = vec![0.0; edges.len()];
    for (spec, hosts) in services.iter().zip(placement.sets()) {
        for e in hosts.iter() {
            load[e as usize - 1] += spec.resource_req;
        }
    }
    load.iter().zip(edges).all(|(l, e)| *l <= e.capacity)
}
