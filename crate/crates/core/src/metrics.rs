//! Evaluation metrics folded over tick logs.
//!
//! Delay metrics always use ground-truth delays; poisoning only changes what
//! the agent sees.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::SybilRoster;
use crate::agent::TickLog;
use crate::netmodel;
use crate::scenario::ScenarioConfig;
use crate::{EdgeId, ServiceId, VehicleId};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("Jain's index of an empty vector")]
    Empty,
    #[error("Jain's index is undefined for an all-zero vector")]
    AllZero,
    #[error("negative entry {0} in Jain's index input")]
    Negative(f64),
}

pub fn reopt_count(logs: &[TickLog]) -> usize {
    logs.iter().filter(|l| l.reoptimized).count()
}

fn grouped_mean<F>(logs: &[TickLog], mut keep: F) -> BTreeMap<ServiceId, f64>
where
    F: FnMut(VehicleId) -> bool,
{
    let mut acc: BTreeMap<ServiceId, (f64, usize)> = BTreeMap::new();
    for sample in logs.iter().flat_map(|l| &l.feedback) {
        for &(v, d) in &sample.true_delays {
            if keep(v) {
                let e = acc.entry(sample.service_id).or_default();
                e.0 += d;
                e.1 += 1;
            }
        }
    }
    acc.into_iter().map(|(s, (sum, n))| (s, sum / n as f64)).collect()
}

/// Mean true delay per service over the run. Services nobody requested are
/// absent.
pub fn avg_service_delay(logs: &[TickLog]) -> BTreeMap<ServiceId, f64> {
    grouped_mean(logs, |_| true)
}

/// [`avg_service_delay`] restricted to vehicles whose identity was stolen.
pub fn targeted_delay(logs: &[TickLog], roster: &SybilRoster) -> BTreeMap<ServiceId, f64> {
    if roster.is_empty() {
        return BTreeMap::new();
    }
    grouped_mean(logs, |v| roster.contains(v))
}

/// Time-mean utilization per edge under the placements in force.
pub fn resource_usage(logs: &[TickLog], cfg: &ScenarioConfig) -> BTreeMap<EdgeId, f64> {
    let mut sums = vec![0.0; cfg.num_edges()];
    for l in logs {
        let u = netmodel::utilization(&l.action, &cfg.services, &cfg.edges);
        sums.iter_mut().zip(&u).for_each(|(s, x)| *s += x);
    }
    let n = logs.len().max(1) as f64;
    cfg.edges
        .iter()
        .zip(sums)
        .map(|(e, s)| (e.edge_id, s / n))
        .collect()
}

/// `(Σx)² / (n·Σx²)`, in `[1/n, 1]`.
pub fn jains_index(x: &[f64]) -> Result<f64, MetricsError> {
    if x.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(&neg) = x.iter().find(|v| **v < 0.0) {
        return Err(MetricsError::Negative(neg));
    }
    let sum: f64 = x.iter().sum();
    let sq: f64 = x.iter().map(|v| v * v).sum();
    if sq == 0.0 {
        return Err(MetricsError::AllZero);
    }
    Ok(sum * sum / (x.len() as f64 * sq))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessMode {
    /// Jain's index of the time-mean per-edge utilization vector.
    #[default]
    TimeMeanUtilization,
    /// Mean over ticks of the per-tick Jain's index; ticks with no
    /// instance anywhere are skipped.
    PerTickMean,
}

pub fn fairness(logs: &[TickLog], cfg: &ScenarioConfig, mode: FairnessMode) -> Result<f64, MetricsError> {
    match mode {
        FairnessMode::TimeMeanUtilization => {
            let u: Vec<f64> = resource_usage(logs, cfg).into_values().collect();
            jains_index(&u)
        }
        FairnessMode::PerTickMean => {
            let per_tick: Vec<f64> = logs
                .iter()
                .filter_map(|l| jains_index(&netmodel::utilization(&l.action, &cfg.services, &cfg.edges)).ok())
                .collect();
            if per_tick.is_empty() {
                return Err(MetricsError::AllZero);
            }
            Ok(per_tick.iter().sum::<f64>() / per_tick.len() as f64)
        }
    }
}

/// Per-(vehicle, service) sums of true delays. Lets a run's delays be
/// restricted to any identity set after the fact, e.g. an attacked run's
/// roster applied to the matched no-attack run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VehicleDelayTable {
    cells: BTreeMap<(VehicleId, ServiceId), (f64, usize)>,
}

impl VehicleDelayTable {
    pub fn from_logs(logs: &[TickLog]) -> Self {
        let mut cells: BTreeMap<(VehicleId, ServiceId), (f64, usize)> = BTreeMap::new();
        for sample in logs.iter().flat_map(|l| &l.feedback) {
            for &(v, d) in &sample.true_delays {
                let e = cells.entry((v, sample.service_id)).or_default();
                e.0 += d;
                e.1 += 1;
            }
        }
        Self { cells }
    }

    /// Mean per service over the given vehicles.
    pub fn restricted(&self, vehicles: &BTreeSet<VehicleId>) -> BTreeMap<ServiceId, f64> {
        let mut acc: BTreeMap<ServiceId, (f64, usize)> = BTreeMap::new();
        for (&(v, s), &(sum, n)) in &self.cells {
            if vehicles.contains(&v) {
                let e = acc.entry(s).or_default();
                e.0 += sum;
                e.1 += n;
            }
        }
        acc.into_iter().map(|(s, (sum, n))| (s, sum / n as f64)).collect()
    }

    /// Pooled mean over the given vehicles and services; `None` if no such
    /// delay was recorded.
    pub fn pooled(&self, vehicles: &BTreeSet<VehicleId>, services: &BTreeSet<ServiceId>) -> Option<f64> {
        let (sum, n) = self
            .cells
            .iter()
            .filter(|((v, s), _)| vehicles.contains(v) && services.contains(s))
            .fold((0.0, 0usize), |(a, b), (_, &(sum, n))| (a + sum, b + n));
        (n > 0).then(|| sum / n as f64)
    }
}
