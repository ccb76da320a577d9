//! Sybil feedback poisoning in three phases: steal a share of legitimate
//! vehicle identities, deploy a Sybil node per stolen identity somewhere in the
//! area, then overwrite the delays those identities report with small values
//! drawn from a plausible range.
//!
//! Only reported values change. Ground-truth delays, vehicle sets and
//! timestamps of a feedback sample are never touched.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::FeedbackSample;
use crate::geo::{Area, Point};
use crate::mobility::Vehicle;
use crate::{ServiceId, VehicleId};

/// Which feedback entries of stolen identities get poisoned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    /// Every service.
    Any,
    /// Only the listed services.
    Selective(BTreeSet<ServiceId>),
}

impl AttackMode {
    pub fn selective_default() -> Self {
        AttackMode::Selective((1..=4).collect())
    }

    pub fn targets(&self, service: ServiceId) -> bool {
        match self {
            AttackMode::Any => true,
            AttackMode::Selective(set) => set.contains(&service),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            AttackMode::Any => "any",
            AttackMode::Selective(_) => "selective",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub enabled: bool,
    /// Fraction of vehicles whose identity is stolen.
    pub proportion: f64,
    pub mode: AttackMode,
    /// Fake delays (ms) substituted into poisoned reports.
    pub fake_delays: Vec<f64>,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            proportion: 0.0,
            mode: AttackMode::selective_default(),
            fake_delays: (3..=9).map(f64::from).collect(),
        }
    }
}

impl AttackConfig {
    pub fn is_active(&self) -> bool {
        self.enabled && self.proportion > 0.0
    }
}

/// Stolen identities and where their Sybil nodes were deployed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SybilRoster {
    pub stolen_ids: BTreeSet<VehicleId>,
    pub deployment_positions: BTreeMap<VehicleId, Point>,
}

impl SybilRoster {
    pub fn is_empty(&self) -> bool {
        self.stolen_ids.is_empty()
    }

    pub fn len(&self) -> usize {
        self.stolen_ids.len()
    }

    pub fn contains(&self, id: VehicleId) -> bool {
        self.stolen_ids.contains(&id)
    }

    /// CSV `vehicle_id,x_m,y_m`, one row per stolen identity.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["vehicle_id", "x_m", "y_m"])?;
        for id in &self.stolen_ids {
            let (x, y) = self
                .deployment_positions
                .get(id)
                .map_or((String::new(), String::new()), |p| (p.x.to_string(), p.y.to_string()));
            w.write_record([id.to_string(), x, y])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Node-compromise phase: `round(proportion · |vehicles|)` distinct ids drawn
/// uniformly. Disabled attacks steal nothing.
pub fn compromise<R: Rng>(vehicles: &[Vehicle], cfg: &AttackConfig, rng: &mut R) -> SybilRoster {
    if !cfg.enabled {
        return SybilRoster::default();
    }
    let count = (cfg.proportion * vehicles.len() as f64).round() as usize;
    if count == 0 {
        if cfg.proportion > 0.0 {
            log::warn!(
                "attack proportion {} of {} vehicles rounds to zero identities",
                cfg.proportion,
                vehicles.len()
            );
        }
        return SybilRoster::default();
    }
    let ids: Vec<VehicleId> = vehicles.iter().map(|v| v.vehicle_id).collect();
    SybilRoster {
        stolen_ids: ids.choose_multiple(rng, count).copied().collect(),
        deployment_positions: BTreeMap::new(),
    }
}

/// Deployment phase: one independent uniform position over the whole area per
/// stolen identity, assigned in ascending id order.
pub fn deploy<R: Rng>(mut roster: SybilRoster, area: &Area, rng: &mut R) -> SybilRoster {
    roster.deployment_positions = roster
        .stolen_ids
        .iter()
        .map(|&id| {
            let p = Point::new(rng.gen_range(0.0..=area.width), rng.gen_range(0.0..=area.height));
            (id, p)
        })
        .collect();
    roster
}

/// Launch phase: every targeted report of a stolen identity is replaced by a
/// uniform draw from `fake_delays`; `avg_reported` is recomputed.
pub fn poison<R: Rng>(sample: &FeedbackSample, roster: &SybilRoster, cfg: &AttackConfig, rng: &mut R) -> FeedbackSample {
    let mut out = sample.clone();
    if !cfg.enabled || roster.is_empty() || cfg.fake_delays.is_empty() || !cfg.mode.targets(sample.service_id) {
        return out;
    }
    let mut touched = false;
    for (id, delay) in &mut out.reported_delays {
        if roster.contains(*id) {
            *delay = *cfg.fake_delays.choose(rng).expect("non-empty");
            touched = true;
        }
    }
    if touched {
        out.recompute_reported_mean();
    }
    out
}
