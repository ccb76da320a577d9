//! Static scenario configuration: services, edge nodes, horizon and the
//! learning/attack hyperparameters. Loaded from TOML and validated before a
//! run; immutable afterwards.
//!
//! Only `services`, `edges` and `horizon` are required in the file. Every
//! other key falls back to the defaults below. See `configs/default.toml` for
//! a fully spelled-out example.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AttackConfig, AttackMode};
use crate::geo::{Area, Point};
use crate::mobility::MobilityConfig;
use crate::{EdgeId, ServiceId};

/// Largest edge count supported by the bitmask placement encoding.
pub const MAX_EDGES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceSpec {
    pub service_id: ServiceId,
    /// Resource units one instance consumes on its host.
    pub resource_req: f64,
    /// Maximum tolerable delay in ms.
    pub delay_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeNode {
    pub edge_id: EdgeId,
    pub position: Point,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayModelParams {
    /// Fixed processing delay at an edge server, ms.
    #[serde(default = "default_proc_delay")]
    pub proc_delay: f64,
    /// Propagation/backhaul penalty per meter of vehicle-edge distance, ms/m.
    #[serde(default = "default_per_meter_delay")]
    pub per_meter_delay: f64,
    /// Delay of a service with no edge instance, served from the cloud, ms.
    #[serde(default = "default_cloud_delay")]
    pub cloud_fallback_delay: f64,
}

fn default_proc_delay() -> f64 {
    1.0
}
fn default_per_meter_delay() -> f64 {
    0.002
}
fn default_cloud_delay() -> f64 {
    50.0
}

impl Default for DelayModelParams {
    fn default() -> Self {
        Self {
            proc_delay: default_proc_delay(),
            per_meter_delay: default_per_meter_delay(),
            cloud_fallback_delay: default_cloud_delay(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Mini-batch size N of the critic loss.
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Mean of the random gap T between critic training rounds, in ticks.
    /// The gap is drawn uniformly from `1..=2*mean-1`.
    pub train_period_mean: u32,
    /// Gradient steps per training round.
    pub steps_per_round: u32,
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    /// Delay scale δ (ms) of the quality target `exp(-delay/δ)`.
    pub quality_scale: f64,
    /// Re-optimize when the critic's quality drops strictly below this.
    pub reopt_threshold: f64,
    /// Weight γ of the bootstrapped `Q(next state, action)` term mixed into
    /// the target. Zero keeps the immediate-quality target.
    pub bootstrap_discount: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            replay_capacity: 128,
            train_period_mean: 4,
            steps_per_round: 8,
            hidden_layers: vec![64, 64],
            learning_rate: 0.05,
            quality_scale: 20.0,
            reopt_threshold: 0.5,
            bootstrap_discount: 0.0,
        }
    }
}

/// How the placement objective folds per-service delay into a cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayNormalization {
    /// Mean delay divided by the service's delay threshold (dimensionless).
    #[default]
    Threshold,
    /// Mean delay in raw milliseconds.
    RawMs,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub horizon: u32,
    /// Weight of maximum edge utilization against maximum service delay.
    pub alpha: f64,
    pub delay_norm: DelayNormalization,
    pub area_size: Area,
    pub services: Vec<ServiceSpec>,
    pub edges: Vec<EdgeNode>,
    pub delay_model: DelayModelParams,
    pub training: TrainingConfig,
    pub attack: AttackConfig,
    pub mobility: MobilityConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    edge_id: Option<EdgeId>,
    position: Option<Point>,
    capacity: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_seed")]
    seed: u64,
    horizon: u32,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default)]
    delay_norm: DelayNormalization,
    #[serde(default)]
    area_size: Area,
    services: Vec<ServiceSpec>,
    edges: Vec<RawEdge>,
    #[serde(default)]
    delay_model: DelayModelParams,
    #[serde(default)]
    training: TrainingConfig,
    #[serde(default)]
    attack: AttackConfig,
    #[serde(default)]
    mobility: MobilityConfig,
}

fn default_seed() -> u64 {
    1
}
fn default_alpha() -> f64 {
    0.5
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid scenario:\n{0}")]
    Invalid(ValidationReport),
    #[error("cannot serialize config: {0}")]
    Serialize(String),
}

/// Invariant violations and advisory warnings for a scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty() && self.warnings.is_empty()
    }

    /// A scenario with warnings only can still be simulated.
    pub fn is_runnable(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  error: {v}")?;
        }
        for w in &self.warnings {
            writeln!(f, "  warning: {w}")?;
        }
        Ok(())
    }
}

impl ScenarioConfig {
    /// Scenario with the evaluation defaults: 8 services, 6 edge nodes on a
    /// 2×3 grid over a 10×10 km area, 900 time units.
    pub fn baseline() -> Self {
        let area = Area::default();
        let services = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]
            .iter()
            .zip([14.0, 16.0, 18.0, 20.0, 22.0, 24.0, 26.0, 28.0])
            .enumerate()
            .map(|(i, (&r, d))| ServiceSpec {
                service_id: i as ServiceId + 1,
                resource_req: r,
                delay_threshold: d,
            })
            .collect();
        let edges = [60.0, 70.0, 80.0, 90.0, 100.0, 100.0]
            .iter()
            .zip(area.grid_centers(2, 3))
            .enumerate()
            .map(|(i, (&c, p))| EdgeNode {
                edge_id: i as EdgeId + 1,
                position: p,
                capacity: c,
            })
            .collect();
        Self {
            seed: 1,
            horizon: 900,
            alpha: default_alpha(),
            delay_norm: DelayNormalization::default(),
            area_size: area,
            services,
            edges,
            delay_model: DelayModelParams::default(),
            training: TrainingConfig::default(),
            attack: AttackConfig::default(),
            mobility: MobilityConfig::default(),
        }
    }

    pub fn num_services(&self) -> usize {
        self.services.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn service(&self, id: ServiceId) -> &ServiceSpec {
        &self.services[id as usize - 1]
    }

    pub fn edge(&self, id: EdgeId) -> &EdgeNode {
        &self.edges[id as usize - 1]
    }

    /// Parses and validates a TOML scenario.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let cfg = raw.resolve();
        let report = validate_scenario(&cfg);
        if !report.is_runnable() {
            return Err(ConfigError::Invalid(report));
        }
        for w in &report.warnings {
            log::warn!("scenario: {w}");
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Serialize(e.to_string()))
    }
}

impl RawConfig {
    fn resolve(self) -> ScenarioConfig {
        let n = self.edges.len();
        let grid = default_edge_positions(&self.area_size, n);
        let edges = self
            .edges
            .into_iter()
            .enumerate()
            .map(|(i, e)| EdgeNode {
                edge_id: e.edge_id.unwrap_or(i as EdgeId + 1),
                position: e.position.unwrap_or(grid[i]),
                capacity: e.capacity,
            })
            .collect();
        ScenarioConfig {
            seed: self.seed,
            horizon: self.horizon,
            alpha: self.alpha,
            delay_norm: self.delay_norm,
            area_size: self.area_size,
            services: self.services,
            edges,
            delay_model: self.delay_model,
            training: self.training,
            attack: self.attack,
            mobility: self.mobility,
        }
    }
}

/// Grid cell centers for `n` edges without explicit positions: the most
/// square `rows × cols` grid with `rows ≤ cols`, filled row-major.
pub fn default_edge_positions(area: &Area, n: usize) -> Vec<Point> {
    if n == 0 {
        return Vec::new();
    }
    let mut rows = (n as f64).sqrt().floor() as usize;
    while n % rows != 0 {
        rows -= 1;
    }
    let cols = n / rows;
    area.grid_centers(rows, cols)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ScenarioConfig::from_toml_str(&text)
}

pub fn serialize_config(cfg: &ScenarioConfig) -> Result<String, ConfigError> {
    cfg.to_toml_string()
}

fn check_contiguous(ids: impl Iterator<Item = u32>, what: &str, out: &mut Vec<String>) {
    for (i, id) in ids.enumerate() {
        if id as usize != i + 1 {
            out.push(format!(
                "{what} ids must be unique and contiguous from 1 in order; position {} has id {id}",
                i + 1
            ));
            return;
        }
    }
}

/// Lists every invariant violation of `cfg`. An empty `violations` list means
/// the scenario can be simulated.
pub fn validate_scenario(cfg: &ScenarioConfig) -> ValidationReport {
    let mut v = Vec::new();
    let mut w = Vec::new();

    if cfg.services.is_empty() {
        v.push("at least one service is required".to_string());
    }
    if cfg.edges.is_empty() {
        v.push("at least one edge is required".to_string());
    }
    if cfg.edges.len() > MAX_EDGES {
        v.push(format!("at most {MAX_EDGES} edges are supported, got {}", cfg.edges.len()));
    }
    check_contiguous(cfg.services.iter().map(|s| s.service_id), "service", &mut v);
    check_contiguous(cfg.edges.iter().map(|e| e.edge_id), "edge", &mut v);

    for s in &cfg.services {
        if !(s.resource_req > 0.0) {
            v.push(format!("service {}: resource_req must be > 0", s.service_id));
        }
        if !(s.delay_threshold > 0.0) {
            v.push(format!("service {}: delay_threshold must be > 0", s.service_id));
        }
    }
    if !(cfg.area_size.width > 0.0 && cfg.area_size.height > 0.0) {
        v.push("area_size must be positive".to_string());
    }
    for e in &cfg.edges {
        if !(e.capacity > 0.0) {
            v.push(format!("edge {}: capacity must be > 0", e.edge_id));
        }
        if !cfg.area_size.contains(&e.position) {
            v.push(format!("edge {}: position outside the area", e.edge_id));
        }
    }
    if cfg.horizon < 1 {
        v.push("horizon must be >= 1".to_string());
    }
    if !(0.0..=1.0).contains(&cfg.alpha) {
        v.push("alpha out of [0,1]".to_string());
    }

    let dm = &cfg.delay_model;
    if !(dm.proc_delay > 0.0) {
        v.push("delay_model.proc_delay must be > 0 so delays stay strictly positive".to_string());
    }
    if !(dm.per_meter_delay >= 0.0) {
        v.push("delay_model.per_meter_delay must be >= 0".to_string());
    }
    if !(dm.cloud_fallback_delay > 0.0) {
        v.push("delay_model.cloud_fallback_delay must be > 0".to_string());
    }

    let t = &cfg.training;
    if t.batch_size < 1 {
        v.push("training.batch_size must be >= 1".to_string());
    }
    if t.replay_capacity < t.batch_size {
        v.push("training.replay_capacity must be >= batch_size".to_string());
    }
    if t.train_period_mean < 1 {
        v.push("training.train_period_mean must be >= 1".to_string());
    }
    if !(t.learning_rate > 0.0) {
        v.push("training.learning_rate must be > 0".to_string());
    }
    if !(t.quality_scale > 0.0) {
        v.push("training.quality_scale must be > 0".to_string());
    }
    if !(0.0..=1.0).contains(&t.reopt_threshold) {
        v.push("training.reopt_threshold out of [0,1]".to_string());
    }
    if !(0.0..1.0).contains(&t.bootstrap_discount) {
        v.push("training.bootstrap_discount out of [0,1)".to_string());
    }
    if t.hidden_layers.iter().any(|&h| h == 0) {
        v.push("training.hidden_layers widths must be >= 1".to_string());
    }

    let a = &cfg.attack;
    if !(0.0..=1.0).contains(&a.proportion) {
        v.push("attack.proportion out of [0,1]".to_string());
    }
    if a.enabled && a.fake_delays.is_empty() {
        v.push("attack.fake_delays must be non-empty when the attack is enabled".to_string());
    }
    if a.fake_delays.iter().any(|&d| !(d > 0.0)) {
        v.push("attack.fake_delays must be > 0".to_string());
    }
    if let (true, AttackMode::Selective(set)) = (a.enabled, &a.mode) {
        let s = cfg.services.len() as ServiceId;
        if set.iter().any(|&id| id < 1 || id > s) {
            v.push(format!("attack.mode selective services must lie in 1..={s}"));
        }
    }

    v.extend(cfg.mobility.violations());

    let demand: f64 = cfg.services.iter().map(|s| s.resource_req).sum();
    let supply: f64 = cfg.edges.iter().map(|e| e.capacity).sum();
    if demand > supply {
        w.push(format!(
            "total resource demand {demand} exceeds total edge capacity {supply}; no single-copy placement is feasible"
        ));
    }

    ValidationReport {
        violations: v,
        warnings: w,
    }
}
