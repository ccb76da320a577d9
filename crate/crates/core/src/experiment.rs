//! Attack-proportion × mode sweeps over several seeds, and result export.
//!
//! Every cell runs once per seed. The no-attack cell (proportion 0) is shared
//! by both modes. Each run is seeded by its seed alone; adversary streams add
//! a label naming the attack setting, so adding or removing cells never
//! changes another cell's streams. Runs execute in parallel and are merged
//! in (cell, seed) order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adversary::AttackMode;
use crate::agent::{self, Simulation, TickLog};
use crate::metrics::{self, FairnessMode, VehicleDelayTable};
use crate::mobility::{self, MobilityError, Vehicle};
use crate::netmodel;
use crate::scenario::{validate_scenario, ScenarioConfig, ValidationReport};
use crate::seed;
use crate::{EdgeId, ServiceId};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid scenario:\n{0}")]
    Invalid(ValidationReport),
    #[error("no seeds given")]
    NoSeeds,
    #[error("trace: {0}")]
    Trace(#[from] MobilityError),
    #[error("trace yields no vehicles")]
    NoVehicles,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Any,
    Selective,
}

impl ModeKind {
    pub fn label(self) -> &'static str {
        match self {
            ModeKind::Any => "any",
            ModeKind::Selective => "selective",
        }
    }
}

/// One sweep cell. `mode` is `None` exactly for the no-attack cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CellKey {
    pub proportion_pct: u32,
    pub mode: Option<ModeKind>,
}

impl CellKey {
    pub const NO_ATTACK: CellKey = CellKey {
        proportion_pct: 0,
        mode: None,
    };

    pub fn attacked(proportion_pct: u32, mode: ModeKind) -> Self {
        Self {
            proportion_pct,
            mode: Some(mode),
        }
    }

    /// `na`, `any-10`, `selective-50`, ...
    pub fn label(&self) -> String {
        match self.mode {
            None => "na".to_string(),
            Some(m) => format!("{}-{}", m.label(), self.proportion_pct),
        }
    }

    fn mode_label(&self) -> &'static str {
        self.mode.map_or("na", ModeKind::label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sweep {
    /// Attack proportions in percent.
    pub proportions_pct: Vec<u32>,
    pub modes: Vec<ModeKind>,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            proportions_pct: vec![0, 10, 20, 30, 40, 50],
            modes: vec![ModeKind::Any, ModeKind::Selective],
        }
    }
}

impl Sweep {
    /// Cells in output order: the no-attack cell first (if swept), then each
    /// mode's proportions ascending.
    pub fn cells(&self) -> Vec<CellKey> {
        let props: BTreeSet<u32> = self.proportions_pct.iter().copied().collect();
        let modes: BTreeSet<ModeKind> = self.modes.iter().copied().collect();
        let mut cells = Vec::new();
        if props.contains(&0) {
            cells.push(CellKey::NO_ATTACK);
        }
        for m in modes {
            cells.extend(props.iter().filter(|p| **p > 0).map(|&p| CellKey::attacked(p, m)));
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MobilitySource {
    /// Seeded synthetic trajectories, regenerated per seed.
    Synthetic,
    /// Raw cabspotting directory or normalized trace CSV, shared by all seeds.
    Trace(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    pub sweep: Sweep,
    pub seeds: Vec<u64>,
    pub mobility: MobilitySource,
    pub fairness: FairnessMode,
    /// Keep every run's tick logs so [`export`] can write them as NDJSON.
    pub keep_tick_logs: bool,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            sweep: Sweep::default(),
            seeds: vec![1, 2, 3, 4, 5],
            mobility: MobilitySource::Synthetic,
            fairness: FairnessMode::default(),
            keep_tick_logs: false,
        }
    }
}

/// Metrics of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub reopt_count: usize,
    pub avg_delay: BTreeMap<ServiceId, f64>,
    /// True delays of the stolen identities.
    pub targeted_delay: BTreeMap<ServiceId, f64>,
    /// The same identities' delays in the same-seed no-attack run.
    pub baseline_targeted_delay: BTreeMap<ServiceId, f64>,
    /// Pooled targeted delay over the attacked services.
    pub targeted_attacked: Option<f64>,
    pub baseline_attacked: Option<f64>,
    pub resource: BTreeMap<EdgeId, f64>,
    pub fairness: Option<f64>,
    pub sybil_count: usize,
    /// Ticks whose in-force placement broke a capacity constraint.
    pub capacity_violations: usize,
    #[serde(skip)]
    pub tick_logs: Option<Vec<TickLog>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub key: CellKey,
    pub runs: Vec<RunRecord>,
    /// `(seed, message)` for every failed run.
    pub errors: Vec<(u64, String)>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn mean_maps<K: Ord + Copy>(maps: impl Iterator<Item = BTreeMap<K, f64>>) -> BTreeMap<K, f64> {
    let mut acc: BTreeMap<K, (f64, usize)> = BTreeMap::new();
    for m in maps {
        for (k, v) in m {
            let e = acc.entry(k).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

impl CellResult {
    pub fn succeeded(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn mean_reopt(&self) -> Option<f64> {
        mean(self.runs.iter().map(|r| r.reopt_count as f64))
    }

    pub fn mean_fairness(&self) -> Option<f64> {
        mean(self.runs.iter().filter_map(|r| r.fairness))
    }

    pub fn mean_targeted_attacked(&self) -> Option<f64> {
        mean(self.runs.iter().filter_map(|r| r.targeted_attacked))
    }

    pub fn mean_baseline_attacked(&self) -> Option<f64> {
        mean(self.runs.iter().filter_map(|r| r.baseline_attacked))
    }

    pub fn mean_avg_delay(&self) -> BTreeMap<ServiceId, f64> {
        mean_maps(self.runs.iter().map(|r| r.avg_delay.clone()))
    }

    pub fn mean_targeted_delay(&self) -> BTreeMap<ServiceId, f64> {
        mean_maps(self.runs.iter().map(|r| r.targeted_delay.clone()))
    }

    pub fn mean_baseline_targeted_delay(&self) -> BTreeMap<ServiceId, f64> {
        mean_maps(self.runs.iter().map(|r| r.baseline_targeted_delay.clone()))
    }

    pub fn mean_resource(&self) -> BTreeMap<EdgeId, f64> {
        mean_maps(self.runs.iter().map(|r| r.resource.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultsBundle {
    pub seeds: Vec<u64>,
    pub cells: Vec<CellResult>,
}

impl ResultsBundle {
    pub fn all_succeeded(&self) -> bool {
        self.cells.iter().all(CellResult::succeeded)
    }

    pub fn cell(&self, key: CellKey) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.key == key)
    }
}

/// Scenario for one cell: the base scenario with the attack overridden.
pub fn cell_config(base: &ScenarioConfig, key: CellKey) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.attack.proportion = key.proportion_pct as f64 / 100.0;
    cfg.attack.enabled = key.mode.is_some() && key.proportion_pct > 0;
    cfg.attack.mode = match key.mode {
        Some(ModeKind::Any) => AttackMode::Any,
        _ => selective_set(base),
    };
    cfg
}

/// The configured selective target set, or the default one.
fn selective_set(base: &ScenarioConfig) -> AttackMode {
    match &base.attack.mode {
        m @ AttackMode::Selective(_) => m.clone(),
        AttackMode::Any => AttackMode::selective_default(),
    }
}

fn attacked_services(cfg: &ScenarioConfig) -> BTreeSet<ServiceId> {
    (1..=cfg.num_services() as ServiceId)
        .filter(|&s| cfg.attack.mode.targets(s))
        .collect()
}

/// Vehicles for a run seeded with `run_seed`.
pub fn synthetic_vehicles(cfg: &ScenarioConfig, run_seed: u64) -> Vec<Vehicle> {
    mobility::synthesize_vehicles(
        cfg.mobility.vehicles,
        cfg.horizon,
        &cfg.area_size,
        &cfg.mobility,
        seed::derive(run_seed, "mobility"),
    )
}

pub fn load_trace(cfg: &ScenarioConfig, path: &Path) -> Result<Vec<Vehicle>, ExperimentError> {
    let vehicles = if path.is_dir() {
        let trace = &cfg.mobility.trace;
        let set = mobility::parse_cabspotting(
            path,
            &trace.bbox_for(&cfg.area_size),
            trace.origin,
            &cfg.area_size,
            cfg.horizon,
        )?;
        if set.malformed_lines > 0 {
            log::warn!("{}: skipped {} malformed lines", path.display(), set.malformed_lines);
        }
        log::info!("{}: {} taxi files parsed", path.display(), set.files.len());
        set.vehicles
    } else {
        mobility::load_trace_csv(path, cfg.horizon)?
    };
    if vehicles.iter().all(|v| v.active_ticks() == 0) {
        return Err(ExperimentError::NoVehicles);
    }
    Ok(vehicles)
}

struct Baseline {
    table: VehicleDelayTable,
}

fn run_cell(
    base: &ScenarioConfig,
    key: CellKey,
    vehicles: &[Vehicle],
    run_seed: u64,
    baseline: Option<&Baseline>,
    opts: &ExperimentOptions,
) -> Result<(RunRecord, Option<Baseline>), String> {
    let cfg = cell_config(base, key);
    let outcome = Simulation::new(&cfg, vehicles, run_seed)
        .run()
        .map_err(|e| e.to_string())?;
    let logs = outcome.logs;
    let roster = outcome.roster;

    let capacity_violations = logs
        .iter()
        .filter(|l| !netmodel::is_feasible(&l.action, &cfg.services, &cfg.edges))
        .count();
    if capacity_violations > 0 {
        log::error!("{} seed {run_seed}: {capacity_violations} over-capacity ticks", key.label());
    }

    let table = VehicleDelayTable::from_logs(&logs);
    let attacked = attacked_services(&cfg);
    let (targeted_attacked, baseline_targeted_delay, baseline_attacked) = if roster.is_empty() {
        (None, BTreeMap::new(), None)
    } else {
        let b = baseline.map(|b| &b.table);
        (
            table.pooled(&roster.stolen_ids, &attacked),
            b.map(|t| t.restricted(&roster.stolen_ids)).unwrap_or_default(),
            b.and_then(|t| t.pooled(&roster.stolen_ids, &attacked)),
        )
    };

    let record = RunRecord {
        seed: run_seed,
        reopt_count: metrics::reopt_count(&logs),
        avg_delay: metrics::avg_service_delay(&logs),
        targeted_delay: metrics::targeted_delay(&logs, &roster),
        baseline_targeted_delay,
        targeted_attacked,
        baseline_attacked,
        resource: metrics::resource_usage(&logs, &cfg),
        fairness: metrics::fairness(&logs, &cfg, opts.fairness).ok(),
        sybil_count: roster.len(),
        capacity_violations,
        tick_logs: opts.keep_tick_logs.then_some(logs),
    };
    let keep = (key == CellKey::NO_ATTACK).then_some(Baseline { table });
    Ok((record, keep))
}

type Outcome = (CellKey, u64, Result<RunRecord, String>);

fn run_seed(
    cfg: &ScenarioConfig,
    cells: &[CellKey],
    shared: Option<&[Vehicle]>,
    run_seed: u64,
    opts: &ExperimentOptions,
) -> Vec<Outcome> {
    let owned;
    let vehicles: &[Vehicle] = match shared {
        Some(v) => v,
        None => {
            owned = synthetic_vehicles(cfg, run_seed);
            &owned
        }
    };

    // The no-attack run always goes first: attacked cells compare against it.
    let (na, baseline) = match run_cell(cfg, CellKey::NO_ATTACK, vehicles, run_seed, None, opts) {
        Ok((rec, b)) => (Ok(rec), b),
        Err(e) => (Err(e), None),
    };
    let mut out: Vec<Outcome> = Vec::with_capacity(cells.len());
    if cells.contains(&CellKey::NO_ATTACK) {
        out.push((CellKey::NO_ATTACK, run_seed, na));
    }
    let attacked: Vec<Outcome> = cells
        .par_iter()
        .filter(|k| **k != CellKey::NO_ATTACK)
        .map(|&k| {
            let r = run_cell(cfg, k, vehicles, run_seed, baseline.as_ref(), opts).map(|(rec, _)| rec);
            (k, run_seed, r)
        })
        .collect();
    out.extend(attacked);
    out
}

pub fn run_experiment(cfg: &ScenarioConfig, opts: &ExperimentOptions) -> Result<ResultsBundle, ExperimentError> {
    let report = validate_scenario(cfg);
    if !report.is_runnable() {
        return Err(ExperimentError::Invalid(report));
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }
    if opts.seeds.is_empty() {
        return Err(ExperimentError::NoSeeds);
    }
    let shared = match &opts.mobility {
        MobilitySource::Synthetic => None,
        MobilitySource::Trace(path) => Some(load_trace(cfg, path)?),
    };
    let cells = opts.sweep.cells();
    let seeds: Vec<u64> = opts.seeds.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();

    let outcomes: Vec<Outcome> = seeds
        .par_iter()
        .flat_map_iter(|&s| run_seed(cfg, &cells, shared.as_deref(), s, opts))
        .collect();

    let mut by_cell: BTreeMap<CellKey, CellResult> = cells
        .iter()
        .map(|&key| {
            (
                key,
                CellResult {
                    key,
                    runs: Vec::new(),
                    errors: Vec::new(),
                },
            )
        })
        .collect();
    let mut sorted = outcomes;
    sorted.sort_by_key(|(k, s, _)| (*k, *s));
    for (key, s, result) in sorted {
        let cell = by_cell.get_mut(&key).expect("known cell");
        match result {
            Ok(rec) => cell.runs.push(rec),
            Err(e) => {
                log::error!("{} seed {s}: {e}", key.label());
                cell.errors.push((s, e));
            }
        }
    }
    let cells = cells
        .iter()
        .map(|k| by_cell.remove(k).expect("known cell"))
        .collect();
    Ok(ResultsBundle { seeds, cells })
}

/// One written file and its SHA-256.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

struct Writer<'a> {
    dir: &'a Path,
    entries: Vec<ManifestEntry>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, data: &[u8]) -> Result<(), ExperimentError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| ExperimentError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        fs::write(&path, data).map_err(|source| ExperimentError::Io { path, source })?;
        self.entries.push(ManifestEntry {
            path: name.to_string(),
            bytes: data.len() as u64,
            sha256: sha256_hex(data),
        });
        Ok(())
    }
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn min_max(values: impl Iterator<Item = f64> + Clone) -> (Option<f64>, Option<f64>) {
    (values.clone().reduce(f64::min), values.reduce(f64::max))
}

fn metric_rows(cell: &CellResult) -> Vec<Vec<String>> {
    let scope = cell.key.label();
    let mut rows = Vec::new();
    let mut push = |metric: &str, key: String, value: f64, seed: String| {
        rows.push(vec![metric.to_string(), scope.clone(), key, value.to_string(), seed]);
    };
    let mut emit = |seed: String,
                    reopt: Option<f64>,
                    avg: &BTreeMap<ServiceId, f64>,
                    targeted: &BTreeMap<ServiceId, f64>,
                    baseline: &BTreeMap<ServiceId, f64>,
                    resource: &BTreeMap<EdgeId, f64>,
                    scalars: [(&str, Option<f64>); 3]| {
        if let Some(r) = reopt {
            push("reopt_count", "all".into(), r, seed.clone());
        }
        for (s, v) in avg {
            push("avg_delay_ms", s.to_string(), *v, seed.clone());
        }
        for (s, v) in targeted {
            push("targeted_delay_ms", s.to_string(), *v, seed.clone());
        }
        for (s, v) in baseline {
            push("baseline_targeted_delay_ms", s.to_string(), *v, seed.clone());
        }
        for (e, v) in resource {
            push("utilization", e.to_string(), *v, seed.clone());
        }
        for (name, v) in scalars {
            if let Some(v) = v {
                push(name, "all".into(), v, seed.clone());
            }
        }
    };
    for r in &cell.runs {
        emit(
            r.seed.to_string(),
            Some(r.reopt_count as f64),
            &r.avg_delay,
            &r.targeted_delay,
            &r.baseline_targeted_delay,
            &r.resource,
            [
                ("fairness", r.fairness),
                ("targeted_attacked_ms", r.targeted_attacked),
                ("baseline_attacked_ms", r.baseline_attacked),
            ],
        );
    }
    if !cell.runs.is_empty() {
        emit(
            "mean".into(),
            cell.mean_reopt(),
            &cell.mean_avg_delay(),
            &cell.mean_targeted_delay(),
            &cell.mean_baseline_targeted_delay(),
            &cell.mean_resource(),
            [
                ("fairness", cell.mean_fairness()),
                ("targeted_attacked_ms", cell.mean_targeted_attacked()),
                ("baseline_attacked_ms", cell.mean_baseline_attacked()),
            ],
        );
    }
    rows
}

#[derive(Serialize)]
struct CellSummary {
    scope: String,
    mode: &'static str,
    proportion_pct: u32,
    seeds_ok: Vec<u64>,
    errors: Vec<(u64, String)>,
    reopt_mean: Option<f64>,
    fairness_mean: Option<f64>,
    targeted_attacked_mean_ms: Option<f64>,
    baseline_attacked_mean_ms: Option<f64>,
    avg_delay_ms: BTreeMap<ServiceId, f64>,
    targeted_delay_ms: BTreeMap<ServiceId, f64>,
    baseline_targeted_delay_ms: BTreeMap<ServiceId, f64>,
    utilization: BTreeMap<EdgeId, f64>,
    runs: Vec<RunRecord>,
}

#[derive(Serialize)]
struct Summary {
    seeds: Vec<u64>,
    all_succeeded: bool,
    cells: Vec<CellSummary>,
}

/// Writes metrics, per-figure plot data, a JSON summary and a manifest of
/// every file with its hash. Returns the manifest entries.
pub fn export(results: &ResultsBundle, out_dir: impl AsRef<Path>) -> Result<Vec<ManifestEntry>, ExperimentError> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut w = Writer {
        dir,
        entries: Vec::new(),
    };
    let cells = &results.cells;

    if !cells.is_empty() {
        let rows = cells.iter().flat_map(metric_rows).collect();
        w.write("metrics.csv", &csv_bytes(&["metric", "scope", "key", "value", "run_seed"], rows))?;

        let head = ["scope", "mode", "proportion_pct"];
        let prefix = |c: &CellResult| {
            vec![
                c.key.label(),
                c.key.mode_label().to_string(),
                c.key.proportion_pct.to_string(),
            ]
        };

        let reopt = cells
            .iter()
            .map(|c| {
                let (lo, hi) = min_max(c.runs.iter().map(|r| r.reopt_count as f64));
                let mut row = prefix(c);
                row.extend([opt(c.mean_reopt()), opt(lo), opt(hi)]);
                row
            })
            .collect();
        w.write("reopt.csv", &csv_bytes(&[&head[..], &["mean", "min", "max"]].concat(), reopt))?;

        let delay_all = cells
            .iter()
            .flat_map(|c| {
                c.mean_avg_delay().into_iter().map(move |(s, v)| {
                    let mut row = prefix(c);
                    row.extend([s.to_string(), v.to_string()]);
                    row
                })
            })
            .collect();
        w.write("delay_all.csv", &csv_bytes(&[&head[..], &["service_id", "mean_ms"]].concat(), delay_all))?;

        let delay_targeted = cells
            .iter()
            .flat_map(|c| {
                let base = c.mean_baseline_targeted_delay();
                c.mean_targeted_delay().into_iter().map(move |(s, v)| {
                    let mut row = prefix(c);
                    row.extend([s.to_string(), v.to_string(), opt(base.get(&s).copied())]);
                    row
                })
            })
            .collect();
        w.write(
            "delay_targeted.csv",
            &csv_bytes(&[&head[..], &["service_id", "targeted_ms", "baseline_ms"]].concat(), delay_targeted),
        )?;

        let resource = cells
            .iter()
            .flat_map(|c| {
                c.mean_resource().into_iter().map(move |(e, v)| {
                    let mut row = prefix(c);
                    row.extend([e.to_string(), v.to_string()]);
                    row
                })
            })
            .collect();
        w.write(
            "resource.csv",
            &csv_bytes(&[&head[..], &["edge_id", "mean_utilization"]].concat(), resource),
        )?;

        let fairness = cells
            .iter()
            .map(|c| {
                let (lo, hi) = min_max(c.runs.iter().filter_map(|r| r.fairness));
                let mut row = prefix(c);
                row.extend([opt(c.mean_fairness()), opt(lo), opt(hi)]);
                row
            })
            .collect();
        w.write("fairness.csv", &csv_bytes(&[&head[..], &["mean", "min", "max"]].concat(), fairness))?;

        for c in cells {
            for r in &c.runs {
                if let Some(logs) = &r.tick_logs {
                    let mut buf = Vec::new();
                    agent::write_ndjson(logs, &mut buf).expect("in-memory write");
                    w.write(&format!("ticks/{}-seed{}.ndjson", c.key.label(), r.seed), &buf)?;
                }
            }
        }
    }

    let summary = Summary {
        seeds: results.seeds.clone(),
        all_succeeded: results.all_succeeded(),
        cells: cells
            .iter()
            .map(|c| CellSummary {
                scope: c.key.label(),
                mode: c.key.mode_label(),
                proportion_pct: c.key.proportion_pct,
                seeds_ok: c.runs.iter().map(|r| r.seed).collect(),
                errors: c.errors.clone(),
                reopt_mean: c.mean_reopt(),
                fairness_mean: c.mean_fairness(),
                targeted_attacked_mean_ms: c.mean_targeted_attacked(),
                baseline_attacked_mean_ms: c.mean_baseline_attacked(),
                avg_delay_ms: c.mean_avg_delay(),
                targeted_delay_ms: c.mean_targeted_delay(),
                baseline_targeted_delay_ms: c.mean_baseline_targeted_delay(),
                utilization: c.mean_resource(),
                runs: c.runs.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    w.write("summary.json", &json)?;

    let entries = w.entries.clone();
    let manifest = serde_json::to_vec_pretty(&serde_json::json!({ "files": entries })).expect("manifest serializes");
    w.write("manifest.json", &manifest)?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::baseline();
        cfg.horizon = 40;
        cfg.mobility.vehicles = 40;
        cfg.training.batch_size = 8;
        cfg.training.hidden_layers = vec![8];
        cfg
    }

    #[test]
    fn default_sweep_has_eleven_cells() {
        let cells = Sweep::default().cells();
        assert_eq!(cells.len(), 11);
        assert_eq!(cells[0], CellKey::NO_ATTACK);
        assert_eq!(cells[1].label(), "any-10");
        assert_eq!(cells[10].label(), "selective-50");
    }

    #[test]
    fn cell_config_overrides_attack_only() {
        let base = tiny();
        let na = cell_config(&base, CellKey::NO_ATTACK);
        assert!(!na.attack.enabled);
        let sel = cell_config(&base, CellKey::attacked(30, ModeKind::Selective));
        assert!(sel.attack.enabled);
        assert_eq!(sel.attack.proportion, 0.3);
        assert_eq!(sel.attack.mode, AttackMode::selective_default());
        assert_eq!(sel.services, base.services);
        assert_eq!(attacked_services(&sel), (1..=4).collect());
    }

    #[test]
    fn single_cell_single_seed() {
        let opts = ExperimentOptions {
            sweep: Sweep {
                proportions_pct: vec![0],
                modes: vec![ModeKind::Any],
            },
            seeds: vec![3],
            ..ExperimentOptions::default()
        };
        let res = run_experiment(&tiny(), &opts).unwrap();
        assert_eq!(res.cells.len(), 1);
        let cell = &res.cells[0];
        assert_eq!(cell.runs.len(), 1);
        assert_eq!(cell.mean_reopt(), Some(cell.runs[0].reopt_count as f64));
        assert_eq!(cell.mean_avg_delay(), cell.runs[0].avg_delay);
    }

    #[test]
    fn no_seeds_is_an_error() {
        let opts = ExperimentOptions {
            seeds: vec![],
            ..ExperimentOptions::default()
        };
        assert!(matches!(run_experiment(&tiny(), &opts), Err(ExperimentError::NoSeeds)));
    }

    #[test]
    fn empty_results_export_summary_only() {
        let dir = tempfile::tempdir().unwrap();
        let res = ResultsBundle {
            seeds: vec![1],
            cells: vec![],
        };
        let entries = export(&res, dir.path()).unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].path, "summary.json");
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn mean_helpers() {
        assert_eq!(mean([1.0, 2.0, 6.0]), Some(3.0));
        assert_eq!(mean(Vec::<f64>::new()), None);
        let m = mean_maps(
            [
                [(1u32, 2.0), (2, 4.0)].into_iter().collect::<BTreeMap<_, _>>(),
                [(1u32, 4.0)].into_iter().collect(),
            ]
            .into_iter(),
        );
        assert_eq!(m[&1], 3.0);
        assert_eq!(m[&2], 4.0);
    }
}
