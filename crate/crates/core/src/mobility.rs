//! Vehicle trajectories and service requests.
//!
//! Trajectories come either from cabspotting-format taxi traces (one text file
//! per taxi, lines `latitude longitude occupancy unix-timestamp`, newest first)
//! or from a seeded random-waypoint generator. Both produce the same
//! [`Vehicle`] shape: a position per simulation tick, `None` while the vehicle
//! is outside the study area.
//!
//! The normalized on-disk form is a CSV `vehicle_id,t,x_m,y_m`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{Area, Point};
use crate::scenario::ServiceSpec;
use crate::seed;
use crate::{ServiceId, Tick, VehicleId};

/// Mean Earth radius (m) used by the equirectangular projection.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Error)]
pub enum MobilityError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("trace csv {path}: {message}")]
    Csv { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLonBox {
    pub min: LatLon,
    pub max: LatLon,
}

impl LatLonBox {
    pub fn contains(&self, p: &LatLon) -> bool {
        p.lat >= self.min.lat && p.lat <= self.max.lat && p.lon >= self.min.lon && p.lon <= self.max.lon
    }

    /// The box spanning `area` north and east of `origin` under the
    /// equirectangular projection about `origin`.
    pub fn from_origin(origin: LatLon, area: &Area) -> Self {
        let dlat = (area.height / EARTH_RADIUS_M).to_degrees();
        let dlon = (area.width / (EARTH_RADIUS_M * origin.lat.to_radians().cos())).to_degrees();
        Self {
            min: origin,
            max: LatLon {
                lat: origin.lat + dlat,
                lon: origin.lon + dlon,
            },
        }
    }
}

/// Equirectangular projection of `p` about `origin`, in meters east/north.
pub fn project(p: LatLon, origin: LatLon) -> Point {
    let k = EARTH_RADIUS_M * PI / 180.0;
    Point::new(
        (p.lon - origin.lon) * k * origin.lat.to_radians().cos(),
        (p.lat - origin.lat) * k,
    )
}

/// Where trace files are clipped and how they are projected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    /// South-west corner of the study area; also the projection origin.
    pub origin: LatLon,
    /// Clip box. Defaults to the area extent north-east of `origin`.
    pub bbox: Option<LatLonBox>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        // Eastern San Francisco, covering downtown and the Mission.
        Self {
            origin: LatLon {
                lat: 37.7100,
                lon: -122.4700,
            },
            bbox: None,
        }
    }
}

impl TraceConfig {
    pub fn bbox_for(&self, area: &Area) -> LatLonBox {
        self.bbox.unwrap_or_else(|| LatLonBox::from_origin(self.origin, area))
    }
}

/// Vehicle population and synthetic random-waypoint parameters.
///
/// Waypoints are drawn uniformly over the area with probability
/// `1 - hotspot_bias`, otherwise uniformly within `hotspot_radius` of one of
/// `hotspots` attraction points. The attraction points are redrawn every
/// `hotspot_period` ticks, which makes demand drift over the run. When
/// `hotspot_sites` is non-empty the attraction points tour those sites
/// instead of being drawn anywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilityConfig {
    pub vehicles: u32,
    /// Wall-clock seconds represented by one tick.
    pub tick_seconds: f64,
    pub min_speed: f64,
    /// Upper bound on speed, m/s. Per-tick displacement never exceeds
    /// `max_speed * tick_seconds`.
    pub max_speed: f64,
    pub max_pause_ticks: u32,
    pub hotspots: u32,
    pub hotspot_bias: f64,
    pub hotspot_radius: f64,
    pub hotspot_period: u32,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub hotspot_sites: Vec<Point>,
    pub trace: TraceConfig,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            vehicles: 500,
            tick_seconds: 60.0,
            min_speed: 3.0,
            max_speed: 15.0,
            max_pause_ticks: 3,
            hotspots: 2,
            hotspot_bias: 0.8,
            hotspot_radius: 1_500.0,
            hotspot_period: 120,
            hotspot_sites: Vec::new(),
            trace: TraceConfig::default(),
        }
    }
}

impl MobilityConfig {
    pub(crate) fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.vehicles < 1 {
            v.push("mobility.vehicles must be >= 1".to_string());
        }
        if !(self.tick_seconds > 0.0) {
            v.push("mobility.tick_seconds must be > 0".to_string());
        }
        if !(self.min_speed >= 0.0 && self.min_speed <= self.max_speed) {
            v.push("mobility speeds must satisfy 0 <= min_speed <= max_speed".to_string());
        }
        if !(0.0..=1.0).contains(&self.hotspot_bias) {
            v.push("mobility.hotspot_bias out of [0,1]".to_string());
        }
        if self.hotspot_bias > 0.0 && self.hotspots == 0 {
            v.push("mobility.hotspots must be >= 1 when hotspot_bias > 0".to_string());
        }
        if self.hotspot_period < 1 {
            v.push("mobility.hotspot_period must be >= 1".to_string());
        }
        if self.hotspot_sites.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            v.push("mobility.hotspot_sites must be finite points".to_string());
        }
        if !(self.hotspot_radius >= 0.0) {
            v.push("mobility.hotspot_radius must be >= 0".to_string());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub vehicle_id: VehicleId,
    /// Position at tick `t` is `trajectory[t - 1]`; `None` while inactive.
    pub trajectory: Vec<Option<Point>>,
}

impl Vehicle {
    pub fn inactive(vehicle_id: VehicleId, horizon: u32) -> Self {
        Self {
            vehicle_id,
            trajectory: vec![None; horizon as usize],
        }
    }

    pub fn position_at(&self, t: Tick) -> Option<Point> {
        if t == 0 {
            return None;
        }
        self.trajectory.get(t as usize - 1).copied().flatten()
    }

    pub fn active_ticks(&self) -> usize {
        self.trajectory.iter().filter(|p| p.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceRequest {
    pub vehicle_id: VehicleId,
    pub service_id: ServiceId,
    pub location: Point,
    pub time: Tick,
}

/// Result of parsing a trace directory.
#[derive(Debug, Clone)]
pub struct TraceSet {
    pub vehicles: Vec<Vehicle>,
    /// Source file name of each vehicle, in vehicle-id order.
    pub files: Vec<String>,
    pub malformed_lines: usize,
}

struct Fix {
    lat: f64,
    lon: f64,
    ts: i64,
}

fn parse_fixes(text: &str) -> (Vec<Fix>, usize) {
    let mut fixes = Vec::new();
    let mut bad = 0;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parsed = (|| {
            let lat: f64 = it.next()?.parse().ok()?;
            let lon: f64 = it.next()?.parse().ok()?;
            let _occupancy: i64 = it.next()?.parse().ok()?;
            let ts: i64 = it.next()?.parse().ok()?;
            if it.next().is_some() || !lat.is_finite() || !lon.is_finite() {
                return None;
            }
            Some(Fix { lat, lon, ts })
        })();
        match parsed {
            Some(f) => fixes.push(f),
            None => bad += 1,
        }
    }
    (fixes, bad)
}

fn trace_files(dir: &Path) -> Result<Vec<PathBuf>, MobilityError> {
    let io = |source| MobilityError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        // `_cabs.txt` in the dataset is an index, not a trace.
        if path.is_file() && name.ends_with(".txt") && !name.starts_with('_') {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Parses a cabspotting directory into one [`Vehicle`] per taxi file.
///
/// Vehicle ids follow sorted file names. The wall-clock span covered by all
/// fixes is cut into `horizon` equal bins; each bin keeps its latest fix, which
/// is dropped if it lies outside `bbox`. Malformed lines are skipped and
/// counted.
pub fn parse_cabspotting(
    dir: impl AsRef<Path>,
    bbox: &LatLonBox,
    origin: LatLon,
    area: &Area,
    horizon: u32,
) -> Result<TraceSet, MobilityError> {
    let files = trace_files(dir.as_ref())?;
    let parsed: Vec<(Vec<Fix>, usize)> = files
        .par_iter()
        .map(|path| {
            let text = fs::read_to_string(path).map_err(|source| MobilityError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(parse_fixes(&text))
        })
        .collect::<Result<_, MobilityError>>()?;

    let malformed_lines = parsed.iter().map(|(_, bad)| bad).sum();
    if malformed_lines > 0 {
        log::warn!("skipped {malformed_lines} malformed trace lines");
    }
    let span = parsed
        .iter()
        .flat_map(|(fixes, _)| fixes.iter().map(|f| f.ts))
        .fold(None, |acc: Option<(i64, i64)>, ts| match acc {
            None => Some((ts, ts)),
            Some((lo, hi)) => Some((lo.min(ts), hi.max(ts))),
        });

    let vehicles = parsed
        .iter()
        .enumerate()
        .map(|(i, (fixes, _))| {
            let id = i as VehicleId + 1;
            let mut v = Vehicle::inactive(id, horizon);
            let Some((lo, hi)) = span else { return v };
            let width = (hi - lo + 1) as u128;
            let mut latest: Vec<Option<&Fix>> = vec![None; horizon as usize];
            for fix in fixes {
                let bin = ((fix.ts - lo) as u128 * horizon as u128 / width) as usize;
                let slot = &mut latest[bin];
                if slot.map_or(true, |cur| fix.ts > cur.ts) {
                    *slot = Some(fix);
                }
            }
            for (slot, fix) in v.trajectory.iter_mut().zip(latest) {
                if let Some(f) = fix {
                    let ll = LatLon { lat: f.lat, lon: f.lon };
                    if bbox.contains(&ll) {
                        *slot = Some(area.clamp(project(ll, origin)));
                    }
                }
            }
            v
        })
        .collect();

    Ok(TraceSet {
        vehicles,
        files: files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
        malformed_lines,
    })
}

fn uniform_point<R: Rng>(rng: &mut R, area: &Area) -> Point {
    Point::new(rng.gen_range(0.0..=area.width), rng.gen_range(0.0..=area.height))
}

/// Attraction points for each hotspot epoch `0..epochs`.
pub fn hotspot_schedule(seed_value: u64, epochs: u64, cfg: &MobilityConfig, area: &Area) -> Vec<Vec<Point>> {
    if cfg.hotspot_sites.is_empty() {
        return (0..epochs)
            .map(|k| {
                let mut rng = seed::stream_at(seed_value, "hotspot-epoch", k);
                (0..cfg.hotspots).map(|_| uniform_point(&mut rng, area)).collect()
            })
            .collect();
    }
    // Fixed sites are toured in shuffled rounds, so over a run every site is
    // active about equally often, and a round never starts where the
    // previous one ended.
    let sites: Vec<Point> = cfg.hotspot_sites.iter().map(|p| area.clamp(*p)).collect();
    let n = (cfg.hotspots as usize).min(sites.len());
    let mut rng = seed::stream(seed_value, "hotspot-tour");
    let mut tour: Vec<usize> = Vec::new();
    let mut last = None;
    let mut out = Vec::with_capacity(epochs as usize);
    for _ in 0..epochs {
        while tour.len() < n {
            let mut round: Vec<usize> = (0..sites.len()).collect();
            round.shuffle(&mut rng);
            if round.len() > 1 && Some(round[0]) == last {
                let end = round.len() - 1;
                round.swap(0, end);
            }
            last = round.last().copied();
            tour.extend(round);
        }
        out.push(tour.drain(..n).map(|i| sites[i]).collect());
    }
    out
}

fn next_waypoint<R: Rng>(rng: &mut R, hotspots: &[Point], cfg: &MobilityConfig, area: &Area) -> Point {
    if !hotspots.is_empty() && rng.gen_bool(cfg.hotspot_bias) {
        let c = hotspots[rng.gen_range(0..hotspots.len())];
        // uniform in a disc
        let r = cfg.hotspot_radius * rng.gen::<f64>().sqrt();
        let th = rng.gen_range(0.0..2.0 * PI);
        area.clamp(Point::new(c.x + r * th.cos(), c.y + r * th.sin()))
    } else {
        uniform_point(rng, area)
    }
}

/// Seeded random-waypoint trajectories, always active inside `area`.
pub fn synthesize_vehicles(
    count: u32,
    horizon: u32,
    area: &Area,
    cfg: &MobilityConfig,
    seed_value: u64,
) -> Vec<Vehicle> {
    let period = cfg.hotspot_period.max(1);
    let epochs = (horizon as u64).div_ceil(period as u64).max(1);
    let centers = hotspot_schedule(seed_value, epochs, cfg, area);
    let step_limit = cfg.max_speed * cfg.tick_seconds;

    (1..=count)
        .into_par_iter()
        .map(|id| {
            let mut rng = seed::stream_at(seed_value, "vehicle", id as u64);
            let mut pos = next_waypoint(&mut rng, &centers[0], cfg, area);
            let mut target = next_waypoint(&mut rng, &centers[0], cfg, area);
            let mut speed = rng.gen_range(cfg.min_speed..=cfg.max_speed);
            let mut pause = 0u32;
            let mut trajectory = Vec::with_capacity(horizon as usize);
            for t in 1..=horizon {
                if t > 1 {
                    if pause > 0 {
                        pause -= 1;
                    } else {
                        let step = (speed * cfg.tick_seconds).min(step_limit);
                        let d = pos.distance(&target);
                        if d <= step {
                            pos = target;
                            let epoch = ((t - 1) / period) as usize;
                            target = next_waypoint(&mut rng, &centers[epoch], cfg, area);
                            speed = rng.gen_range(cfg.min_speed..=cfg.max_speed);
                            pause = rng.gen_range(0..=cfg.max_pause_ticks);
                        } else {
                            let f = step / d;
                            pos = Point::new(pos.x + (target.x - pos.x) * f, pos.y + (target.y - pos.y) * f);
                        }
                    }
                }
                trajectory.push(Some(pos));
            }
            Vehicle {
                vehicle_id: id,
                trajectory,
            }
        })
        .collect()
}

/// One request per vehicle active at `t`, with a uniformly drawn service.
/// Vehicles are visited in the given order, so the draw sequence depends only
/// on `rng` and the vehicle list.
pub fn generate_requests<R: Rng>(
    vehicles: &[Vehicle],
    services: &[ServiceSpec],
    t: Tick,
    rng: &mut R,
) -> Vec<ServiceRequest> {
    let s = services.len() as ServiceId;
    vehicles
        .iter()
        .filter_map(|v| {
            let location = v.position_at(t)?;
            Some(ServiceRequest {
                vehicle_id: v.vehicle_id,
                service_id: rng.gen_range(1..=s),
                location,
                time: t,
            })
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    vehicle_id: VehicleId,
    t: Tick,
    x_m: f64,
    y_m: f64,
}

pub fn write_trace_csv<W: Write>(vehicles: &[Vehicle], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for v in vehicles {
        for (i, p) in v.trajectory.iter().enumerate() {
            if let Some(p) = p {
                w.serialize(TraceRow {
                    vehicle_id: v.vehicle_id,
                    t: i as Tick + 1,
                    x_m: p.x,
                    y_m: p.y,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a normalized trace. Vehicle ids must be ≥ 1; ids without rows
/// become vehicles with empty trajectories.
pub fn read_trace_csv<R: Read>(input: R, horizon: u32) -> Result<Vec<Vehicle>, String> {
    let mut r = csv::Reader::from_reader(input);
    let mut by_id: BTreeMap<VehicleId, Vehicle> = BTreeMap::new();
    for (line, row) in r.deserialize::<TraceRow>().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        if row.vehicle_id == 0 || row.t == 0 || row.t > horizon {
            return Err(format!("row {}: vehicle_id/t out of range", line + 2));
        }
        let v = by_id
            .entry(row.vehicle_id)
            .or_insert_with(|| Vehicle::inactive(row.vehicle_id, horizon));
        v.trajectory[row.t as usize - 1] = Some(Point::new(row.x_m, row.y_m));
    }
    let max_id = by_id.keys().next_back().copied().unwrap_or(0);
    Ok((1..=max_id)
        .map(|id| by_id.remove(&id).unwrap_or_else(|| Vehicle::inactive(id, horizon)))
        .collect())
}

pub fn load_trace_csv(path: impl AsRef<Path>, horizon: u32) -> Result<Vec<Vehicle>, MobilityError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| MobilityError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_trace_csv(file, horizon).map_err(|message| MobilityError::Csv {
        path: path.to_path_buf(),
        message,
    })
}
