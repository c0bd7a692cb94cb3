//! Estimation of travel-time profiles from trip records: cleaning, trip
//! assignment to a free-flow shortest path, uniform-speed splitting of the
//! recorded duration over the path's edges, and histogram accumulation per
//! (edge, day class, hour) cell.

use std::collections::HashMap;
use std::path::Path;

use chrono::{NaiveDateTime, Timelike};
use serde::Serialize;

use crate::dist::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::heuristic::shortest_path_by_weight;
use crate::network::{haversine_m, ClockTime, DayClass, Graph, TimeProfile, TimeProfileBuilder};

#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub pickup_ts: NaiveDateTime,
    pub dropoff_ts: NaiveDateTime,
    pub pickup_lat: f64,
    pub pickup_lon: f64,
    pub dropoff_lat: f64,
    pub dropoff_lon: f64,
}

impl TripRecord {
    pub fn duration_s(&self) -> f64 {
        (self.dropoff_ts - self.pickup_ts).num_milliseconds() as f64 / 1000.0
    }

    pub fn straight_line_m(&self) -> f64 {
        haversine_m(
            self.pickup_lat,
            self.pickup_lon,
            self.dropoff_lat,
            self.dropoff_lon,
        )
    }
}

/// Cleaning thresholds. The source procedure names the steps but gives no
/// numbers, so these are explicit configuration with stated defaults.
#[derive(Debug, Clone)]
pub struct CleanConfig {
    /// Trips whose implied straight-line speed exceeds this are dropped.
    pub max_speed_mps: f64,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub min_distance_m: f64,
    /// Padding added around the graph bounding box, in degrees.
    pub bbox_pad_deg: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            max_speed_mps: 40.0,
            min_duration_s: 30.0,
            max_duration_s: 4.0 * 3600.0,
            min_distance_m: 50.0,
            bbox_pad_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CleanReport {
    pub kept: u64,
    pub dropped_out_of_region: u64,
    pub dropped_negative_duration: u64,
    pub dropped_too_short: u64,
    pub dropped_too_long: u64,
    pub dropped_too_close: u64,
    pub dropped_too_fast: u64,
}

/// Drop records outside the graph region or with implausible geometry or
/// timing. Returns the survivors and per-reason counts.
pub fn clean(
    records: Vec<TripRecord>,
    graph: &Graph,
    config: &CleanConfig,
) -> (Vec<TripRecord>, CleanReport) {
    let (min_lat, min_lon, max_lat, max_lon) = graph.bounding_box();
    let pad = config.bbox_pad_deg;
    let in_box = |lat: f64, lon: f64| {
        lat >= min_lat - pad && lat <= max_lat + pad && lon >= min_lon - pad && lon <= max_lon + pad
    };
    let mut report = CleanReport::default();
    let mut kept = Vec::new();
    for r in records {
        if !in_box(r.pickup_lat, r.pickup_lon) || !in_box(r.dropoff_lat, r.dropoff_lon) {
            report.dropped_out_of_region += 1;
            continue;
        }
        let dur = r.duration_s();
        if dur < 0.0 {
            report.dropped_negative_duration += 1;
            continue;
        }
        if dur < config.min_duration_s {
            report.dropped_too_short += 1;
            continue;
        }
        if dur > config.max_duration_s {
            report.dropped_too_long += 1;
            continue;
        }
        let dist = r.straight_line_m();
        if dist < config.min_distance_m {
            report.dropped_too_close += 1;
            continue;
        }
        if dist / dur > config.max_speed_mps {
            report.dropped_too_fast += 1;
            continue;
        }
        report.kept += 1;
        kept.push(r);
    }
    (kept, report)
}

/// One duration sample for one edge of an assigned trip.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSample {
    pub edge_idx: usize,
    pub depart: ClockTime,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SkipReason {
    SnapFailed,
    Disconnected,
    DegeneratePath,
}

/// Assign a trip to its free-flow shortest path and split the recorded
/// duration over the path's edges in proportion to length. Each edge sample
/// departs at the trip pickup time plus the durations of the preceding
/// edges, so long trips straddle hour bins edge by edge.
pub fn assign_and_split(
    record: &TripRecord,
    graph: &Graph,
    free_flow_weights: &[f64],
    snap_radius_m: f64,
) -> std::result::Result<Vec<EdgeSample>, SkipReason> {
    let o = graph
        .snap(record.pickup_lat, record.pickup_lon, snap_radius_m)
        .ok_or(SkipReason::SnapFailed)?;
    let d = graph
        .snap(record.dropoff_lat, record.dropoff_lon, snap_radius_m)
        .ok_or(SkipReason::SnapFailed)?;
    if o == d {
        return Err(SkipReason::DegeneratePath);
    }
    let path = shortest_path_by_weight(graph, free_flow_weights, o, d)
        .ok_or(SkipReason::Disconnected)?;
    let day_class = DayClass::from_weekday(chrono::Datelike::weekday(&record.pickup_ts.date()));
    let pickup_s = record.pickup_ts.time().num_seconds_from_midnight() as f64
        + record.pickup_ts.time().nanosecond() as f64 * 1e-9;
    let c_pi = record.duration_s();
    let l_pi: f64 = path.iter().map(|&e| graph.edge(e).length_m).sum();
    let mut samples = Vec::with_capacity(path.len());
    let mut cum_len = 0.0;
    let mut prev_elapsed = 0.0;
    for &e in &path {
        let depart = ClockTime {
            day_class,
            seconds: pickup_s + prev_elapsed,
        };
        cum_len += graph.edge(e).length_m;
        // Telescoping split: the per-edge durations sum to c_pi exactly.
        let elapsed = c_pi * (cum_len / l_pi);
        samples.push(EdgeSample {
            edge_idx: e,
            depart,
            duration_s: elapsed - prev_elapsed,
        });
        prev_elapsed = elapsed;
    }
    Ok(samples)
}

/// Histogram counts per (edge, day class, hour) cell, on the profile grid.
/// Accumulation is commutative, so accumulators built from partitions of
/// the input merge into the same result.
#[derive(Debug, Clone)]
pub struct SampleAccumulator {
    bin_width: f64,
    edge_cap: f64,
    cap_bins: usize,
    cells: HashMap<(usize, DayClass, usize), Vec<u64>>,
}

impl SampleAccumulator {
    pub fn new(bin_width: f64, edge_cap: f64) -> Result<Self> {
        if !(bin_width > 0.0 && edge_cap > 0.0) {
            return Err(Error::InvalidParameter(
                "bin width and edge cap must be positive".into(),
            ));
        }
        Ok(SampleAccumulator {
            bin_width,
            edge_cap,
            cap_bins: (edge_cap / bin_width + 1e-9).floor() as usize,
            cells: HashMap::new(),
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn edge_cap(&self) -> f64 {
        self.edge_cap
    }

    pub fn add(&mut self, sample: &EdgeSample) {
        let bin = ((sample.duration_s / self.bin_width + 1e-9).floor() as usize).min(self.cap_bins);
        let key = (
            sample.edge_idx,
            sample.depart.day_class,
            sample.depart.hour_bin(),
        );
        let hist = self
            .cells
            .entry(key)
            .or_insert_with(|| vec![0; self.cap_bins + 1]);
        hist[bin] += 1;
    }

    pub fn merge(&mut self, other: SampleAccumulator) {
        for (key, hist) in other.cells {
            match self.cells.get_mut(&key) {
                Some(mine) => {
                    for (a, b) in mine.iter_mut().zip(hist) {
                        *a += b;
                    }
                }
                None => {
                    self.cells.insert(key, hist);
                }
            }
        }
    }

    pub fn cell_count(&self, edge_idx: usize, class: DayClass, hour: usize) -> u64 {
        self.cells
            .get(&(edge_idx, class, hour))
            .map(|h| h.iter().sum())
            .unwrap_or(0)
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Normalize every cell into a distribution. Cells with fewer than
    /// `min_samples` observations are blended with the free-flow point mass
    /// as (n * pmf + freeflow) / (n + 1); empty cells fall back to free flow
    /// entirely.
    pub fn finalize(&self, graph: &Graph, min_samples: u64) -> Result<TimeProfile> {
        let mut builder = TimeProfileBuilder::new(self.bin_width, self.edge_cap);
        for ((edge_idx, class, hour), hist) in &self.cells {
            let n: u64 = hist.iter().sum();
            if n == 0 {
                continue;
            }
            let counts: Vec<f64> = hist.iter().map(|&c| c as f64).collect();
            let mut d = DiscreteDistribution::from_counts(self.bin_width, 0, counts)?;
            if n < min_samples {
                let ff = graph.edge(*edge_idx).free_flow().min(self.edge_cap);
                let ff = DiscreteDistribution::point_mass(self.bin_width, ff)?;
                d = DiscreteDistribution::mixture(&[(n as f64, &d), (1.0, &ff)])?;
            }
            builder.set(graph.edge(*edge_idx).id, *class, *hour, d)?;
        }
        builder.build(graph)
    }
}

/// Default input schema; a [`ColumnMap`] adapts other layouts.
#[derive(Debug, Clone)]
pub struct ColumnMap {
    pub pickup_datetime: String,
    pub dropoff_datetime: String,
    pub pickup_lat: String,
    pub pickup_lon: String,
    pub dropoff_lat: String,
    pub dropoff_lon: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            pickup_datetime: "pickup_datetime".into(),
            dropoff_datetime: "dropoff_datetime".into(),
            pickup_lat: "pickup_lat".into(),
            pickup_lon: "pickup_lon".into(),
            dropoff_lat: "dropoff_lat".into(),
            dropoff_lon: "dropoff_lon".into(),
        }
    }
}

impl ColumnMap {
    /// Apply `name=other_name` overrides, comma-separated.
    pub fn with_overrides(mut self, spec: &str) -> Result<Self> {
        for part in spec.split(',').filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::parse("column map", part))?;
            let slot = match key {
                "pickup_datetime" => &mut self.pickup_datetime,
                "dropoff_datetime" => &mut self.dropoff_datetime,
                "pickup_lat" => &mut self.pickup_lat,
                "pickup_lon" => &mut self.pickup_lon,
                "dropoff_lat" => &mut self.dropoff_lat,
                "dropoff_lon" => &mut self.dropoff_lon,
                other => return Err(Error::parse("column map", other)),
            };
            *slot = value.to_string();
        }
        Ok(self)
    }
}

fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%d %H:%M:%S"))
        .ok()
}

/// Read trip records from a CSV file. Malformed rows are skipped and
/// counted, not fatal.
pub fn read_trips_csv(path: &Path, columns: &ColumnMap) -> Result<(Vec<TripRecord>, u64)> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(path.display().to_string(), format!("missing column {name}")))
    };
    let (ipt, idt) = (col(&columns.pickup_datetime)?, col(&columns.dropoff_datetime)?);
    let (ipa, ipo) = (col(&columns.pickup_lat)?, col(&columns.pickup_lon)?);
    let (ida, ido) = (col(&columns.dropoff_lat)?, col(&columns.dropoff_lon)?);
    let mut records = Vec::new();
    let mut malformed = 0;
    for rec in rdr.records() {
        let Ok(rec) = rec else {
            malformed += 1;
            continue;
        };
        let parsed = (|| {
            Some(TripRecord {
                pickup_ts: parse_datetime(rec.get(ipt)?)?,
                dropoff_ts: parse_datetime(rec.get(idt)?)?,
                pickup_lat: rec.get(ipa)?.trim().parse().ok()?,
                pickup_lon: rec.get(ipo)?.trim().parse().ok()?,
                dropoff_lat: rec.get(ida)?.trim().parse().ok()?,
                dropoff_lon: rec.get(ido)?.trim().parse().ok()?,
            })
        })();
        match parsed {
            Some(r) if r.pickup_lat.is_finite() && r.dropoff_lat.is_finite() => records.push(r),
            _ => malformed += 1,
        }
    }
    Ok((records, malformed))
}
