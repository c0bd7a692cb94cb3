//! The road network: directed graph plus the per-edge, time-dependent
//! travel-time profile (day class x hour-of-day), and S-FIFO validation.

pub mod io;

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::{self, DiscreteDistribution};
use crate::error::{Error, Result};

pub const SECONDS_PER_HOUR: f64 = 3600.0;
pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const HOURS_PER_DAY: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DayClass {
    Weekdays,
    Weekends,
}

impl DayClass {
    pub const ALL: [DayClass; 2] = [DayClass::Weekdays, DayClass::Weekends];

    pub fn index(self) -> usize {
        match self {
            DayClass::Weekdays => 0,
            DayClass::Weekends => 1,
        }
    }

    pub fn from_weekday(weekday: chrono::Weekday) -> Self {
        use chrono::Weekday::*;
        match weekday {
            Sat | Sun => DayClass::Weekends,
            _ => DayClass::Weekdays,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DayClass::Weekdays => "weekdays",
            DayClass::Weekends => "weekends",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "weekdays" | "weekday" | "0" => Ok(DayClass::Weekdays),
            "weekends" | "weekend" | "1" => Ok(DayClass::Weekends),
            other => Err(Error::parse("day class", other)),
        }
    }
}

/// A departure instant: day class plus seconds since midnight. Times past
/// 24 h wrap back to hour 0 of the same day class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockTime {
    pub day_class: DayClass,
    pub seconds: f64,
}

impl ClockTime {
    pub fn new(day_class: DayClass, seconds: f64) -> Result<Self> {
        if !(seconds >= 0.0) || !seconds.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "clock time {seconds} s"
            )));
        }
        Ok(ClockTime { day_class, seconds })
    }

    pub fn hour_bin(&self) -> usize {
        (self.seconds / SECONDS_PER_HOUR) as usize % HOURS_PER_DAY
    }

    pub fn plus(&self, dt: f64) -> ClockTime {
        ClockTime {
            day_class: self.day_class,
            seconds: self.seconds + dt,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Node {
    pub id: u64,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Edge {
    pub id: u64,
    /// Internal node indices, not external ids.
    pub tail: usize,
    pub head: usize,
    pub length_m: f64,
    pub speed_limit_mps: f64,
}

impl Edge {
    /// Best-case traversal duration at the speed limit.
    pub fn free_flow(&self) -> f64 {
        self.length_m / self.speed_limit_mps
    }
}

#[derive(Debug, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    out: Vec<Vec<usize>>,
    node_ids: HashMap<u64, usize>,
    edge_ids: HashMap<u64, usize>,
}

impl Graph {
    /// Edge tuples are `(id, tail_id, head_id, length_m, speed_limit_mps)`
    /// in external node ids.
    pub fn new(nodes: Vec<Node>, edges: Vec<(u64, u64, u64, f64, f64)>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::parse("graph", "empty node list"));
        }
        let mut node_ids = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if node_ids.insert(n.id, i).is_some() {
                return Err(Error::Referential(format!("duplicate node id {}", n.id)));
            }
        }
        let mut out = vec![Vec::new(); nodes.len()];
        let mut edge_ids = HashMap::new();
        let mut resolved = Vec::with_capacity(edges.len());
        for (idx, (id, tail, head, length_m, speed)) in edges.into_iter().enumerate() {
            let tail = *node_ids
                .get(&tail)
                .ok_or_else(|| Error::Referential(format!("edge {id}: unknown tail {tail}")))?;
            let head = *node_ids
                .get(&head)
                .ok_or_else(|| Error::Referential(format!("edge {id}: unknown head {head}")))?;
            if !(length_m > 0.0) {
                return Err(Error::InvalidParameter(format!("edge {id}: length {length_m}")));
            }
            if !(speed > 0.0) {
                return Err(Error::InvalidParameter(format!("edge {id}: speed {speed}")));
            }
            if edge_ids.insert(id, idx).is_some() {
                return Err(Error::Referential(format!("duplicate edge id {id}")));
            }
            out[tail].push(idx);
            resolved.push(Edge {
                id,
                tail,
                head,
                length_m,
                speed_limit_mps: speed,
            });
        }
        Ok(Graph {
            nodes,
            edges: resolved,
            out,
            node_ids,
            edge_ids,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn edge(&self, idx: usize) -> &Edge {
        &self.edges[idx]
    }

    pub fn node_index(&self, id: u64) -> Result<usize> {
        self.node_ids
            .get(&id)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("unknown node id {id}")))
    }

    pub fn edge_index(&self, id: u64) -> Option<usize> {
        self.edge_ids.get(&id).copied()
    }

    /// Outgoing edge indices of a node.
    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out[node]
    }

    pub fn reverse_adjacency(&self) -> Vec<Vec<usize>> {
        let mut incoming = vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            incoming[e.head].push(i);
        }
        incoming
    }

    pub fn max_speed(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| e.speed_limit_mps)
            .fold(0.0, f64::max)
    }

    /// (min_lat, min_lon, max_lat, max_lon) over all nodes.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let mut bb = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for n in &self.nodes {
            bb.0 = bb.0.min(n.lat);
            bb.1 = bb.1.min(n.lon);
            bb.2 = bb.2.max(n.lat);
            bb.3 = bb.3.max(n.lon);
        }
        bb
    }

    /// Nearest node to a coordinate within `radius_m`, by great-circle
    /// distance.
    pub fn snap(&self, lat: f64, lon: f64, radius_m: f64) -> Option<usize> {
        let mut best = None;
        let mut best_d = radius_m;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = haversine_m(lat, lon, n.lat, n.lon);
            if d <= best_d {
                best_d = d;
                best = Some(i);
            }
        }
        best
    }
}

/// Great-circle distance in meters.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    const R: f64 = 6_371_000.0;
    let (la1, la2) = (lat1.to_radians(), lat2.to_radians());
    let dlat = (lat2 - lat1).to_radians();
    let dlon = (lon2 - lon1).to_radians();
    let a = (dlat / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * R * a.sqrt().asin()
}

/// Per-edge travel-time distributions, one per (day class, hour of day).
/// Cells are reference-counted so identical distributions can be shared
/// across edges and hours.
#[derive(Debug, Clone)]
pub struct TimeProfile {
    bin_width: f64,
    edge_cap: f64,
    /// Indexed `[edge][day_class * 24 + hour]`, dense after construction.
    cells: Vec<Vec<Arc<DiscreteDistribution>>>,
    edge_ids: Vec<u64>,
    /// Smallest support point over an edge's cells, cached for heuristics.
    min_support: Vec<f64>,
    /// Smallest cell mean over an edge's cells, cached for heuristics.
    min_mean: Vec<f64>,
}

pub const DEFAULT_BIN_WIDTH: f64 = 6.0;
pub const DEFAULT_EDGE_CAP: f64 = 600.0;

impl TimeProfile {
    /// Build with one distribution per cell supplied by `cell_fn`. The
    /// closure may return shared `Arc`s.
    pub fn from_fn<F>(graph: &Graph, bin_width: f64, edge_cap: f64, mut cell_fn: F) -> Result<Self>
    where
        F: FnMut(usize, DayClass, usize) -> Arc<DiscreteDistribution>,
    {
        let mut cells = Vec::with_capacity(graph.num_edges());
        let mut min_support = Vec::with_capacity(graph.num_edges());
        let mut min_mean = Vec::with_capacity(graph.num_edges());
        // cells are usually shared Arcs; memoize their stats by pointer
        let mut stats: HashMap<*const DiscreteDistribution, (f64, f64)> = HashMap::new();
        for e in 0..graph.num_edges() {
            let mut row = Vec::with_capacity(2 * HOURS_PER_DAY);
            let (mut lo, mut lo_mean) = (f64::INFINITY, f64::INFINITY);
            for class in DayClass::ALL {
                for hour in 0..HOURS_PER_DAY {
                    let d = cell_fn(e, class, hour);
                    if d.bin_width() != bin_width {
                        return Err(Error::BinWidthMismatch(bin_width, d.bin_width()));
                    }
                    let (s, m) = *stats
                        .entry(Arc::as_ptr(&d))
                        .or_insert_with(|| (d.support_min(), d.mean()));
                    lo = lo.min(s);
                    lo_mean = lo_mean.min(m);
                    row.push(d);
                }
            }
            cells.push(row);
            min_support.push(lo);
            min_mean.push(lo_mean);
        }
        Ok(TimeProfile {
            bin_width,
            edge_cap,
            cells,
            edge_ids: graph.edges().iter().map(|e| e.id).collect(),
            min_support,
            min_mean,
        })
    }

    /// Same distribution in every cell of every edge.
    pub fn constant(graph: &Graph, edge_cap: f64, d: DiscreteDistribution) -> Result<Self> {
        let shared = Arc::new(d);
        TimeProfile::from_fn(graph, shared.bin_width(), edge_cap, |_, _, _| shared.clone())
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn edge_cap(&self) -> f64 {
        self.edge_cap
    }

    pub fn num_edges(&self) -> usize {
        self.cells.len()
    }

    pub fn edge_ids(&self) -> &[u64] {
        &self.edge_ids
    }

    pub fn cell(&self, edge_idx: usize, class: DayClass, hour: usize) -> &DiscreteDistribution {
        &self.cells[edge_idx][class.index() * HOURS_PER_DAY + hour]
    }

    /// Smallest support duration over the edge's cells.
    pub fn edge_min_support(&self, edge_idx: usize) -> f64 {
        self.min_support[edge_idx]
    }

    /// Smallest cell mean over the edge's cells.
    pub fn edge_min_mean(&self, edge_idx: usize) -> f64 {
        self.min_mean[edge_idx]
    }

    pub fn cells_for_edge(
        &self,
        edge_idx: usize,
    ) -> impl Iterator<Item = &DiscreteDistribution> + '_ {
        self.cells[edge_idx].iter().map(|a| a.as_ref())
    }

    /// Distribution governing `edge` for a departure at `t`. Piecewise
    /// constant on hour bins; wraps mod 24 h within the same day class.
    pub fn lookup(&self, edge_idx: usize, t: &ClockTime) -> Result<&DiscreteDistribution> {
        let row = self.cells.get(edge_idx).ok_or(Error::MissingProfile {
            edge_id: edge_idx as u64,
        })?;
        Ok(&row[t.day_class.index() * HOURS_PER_DAY + t.hour_bin()])
    }

    /// Append one edge to a subpath cost: the time-dependent extension of
    /// `d` by this edge for a subpath departure at `t`.
    pub fn extend(
        &self,
        d: &DiscreteDistribution,
        edge_idx: usize,
        t: &ClockTime,
    ) -> Result<DiscreteDistribution> {
        let row = self.cells.get(edge_idx).ok_or(Error::MissingProfile {
            edge_id: edge_idx as u64,
        })?;
        dist::extend_time_dependent(d, |elapsed| {
            let at = t.plus(elapsed);
            Ok(row[at.day_class.index() * HOURS_PER_DAY + at.hour_bin()].as_ref())
        })
    }

    /// Exact distribution of a whole path traversed edge-by-edge from `t`,
    /// capped at `horizon` after every extension (the same arithmetic the
    /// search applies to labels).
    pub fn path_cost(
        &self,
        path_edges: &[usize],
        t: &ClockTime,
        horizon: f64,
    ) -> Result<DiscreteDistribution> {
        let mut cost = DiscreteDistribution::point_mass(self.bin_width, 0.0)?;
        for &e in path_edges {
            cost = self.extend(&cost, e, t)?.cap(horizon)?;
        }
        Ok(cost)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SfifoSeverity {
    /// Departing just before the bin boundary can still arrive earlier than
    /// departing after it: quantile drop exceeds the bin length.
    Hard,
    /// Quantile decreases across the boundary but within the bin length.
    Soft,
}

#[derive(Debug, Clone, Serialize)]
pub struct SfifoViolation {
    pub edge_id: u64,
    pub day_class: DayClass,
    /// Hour bin on the early side of the boundary (late side is `(hour+1) % 24`).
    pub hour: usize,
    pub alpha: f64,
    pub severity: SfifoSeverity,
    pub quantile_before: f64,
    pub quantile_after: f64,
}

/// Check the stochastic-FIFO property at every hour-bin boundary of every
/// edge, at each confidence level in `alpha_grid`.
pub fn validate_sfifo(profile: &TimeProfile, alpha_grid: &[f64]) -> Result<Vec<SfifoViolation>> {
    for a in alpha_grid {
        if !(*a > 0.0 && *a <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha {a} outside (0, 1]")));
        }
    }
    let mut violations = Vec::new();
    for edge_idx in 0..profile.num_edges() {
        for class in DayClass::ALL {
            for hour in 0..HOURS_PER_DAY {
                let next = (hour + 1) % HOURS_PER_DAY;
                let d0 = profile.cell(edge_idx, class, hour);
                let d1 = profile.cell(edge_idx, class, next);
                for &alpha in alpha_grid {
                    let q0 = d0.quantile(alpha)?;
                    let q1 = d1.quantile(alpha)?;
                    let severity = if q0 > SECONDS_PER_HOUR + q1 + 1e-9 {
                        SfifoSeverity::Hard
                    } else if q0 > q1 + 1e-9 {
                        SfifoSeverity::Soft
                    } else {
                        continue;
                    };
                    violations.push(SfifoViolation {
                        edge_id: profile.edge_ids[edge_idx],
                        day_class: class,
                        hour,
                        alpha,
                        severity,
                        quantile_before: q0,
                        quantile_after: q1,
                    });
                }
            }
        }
    }
    Ok(violations)
}

/// Accumulates per-cell distributions keyed by external edge id, then
/// resolves them against a graph, filling missing cells with a degenerate
/// free-flow distribution.
#[derive(Debug)]
pub struct TimeProfileBuilder {
    bin_width: f64,
    edge_cap: f64,
    cells: HashMap<(u64, DayClass, usize), Arc<DiscreteDistribution>>,
}

impl TimeProfileBuilder {
    pub fn new(bin_width: f64, edge_cap: f64) -> Self {
        TimeProfileBuilder {
            bin_width,
            edge_cap,
            cells: HashMap::new(),
        }
    }

    pub fn set(
        &mut self,
        edge_id: u64,
        class: DayClass,
        hour: usize,
        d: DiscreteDistribution,
    ) -> Result<()> {
        if d.bin_width() != self.bin_width {
            return Err(Error::BinWidthMismatch(self.bin_width, d.bin_width()));
        }
        if hour >= HOURS_PER_DAY {
            return Err(Error::InvalidParameter(format!("hour {hour}")));
        }
        if d.support_max() > self.edge_cap + 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "edge {edge_id}: support {} exceeds edge cap {}",
                d.support_max(),
                self.edge_cap
            )));
        }
        self.cells.insert((edge_id, class, hour), Arc::new(d));
        Ok(())
    }

    pub fn build(self, graph: &Graph) -> Result<TimeProfile> {
        for (edge_id, _, _) in self.cells.keys() {
            if graph.edge_index(*edge_id).is_none() {
                return Err(Error::Referential(format!(
                    "profile references unknown edge id {edge_id}"
                )));
            }
        }
        let mut fallbacks: HashMap<usize, Arc<DiscreteDistribution>> = HashMap::new();
        for e in 0..graph.num_edges() {
            let ff = graph.edge(e).free_flow().min(self.edge_cap);
            fallbacks.insert(e, Arc::new(DiscreteDistribution::point_mass(self.bin_width, ff)?));
        }
        let cells = &self.cells;
        TimeProfile::from_fn(graph, self.bin_width, self.edge_cap, |e, class, hour| {
            cells
                .get(&(graph.edge(e).id, class, hour))
                .cloned()
                .unwrap_or_else(|| fallbacks[&e].clone())
        })
    }
}
