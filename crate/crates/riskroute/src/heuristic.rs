//! Admissible heuristics toward a fixed destination.
//!
//! `h(n)` lower-bounds every realizable remaining duration from `n` to the
//! destination and feeds label priorities; `h_exp(n)` lower-bounds the
//! expected remaining duration and feeds the expectation-based pruning rule.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::str::FromStr;

use crate::dist::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::network::{haversine_m, Graph, TimeProfile};
use crate::risk::RiskSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeuristicKind {
    /// Reverse shortest-path sweep with per-edge lower bounds
    /// min(length/speed_limit, minimum support of the edge's distributions).
    Network,
    /// Straight-line distance divided by the network-wide maximum speed.
    Euclidean,
    /// Network shortest *length* divided by the network-wide maximum speed,
    /// the single-v_max form.
    Paper,
}

impl FromStr for HeuristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "network" => Ok(HeuristicKind::Network),
            "euclidean" => Ok(HeuristicKind::Euclidean),
            "paper" => Ok(HeuristicKind::Paper),
            other => Err(Error::parse("heuristic", other)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HeuristicTable {
    dest: usize,
    /// Lower bound on any realizable remaining duration; +inf if the
    /// destination is unreachable from the node.
    h: Vec<f64>,
    /// Lower bound on the expected remaining duration.
    h_exp: Vec<f64>,
}

impl HeuristicTable {
    pub fn build(
        graph: &Graph,
        profile: &TimeProfile,
        dest: usize,
        kind: HeuristicKind,
    ) -> Result<Self> {
        if dest >= graph.num_nodes() {
            return Err(Error::InvalidParameter(format!("destination index {dest}")));
        }
        match kind {
            HeuristicKind::Network => {
                let min_w = edge_min_durations(graph, profile);
                let mean_w = edge_min_means(graph, profile);
                let h = reverse_sweep(graph, dest, &min_w);
                let h_exp = reverse_sweep(graph, dest, &mean_w);
                Ok(HeuristicTable { dest, h, h_exp })
            }
            HeuristicKind::Paper => {
                let v_max = graph.max_speed();
                let lengths: Vec<f64> = graph.edges().iter().map(|e| e.length_m).collect();
                let h: Vec<f64> = reverse_sweep(graph, dest, &lengths)
                    .into_iter()
                    .map(|d| d / v_max)
                    .collect();
                let h_exp = h.clone();
                Ok(HeuristicTable { dest, h, h_exp })
            }
            HeuristicKind::Euclidean => {
                let v_max = graph.max_speed();
                let d = graph.node(dest);
                let h: Vec<f64> = graph
                    .nodes()
                    .iter()
                    .map(|n| haversine_m(n.lat, n.lon, d.lat, d.lon) / v_max)
                    .collect();
                let h_exp = h.clone();
                Ok(HeuristicTable { dest, h, h_exp })
            }
        }
    }

    pub fn dest(&self) -> usize {
        self.dest
    }

    pub fn h(&self, node: usize) -> f64 {
        self.h[node]
    }

    pub fn h_exp(&self, node: usize) -> f64 {
        self.h_exp[node]
    }

    /// Label priority: rho of the label's cost shifted by the (grid-rounded,
    /// downward) heuristic remainder.
    pub fn priority(
        &self,
        label_cost: &DiscreteDistribution,
        node: usize,
        spec: &RiskSpec,
    ) -> Result<f64> {
        let h = self.h[node];
        if h.is_infinite() {
            return Ok(f64::INFINITY);
        }
        if h == 0.0 {
            return spec.evaluate(label_cost);
        }
        spec.evaluate(&label_cost.shift(h)?)
    }
}

/// Per-edge lower bound on any realizable duration: free flow capped by the
/// smallest support point observed in any hour bin of either day class.
/// Taking the min keeps admissibility even when estimated histograms contain
/// sub-free-flow samples.
pub fn edge_min_durations(graph: &Graph, profile: &TimeProfile) -> Vec<f64> {
    (0..graph.num_edges())
        .map(|e| graph.edge(e).free_flow().min(profile.edge_min_support(e)))
        .collect()
}

fn edge_min_means(graph: &Graph, profile: &TimeProfile) -> Vec<f64> {
    (0..graph.num_edges()).map(|e| profile.edge_min_mean(e)).collect()
}

struct HeapItem(f64, usize);

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0 && self.1 == other.1
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed for a min-heap
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// Dijkstra over the reversed graph from `dest`; unreachable nodes get +inf.
fn reverse_sweep(graph: &Graph, dest: usize, weights: &[f64]) -> Vec<f64> {
    let incoming = graph.reverse_adjacency();
    let mut dist = vec![f64::INFINITY; graph.num_nodes()];
    dist[dest] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapItem(0.0, dest));
    while let Some(HeapItem(d, n)) = heap.pop() {
        if d > dist[n] {
            continue;
        }
        for &e in &incoming[n] {
            let edge = graph.edge(e);
            let nd = d + weights[e];
            if nd < dist[edge.tail] {
                dist[edge.tail] = nd;
                heap.push(HeapItem(nd, edge.tail));
            }
        }
    }
    dist
}

/// Forward Dijkstra with explicit edge weights; returns the edge sequence of
/// a shortest path, or None if unreachable. Deterministic tie-breaking by
/// node index.
pub fn shortest_path_by_weight(
    graph: &Graph,
    weights: &[f64],
    origin: usize,
    dest: usize,
) -> Option<Vec<usize>> {
    let mut dist = vec![f64::INFINITY; graph.num_nodes()];
    let mut via: Vec<Option<usize>> = vec![None; graph.num_nodes()];
    dist[origin] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapItem(0.0, origin));
    while let Some(HeapItem(d, n)) = heap.pop() {
        if d > dist[n] {
            continue;
        }
        if n == dest {
            break;
        }
        for &e in graph.out_edges(n) {
            let edge = graph.edge(e);
            let nd = d + weights[e];
            if nd < dist[edge.head] {
                dist[edge.head] = nd;
                via[edge.head] = Some(e);
                heap.push(HeapItem(nd, edge.head));
            }
        }
    }
    if dist[dest].is_infinite() {
        return None;
    }
    let mut path = Vec::new();
    let mut n = dest;
    while n != origin {
        let e = via[n]?;
        path.push(e);
        n = graph.edge(e).tail;
    }
    path.reverse();
    Some(path)
}
