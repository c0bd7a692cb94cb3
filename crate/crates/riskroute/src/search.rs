//! Multi-label best-first search for risk-averse shortest paths.
//!
//! Labels carry the full travel-time distribution of a subpath. A node may
//! hold several mutually FSD-incomparable labels; dominated labels are
//! pruned, as are labels whose priority or expectation lower bound cannot
//! beat the best complete path found so far. The search terminates when a
//! destination label is popped, which is then rho-minimum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::dist::{DiscreteDistribution, FsdOrdering};
use crate::error::{Error, Result};
use crate::heuristic::{shortest_path_by_weight, HeuristicTable};
use crate::network::{ClockTime, Graph, TimeProfile, SECONDS_PER_DAY};
use crate::risk::RiskSpec;

#[derive(Debug, Clone)]
pub struct RouteOptions {
    /// Seed the upper bound with the rho value of a deterministic shortest
    /// path before searching.
    pub seed_ub: bool,
    /// Prune labels dominated at their node.
    pub fsd_prune: bool,
    /// Prune labels whose priority cannot beat the upper bound.
    pub ub_prune: bool,
    /// Prune on expectation lower bound vs the upper bound (only applied
    /// when the mean is a valid lower bound of the risk measure).
    pub exp_prune: bool,
    /// Path-level support horizon in seconds; mass beyond it is aggregated
    /// into the horizon bin and recorded in the statistics.
    pub horizon: f64,
    /// Test hook: flip the dominance direction to verify the oracle catches
    /// a wrong-way comparison. Never enable outside tests.
    pub corrupt_dominance: bool,
}

impl Default for RouteOptions {
    fn default() -> Self {
        RouteOptions {
            seed_ub: true,
            fsd_prune: true,
            ub_prune: true,
            exp_prune: true,
            horizon: SECONDS_PER_DAY,
            corrupt_dominance: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SearchStats {
    pub labels_generated: u64,
    pub labels_inserted: u64,
    pub labels_expanded: u64,
    pub pruned_ub: u64,
    pub pruned_exp: u64,
    pub pruned_fsd: u64,
    /// Stored labels later removed because a new label dominated them.
    pub removed_dominated: u64,
    /// Probability mass aggregated into the horizon bin across all labels.
    pub capped_mass: f64,
    pub seeded_ub: Option<f64>,
    /// Every value the upper bound took, in order (non-increasing).
    pub ub_trace: Vec<f64>,
}

impl SearchStats {
    pub fn total_pruned(&self) -> u64 {
        self.pruned_ub + self.pruned_exp + self.pruned_fsd
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RouteResult {
    /// External node ids from origin to destination; empty if unreachable.
    pub path: Vec<u64>,
    /// External edge ids along the path (one fewer than `path`).
    pub path_edges: Vec<u64>,
    #[serde(skip)]
    pub cost: Option<DiscreteDistribution>,
    pub rho: Option<f64>,
    pub stats: SearchStats,
}

impl RouteResult {
    pub fn found(&self) -> bool {
        self.rho.is_some()
    }
}

struct LabelRec {
    node: usize,
    /// Dropped once the label leaves the node store.
    cost: Option<DiscreteDistribution>,
    exp: f64,
    f: f64,
    parent: Option<usize>,
    via_edge: Option<usize>,
    pruned: bool,
    expanded: bool,
}

struct HeapEntry {
    f: f64,
    exp: f64,
    node: usize,
    seq: u64,
    label: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // Min-heap: smaller f first, then smaller expectation, node, FIFO seq.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.exp.total_cmp(&self.exp))
            .then_with(|| other.node.cmp(&self.node))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Compute a rho-minimum path from `origin` to `dest` (external node ids)
/// for a departure at `depart`.
pub fn route(
    graph: &Graph,
    profile: &TimeProfile,
    heur: &HeuristicTable,
    spec: &RiskSpec,
    origin: u64,
    dest: u64,
    depart: &ClockTime,
    options: &RouteOptions,
) -> Result<RouteResult> {
    let o = graph.node_index(origin)?;
    let d = graph.node_index(dest)?;
    if heur.dest() != d {
        return Err(Error::InvalidParameter(
            "heuristic table built for a different destination".into(),
        ));
    }
    let w = profile.bin_width();
    let horizon = (options.horizon / w).floor().max(1.0) * w;
    let mut stats = SearchStats::default();

    if o == d {
        let cost = DiscreteDistribution::point_mass(w, 0.0)?;
        let rho = spec.evaluate(&cost)?;
        return Ok(RouteResult {
            path: vec![origin],
            path_edges: Vec::new(),
            cost: Some(cost),
            rho: Some(rho),
            stats,
        });
    }

    let mut ub = f64::INFINITY;
    if options.seed_ub {
        if let Some(seeded) =
            seed_upper_bound(graph, profile, spec, o, d, depart, horizon)?
        {
            ub = seeded;
            stats.seeded_ub = Some(seeded);
            stats.ub_trace.push(seeded);
        }
    }
    let exp_prune = options.exp_prune && spec.mean_is_lower_bound();

    let mut arena: Vec<LabelRec> = Vec::new();
    let mut stores: Vec<Vec<usize>> = vec![Vec::new(); graph.num_nodes()];
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
    let mut seq: u64 = 0;

    let root_cost = DiscreteDistribution::point_mass(w, 0.0)?;
    let root_f = heur.priority(&root_cost, o, spec)?;
    if root_f.is_infinite() {
        return Ok(RouteResult {
            path: Vec::new(),
            path_edges: Vec::new(),
            cost: None,
            rho: None,
            stats,
        });
    }
    arena.push(LabelRec {
        node: o,
        exp: root_cost.mean(),
        f: root_f,
        cost: Some(root_cost),
        parent: None,
        via_edge: None,
        pruned: false,
        expanded: false,
    });
    stores[o].push(0);
    heap.push(HeapEntry {
        f: root_f,
        exp: arena[0].exp,
        node: o,
        seq,
        label: 0,
    });
    stats.labels_generated += 1;
    stats.labels_inserted += 1;

    while let Some(entry) = heap.pop() {
        let lid = entry.label;
        if arena[lid].pruned || arena[lid].expanded {
            continue;
        }
        let node = arena[lid].node;
        if node == d {
            let cost = arena[lid].cost.clone().expect("destination label kept");
            let rho = arena[lid].f;
            let (path, path_edges) = reconstruct(graph, &arena, lid);
            return Ok(RouteResult {
                path,
                path_edges,
                cost: Some(cost),
                rho: Some(rho),
                stats,
            });
        }
        arena[lid].expanded = true;
        stats.labels_expanded += 1;

        for &e in graph.out_edges(node) {
            let head = graph.edge(e).head;
            let parent_cost = arena[lid].cost.as_ref().expect("expandable label has cost");
            let extended = profile.extend(parent_cost, e, depart)?;
            stats.capped_mass += extended.mass_above(horizon);
            let cost = extended.cap(horizon)?;
            stats.labels_generated += 1;

            if heur.h(head).is_infinite() {
                // cannot reach the destination from here
                continue;
            }
            let exp = cost.mean();
            let f = heur.priority(&cost, head, spec)?;

            if head == d {
                if f < ub {
                    ub = f;
                    stats.ub_trace.push(ub);
                } else if options.ub_prune && f > ub {
                    stats.pruned_ub += 1;
                    continue;
                }
                // f == ub is kept: with a seeded bound the optimal path can
                // tie the seed exactly.
            } else {
                // Strict with slack: an intermediate label tying the bound
                // can still complete into a path that ties it, which must be
                // returned when the bound came from seeding rather than a
                // found label. The slack absorbs last-ulp noise between a
                // convolution's mean and the sum of per-edge means.
                let bound = ub + 1e-9 * ub.abs().max(1.0);
                if options.ub_prune && f > bound {
                    stats.pruned_ub += 1;
                    continue;
                }
                if exp_prune && exp + heur.h_exp(head) > bound {
                    stats.pruned_exp += 1;
                    continue;
                }
            }

            if options.fsd_prune {
                let mut dominated = false;
                let mut remove: Vec<usize> = Vec::new();
                for &sid in &stores[head] {
                    let stored = arena[sid].cost.as_ref().expect("stored label has cost");
                    let mut ord = cost.fsd_compare(stored)?;
                    if options.corrupt_dominance {
                        ord = ord.flipped();
                    }
                    match ord {
                        FsdOrdering::FirstDominates | FsdOrdering::Equal => {
                            dominated = true;
                            break;
                        }
                        FsdOrdering::SecondDominates => remove.push(sid),
                        FsdOrdering::Incomparable => {}
                    }
                }
                if dominated {
                    stats.pruned_fsd += 1;
                    continue;
                }
                for sid in remove {
                    arena[sid].pruned = true;
                    arena[sid].cost = None;
                    stores[head].retain(|&x| x != sid);
                    stats.removed_dominated += 1;
                }
            }

            seq += 1;
            let new_id = arena.len();
            arena.push(LabelRec {
                node: head,
                exp,
                f,
                cost: Some(cost),
                parent: Some(lid),
                via_edge: Some(e),
                pruned: false,
                expanded: false,
            });
            stores[head].push(new_id);
            heap.push(HeapEntry {
                f,
                exp,
                node: head,
                seq,
                label: new_id,
            });
            stats.labels_inserted += 1;

            #[cfg(debug_assertions)]
            if options.fsd_prune && !options.corrupt_dominance {
                debug_assert!(store_is_pareto(&arena, &stores[head]));
            }
        }
    }

    Ok(RouteResult {
        path: Vec::new(),
        path_edges: Vec::new(),
        cost: None,
        rho: None,
        stats,
    })
}

#[cfg(debug_assertions)]
fn store_is_pareto(arena: &[LabelRec], store: &[usize]) -> bool {
    for (i, &a) in store.iter().enumerate() {
        for &b in &store[i + 1..] {
            let (Some(ca), Some(cb)) = (&arena[a].cost, &arena[b].cost) else {
                return false;
            };
            if !matches!(ca.fsd_compare(cb), Ok(FsdOrdering::Incomparable)) {
                return false;
            }
        }
    }
    true
}

/// rho value of a concrete deterministic-shortest path (by smallest cell
/// mean per edge), evaluated on its true stochastic cost; None if the
/// destination is unreachable. Any complete path upper-bounds the optimum,
/// and the min-mean path is usually a far tighter seed than free flow.
pub fn seed_upper_bound(
    graph: &Graph,
    profile: &TimeProfile,
    spec: &RiskSpec,
    origin: usize,
    dest: usize,
    depart: &ClockTime,
    horizon: f64,
) -> Result<Option<f64>> {
    let weights: Vec<f64> = (0..graph.num_edges())
        .map(|e| profile.edge_min_mean(e))
        .collect();
    let Some(path) = shortest_path_by_weight(graph, &weights, origin, dest) else {
        return Ok(None);
    };
    let cost = profile.path_cost(&path, depart, horizon)?;
    Ok(Some(spec.evaluate(&cost)?))
}

fn reconstruct(graph: &Graph, arena: &[LabelRec], mut label: usize) -> (Vec<u64>, Vec<u64>) {
    let mut nodes = vec![graph.node(arena[label].node).id];
    let mut edges = Vec::new();
    while let Some(parent) = arena[label].parent {
        if let Some(e) = arena[label].via_edge {
            edges.push(graph.edge(e).id);
        }
        label = parent;
        nodes.push(graph.node(arena[label].node).id);
    }
    nodes.reverse();
    edges.reverse();
    (nodes, edges)
}
