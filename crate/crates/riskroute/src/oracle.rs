//! Independent correctness oracles.
//!
//! `enumerate_optimal` re-derives the rho-minimum path by exhaustive simple
//! path enumeration, sharing only the distribution arithmetic with the
//! search (none of its pruning or queueing). `monte_carlo_cost` cross-checks
//! the analytic convolution by simulating traversals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::network::{ClockTime, Graph, TimeProfile};
use crate::risk::RiskSpec;
use crate::util::par_map;

const PATH_LIMIT: u64 = 1_000_000;

/// Exhaustively enumerate simple paths `origin -> dest` of at most
/// `max_hops` edges and return the minimum rho value with one witnessing
/// path (ties broken by lexicographic node sequence). Refuses graphs that
/// spawn more than a million paths.
pub fn enumerate_optimal(
    graph: &Graph,
    profile: &TimeProfile,
    spec: &RiskSpec,
    origin: usize,
    dest: usize,
    depart: &ClockTime,
    max_hops: usize,
    horizon: f64,
) -> Result<Option<(f64, Vec<usize>)>> {
    if origin == dest {
        return Ok(Some((
            spec.evaluate(&DiscreteDistribution::point_mass(profile.bin_width(), 0.0)?)?,
            Vec::new(),
        )));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut visited = vec![false; graph.num_nodes()];
    visited[origin] = true;
    let mut stack: Vec<usize> = Vec::new();
    let mut count: u64 = 0;
    // carrying the prefix cost down the DFS shares the convolution work of
    // common prefixes; extend-then-cap per edge is exactly `path_cost`
    let root = DiscreteDistribution::point_mass(profile.bin_width(), 0.0)?;
    dfs(
        graph, profile, spec, origin, dest, depart, max_hops, horizon, &root, &mut visited,
        &mut stack, &mut best, &mut count,
    )?;
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    graph: &Graph,
    profile: &TimeProfile,
    spec: &RiskSpec,
    node: usize,
    dest: usize,
    depart: &ClockTime,
    hops_left: usize,
    horizon: f64,
    cost: &DiscreteDistribution,
    visited: &mut Vec<bool>,
    stack: &mut Vec<usize>,
    best: &mut Option<(f64, Vec<usize>)>,
    count: &mut u64,
) -> Result<()> {
    if hops_left == 0 {
        return Ok(());
    }
    for &e in graph.out_edges(node) {
        let head = graph.edge(e).head;
        if head == dest {
            *count += 1;
            if *count > PATH_LIMIT {
                return Err(Error::EnumerationGuard { limit: PATH_LIMIT });
            }
            stack.push(e);
            let full = profile.extend(cost, e, depart)?.cap(horizon)?;
            let rho = spec.evaluate(&full)?;
            let better = match best {
                None => true,
                Some((b, bp)) => {
                    rho < *b || (rho == *b && path_nodes(graph, stack) < path_nodes(graph, bp))
                }
            };
            if better {
                *best = Some((rho, stack.clone()));
            }
            stack.pop();
        } else if !visited[head] {
            let next = profile.extend(cost, e, depart)?.cap(horizon)?;
            visited[head] = true;
            stack.push(e);
            dfs(
                graph, profile, spec, head, dest, depart, hops_left - 1, horizon, &next, visited,
                stack, best, count,
            )?;
            stack.pop();
            visited[head] = false;
        }
    }
    Ok(())
}

/// Node index sequence of an edge path.
pub fn path_nodes(graph: &Graph, edges: &[usize]) -> Vec<usize> {
    let mut nodes = Vec::with_capacity(edges.len() + 1);
    if let Some(&first) = edges.first() {
        nodes.push(graph.edge(first).tail);
    }
    for &e in edges {
        nodes.push(graph.edge(e).head);
    }
    nodes
}

/// Empirical distribution of a path's travel time from `n_samples` seeded
/// simulated traversals, each drawing edge durations from the profile at
/// the evolving clock time. Deterministic for a fixed seed regardless of
/// thread count (per-chunk seeding).
pub fn monte_carlo_cost(
    graph: &Graph,
    profile: &TimeProfile,
    path_edges: &[usize],
    depart: &ClockTime,
    n_samples: u64,
    seed: u64,
) -> Result<DiscreteDistribution> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    for &e in path_edges {
        if e >= graph.num_edges() {
            return Err(Error::MissingProfile { edge_id: e as u64 });
        }
    }
    let w = profile.bin_width();
    const CHUNK: u64 = 4096;
    let chunks: Vec<(u64, u64)> = (0..n_samples.div_ceil(CHUNK))
        .map(|c| (c, (n_samples - c * CHUNK).min(CHUNK)))
        .collect();
    let partials: Vec<Result<std::collections::HashMap<u64, u64>>> = par_map(&chunks, |&(chunk, len)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ chunk.wrapping_mul(0x9E3779B97F4A7C15));
        let mut hist: std::collections::HashMap<u64, u64> = std::collections::HashMap::new();
        for _ in 0..len {
            let mut elapsed = 0.0;
            for &e in path_edges {
                let d = profile.lookup(e, &depart.plus(elapsed))?;
                elapsed += sample(d, &mut rng);
            }
            *hist.entry((elapsed / w + 1e-9).floor() as u64).or_insert(0) += 1;
        }
        Ok(hist)
    });
    let mut hist: std::collections::HashMap<u64, u64> = std::collections::HashMap::new();
    for part in partials {
        for (bin, c) in part? {
            *hist.entry(bin).or_insert(0) += c;
        }
    }
    let lo = *hist.keys().min().unwrap();
    let hi = *hist.keys().max().unwrap();
    let mut counts = vec![0.0; (hi - lo + 1) as usize];
    for (bin, c) in hist {
        counts[(bin - lo) as usize] = c as f64;
    }
    DiscreteDistribution::from_counts(w, lo, counts)
}

/// Inverse-CDF draw on the distribution's own grid.
fn sample(d: &DiscreteDistribution, rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (x, p) in d.support() {
        acc += p;
        if u <= acc {
            return x;
        }
    }
    d.support_max()
}

/// Largest absolute CDF difference between two distributions on the same
/// grid, evaluated over the union of supports.
pub fn cdf_sup_distance(a: &DiscreteDistribution, b: &DiscreteDistribution) -> f64 {
    let lo = a.support_min().min(b.support_min());
    let hi = a.support_max().max(b.support_max());
    let w = a.bin_width();
    let mut x = lo;
    let mut sup: f64 = 0.0;
    while x <= hi + 1e-9 {
        sup = sup.max((a.cdf(x) - b.cdf(x)).abs());
        x += w;
    }
    sup
}

/// The Dvoretzky-Kiefer-Wolfowitz band half-width for `n` samples at
/// confidence `1 - delta`.
pub fn dkw_epsilon(n: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Rho equality between the search and the enumeration oracle, up to
/// floating-point rounding. The two share the same arithmetic except when
/// distinct paths convolve the same edge factors in different orders: their
/// distributions are mathematically equal, dominance pruning keeps one
/// representative, and the enumeration may evaluate the other, which
/// perturbs the value at rounding level (a few ulps).
pub fn rho_matches(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{DayClass, Node};

    fn clock() -> ClockTime {
        ClockTime::new(DayClass::Weekdays, 8.0 * 3600.0).unwrap()
    }

    fn line_graph() -> Graph {
        Graph::new(
            vec![
                Node { id: 0, lat: 0.0, lon: 0.0 },
                Node { id: 1, lat: 0.0, lon: 0.001 },
                Node { id: 2, lat: 0.0, lon: 0.002 },
            ],
            vec![(0, 0, 1, 100.0, 10.0), (1, 1, 2, 100.0, 10.0)],
        )
        .unwrap()
    }

    #[test]
    fn single_path_graph_returns_it() {
        let g = line_graph();
        let d = DiscreteDistribution::from_support(6.0, &[(30.0, 0.5), (60.0, 0.5)]).unwrap();
        let p = TimeProfile::constant(&g, 600.0, d).unwrap();
        let (rho, path) = enumerate_optimal(
            &g, &p, &RiskSpec::Expectation, 0, 2, &clock(), 5, 86_400.0,
        )
        .unwrap()
        .unwrap();
        assert_eq!(path, vec![0, 1]);
        assert!((rho - 90.0).abs() < 1e-9);
    }

    #[test]
    fn origin_equals_dest() {
        let g = line_graph();
        let p = TimeProfile::constant(
            &g,
            600.0,
            DiscreteDistribution::point_mass(6.0, 6.0).unwrap(),
        )
        .unwrap();
        let (rho, path) =
            enumerate_optimal(&g, &p, &RiskSpec::Expectation, 1, 1, &clock(), 5, 86_400.0)
                .unwrap()
                .unwrap();
        assert_eq!(rho, 0.0);
        assert!(path.is_empty());
    }

    #[test]
    fn table1_diamond_matches_example() {
        let (g, p) = crate::search::tests::diamond();
        let spec = RiskSpec::var(0.95).unwrap();
        let (rho, path) =
            enumerate_optimal(&g, &p, &spec, 0, 2, &clock(), 5, 86_400.0)
                .unwrap()
                .unwrap();
        assert_eq!(rho, 2.0);
        // the winning branch is the pi'_on edge (index 1)
        assert_eq!(path, vec![1, 2]);
    }

    #[test]
    fn degenerate_profile_mc_is_exact() {
        let g = line_graph();
        let p = TimeProfile::constant(
            &g,
            600.0,
            DiscreteDistribution::point_mass(6.0, 30.0).unwrap(),
        )
        .unwrap();
        let mc = monte_carlo_cost(&g, &p, &[0, 1], &clock(), 1000, 7).unwrap();
        let analytic = p.path_cost(&[0, 1], &clock(), 86_400.0).unwrap();
        assert_eq!(mc, analytic);
    }

    #[test]
    fn mc_within_dkw_band_time_constant() {
        let g = line_graph();
        let d = DiscreteDistribution::from_support(
            6.0,
            &[(12.0, 0.3), (30.0, 0.4), (90.0, 0.3)],
        )
        .unwrap();
        let p = TimeProfile::constant(&g, 600.0, d).unwrap();
        let n = 100_000;
        let mc = monte_carlo_cost(&g, &p, &[0, 1], &clock(), n, 42).unwrap();
        let analytic = p.path_cost(&[0, 1], &clock(), 86_400.0).unwrap();
        let eps = dkw_epsilon(n, 0.01);
        assert!(cdf_sup_distance(&mc, &analytic) < eps);
        // CLT bound on the mean
        let std = {
            let m = analytic.mean();
            analytic
                .support()
                .map(|(x, p)| p * (x - m).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        assert!((mc.mean() - analytic.mean()).abs() < 3.0 * std / (n as f64).sqrt());
    }

    #[test]
    fn mc_is_deterministic_for_a_seed() {
        let g = line_graph();
        let d = DiscreteDistribution::from_support(6.0, &[(12.0, 0.5), (24.0, 0.5)]).unwrap();
        let p = TimeProfile::constant(&g, 600.0, d).unwrap();
        let a = monte_carlo_cost(&g, &p, &[0, 1], &clock(), 10_000, 3).unwrap();
        let b = monte_carlo_cost(&g, &p, &[0, 1], &clock(), 10_000, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn enumeration_guard_trips_on_dense_graphs() {
        // complete-ish digraph on 12 nodes has far more than 10^6 simple paths
        let n = 12u64;
        let nodes: Vec<Node> = (0..n)
            .map(|i| Node { id: i, lat: 0.0, lon: i as f64 * 1e-4 })
            .collect();
        let mut edges = Vec::new();
        let mut id = 0;
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    edges.push((id, a, b, 10.0, 10.0));
                    id += 1;
                }
            }
        }
        let g = Graph::new(nodes, edges).unwrap();
        let p = TimeProfile::constant(
            &g,
            600.0,
            DiscreteDistribution::point_mass(6.0, 6.0).unwrap(),
        )
        .unwrap();
        let err = enumerate_optimal(
            &g, &p, &RiskSpec::Expectation, 0, 11, &clock(), 12, 86_400.0,
        );
        assert!(matches!(err, Err(Error::EnumerationGuard { .. })));
    }
}
