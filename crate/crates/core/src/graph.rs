//! K-nearest-neighbour graphs over representations and weighted shortest
//! paths on them, used as the estimator of on-manifold geodesic distance.
//!
//! Conventions: union symmetrization (edge `{i,j}` iff either endpoint is
//! among the other's K nearest), Euclidean edge weights, and neighbour ties
//! broken by lower row index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingSet;
use crate::error::{GeodexError, Result};
use crate::metric_space::Point;
use crate::stats::percentile;

pub const SYMMETRIZATION: &str = "union";
pub const TIE_BREAK: &str = "lower_index";

/// Undirected weighted graph with `k` and connectivity recorded.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborGraph {
    n: usize,
    k: usize,
    /// Sorted `(i, j, w)` with `i < j`.
    edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, f64)>>,
    components: usize,
}

impl NeighborGraph {
    /// Builds a graph from an explicit edge list; duplicate edges keep the
    /// first weight seen after sorting.
    pub fn from_edges(n: usize, k: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut list = Vec::new();
        for (a, b, w) in edges {
            if a >= n || b >= n || a == b {
                return Err(GeodexError::Argument(format!("invalid edge ({a}, {b}) for {n} nodes")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(GeodexError::Argument(format!("invalid weight {w} on edge ({a}, {b})")));
            }
            list.push((a.min(b), a.max(b), w));
        }
        list.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)).then(x.2.total_cmp(&y.2)));
        list.dedup_by(|x, y| x.0 == y.0 && x.1 == y.1);
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b, w) in &list {
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        let components = count_components(&adjacency);
        Ok(NeighborGraph {
            n,
            k,
            edges: list,
            adjacency,
            components,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn is_connected(&self) -> bool {
        self.components == 1
    }

    /// Drops edges heavier than the `pct`-th percentile of edge weights.
    /// Removes short-circuit edges across a curved manifold; may disconnect.
    pub fn prune_long_edges(&self, pct: f64) -> Result<Self> {
        if self.edges.is_empty() {
            return Ok(self.clone());
        }
        let weights: Vec<f64> = self.edges.iter().map(|e| e.2).collect();
        let cut = percentile(&weights, pct)?;
        NeighborGraph::from_edges(self.n, self.k, self.edges.iter().copied().filter(|e| e.2 <= cut))
    }

    pub fn to_json(&self) -> GraphExport {
        GraphExport {
            n: self.n,
            k: self.k,
            connected: self.is_connected(),
            components: self.components,
            symmetrization: SYMMETRIZATION,
            tie_break: TIE_BREAK,
            edges: self.edges.clone(),
        }
    }
}

/// JSON edge-list export of a graph.
#[derive(Clone, Debug, Serialize)]
pub struct GraphExport {
    pub n: usize,
    pub k: usize,
    pub connected: bool,
    pub components: usize,
    pub symmetrization: &'static str,
    pub tie_break: &'static str,
    pub edges: Vec<(usize, usize, f64)>,
}

// traversal-based, independent of the union-find used for the K search
fn count_components(adjacency: &[Vec<(usize, f64)>]) -> usize {
    let n = adjacency.len();
    let mut seen = vec![false; n];
    let mut count = 0;
    let mut stack = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        stack.push(s);
        while let Some(u) = stack.pop() {
            for &(v, _) in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    count
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_points(points: &[&[f64]]) -> Result<()> {
    if points.len() < 2 {
        return Err(GeodexError::Argument(format!(
            "a neighbour graph needs at least 2 points, got {}",
            points.len()
        )));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(GeodexError::Argument("points have differing dimensions".into()));
    }
    Ok(())
}

/// The `k` nearest neighbours of every point, ordered by (distance, index).
fn neighbor_lists(points: &[&[f64]], k: usize) -> Vec<Vec<(usize, f64)>> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut cand: Vec<(usize, f64)> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, q)| (j, euclidean(p, q)))
                .collect();
            let by_dist = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, by_dist);
                cand.truncate(k);
            }
            cand.sort_by(by_dist);
            cand
        })
        .collect()
}

fn graph_from_lists(n: usize, k: usize, lists: &[Vec<(usize, f64)>]) -> NeighborGraph {
    let edges = lists
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l.iter().take(k).map(move |&(j, w)| (i, j, w)));
    NeighborGraph::from_edges(n, k, edges).expect("neighbour lists hold valid edges")
}

/// Union-symmetrized K-nearest-neighbour graph with Euclidean weights.
pub fn build_knn(points: &[&[f64]], k: usize) -> Result<NeighborGraph> {
    check_points(points)?;
    let n = points.len();
    if k == 0 || k > n - 1 {
        return Err(GeodexError::Argument(format!("K={k} out of range 1..={}", n - 1)));
    }
    Ok(graph_from_lists(n, k, &neighbor_lists(points, k)))
}

struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
    sets: usize,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            size: vec![1; n],
            sets: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.sets -= 1;
    }
}

/// Smallest `K ≥ 1` whose union K-NN graph is connected, and that graph.
pub fn minimal_connected_k(points: &[&[f64]]) -> Result<(usize, NeighborGraph)> {
    check_points(points)?;
    let n = points.len();
    let mut cap = 16.min(n - 1);
    loop {
        let lists = neighbor_lists(points, cap);
        let mut dsu = DisjointSets::new(n);
        // adding the K-th neighbour of every node grows the graph from K−1 to K
        for k in 1..=cap {
            for (i, l) in lists.iter().enumerate() {
                dsu.union(i, l[k - 1].0);
            }
            if dsu.sets == 1 {
                let graph = graph_from_lists(n, k, &lists);
                debug_assert!(graph.is_connected());
                return Ok((k, graph));
            }
        }
        cap = (cap * 2).min(n - 1);
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    // reversed for a min-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from `source`; unreachable nodes get `f64::INFINITY`.
pub fn shortest_paths_from(graph: &NeighborGraph, source: usize) -> Result<Vec<f64>> {
    if source >= graph.n {
        return Err(GeodexError::Argument(format!(
            "node {source} out of range ({} nodes)",
            graph.n
        )));
    }
    let mut dist = vec![f64::INFINITY; graph.n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &graph.adjacency[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
    Ok(dist)
}

/// Shortest-path distances from each listed source, computed in parallel.
pub fn geodesics_from_sources(graph: &NeighborGraph, sources: &[usize]) -> Result<Vec<Vec<f64>>> {
    sources
        .par_iter()
        .map(|&s| shortest_paths_from(graph, s))
        .collect()
}

/// All-pairs shortest paths; requires a connected graph. The result is made
/// exactly symmetric by taking the smaller of the two directed sums.
pub fn all_pairs_geodesics(graph: &NeighborGraph) -> Result<Vec<Vec<f64>>> {
    if !graph.is_connected() {
        return Err(GeodexError::Disconnected {
            components: graph.components,
        });
    }
    let sources: Vec<usize> = (0..graph.n).collect();
    let mut d = geodesics_from_sources(graph, &sources)?;
    for i in 0..graph.n {
        for j in (i + 1)..graph.n {
            let m = d[i][j].min(d[j][i]);
            d[i][j] = m;
            d[j][i] = m;
        }
    }
    Ok(d)
}

/// How to pick the source node for [`manifold_positions`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseRule {
    MinValue,
    MaxValue,
    Equals(Point),
}

/// Geodesic distance of every row from a base node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Positions {
    pub base_node: usize,
    pub distances: Vec<f64>,
}

/// Rows matched by the rule are averaged; the row nearest that mean (lowest
/// index on ties) becomes the source.
pub fn manifold_positions(set: &EmbeddingSet, graph: &NeighborGraph, base: &BaseRule) -> Result<Positions> {
    if graph.n != set.len() {
        return Err(GeodexError::Argument(format!(
            "graph has {} nodes but the set has {} rows",
            graph.n,
            set.len()
        )));
    }
    if !graph.is_connected() {
        return Err(GeodexError::Disconnected {
            components: graph.components,
        });
    }
    let scalar = |p: &Point| match p {
        Point::Scalar(x) => Ok(*x),
        Point::Node(_) => Err(GeodexError::Type("min/max base rules need scalar values".into())),
    };
    let target = match base {
        BaseRule::MinValue | BaseRule::MaxValue => {
            let xs = set.values().iter().map(scalar).collect::<Result<Vec<f64>>>()?;
            let pick = if *base == BaseRule::MinValue { f64::min } else { f64::max };
            let t = xs.iter().copied().reduce(pick).ok_or_else(|| {
                GeodexError::Argument("base rule matches no rows: set is empty".into())
            })?;
            Point::Scalar(t)
        }
        BaseRule::Equals(p) => *p,
    };
    let matched: Vec<usize> = (0..set.len()).filter(|&i| set.values()[i] == target).collect();
    if matched.is_empty() {
        return Err(GeodexError::Argument(format!("base rule {base:?} matches no rows")));
    }
    let mut mean = vec![0.0; set.dim()];
    for &i in &matched {
        for (m, v) in mean.iter_mut().zip(set.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= matched.len() as f64);
    let mut base_node = 0;
    let mut best = f64::INFINITY;
    for (i, row) in set.rows().enumerate() {
        let d = euclidean(row, &mean);
        if d < best {
            best = d;
            base_node = i;
        }
    }
    Ok(Positions {
        base_node,
        distances: shortest_paths_from(graph, base_node)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs(points: &[Vec<f64>]) -> Vec<&[f64]> {
        points.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn collinear_k1() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let g = build_knn(&refs(&pts), 1).unwrap();
        let pairs: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.0, e.1)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
        assert!(g.is_connected());
        let (k, _) = minimal_connected_k(&refs(&pts)).unwrap();
        assert_eq!(k, 1);
    }

    #[test]
    fn two_far_pairs() {
        let pts = vec![vec![0.0], vec![1.0], vec![100.0], vec![101.0]];
        let g = build_knn(&refs(&pts), 1).unwrap();
        assert!(!g.is_connected());
        assert_eq!(g.components(), 2);
        assert!(matches!(all_pairs_geodesics(&g), Err(GeodexError::Disconnected { components: 2 })));
    }

    #[test]
    fn k_bounds_and_complete_graph() {
        let pts = vec![vec![0.0, 1.0], vec![3.0, 1.0], vec![2.0, 2.0], vec![5.0, 0.0]];
        assert!(build_knn(&refs(&pts), 0).is_err());
        assert!(build_knn(&refs(&pts), 4).is_err());
        assert_eq!(build_knn(&refs(&pts), 3).unwrap().edges().len(), 6);
    }

    #[test]
    fn duplicate_points_get_zero_weight() {
        let pts = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let g = build_knn(&refs(&pts), 1).unwrap();
        assert_eq!(g.edges()[0], (0, 1, 0.0));
    }

    #[test]
    fn path_and_cycle_distances() {
        let g = NeighborGraph::from_edges(4, 1, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(shortest_paths_from(&g, 0).unwrap(), vec![0.0, 1.0, 2.0, 3.0]);
        let g = NeighborGraph::from_edges(3, 1, [(0, 1, 1.0)]).unwrap();
        assert_eq!(shortest_paths_from(&g, 0).unwrap()[2], f64::INFINITY);
        assert!(shortest_paths_from(&g, 3).is_err());
        let g = NeighborGraph::from_edges(4, 1, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 10.0)]).unwrap();
        assert_eq!(shortest_paths_from(&g, 3).unwrap()[0], 3.0);
    }

    #[test]
    fn all_pairs_small() {
        let tri = NeighborGraph::from_edges(3, 2, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let d = all_pairs_geodesics(&tri).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d[i][j], if i == j { 0.0 } else { 1.0 });
            }
        }
        let path = NeighborGraph::from_edges(3, 1, [(0, 1, 2.0), (1, 2, 3.0)]).unwrap();
        assert_eq!(all_pairs_geodesics(&path).unwrap()[0][2], 5.0);
    }

    #[test]
    fn positions_along_a_line() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 0.0]).collect();
        let set = EmbeddingSet::new(
            rows.clone(),
            (0..6).map(|i| i.to_string()).collect(),
            (0..6).map(|i| Point::Scalar(i as f64)).collect(),
        )
        .unwrap();
        let g = build_knn(&refs(&rows), 1).unwrap();
        let pos = manifold_positions(&set, &g, &BaseRule::MinValue).unwrap();
        assert_eq!(pos.base_node, 0);
        assert!(pos.distances.windows(2).all(|w| w[0] < w[1]));
        let pos = manifold_positions(&set, &g, &BaseRule::MaxValue).unwrap();
        assert_eq!(pos.base_node, 5);
        assert!(manifold_positions(&set, &g, &BaseRule::Equals(Point::Scalar(9.0))).is_err());
    }

    #[test]
    fn duplicated_base_row_sits_at_zero() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]];
        let set = EmbeddingSet::new(
            rows.clone(),
            vec!["a".into(), "a'".into(), "b".into(), "c".into()],
            vec![Point::Scalar(0.0), Point::Scalar(0.0), Point::Scalar(1.0), Point::Scalar(2.0)],
        )
        .unwrap();
        let g = build_knn(&refs(&rows), 2).unwrap();
        let pos = manifold_positions(&set, &g, &BaseRule::MinValue).unwrap();
        assert_eq!(pos.distances[0], 0.0);
        assert_eq!(pos.distances[1], 0.0);
    }

    #[test]
    fn pruning_drops_long_edges() {
        let g = NeighborGraph::from_edges(3, 2, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 5.0)]).unwrap();
        let p = g.prune_long_edges(50.0).unwrap();
        assert_eq!(p.edges().len(), 2);
        assert!(p.is_connected());
    }
}
