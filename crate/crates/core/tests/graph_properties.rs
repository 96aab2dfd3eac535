use std::f64::consts::TAU;

use geodex::graph::{all_pairs_geodesics, build_knn, minimal_connected_k, shortest_paths_from};
use geodex::{seeded_rng, GeodexError, NeighborGraph};
use proptest::prelude::*;
use rand::Rng;

fn refs(points: &[Vec<f64>]) -> Vec<&[f64]> {
    points.iter().map(Vec::as_slice).collect()
}

fn circle(n: usize, radius: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let t = TAU * i as f64 / n as f64;
            vec![radius * t.cos(), radius * t.sin()]
        })
        .collect()
}

/// Union K-NN connectivity by brute force: for every point, sort all others
/// by (distance, index), link the first K, then flood fill.
fn brute_connected(points: &[Vec<f64>], k: usize) -> bool {
    let n = points.len();
    let dist = |a: usize, b: usize| {
        points[a].iter().zip(&points[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| dist(i, a).total_cmp(&dist(i, b)).then(a.cmp(&b)));
        for &j in others.iter().take(k) {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn brute_minimal_k(points: &[Vec<f64>]) -> usize {
    (1..points.len()).find(|&k| brute_connected(points, k)).unwrap()
}

#[test]
fn circle_minimal_k_matches_sweep() {
    // exact ties between the two neighbours of an equispaced point are at the
    // mercy of rounding, so the reference is the sweep on the same floats
    let pts = circle(100, 1.0);
    let (k, g) = minimal_connected_k(&refs(&pts)).unwrap();
    assert_eq!(k, brute_minimal_k(&pts));
    assert!(g.is_connected());
    assert!(k <= 2);
}

#[test]
fn two_clusters_need_k_five() {
    let mut pts = Vec::new();
    for i in 0..5 {
        pts.push(vec![i as f64 * 0.1, 0.0]);
        pts.push(vec![100.0 + i as f64 * 0.1, 0.0]);
    }
    let (k, _) = minimal_connected_k(&refs(&pts)).unwrap();
    assert_eq!(k, brute_minimal_k(&pts));
    assert_eq!(k, 5);
}

#[test]
fn heavy_edge_cycle() {
    let g = NeighborGraph::from_edges(4, 1, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 10.0)]).unwrap();
    // the two simple 0→3 paths have lengths 10 and 3
    assert_eq!(shortest_paths_from(&g, 0).unwrap()[3], 3.0f64.min(10.0));
}

#[test]
fn all_pairs_agrees_with_single_source() {
    let mut rng = seeded_rng(9);
    let pts: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()]).collect();
    let (_, g) = minimal_connected_k(&refs(&pts)).unwrap();
    let all = all_pairs_geodesics(&g).unwrap();
    for (s, row) in all.iter().enumerate() {
        let single = shortest_paths_from(&g, s).unwrap();
        for (a, b) in row.iter().zip(&single) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b));
        }
    }
}

#[test]
fn circle_geodesics_converge_to_arc_length() {
    let n = 360;
    let pts = circle(n, 1.0);
    let (_, g) = minimal_connected_k(&refs(&pts)).unwrap();
    let all = all_pairs_geodesics(&g).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let steps = (j - i).min(n - (j - i)) as f64;
            let arc = TAU * steps / n as f64;
            worst = worst.max((all[i][j] - arc).abs() / arc);
        }
    }
    assert!(worst <= 0.02, "max relative error {worst}");
}

#[test]
fn disconnected_all_pairs_is_an_error() {
    let pts = vec![vec![0.0], vec![0.1], vec![50.0], vec![50.1]];
    let g = build_knn(&refs(&pts), 1).unwrap();
    assert!(matches!(all_pairs_geodesics(&g), Err(GeodexError::Disconnected { components: 2 })));
    assert!(shortest_paths_from(&g, 0).unwrap()[2].is_infinite());
}

fn cloud() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (4usize..40, 1usize..4).prop_flat_map(|(n, d)| {
        proptest::collection::vec(proptest::collection::vec((-20i32..20).prop_map(|v| v as f64 / 4.0), d), n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_is_symmetric_and_deterministic(pts in cloud(), k in 1usize..6) {
        let k = k.min(pts.len() - 1);
        let g = build_knn(&refs(&pts), k).unwrap();
        let again = build_knn(&refs(&pts), k).unwrap();
        prop_assert_eq!(g.edges(), again.edges());
        for i in 0..pts.len() {
            for &(j, w) in g.neighbors(i) {
                prop_assert!(g.neighbors(j).iter().any(|&(m, w2)| m == i && w2 == w));
            }
        }
        prop_assert_eq!(g.is_connected(), brute_connected(&pts, k));
    }

    #[test]
    fn minimal_k_is_minimal(pts in cloud()) {
        let (k, g) = minimal_connected_k(&refs(&pts)).unwrap();
        prop_assert!(g.is_connected());
        if k > 1 {
            prop_assert!(!build_knn(&refs(&pts), k - 1).unwrap().is_connected());
        }
        prop_assert_eq!(k, brute_minimal_k(&pts));
    }

    #[test]
    fn geodesic_matrix_is_a_metric(pts in cloud()) {
        let (_, g) = minimal_connected_k(&refs(&pts)).unwrap();
        let d = all_pairs_geodesics(&g).unwrap();
        let n = pts.len();
        for i in 0..n {
            prop_assert_eq!(d[i][i], 0.0);
            for j in 0..n {
                prop_assert_eq!(d[i][j], d[j][i]);
                for k in 0..n {
                    prop_assert!(d[i][k] <= d[i][j] + d[j][k] + 1e-12 * (1.0 + d[i][k]));
                }
            }
        }
    }
}
