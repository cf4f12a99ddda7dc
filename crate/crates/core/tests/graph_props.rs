use std::collections::BTreeSet;
use std::f64::consts::PI;

use proptest::prelude::*;
use synchro::commgraph::build_circle_graph;
use synchro::generator::random_connected;
use synchro::geometry::min_distance;
use synchro::scheduler::{schedule_same_direction, verify_schedule};
use synchro::{Angle64, Circle64, CommGraph, Edge, Layout, LinkKind, Path64, Point64};

fn diamond(cx: f64, cy: f64, hx: f64, hy: f64) -> Path64 {
    Path64::new(vec![
        Point64::new(cx, cy - hy),
        Point64::new(cx + hx, cy),
        Point64::new(cx, cy + hy),
        Point64::new(cx - hx, cy),
    ])
    .unwrap()
}

fn samples(p: &Path64, count: usize) -> Vec<Point64> {
    let len = p.length();
    (0..count)
        .map(|k| p.position_at(len * k as f64 / count as f64))
        .collect()
}

fn circles_of(layout: &Layout) -> (Vec<Circle64>, f64) {
    match layout {
        Layout::Circles { circles, range } => (circles.clone(), *range),
        Layout::Paths { .. } => unreachable!("generator yields circles"),
    }
}

/// All simple cycles (length >= 3), each listed once per direction.
fn simple_cycles(n: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<Vec<usize>> {
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            (0..n)
                .filter(|&u| edges.contains(&(v.min(u), v.max(u))))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    fn walk(
        adj: &[Vec<usize>],
        start: usize,
        path: &mut Vec<usize>,
        on: &mut Vec<bool>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let v = *path.last().unwrap();
        for &u in &adj[v] {
            if u == start && path.len() >= 3 {
                out.push(path.clone());
            } else if u > start && !on[u] {
                on[u] = true;
                path.push(u);
                walk(adj, start, path, on, out);
                path.pop();
                on[u] = false;
            }
        }
    }
    for s in 0..n {
        let mut on = vec![false; n];
        on[s] = true;
        walk(&adj, s, &mut vec![s], &mut on, &mut out);
    }
    out
}

fn brute_force_max_cut(n: usize, edges: &[(usize, usize)]) -> usize {
    (0u32..1 << n)
        .map(|mask| {
            edges
                .iter()
                .filter(|&&(a, b)| (mask >> a & 1) != (mask >> b & 1))
                .count()
        })
        .max()
        .unwrap_or(0)
}

fn graph_from(n: usize, edges: &[(usize, usize, f64)]) -> CommGraph<f64> {
    let edges = edges
        .iter()
        .map(|&(a, b, beta)| Edge::new(a, b, beta, 0.0, 0.0, 0.0))
        .collect();
    CommGraph::new(n, LinkKind::Angle, edges).unwrap()
}

fn random_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (3usize..=8).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect();
        let m = pairs.len();
        (
            Just(n),
            Just(pairs),
            proptest::collection::vec(any::<bool>(), m),
            proptest::collection::vec(0.0..PI, m),
        )
            .prop_map(|(n, pairs, keep, betas)| {
                let edges = pairs
                    .into_iter()
                    .zip(keep)
                    .zip(betas)
                    .filter(|((_, k), _)| *k)
                    .map(|(((a, b), _), beta)| (a, b, beta))
                    .collect();
                (n, edges)
            })
    })
}

/// Bipartite graph where roughly half the edges carry line angles built from
/// node potentials (so cycles through them close) and the rest are random.
fn random_bipartite() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (4usize..=10).prop_flat_map(|n| {
        (
            Just(n),
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(0.0..PI, n),
            proptest::collection::vec((0u8..3, 0.0..PI), n * n),
        )
            .prop_map(|(n, side, potential, coins)| {
                let mut edges = vec![];
                for a in 0..n {
                    for b in a + 1..n {
                        let (coin, beta) = coins[a * n + b];
                        if side[a] == side[b] || coin == 0 {
                            continue;
                        }
                        let beta = if coin == 1 {
                            (potential[a] + potential[b]) % PI
                        } else {
                            beta
                        };
                        edges.push((a, b, beta));
                    }
                }
                (n, edges)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn min_distance_matches_sampling(
        hx in 0.5f64..3.0, hy in 0.5f64..3.0, kx in 0.5f64..3.0, ky in 0.5f64..3.0,
        gap in 0.05f64..4.0, dy in -4.0f64..4.0,
    ) {
        let a = diamond(0.0, 0.0, hx, hy);
        let b = diamond(hx + kx + gap, dy, kx, ky);
        let cp = min_distance(&a, &b).unwrap();
        prop_assert!((a.position_at(cp.s_i).dist(&cp.point_i)) < 1e-9);
        prop_assert!((b.position_at(cp.s_j).dist(&cp.point_j)) < 1e-9);
        prop_assert!((cp.point_i.dist(&cp.point_j) - cp.distance).abs() < 1e-9);

        let (sa, sb) = (samples(&a, 400), samples(&b, 400));
        let sampled = sa
            .iter()
            .flat_map(|p| sb.iter().map(move |q| p.dist(q)))
            .fold(f64::INFINITY, f64::min);
        let step = a.length().max(b.length()) / 400.0;
        prop_assert!(sampled >= cp.distance - 1e-9);
        prop_assert!(sampled <= cp.distance + step);
    }

    #[test]
    fn rectangles_side_by_side(w in 0.5f64..3.0, h in 0.5f64..3.0, gap in 0.1f64..2.0, overlap in -0.95f64..0.95) {
        let dy = overlap * h;
        let a = Path64::rectangle(0.0, 0.0, w, h).unwrap();
        let b = Path64::rectangle(w + gap, dy, w, h).unwrap();
        let cp = min_distance(&a, &b).unwrap();
        prop_assert!((cp.distance - gap).abs() < 1e-9);
        prop_assert!((cp.point_i.x - w).abs() < 1e-9);
        // the closest points sit in the middle of the vertical overlap
        let mid = (dy.max(0.0) + (dy + h).min(h)) / 2.0;
        prop_assert!((cp.point_i.y - mid).abs() < 1e-9, "{:?}", cp);
    }

    #[test]
    fn circle_graph_matches_pairwise_check(n in 2usize..9, range in 0.1f64..1.5, seed in 0u64..10_000) {
        let inst = random_connected(n, range, seed).unwrap();
        let (circles, range) = circles_of(&inst.layout);
        let g = build_circle_graph(&circles, range).unwrap();
        let mut expected = vec![];
        for i in 0..n {
            for j in i + 1..n {
                let d = circles[i].center.dist(&circles[j].center);
                if d - 2.0 <= range {
                    expected.push((i, j));
                }
            }
        }
        prop_assert_eq!(g.edge_keys(), expected);
        prop_assert!(g.is_connected());
        for e in g.edges() {
            let diff = (e.link_a - e.link_b).rem_euclid(2.0 * PI);
            prop_assert!((diff - PI).abs() < 1e-9);
            prop_assert!((0.0..PI).contains(&e.beta));
        }
    }

    #[test]
    fn max_bipartite_subgraph_is_a_maximum_cut((n, edges) in random_graph()) {
        let g = graph_from(n, &edges);
        let keys = g.edge_keys();
        let bip = g.max_bipartite_subgraph();
        prop_assert!(bip.is_bipartite());
        let kept = bip.edge_keys();
        prop_assert!(kept.iter().all(|k| keys.contains(k)));
        prop_assert_eq!(kept.len(), brute_force_max_cut(n, &keys));
    }

    #[test]
    fn synch_subgraph_has_only_feasible_cycles((n, edges) in random_bipartite()) {
        let g = graph_from(n, &edges);
        let tol = 1e-9;
        let synch = g.max_synch_subgraph(tol).unwrap();
        let kept: BTreeSet<_> = synch.edge_keys().into_iter().collect();
        for cycle in simple_cycles(n, &kept) {
            prop_assert!(synch.cycle_feasible_opposite(&cycle, tol).unwrap(), "{cycle:?}");
        }
        // the retained graph spans the same components
        prop_assert_eq!(synch.components(), g.components());
    }

    #[test]
    fn same_direction_neighbors_share_start_angle(n in 2usize..10, seed in 0u64..10_000, shift in -PI..PI) {
        let period = 10.0;
        let inst = random_connected(n, 0.8, seed).unwrap();
        let g = inst.comm_graph().unwrap().max_bipartite_subgraph();
        let s = schedule_same_direction(&g, Angle64::new(0.3), period).unwrap();
        prop_assert!(verify_schedule(&g, &s, 1e-9).all_synchronized());
        for i in 0..n {
            let nbrs: Vec<usize> = g.neighbors(i).collect();
            for w in nbrs.windows(2) {
                let d = (s.agents[w[0]].start - s.agents[w[1]].start).rem_euclid(2.0 * PI);
                prop_assert!(d.min(2.0 * PI - d) < 1e-9);
            }
        }

        let mut shifted = s.clone();
        for a in &mut shifted.agents {
            a.start = (a.start + shift).rem_euclid(2.0 * PI);
        }
        let before = verify_schedule(&g, &s, 1e-9);
        let after = verify_schedule(&g, &shifted, 1e-9);
        prop_assert!(after.all_synchronized());
        prop_assert_eq!(
            before.edges.iter().map(|e| e.synchronized).collect::<Vec<_>>(),
            after.edges.iter().map(|e| e.synchronized).collect::<Vec<_>>()
        );
    }
}
