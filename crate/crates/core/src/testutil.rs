//! Test-only oracles: dense Laplacian solves and random network strategies.

use proptest::prelude::*;

use crate::network::{ConductanceNetwork, Edge};

/// Effective resistance between the shorted `sources` and the grounded
/// `sinks`, by dense Gaussian elimination with partial pivoting.
pub fn dense_resistance(net: &ConductanceNetwork, sources: &[usize], sinks: &[usize]) -> f64 {
    let n = net.vertex_count();
    let mut index = vec![usize::MAX; n];
    let mut next = 1;
    for v in 0..n {
        if sinks.contains(&v) {
            continue;
        }
        index[v] = if sources.contains(&v) {
            0
        } else {
            next += 1;
            next - 1
        };
    }
    let m = next;
    let mut a = vec![vec![0.0f64; m + 1]; m];
    for e in net.edges() {
        if e.is_loop() {
            continue;
        }
        let (i, j) = (index[e.a.0], index[e.b.0]);
        let c = e.conductance;
        if i != usize::MAX {
            a[i][i] += c;
        }
        if j != usize::MAX {
            a[j][j] += c;
        }
        if i != usize::MAX && j != usize::MAX {
            a[i][j] -= c;
            a[j][i] -= c;
        }
    }
    a[0][m] = 1.0;
    // Rows of vertices disconnected from the sinks would be singular; the
    // random strategies below always produce connected networks.
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        let p = a[col][col];
        assert!(p.abs() > 1e-300, "singular Laplacian");
        for row in 0..m {
            if row != col && a[row][col] != 0.0 {
                let f = a[row][col] / p;
                for k in col..=m {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    a[0][m] / a[0][0]
}

/// Random connected multigraph with loops, on 2..=max_vertices vertices.
pub fn arb_network(max_vertices: usize) -> impl Strategy<Value = ConductanceNetwork> {
    (2..=max_vertices)
        .prop_flat_map(|n| {
            let parents = proptest::collection::vec(0usize..1000, n - 1);
            let tree_c = proptest::collection::vec(0.05f64..5.0, n - 1);
            let extra = proptest::collection::vec((0..n, 0..n, 0.05f64..5.0), 0..2 * n);
            (Just(n), parents, tree_c, extra)
        })
        .prop_map(|(n, parents, tree_c, extra)| {
            let mut edges = Vec::new();
            for v in 1..n {
                edges.push(Edge::new(parents[v - 1] % v, v, tree_c[v - 1]));
            }
            for (a, b, c) in extra {
                edges.push(Edge::new(a, b, c));
            }
            ConductanceNetwork::new(n, edges).unwrap()
        })
}
