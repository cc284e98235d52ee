use crate::network::{ConductanceNetwork, Edge, VertexId};
use crate::profile::ProfileExpr;

use super::cantor::{cantor_vertex_count, cantor_vertex_id, MAX_FULL_DEPTH};
use super::{Cutset, Family, FamilyError, FamilyKind, LevelIndex};

/// Series resistance of one gadget: a unit link followed by a doubled unit
/// edge.
pub const TORI_GADGET_RESISTANCE: f64 = 1.5;

/// Cantor-tree topology in which a level-`n` cuff is replaced by a chain of
/// `n` two-holed-torus gadgets, all conductances 1.
///
/// A gadget is the dual-graph footprint of a twice-holed torus: two vertices
/// joined by a doubled edge. Along a host edge `(u, w)` the chain reads
/// `u - m1 = c1 - m2 = c2 ... - mn = w`, where `-` is a unit link and `=`
/// the doubled edge. Host vertices keep their Cantor ids and shells; gadget
/// vertices take the shell of the inner host endpoint.
pub fn build_tori_chain(depth: u32) -> Result<Family, FamilyError> {
    if depth > MAX_FULL_DEPTH - 4 {
        return Err(FamilyError::DepthTooLarge {
            depth,
            max: MAX_FULL_DEPTH - 4,
        });
    }
    let host_count = cantor_vertex_count(depth);
    let mut shell: Vec<u32> = Vec::with_capacity(host_count);
    for n in 1..=depth {
        shell.extend(std::iter::repeat(n).take(1usize << n));
    }
    let mut edges = Vec::new();
    let mut next = host_count;
    let mut add_chain =
        |u: usize, w: usize, n: u32, shell: &mut Vec<u32>, edges: &mut Vec<Edge>| {
            let inner_shell = if n == 1 { 1 } else { n - 1 };
            let mut prev = u;
            for i in 1..=n {
                let m = next;
                next += 1;
                shell.push(inner_shell);
                let c = if i == n {
                    w
                } else {
                    next += 1;
                    shell.push(inner_shell);
                    m + 1
                };
                edges.push(Edge::new(prev, m, 1.0).with_level(n));
                edges.push(Edge::new(m, c, 1.0).with_level(n));
                edges.push(Edge::new(m, c, 1.0).with_level(n));
                prev = c;
            }
        };
    add_chain(0, 1, 1, &mut shell, &mut edges);
    for n in 2..=depth {
        for i in 0..(1u64 << n) {
            let parent = cantor_vertex_id(n - 1, i >> 1);
            let child = cantor_vertex_id(n, i);
            add_chain(parent, child, n, &mut shell, &mut edges);
        }
    }
    let network = ConductanceNetwork::new(shell.len(), edges)?;
    let levels = LevelIndex::from_network(&network);
    let cutsets = levels
        .iter()
        .filter(|(n, e)| *n >= 2 && !e.is_empty())
        .map(|(n, e)| Cutset {
            label: n,
            edges: e.to_vec(),
        })
        .collect();
    Ok(Family {
        kind: FamilyKind::ToriChain,
        network,
        levels,
        sources: vec![VertexId(0), VertexId(1)],
        shell,
        default_radius: depth - 1,
        exceptions: None,
        cutsets,
        profile: ProfileExpr::constant(1.0),
        n_min: 1,
        d: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::dense_resistance;

    fn reduced_host(depth: u32) -> (Family, crate::network::Reduction) {
        let fam = build_tori_chain(depth).unwrap();
        let hosts: Vec<VertexId> = (0..cantor_vertex_count(depth)).map(VertexId).collect();
        let red = fam.network.parallel_reduce().series_reduce(&hosts);
        (fam, red)
    }

    #[test]
    fn single_gadget_resistance() {
        let fam = build_tori_chain(1).unwrap();
        assert_eq!(fam.network.vertex_count(), 3);
        let r = dense_resistance(&fam.network, &[0], &[1]);
        assert!((r - TORI_GADGET_RESISTANCE).abs() < 1e-12);
    }

    #[test]
    fn reduces_to_binary_tree_with_linear_resistance() {
        let depth = 6;
        let (_, red) = reduced_host(depth);
        let net = &red.network;
        assert_eq!(net.vertex_count(), cantor_vertex_count(depth));
        assert_eq!(net.edge_count(), net.vertex_count() - 1);
        for e in net.edges() {
            let n = e.level.unwrap() as f64;
            let ratio = e.resistance() / n;
            assert!(
                (ratio - TORI_GADGET_RESISTANCE).abs() < 1e-10,
                "level {n}: {ratio}"
            );
        }
        for n in 2..=depth {
            for i in 0..(1u64 << n) {
                let child = red.vertex_map[cantor_vertex_id(n, i)].unwrap();
                let parent = red.vertex_map[cantor_vertex_id(n - 1, i >> 1)].unwrap();
                assert!(net.conductance_between(parent, child) > 0.0);
            }
        }
    }

    #[test]
    fn gadget_shells() {
        let fam = build_tori_chain(4).unwrap();
        let host = cantor_vertex_count(4);
        for e in fam.network.edges() {
            for v in [e.a.0, e.b.0] {
                if v >= host {
                    let n = e.level.unwrap();
                    assert_eq!(fam.shell[v], if n == 1 { 1 } else { n - 1 });
                }
            }
        }
    }
}
