use crate::network::{ConductanceNetwork, Edge, EdgeId, VertexId};
use crate::profile::ProfileExpr;

use super::{psi_at, Cutset, Family, FamilyError, FamilyKind, LevelIndex};

/// Largest depth for which the explicit tree is materialised.
pub const MAX_FULL_DEPTH: u32 = 22;

// Vertex (n, i) with n >= 1, 0 <= i < 2^n sits at 2^n - 2 + i, so that
// x1 = (1, 0) is 0 and y1 = (1, 1) is 1. Its children are (n+1, 2i) and
// (n+1, 2i+1). Edge (n, i) for n >= 2 joins (n-1, i/2) to (n, i) and sits at
// 2^n - 3 + i; the root cuff e1 is edge 0.

pub fn cantor_vertex_id(level: u32, index: u64) -> usize {
    debug_assert!(level >= 1 && index < 1u64 << level);
    ((1u64 << level) - 2 + index) as usize
}

pub fn cantor_edge_id(level: u32, index: u64) -> usize {
    if level == 1 {
        0
    } else {
        debug_assert!(index < 1u64 << level);
        ((1u64 << level) - 3 + index) as usize
    }
}

/// Level of a canonical edge id.
pub fn cantor_edge_level(id: usize) -> u32 {
    if id == 0 {
        return 1;
    }
    // (2^n - 3) <= id < 2^(n+1) - 3
    let shifted = id as u64 + 3;
    63 - shifted.leading_zeros()
}

pub fn cantor_vertex_count(depth: u32) -> usize {
    ((1u64 << (depth + 1)) - 2) as usize
}

pub fn cantor_edge_count(depth: u32) -> usize {
    cantor_vertex_count(depth) - 1
}

fn level_conductance(profile: &ProfileExpr, n: u32, n_min: u64) -> Result<f64, FamilyError> {
    let psi = psi_at(profile, n as u64, n_min)?;
    // 2^n is exact in f64 for every level we can build.
    Ok(psi / 2f64.powi(n as i32))
}

fn level_cutsets(levels: &LevelIndex) -> Vec<Cutset> {
    levels
        .iter()
        .filter(|(n, edges)| *n >= 2 && !edges.is_empty())
        .map(|(n, edges)| Cutset {
            label: n,
            edges: edges.to_vec(),
        })
        .collect()
}

/// Binary tree of pants: root cuff `e1` joins `x1` and `y1`, every vertex has
/// two children, and `ℓ(e) = ψ(n)/2^n` on `E_n`. The source terminal is
/// `{x1, y1}` and the shell of a vertex is its level.
pub fn build_cantor_tree(
    profile: &ProfileExpr,
    depth: u32,
    n_min: u64,
) -> Result<Family, FamilyError> {
    if depth > MAX_FULL_DEPTH {
        return Err(FamilyError::DepthTooLarge {
            depth,
            max: MAX_FULL_DEPTH,
        });
    }
    let vertex_count = cantor_vertex_count(depth);
    let mut edges = Vec::with_capacity(vertex_count.saturating_sub(1));
    edges.push(Edge::new(0, 1, level_conductance(profile, 1, n_min)?).with_level(1));
    for n in 2..=depth {
        let c = level_conductance(profile, n, n_min)?;
        for i in 0..(1u64 << n) {
            let parent = cantor_vertex_id(n - 1, i >> 1);
            let child = cantor_vertex_id(n, i);
            edges.push(Edge::new(parent, child, c).with_level(n));
        }
    }
    let network = ConductanceNetwork::new(vertex_count, edges)?;
    let mut shell = Vec::with_capacity(vertex_count);
    for n in 1..=depth {
        shell.extend(std::iter::repeat(n).take(1usize << n));
    }
    let levels = LevelIndex::from_network(&network);
    let cutsets = level_cutsets(&levels);
    Ok(Family {
        kind: FamilyKind::CantorTree,
        network,
        levels,
        sources: vec![VertexId(0), VertexId(1)],
        shell,
        default_radius: depth - 1,
        exceptions: None,
        cutsets,
        profile: profile.clone(),
        n_min,
        d: None,
    })
}

/// The Cantor tree with each level of vertices shorted: vertex `k - 1`
/// stands for the `2^k` pants at level `k`, the edge into it carries
/// `ℓ(E_k) = ψ(k)`, and `e1` becomes a loop at the source.
pub fn build_cantor_quotient(
    profile: &ProfileExpr,
    depth: u32,
    n_min: u64,
) -> Result<Family, FamilyError> {
    let mut edges = Vec::with_capacity(depth as usize);
    edges.push(Edge::new(0, 0, level_conductance(profile, 1, n_min)?).with_level(1));
    for k in 2..=depth {
        let c = psi_at(profile, k as u64, n_min)?;
        edges.push(Edge::new(k as usize - 2, k as usize - 1, c).with_level(k));
    }
    let network = ConductanceNetwork::new(depth as usize, edges)?;
    let levels =
        LevelIndex::from_network(&network)
            .with_nominal(|n| if n == 1 { 1 } else { 1u64 << n.min(63) });
    let cutsets = level_cutsets(&levels);
    Ok(Family {
        kind: FamilyKind::CantorTree,
        network,
        levels,
        sources: vec![VertexId(0)],
        shell: (1..=depth).collect(),
        default_radius: depth - 1,
        exceptions: None,
        cutsets,
        profile: profile.clone(),
        n_min,
        d: None,
    })
}

/// Path `1..N` with `ℓ(n, n+1) = ψ(n+1)`; vertex `n` has id `n - 1`.
pub fn build_chain_1d(
    profile: &ProfileExpr,
    depth: u32,
    n_min: u64,
) -> Result<Family, FamilyError> {
    let mut edges = Vec::with_capacity(depth as usize);
    for n in 1..depth {
        let c = psi_at(profile, n as u64 + 1, n_min)?;
        edges.push(Edge::new(n as usize - 1, n as usize, c).with_level(n + 1));
    }
    let network = ConductanceNetwork::new(depth as usize, edges)?;
    let levels = LevelIndex::from_network(&network);
    let cutsets = level_cutsets(&levels);
    Ok(Family {
        kind: FamilyKind::Chain1D,
        network,
        levels,
        sources: vec![VertexId(0)],
        shell: (1..=depth).collect(),
        default_radius: depth.saturating_sub(1),
        exceptions: None,
        cutsets,
        profile: profile.clone(),
        n_min,
        d: None,
    })
}

/// Canonical id of the edge `(n, i)` as an [`EdgeId`].
pub(crate) fn edge(level: u32, index: u64) -> EdgeId {
    EdgeId(cantor_edge_id(level, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> ProfileExpr {
        ProfileExpr::parse(s).unwrap()
    }

    #[test]
    fn level_cardinalities() {
        let fam = build_cantor_tree(&p("1"), 3, 1).unwrap();
        let counts: Vec<usize> = (1..=3).map(|n| fam.levels.count(n)).collect();
        assert_eq!(counts, vec![1, 4, 8]);
        let fam = build_cantor_tree(&p("n"), 10, 1).unwrap();
        for n in 2..=10 {
            assert_eq!(fam.levels.count(n), 1 << n);
        }
    }

    #[test]
    fn unit_profile_conductances() {
        let fam = build_cantor_tree(&p("1"), 3, 1).unwrap();
        for (n, want) in [(1u32, 0.5), (2, 0.25), (3, 0.125)] {
            for &e in fam.levels.level(n) {
                assert_eq!(fam.network.edge(e).conductance, want);
            }
        }
    }

    #[test]
    fn vertex_count_formula() {
        let fam = build_cantor_tree(&p("1"), 10, 1).unwrap();
        assert_eq!(fam.network.vertex_count(), 2046);
        assert_eq!(fam.network.edge_count(), 2045);
    }

    #[test]
    fn three_regular_interior() {
        let fam = build_cantor_tree(&p("1"), 6, 1).unwrap();
        for v in 0..fam.network.vertex_count() {
            let deg = fam.network.degree(VertexId(v));
            let expected = if fam.shell[v] == 6 { 1 } else { 3 };
            assert_eq!(deg, expected);
        }
    }

    #[test]
    fn canonical_ids_match_layout() {
        let fam = build_cantor_tree(&p("1"), 7, 1).unwrap();
        for n in 2..=7u32 {
            for i in 0..(1u64 << n) {
                let e = fam.network.edge(edge(n, i));
                assert_eq!(e.b.0, cantor_vertex_id(n, i));
                assert_eq!(e.a.0, cantor_vertex_id(n - 1, i >> 1));
                assert_eq!(cantor_edge_level(cantor_edge_id(n, i)), n);
            }
        }
        assert_eq!(cantor_edge_level(0), 1);
    }

    #[test]
    fn chain_has_expected_edges() {
        let fam = build_chain_1d(&p("1"), 5, 1).unwrap();
        assert_eq!(fam.network.edge_count(), 4);
        assert!(fam.network.edges().iter().all(|e| e.conductance == 1.0));
        let fam = build_chain_1d(&p("n"), 11, 1).unwrap();
        assert_eq!(fam.network.edges()[0].conductance, 2.0);
        assert_eq!(fam.network.edges()[9].conductance, 11.0);
    }

    #[test]
    fn nonpositive_profile_rejected() {
        assert!(matches!(
            build_cantor_tree(&p("n*log(n)^2"), 4, 1),
            Err(FamilyError::Profile(_))
        ));
        assert!(build_cantor_tree(&p("n*log(n)^2"), 4, 2).is_ok());
        assert!(matches!(
            build_cantor_tree(&p("1"), 40, 1),
            Err(FamilyError::DepthTooLarge { .. })
        ));
    }

    #[test]
    fn quotient_masses_match_full_tree() {
        let full = build_cantor_tree(&p("n^2"), 8, 1).unwrap();
        let quot = build_cantor_quotient(&p("n^2"), 8, 1).unwrap();
        for n in 1..=8 {
            let full_mass: f64 = full
                .levels
                .level(n)
                .iter()
                .map(|&e| full.network.edge(e).conductance)
                .sum();
            let q = quot.levels.level(n);
            assert_eq!(q.len(), 1);
            let quot_mass = quot.network.edge(q[0]).conductance;
            assert_eq!(quot.network.edge(q[0]).is_loop(), n == 1);
            assert!((full_mass - quot_mass).abs() <= 1e-12 * full_mass);
            assert_eq!(quot.levels.nominal_count(n), full.levels.count(n) as u64);
        }
    }
}
