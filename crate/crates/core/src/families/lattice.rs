use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{ConductanceNetwork, Edge, EdgeId, VertexId};
use crate::profile::ProfileExpr;

use super::{psi_at, Cutset, ExceptionSet, Family, FamilyError, FamilyKind, LevelIndex};

fn isqrt(q: u64) -> u64 {
    let mut s = (q as f64).sqrt() as u64;
    while s * s > q {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= q {
        s += 1;
    }
    s
}

/// Level of the edge from `x` to `x + e_axis`: the unique `n` with
/// `‖midpoint‖₂ ∈ [n-1, n)`. With `q = 4‖midpoint‖²` odd, the norm is never
/// an integer and the level is `⌊√q / 2⌋ + 1`.
pub fn lattice_level(x: &[i64], axis: usize) -> u32 {
    let q: u64 = x
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let t = if j == axis { 2 * c + 1 } else { 2 * c };
            (t * t) as u64
        })
        .sum();
    (isqrt(q) / 2 + 1) as u32
}

fn ceil_norm(norm2: u64) -> u32 {
    let s = isqrt(norm2);
    (if s * s == norm2 { s } else { s + 1 }) as u32
}

struct Topology {
    vertex_count: usize,
    origin: usize,
    shell: Vec<u32>,
    /// Coordinates of vertex `v` at `coords[v*d..(v+1)*d]`.
    coords: Vec<i64>,
    /// (a, b, level)
    edges: Vec<(usize, usize, u32)>,
}

/// Lattice points with `‖x‖₂ ≤ radius + 1` and the unit edges between them,
/// in lexicographic vertex order.
fn topology(d: u32, radius: u32, cap: usize) -> Result<Topology, FamilyError> {
    if d == 0 {
        return Err(FamilyError::InvalidParameter(
            "dimension must be >= 1".into(),
        ));
    }
    let d = d as usize;
    let r = radius as i64 + 1;
    let side = (2 * r + 1) as usize;
    let box_len = side
        .checked_pow(d as u32)
        .filter(|&b| b <= 64 * cap.max(1))
        .ok_or(FamilyError::EdgeCap {
            edges: usize::MAX,
            cap,
        })?;
    let r2 = (r * r) as u64;
    let coords_of = |mut idx: usize, out: &mut [i64]| {
        for c in out.iter_mut().rev() {
            *c = (idx % side) as i64 - r;
            idx /= side;
        }
    };
    let mut id_of = vec![u32::MAX; box_len];
    let mut shell = Vec::new();
    let mut coords = Vec::new();
    let mut x = vec![0i64; d];
    let mut count = 0usize;
    for (idx, slot) in id_of.iter_mut().enumerate() {
        coords_of(idx, &mut x);
        let n2: u64 = x.iter().map(|&c| (c * c) as u64).sum();
        if n2 <= r2 {
            *slot = count as u32;
            shell.push(ceil_norm(n2));
            coords.extend_from_slice(&x);
            count += 1;
        }
    }
    let estimate = count * d;
    if estimate > cap {
        return Err(FamilyError::EdgeCap {
            edges: estimate,
            cap,
        });
    }
    let mut edges = Vec::with_capacity(estimate);
    let mut stride = vec![1usize; d];
    for i in (0..d.saturating_sub(1)).rev() {
        stride[i] = stride[i + 1] * side;
    }
    for idx in 0..box_len {
        let a = id_of[idx];
        if a == u32::MAX {
            continue;
        }
        coords_of(idx, &mut x);
        for axis in 0..d {
            if x[axis] == r {
                continue;
            }
            let b = id_of[idx + stride[axis]];
            if b != u32::MAX {
                edges.push((a as usize, b as usize, lattice_level(&x, axis)));
            }
        }
    }
    let origin = id_of[(0..d).map(|i| r as usize * stride[i]).sum::<usize>()] as usize;
    Ok(Topology {
        vertex_count: count,
        origin,
        shell,
        coords,
        edges,
    })
}

/// Ball of `Z^d` with `ℓ(e) = ψ(n)/n^(d-1)` on `E_n`, rooted at the origin.
/// Truncation at radius `N` wires every vertex with `‖x‖₂ > N`.
pub fn build_zd(
    d: u32,
    profile: &ProfileExpr,
    radius: u32,
    n_min: u64,
    edge_cap: usize,
) -> Result<Family, FamilyError> {
    let topo = topology(d, radius, edge_cap)?;
    let max_level = topo.edges.iter().map(|e| e.2).max().unwrap_or(1);
    let mut per_level = vec![0.0; max_level as usize + 1];
    for n in 1..=max_level {
        per_level[n as usize] = psi_at(profile, n as u64, n_min)? / (n as f64).powi(d as i32 - 1);
    }
    let edges = topo
        .edges
        .iter()
        .map(|&(a, b, n)| Edge::new(a, b, per_level[n as usize]).with_level(n))
        .collect();
    let network = ConductanceNetwork::new(topo.vertex_count, edges)?;
    let levels = LevelIndex::from_network(&network);
    let cutsets = levels
        .iter()
        .filter(|(_, e)| !e.is_empty())
        .map(|(n, e)| Cutset {
            label: n,
            edges: e.to_vec(),
        })
        .collect();
    Ok(Family {
        kind: FamilyKind::ZdLattice,
        network,
        levels,
        sources: vec![VertexId(topo.origin)],
        shell: topo.shell,
        default_radius: radius,
        exceptions: None,
        cutsets,
        profile: profile.clone(),
        n_min,
        d: Some(d),
    })
}

/// Coordinates of the vertices of [`build_zd`] at the same radius, in
/// vertex-id order.
pub fn lattice_points(d: u32, radius: u32, edge_cap: usize) -> Result<Vec<Vec<i64>>, FamilyError> {
    let topo = topology(d, radius, edge_cap)?;
    Ok(topo
        .coords
        .chunks(d as usize)
        .map(<[i64]>::to_vec)
        .collect())
}

/// Local-maximum random matching on the lattice ball.
#[derive(Debug, Clone)]
pub struct RandomMatching {
    pub set: ExceptionSet,
    /// Edges whose endpoints both have full degree `2d` in the ball.
    pub interior_edges: u64,
    pub interior_matched: u64,
    /// `1 / (1 + 2(2d - 1))`.
    pub q: f64,
}

impl RandomMatching {
    pub fn frequency(&self) -> f64 {
        self.interior_matched as f64 / self.interior_edges as f64
    }
}

/// Each edge gets an independent uniform label; `e ∈ M` when its label beats
/// every edge sharing an endpoint with it. Labels are drawn from ChaCha8
/// seeded by `seed`, in edge-id order of [`build_zd`] at the same radius.
pub fn random_matching_zd(d: u32, radius: u32, seed: u64) -> Result<RandomMatching, FamilyError> {
    if d < 2 {
        return Err(FamilyError::InvalidParameter(
            "random matching needs d >= 2".into(),
        ));
    }
    let topo = topology(d, radius, super::DEFAULT_EDGE_CAP)?;
    let edges: Vec<Edge> = topo
        .edges
        .iter()
        .map(|&(a, b, n)| Edge::new(a, b, 1.0).with_level(n))
        .collect();
    let net = ConductanceNetwork::new(topo.vertex_count, edges)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<f64> = (0..net.edge_count()).map(|_| rng.gen::<f64>()).collect();
    let full = 2 * d as usize;
    let mut chosen = Vec::new();
    let mut interior_edges = 0u64;
    let mut interior_matched = 0u64;
    for (i, e) in net.edges().iter().enumerate() {
        let beats_all = [e.a, e.b].iter().all(|&v| {
            net.incident(v)
                .iter()
                .all(|&f| f == i || labels[f] < labels[i])
        });
        let interior = net.degree(e.a) == full && net.degree(e.b) == full;
        if interior {
            interior_edges += 1;
        }
        if beats_all {
            chosen.push(EdgeId(i));
            if interior {
                interior_matched += 1;
            }
        }
    }
    let set = ExceptionSet::from_edges(chosen, |e| net.edge(e).level.unwrap_or(0));
    Ok(RandomMatching {
        set,
        interior_edges,
        interior_matched,
        q: 1.0 / (1.0 + 2.0 * (2.0 * d as f64 - 1.0)),
    })
}
