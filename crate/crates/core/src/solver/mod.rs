//! Numeric deciders for the type problem on wired truncations.
//!
//! A [`Truncation`] shorts everything beyond a radius into one boundary
//! vertex. On it we solve for the unit-current potential by preconditioned
//! conjugate gradients, turn potentials into the minimum-energy flow, run
//! escape walks, and evaluate Nash–Williams cutset series.

mod certify;
mod cutsets;
mod montecarlo;
mod random_path;
mod sweep;

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::families::{Family, FamilyError};
use crate::network::{ConductanceNetwork, Edge, EdgeId, VertexId};
use crate::numeric::CompensatedSum;

pub use certify::{
    classify, Certificate, ClassifyParams, ConvergenceVerdict, Evidence, LevelCheck, TheoremTag,
    Verdict,
};
pub use cutsets::{family_cutset_series, nash_williams, CutsetSeries};
pub use montecarlo::{monte_carlo_escape, EscapeEstimate};
pub use random_path::{random_path_flow_zd, ray_path, RandomPathFlow};
pub use sweep::{sweep, SweepOptions, SweepRow};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Rows above this size use a parallel matrix-vector product.
const PARALLEL_ROWS: usize = 16_384;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("root vertex {0} is not in the network")]
    RootOutOfRange(VertexId),
    #[error("radius {0} reaches the whole graph; there is no boundary to wire")]
    NoBoundary(u32),
    #[error(
        "conjugate gradients stopped after {iterations} iterations with residual {residual:e}"
    )]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("cutset {label} does not separate the root from the boundary (path of {} vertices)", witness.len())]
    NotACutset { label: u32, witness: Vec<VertexId> },
    #[error("cutsets {0} and {1} share an edge")]
    OverlappingCutsets(u32, u32),
    #[error("hypothesis not met at level {level:?}: {reason}")]
    HypothesisNotMet { level: Option<u32>, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// A network with every vertex beyond a radius wired into one boundary
/// vertex. The source terminal becomes vertex 0 and the boundary, when
/// present, is the last vertex.
#[derive(Debug, Clone)]
pub struct Truncation {
    pub network: ConductanceNetwork,
    pub root: VertexId,
    pub boundary: Option<VertexId>,
    pub radius: u32,
    /// Position of each base vertex in the truncation.
    pub vertex_map: Vec<VertexId>,
    /// Position of each base edge; `None` when both ends were wired.
    pub edge_map: Vec<Option<EdgeId>>,
}

impl Truncation {
    pub fn boundary_or_err(&self) -> Result<VertexId, SolverError> {
        self.boundary.ok_or(SolverError::NoBoundary(self.radius))
    }

    /// Unknowns of the linear system: every vertex except the boundary.
    fn interior_count(&self) -> usize {
        match self.boundary {
            Some(b) => b.0,
            None => self.network.vertex_count(),
        }
    }
}

fn wire(
    net: &ConductanceNetwork,
    sources: &[VertexId],
    radius: u32,
    inside: impl Fn(usize) -> bool,
) -> Result<Truncation, SolverError> {
    if sources.is_empty() {
        return Err(SolverError::InvalidParameter(
            "empty source terminal".into(),
        ));
    }
    if let Some(&bad) = sources.iter().find(|v| !net.contains(**v)) {
        return Err(SolverError::RootOutOfRange(bad));
    }
    let n = net.vertex_count();
    let mut is_source = vec![false; n];
    for s in sources {
        is_source[s.0] = true;
    }
    let mut map = vec![usize::MAX; n];
    let mut next = 1;
    for v in 0..n {
        if is_source[v] {
            map[v] = 0;
        } else if inside(v) {
            map[v] = next;
            next += 1;
        }
    }
    let has_boundary = map.iter().any(|&m| m == usize::MAX);
    let boundary = next;
    let mut edges = Vec::with_capacity(net.edge_count());
    let mut edge_map = Vec::with_capacity(net.edge_count());
    for e in net.edges() {
        let (a, b) = (map[e.a.0], map[e.b.0]);
        if a == usize::MAX && b == usize::MAX {
            edge_map.push(None);
            continue;
        }
        let a = if a == usize::MAX { boundary } else { a };
        let b = if b == usize::MAX { boundary } else { b };
        edge_map.push(Some(EdgeId(edges.len())));
        edges.push(Edge {
            a: VertexId(a),
            b: VertexId(b),
            ..*e
        });
    }
    let count = if has_boundary { boundary + 1 } else { boundary };
    let network = ConductanceNetwork::new(count, edges).expect("wiring keeps a valid network");
    let vertex_map = map
        .into_iter()
        .map(|m| VertexId(if m == usize::MAX { boundary } else { m }))
        .collect();
    Ok(Truncation {
        network,
        root: VertexId(0),
        boundary: has_boundary.then_some(VertexId(boundary)),
        radius,
        vertex_map,
        edge_map,
    })
}

/// Breadth-first hop distances from `root`; unreachable vertices get `None`.
pub fn bfs_distances(net: &ConductanceNetwork, root: VertexId) -> Vec<Option<u32>> {
    let mut dist = vec![None; net.vertex_count()];
    let mut queue = VecDeque::new();
    dist[root.0] = Some(0);
    queue.push_back(root);
    while let Some(v) = queue.pop_front() {
        let d = dist[v.0].unwrap();
        for &e in net.incident(v) {
            let w = net.edges()[e].other(v);
            if dist[w.0].is_none() {
                dist[w.0] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Wire every vertex at hop distance `> radius` from `root` into one
/// boundary vertex. Parallel edges into the boundary are kept.
pub fn wire_boundary(
    net: &ConductanceNetwork,
    root: VertexId,
    radius: u32,
) -> Result<Truncation, SolverError> {
    if !net.contains(root) {
        return Err(SolverError::RootOutOfRange(root));
    }
    let dist = bfs_distances(net, root);
    wire(net, &[root], radius, |v| {
        dist[v].is_some_and(|d| d <= radius)
    })
}

impl Family {
    /// Wire every vertex with shell `> radius`, shorting the source terminal.
    pub fn truncate(&self, radius: u32) -> Result<Truncation, SolverError> {
        wire(&self.network, &self.sources, radius, |v| {
            self.shell[v] <= radius
        })
    }

    /// Like [`Family::truncate`] but with the single source `source` in place
    /// of the family's source terminal.
    pub fn truncate_from(&self, source: VertexId, radius: u32) -> Result<Truncation, SolverError> {
        wire(&self.network, &[source], radius, |v| {
            self.shell[v] <= radius
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual `‖b - Lv‖ / ‖b‖` to reach.
    pub tolerance: f64,
    /// Defaults to `50 √V`.
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSolution {
    /// Volts on every vertex of the truncation; the boundary is grounded.
    pub potentials: Vec<f64>,
    pub effective_resistance: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Grounded Laplacian restricted to the interior, in CSR form.
struct Laplacian {
    diag: Vec<f64>,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Laplacian {
    fn new(trunc: &Truncation) -> Self {
        let n = trunc.interior_count();
        let net = &trunc.network;
        let mut diag = vec![0.0; n];
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for v in 0..n {
            let mut d = CompensatedSum::new();
            for &e in net.incident(VertexId(v)) {
                let edge = &net.edges()[e];
                if edge.is_loop() {
                    continue;
                }
                d.add(edge.conductance);
                let w = edge.other(VertexId(v)).0;
                if w < n {
                    cols.push(w);
                    vals.push(edge.conductance);
                }
            }
            diag[v] = d.value();
            offsets.push(cols.len());
        }
        Laplacian {
            diag,
            offsets,
            cols,
            vals,
        }
    }

    fn row(&self, x: &[f64], i: usize) -> f64 {
        let mut s = self.diag[i] * x[i];
        for k in self.offsets[i]..self.offsets[i + 1] {
            s -= self.vals[k] * x[self.cols[k]];
        }
        s
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        if y.len() >= PARALLEL_ROWS {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = self.row(x, i));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row(x, i);
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve for the potential of unit current injected at the root with the
/// boundary grounded; `R_N` is the root potential.
pub fn effective_resistance(
    trunc: &Truncation,
    options: &SolverOptions,
) -> Result<PotentialSolution, SolverError> {
    if !(options.tolerance > 0.0) {
        return Err(SolverError::InvalidParameter(
            "tolerance must be positive".into(),
        ));
    }
    let boundary = trunc.boundary_or_err()?;
    let n = trunc.interior_count();
    let lap = Laplacian::new(trunc);
    let cap = options
        .max_iterations
        .unwrap_or_else(|| (50.0 * (n as f64).sqrt()).ceil() as usize)
        .max(1);
    let inv_diag: Vec<f64> = lap
        .diag
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
        .collect();

    let mut b = vec![0.0; n];
    b[trunc.root.0] = 1.0;
    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    let mut residual = norm(&r);
    while residual > options.tolerance && iterations < cap {
        lap.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
        residual = norm(&r);
    }
    // Report the true residual, not the recursively updated one.
    lap.apply(&x, &mut ap);
    let true_residual = norm(
        &b.iter()
            .zip(&ap)
            .map(|(bi, ai)| bi - ai)
            .collect::<Vec<_>>(),
    );
    if !(true_residual <= options.tolerance) {
        return Err(SolverError::NonConvergence {
            iterations,
            residual: true_residual,
        });
    }
    let effective_resistance = x[trunc.root.0];
    let mut potentials = x;
    potentials.resize(trunc.network.vertex_count(), 0.0);
    debug_assert_eq!(potentials.len(), boundary.0 + 1);
    Ok(PotentialSolution {
        potentials,
        effective_resistance,
        residual: true_residual,
        iterations,
    })
}

/// Edge currents of a flow from the root to the boundary of a truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitFlow {
    /// Signed current along each edge, positive from `a` to `b`.
    pub flux: Vec<f64>,
    pub source: VertexId,
    pub sink: VertexId,
}

impl UnitFlow {
    /// Net current leaving `v`.
    pub fn divergence(&self, net: &ConductanceNetwork, v: VertexId) -> f64 {
        let mut s = CompensatedSum::new();
        for &e in net.incident(v) {
            let edge = &net.edges()[e];
            if edge.is_loop() {
                continue;
            }
            s.add(if edge.a == v {
                self.flux[e]
            } else {
                -self.flux[e]
            });
        }
        s.value()
    }

    /// `Σ u(e)² r(e)`.
    pub fn energy(&self, net: &ConductanceNetwork) -> f64 {
        net.edges()
            .iter()
            .zip(&self.flux)
            .map(|(e, u)| u * u / e.conductance)
            .collect::<CompensatedSum>()
            .value()
    }
}

/// Current `ℓ(e) (v(a) - v(b))` from the potentials, rescaled to carry
/// exactly unit current out of the root.
pub fn min_energy_flow(
    sol: &PotentialSolution,
    trunc: &Truncation,
) -> Result<UnitFlow, SolverError> {
    let sink = trunc.boundary_or_err()?;
    let net = &trunc.network;
    let v = &sol.potentials;
    let raw: Vec<f64> = net
        .edges()
        .iter()
        .map(|e| {
            if e.is_loop() {
                0.0
            } else {
                e.conductance * (v[e.a.0] - v[e.b.0])
            }
        })
        .collect();
    let mut flow = UnitFlow {
        flux: raw,
        source: trunc.root,
        sink,
    };
    let injected = flow.divergence(net, trunc.root);
    for u in &mut flow.flux {
        *u /= injected;
    }
    Ok(flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{arb_network, dense_resistance};
    use proptest::prelude::*;

    fn chain(n: usize, c: f64) -> ConductanceNetwork {
        ConductanceNetwork::new(n, (0..n - 1).map(|i| Edge::new(i, i + 1, c)).collect()).unwrap()
    }

    #[test]
    fn wiring_a_chain() {
        // vertices 1..10 stored as 0..9, root 1
        let net = chain(10, 1.0);
        let t = wire_boundary(&net, VertexId(0), 5).unwrap();
        let b = t.boundary.unwrap();
        assert_eq!(t.network.vertex_count(), 7);
        for v in 6..10 {
            assert_eq!(t.vertex_map[v], b);
        }
        let e67 = t.edge_map[5].unwrap();
        assert_eq!(t.network.edge(e67).b, b);
        assert_eq!(t.network.edge(e67).a, t.vertex_map[5]);
        assert!(t.edge_map[6].is_none());
        let whole = wire_boundary(&net, VertexId(0), 9).unwrap();
        assert!(whole.boundary.is_none());
        assert!(matches!(
            effective_resistance(&whole, &SolverOptions::default()),
            Err(SolverError::NoBoundary(9))
        ));
        assert!(matches!(
            wire_boundary(&net, VertexId(10), 2),
            Err(SolverError::RootOutOfRange(_))
        ));
    }

    #[test]
    fn single_edge_ohm() {
        let net = ConductanceNetwork::new(2, vec![Edge::new(0, 1, 4.0)]).unwrap();
        let t = wire_boundary(&net, VertexId(0), 0).unwrap();
        let sol = effective_resistance(&t, &SolverOptions::default()).unwrap();
        assert!((sol.effective_resistance - 0.25).abs() < 1e-14);
        let flow = min_energy_flow(&sol, &t).unwrap();
        assert!((flow.flux[0] - 1.0).abs() < 1e-14);
        assert!((flow.energy(&t.network) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn current_divider() {
        let net =
            ConductanceNetwork::new(2, vec![Edge::new(0, 1, 1.0), Edge::new(0, 1, 3.0)]).unwrap();
        let t = wire_boundary(&net, VertexId(0), 0).unwrap();
        let sol = effective_resistance(&t, &SolverOptions::default()).unwrap();
        let flow = min_energy_flow(&sol, &t).unwrap();
        assert!((flow.flux[0] - 0.25).abs() < 1e-14);
        assert!((flow.flux[1] - 0.75).abs() < 1e-14);
        assert!((flow.energy(&t.network) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn grid_thomson_identity() {
        let side = 20;
        let id = |x: usize, y: usize| x * side + y;
        let mut edges = Vec::new();
        for x in 0..side {
            for y in 0..side {
                if x + 1 < side {
                    edges.push(Edge::new(id(x, y), id(x + 1, y), 1.0));
                }
                if y + 1 < side {
                    edges.push(Edge::new(id(x, y), id(x, y + 1), 1.0));
                }
            }
        }
        let net = ConductanceNetwork::new(side * side, edges).unwrap();
        let t = wire_boundary(&net, VertexId(id(10, 10)), 8).unwrap();
        let sol = effective_resistance(&t, &SolverOptions::default()).unwrap();
        let flow = min_energy_flow(&sol, &t).unwrap();
        let e = flow.energy(&t.network);
        assert!((e - sol.effective_resistance).abs() < 1e-8 * sol.effective_resistance);
        for v in 1..t.network.vertex_count() - 1 {
            assert!(flow.divergence(&t.network, VertexId(v)).abs() < 1e-9);
        }
        assert!((flow.divergence(&t.network, t.root) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let net = chain(400, 1.0);
        let t = wire_boundary(&net, VertexId(0), 398).unwrap();
        let opts = SolverOptions {
            tolerance: 1e-12,
            max_iterations: Some(3),
        };
        match effective_resistance(&t, &opts) {
            Err(SolverError::NonConvergence {
                iterations,
                residual,
            }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn agrees_with_dense_elimination(net in arb_network(12)) {
            let n = net.vertex_count();
            let t = wire_boundary(&net, VertexId(0), 1).unwrap();
            prop_assume!(t.boundary.is_some());
            let sinks: Vec<usize> = (0..n).filter(|&v| t.vertex_map[v] == t.boundary.unwrap()).collect();
            let want = dense_resistance(&net, &[0], &sinks);
            let got = effective_resistance(&t, &SolverOptions::default()).unwrap();
            prop_assert!((got.effective_resistance - want).abs() < 1e-8 * want);
            let flow = min_energy_flow(&got, &t).unwrap();
            prop_assert!((flow.energy(&t.network) - want).abs() < 1e-8 * want);
        }

        #[test]
        fn raising_a_conductance_never_raises_resistance(
            net in arb_network(10), pick in any::<prop::sample::Index>(), factor in 1.0f64..10.0
        ) {
            let t = wire_boundary(&net, VertexId(0), 1).unwrap();
            prop_assume!(t.boundary.is_some());
            let e = pick.index(t.network.edge_count());
            let stronger = t.network.map_conductances(|i, c| if i.0 == e { c * factor } else { c }).unwrap();
            let t2 = Truncation { network: stronger, ..t.clone() };
            let r1 = effective_resistance(&t, &SolverOptions::default()).unwrap().effective_resistance;
            let r2 = effective_resistance(&t2, &SolverOptions::default()).unwrap().effective_resistance;
            prop_assert!(r2 <= r1 * (1.0 + 1e-9));
        }
    }
}
