//! From transient flows to measured laminations.
//!
//! A unit flow on the dual graph is first made nonnegative and exactly
//! balanced ([`orient_flow`]), then split into connector weights inside each
//! pair of pants and arc weights along each cuff ([`laminate_flow`]). The
//! resulting intersection numbers feed [`summability_functional`]. The
//! hyperbolic helpers give closed forms for collars and trapezoids.

mod hyperbolic;
mod summability;
mod tracks;

use std::collections::VecDeque;

use thiserror::Error;

use crate::families::Family;
use crate::network::{ConductanceNetwork, EdgeId, VertexId};
use crate::solver::{effective_resistance, min_energy_flow, SolverError, SolverOptions};

pub use hyperbolic::{
    collar_boundary_length, collar_modulus_bound, collar_modulus_constant, collar_width,
    trapezoid_dirichlet, TrapezoidEnergy,
};
pub use summability::{
    summability_from_bounds, summability_functional, CuffWeights, SummabilityReport, SummabilityRow,
};
pub use tracks::{
    cuff_arc_weights, cuff_totals, laminate_flow, pant_track_weights, switch_conditions_hold,
    Connector, CuffTrack, Foot, PantTrack, Side, Tangency, TrackWeight, TrainTrackWeights,
};

/// Fixed-point scale: one unit of current is `2^64` quanta.
pub const QUANTA_PER_UNIT: i128 = 1 << 64;

/// Largest divergence defect accepted by [`orient_flow`] before rebalancing.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaminateError {
    #[error("divergence {found} at vertex {vertex:?}, expected {expected}")]
    DivergenceViolation {
        vertex: VertexId,
        found: f64,
        expected: f64,
    },
    #[error("flux vector has {found} entries for {expected} edges")]
    LengthMismatch { found: usize, expected: usize },
    #[error("negative or non-finite weight {0}")]
    NegativeInput(f64),
    #[error("weights cannot be halved exactly")]
    InexactHalf,
    #[error("cuff sides carry {side_one} and {side_two}")]
    SideImbalance { side_one: f64, side_two: f64 },
    #[error("jumps around the cuff do not close up")]
    OpenCuff,
    #[error("length {0} is not positive")]
    NonPositiveLength(f64),
    #[error("length {length} exceeds the cap {cap}")]
    CapExceeded { length: f64, cap: f64 },
    #[error("degenerate trapezoid: {0}")]
    DegenerateGeometry(String),
    #[error("vertex {vertex:?} has {degree} cuffs; pants have 2 or 3")]
    NotAPant { vertex: VertexId, degree: usize },
    #[error("a pant has 2 or 3 cuffs, not {0}")]
    CuffCount(usize),
    #[error("vertex {0:?} out of range")]
    VertexOutOfRange(VertexId),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// A unit flow with every edge oriented along its current. Values are held
/// in fixed point so that conservation is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct PantsFlow {
    pub network: ConductanceNetwork,
    /// `u(e)` in units of `1 / QUANTA_PER_UNIT`, nonnegative.
    pub quanta: Vec<i128>,
    /// The current runs from `b` to `a`.
    pub reversed: Vec<bool>,
    pub source: VertexId,
    pub sink: VertexId,
}

impl PantsFlow {
    pub fn value(&self, e: EdgeId) -> f64 {
        self.quanta[e.0] as f64 / QUANTA_PER_UNIT as f64
    }

    /// `(tail, head)` of an edge in the direction of its current.
    pub fn oriented(&self, e: EdgeId) -> (VertexId, VertexId) {
        let edge = self.network.edge(e);
        if self.reversed[e.0] {
            (edge.b, edge.a)
        } else {
            (edge.a, edge.b)
        }
    }

    /// Outflow minus inflow at `v`, in quanta.
    pub fn divergence(&self, v: VertexId) -> i128 {
        self.network
            .incident(v)
            .iter()
            .filter(|&&e| !self.network.edges()[e].is_loop())
            .map(|&e| {
                let (tail, _) = self.oriented(EdgeId(e));
                if tail == v {
                    self.quanta[e]
                } else {
                    -self.quanta[e]
                }
            })
            .sum()
    }

    /// `Σ u(e)² r(e)`.
    pub fn energy(&self) -> f64 {
        crate::numeric::compensated_sum(
            self.network
                .edges()
                .iter()
                .enumerate()
                .map(|(e, edge)| self.value(EdgeId(e)).powi(2) / edge.conductance),
        )
    }
}

fn target(v: usize, source: VertexId, sink: VertexId) -> i128 {
    if v == source.0 {
        QUANTA_PER_UNIT
    } else if v == sink.0 {
        -QUANTA_PER_UNIT
    } else {
        0
    }
}

/// Reverse every edge with negative current and round to fixed point, then
/// push the rounding defect of each vertex down a breadth-first tree into
/// `sink` so that every vertex other than `source` and `sink` conserves
/// current exactly and `source` emits exactly one unit.
///
/// `flux[e]` is the signed current from `a` to `b`; loops are ignored.
pub fn orient_flow(
    net: &ConductanceNetwork,
    flux: &[f64],
    source: VertexId,
    sink: VertexId,
) -> Result<PantsFlow, LaminateError> {
    if flux.len() != net.edge_count() {
        return Err(LaminateError::LengthMismatch {
            found: flux.len(),
            expected: net.edge_count(),
        });
    }
    for v in [source, sink] {
        if !net.contains(v) {
            return Err(LaminateError::VertexOutOfRange(v));
        }
    }
    if let Some(bad) = flux.iter().find(|u| !u.is_finite()) {
        return Err(LaminateError::NegativeInput(*bad));
    }
    let n = net.vertex_count();
    let mut div = vec![0.0; n];
    for (e, edge) in net.edges().iter().enumerate() {
        if !edge.is_loop() {
            div[edge.a.0] += flux[e];
            div[edge.b.0] -= flux[e];
        }
    }
    // the sink is implied by the others
    for v in (0..n).filter(|&v| v != sink.0) {
        let expected = target(v, source, sink) as f64 / QUANTA_PER_UNIT as f64;
        if (div[v] - expected).abs() > DIVERGENCE_TOLERANCE {
            return Err(LaminateError::DivergenceViolation {
                vertex: VertexId(v),
                found: div[v],
                expected,
            });
        }
    }

    let scale = QUANTA_PER_UNIT as f64;
    let mut q: Vec<i128> = net
        .edges()
        .iter()
        .zip(flux)
        .map(|(edge, &u)| {
            if edge.is_loop() {
                0
            } else {
                (u * scale).round() as i128
            }
        })
        .collect();
    let mut qdiv = vec![0i128; n];
    for (e, edge) in net.edges().iter().enumerate() {
        qdiv[edge.a.0] += q[e];
        qdiv[edge.b.0] -= q[e];
    }

    let mut parent_edge: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([sink.0]);
    seen[sink.0] = true;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &e in net.incident(VertexId(v)) {
            let w = net.edges()[e].other(VertexId(v)).0;
            if !seen[w] {
                seen[w] = true;
                parent_edge[w] = Some(e);
                queue.push_back(w);
            }
        }
    }
    for &v in order.iter().rev() {
        let Some(e) = parent_edge[v] else { continue };
        let excess = qdiv[v] - target(v, source, sink);
        if excess == 0 {
            continue;
        }
        let edge = &net.edges()[e];
        let p = edge.other(VertexId(v)).0;
        if edge.a.0 == v {
            q[e] -= excess;
        } else {
            q[e] += excess;
        }
        qdiv[v] -= excess;
        qdiv[p] += excess;
    }
    if let Some(v) = (0..n).find(|&v| v != sink.0 && qdiv[v] != target(v, source, sink)) {
        // a component without the sink
        return Err(LaminateError::DivergenceViolation {
            vertex: VertexId(v),
            found: qdiv[v] as f64 / scale,
            expected: target(v, source, sink) as f64 / scale,
        });
    }

    let reversed = q.iter().map(|&x| x < 0).collect();
    let quanta = q.into_iter().map(|x| x.abs()).collect();
    Ok(PantsFlow {
        network: net.clone(),
        quanta,
        reversed,
        source,
        sink,
    })
}

/// A solved truncation carried through to the summability functional.
#[derive(Debug, Clone)]
pub struct Lamination {
    pub radius: u32,
    pub effective_resistance: f64,
    pub flow: PantsFlow,
    /// Present when the truncation is a loop-free pants graph; otherwise the
    /// report uses the flow bounds directly.
    pub track: Option<TrainTrackWeights>,
    pub report: SummabilityReport,
}

/// Solve the truncation at `radius` from the family's first source vertex,
/// orient the minimal-energy flow and evaluate the summability functional,
/// through the train track when the dual graph allows it.
pub fn laminate_family(
    fam: &Family,
    radius: u32,
    options: &SolverOptions,
) -> Result<Lamination, LaminateError> {
    let trunc = fam.truncate_from(fam.root(), radius)?;
    let sol = effective_resistance(&trunc, options)?;
    let unit = min_energy_flow(&sol, &trunc)?;
    let flow = orient_flow(&trunc.network, &unit.flux, unit.source, unit.sink)?;
    let loop_free = trunc.network.edges().iter().all(|e| !e.is_loop());
    let track = if loop_free {
        match laminate_flow(&flow) {
            Ok(t) => Some(t),
            Err(LaminateError::NotAPant { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let weights = match &track {
        Some(t) => t.cuff_weights(&flow),
        None => summability_from_bounds(&flow),
    };
    let report = summability_functional(&weights, None)?;
    Ok(Lamination {
        radius,
        effective_resistance: sol.effective_resistance,
        flow,
        track,
        report,
    })
}
