//! Conductance multigraphs: the dual graph of a pants decomposition with
//! cuff lengths as edge conductances.
//!
//! Loops and parallel edges are allowed. A loop at `x` contributes twice its
//! conductance to `ℓ(x, x)` and to the total conductance `a(x)`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

impl VertexId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("vertex {0} is isolated and therefore absorbing (P(x,x) = 1)")]
    AbsorbingVertex(VertexId),
    #[error("edge {edge} has invalid conductance {value}")]
    InvalidConductance { edge: usize, value: f64 },
    #[error("edge {edge} references vertex {vertex} but the network has {count} vertices")]
    EndpointOutOfRange {
        edge: usize,
        vertex: usize,
        count: usize,
    },
    #[error("vertex {0} is not in the network")]
    UnknownVertex(VertexId),
    #[error("networks differ in structure: {0}")]
    StructureMismatch(String),
    #[error("level tags must be >= 1 (edge {0})")]
    InvalidLevel(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: VertexId,
    pub b: VertexId,
    pub conductance: f64,
    pub level: Option<u32>,
}

impl Edge {
    pub fn new(a: usize, b: usize, conductance: f64) -> Self {
        Edge {
            a: VertexId(a),
            b: VertexId(b),
            conductance,
            level: None,
        }
    }

    pub fn with_level(mut self, level: u32) -> Self {
        self.level = Some(level);
        self
    }

    pub fn is_loop(&self) -> bool {
        self.a == self.b
    }

    pub fn resistance(&self) -> f64 {
        1.0 / self.conductance
    }

    /// The endpoint opposite to `v` (for a loop, `v` itself).
    pub fn other(&self, v: VertexId) -> VertexId {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }
}

/// Immutable conductance multigraph with a compressed incidence index.
///
/// Each edge appears once in the incidence list of each endpoint; a loop
/// appears once in the list of its vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductanceNetwork {
    vertex_count: usize,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    incidence: Vec<usize>,
}

/// Outcome of [`compare_edgewise`]. Identical networks report `ALessOrEqual`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgewiseOrder {
    ALessOrEqual,
    BLessOrEqual,
    Incomparable,
}

/// A reduced network together with the position of each original vertex.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub network: ConductanceNetwork,
    /// `vertex_map[old] = Some(new)` for surviving vertices.
    pub vertex_map: Vec<Option<VertexId>>,
}

impl ConductanceNetwork {
    pub fn new(vertex_count: usize, edges: Vec<Edge>) -> Result<Self, NetworkError> {
        for (i, e) in edges.iter().enumerate() {
            if !(e.conductance.is_finite() && e.conductance > 0.0) {
                return Err(NetworkError::InvalidConductance {
                    edge: i,
                    value: e.conductance,
                });
            }
            for v in [e.a, e.b] {
                if v.0 >= vertex_count {
                    return Err(NetworkError::EndpointOutOfRange {
                        edge: i,
                        vertex: v.0,
                        count: vertex_count,
                    });
                }
            }
            if e.level == Some(0) {
                return Err(NetworkError::InvalidLevel(i));
            }
        }
        let mut degree = vec![0usize; vertex_count];
        for e in &edges {
            degree[e.a.0] += 1;
            if !e.is_loop() {
                degree[e.b.0] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(vertex_count + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..vertex_count].to_vec();
        let mut incidence = vec![0usize; offsets[vertex_count]];
        for (i, e) in edges.iter().enumerate() {
            incidence[fill[e.a.0]] = i;
            fill[e.a.0] += 1;
            if !e.is_loop() {
                incidence[fill[e.b.0]] = i;
                fill[e.b.0] += 1;
            }
        }
        Ok(ConductanceNetwork {
            vertex_count,
            edges,
            offsets,
            incidence,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v.0 < self.vertex_count
    }

    /// Incident edge ids of `v` (loops listed once).
    pub fn incident(&self, v: VertexId) -> &[usize] {
        &self.incidence[self.offsets[v.0]..self.offsets[v.0 + 1]]
    }

    /// Number of edge ends at `v`; a loop counts twice.
    pub fn degree(&self, v: VertexId) -> usize {
        self.incident(v)
            .iter()
            .map(|&e| if self.edges[e].is_loop() { 2 } else { 1 })
            .sum()
    }

    /// Total conductance `a(x)`, loops counted twice.
    pub fn total_conductance(&self, v: VertexId) -> f64 {
        let mut s = CompensatedSum::new();
        for &e in self.incident(v) {
            let edge = &self.edges[e];
            s.add(edge.conductance);
            if edge.is_loop() {
                s.add(edge.conductance);
            }
        }
        s.value()
    }

    /// Summed conductance `ℓ(x, y)` over all edges joining `x` and `y`.
    pub fn conductance_between(&self, x: VertexId, y: VertexId) -> f64 {
        let mut s = CompensatedSum::new();
        for &e in self.incident(x) {
            let edge = &self.edges[e];
            if edge.other(x) == y {
                s.add(edge.conductance);
                if edge.is_loop() {
                    s.add(edge.conductance);
                }
            }
        }
        s.value()
    }

    pub fn levels(&self) -> impl Iterator<Item = Option<u32>> + '_ {
        self.edges.iter().map(|e| e.level)
    }

    /// One-step transition law `P(x, y) = ℓ(x, y) / a(x)`, sorted by neighbour id.
    pub fn transition_distribution(
        &self,
        x: VertexId,
    ) -> Result<Vec<(VertexId, f64)>, NetworkError> {
        if !self.contains(x) {
            return Err(NetworkError::UnknownVertex(x));
        }
        if self.incident(x).is_empty() {
            return Err(NetworkError::AbsorbingVertex(x));
        }
        let mut by_neighbour: BTreeMap<VertexId, CompensatedSum> = BTreeMap::new();
        for &e in self.incident(x) {
            let edge = &self.edges[e];
            let weight = if edge.is_loop() {
                2.0 * edge.conductance
            } else {
                edge.conductance
            };
            by_neighbour.entry(edge.other(x)).or_default().add(weight);
        }
        let total = self.total_conductance(x);
        Ok(by_neighbour
            .into_iter()
            .map(|(y, s)| (y, s.value() / total))
            .collect())
    }

    /// Replace conductances edgewise; `f(edge_id, old)` returns the new value.
    pub fn map_conductances<F>(&self, mut f: F) -> Result<Self, NetworkError>
    where
        F: FnMut(EdgeId, f64) -> f64,
    {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| Edge {
                conductance: f(EdgeId(i), e.conductance),
                ..*e
            })
            .collect();
        ConductanceNetwork::new(self.vertex_count, edges)
    }

    /// Merge parallel edges between every unordered pair (loops at the same
    /// vertex merge into one loop). Output edges are ordered by first
    /// occurrence.
    pub fn parallel_reduce(&self) -> ConductanceNetwork {
        let mut slot: HashMap<(usize, usize), usize> = HashMap::new();
        let mut sums: Vec<(usize, usize, CompensatedSum, Option<u32>, bool)> = Vec::new();
        for e in &self.edges {
            let key = (e.a.0.min(e.b.0), e.a.0.max(e.b.0));
            match slot.get(&key) {
                Some(&i) => {
                    let entry = &mut sums[i];
                    entry.2.add(e.conductance);
                    if entry.3 != e.level {
                        entry.4 = true;
                    }
                }
                None => {
                    let mut s = CompensatedSum::new();
                    s.add(e.conductance);
                    slot.insert(key, sums.len());
                    sums.push((key.0, key.1, s, e.level, false));
                }
            }
        }
        let edges = sums
            .into_iter()
            .map(|(a, b, s, level, mixed)| Edge {
                a: VertexId(a),
                b: VertexId(b),
                conductance: s.value(),
                level: if mixed { None } else { level },
            })
            .collect();
        ConductanceNetwork::new(self.vertex_count, edges).expect("merged conductances stay valid")
    }

    /// Remove every loop.
    pub fn drop_loops(&self) -> ConductanceNetwork {
        let edges = self
            .edges
            .iter()
            .filter(|e| !e.is_loop())
            .copied()
            .collect();
        ConductanceNetwork::new(self.vertex_count, edges).expect("subset of a valid network")
    }

    /// Eliminate unprotected loop-free vertices of degree two, repeatedly,
    /// replacing the two incident edges by one edge whose resistance is the
    /// sum. Vertices are renumbered densely in their original order.
    pub fn series_reduce(&self, protected: &[VertexId]) -> Reduction {
        let n = self.vertex_count;
        let mut is_protected = vec![false; n];
        for v in protected {
            if v.0 < n {
                is_protected[v.0] = true;
            }
        }
        let mut edges: Vec<Option<Edge>> = self.edges.iter().copied().map(Some).collect();
        let mut incident: Vec<Vec<usize>> = (0..n)
            .map(|v| self.incident(VertexId(v)).to_vec())
            .collect();
        let mut removed = vec![false; n];

        let eligible = |v: usize, incident: &Vec<Vec<usize>>, edges: &Vec<Option<Edge>>| {
            incident[v].len() == 2
                && incident[v]
                    .iter()
                    .all(|&e| !edges[e].as_ref().expect("live edge").is_loop())
        };

        let mut stack: Vec<usize> = (0..n).rev().collect();
        while let Some(v) = stack.pop() {
            if removed[v] || is_protected[v] || !eligible(v, &incident, &edges) {
                continue;
            }
            let (e1, e2) = (incident[v][0], incident[v][1]);
            let edge1 = edges[e1].take().expect("live edge");
            let edge2 = edges[e2].take().expect("live edge");
            let x = edge1.other(VertexId(v));
            let y = edge2.other(VertexId(v));
            let resistance = edge1.resistance() + edge2.resistance();
            let level = if edge1.level == edge2.level {
                edge1.level
            } else {
                None
            };
            let merged = Edge {
                a: x,
                b: y,
                conductance: 1.0 / resistance,
                level,
            };
            let new_id = edges.len();
            edges.push(Some(merged));
            removed[v] = true;
            incident[v].clear();
            for end in [x, y] {
                incident[end.0].retain(|&e| e != e1 && e != e2);
            }
            incident[x.0].push(new_id);
            if y != x {
                incident[y.0].push(new_id);
            }
            stack.push(y.0);
            stack.push(x.0);
        }

        let mut vertex_map = vec![None; n];
        let mut next = 0;
        for v in 0..n {
            if !removed[v] {
                vertex_map[v] = Some(VertexId(next));
                next += 1;
            }
        }
        let out_edges = edges
            .into_iter()
            .flatten()
            .map(|e| Edge {
                a: vertex_map[e.a.0].expect("surviving endpoint"),
                b: vertex_map[e.b.0].expect("surviving endpoint"),
                ..e
            })
            .collect();
        let network = ConductanceNetwork::new(next, out_edges).expect("series merge stays valid");
        Reduction {
            network,
            vertex_map,
        }
    }

    pub fn to_json(&self) -> NetworkJson {
        NetworkJson {
            vertices: self.vertex_count,
            edges: self
                .edges
                .iter()
                .map(|e| match e.level {
                    Some(l) => EdgeJson::WithLevel(e.a.0, e.b.0, e.conductance, l),
                    None => EdgeJson::Plain(e.a.0, e.b.0, e.conductance),
                })
                .collect(),
        }
    }

    pub fn from_json(json: &NetworkJson) -> Result<Self, NetworkError> {
        let edges = json
            .edges
            .iter()
            .map(|e| match *e {
                EdgeJson::WithLevel(a, b, c, l) => Edge::new(a, b, c).with_level(l),
                EdgeJson::Plain(a, b, c) => Edge::new(a, b, c),
            })
            .collect();
        ConductanceNetwork::new(json.vertices, edges)
    }
}

/// Edgewise conductance comparison of two networks with the same index
/// structure.
pub fn compare_edgewise(
    a: &ConductanceNetwork,
    b: &ConductanceNetwork,
) -> Result<EdgewiseOrder, NetworkError> {
    if a.vertex_count != b.vertex_count {
        return Err(NetworkError::StructureMismatch(format!(
            "{} vs {} vertices",
            a.vertex_count, b.vertex_count
        )));
    }
    if a.edges.len() != b.edges.len() {
        return Err(NetworkError::StructureMismatch(format!(
            "{} vs {} edges",
            a.edges.len(),
            b.edges.len()
        )));
    }
    let mut a_le = true;
    let mut b_le = true;
    for (i, (ea, eb)) in a.edges.iter().zip(&b.edges).enumerate() {
        if (ea.a, ea.b) != (eb.a, eb.b) {
            return Err(NetworkError::StructureMismatch(format!(
                "edge {i} has different endpoints"
            )));
        }
        a_le &= ea.conductance <= eb.conductance;
        b_le &= eb.conductance <= ea.conductance;
    }
    Ok(if a_le {
        EdgewiseOrder::ALessOrEqual
    } else if b_le {
        EdgewiseOrder::BLessOrEqual
    } else {
        EdgewiseOrder::Incomparable
    })
}

/// Interchange form: `{"vertices": n, "edges": [[a, b, c, level?], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkJson {
    pub vertices: usize,
    pub edges: Vec<EdgeJson>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeJson {
    WithLevel(usize, usize, f64, u32),
    Plain(usize, usize, f64),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{arb_network, dense_resistance};
    use proptest::prelude::*;

    fn star() -> ConductanceNetwork {
        ConductanceNetwork::new(3, vec![Edge::new(0, 1, 2.0), Edge::new(0, 2, 3.0)]).unwrap()
    }

    #[test]
    fn star_transition() {
        let p = star().transition_distribution(VertexId(0)).unwrap();
        assert_eq!(p, vec![(VertexId(1), 0.4), (VertexId(2), 0.6)]);
    }

    #[test]
    fn loop_counts_twice() {
        let net =
            ConductanceNetwork::new(2, vec![Edge::new(0, 0, 1.0), Edge::new(0, 1, 2.0)]).unwrap();
        let p = net.transition_distribution(VertexId(0)).unwrap();
        assert_eq!(p, vec![(VertexId(0), 0.5), (VertexId(1), 0.5)]);
        assert_eq!(net.total_conductance(VertexId(0)), 4.0);
        assert_eq!(net.conductance_between(VertexId(0), VertexId(0)), 2.0);
        assert_eq!(net.degree(VertexId(0)), 3);
    }

    #[test]
    fn isolated_vertex_is_absorbing() {
        let net = ConductanceNetwork::new(2, vec![Edge::new(0, 0, 1.0)]).unwrap();
        assert_eq!(
            net.transition_distribution(VertexId(1)),
            Err(NetworkError::AbsorbingVertex(VertexId(1)))
        );
    }

    #[test]
    fn rejects_bad_conductance() {
        assert!(ConductanceNetwork::new(2, vec![Edge::new(0, 1, 0.0)]).is_err());
        assert!(ConductanceNetwork::new(2, vec![Edge::new(0, 1, f64::NAN)]).is_err());
        assert!(ConductanceNetwork::new(2, vec![Edge::new(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn parallel_merges_pairs() {
        let net =
            ConductanceNetwork::new(2, vec![Edge::new(0, 1, 1.0), Edge::new(1, 0, 3.0)]).unwrap();
        let r = net.parallel_reduce();
        assert_eq!(r.edges(), &[Edge::new(0, 1, 4.0)]);
        let simple = star();
        assert_eq!(simple.parallel_reduce(), simple);
    }

    #[test]
    fn triple_edge_preserves_resistance() {
        let edges = vec![
            Edge::new(0, 1, 1.0),
            Edge::new(1, 2, 0.5),
            Edge::new(1, 2, 2.0),
            Edge::new(1, 2, 0.25),
            Edge::new(2, 3, 1.5),
            Edge::new(3, 4, 1.0),
            Edge::new(0, 3, 0.7),
        ];
        let net = ConductanceNetwork::new(5, edges).unwrap();
        let reduced = net.parallel_reduce();
        assert_eq!(reduced.edge_count(), 5);
        assert!(reduced
            .edges()
            .iter()
            .any(|e| (e.conductance - 2.75).abs() < 1e-15));
        let before = dense_resistance(&net, &[0], &[4]);
        let after = dense_resistance(&reduced, &[0], &[4]);
        assert!((before - after).abs() < 1e-10);
    }

    #[test]
    fn drop_loops_identity_on_loopless() {
        let net = star();
        assert_eq!(net.drop_loops(), net);
        let looped =
            ConductanceNetwork::new(2, vec![Edge::new(0, 0, 1.0), Edge::new(0, 1, 2.0)]).unwrap();
        assert_eq!(looped.drop_loops().edges(), &[Edge::new(0, 1, 2.0)]);
    }

    #[test]
    fn series_path_collapses() {
        let l = 7;
        let edges = (0..l).map(|i| Edge::new(i, i + 1, 1.0)).collect();
        let net = ConductanceNetwork::new(l + 1, edges).unwrap();
        let red = net.series_reduce(&[VertexId(0), VertexId(l)]);
        assert_eq!(red.network.vertex_count(), 2);
        assert_eq!(red.network.edge_count(), 1);
        assert!((red.network.edges()[0].conductance - 1.0 / l as f64).abs() < 1e-15);
        assert_eq!(red.vertex_map[l], Some(VertexId(1)));
    }

    #[test]
    fn series_identity_without_degree_two() {
        let net = ConductanceNetwork::new(
            4,
            vec![
                Edge::new(0, 1, 1.0),
                Edge::new(0, 2, 2.0),
                Edge::new(0, 3, 3.0),
            ],
        )
        .unwrap();
        let red = net.series_reduce(&[]);
        assert_eq!(red.network, net);
    }

    #[test]
    fn edgewise_orders() {
        let a = star();
        let b = a.map_conductances(|_, c| 2.0 * c).unwrap();
        assert_eq!(compare_edgewise(&a, &b), Ok(EdgewiseOrder::ALessOrEqual));
        assert_eq!(compare_edgewise(&b, &a), Ok(EdgewiseOrder::BLessOrEqual));
        assert_eq!(compare_edgewise(&a, &a), Ok(EdgewiseOrder::ALessOrEqual));
        let c = a
            .map_conductances(|e, c| if e.0 == 0 { c * 2.0 } else { c / 2.0 })
            .unwrap();
        assert_eq!(compare_edgewise(&a, &c), Ok(EdgewiseOrder::Incomparable));
        let d = ConductanceNetwork::new(3, vec![Edge::new(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            compare_edgewise(&a, &d),
            Err(NetworkError::StructureMismatch(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let net = ConductanceNetwork::new(
            3,
            vec![Edge::new(0, 1, 0.5).with_level(2), Edge::new(1, 2, 0.25)],
        )
        .unwrap();
        let text = serde_json::to_string(&net.to_json()).unwrap();
        assert_eq!(text, r#"{"vertices":3,"edges":[[0,1,0.5,2],[1,2,0.25]]}"#);
        let back: NetworkJson = serde_json::from_str(&text).unwrap();
        assert_eq!(ConductanceNetwork::from_json(&back).unwrap(), net);
    }

    proptest! {
        #[test]
        fn transitions_sum_to_one(net in arb_network(12)) {
            for v in 0..net.vertex_count() {
                if let Ok(p) = net.transition_distribution(VertexId(v)) {
                    let s: f64 = p.iter().map(|x| x.1).sum();
                    prop_assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn summed_conductance_is_symmetric(net in arb_network(10)) {
            for x in 0..net.vertex_count() {
                for y in 0..net.vertex_count() {
                    prop_assert_eq!(
                        net.conductance_between(VertexId(x), VertexId(y)),
                        net.conductance_between(VertexId(y), VertexId(x))
                    );
                }
            }
        }

        #[test]
        fn reductions_preserve_resistance(net in arb_network(14)) {
            let last = net.vertex_count() - 1;
            let r0 = dense_resistance(&net, &[0], &[last]);
            let par = net.parallel_reduce();
            prop_assert!((dense_resistance(&par, &[0], &[last]) - r0).abs() <= 1e-10 * r0.max(1.0));
            let nl = net.drop_loops();
            prop_assert!((dense_resistance(&nl, &[0], &[last]) - r0).abs() <= 1e-10 * r0.max(1.0));
            let ser = net.series_reduce(&[VertexId(0), VertexId(last)]);
            let s = ser.vertex_map[0].unwrap().0;
            let t = ser.vertex_map[last].unwrap().0;
            let r1 = dense_resistance(&ser.network, &[s], &[t]);
            prop_assert!((r1 - r0).abs() <= 1e-10 * r0.max(1.0));
        }

        #[test]
        fn rayleigh_monotone(net in arb_network(12), factor in 1.0f64..5.0, pick in 0usize..1000) {
            let last = net.vertex_count() - 1;
            let k = pick % net.edge_count();
            let up = net.map_conductances(|e, c| if e.0 == k { c * factor } else { c }).unwrap();
            prop_assert_eq!(compare_edgewise(&net, &up).unwrap(), EdgewiseOrder::ALessOrEqual);
            let r0 = dense_resistance(&net, &[0], &[last]);
            let r1 = dense_resistance(&up, &[0], &[last]);
            prop_assert!(r1 <= r0 * (1.0 + 1e-12));
        }
    }
}
