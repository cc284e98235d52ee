use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{SolverError, Truncation};
use crate::families::{Cutset, Family};
use crate::network::{EdgeId, VertexId};
use crate::numeric::CompensatedSum;

/// Disjoint cutsets `Π_n` with masses `ℓ(Π_n)` and the partial sums of
/// `Σ ℓ(Π_n)^{-1}`, all verified inside one truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutsetSeries {
    pub labels: Vec<u32>,
    pub masses: Vec<f64>,
    pub partial_sums: Vec<f64>,
}

impl CutsetSeries {
    /// `Σ ℓ(Π_n)^{-1}` over all cutsets.
    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }
}

/// Shortest path from the root to the boundary avoiding `blocked` edges.
fn witness_path(trunc: &Truncation, blocked: &[bool]) -> Option<Vec<VertexId>> {
    let net = &trunc.network;
    let boundary = trunc.boundary?;
    let mut parent: Vec<Option<usize>> = vec![None; net.vertex_count()];
    let mut seen = vec![false; net.vertex_count()];
    let mut queue = VecDeque::new();
    seen[trunc.root.0] = true;
    queue.push_back(trunc.root.0);
    while let Some(v) = queue.pop_front() {
        if v == boundary.0 {
            let mut path = vec![VertexId(v)];
            let mut cur = v;
            while let Some(p) = parent[cur] {
                path.push(VertexId(p));
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        for &e in net.incident(VertexId(v)) {
            if blocked[e] {
                continue;
            }
            let w = net.edges()[e].other(VertexId(v)).0;
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some(v);
                queue.push_back(w);
            }
        }
    }
    None
}

/// Check that each cutset (given in truncation edge ids) separates the root
/// from the boundary and that no edge is shared, then accumulate the series.
pub fn nash_williams(
    trunc: &Truncation,
    cutsets: &[(u32, Vec<EdgeId>)],
) -> Result<CutsetSeries, SolverError> {
    trunc.boundary_or_err()?;
    let m = trunc.network.edge_count();
    let mut owner: Vec<Option<u32>> = vec![None; m];
    let mut series = CutsetSeries {
        labels: Vec::new(),
        masses: Vec::new(),
        partial_sums: Vec::new(),
    };
    let mut acc = CompensatedSum::new();
    for (label, edges) in cutsets {
        let mut blocked = vec![false; m];
        let mut mass = CompensatedSum::new();
        for &e in edges {
            if let Some(other) = owner[e.0] {
                return Err(SolverError::OverlappingCutsets(other, *label));
            }
            owner[e.0] = Some(*label);
            blocked[e.0] = true;
            mass.add(trunc.network.edge(e).conductance);
        }
        if let Some(witness) = witness_path(trunc, &blocked) {
            return Err(SolverError::NotACutset {
                label: *label,
                witness,
            });
        }
        let mass = mass.value();
        acc.add(1.0 / mass);
        series.labels.push(*label);
        series.masses.push(mass);
        series.partial_sums.push(acc.value());
    }
    Ok(series)
}

/// The family's usable cutsets at the truncation radius, mapped into the
/// truncation and verified. Edges with both ends wired are gone from the
/// truncation and drop out of their cutset.
pub fn family_cutset_series(fam: &Family, trunc: &Truncation) -> Result<CutsetSeries, SolverError> {
    let usable: Vec<(u32, Vec<EdgeId>)> = fam
        .usable_cutsets(trunc.radius)
        .map(|c: &Cutset| {
            let edges = c.edges.iter().filter_map(|e| trunc.edge_map[e.0]).collect();
            (c.label, edges)
        })
        .collect();
    nash_williams(trunc, &usable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{build_cantor_tree, build_chain_1d};
    use crate::network::{ConductanceNetwork, Edge};
    use crate::profile::ProfileExpr;
    use crate::solver::wire_boundary;

    #[test]
    fn single_edge_series() {
        let net = ConductanceNetwork::new(2, vec![Edge::new(0, 1, 0.2)]).unwrap();
        let t = wire_boundary(&net, VertexId(0), 0).unwrap();
        let s = nash_williams(&t, &[(1, vec![EdgeId(0)])]).unwrap();
        assert!((s.total() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn non_cutset_has_witness() {
        let fam = build_cantor_tree(&ProfileExpr::parse("1").unwrap(), 5, 1).unwrap();
        let t = fam.truncate(4).unwrap();
        // half of E_3 leaves the other half open
        let half: Vec<EdgeId> = fam.levels.level(3)[..4]
            .iter()
            .map(|e| t.edge_map[e.0].unwrap())
            .collect();
        match nash_williams(&t, &[(3, half)]) {
            Err(SolverError::NotACutset { label: 3, witness }) => {
                assert_eq!(witness[0], t.root);
                assert_eq!(*witness.last().unwrap(), t.boundary.unwrap());
            }
            other => panic!("{other:?}"),
        }
        let e3: Vec<EdgeId> = fam
            .levels
            .level(3)
            .iter()
            .map(|e| t.edge_map[e.0].unwrap())
            .collect();
        assert!(matches!(
            nash_williams(&t, &[(3, e3.clone()), (4, e3)]),
            Err(SolverError::OverlappingCutsets(3, 4))
        ));
    }

    #[test]
    fn cantor_masses_are_profile_values() {
        let psi = ProfileExpr::parse("n^2").unwrap();
        let fam = build_cantor_tree(&psi, 9, 1).unwrap();
        let t = fam.truncate(8).unwrap();
        let s = family_cutset_series(&fam, &t).unwrap();
        assert_eq!(s.labels, (2..=9).collect::<Vec<_>>());
        for (n, m) in s.labels.iter().zip(&s.masses) {
            let want = (*n as f64).powi(2);
            assert!((m - want).abs() < 1e-12 * want);
        }
        let e1: f64 = fam
            .levels
            .level(1)
            .iter()
            .map(|&e| fam.network.edge(e).conductance)
            .sum();
        assert_eq!(e1, 0.5);
        let chain = build_chain_1d(&psi, 9, 1).unwrap();
        let tc = chain.truncate(8).unwrap();
        assert_eq!(family_cutset_series(&chain, &tc).unwrap(), s);
    }
}
