use std::collections::BTreeMap;

use crate::network::{ConductanceNetwork, Edge, EdgeId, VertexId};
use crate::numeric::CompensatedSum;
use crate::profile::ProfileExpr;

use super::cantor::{cantor_edge_level, edge, MAX_FULL_DEPTH};
use super::{
    budget_k, psi_at, Cutset, ExceptionSource, Family, FamilyError, FamilyKind, LevelIndex,
};

/// A set `A` of edges whose conductance is overridden, with its per-level
/// counts `|A ∩ E_n|` and an optional budget `K(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExceptionSet {
    /// Sorted, without duplicates.
    pub edges: Vec<EdgeId>,
    pub override_length: f64,
    pub budget: Option<ProfileExpr>,
    pub level_counts: BTreeMap<u32, u64>,
}

impl ExceptionSet {
    pub fn from_edges(mut edges: Vec<EdgeId>, level_of: impl Fn(EdgeId) -> u32) -> Self {
        edges.sort_unstable();
        edges.dedup();
        let mut level_counts = BTreeMap::new();
        for &e in &edges {
            *level_counts.entry(level_of(e)).or_insert(0) += 1;
        }
        ExceptionSet {
            edges,
            override_length: 1.0,
            budget: None,
            level_counts,
        }
    }

    pub fn empty() -> Self {
        Self::from_edges(Vec::new(), |_| 0)
    }

    pub fn count(&self, level: u32) -> u64 {
        self.level_counts.get(&level).copied().unwrap_or(0)
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Check `|A ∩ E_n| ≤ K(n)` at every level that has exceptions.
    pub fn check_budget(&self) -> Result<(), FamilyError> {
        let Some(budget) = &self.budget else {
            return Ok(());
        };
        for (&level, &count) in &self.level_counts {
            let k = budget.eval(level as u64)?;
            if (count as f64) > k {
                return Err(FamilyError::BudgetViolation {
                    level,
                    count,
                    budget: k.max(0.0).floor() as u64,
                });
            }
        }
        Ok(())
    }
}

/// Conductance `override_length` on every edge of `set`, others untouched.
pub fn apply_exception_set(
    net: &ConductanceNetwork,
    set: &ExceptionSet,
) -> Result<ConductanceNetwork, FamilyError> {
    if let Some(&bad) = set.edges.iter().find(|e| e.0 >= net.edge_count()) {
        return Err(FamilyError::UnknownEdge(bad));
    }
    let value = set.override_length;
    Ok(net.map_conductances(|e, c| if set.contains(e) { value } else { c })?)
}

fn budget_expr(alpha: f64) -> ProfileExpr {
    ProfileExpr::parse(&format!("ceil(n*log(n)^{alpha})")).expect("valid budget expression")
}

/// `⌈θ 2^k / k^α⌉` edges, at least one.
pub fn segment_length(k: u32, alpha: f64, theta: f64) -> u64 {
    let l = theta * 2f64.powi(k as i32) / (k as f64).powf(alpha);
    (l.ceil() as u64).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubtreeStage {
    pub k: u32,
    pub segment_len: u64,
    /// Level of the first edge of each stage-`k` segment.
    pub first_level: u32,
    /// Level of the last edge (before truncation at the requested depth).
    pub last_level: u32,
}

impl SubtreeStage {
    pub fn segments(&self) -> u64 {
        1u64 << self.k
    }

    /// Reduced conductance of one segment, `φ(k) = 1/⌈L_k⌉`.
    pub fn phi(&self) -> f64 {
        1.0 / self.segment_len as f64
    }
}

/// The subtree `T` hanging below a vertex `v1` at level `n1`: from each
/// offspring of a branch vertex a straight segment of `⌈L_k⌉` edges at stage
/// `k`, then branching again. The edge into the offspring is the first edge
/// of the segment, and segments continue through left children.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientSubtree {
    pub alpha: f64,
    pub theta: f64,
    pub n1: u32,
    pub depth: u32,
    pub stages: Vec<SubtreeStage>,
}

impl TransientSubtree {
    /// `|A ∩ E_n|`.
    pub fn count(&self, level: u32) -> u64 {
        if level > self.depth {
            return 0;
        }
        self.stages
            .iter()
            .find(|s| s.first_level <= level && level <= s.last_level)
            .map(|s| s.segments())
            .unwrap_or(0)
    }

    pub fn level_counts(&self) -> BTreeMap<u32, u64> {
        (1..=self.depth)
            .filter_map(|n| Some((n, self.count(n))).filter(|x| x.1 > 0))
            .collect()
    }

    pub fn budget(&self) -> ProfileExpr {
        budget_expr(self.alpha)
    }

    /// `|A ∩ E_n| ≤ ⌈n (log n)^α⌉` at every level up to the depth.
    pub fn check_budget(&self) -> Result<(), FamilyError> {
        for n in 1..=self.depth {
            let count = self.count(n);
            let k = budget_k(n as u64, self.alpha);
            if count > k {
                return Err(FamilyError::BudgetViolation {
                    level: n,
                    count,
                    budget: k,
                });
            }
        }
        Ok(())
    }

    /// Edges of `T` as canonical Cantor edge ids (needs `depth ≤ 62`).
    pub fn canonical_edges(&self) -> Result<ExceptionSet, FamilyError> {
        if self.depth > 62 {
            return Err(FamilyError::DepthTooLarge {
                depth: self.depth,
                max: 62,
            });
        }
        let mut edges = Vec::new();
        let mut starts: Vec<u64> = vec![0];
        let mut level = self.n1;
        for stage in &self.stages {
            let mut next = Vec::new();
            for &p in &starts {
                for side in 0..2u64 {
                    let mut idx = 2 * p + side;
                    let mut l = level + 1;
                    for j in 1..=stage.segment_len {
                        if l > self.depth {
                            break;
                        }
                        edges.push(edge(l, idx));
                        if j == stage.segment_len {
                            next.push(idx);
                        } else {
                            idx *= 2;
                            l += 1;
                        }
                    }
                }
            }
            starts = next;
            level += stage.segment_len as u32;
        }
        let mut set = ExceptionSet::from_edges(edges, |e| cantor_edge_level(e.0));
        set.budget = Some(self.budget());
        Ok(set)
    }

    /// `T` alone with unit conductances: `(network, v1, branch vertices)`.
    /// Branch vertices are `v1` and the ends of complete segments.
    pub fn unit_network(&self) -> (ConductanceNetwork, VertexId, Vec<VertexId>) {
        let mut edges = Vec::new();
        let mut count = 1usize;
        let mut branch = vec![VertexId(0)];
        let mut starts = vec![0usize];
        let mut level = self.n1;
        for stage in &self.stages {
            let mut next = Vec::new();
            for &p in &starts {
                for _ in 0..2 {
                    let mut prev = p;
                    let mut l = level + 1;
                    for j in 1..=stage.segment_len {
                        if l > self.depth {
                            break;
                        }
                        let v = count;
                        count += 1;
                        edges.push(Edge::new(prev, v, 1.0).with_level(l));
                        prev = v;
                        l += 1;
                        if j == stage.segment_len {
                            next.push(v);
                        }
                    }
                }
            }
            branch.extend(next.iter().map(|&v| VertexId(v)));
            starts = next;
            level += stage.segment_len as u32;
        }
        let net = ConductanceNetwork::new(count, edges).expect("unit tree is valid");
        (net, VertexId(0), branch)
    }
}

/// Stages of `T` up to `depth`, with the budget check `|A ∩ E_n| ≤ K(n)`.
pub fn build_transient_subtree(
    alpha: f64,
    theta: f64,
    n1: u32,
    depth: u32,
) -> Result<TransientSubtree, FamilyError> {
    if !(alpha > 0.0 && theta > 0.0 && n1 >= 1) {
        return Err(FamilyError::InvalidParameter(
            "subtree needs alpha > 0, theta > 0, n1 >= 1".into(),
        ));
    }
    let mut stages = Vec::new();
    let mut level = n1;
    let mut k = 1u32;
    while level < depth {
        if k > 62 {
            return Err(FamilyError::DepthTooLarge { depth, max: level });
        }
        let len = segment_length(k, alpha, theta);
        let last = (level as u64 + len).min(u32::MAX as u64) as u32;
        stages.push(SubtreeStage {
            k,
            segment_len: len,
            first_level: level + 1,
            last_level: last,
        });
        level = last;
        k += 1;
    }
    let tree = TransientSubtree {
        alpha,
        theta,
        n1,
        depth,
        stages,
    };
    tree.check_budget()?;
    Ok(tree)
}

/// How undecorated subtrees of the host are represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchMode {
    /// One edge to the boundary carrying the whole subtree's resistance.
    Collapsed,
    /// The level-shorted quotient of the subtree: one edge per level.
    Chain,
}

/// Cantor host with `T` attached, where every undecorated subtree is
/// replaced by its exact series–parallel equivalent.
#[derive(Debug, Clone)]
pub struct SubtreeHost {
    pub family: Family,
    /// The edges of `T` in the host.
    pub subtree_edges: ExceptionSet,
    /// The vertex standing for all level-`depth` pants.
    pub boundary: VertexId,
}

/// Build the host of depth `depth` (level-`depth` pants form the boundary
/// vertex) with `T` at conductance `override_length`. The source is `v1`.
pub fn build_subtree_host(
    profile: &ProfileExpr,
    n_min: u64,
    tree: &TransientSubtree,
    depth: u32,
    override_length: f64,
    mode: BranchMode,
) -> Result<SubtreeHost, FamilyError> {
    let n1 = tree.n1;
    if depth <= n1 + 1 {
        return Err(FamilyError::InvalidParameter(format!(
            "host depth {depth} must exceed n1 + 1 = {}",
            n1 + 1
        )));
    }
    let psi: Vec<f64> = (0..=depth)
        .map(|n| {
            if n == 0 {
                Ok(0.0)
            } else {
                psi_at(profile, n as u64, n_min)
            }
        })
        .collect::<Result<_, _>>()?;
    // tail[j] = Σ_{i=j}^{depth} 1/ψ(i)
    let mut tail = vec![0.0; depth as usize + 2];
    for j in (1..=depth as usize).rev() {
        let mut s = CompensatedSum::new();
        s.add(tail[j + 1]);
        s.add(1.0 / psi[j]);
        tail[j] = s.value();
    }

    let mut shell: Vec<u32> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut t_edges: Vec<EdgeId> = Vec::new();
    let boundary = 0usize;
    shell.push(depth);
    let new_vertex = |level: u32, shell: &mut Vec<u32>| -> usize {
        if level >= depth {
            boundary
        } else {
            shell.push(level);
            shell.len() - 1
        }
    };

    // An undecorated child subtree hanging below `v` (at `level`).
    let branch = |v: usize, level: u32, shell: &mut Vec<u32>, edges: &mut Vec<Edge>| {
        let top = level + 1;
        let scale = 2f64.powi(top as i32);
        match mode {
            BranchMode::Collapsed => {
                let r = scale * tail[top as usize];
                edges.push(Edge::new(v, boundary, 1.0 / r));
            }
            BranchMode::Chain => {
                let mut prev = v;
                for j in top..=depth {
                    let w = new_vertex(j, shell);
                    edges.push(Edge::new(prev, w, psi[j as usize] / scale).with_level(j));
                    prev = w;
                }
            }
        }
    };

    // Ancestors: x1, y1 and the leftmost path down to v1.
    let x1 = new_vertex(1, &mut shell);
    let y1 = new_vertex(1, &mut shell);
    edges.push(Edge::new(x1, y1, psi[1] / 2.0).with_level(1));
    branch(y1, 1, &mut shell, &mut edges);
    branch(y1, 1, &mut shell, &mut edges);
    let mut a = x1;
    for m in 1..n1 {
        let child = new_vertex(m + 1, &mut shell);
        let c = psi[(m + 1) as usize] / 2f64.powi(m as i32 + 1);
        edges.push(Edge::new(a, child, c).with_level(m + 1));
        branch(a, m, &mut shell, &mut edges);
        a = child;
    }
    let v1 = a;

    let mut starts = vec![v1];
    let mut level = n1;
    for stage in &tree.stages {
        let mut next = Vec::new();
        for &p in &starts {
            for _ in 0..2 {
                let mut prev = p;
                let mut l = level + 1;
                for j in 1..=stage.segment_len {
                    if l > depth {
                        break;
                    }
                    let v = new_vertex(l, &mut shell);
                    t_edges.push(EdgeId(edges.len()));
                    edges.push(Edge::new(prev, v, override_length).with_level(l));
                    if v == boundary {
                        break;
                    }
                    if j == stage.segment_len {
                        next.push(v);
                    } else {
                        branch(v, l, &mut shell, &mut edges);
                    }
                    prev = v;
                    l += 1;
                }
            }
        }
        starts = next;
        level += stage.segment_len as u32;
        if level >= depth {
            break;
        }
    }
    // Branch vertices left at the final level below `depth` have two
    // undecorated children.
    for &p in &starts {
        if level < depth {
            branch(p, level, &mut shell, &mut edges);
            branch(p, level, &mut shell, &mut edges);
        }
    }

    let network = ConductanceNetwork::new(shell.len(), edges)?;
    let levels =
        LevelIndex::from_network(&network)
            .with_nominal(|n| if n == 1 { 1 } else { 1u64 << n.min(63) });
    let cutsets = match mode {
        BranchMode::Collapsed => Vec::new(),
        BranchMode::Chain => levels
            .iter()
            .filter(|(n, e)| *n > n1 && !e.is_empty())
            .map(|(n, e)| Cutset {
                label: n,
                edges: e.to_vec(),
            })
            .collect(),
    };
    let mut subtree_edges =
        ExceptionSet::from_edges(t_edges, |e| network.edge(e).level.unwrap_or(0));
    subtree_edges.override_length = override_length;
    subtree_edges.budget = Some(tree.budget());
    let family = Family {
        kind: FamilyKind::CantorTree,
        network,
        levels,
        sources: vec![VertexId(v1)],
        shell,
        default_radius: depth - 1,
        exceptions: Some(subtree_edges.clone()),
        cutsets,
        profile: profile.clone(),
        n_min,
        d: None,
    };
    Ok(SubtreeHost {
        family,
        subtree_edges,
        boundary: VertexId(boundary),
    })
}

/// Vertex-disjoint vertical segments of `k` edges covering every vertex:
/// levels are scanned top-down and each uncovered vertex starts a segment
/// through its left children. The root cuff `e1` is never used.
fn vertical_segments(k: u32, depth: u32) -> Result<ExceptionSet, FamilyError> {
    if k == 0 {
        return Err(FamilyError::InvalidParameter("k must be >= 1".into()));
    }
    if depth > MAX_FULL_DEPTH {
        return Err(FamilyError::DepthTooLarge {
            depth,
            max: MAX_FULL_DEPTH,
        });
    }
    // remaining[i]: edges the segment through vertex i still extends below
    // it, or None when the vertex is not yet covered.
    let mut remaining: Vec<Option<u32>> = vec![None, None];
    let mut edges = Vec::new();
    for n in 1..depth {
        let mut below = vec![None; 1usize << (n + 1)];
        for (i, slot) in remaining.iter().enumerate() {
            let r = slot.unwrap_or(k);
            if r > 0 {
                edges.push(edge(n + 1, 2 * i as u64));
                below[2 * i] = Some(r - 1);
            }
        }
        remaining = below;
    }
    Ok(ExceptionSet::from_edges(edges, |e| cantor_edge_level(e.0)))
}

/// Greedy perfect matching, level by level: every unmatched vertex is
/// matched to its left child. Gives `|M_{n+1}| + |M_n| = 2^n`.
pub fn perfect_matching_cantor(depth: u32) -> Result<ExceptionSet, FamilyError> {
    if depth < 2 {
        return Err(FamilyError::InvalidParameter(
            "matching needs depth >= 2".into(),
        ));
    }
    vertical_segments(1, depth)
}

/// Perfect `k`-line ensemble made of vertical segments; `k = 1` is the
/// perfect matching.
pub fn k_line_ensemble(k: u32, depth: u32) -> Result<ExceptionSet, FamilyError> {
    vertical_segments(k, depth)
}

/// Limit of `|L ∩ E_n| / |E_n|` for [`k_line_ensemble`]:
/// `(1 - 2^-k) / (2 - 2^-k)`.
pub fn k_line_density_limit(k: u32) -> f64 {
    let t = 0.5f64.powi(k as i32);
    (1.0 - t) / (2.0 - t)
}

/// The first `⌊K(n) - ψ(n)⌋` edges of each `E_n` (clamped to `[0, |E_n|]`),
/// so that `ψ(n) + |A_n| ≤ K(n)` with `K(n) = ⌈n (log n)^α⌉`.
pub fn budget_fill(
    profile: &ProfileExpr,
    n_min: u64,
    alpha: f64,
    depth: u32,
) -> Result<ExceptionSet, FamilyError> {
    if depth > MAX_FULL_DEPTH {
        return Err(FamilyError::DepthTooLarge {
            depth,
            max: MAX_FULL_DEPTH,
        });
    }
    let mut edges = Vec::new();
    for n in 2..=depth {
        let room = budget_k(n as u64, alpha) as f64 - psi_at(profile, n as u64, n_min)?;
        let take = room.max(0.0).floor().min((1u64 << n) as f64) as u64;
        edges.extend((0..take).map(|i| edge(n, i)));
    }
    let mut set = ExceptionSet::from_edges(edges, |e| cantor_edge_level(e.0));
    set.budget = Some(budget_expr(alpha));
    Ok(set)
}

/// Replace level cutsets with the windowed cutsets used with matchings and
/// line ensembles: `Π_j` is `k + 1` consecutive levels minus the set.
pub(super) fn install_decoration_cutsets(
    fam: &mut Family,
    set: &ExceptionSet,
    source: &ExceptionSource,
) {
    let width = match source {
        ExceptionSource::Matching => 2,
        ExceptionSource::KLine { k } => *k + 1,
        _ => return,
    };
    let max = fam.levels.max_level();
    let mut cutsets = Vec::new();
    let mut start = 2;
    let mut label = 1;
    while start + width - 1 <= max {
        let edges: Vec<EdgeId> = (start..start + width)
            .flat_map(|n| fam.levels.level(n).iter().copied())
            .filter(|&e| !set.contains(e))
            .collect();
        cutsets.push(Cutset { label, edges });
        start += width;
        label += 1;
    }
    fam.cutsets = cutsets;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{build_cantor_tree, cantor_vertex_count};
    use std::collections::HashSet;

    fn p(s: &str) -> ProfileExpr {
        ProfileExpr::parse(s).unwrap()
    }

    #[test]
    fn segment_rounding() {
        assert_eq!(segment_length(3, 2.0, 1.0), 1);
        assert_eq!(segment_length(1, 2.0, 8.0), 16);
        assert_eq!(segment_length(3, 2.0, 8.0), 8);
        assert_eq!(segment_length(5, 2.0, 8.0), 11);
    }

    #[test]
    fn reduced_conductances_follow_power_law() {
        let tree = build_transient_subtree(2.0, 8.0, 32, 200).unwrap();
        for s in &tree.stages {
            let exact = (s.k as f64).powi(2) / 8.0;
            let got = 2f64.powi(s.k as i32) * s.phi();
            // ⌈L⌉ - L < 1 edge per segment
            let l = 8.0 * 2f64.powi(s.k as i32) / (s.k as f64).powi(2);
            assert!(s.segment_len as f64 - l < 1.0);
            assert!(got <= exact + 1e-12 && got >= exact * l / (l + 1.0) - 1e-12);
        }
    }

    #[test]
    fn log_alpha_one_diverges() {
        let theta = 3.0;
        let mut s = CompensatedSum::new();
        let mut checkpoints = Vec::new();
        for k in 1..=(1u32 << 20) {
            // (2^k φ(k))^{-1} = L_k / 2^k = θ / k for α = 1
            s.add(theta / k as f64);
            if k.is_power_of_two() {
                checkpoints.push(s.value());
            }
        }
        for w in checkpoints.windows(2).skip(4) {
            let step = w[1] - w[0];
            assert!((step - theta * 2f64.ln()).abs() < 0.1, "step {step}");
        }
    }

    #[test]
    fn budget_violation_detected() {
        assert!(build_transient_subtree(2.0, 8.0, 32, 400).is_ok());
        assert!(matches!(
            build_transient_subtree(2.0, 1.0, 4, 120),
            Err(FamilyError::BudgetViolation { .. })
        ));
    }

    #[test]
    fn subtree_edges_match_counts() {
        let tree = build_transient_subtree(2.0, 1.0, 3, 12).unwrap();
        let set = tree.canonical_edges().unwrap();
        for n in 1..=12 {
            assert_eq!(set.count(n), tree.count(n), "level {n}");
        }
        let fam = build_cantor_tree(&p("1"), 12, 1).unwrap();
        // T is a tree hanging below v1 = (3, 0)
        let mut vertices = HashSet::new();
        for &e in &set.edges {
            let edge = fam.network.edge(e);
            vertices.insert(edge.a);
            vertices.insert(edge.b);
        }
        assert_eq!(vertices.len(), set.len() + 1);
    }

    #[test]
    fn compressed_host_matches_tree_structure() {
        let tree = build_transient_subtree(2.0, 1.0, 3, 12).unwrap();
        for mode in [BranchMode::Collapsed, BranchMode::Chain] {
            let host = build_subtree_host(&p("n"), 1, &tree, 12, 1.0, mode).unwrap();
            assert_eq!(
                host.subtree_edges.len(),
                tree.canonical_edges().unwrap().len()
            );
            assert!(host.family.network.edge_count() >= host.subtree_edges.len());
        }
    }

    #[test]
    fn compressed_host_resistance_equals_full_tree() {
        use crate::families::cantor_vertex_id;
        use crate::testutil::dense_resistance;
        let depth = 8;
        let tree = build_transient_subtree(2.0, 1.0, 2, depth).unwrap();
        let profile = p("n^2");
        let full = build_cantor_tree(&profile, depth, 1).unwrap();
        let mut set = tree.canonical_edges().unwrap();
        set.override_length = 0.7;
        let net = apply_exception_set(&full.network, &set).unwrap();
        let leaves: Vec<usize> = (0..1u64 << depth)
            .map(|i| cantor_vertex_id(depth, i))
            .collect();
        let want = dense_resistance(&net, &[cantor_vertex_id(2, 0)], &leaves);
        for mode in [BranchMode::Collapsed, BranchMode::Chain] {
            let host = build_subtree_host(&profile, 1, &tree, depth, 0.7, mode).unwrap();
            let got = dense_resistance(
                &host.family.network,
                &[host.family.root().0],
                &[host.boundary.0],
            );
            assert!(
                (got - want).abs() < 1e-10 * want,
                "{mode:?}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn matching_recurrence_and_property() {
        let m = perfect_matching_cantor(12).unwrap();
        assert_eq!(m.count(1), 0);
        assert_eq!(m.count(2), 2);
        for n in 2..12u32 {
            assert_eq!(m.count(n + 1) + m.count(n), 1u64 << n);
        }
        let fam = build_cantor_tree(&p("1"), 12, 1).unwrap();
        let mut used = vec![false; cantor_vertex_count(12)];
        for &e in &m.edges {
            let edge = fam.network.edge(e);
            for v in [edge.a.0, edge.b.0] {
                assert!(!used[v], "vertex {v} matched twice");
                used[v] = true;
            }
        }
        // perfect except for leaves left over at the truncation depth
        for v in 0..used.len() {
            assert!(used[v] || fam.shell[v] == 12);
        }
    }

    #[test]
    fn line_segments_are_disjoint_and_cover() {
        for k in 1..=4u32 {
            for depth in 2..=12u32 {
                let set = k_line_ensemble(k, depth).unwrap();
                let fam = build_cantor_tree(&p("1"), depth, 1).unwrap();
                let n = fam.network.vertex_count();
                let mut deg = vec![0u32; n];
                for &e in &set.edges {
                    let edge = fam.network.edge(e);
                    deg[edge.a.0] += 1;
                    deg[edge.b.0] += 1;
                }
                // a union of disjoint paths: degree ≤ 2 and each component
                // has at most k edges
                assert!(deg.iter().all(|&d| d <= 2));
                let mut parent: Vec<usize> = (0..n).collect();
                fn find(p: &mut Vec<usize>, x: usize) -> usize {
                    let mut r = x;
                    while p[r] != r {
                        r = p[r];
                    }
                    p[x] = r;
                    r
                }
                for &e in &set.edges {
                    let edge = fam.network.edge(e);
                    let (a, b) = (find(&mut parent, edge.a.0), find(&mut parent, edge.b.0));
                    assert_ne!(a, b, "cycle");
                    parent[a] = b;
                }
                let mut size: BTreeMap<usize, u32> = BTreeMap::new();
                for &e in &set.edges {
                    let r = find(&mut parent, fam.network.edge(e).a.0);
                    *size.entry(r).or_default() += 1;
                }
                assert!(size.values().all(|&s| s <= k));
                for v in 0..n {
                    if fam.shell[v] + k <= depth {
                        // vertices far from the cut are covered
                        assert!(deg[v] > 0, "k={k} depth={depth} vertex {v} uncovered");
                    }
                }
            }
        }
    }

    #[test]
    fn apply_overrides() {
        let fam = build_cantor_tree(&p("1"), 6, 1).unwrap();
        let same = apply_exception_set(&fam.network, &ExceptionSet::empty()).unwrap();
        assert_eq!(same, fam.network);
        let e = edge(5, 3);
        let set = ExceptionSet::from_edges(vec![e], |_| 5);
        assert_eq!(fam.network.edge(e).conductance, 1.0 / 32.0);
        let out = apply_exception_set(&fam.network, &set).unwrap();
        assert_eq!(out.edge(e).conductance, 1.0);
        let bad = ExceptionSet::from_edges(vec![EdgeId(1 << 20)], |_| 1);
        assert!(matches!(
            apply_exception_set(&fam.network, &bad),
            Err(FamilyError::UnknownEdge(_))
        ));
    }

    #[test]
    fn budget_fill_respects_budget() {
        let set = budget_fill(&p("n"), 1, 1.0, 12).unwrap();
        for n in 2..=12u32 {
            let k = budget_k(n as u64, 1.0);
            assert!(n as u64 + set.count(n) <= k);
        }
        set.check_budget().unwrap();
    }
}
