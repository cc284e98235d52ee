//! Finite truncations of the infinite dual graphs (Cantor tree, `Z^d`,
//! tori chain, 1-D chain) and their edge decorations.
//!
//! Every built [`Family`] carries a per-vertex *shell* index. Truncating at
//! radius `r` wires every vertex with shell `> r` to a single boundary node.
//! Shells are the Cantor level, `⌈‖x‖₂⌉` on the lattice, and the inner host
//! level for tori-chain gadget vertices.

mod cantor;
mod decorations;
mod lattice;
mod tori;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{ConductanceNetwork, EdgeId, NetworkError, VertexId};
use crate::profile::{ProfileError, ProfileExpr};

pub use cantor::{
    build_cantor_quotient, build_cantor_tree, build_chain_1d, cantor_edge_count, cantor_edge_id,
    cantor_edge_level, cantor_vertex_count, cantor_vertex_id, MAX_FULL_DEPTH,
};
pub use decorations::{
    apply_exception_set, budget_fill, build_subtree_host, build_transient_subtree,
    k_line_density_limit, k_line_ensemble, perfect_matching_cantor, segment_length, BranchMode,
    ExceptionSet, SubtreeHost, SubtreeStage, TransientSubtree,
};
pub use lattice::{build_zd, lattice_level, lattice_points, random_matching_zd, RandomMatching};
pub use tori::{build_tori_chain, TORI_GADGET_RESISTANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("lattice would have {edges} edges, above the cap of {cap}")]
    EdgeCap { edges: usize, cap: usize },
    #[error("depth {depth} exceeds the limit {max} for an explicit tree")]
    DepthTooLarge { depth: u32, max: u32 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("|A ∩ E_{level}| = {count} exceeds the budget K({level}) = {budget}")]
    BudgetViolation { level: u32, count: u64, budget: u64 },
    #[error("edge {0} is not in the network")]
    UnknownEdge(EdgeId),
    #[error("decoration `{0}` is not available for this family")]
    UnsupportedDecoration(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyKind {
    CantorTree,
    ZdLattice,
    ToriChain,
    Chain1D,
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            FamilyKind::CantorTree => "CantorTree",
            FamilyKind::ZdLattice => "ZdLattice",
            FamilyKind::ToriChain => "ToriChain",
            FamilyKind::Chain1D => "Chain1D",
        };
        f.write_str(name)
    }
}

/// How a Cantor tree is materialised. The quotient shorts each level of
/// vertices, which is exact for level-constant conductances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Full,
    Quotient,
    #[default]
    Auto,
}

/// Depth up to which `Auto` builds the explicit tree.
pub const AUTO_FULL_DEPTH: u32 = 18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionSpec {
    pub source: String,
    #[serde(rename = "override", default = "unit_length")]
    pub override_length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<ProfileExpr>,
}

fn unit_length() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    pub profile: ProfileExpr,
    pub depth: u32,
    /// Levels below `n_min` use `ψ(n_min)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_min: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<Representation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exceptions: Option<ExceptionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_cap: Option<usize>,
}

pub const DEFAULT_EDGE_CAP: usize = 8_000_000;

impl FamilySpec {
    pub fn new(kind: FamilyKind, profile: &str, depth: u32) -> Result<Self, FamilyError> {
        Ok(FamilySpec {
            kind,
            d: None,
            profile: ProfileExpr::parse(profile)?,
            depth,
            n_min: None,
            representation: None,
            exceptions: None,
            edge_cap: None,
        })
    }

    pub fn n_min(&self) -> u64 {
        self.n_min.unwrap_or(1).max(1)
    }

    pub fn exception_source(&self) -> Result<Option<ExceptionSource>, FamilyError> {
        self.exceptions
            .as_ref()
            .map(|e| e.source.parse())
            .transpose()
    }
}

/// Parsed form of `ExceptionSpec::source`, e.g. `subtree(alpha=2, theta=8, n1=32)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ExceptionSource {
    Subtree { alpha: f64, theta: f64, n1: u32 },
    Matching,
    KLine { k: u32 },
    RandomMatching { seed: u64 },
    BudgetFill { alpha: f64 },
}

impl FromStr for ExceptionSource {
    type Err = FamilyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) => {
                let close = s.rfind(')').filter(|&c| c > open).ok_or_else(|| {
                    FamilyError::InvalidParameter(format!("unbalanced parentheses in `{s}`"))
                })?;
                (&s[..open], &s[open + 1..close])
            }
            None => (s, ""),
        };
        let mut params: Vec<(String, f64)> = Vec::new();
        for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| {
                FamilyError::InvalidParameter(format!("expected key=value, got `{part}`"))
            })?;
            let v: f64 = v.trim().parse().map_err(|_| {
                FamilyError::InvalidParameter(format!("`{}` is not a number", v.trim()))
            })?;
            params.push((k.trim().to_string(), v));
        }
        let get = |key: &str, default: f64| {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|p| p.1)
                .unwrap_or(default)
        };
        let known = |allowed: &[&str]| -> Result<(), FamilyError> {
            match params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
                Some((k, _)) => Err(FamilyError::InvalidParameter(format!(
                    "unknown parameter `{k}` for `{}`",
                    name.trim()
                ))),
                None => Ok(()),
            }
        };
        match name.trim() {
            "subtree" => {
                known(&["alpha", "theta", "n1"])?;
                Ok(ExceptionSource::Subtree {
                    alpha: get("alpha", 2.0),
                    theta: get("theta", 8.0),
                    n1: get("n1", 32.0) as u32,
                })
            }
            "matching" => {
                known(&[])?;
                Ok(ExceptionSource::Matching)
            }
            "kline" => {
                known(&["k"])?;
                Ok(ExceptionSource::KLine {
                    k: get("k", 2.0) as u32,
                })
            }
            "random-matching" => {
                known(&["seed"])?;
                Ok(ExceptionSource::RandomMatching {
                    seed: get("seed", 0.0) as u64,
                })
            }
            "budget-fill" => {
                known(&["alpha"])?;
                Ok(ExceptionSource::BudgetFill {
                    alpha: get("alpha", 1.0),
                })
            }
            other => Err(FamilyError::UnsupportedDecoration(other.to_string())),
        }
    }
}

/// Edge ids grouped by level tag.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevelIndex {
    by_level: Vec<Vec<EdgeId>>,
    nominal: Vec<u64>,
}

impl LevelIndex {
    /// Group edges by their level tag; untagged edges are left out.
    pub fn from_network(net: &ConductanceNetwork) -> Self {
        let mut by_level: Vec<Vec<EdgeId>> = Vec::new();
        for (i, e) in net.edges().iter().enumerate() {
            if let Some(l) = e.level {
                let l = l as usize;
                if by_level.len() <= l {
                    by_level.resize(l + 1, Vec::new());
                }
                by_level[l].push(EdgeId(i));
            }
        }
        let nominal = by_level.iter().map(|v| v.len() as u64).collect();
        LevelIndex { by_level, nominal }
    }

    /// Record how many edges each level stands for in the infinite family
    /// (differs from the stored count for quotient networks).
    pub fn with_nominal(mut self, nominal: impl Fn(u32) -> u64) -> Self {
        self.nominal = (0..self.by_level.len() as u32)
            .map(|n| if n == 0 { 0 } else { nominal(n) })
            .collect();
        self
    }

    pub fn max_level(&self) -> u32 {
        self.by_level.len().saturating_sub(1) as u32
    }

    pub fn level(&self, n: u32) -> &[EdgeId] {
        self.by_level
            .get(n as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn count(&self, n: u32) -> usize {
        self.level(n).len()
    }

    pub fn nominal_count(&self, n: u32) -> u64 {
        self.nominal.get(n as usize).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[EdgeId])> {
        self.by_level
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, v)| (n as u32, v.as_slice()))
    }
}

/// A candidate cutset `Π` for the Nash–Williams series.
#[derive(Debug, Clone, PartialEq)]
pub struct Cutset {
    pub label: u32,
    pub edges: Vec<EdgeId>,
}

/// A built, finite piece of an infinite family.
#[derive(Debug, Clone)]
pub struct Family {
    pub kind: FamilyKind,
    pub network: ConductanceNetwork,
    pub levels: LevelIndex,
    /// The source terminal; several vertices are shorted together.
    pub sources: Vec<VertexId>,
    pub shell: Vec<u32>,
    /// Radius whose truncation uses the whole built piece.
    pub default_radius: u32,
    pub exceptions: Option<ExceptionSet>,
    pub cutsets: Vec<Cutset>,
    pub profile: ProfileExpr,
    pub n_min: u64,
    pub d: Option<u32>,
}

impl Family {
    pub fn root(&self) -> VertexId {
        self.sources[0]
    }

    pub fn max_shell(&self) -> u32 {
        self.shell.iter().copied().max().unwrap_or(0)
    }

    /// Largest shell touched by a cutset.
    pub fn cutset_reach(&self, c: &Cutset) -> u32 {
        c.edges
            .iter()
            .map(|&e| {
                let edge = self.network.edge(e);
                self.shell[edge.a.0].max(self.shell[edge.b.0])
            })
            .max()
            .unwrap_or(0)
    }
}

impl Family {
    /// Cutsets that separate the source from the wired boundary at `radius`.
    /// On the lattice that is `E_n` for `n ≤ radius`; elsewhere every cutset
    /// whose reach is at most `radius + 1`.
    pub fn usable_cutsets(&self, radius: u32) -> impl Iterator<Item = &Cutset> + '_ {
        self.cutsets.iter().filter(move |c| {
            !c.edges.is_empty()
                && match self.kind {
                    FamilyKind::ZdLattice => c.label <= radius,
                    _ => self.cutset_reach(c) <= radius + 1,
                }
        })
    }
}

/// `ψ(max(n, n_min))`, required positive.
pub(crate) fn psi_at(profile: &ProfileExpr, n: u64, n_min: u64) -> Result<f64, FamilyError> {
    Ok(profile.positive(n.max(n_min))?)
}

/// `K(n) = ⌈n (log n)^α⌉`.
pub fn budget_k(n: u64, alpha: f64) -> u64 {
    if n <= 1 {
        return 0;
    }
    let v = n as f64 * (n as f64).ln().powf(alpha);
    v.ceil() as u64
}

/// Build the family described by `spec`, including its decoration.
pub fn build(spec: &FamilySpec) -> Result<Family, FamilyError> {
    let n_min = spec.n_min();
    if spec.depth < 1 {
        return Err(FamilyError::InvalidParameter("depth must be >= 1".into()));
    }
    let source = spec.exception_source()?;
    let override_length = spec
        .exceptions
        .as_ref()
        .map(|e| e.override_length)
        .unwrap_or(1.0);
    let budget = spec.exceptions.as_ref().and_then(|e| e.budget.clone());
    match spec.kind {
        FamilyKind::CantorTree => {
            let representation = spec.representation.unwrap_or_default();
            match source {
                None => match representation {
                    Representation::Quotient => {
                        build_cantor_quotient(&spec.profile, spec.depth, n_min)
                    }
                    Representation::Full => build_cantor_tree(&spec.profile, spec.depth, n_min),
                    Representation::Auto if spec.depth <= AUTO_FULL_DEPTH => {
                        build_cantor_tree(&spec.profile, spec.depth, n_min)
                    }
                    Representation::Auto => build_cantor_quotient(&spec.profile, spec.depth, n_min),
                },
                Some(ExceptionSource::Subtree { alpha, theta, n1 }) => {
                    let tree = build_transient_subtree(alpha, theta, n1, spec.depth)?;
                    let host = build_subtree_host(
                        &spec.profile,
                        n_min,
                        &tree,
                        spec.depth,
                        override_length,
                        BranchMode::Chain,
                    )?;
                    Ok(host.family)
                }
                Some(other) => {
                    let mut fam = build_cantor_tree(&spec.profile, spec.depth, n_min)?;
                    let mut set = match other {
                        ExceptionSource::Matching => perfect_matching_cantor(spec.depth)?,
                        ExceptionSource::KLine { k } => k_line_ensemble(k, spec.depth)?,
                        ExceptionSource::BudgetFill { alpha } => {
                            budget_fill(&spec.profile, n_min, alpha, spec.depth)?
                        }
                        ExceptionSource::RandomMatching { .. } => {
                            return Err(FamilyError::UnsupportedDecoration(
                                "random-matching needs a lattice".into(),
                            ))
                        }
                        ExceptionSource::Subtree { .. } => unreachable!(),
                    };
                    set.override_length = override_length;
                    if budget.is_some() {
                        set.budget = budget;
                    }
                    set.check_budget()?;
                    fam.network = apply_exception_set(&fam.network, &set)?;
                    decorations::install_decoration_cutsets(&mut fam, &set, &other);
                    fam.exceptions = Some(set);
                    Ok(fam)
                }
            }
        }
        FamilyKind::ZdLattice => {
            let d = spec
                .d
                .ok_or_else(|| FamilyError::InvalidParameter("ZdLattice needs `d`".into()))?;
            let cap = spec.edge_cap.unwrap_or(DEFAULT_EDGE_CAP);
            let mut fam = build_zd(d, &spec.profile, spec.depth, n_min, cap)?;
            match source {
                None => Ok(fam),
                Some(ExceptionSource::RandomMatching { seed }) => {
                    let rm = random_matching_zd(d, spec.depth, seed)?;
                    let mut set = rm.set;
                    set.override_length = override_length;
                    if budget.is_some() {
                        set.budget = budget;
                    }
                    set.check_budget()?;
                    fam.network = apply_exception_set(&fam.network, &set)?;
                    fam.exceptions = Some(set);
                    Ok(fam)
                }
                Some(other) => Err(FamilyError::UnsupportedDecoration(format!(
                    "{other:?} on a lattice"
                ))),
            }
        }
        FamilyKind::ToriChain => {
            if source.is_some() {
                return Err(FamilyError::UnsupportedDecoration(
                    "tori chain takes no decoration".into(),
                ));
            }
            build_tori_chain(spec.depth)
        }
        FamilyKind::Chain1D => {
            if source.is_some() {
                return Err(FamilyError::UnsupportedDecoration(
                    "1-D chain takes no decoration".into(),
                ));
            }
            build_chain_1d(&spec.profile, spec.depth, n_min)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exception_sources_parse() {
        assert_eq!(
            "subtree(alpha=2, theta=8, n1=32)"
                .parse::<ExceptionSource>()
                .unwrap(),
            ExceptionSource::Subtree {
                alpha: 2.0,
                theta: 8.0,
                n1: 32
            }
        );
        assert_eq!(
            "matching".parse::<ExceptionSource>().unwrap(),
            ExceptionSource::Matching
        );
        assert_eq!(
            "kline(k=3)".parse::<ExceptionSource>().unwrap(),
            ExceptionSource::KLine { k: 3 }
        );
        assert_eq!(
            "random-matching(seed=7)"
                .parse::<ExceptionSource>()
                .unwrap(),
            ExceptionSource::RandomMatching { seed: 7 }
        );
        assert!("subtree(beta=1)".parse::<ExceptionSource>().is_err());
        assert!("bogus".parse::<ExceptionSource>().is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let text = r#"{"kind":"CantorTree","profile":"n*log(n)^2","depth":12,"n_min":2,
            "exceptions":{"source":"matching","override":1.0,"budget":"ceil(n*log(n)^2)"}}"#;
        let spec: FamilySpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.n_min(), 2);
        assert_eq!(spec.exceptions.as_ref().unwrap().override_length, 1.0);
        let again: FamilySpec =
            serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
        let bad = r#"{"kind":"CantorTree","profile":"n*","depth":3}"#;
        assert!(serde_json::from_str::<FamilySpec>(bad).is_err());
    }

    #[test]
    fn budget_values() {
        assert_eq!(budget_k(1, 2.0), 0);
        assert_eq!(budget_k(10, 1.0), (10.0 * 10f64.ln()).ceil() as u64);
        assert_eq!(budget_k(33, 2.0), (33.0 * 33f64.ln().powi(2)).ceil() as u64);
    }
}
