use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    effective_resistance, family_cutset_series, min_energy_flow, monte_carlo_escape, CutsetSeries,
    EscapeEstimate, SolverError, SolverOptions,
};
use crate::families::{
    budget_k, cantor_vertex_count, ExceptionSource, Family, FamilyKind, FamilySpec,
    TORI_GADGET_RESISTANCE,
};
use crate::network::{EdgeId, VertexId};
use crate::numeric::linear_fit_slope;

/// Caller-supplied fact about `Σ ψ(n)^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvergenceVerdict {
    Convergent,
    Divergent,
}

impl FromStr for ConvergenceVerdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "convergent" => Ok(ConvergenceVerdict::Convergent),
            "divergent" => Ok(ConvergenceVerdict::Divergent),
            other => Err(format!(
                "expected `convergent` or `divergent`, got `{other}`"
            )),
        }
    }
}

impl fmt::Display for ConvergenceVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConvergenceVerdict::Convergent => "convergent",
            ConvergenceVerdict::Divergent => "divergent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    RecurrentEvidence,
    TransientEvidence,
    Inconclusive,
}

/// The statement whose hypotheses were checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremTag {
    /// Cantor tree with `ℓ(e) = ψ(n)/2^n`: recurrent iff `Σ 1/ψ = ∞`.
    CantorProfile,
    /// Few long cuffs, `ψ(n) + |A_n| ≤ K(n)` with `α ≤ 1`: still recurrent.
    CantorSparseLongCuffs,
    /// A subtree of unit cuffs inside the budget `K(n)` with `α > 1`: transient.
    CantorTransientSubtree,
    /// Long cuffs confined to a perfect matching or line ensemble: recurrent.
    CantorMatching,
    /// `Z^d` with `ℓ(e) = ψ(n)/n^{d-1}`.
    LatticeProfile,
    /// `Z^d` with long edges confined to a matching: recurrent.
    LatticeMatching,
    /// Chain of two-holed tori, quasi-isometric to a tree with level
    /// resistance `∝ n`: transient.
    ToriChain,
    /// Path with `ℓ(n, n+1) = ψ(n+1)`.
    ChainSeries,
}

impl TheoremTag {
    /// Verdict implied by the statement once its hypotheses hold.
    pub fn rule(self, series: ConvergenceVerdict) -> Result<Verdict, String> {
        use ConvergenceVerdict::*;
        use TheoremTag::*;
        match (self, series) {
            (CantorProfile | LatticeProfile | ChainSeries, Divergent) => {
                Ok(Verdict::RecurrentEvidence)
            }
            (CantorProfile | LatticeProfile | ChainSeries, Convergent) => {
                Ok(Verdict::TransientEvidence)
            }
            (CantorSparseLongCuffs | CantorMatching | LatticeMatching, Divergent) => {
                Ok(Verdict::RecurrentEvidence)
            }
            (CantorSparseLongCuffs | CantorMatching | LatticeMatching, Convergent) => {
                Err("the statement assumes a divergent series".into())
            }
            (CantorTransientSubtree | ToriChain, _) => Ok(Verdict::TransientEvidence),
        }
    }
}

/// One mechanically checked inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCheck {
    pub level: u32,
    pub check: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Evidence {
    pub radii: Vec<u32>,
    pub resistances: Vec<f64>,
    /// Slope of `R_N` against `ln N`.
    pub log_fit_slope: Option<f64>,
    pub nash_williams: Option<CutsetSeries>,
    /// Thomson energy of the minimum-energy flow at the largest radius.
    pub flow_energy: Option<f64>,
    pub monte_carlo: Option<EscapeEstimate>,
    pub hypotheses: Vec<LevelCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub verdict: Verdict,
    pub theorem: TheoremTag,
    pub family: FamilyKind,
    pub profile: String,
    pub series: ConvergenceVerdict,
    pub evidence: Evidence,
}

impl Certificate {
    /// Recompute the verdict from the stored tag, series and checks.
    pub fn replay(&self) -> Verdict {
        if self.evidence.hypotheses.iter().any(|c| !c.passed) {
            return Verdict::Inconclusive;
        }
        self.theorem
            .rule(self.series)
            .unwrap_or(Verdict::Inconclusive)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyParams {
    /// Bound on `ψ(n+1)/ψ(n)` over built levels.
    pub ratio_cap: f64,
    /// Radii for the corroborating sweep; empty means the default radius.
    pub radii: Vec<u32>,
    pub solver: SolverOptions,
    pub monte_carlo: Option<(u64, u64)>,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams {
            ratio_cap: 16.0,
            radii: Vec::new(),
            solver: SolverOptions::default(),
            monte_carlo: None,
        }
    }
}

const REL: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL * a.abs().max(b.abs())
}

struct Checks(Vec<LevelCheck>);

impl Checks {
    fn push(&mut self, level: u32, check: &str, value: f64, bound: f64, passed: bool) {
        self.0.push(LevelCheck {
            level,
            check: check.into(),
            value,
            bound,
            passed,
        });
    }

    fn at_most(&mut self, level: u32, check: &str, value: f64, bound: f64) {
        let passed = value <= bound * (1.0 + REL);
        self.push(level, check, value, bound, passed);
    }
}

fn psi(fam: &Family, n: u32) -> Result<f64, SolverError> {
    Ok(fam
        .profile
        .positive((n as u64).max(fam.n_min))
        .map_err(crate::families::FamilyError::from)?)
}

/// Per-edge profile bound at level `n`, scaled for quotient networks whose
/// edges stand for several.
fn profile_bound(fam: &Family, n: u32) -> Result<f64, SolverError> {
    let p = psi(fam, n)?;
    Ok(match fam.kind {
        FamilyKind::ZdLattice => p / (n as f64).powi(fam.d.unwrap_or(1) as i32 - 1),
        _ => {
            let stored = fam.levels.count(n).max(1) as f64;
            let nominal = fam.levels.nominal_count(n) as f64;
            p / 2f64.powi(n as i32) * nominal / stored
        }
    })
}

/// Edges above the profile bound, level by level.
fn long_edges(
    fam: &Family,
    checks: &mut Checks,
    exact: bool,
) -> Result<Vec<Vec<EdgeId>>, SolverError> {
    let mut long = vec![Vec::new(); fam.levels.max_level() as usize + 1];
    for (n, edges) in fam.levels.iter() {
        let bound = profile_bound(fam, n)?;
        let mut max_short = 0.0f64;
        let mut min_short = f64::INFINITY;
        for &e in edges {
            let c = fam.network.edge(e).conductance;
            if c > bound * (1.0 + REL) {
                long[n as usize].push(e);
            } else {
                max_short = max_short.max(c);
                min_short = min_short.min(c);
            }
        }
        if exact {
            let passed =
                long[n as usize].is_empty() && close(min_short, bound) && close(max_short, bound);
            checks.push(n, "l(e) equals the profile bound", max_short, bound, passed);
        }
    }
    Ok(long)
}

fn ratio_checks(fam: &Family, cap: f64, checks: &mut Checks) -> Result<(), SolverError> {
    for n in 1..fam.levels.max_level() {
        let r = psi(fam, n + 1)? / psi(fam, n)?;
        checks.at_most(n, "psi(n+1)/psi(n)", r, cap);
    }
    Ok(())
}

fn is_matching(fam: &Family, edges: &[EdgeId]) -> bool {
    let mut used = vec![false; fam.network.vertex_count()];
    for &e in edges {
        let edge = fam.network.edge(e);
        for v in [edge.a, edge.b] {
            if used[v.0] {
                return false;
            }
            used[v.0] = true;
        }
    }
    true
}

fn hypotheses(
    spec: &FamilySpec,
    fam: &Family,
    series: ConvergenceVerdict,
    params: &ClassifyParams,
) -> Result<(TheoremTag, Vec<LevelCheck>), SolverError> {
    let mut checks = Checks(Vec::new());
    let source = spec.exception_source()?;
    let tag = match (fam.kind, &source) {
        (FamilyKind::Chain1D, _) => {
            for (n, edges) in fam.levels.iter() {
                for &e in edges {
                    let c = fam.network.edge(e).conductance;
                    let p = psi(fam, n)?;
                    checks.push(n, "l(n-1, n) = psi(n)", c, p, close(c, p));
                }
            }
            TheoremTag::ChainSeries
        }
        (FamilyKind::ToriChain, _) => {
            let depth = fam.max_shell();
            let hosts: Vec<VertexId> = (0..cantor_vertex_count(depth)).map(VertexId).collect();
            let red = fam.network.parallel_reduce().series_reduce(&hosts);
            for e in red.network.edges() {
                let n = e.level.unwrap_or(0);
                let ratio = e.resistance() / n as f64;
                let passed = (ratio - TORI_GADGET_RESISTANCE).abs() < 1e-10;
                checks.push(
                    n,
                    "reduced r_n / n constant",
                    ratio,
                    TORI_GADGET_RESISTANCE,
                    passed,
                );
            }
            TheoremTag::ToriChain
        }
        (FamilyKind::ZdLattice, None) => {
            let d = fam.d.unwrap_or(0);
            if series == ConvergenceVerdict::Convergent && d < 3 {
                return Err(SolverError::HypothesisNotMet {
                    level: None,
                    reason: format!("the transient direction needs d >= 3, got d = {d}"),
                });
            }
            long_edges(fam, &mut checks, true)?;
            TheoremTag::LatticeProfile
        }
        (FamilyKind::ZdLattice, Some(ExceptionSource::RandomMatching { .. })) => {
            let set = fam
                .exceptions
                .as_ref()
                .expect("decorated lattice carries its set");
            checks.push(
                0,
                "exceptions form a matching",
                set.len() as f64,
                0.0,
                is_matching(fam, &set.edges),
            );
            let long = long_edges(fam, &mut checks, false)?;
            for (n, edges) in long.iter().enumerate() {
                let outside = edges.iter().filter(|e| !set.contains(**e)).count();
                checks.push(
                    n as u32,
                    "A_n within the matching",
                    outside as f64,
                    0.0,
                    outside == 0,
                );
            }
            ratio_checks(fam, params.ratio_cap, &mut checks)?;
            TheoremTag::LatticeMatching
        }
        (FamilyKind::CantorTree, None) => {
            long_edges(fam, &mut checks, true)?;
            TheoremTag::CantorProfile
        }
        (FamilyKind::CantorTree, Some(ExceptionSource::BudgetFill { alpha })) => {
            checks.at_most(0, "alpha <= 1", *alpha, 1.0);
            let long = long_edges(fam, &mut checks, false)?;
            for n in (fam.n_min.max(2) as u32)..=fam.levels.max_level() {
                let lhs = psi(fam, n)? + long[n as usize].len() as f64;
                checks.at_most(
                    n,
                    "psi(n) + |A_n| <= K(n)",
                    lhs,
                    budget_k(n as u64, *alpha) as f64,
                );
            }
            TheoremTag::CantorSparseLongCuffs
        }
        (
            FamilyKind::CantorTree,
            Some(ExceptionSource::Matching | ExceptionSource::KLine { .. }),
        ) => {
            let set = fam
                .exceptions
                .as_ref()
                .expect("decorated tree carries its set");
            if matches!(source, Some(ExceptionSource::Matching)) {
                checks.push(
                    0,
                    "exceptions form a matching",
                    set.len() as f64,
                    0.0,
                    is_matching(fam, &set.edges),
                );
            }
            let long = long_edges(fam, &mut checks, false)?;
            for (n, edges) in long.iter().enumerate() {
                let outside = edges.iter().filter(|e| !set.contains(**e)).count();
                checks.push(
                    n as u32,
                    "A_n within the ensemble",
                    outside as f64,
                    0.0,
                    outside == 0,
                );
            }
            ratio_checks(fam, params.ratio_cap, &mut checks)?;
            TheoremTag::CantorMatching
        }
        (FamilyKind::CantorTree, Some(ExceptionSource::Subtree { alpha, .. })) => {
            checks.push(0, "alpha > 1", *alpha, 1.0, *alpha > 1.0);
            let set = fam
                .exceptions
                .as_ref()
                .expect("decorated tree carries its set");
            for &e in &set.edges {
                let c = fam.network.edge(e).conductance;
                if c < 1.0 {
                    checks.push(
                        fam.network.edge(e).level.unwrap_or(0),
                        "l(e) >= 1 on A",
                        c,
                        1.0,
                        false,
                    );
                }
            }
            for (&n, &count) in &set.level_counts {
                checks.at_most(
                    n,
                    "|A cap E_n| <= K(n)",
                    count as f64,
                    budget_k(n as u64, *alpha) as f64,
                );
            }
            TheoremTag::CantorTransientSubtree
        }
        (kind, Some(other)) => {
            return Err(SolverError::HypothesisNotMet {
                level: None,
                reason: format!("no statement covers {other:?} on {kind}"),
            })
        }
    };
    let checks = checks.0;
    if let Some(bad) = checks.iter().find(|c| !c.passed) {
        return Err(SolverError::HypothesisNotMet {
            level: Some(bad.level),
            reason: format!("{}: {} vs {}", bad.check, bad.value, bad.bound),
        });
    }
    Ok((tag, checks))
}

/// Check the hypotheses of the statement matching `spec`, then attach
/// numeric corroboration: an `R_N` sweep, the Nash–Williams series and the
/// Thomson energy at the largest radius, and optionally an escape estimate.
pub fn classify(
    spec: &FamilySpec,
    fam: &Family,
    series: ConvergenceVerdict,
    params: &ClassifyParams,
) -> Result<Certificate, SolverError> {
    let (theorem, hypotheses) = hypotheses(spec, fam, series, params)?;
    let verdict = theorem
        .rule(series)
        .map_err(|reason| SolverError::HypothesisNotMet {
            level: None,
            reason,
        })?;
    let radii = if params.radii.is_empty() {
        vec![fam.default_radius]
    } else {
        params.radii.clone()
    };
    let mut evidence = Evidence {
        radii: radii.clone(),
        hypotheses,
        ..Evidence::default()
    };
    let mut last = None;
    for &r in &radii {
        let trunc = fam.truncate(r)?;
        let sol = effective_resistance(&trunc, &params.solver)?;
        evidence.resistances.push(sol.effective_resistance);
        last = Some((trunc, sol));
    }
    if radii.len() >= 2 {
        let xs: Vec<f64> = radii.iter().map(|&r| (r.max(1) as f64).ln()).collect();
        evidence.log_fit_slope = Some(linear_fit_slope(&xs, &evidence.resistances));
    }
    if let Some((trunc, sol)) = last {
        evidence.nash_williams = Some(family_cutset_series(fam, &trunc)?);
        evidence.flow_energy = Some(min_energy_flow(&sol, &trunc)?.energy(&trunc.network));
        if let Some((trials, seed)) = params.monte_carlo {
            evidence.monte_carlo = Some(monte_carlo_escape(&trunc, trials, seed)?);
        }
    }
    Ok(Certificate {
        verdict,
        theorem,
        family: fam.kind,
        profile: fam.profile.text().to_string(),
        series,
        evidence,
    })
}
