use serde::{Deserialize, Serialize};

use super::{LaminateError, PantsFlow};
use crate::network::EdgeId;
use crate::numeric::CompensatedSum;

/// Intersection data of one cuff `α`: `i(μ, α)`, `i(μ, β)` for its dual
/// curve `β`, and `ℓ(α)`. `energy` is `u(e)² r(e)` when the weights come
/// from a flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuffWeights {
    pub n: u32,
    pub i_alpha: f64,
    pub i_beta: f64,
    pub length: f64,
    pub energy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummabilityRow {
    pub n: u32,
    pub i_alpha: f64,
    pub i_beta: f64,
    pub length: f64,
    pub term: f64,
    pub partial_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummabilityReport {
    pub rows: Vec<SummabilityRow>,
    /// `1 + 4C²` with `C` the largest cuff length, when every row has a flow
    /// energy.
    pub constant: Option<f64>,
    /// Running `Σ u² r` alongside `rows`.
    pub energy_partial: Option<Vec<f64>>,
}

impl SummabilityReport {
    pub fn total(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.partial_sum)
    }

    /// Smallest `1 - partial / ((1 + 4C²) Σ u² r)` over rows with positive
    /// energy; negative when the bound fails somewhere.
    pub fn margin(&self) -> Option<f64> {
        let k = self.constant?;
        let energy = self.energy_partial.as_ref()?;
        Some(
            self.rows
                .iter()
                .zip(energy)
                .filter(|(_, &e)| e > 0.0)
                .map(|(r, &e)| 1.0 - r.partial_sum / (k * e))
                .fold(1.0, f64::min),
        )
    }

    /// The flow bound at every row, up to rounding in the last place.
    pub fn bound_holds(&self) -> Option<bool> {
        let k = self.constant?;
        let energy = self.energy_partial.as_ref()?;
        Some(
            self.rows
                .iter()
                .zip(energy)
                .all(|(r, &e)| r.partial_sum <= k * e * (1.0 + 1e-12)),
        )
    }
}

/// Partial sums of `Σ i(μ,α)²/ℓ(α) + ℓ(α) i(μ,β)²` over cuffs with level at
/// most `max_level`, in increasing level order.
pub fn summability_functional(
    weights: &[CuffWeights],
    max_level: Option<u32>,
) -> Result<SummabilityReport, LaminateError> {
    let mut kept: Vec<&CuffWeights> = weights
        .iter()
        .filter(|w| max_level.map_or(true, |n| w.n <= n))
        .collect();
    kept.sort_by_key(|w| w.n);
    let mut rows = Vec::with_capacity(kept.len());
    let mut energy_partial = Vec::with_capacity(kept.len());
    let mut with_energy = true;
    let (mut sum, mut energy) = (CompensatedSum::new(), CompensatedSum::new());
    let mut c = 0.0f64;
    let mut partial = 0.0f64;
    for w in kept {
        if !(w.length > 0.0 && w.length.is_finite()) {
            return Err(LaminateError::NonPositiveLength(w.length));
        }
        for x in [w.i_alpha, w.i_beta] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(LaminateError::NegativeInput(x));
            }
        }
        let term = w.i_alpha * w.i_alpha / w.length + w.length * w.i_beta * w.i_beta;
        sum.add(term);
        // the compensated value can dip by an ulp
        partial = partial.max(sum.value());
        c = c.max(w.length);
        match w.energy {
            Some(e) => energy.add(e),
            None => with_energy = false,
        }
        energy_partial.push(energy.value());
        rows.push(SummabilityRow {
            n: w.n,
            i_alpha: w.i_alpha,
            i_beta: w.i_beta,
            length: w.length,
            term,
            partial_sum: partial,
        });
    }
    Ok(SummabilityReport {
        rows,
        constant: with_energy.then_some(1.0 + 4.0 * c * c),
        energy_partial: with_energy.then_some(energy_partial),
    })
}

/// Cuff weights from the two flow bounds `i(μ, α) ≤ u(e)` and
/// `i(μ, β) ≤ 2u(e)`, one cuff per non-loop edge.
pub fn summability_from_bounds(flow: &PantsFlow) -> Vec<CuffWeights> {
    flow.network
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, edge)| !edge.is_loop())
        .map(|(e, edge)| {
            let u = flow.value(EdgeId(e));
            CuffWeights {
                n: edge.level.unwrap_or(0),
                i_alpha: u,
                i_beta: 2.0 * u,
                length: edge.conductance,
                energy: Some(u * u / edge.conductance),
            }
        })
        .collect()
}
