use serde::{Deserialize, Serialize};

use super::LaminateError;

fn positive(length: f64) -> Result<f64, LaminateError> {
    if length > 0.0 && length.is_finite() {
        Ok(length)
    } else {
        Err(LaminateError::NonPositiveLength(length))
    }
}

/// Half-width `sinh⁻¹(1 / sinh(ℓ/2))` of the standard collar about a closed
/// geodesic of length `ℓ`.
pub fn collar_width(length: f64) -> Result<f64, LaminateError> {
    let l = positive(length)?;
    Ok((1.0 / (l / 2.0).sinh()).asinh())
}

/// Length `ℓ coth(ℓ/2)` of each boundary curve of the collar.
pub fn collar_boundary_length(length: f64) -> Result<f64, LaminateError> {
    let l = positive(length)?;
    Ok(l / (l / 2.0).tanh())
}

/// `1 / (2 arccos(tanh(C/2)))`. The collar of `ℓ` is the annulus
/// `{|arg z - π/2| < θ(ℓ)} / ⟨z ↦ e^ℓ z⟩` with `θ(ℓ) = arccos(tanh(ℓ/2))`,
/// of modulus `ℓ / (2θ(ℓ))`; `θ` decreases, so this bounds the ratio for
/// every `ℓ ≤ C`.
pub fn collar_modulus_constant(cap: f64) -> Result<f64, LaminateError> {
    let c = positive(cap)?;
    Ok(1.0 / (2.0 * (c / 2.0).tanh().acos()))
}

/// Linear bound `K(C) ℓ` on the collar modulus for `0 ≤ ℓ ≤ C`, with `K`
/// from [`collar_modulus_constant`].
pub fn collar_modulus_bound(length: f64, cap: f64) -> Result<f64, LaminateError> {
    let k = collar_modulus_constant(cap)?;
    if !(length >= 0.0 && length.is_finite()) {
        return Err(LaminateError::NonPositiveLength(length));
    }
    if length > cap {
        return Err(LaminateError::CapExceeded { length, cap });
    }
    Ok(k * length)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapezoidEnergy {
    pub exact: f64,
    pub bound: f64,
}

/// Dirichlet energy of `v = ℓy / ((ℓ₁ - ℓ)x/L + ℓ)` on the trapezoid with
/// parallel sides `ℓ ≤ ℓ₁` a distance `L` apart, and the bound
/// `(L + ℓ₁²/(3L)) ℓ`.
pub fn trapezoid_dirichlet(l: f64, l1: f64, leg: f64) -> Result<TrapezoidEnergy, LaminateError> {
    if !(l > 0.0 && l.is_finite() && leg > 0.0 && leg.is_finite() && l1.is_finite()) {
        return Err(LaminateError::DegenerateGeometry(format!(
            "l = {l}, L = {leg}"
        )));
    }
    if l1 < l {
        return Err(LaminateError::DegenerateGeometry(format!(
            "l1 = {l1} < l = {l}"
        )));
    }
    let gap = l1 - l;
    let delta = gap / l;
    // log(l1/l) / (l1 - l)
    let g = if delta < 1e-6 {
        (1.0 - delta / 2.0 + delta * delta / 3.0) / l
    } else {
        delta.ln_1p() / gap
    };
    let exact = l * l * g * (leg + gap * gap / (3.0 * leg));
    let bound = (leg + l1 * l1 / (3.0 * leg)) * l;
    Ok(TrapezoidEnergy { exact, bound })
}
