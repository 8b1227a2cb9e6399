//! Euclidean reference constants.

use std::f64::consts::PI;

/// Optimal constant `Λ = 3 (π/2)^{4/3}` of the Euclidean L² Sobolev inequality
/// `∫|∇u|^2 ≥ Λ (∫u^6)^{1/3}` on ℝ³.
pub fn euclidean_sobolev_constant() -> f64 {
    3.0 * (PI / 2.0).powf(4.0 / 3.0)
}

/// `(36π)^{1/3}`: `I_euc(v) = (36π)^{1/3} v^{2/3}`.
pub const EUCLIDEAN_ISO_CONSTANT: f64 = 4.835_975_862_049_408;

/// Leading coefficient `2^{8/3} π^{1/3} / 3` of the exterior bubble quotient
/// expansion in `β^{-3}`.
pub fn bubble_expansion_coefficient() -> f64 {
    2f64.powf(8.0 / 3.0) * PI.cbrt() / 3.0
}
