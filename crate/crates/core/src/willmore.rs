//! From a Sobolev deficit to a lower bound on the Willmore energy.
//!
//! The chain transfers the Euclidean extremals `s_β` onto the exterior of a
//! sphere through its capacitary potential, evaluates the three coarea
//! integrals `a`, `b`, `c`, and converts the deficit `δ` into an explicit
//! `ε` with `∫H² ≥ 16π(1-ε)²`. Every constant is computed, not assumed.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::capacity::{solve_capacitary_potential, CapacitaryPotential};
use crate::certificate::{Caveat, Certificate};
use crate::constants::{bubble_expansion_coefficient, euclidean_sobolev_constant};
use crate::error::{Error, Result};
use crate::manifold::RadialMetric;
use crate::profile::{log_grid, RadialFn};
use crate::quadrature::{integrate, integrate_to_infinity, QuadOptions};

/// Default upper end of the deficit range handled by [`deficit_to_willmore_bound`].
pub const DEFAULT_DELTA_MAX: f64 = 1e-2;

/// Euclidean Sobolev extremal `s_β(r) = √((β²+1)/(β²+r²))`, normalized to 1
/// on the unit sphere, and its pullback `f_β(t) = s_β(e^t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaProfile {
    beta: f64,
}

impl BetaProfile {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!("β = {beta} must be positive")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn damp(&self, t: f64) -> f64 {
        1.0 + self.beta * self.beta * (-2.0 * t).exp()
    }

    /// `f_β(t)`, evaluated without forming `e^{2t}`.
    pub fn f(&self, t: f64) -> f64 {
        (1.0 + self.beta * self.beta).sqrt() * (-t).exp() / self.damp(t).sqrt()
    }

    /// `f_β'(t) = -f_β(t) / (1 + β² e^{-2t})`.
    pub fn df(&self, t: f64) -> f64 {
        -self.f(t) / self.damp(t)
    }

    /// `s_β(r)` for `r ≥ 0`.
    pub fn s(&self, r: f64) -> f64 {
        let b2 = self.beta * self.beta;
        ((b2 + 1.0) / (b2 + r * r)).sqrt()
    }

    /// `s_β'(r)`.
    pub fn ds(&self, r: f64) -> f64 {
        let b2 = self.beta * self.beta;
        -r * self.s(r) / (b2 + r * r)
    }
}

impl RadialFn for BetaProfile {
    fn value(&self, r: f64) -> f64 {
        self.s(r)
    }
    fn derivative(&self, r: f64) -> f64 {
        self.ds(r)
    }
}

/// `(∫|∇s_β|², ∫s_β⁶)` over `ℝ³ ∖ B₁` in closed form.
pub fn beta_integrals_closed_form(beta: f64) -> Result<(f64, f64)> {
    let b = BetaProfile::new(beta)?.beta;
    let b2 = b * b;
    let at = b.atan();
    let grad = 0.5 * PI * (5.0 * b + 3.0 * b * b2 + 3.0 * (1.0 + b2).powi(2) * at) / (b * (1.0 + b2));
    let l6 = 0.5 * PI * (-b + b.powi(5) + (1.0 + b2).powi(3) * at) / (b * b2);
    Ok((grad, l6))
}

/// Quotient of `s_β` on the exterior and its two-term large-β expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotientExpansion {
    pub beta: f64,
    pub quotient: f64,
    /// `Λ + κ β^{-3}`.
    pub leading: f64,
    /// `quotient - leading`.
    pub residual: f64,
}

pub fn sobolev_quotient_expansion(beta: f64) -> Result<QuotientExpansion> {
    let (g, s) = beta_integrals_closed_form(beta)?;
    let quotient = g / s.cbrt();
    let leading = euclidean_sobolev_constant() + bubble_expansion_coefficient() / beta.powi(3);
    Ok(QuotientExpansion {
        beta,
        quotient,
        leading,
        residual: quotient - leading,
    })
}

/// `β(δ) = (κ/δ)^{1/3}`, inverting the leading term of the expansion.
pub fn beta_for_deficit(delta: f64) -> f64 {
    (bubble_expansion_coefficient() / delta).cbrt()
}

fn half_line<F: Fn(f64) -> f64>(f: F, knee: f64) -> Result<f64> {
    let opts = QuadOptions::with_rel_tol(1e-13);
    let split = knee.max(0.0) + 4.0;
    let head = integrate(&f, 0.0, split, opts)?;
    let tail = integrate_to_infinity(&f, split, 1.0, opts)?;
    Ok(head.value + tail.value)
}

/// `(a, b, c)` for given `β` and `η`:
/// `a = ∫f'²eᵗ`, `b³ = 2⁻⁴π⁻²∫f⁶e³ᵗ`, `c³ = π⁻²∫f⁶e³ᵗ(2-ηe⁻ᵗ)⁻⁴`.
pub fn chain_integrals(beta: f64, eta: f64) -> Result<(f64, f64, f64)> {
    let p = BetaProfile::new(beta)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::domain(format!("η = {eta} outside [0, 1]")));
    }
    let knee = beta.ln();
    let b2 = 1.0 + beta * beta;
    // f'² eᵗ = (1+β²) e⁻ᵗ / (1+β²e⁻²ᵗ)³
    let a = half_line(|t| b2 * (-t).exp() / p.damp(t).powi(3), knee)?;
    let l6 = |t: f64| {
        let w = b2 * (-t).exp() / p.damp(t);
        w * w * w
    };
    let b3 = half_line(l6, knee)? / (16.0 * PI * PI);
    let c3 = half_line(|t| l6(t) * (2.0 - eta * (-t).exp()).powi(-4), knee)? / (PI * PI);
    Ok((a, b3.cbrt(), c3.cbrt()))
}

/// Outcome of transferring `s_β` along the capacitary potential of a sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainQuantities {
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `Λ - a/c`: the deficit this sphere forces through the chain.
    pub delta: f64,
    /// `1 - √(∫H²/16π)`, clamped to `[0, 1]`.
    pub eta: f64,
    /// Exact-chain bound on `η` at `delta`; `η ≤ ε` restates `c³ ≥ b³ + (1+β²)η/128π²`.
    pub epsilon: f64,
    /// `C = ∫_Σ |∇w| da`.
    pub flux_constant: f64,
    /// `∫|∇s|²` outside the sphere, evaluated radially.
    pub exact_grad: f64,
    /// `∫s⁶` outside the sphere, evaluated radially.
    pub exact_l6: f64,
    /// `C³c³`, the lower bound on `∫s⁶` from the flux estimate.
    pub bound_l6: f64,
}

impl ChainQuantities {
    /// `a/b - a/c`.
    pub fn gap(&self) -> f64 {
        self.a / self.b - self.a / self.c
    }
}

/// `η` from a Willmore energy, `∫H² = 16π(1-η)²`.
pub fn eta_from_willmore(willmore: f64) -> f64 {
    (1.0 - (willmore / (16.0 * PI)).sqrt()).clamp(0.0, 1.0)
}

/// Transfer `s = f_β(w)` onto the exterior of the potential's inner sphere.
pub fn transfer_test_function(potential: &CapacitaryPotential, beta: f64) -> Result<ChainQuantities> {
    let metric = potential.metric();
    let x0 = potential.inner_radius();
    let eta = eta_from_willmore(metric.willmore_energy_sphere(x0)?);
    let (a, b, c) = chain_integrals(beta, eta)?;
    let p = BetaProfile::new(beta)?;
    let j0 = 1.0 / potential.flux_constant();
    let cflux = potential.flux_constant();

    // |∇w| = 1/(A J) on the sphere at x
    let grad = metric.integrate_native_to_infinity(
        |x| {
            let j = potential.tail_integral(x).unwrap_or(f64::NAN);
            let w = (j0 / j).ln();
            let area = metric.area(x);
            p.df(w).powi(2) * metric.ds_dx(x) / (area * j * j)
        },
        x0,
    )?;
    let l6 = metric.integrate_native_to_infinity(
        |x| {
            let j = potential.tail_integral(x).unwrap_or(f64::NAN);
            let w = (j0 / j).ln();
            p.f(w).powi(6) * metric.volume_density(x)
        },
        x0,
    )?;
    if !(grad.value.is_finite() && l6.value.is_finite()) {
        return Err(Error::numerical("radial transfer integrals did not converge", f64::NAN));
    }
    let q = sobolev_quotient_expansion(beta)?.quotient;
    let delta = euclidean_sobolev_constant() - a / c;
    Ok(ChainQuantities {
        beta,
        a,
        b,
        c,
        delta,
        eta,
        epsilon: exact_chain_bound(beta, q - a / c)?,
        flux_constant: cflux,
        exact_grad: grad.value,
        exact_l6: l6.value,
        bound_l6: (cflux * c).powi(3),
    })
}

/// Sharp form of the chain: with `δ_tot = Q(β) - Λ + δ`,
/// `η ≤ 128π²b³/(1+β²) · [(1 - δ_tot/Q)^{-3} - 1]`.
/// Takes `δ_tot` directly; returns `∞` when `δ_tot ≥ Q`.
pub fn exact_chain_bound(beta: f64, delta_total: f64) -> Result<f64> {
    let (_, s) = beta_integrals_closed_form(beta)?;
    let q = sobolev_quotient_expansion(beta)?.quotient;
    let b3 = s / (4.0 * PI).powi(3);
    let ratio = 1.0 - delta_total / q;
    if ratio <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(128.0 * PI * PI * b3 / (1.0 + beta * beta) * (ratio.powi(-3) - 1.0))
}

/// `X(β) = (1+β²) / (128π² b³)`, so that `c³ ≥ b³(1 + Xη)`.
fn chain_x(beta: f64) -> Result<f64> {
    let (_, s) = beta_integrals_closed_form(beta)?;
    Ok((1.0 + beta * beta) / (128.0 * PI * PI * s / (4.0 * PI).powi(3)))
}

/// Explicit constants of `η ≤ K β δ` on `0 < δ < δ_max`.
///
/// With `β ≥ β_min = β(δ_max)`:
/// `Q - Λ ≤ c_Q κ β⁻³`, `1 - (1+y)^{-1/3} ≥ c_low y` for `y ≤ X_max`,
/// `1/(Xβ) ≤ K₁`, and `K = (1 + c_Q) K₁ / (Λ c_low)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainCalibration {
    pub delta_max: f64,
    pub beta_min: f64,
    pub c_q: f64,
    pub x_max: f64,
    pub c_low: f64,
    pub k1: f64,
    pub k: f64,
}

impl Default for ChainCalibration {
    fn default() -> Self {
        Self::new(DEFAULT_DELTA_MAX).expect("default calibration")
    }
}

impl ChainCalibration {
    pub fn new(delta_max: f64) -> Result<Self> {
        if !(delta_max > 0.0 && delta_max.is_finite()) {
            return Err(Error::Config(format!("delta_max = {delta_max} must be positive")));
        }
        let kappa = bubble_expansion_coefficient();
        let lambda = euclidean_sobolev_constant();
        let beta_min = beta_for_deficit(delta_max);
        // suprema on a dense grid, closed by the β → ∞ limits (1, 0, π/2)
        let mut c_q: f64 = 1.0;
        let mut x_max: f64 = 0.0;
        let mut k1 = 0.5 * PI;
        for beta in log_grid(beta_min, 1e6, 4000) {
            let e = sobolev_quotient_expansion(beta)?;
            if beta <= 1e3 {
                c_q = c_q.max((e.quotient - lambda) * beta.powi(3) / kappa);
            }
            let x = chain_x(beta)?;
            x_max = x_max.max(x);
            k1 = k1.max(1.0 / (x * beta));
        }
        let c_low = (1.0 + x_max).powf(-4.0 / 3.0) / 3.0;
        let k = (1.0 + c_q) * k1 / (lambda * c_low);
        Ok(Self {
            delta_max,
            beta_min,
            c_q,
            x_max,
            c_low,
            k1,
            k,
        })
    }

    /// `ε(δ) = K β(δ) δ`; zero for `δ ≤ 0`.
    pub fn bound(&self, delta: f64) -> Result<f64> {
        if delta.is_nan() {
            return Err(Error::domain("δ is NaN"));
        }
        if delta >= self.delta_max {
            return Err(Error::OutOfValidity(format!(
                "δ = {delta} is not below δ_max = {}",
                self.delta_max
            )));
        }
        if delta <= 0.0 {
            return Ok(0.0);
        }
        Ok(self.k * beta_for_deficit(delta) * delta)
    }

    fn record(&self, cert: Certificate) -> Certificate {
        cert.constant("delta_max", self.delta_max)
            .constant("beta_min", self.beta_min)
            .constant("c_q", self.c_q)
            .constant("x_max", self.x_max)
            .constant("c_low", self.c_low)
            .constant("k1", self.k1)
            .constant("k", self.k)
            .constant("kappa", bubble_expansion_coefficient())
            .constant("lambda", euclidean_sobolev_constant())
    }
}

/// `ε(δ)` with the default calibration (`δ_max = 10⁻²`).
pub fn deficit_to_willmore_bound(delta: f64) -> Result<f64> {
    ChainCalibration::default().bound(delta)
}

/// Rescale so that the ball inside the sphere at `x₀` has volume `4π/3`.
/// Returns the rescaled metric, the new native radius, and `λ`.
pub fn normalize_volume(metric: &RadialMetric, x0: f64) -> Result<(RadialMetric, f64, f64)> {
    let v = metric.ball_volume(x0)?;
    if !(v > 0.0) {
        return Err(Error::domain(format!("ball of radius {x0} has no volume")));
    }
    let lambda = (4.0 * PI / 3.0 / v).cbrt();
    let scaled = metric.dilate(lambda)?;
    let x = metric.dilated_radius(x0, lambda);
    Ok((scaled, x, lambda))
}

/// Check `∫H² ≥ 16π(1-ε)²` on the sphere at `x₀` for `ε = ε(δ)`.
pub fn willmore_certificate(
    metric: &RadialMetric,
    x0: f64,
    delta_measured: f64,
    calibration: &ChainCalibration,
    tol: f64,
) -> Result<Certificate> {
    let eps = calibration.bound(delta_measured)?;
    let cert = willmore_certificate_for_epsilon(metric, x0, eps, tol)?
        .param("delta", delta_measured)
        .param("beta", if delta_measured > 0.0 { beta_for_deficit(delta_measured) } else { f64::INFINITY })
        .with_caveat(Caveat::RadialMinimizerOnly);
    Ok(calibration.record(cert))
}

/// As [`willmore_certificate`] with `ε` given directly.
pub fn willmore_certificate_for_epsilon(metric: &RadialMetric, x0: f64, eps: f64, tol: f64) -> Result<Certificate> {
    let (scaled, x, lambda) = normalize_volume(metric, x0)?;
    let energy = scaled.willmore_energy_sphere(x)?;
    let clamped = eps.clamp(0.0, 1.0);
    let rhs = 16.0 * PI * (1.0 - clamped).powi(2);
    let mut cert = Certificate::at_least("willmore", energy, rhs, tol)
        .param("inner_radius", x0)
        .param("epsilon", eps)
        .param("log_lambda", lambda.ln())
        .param("eta", eta_from_willmore(energy))
        .input("metric", metric.describe())
        .with_caveat(Caveat::CenteredSpheresOnly);
    if eps >= 1.0 {
        cert.flag(Caveat::Vacuous);
    }
    Ok(cert)
}

/// Transfer at `β(δ)` after volume normalization; convenience for sweeps.
pub fn chain_at_sphere(metric: &RadialMetric, x0: f64, beta: f64) -> Result<ChainQuantities> {
    let (scaled, x, _) = normalize_volume(metric, x0)?;
    let pot = solve_capacitary_potential(&scaled, x)?;
    transfer_test_function(&pot, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_to_infinity;
    use proptest::prelude::*;

    fn radial_oracle(beta: f64) -> (f64, f64) {
        let p = BetaProfile::new(beta).unwrap();
        let opts = QuadOptions::with_rel_tol(1e-13);
        let g = |r: f64| 4.0 * PI * r * r * p.ds(r).powi(2);
        let s = |r: f64| 4.0 * PI * r * r * p.s(r).powi(6);
        let split = 1.0 + beta;
        let gi = integrate(g, 1.0, split, opts).unwrap().value + integrate_to_infinity(g, split, beta, opts).unwrap().value;
        let si = integrate(s, 1.0, split, opts).unwrap().value + integrate_to_infinity(s, split, beta, opts).unwrap().value;
        (gi, si)
    }

    #[test]
    fn closed_forms_match_radial_quadrature() {
        for beta in [0.5, 1.0, 10.0, 300.0] {
            let (g, s) = beta_integrals_closed_form(beta).unwrap();
            let (go, so) = radial_oracle(beta);
            assert!((g - go).abs() < 1e-10 * go, "β={beta}: {g} {go}");
            assert!((s - so).abs() < 1e-10 * so, "β={beta}: {s} {so}");
        }
        assert!(beta_integrals_closed_form(0.0).is_err());
        assert!(beta_integrals_closed_form(-1.0).is_err());
    }

    #[test]
    fn profile_normalization() {
        for beta in [0.3, 1.0, 20.0] {
            let p = BetaProfile::new(beta).unwrap();
            assert!((p.f(0.0) - 1.0).abs() < 1e-15);
            let t = 40.0;
            assert!((p.f(t) * t.exp() - (1.0 + beta * beta).sqrt()).abs() < 1e-10 * beta.max(1.0));
            assert!((p.s(2.5) - p.f(2.5f64.ln())).abs() < 1e-15);
        }
    }

    #[test]
    fn expansion_constant_term() {
        let e = sobolev_quotient_expansion(100.0).unwrap();
        let target = bubble_expansion_coefficient() * 1e-6;
        let excess = e.quotient - euclidean_sobolev_constant();
        assert!((excess - target).abs() < 0.05 * target);
    }

    #[test]
    fn flat_eta_collapses_chain() {
        let (a, b, c) = chain_integrals(5.0, 0.0).unwrap();
        assert!((b - c).abs() < 1e-12 * b);
        let (g, s) = beta_integrals_closed_form(5.0).unwrap();
        assert!((a - g / (4.0 * PI)).abs() < 1e-11 * a);
        assert!((b.powi(3) - s / (4.0 * PI).powi(3)).abs() < 1e-11 * b.powi(3));
    }

    #[test]
    fn flat_transfer_is_euclidean() {
        let pot = solve_capacitary_potential(&RadialMetric::flat(), 1.0).unwrap();
        let q = transfer_test_function(&pot, 3.0).unwrap();
        let (g, s) = beta_integrals_closed_form(3.0).unwrap();
        assert_eq!(q.eta, 0.0);
        assert!((q.exact_grad - g).abs() < 1e-9 * g);
        assert!((q.exact_l6 - s).abs() < 1e-9 * s);
        assert!((q.bound_l6 - s).abs() < 1e-9 * s);
        assert!(q.gap().abs() < 1e-12);
    }

    #[test]
    fn schwarzschild_transfer_bounds() {
        let g = RadialMetric::smoothed_schwarzschild(0.3, 1.0).unwrap();
        for beta in [1.0, 4.0, 30.0] {
            let q = chain_at_sphere(&g, 1.0, beta).unwrap();
            assert!(q.eta > 0.0);
            assert!((q.exact_grad - q.flux_constant * q.a).abs() < 1e-8 * q.exact_grad);
            assert!(q.bound_l6 <= q.exact_l6 * (1.0 + 1e-10), "{q:?}");
            assert!(q.gap() >= 0.0);
            assert!(q.eta <= q.epsilon * (1.0 + 1e-9), "{q:?}");
        }
    }

    #[test]
    fn calibration_constants() {
        let cal = ChainCalibration::default();
        assert_eq!(cal.c_q, 1.0);
        assert!(cal.k > 1.9 && cal.k < 2.1, "{cal:?}");
        let wide = ChainCalibration::new(2.0).unwrap();
        assert!(wide.k > cal.k);
        assert!(cal.bound(cal.delta_max).is_err());
        assert_eq!(cal.bound(0.0).unwrap(), 0.0);
        assert_eq!(cal.bound(-1.0).unwrap(), 0.0);
    }

    #[test]
    fn calibrated_bound_dominates_exact_chain() {
        let cal = ChainCalibration::default();
        for delta in log_grid(1e-8, 9e-3, 30) {
            let beta = beta_for_deficit(delta);
            let q = sobolev_quotient_expansion(beta).unwrap();
            let sharp = exact_chain_bound(beta, q.quotient - euclidean_sobolev_constant() + delta).unwrap();
            assert!(sharp <= cal.bound(delta).unwrap(), "δ={delta}");
        }
    }

    #[test]
    fn flat_certificate_is_tight() {
        let c = willmore_certificate(&RadialMetric::flat(), 2.0, 0.0, &ChainCalibration::default(), 1e-9).unwrap();
        assert!(c.passed && c.margin.abs() < 1e-12);
        let f = willmore_certificate_for_epsilon(&RadialMetric::smoothed_schwarzschild(0.3, 1.0).unwrap(), 1.0, 0.0, 1e-9).unwrap();
        assert!(!f.passed);
    }

    proptest! {
        #[test]
        fn chain_gap_nonnegative(beta in 1.0f64..1e3, eta in 0.0f64..=1.0) {
            let (a, b, c) = chain_integrals(beta, eta).unwrap();
            prop_assert!(a / b - a / c >= -1e-12 * a / b);
            let bound = b.powi(3) + (1.0 + beta * beta) * eta / (128.0 * PI * PI);
            prop_assert!(c.powi(3) >= bound * (1.0 - 1e-11));
        }

        #[test]
        fn bound_is_monotone(d1 in 1e-9f64..9e-3, d2 in 1e-9f64..9e-3) {
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(deficit_to_willmore_bound(lo).unwrap() <= deficit_to_willmore_bound(hi).unwrap());
        }
    }
}
