//! The limiting conformal factor `w(x) = (4/(4+|x|²))^{1/2}` and the
//! identities it satisfies: the critical Yamabe equation `Δw + ¾w⁵ = 0`,
//! the normalizations `‖w‖∞ = 1` and `∫w⁶ = 2π²`, equality in the Euclidean
//! Sobolev inequality, and roundness of `w⁴ g_euc`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::constants::euclidean_sobolev_constant;
use crate::error::{Error, Result};
use crate::profile::{log_grid, RadialFn};
use crate::quadrature::{integrate, integrate_to_infinity, QuadOptions};

/// Coefficient of `w⁵` in the limiting equation.
pub const LIMIT_LAMBDA: f64 = 0.75;

/// Absolute tolerance on the pointwise PDE residual.
pub const PDE_TOL: f64 = 1e-9;

/// Absolute tolerance on integrated identities and on `R ≡ 6`.
pub const IDENTITY_TOL: f64 = 1e-8;

/// `2π²`, the volume of the unit round 3-sphere.
pub fn round_sphere_volume() -> f64 {
    2.0 * PI * PI
}

/// `√(4/(4+ρ²))`.
pub fn limit_profile(rho: f64) -> f64 {
    (4.0 / (4.0 + rho * rho)).sqrt()
}

/// Radial family `w(ρ) = μ^{1/2} (n / (d + μ²ρ²))^p`.
///
/// The canonical limit is `n = d = 4`, `p = 1/2`, `μ = 1`. Changing `μ`
/// gives the dilations `μ^{1/2} w(μx)`; changing `d` or `p` gives the
/// perturbed fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalFactor {
    pub numerator: f64,
    pub denominator: f64,
    pub exponent: f64,
    pub mu: f64,
    /// Coefficient `λ` in `Δw + λw⁵ = 0`.
    pub lambda: f64,
}

impl ConformalFactor {
    pub fn canonical() -> Self {
        Self {
            numerator: 4.0,
            denominator: 4.0,
            exponent: 0.5,
            mu: 1.0,
            lambda: LIMIT_LAMBDA,
        }
    }

    pub fn new(numerator: f64, denominator: f64, exponent: f64, mu: f64, lambda: f64) -> Result<Self> {
        let all_pos = [numerator, denominator, exponent, mu].iter().all(|v| *v > 0.0 && v.is_finite());
        if !all_pos || !lambda.is_finite() {
            return Err(Error::Config(format!(
                "conformal factor needs positive finite parameters (n={numerator}, d={denominator}, p={exponent}, μ={mu}, λ={lambda})"
            )));
        }
        // decay faster than ρ^{-1/2} keeps ∫w⁶ finite
        if 6.0 * exponent <= 1.5 {
            return Err(Error::Config(format!("exponent {exponent} gives an infinite L⁶ norm")));
        }
        Ok(Self {
            numerator,
            denominator,
            exponent,
            mu,
            lambda,
        })
    }

    /// `√(4/(d+ρ²))`, the limit with a perturbed denominator.
    pub fn perturbed(denominator: f64) -> Result<Self> {
        Self::new(4.0, denominator, 0.5, 1.0, LIMIT_LAMBDA)
    }

    /// `μ^{1/2} w(μx)`.
    pub fn dilate(&self, mu: f64) -> Result<Self> {
        Self::new(self.numerator, self.denominator, self.exponent, self.mu * mu, self.lambda)
    }

    fn q(&self, rho: f64) -> f64 {
        self.denominator + self.mu * self.mu * rho * rho
    }

    fn amplitude(&self) -> f64 {
        self.mu.sqrt() * self.numerator.powf(self.exponent)
    }

    pub fn second_derivative(&self, rho: f64) -> f64 {
        let (p, m2, q) = (self.exponent, self.mu * self.mu, self.q(rho));
        -2.0 * p * self.amplitude() * m2 * q.powf(-p - 2.0) * (self.denominator - (2.0 * p + 1.0) * m2 * rho * rho)
    }

    /// `w″ + 2w′/ρ`, regular at the origin.
    pub fn laplacian(&self, rho: f64) -> f64 {
        let (p, m2, q) = (self.exponent, self.mu * self.mu, self.q(rho));
        -2.0 * p * self.amplitude() * m2 * q.powf(-p - 2.0) * (3.0 * self.denominator + (1.0 - 2.0 * p) * m2 * rho * rho)
    }

    /// `‖w‖∞ = w(0)`; every member is radially decreasing.
    pub fn sup_norm(&self) -> f64 {
        self.value(0.0)
    }

    /// Length over which `w` changes.
    pub fn scale(&self) -> f64 {
        self.denominator.sqrt() / self.mu
    }

    /// `∫_{ℝ³} w⁶ dx`, which is also the volume of `w⁴ g_euc`.
    pub fn l6(&self) -> Result<f64> {
        radial_integral(|r| self.value(r).powi(6), self.scale())
    }

    /// `∫_{ℝ³} |∇w|² dx`.
    pub fn dirichlet(&self) -> Result<f64> {
        radial_integral(|r| self.derivative(r).powi(2), self.scale())
    }

    /// `∫_{B(0,R)} w^s dx`.
    pub fn local_mass(&self, s: f64, radius: f64) -> Result<f64> {
        if !(s > 0.0 && radius > 0.0) {
            return Err(Error::domain(format!("local mass needs s > 0 and R > 0 (got {s}, {radius})")));
        }
        let v = integrate(
            |r| 4.0 * PI * r * r * self.value(r).powf(s),
            0.0,
            radius,
            QuadOptions::with_rel_tol(1e-13),
        )?;
        Ok(v.value)
    }

    /// Scalar curvature of `w⁴ g_euc`: `-8 w^{-5} Δw`.
    pub fn scalar_curvature(&self, rho: f64) -> f64 {
        -8.0 * self.laplacian(rho) / self.value(rho).powi(5)
    }

    fn label(&self) -> String {
        format!(
            "w = μ^1/2 ({}/({}+μ²ρ²))^{} with μ = {}",
            self.numerator, self.denominator, self.exponent, self.mu
        )
    }
}

impl RadialFn for ConformalFactor {
    fn value(&self, rho: f64) -> f64 {
        self.amplitude() * self.q(rho).powf(-self.exponent)
    }
    fn derivative(&self, rho: f64) -> f64 {
        let (p, m2) = (self.exponent, self.mu * self.mu);
        -2.0 * p * self.amplitude() * m2 * rho * self.q(rho).powf(-p - 1.0)
    }
}

/// `f(ρ) ↦ a f(ℓρ)`.
pub struct Rescaled<F> {
    pub inner: F,
    pub amplitude: f64,
    pub scale: f64,
}

impl<F: RadialFn> RadialFn for Rescaled<F> {
    fn value(&self, rho: f64) -> f64 {
        self.amplitude * self.inner.value(self.scale * rho)
    }
    fn derivative(&self, rho: f64) -> f64 {
        self.amplitude * self.scale * self.inner.derivative(self.scale * rho)
    }
}

/// Rescale a decreasing radial profile to `f(0) = 1` and `∫f⁶ = 2π²`.
///
/// `length` is the scale over which `f` varies.
pub fn normalize_bubble<F: RadialFn>(f: F, length: f64) -> Result<Rescaled<F>> {
    let f0 = f.value(0.0);
    if !(f0 > 0.0 && f0.is_finite()) {
        return Err(Error::domain(format!("profile value {f0} at the origin cannot be normalized")));
    }
    let amplitude = 1.0 / f0;
    let mass = radial_integral(|r| f.value(r).powi(6), length)?;
    let scale = (amplitude.powi(6) * mass / round_sphere_volume()).cbrt();
    Ok(Rescaled {
        inner: f,
        amplitude,
        scale,
    })
}

fn radial_integral<G: Fn(f64) -> f64>(g: G, scale: f64) -> Result<f64> {
    let v = integrate_to_infinity(|r| 4.0 * PI * r * r * g(r), 0.0, scale, QuadOptions::with_rel_tol(1e-13))?;
    Ok(v.value)
}

fn check_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(log_grid(1e-3, 1e3, 601));
    g
}

/// Max of `|Δw + λw⁵|` over `ρ ∈ {0} ∪ [1e-3, 1e3]`.
pub fn check_pde(w: &ConformalFactor) -> Certificate {
    let worst = check_grid()
        .into_iter()
        .map(|r| (w.laplacian(r) + w.lambda * w.value(r).powi(5)).abs())
        .fold(0.0, f64::max);
    Certificate::equal("conformal_pde", worst, 0.0, PDE_TOL)
        .input("profile", w.label())
        .param("lambda", w.lambda)
}

/// `‖w‖∞ = 1` and `∫w⁶ = 2π²`.
pub fn check_norms(w: &ConformalFactor) -> Result<Certificate> {
    let sup = check_grid().into_iter().map(|r| w.value(r)).fold(0.0, f64::max);
    let sup_cert = Certificate::equal("conformal_sup_norm", sup, 1.0, 1e-12);
    Ok(Certificate::bundle("conformal_norms", &[sup_cert, l6_certificate(w)?]).input("profile", w.label()))
}

fn l6_certificate(w: &ConformalFactor) -> Result<Certificate> {
    Ok(Certificate::equal("conformal_l6", w.l6()?, round_sphere_volume(), IDENTITY_TOL))
}

/// Equality in the Sobolev inequality for a profile solving `Δw + λw⁵ = 0`:
/// the quotient equals `Λ` and `∫|∇w|² = λ ∫w⁶`.
pub fn sobolev_equality<F: RadialFn>(w: &F, lambda: f64, length: f64) -> Result<Certificate> {
    let grad = radial_integral(|r| w.derivative(r).powi(2), length)?;
    let l6 = radial_integral(|r| w.value(r).powi(6), length)?;
    let quotient = grad / l6.cbrt();
    let q = Certificate::equal("sobolev_equality_quotient", quotient, euclidean_sobolev_constant(), IDENTITY_TOL);
    let e = Certificate::equal("sobolev_equality_energy", grad, lambda * l6, IDENTITY_TOL);
    Ok(Certificate::bundle("sobolev_equality", &[q, e])
        .param("quotient", quotient)
        .param("dirichlet", grad)
        .param("l6", l6))
}

pub fn check_sobolev_equality(w: &ConformalFactor) -> Result<Certificate> {
    Ok(sobolev_equality(w, w.lambda, w.scale())?.input("profile", w.label()))
}

/// `R(w⁴ g_euc) ≡ 6` on `ρ ∈ {0} ∪ [1e-3, 1e3]`.
pub fn check_round_sphere(w: &ConformalFactor) -> Certificate {
    let (mut lo, mut hi, mut worst) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for r in check_grid() {
        let s = w.scalar_curvature(r);
        lo = lo.min(s);
        hi = hi.max(s);
        worst = worst.max((s - 6.0).abs());
    }
    Certificate::equal("round_sphere", 6.0 + worst, 6.0, IDENTITY_TOL)
        .input("profile", w.label())
        .param("min_scalar_curvature", lo)
        .param("max_scalar_curvature", hi)
}

/// Mass of `w^s` on `B(0, 2r)` is positive and nondecreasing over `radii`.
pub fn check_non_concentration(w: &ConformalFactor, s: f64, radii: &[f64]) -> Result<Certificate> {
    if radii.is_empty() {
        return Err(Error::Config("non-concentration check needs at least one radius".into()));
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    let masses = sorted.iter().map(|r| w.local_mass(s, 2.0 * r)).collect::<Result<Vec<_>>>()?;
    let first = masses[0];
    let worst_step = masses.windows(2).map(|m| m[1] - m[0]).fold(f64::INFINITY, f64::min);
    let pos = Certificate::at_least("local_mass_positive", first, 0.0, 0.0);
    let mono = Certificate::at_least("local_mass_monotone", worst_step.min(0.0), 0.0, 0.0);
    Ok(Certificate::bundle("non_concentration", &[pos, mono])
        .param("s", s)
        .param("smallest_mass", first))
}

/// Every identity at once; `include_sup` drops the `‖w‖∞ = 1` normalization
/// for dilated members.
pub fn check_suite(w: &ConformalFactor, include_sup: bool) -> Result<Certificate> {
    let mut parts = vec![check_pde(w)];
    if include_sup {
        parts.push(check_norms(w)?);
    } else {
        parts.push(l6_certificate(w)?);
    }
    parts.push(check_sobolev_equality(w)?);
    parts.push(check_round_sphere(w));
    Ok(Certificate::bundle("conformal_suite", &parts)
        .input("profile", w.label())
        .param("mu", w.mu))
}
