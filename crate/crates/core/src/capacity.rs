//! Capacitary potentials of centered spheres and the level-set flux `W(t)`.
//!
//! For a centered sphere the potential integrates in closed form up to one
//! quadrature: `φ(x) = J(x)/J(x₀)` with `J(x) = ∫_x^∞ ds/A(s)`. Every level
//! set is a centered sphere, so level sets are connected automatically.

use std::f64::consts::PI;

use crate::certificate::{Caveat, Certificate};
use crate::error::{Error, Result};
use crate::manifold::RadialMetric;
use crate::profile::log_grid;

/// Largest level `t = -log φ` that [`CapacitaryPotential::flux_w`] resolves.
pub const MAX_LEVEL: f64 = 30.0;

/// Default absolute tolerance on dimensionless certificate margins.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Levels used by [`check_w_monotonicity`]: `t = 0` followed by 399
/// geometrically spaced levels in `[1e-3, 12]`.
pub fn level_grid() -> Vec<f64> {
    let mut t = vec![0.0];
    t.extend(log_grid(1e-3, 12.0, 399));
    t
}

/// Radial harmonic potential outside the centered ball of native radius `x₀`.
#[derive(Debug, Clone)]
pub struct CapacitaryPotential {
    metric: RadialMetric,
    inner_radius: f64,
    inner_geodesic_radius: f64,
    inverse_capacity: f64,
    samples: Vec<(f64, f64)>,
}

impl CapacitaryPotential {
    pub fn metric(&self) -> &RadialMetric {
        &self.metric
    }

    /// Native radius of the inner sphere Σ.
    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    /// Geodesic radius of Σ.
    pub fn inner_geodesic_radius(&self) -> f64 {
        self.inner_geodesic_radius
    }

    /// `C = ∫_Σ |∇w| da = A(s) |φ'(s)|`, constant along the exterior.
    pub fn flux_constant(&self) -> f64 {
        1.0 / self.inverse_capacity
    }

    /// `(x, φ(x))` samples on a geometric grid from `x₀` to `10^4 x₀`.
    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// `J(x) = ∫_x^∞ ds / A`.
    pub fn tail_integral(&self, x: f64) -> Result<f64> {
        tail_integral(&self.metric, x)
    }

    /// Potential value at native radius `x ≥ x₀`.
    pub fn potential(&self, x: f64) -> Result<f64> {
        if x < self.inner_radius {
            return Err(Error::domain(format!(
                "radius {x} is inside the inner sphere {}",
                self.inner_radius
            )));
        }
        Ok(self.tail_integral(x)? / self.inverse_capacity)
    }

    /// `w = -log φ` at native radius `x`.
    pub fn log_potential(&self, x: f64) -> Result<f64> {
        Ok(-self.potential(x)?.ln())
    }

    /// Native radius of the level set `{w = t}`.
    pub fn level_radius(&self, t: f64) -> Result<f64> {
        if !(0.0..=MAX_LEVEL).contains(&t) {
            return Err(Error::domain(format!("level {t} outside [0, {MAX_LEVEL}]")));
        }
        if t == 0.0 {
            return Ok(self.inner_radius);
        }
        let target = self.inverse_capacity.ln() - t;
        let g = |x: f64| -> Result<f64> { Ok(self.tail_integral(x)?.ln() - target) };
        // bracket in log x: g is strictly decreasing
        let mut lo = self.inner_radius;
        let mut hi = self.inner_radius * t.exp();
        while g(hi)? > 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        let mut x = hi;
        for _ in 0..100 {
            let jx = self.tail_integral(x)?;
            let gx = jx.ln() - target;
            if gx > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            // d/dx log J = -(ds/dx) / (A J)
            let slope = -self.metric.ds_dx(x) / (self.metric.area(x) * jx);
            let mut next = x - gx / slope;
            if !(next > lo && next < hi) {
                next = (lo * hi).sqrt();
            }
            if (next - x).abs() <= 1e-15 * x {
                return Ok(next);
            }
            x = next;
            if (hi - lo) <= 1e-15 * hi {
                break;
            }
        }
        Ok(x)
    }

    /// `W(t) = ∫_{w=t} |∇w|^2 da = 1 / (A J^2)` on the level sphere.
    pub fn flux_w(&self, t: f64) -> Result<f64> {
        let x = self.level_radius(t)?;
        let j = self.inverse_capacity * (-t).exp();
        Ok(1.0 / (self.metric.area(x) * j * j))
    }

    /// `∫_{w=t} |∇w| da = e^t C`, evaluated from the level sphere.
    pub fn level_flux(&self, t: f64) -> Result<f64> {
        let x = self.level_radius(t)?;
        Ok(1.0 / self.tail_integral(x)?)
    }

    /// `∫_{w=t} |∇w|^{-1} da = A^2 J` on the level sphere.
    pub fn level_inverse_flux(&self, t: f64) -> Result<f64> {
        let x = self.level_radius(t)?;
        let a = self.metric.area(x);
        Ok(a * a * self.inverse_capacity * (-t).exp())
    }
}

fn tail_integral(metric: &RadialMetric, x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain(format!("radius {x} not in (0, ∞)")));
    }
    let r = metric
        .integrate_native_to_infinity(|t| metric.ds_dx(t) / metric.area(t), x)
        .map_err(|e| Error::Model(format!("tail integral ∫ds/A diverges or fails ({e}); metric not AF?")))?;
    if !(r.value > 0.0 && r.value.is_finite()) {
        return Err(Error::Model("tail integral ∫ds/A is not finite and positive".into()));
    }
    Ok(r.value)
}

/// Capacitary potential of the centered sphere at native radius `x₀`.
pub fn solve_capacitary_potential(metric: &RadialMetric, x0: f64) -> Result<CapacitaryPotential> {
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(Error::domain(format!("inner radius {x0} must be positive")));
    }
    let j0 = tail_integral(metric, x0)?;
    let samples = log_grid(x0, 1e4 * x0, 64)
        .into_iter()
        .map(|x| Ok((x, tail_integral(metric, x)? / j0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CapacitaryPotential {
        metric: metric.clone(),
        inner_radius: x0,
        inner_geodesic_radius: metric.geodesic_radius(x0)?,
        inverse_capacity: j0,
        samples,
    })
}

/// Upper bound `[e^{-t}√W(0) + (1-e^{-t})√(4π)]^2` on `W(t)`.
pub fn w_bound(w0: f64, t: f64) -> f64 {
    let e = (-t).exp();
    let v = e * w0.sqrt() + (1.0 - e) * (4.0 * PI).sqrt();
    v * v
}

/// Check `W(t) ≤ [e^{-t}√W(0) + (1-e^{-t})√(4π)]^2` over [`level_grid`].
pub fn check_w_monotonicity(potential: &CapacitaryPotential, tol: f64) -> Result<Certificate> {
    let w0 = potential.flux_w(0.0)?;
    check_w_monotonicity_from(potential, w0, tol)
}

/// As [`check_w_monotonicity`], but with `W(0)` supplied by the caller.
/// Passing a value below the true flux produces a negative fixture.
pub fn check_w_monotonicity_from(potential: &CapacitaryPotential, w0: f64, tol: f64) -> Result<Certificate> {
    let mut worst = (f64::INFINITY, 0.0, 0.0, 0.0);
    for t in level_grid() {
        let w = potential.flux_w(t)?;
        let rhs = w_bound(w0, t);
        if rhs - w < worst.0 {
            worst = (rhs - w, rhs, w, t);
        }
    }
    let cert = Certificate::at_least("w_monotonicity", worst.1, worst.2, tol)
        .param("worst_level", worst.3)
        .param("w0", w0)
        .param("inner_radius", potential.inner_radius)
        .input("metric", potential.metric.describe())
        .with_caveat(Caveat::CenteredSpheresOnly);
    Ok(cert)
}

/// Check `√W(0) ≤ √π + ¼ (∫_Σ H^2)^{1/2}` for the centered sphere at `x₀`.
pub fn check_miao_bound(metric: &RadialMetric, x0: f64, tol: f64) -> Result<Certificate> {
    let pot = solve_capacitary_potential(metric, x0)?;
    let w0 = pot.flux_w(0.0)?;
    let willmore = metric.willmore_energy_sphere(x0)?;
    let rhs = PI.sqrt() + 0.25 * willmore.sqrt();
    Ok(Certificate::at_least("miao_bound", rhs, w0.sqrt(), tol)
        .param("inner_radius", x0)
        .param("willmore", willmore)
        .param("w0", w0)
        .input("metric", metric.describe())
        .with_caveat(Caveat::CenteredSpheresOnly))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_potential_is_inverse_radius() {
        let g = RadialMetric::flat();
        let p = solve_capacitary_potential(&g, 1.0).unwrap();
        assert!((p.flux_constant() - 4.0 * PI).abs() < 1e-11);
        for r in [1.0, 2.0, 10.0, 1e3] {
            assert!((p.potential(r).unwrap() - 1.0 / r).abs() < 1e-12);
        }
        let p2 = solve_capacitary_potential(&g, 2.0).unwrap();
        assert!((p2.potential(5.0).unwrap() - 0.4).abs() < 1e-12);
        for t in [0.0, 0.5, 3.0, 11.0] {
            assert!((p.flux_w(t).unwrap() - 4.0 * PI).abs() < 1e-10, "t={t}");
            assert!((p.level_radius(t).unwrap() - t.exp()).abs() < 1e-10 * t.exp());
        }
        assert!((p.flux_w(0.0).unwrap().sqrt() - 2.0 * PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn level_errors() {
        let p = solve_capacitary_potential(&RadialMetric::flat(), 1.0).unwrap();
        assert!(p.flux_w(-0.1).is_err());
        assert!(p.flux_w(MAX_LEVEL + 1.0).is_err());
        assert!(p.potential(0.5).is_err());
        assert!(solve_capacitary_potential(&RadialMetric::flat(), 0.0).is_err());
    }

    #[test]
    fn flat_certificates_are_equalities() {
        let g = RadialMetric::flat();
        let p = solve_capacitary_potential(&g, 1.0).unwrap();
        let c = check_w_monotonicity(&p, DEFAULT_TOL).unwrap();
        assert!(c.passed && c.margin.abs() < 1e-9, "{c:?}");
        for x0 in [1.0, 3.0] {
            let m = check_miao_bound(&g, x0, DEFAULT_TOL).unwrap();
            assert!(m.passed && m.margin.abs() < 1e-10, "{m:?}");
        }
    }

    #[test]
    fn schwarzschild_flux_is_below_bound() {
        let g = RadialMetric::smoothed_schwarzschild(0.1, 1.0).unwrap();
        let p = solve_capacitary_potential(&g, 1.0).unwrap();
        let c = check_w_monotonicity(&p, DEFAULT_TOL).unwrap();
        assert!(c.passed && c.margin >= 0.0, "{c:?}");
        for t in [0.1, 1.0, 10.0] {
            assert!(p.flux_w(t).unwrap() < w_bound(c.params["w0"], t));
        }
        for x0 in [0.25, 1.0, 4.0] {
            assert!(check_miao_bound(&g, x0, DEFAULT_TOL).unwrap().passed);
        }
    }

    #[test]
    fn lowered_w0_is_detected() {
        let g = RadialMetric::smoothed_schwarzschild(0.1, 1.0).unwrap();
        let p = solve_capacitary_potential(&g, 1.0).unwrap();
        let w0 = p.flux_w(0.0).unwrap();
        let c = check_w_monotonicity_from(&p, 0.5 * w0, DEFAULT_TOL).unwrap();
        assert!(!c.passed);
    }

    #[test]
    fn harmonicity_and_flux_consistency() {
        let g = RadialMetric::smoothed_schwarzschild(1.0, 1.0).unwrap();
        let p = solve_capacitary_potential(&g, 0.7).unwrap();
        let c = p.flux_constant();
        for x in [0.8, 2.0, 9.0, 120.0] {
            // A(s) dφ/ds by central differences in s
            let h = 1e-4 * x;
            let ds = g.geodesic_radius(x + h).unwrap() - g.geodesic_radius(x - h).unwrap();
            let dphi = p.potential(x + h).unwrap() - p.potential(x - h).unwrap();
            let flux = -g.area(x) * dphi / ds;
            assert!((flux - c).abs() < 1e-6 * c, "x={x}: {flux} vs {c}");
        }
        for t in [0.3, 2.0, 8.0] {
            assert!(((-t as f64).exp() * p.level_flux(t).unwrap() - c).abs() < 1e-8 * c);
        }
        let w12 = p.flux_w(12.0).unwrap();
        assert!((w12 - 4.0 * PI).abs() < 1e-4, "W(12) = {w12}");
    }

    #[test]
    fn flux_is_dilation_invariant() {
        let g = RadialMetric::smoothed_schwarzschild(0.4, 1.0).unwrap();
        let lam = 7.0;
        let gl = g.dilate(lam).unwrap();
        let p = solve_capacitary_potential(&g, 1.0).unwrap();
        let pl = solve_capacitary_potential(&gl, lam).unwrap();
        for t in [0.0, 0.1, 1.0, 6.0] {
            let (a, b) = (p.flux_w(t).unwrap(), pl.flux_w(t).unwrap());
            assert!((a - b).abs() <= 1e-10 * a, "t={t}");
        }
    }
}
