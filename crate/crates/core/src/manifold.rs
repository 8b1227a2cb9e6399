//! Rotationally symmetric asymptotically flat 3-metrics.
//!
//! A [`RadialMetric`] is stored either in conformal form `g = u(r)^4 g_euc`
//! or in warped form `g = ds^2 + φ(s)^2 g_{S^2}`. All accessors take the
//! native radial coordinate of the form (`r` resp. `s`).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::profile::{log_grid, RadialProfile};
use crate::quadrature::{integrate, integrate_to_infinity, Integral, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MetricForm {
    /// `g = u(r)^4 g_euc`, coordinate `r ∈ (0, ∞)`.
    Conformal,
    /// `g = ds^2 + φ(s)^2 g_{S^2}`, coordinate `s ∈ [0, ∞)`.
    Warped,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// `u ≡ 1` or `φ(s) = s`.
    Euclidean,
    /// `u = 1 + (m/2)(r^2 + a^2)^{-1/2}`.
    SmoothedSchwarzschild { mass: f64, core: f64 },
    /// Sampled `u` or `φ`, extended past the last node by its leading
    /// asymptotic term.
    Sampled(RadialProfile),
}

/// A rotationally symmetric metric on ℝ³. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMetric {
    form: MetricForm,
    shape: Shape,
    length_scale: f64,
    mass_params: BTreeMap<String, f64>,
    family: String,
}

/// Relative tolerance for metric quadratures.
const METRIC_RTOL: f64 = 1e-13;

fn quad_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-300,
        rel_tol: METRIC_RTOL,
        max_intervals: 20_000,
    }
}

fn rough_total<F: Fn(f64) -> f64>(f: &F, breaks: &[f64]) -> Result<f64> {
    let opts = QuadOptions {
        abs_tol: 1e-300,
        rel_tol: 1e-6,
        max_intervals: 20_000,
    };
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += integrate(f, w[0], w[1], opts)?.value.abs();
    }
    Ok(total)
}

impl RadialMetric {
    /// Euclidean space in conformal form.
    pub fn flat() -> Self {
        Self {
            form: MetricForm::Conformal,
            shape: Shape::Euclidean,
            length_scale: 1.0,
            mass_params: BTreeMap::new(),
            family: "flat".into(),
        }
    }

    /// Euclidean space in warped form, `φ(s) = s`.
    pub fn flat_warped() -> Self {
        Self {
            form: MetricForm::Warped,
            ..Self::flat()
        }
    }

    /// The smoothed-Schwarzschild family `u = 1 + (m/2)(r^2+a^2)^{-1/2}`.
    pub fn smoothed_schwarzschild(mass: f64, core: f64) -> Result<Self> {
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(Error::Config(format!("mass must be finite and >= 0, got {mass}")));
        }
        if !(core > 0.0 && core.is_finite()) {
            return Err(Error::Config(format!("core radius must be positive, got {core}")));
        }
        let mut params = BTreeMap::new();
        params.insert("m".to_string(), mass);
        params.insert("a".to_string(), core);
        Ok(Self {
            form: MetricForm::Conformal,
            shape: Shape::SmoothedSchwarzschild { mass, core },
            length_scale: core,
            mass_params: params,
            family: "smoothed_schwarzschild".into(),
        })
    }

    /// Conformal metric from a sampled factor `u(r)`. Beyond the last node
    /// `u = 1 + (u_N - 1) r_N / r`.
    pub fn from_conformal_profile(profile: RadialProfile) -> Result<Self> {
        if profile.values().iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Config("conformal factor must be strictly positive".into()));
        }
        let (lo, _) = profile.domain();
        if lo < 0.0 {
            return Err(Error::Config("conformal profile grid must lie in r >= 0".into()));
        }
        let scale = sampled_scale(profile.grid());
        Ok(Self {
            form: MetricForm::Conformal,
            shape: Shape::Sampled(profile),
            length_scale: scale,
            mass_params: BTreeMap::new(),
            family: "sampled_conformal".into(),
        })
    }

    /// Warped metric from a sampled `φ(s)`; requires `φ(0) = 0`, `φ'(0) = 1`.
    /// Beyond the last node `φ` continues linearly.
    pub fn from_warped_profile(profile: RadialProfile) -> Result<Self> {
        let (lo, _) = profile.domain();
        if lo != 0.0 {
            return Err(Error::Config("warped profile grid must start at s = 0".into()));
        }
        let (p0, d0, _) = profile.eval_all(0.0);
        if p0.abs() > 1e-12 || (d0 - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "warped profile must satisfy φ(0)=0, φ'(0)=1 (got {p0}, {d0})"
            )));
        }
        if profile.values()[1..].iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Config("warping function must be positive for s > 0".into()));
        }
        let scale = sampled_scale(profile.grid());
        Ok(Self {
            form: MetricForm::Warped,
            shape: Shape::Sampled(profile),
            length_scale: scale,
            mass_params: BTreeMap::new(),
            family: "sampled_warped".into(),
        })
    }

    pub fn form(&self) -> MetricForm {
        self.form
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn mass_params(&self) -> &BTreeMap<String, f64> {
        &self.mass_params
    }

    /// A characteristic length of the geometry (core radius for the family).
    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.shape, Shape::Euclidean)
            || matches!(self.shape, Shape::SmoothedSchwarzschild { mass, .. } if mass == 0.0)
    }

    /// Human-readable provenance string.
    pub fn describe(&self) -> String {
        let params: Vec<String> = self.mass_params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}[{:?}]({})", self.family, self.form, params.join(","))
    }

    /// Nodes of a sampled profile (used to split quadratures).
    fn nodes(&self) -> Option<&[f64]> {
        match &self.shape {
            Shape::Sampled(p) => Some(p.grid()),
            _ => None,
        }
    }

    /// `(f, f', f'')` for the stored factor (`u` or `φ`) in the native coordinate.
    pub fn factor(&self, x: f64) -> (f64, f64, f64) {
        match (&self.shape, self.form) {
            (Shape::Euclidean, MetricForm::Conformal) => (1.0, 0.0, 0.0),
            (Shape::Euclidean, MetricForm::Warped) => (x, 1.0, 0.0),
            (Shape::SmoothedSchwarzschild { mass, core }, _) => {
                let q = x * x + core * core;
                let qm12 = q.sqrt().recip();
                let qm32 = qm12 / q;
                let qm52 = qm32 / q;
                (
                    1.0 + 0.5 * mass * qm12,
                    -0.5 * mass * x * qm32,
                    -0.5 * mass * (qm32 - 3.0 * x * x * qm52),
                )
            }
            (Shape::Sampled(p), MetricForm::Conformal) => {
                let (lo, hi) = p.domain();
                if x > hi {
                    let c = (p.values()[p.values().len() - 1] - 1.0) * hi;
                    (1.0 + c / x, -c / (x * x), 2.0 * c / (x * x * x))
                } else {
                    p.eval_all(x.max(lo))
                }
            }
            (Shape::Sampled(p), MetricForm::Warped) => {
                let (_, hi) = p.domain();
                if x > hi {
                    let (v, d, _) = p.eval_all(hi);
                    (v + d * (x - hi), d, 0.0)
                } else {
                    p.eval_all(x)
                }
            }
        }
    }

    fn check_point(&self, x: f64) -> Result<()> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::domain(format!("radius {x} is not in the open domain (0, ∞)")));
        }
        Ok(())
    }

    /// `ds/dx` for the native coordinate.
    pub fn ds_dx(&self, x: f64) -> f64 {
        match self.form {
            MetricForm::Conformal => {
                let u = self.factor(x).0;
                u * u
            }
            MetricForm::Warped => 1.0,
        }
    }

    /// Area of the centered sphere at native radius `x` (no domain check).
    pub fn area(&self, x: f64) -> f64 {
        let (f, _, _) = self.factor(x);
        match self.form {
            MetricForm::Conformal => 4.0 * PI * f.powi(4) * x * x,
            MetricForm::Warped => 4.0 * PI * f * f,
        }
    }

    /// Volume density per unit native radius, `A(x) ds/dx`.
    pub fn volume_density(&self, x: f64) -> f64 {
        self.area(x) * self.ds_dx(x)
    }

    /// Gradient-energy density per unit native radius, `A(x) / (ds/dx)`:
    /// `∫|∇v|^2 dv = ∫ v_x^2 A/(ds/dx) dx` for radial `v`.
    pub fn energy_density(&self, x: f64) -> f64 {
        self.area(x) / self.ds_dx(x)
    }

    /// Scalar curvature at native radius `x`.
    pub fn scalar_curvature(&self, x: f64) -> Result<f64> {
        self.check_point(x)?;
        let (f, d, dd) = self.factor(x);
        Ok(match self.form {
            // R(u^4 g_euc) = -8 u^{-5} Δ_euc u
            MetricForm::Conformal => -8.0 * (dd + 2.0 * d / x) / f.powi(5),
            // R = 2(1 - φ'^2)/φ^2 - 4 φ''/φ
            MetricForm::Warped => 2.0 * (1.0 - d * d) / (f * f) - 4.0 * dd / f,
        })
    }

    /// Area of the centered sphere at `x`.
    pub fn sphere_area(&self, x: f64) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.area(x))
    }

    /// `dφ/ds` of the warped representation, evaluated at native radius `x`.
    pub fn warped_slope(&self, x: f64) -> f64 {
        let (f, d, _) = self.factor(x);
        match self.form {
            MetricForm::Conformal => 1.0 + 2.0 * x * d / f,
            MetricForm::Warped => d,
        }
    }

    /// Warping value `φ` at native radius `x`.
    pub fn warped_value(&self, x: f64) -> f64 {
        let (f, _, _) = self.factor(x);
        match self.form {
            MetricForm::Conformal => f * f * x,
            MetricForm::Warped => f,
        }
    }

    /// Mean curvature `H = 2 φ'(s)/φ(s)` of the centered sphere.
    pub fn mean_curvature_sphere(&self, x: f64) -> Result<f64> {
        self.check_point(x)?;
        Ok(2.0 * self.warped_slope(x) / self.warped_value(x))
    }

    /// Willmore energy `∫H^2 da = 16π φ'(s)^2` of the centered sphere.
    pub fn willmore_energy_sphere(&self, x: f64) -> Result<f64> {
        self.check_point(x)?;
        let d = self.warped_slope(x);
        Ok(16.0 * PI * d * d)
    }

    /// `∫_lo^hi f(x) dx` in the native coordinate, split at sample nodes.
    pub fn integrate_native<F: Fn(f64) -> f64>(&self, f: F, lo: f64, hi: f64) -> Result<Integral> {
        if hi < lo {
            return Err(Error::domain(format!("reversed interval [{lo}, {hi}]")));
        }
        let mut breaks = vec![lo];
        if let Some(nodes) = self.nodes() {
            breaks.extend(nodes.iter().copied().filter(|&n| n > lo && n < hi));
        } else {
            // geometric breakpoints keep wide ranges well-conditioned
            let s = self.length_scale;
            let mut b = s * 1e-3;
            while b < hi {
                if b > lo {
                    breaks.push(b);
                }
                b *= 10.0;
            }
        }
        breaks.push(hi);
        let mut total = Integral {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        };
        let mut floor = None;
        for w in breaks.windows(2) {
            let r = match integrate(&f, w[0], w[1], quad_opts()) {
                Ok(r) => r,
                Err(Error::Numerical { .. }) => {
                    // a negligible segment cannot meet a relative target on its own
                    let abs_tol = match floor {
                        Some(v) => v,
                        None => {
                            let v = rough_total(&f, &breaks)? * METRIC_RTOL;
                            floor = Some(v);
                            v
                        }
                    };
                    integrate(&f, w[0], w[1], QuadOptions { abs_tol, ..quad_opts() })?
                }
                Err(e) => return Err(e),
            };
            total.value += r.value;
            total.error += r.error;
            total.intervals += r.intervals;
        }
        Ok(total)
    }

    /// `∫_lo^∞ f(x) dx` in the native coordinate.
    pub fn integrate_native_to_infinity<F: Fn(f64) -> f64>(&self, f: F, lo: f64) -> Result<Integral> {
        let far = match self.nodes() {
            Some(nodes) => nodes[nodes.len() - 1].max(lo),
            None => (self.length_scale * 1e3).max(lo),
        };
        let mut head = self.integrate_native(&f, lo, far)?;
        let tail = integrate_to_infinity(&f, far, far.max(self.length_scale), quad_opts())?;
        head.value += tail.value;
        head.error += tail.error;
        head.intervals += tail.intervals;
        Ok(head)
    }

    /// Geodesic distance from the origin to the sphere at native radius `x`.
    pub fn geodesic_radius(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::domain(format!("radius {x} outside [0, ∞)")));
        }
        match (&self.shape, self.form) {
            (_, MetricForm::Warped) | (Shape::Euclidean, _) => Ok(x),
            (Shape::SmoothedSchwarzschild { mass, core }, MetricForm::Conformal) => {
                let t = x / core;
                Ok(x + mass * t.asinh() + mass * mass / (4.0 * core) * t.atan())
            }
            (Shape::Sampled(_), MetricForm::Conformal) => {
                Ok(self.integrate_native(|r| self.ds_dx(r), 0.0, x)?.value)
            }
        }
    }

    /// Volume of the centered ball of native radius `x`.
    pub fn ball_volume(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::domain(format!("radius {x} outside [0, ∞)")));
        }
        if let (Shape::Euclidean, _) = (&self.shape, self.form) {
            return Ok(4.0 / 3.0 * PI * x.powi(3));
        }
        let r = self.integrate_native(|t| self.volume_density(t), 0.0, x)?;
        if r.error > 1e-10 * r.value.abs().max(1e-300) {
            return Err(Error::numerical("ball volume quadrature did not converge", r.error));
        }
        Ok(r.value)
    }

    /// The metric `λ^2 g`, expressed in the same form.
    pub fn dilate(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("dilation factor must be positive, got {lambda}")));
        }
        let shape = match (&self.shape, self.form) {
            (Shape::Euclidean, _) => Shape::Euclidean,
            (Shape::SmoothedSchwarzschild { mass, core }, _) => Shape::SmoothedSchwarzschild {
                mass: mass * lambda,
                core: core * lambda,
            },
            (Shape::Sampled(p), MetricForm::Conformal) => Shape::Sampled(p.dilate(lambda, 1.0)),
            (Shape::Sampled(p), MetricForm::Warped) => Shape::Sampled(p.dilate(lambda, lambda)),
        };
        let mut params = self.mass_params.clone();
        for v in params.values_mut() {
            *v *= lambda;
        }
        Ok(Self {
            form: self.form,
            shape,
            length_scale: self.length_scale * lambda,
            mass_params: params,
            family: self.family.clone(),
        })
    }

    /// Native radius of the same sphere after `dilate(lambda)`.
    pub fn dilated_radius(&self, x: f64, lambda: f64) -> f64 {
        x * lambda
    }

    /// Isometric warped-form copy. Warped input is returned unchanged.
    pub fn to_warped(&self) -> Result<Self> {
        if self.form == MetricForm::Warped {
            return Ok(self.clone());
        }
        if let Shape::Euclidean = self.shape {
            return Ok(Self {
                family: self.family.clone(),
                ..Self::flat_warped()
            });
        }
        let l = self.length_scale;
        let mut rs = vec![0.0];
        rs.extend(log_grid(1e-4 * l, 1e4 * l, 1600));
        let mut s_vals = Vec::with_capacity(rs.len());
        let mut acc = 0.0;
        let mut prev = 0.0;
        for &r in &rs {
            if r > 0.0 {
                acc += integrate(|t| self.ds_dx(t), prev, r, quad_opts())?.value;
            }
            s_vals.push(acc);
            prev = r;
        }
        let phi: Vec<f64> = rs.iter().map(|&r| self.warped_value(r)).collect();
        let dphi: Vec<f64> = rs
            .iter()
            .map(|&r| if r == 0.0 { 1.0 } else { self.warped_slope(r) })
            .collect();
        let profile = RadialProfile::with_slopes(s_vals, phi, dphi)?;
        let mut out = Self::from_warped_profile(profile)?;
        out.mass_params = self.mass_params.clone();
        out.family = self.family.clone();
        out.length_scale = l;
        Ok(out)
    }

    /// Native radius whose centered ball has volume `v` (monotone root solve).
    pub fn radius_for_volume(&self, v: f64) -> Result<f64> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("volume {v} must be positive")));
        }
        let mut lo = 0.0;
        let mut hi = self.length_scale.max((3.0 * v / (4.0 * PI)).cbrt());
        while self.ball_volume(hi)? < v {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.ball_volume(mid)? < v {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Geometric mean of the first positive node and the last node.
fn sampled_scale(grid: &[f64]) -> f64 {
    let hi = grid[grid.len() - 1];
    let lo = grid.iter().copied().find(|&g| g > 0.0).unwrap_or(hi);
    (lo * hi).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ss() -> RadialMetric {
        RadialMetric::smoothed_schwarzschild(1.0, 1.0).unwrap()
    }

    #[test]
    fn flat_quantities() {
        let g = RadialMetric::flat();
        assert_eq!(g.scalar_curvature(0.7).unwrap(), 0.0);
        assert!((g.sphere_area(1.0).unwrap() - 4.0 * PI).abs() < 1e-14);
        assert!((g.sphere_area(2.0).unwrap() - 16.0 * PI).abs() < 1e-13);
        assert!((g.ball_volume(1.0).unwrap() - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((g.ball_volume(2.0).unwrap() - 32.0 * PI / 3.0).abs() < 1e-13);
        assert!((g.mean_curvature_sphere(1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((g.mean_curvature_sphere(0.5).unwrap() - 4.0).abs() < 1e-15);
        for r in [1e-3, 0.3, 1.0, 50.0] {
            assert!((g.willmore_energy_sphere(r).unwrap() - 16.0 * PI).abs() < 1e-12);
        }
        let w = RadialMetric::flat_warped();
        assert_eq!(w.scalar_curvature(3.0).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors() {
        let g = ss();
        assert!(matches!(g.scalar_curvature(0.0), Err(Error::Domain(_))));
        assert!(matches!(g.sphere_area(-1.0), Err(Error::Domain(_))));
        assert!(matches!(g.ball_volume(f64::NAN), Err(Error::Domain(_))));
        assert!(RadialMetric::smoothed_schwarzschild(-0.1, 1.0).is_err());
        assert!(RadialMetric::smoothed_schwarzschild(0.1, 0.0).is_err());
    }

    #[test]
    fn schwarzschild_curvature_closed_form_vs_finite_differences() {
        let (m, a) = (1.0, 1.0);
        let g = ss();
        let u = |r: f64| 1.0 + 0.5 * m / (r * r + a * a).sqrt();
        for r in [0.1, 0.5, 1.0, 2.0, 7.0] {
            let closed = 12.0 * m * a * a * u(r).powi(-5) * (r * r + a * a).powf(-2.5);
            let got = g.scalar_curvature(r).unwrap();
            assert!((got - closed).abs() <= 1e-12 * closed, "r={r}");
            // 5-point Laplacian of the radial function u, oracle independent of the
            // analytic derivatives used by the implementation
            let h = 1e-3 * r;
            let d1 = (u(r - 2.0 * h) - 8.0 * u(r - h) + 8.0 * u(r + h) - u(r + 2.0 * h)) / (12.0 * h);
            let d2 = (-u(r - 2.0 * h) + 16.0 * u(r - h) - 30.0 * u(r) + 16.0 * u(r + h) - u(r + 2.0 * h))
                / (12.0 * h * h);
            let fd = -8.0 * u(r).powi(-5) * (d2 + 2.0 * d1 / r);
            assert!((fd - closed).abs() <= 1e-6 * closed, "r={r}: fd={fd} closed={closed}");
        }
    }

    #[test]
    fn schwarzschild_area_and_volume() {
        let g = ss();
        let u1 = 1.0 + 1.0 / (2.0 * 2f64.sqrt());
        assert!((g.sphere_area(1.0).unwrap() - 4.0 * PI * u1.powi(4)).abs() < 1e-13);
        // independent oracle: composite Simpson with Richardson extrapolation
        let f = |r: f64| {
            let u = 1.0 + 0.5 / (r * r + 1.0).sqrt();
            4.0 * PI * u.powi(6) * r * r
        };
        let simpson = |n: usize| {
            let h = 1.0 / n as f64;
            let mut s = f(0.0) + f(1.0);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
            }
            s * h / 3.0
        };
        let (s1, s2) = (simpson(2000), simpson(4000));
        let oracle = s2 + (s2 - s1) / 15.0;
        let v = g.ball_volume(1.0).unwrap();
        assert!((v - oracle).abs() < 1e-11 * oracle, "{v} vs {oracle}");
    }

    #[test]
    fn geodesic_radius_closed_form_matches_quadrature() {
        let g = RadialMetric::smoothed_schwarzschild(0.7, 1.3).unwrap();
        for r in [0.2, 1.0, 10.0] {
            let q = integrate(|t| g.ds_dx(t), 0.0, r, QuadOptions::default()).unwrap().value;
            assert!((g.geodesic_radius(r).unwrap() - q).abs() < 1e-12 * q);
        }
    }

    #[test]
    fn mean_curvature_matches_warped_finite_difference() {
        let g = ss();
        let r = 1.0;
        // φ as a function of s, differentiated numerically through s(r)
        let h = 1e-4;
        let s = |r: f64| g.geodesic_radius(r).unwrap();
        let phi = |r: f64| g.warped_value(r);
        let dphi_ds = (phi(r + h) - phi(r - h)) / (s(r + h) - s(r - h));
        let fd = 2.0 * dphi_ds / phi(r);
        assert!((g.mean_curvature_sphere(r).unwrap() - fd).abs() < 1e-7);
    }

    #[test]
    fn willmore_is_scale_invariant() {
        let g = ss();
        for lam in [0.1, 3.0, 250.0] {
            let gl = g.dilate(lam).unwrap();
            for r in [0.3, 1.0, 4.0] {
                let a = g.willmore_energy_sphere(r).unwrap();
                let b = gl.willmore_energy_sphere(g.dilated_radius(r, lam)).unwrap();
                assert!((a - b).abs() <= 1e-10 * a);
            }
        }
    }

    #[test]
    fn corpus_curvature_nonnegative() {
        for m in [1.0, 0.3, 0.1, 0.01] {
            let g = RadialMetric::smoothed_schwarzschild(m, 1.0).unwrap();
            for r in log_grid(1e-4, 1e5, 200) {
                assert!(g.scalar_curvature(r).unwrap() >= -1e-10);
            }
        }
    }

    #[test]
    fn to_warped_preserves_geometry() {
        let g = ss();
        let w = g.to_warped().unwrap();
        assert_eq!(w.form(), MetricForm::Warped);
        assert_eq!(w.to_warped().unwrap(), w);
        for r in [0.01, 0.5, 1.0, 3.0, 40.0] {
            let s = g.geodesic_radius(r).unwrap();
            let a = g.sphere_area(r).unwrap();
            assert!((w.sphere_area(s).unwrap() - a).abs() < 1e-9 * a, "r={r}");
            let wg = g.willmore_energy_sphere(r).unwrap();
            let ww = w.willmore_energy_sphere(s).unwrap();
            // derivative of the cubic interpolant between nodes
            assert!((ww - wg).abs() < 1e-6 * wg, "r={r}: {ww} vs {wg}");
        }
        let vw = w.ball_volume(g.geodesic_radius(2.0).unwrap()).unwrap();
        let vg = g.ball_volume(2.0).unwrap();
        assert!((vw - vg).abs() < 1e-8 * vg);
        let f = RadialMetric::flat().to_warped().unwrap();
        assert_eq!(f.warped_value(2.5), 2.5);
    }

    #[test]
    fn volume_derivative_is_area() {
        let g = RadialMetric::smoothed_schwarzschild(0.3, 1.0).unwrap();
        for r in [0.2, 1.0, 5.0] {
            let h = 1e-4 * r;
            let dv = (g.ball_volume(r + h).unwrap() - g.ball_volume(r - h).unwrap())
                / (g.geodesic_radius(r + h).unwrap() - g.geodesic_radius(r - h).unwrap());
            let a = g.sphere_area(r).unwrap();
            assert!((dv - a).abs() < 1e-7 * a);
        }
    }

    #[test]
    fn sampled_conformal_matches_family() {
        let g = RadialMetric::smoothed_schwarzschild(0.2, 1.0).unwrap();
        let grid = log_grid(1e-3, 1e3, 800);
        let vals = grid.iter().map(|&r| g.factor(r).0).collect();
        let slopes = grid.iter().map(|&r| g.factor(r).1).collect();
        let p = RadialProfile::with_slopes(grid, vals, slopes).unwrap();
        let gs = RadialMetric::from_conformal_profile(p).unwrap();
        let (a, b) = (g.ball_volume(2.0).unwrap(), gs.ball_volume(2.0).unwrap());
        assert!((a - b).abs() < 1e-9 * a);
        assert!((g.sphere_area(5e3).unwrap() - gs.sphere_area(5e3).unwrap()).abs() / g.area(5e3) < 1e-6);
    }

    #[test]
    fn warped_profile_validation() {
        let bad = RadialProfile::with_slopes(vec![0.0, 1.0], vec![0.0, 2.0], vec![2.0, 2.0]).unwrap();
        assert!(RadialMetric::from_warped_profile(bad).is_err());
        let ok = RadialProfile::with_slopes(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0], vec![1.0; 3]).unwrap();
        let w = RadialMetric::from_warped_profile(ok).unwrap();
        assert!(w.scalar_curvature(1.5).unwrap().abs() < 1e-14);
    }
}
