//! Isoperimetric profile of centered balls and its Euclidean comparisons.
//!
//! The centered-ball profile `v ↦ A` bounds the true profile from above.
//! Certificates built on it carry [`Caveat::CenteredBallSurrogate`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::certificate::{Caveat, Certificate};
use crate::constants::EUCLIDEAN_ISO_CONSTANT;
use crate::error::{Error, Result};
use crate::manifold::RadialMetric;
use crate::profile::{log_grid, RadialProfile};
use crate::quadrature::{integrate, QuadOptions};

/// Default number of radii in [`profile_centered`].
pub const DEFAULT_NODES: usize = 4001;

/// `I_euc(v) = (36π)^{1/3} v^{2/3}`.
pub fn euclidean_profile(v: f64) -> f64 {
    EUCLIDEAN_ISO_CONSTANT * v.powf(2.0 / 3.0)
}

/// Tabulated `(v, A)` for centered balls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoProfile {
    pub metric: String,
    /// Native radius of each sphere.
    pub radius: Vec<f64>,
    pub geodesic_radius: Vec<f64>,
    pub volume: Vec<f64>,
    pub area: Vec<f64>,
    /// `dA/dv` by the chain rule, equal to the mean curvature `2φ'/φ`.
    pub slope: Vec<f64>,
}

fn piece<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64> {
    Ok(integrate(f, a, b, QuadOptions::with_rel_tol(1e-14))?.value)
}

impl IsoProfile {
    /// Profile from a raw `(v, A)` table; slopes by monotone cubic
    /// differentiation of `log A` against `log v`.
    pub fn from_table(metric: impl Into<String>, volume: Vec<f64>, area: Vec<f64>) -> Result<Self> {
        if volume.len() != area.len() || volume.len() < 3 {
            return Err(Error::Config("profile table needs ≥ 3 matching (v, A) rows".into()));
        }
        if volume.windows(2).any(|w| !(w[1] > w[0])) || volume[0] <= 0.0 || area.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Config("profile table needs increasing v > 0 and A > 0".into()));
        }
        let slope = log_log_slopes(&volume, &area)?;
        Ok(Self {
            metric: metric.into(),
            radius: vec![f64::NAN; volume.len()],
            geodesic_radius: vec![f64::NAN; volume.len()],
            volume,
            area,
            slope,
        })
    }

    pub fn len(&self) -> usize {
        self.volume.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volume.is_empty()
    }

    /// `dA/dv` by monotone cubic differentiation of the tabulated `(v, A)`.
    pub fn numerical_slopes(&self) -> Result<Vec<f64>> {
        log_log_slopes(&self.volume, &self.area)
    }

    /// Copy with `A` multiplied by `1 - depth·exp(-(log(v/v*))²/0.5)`.
    pub fn pinched(&self, center_volume: f64, depth: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.len() {
            let v = self.volume[i];
            let z = (v / center_volume).ln();
            let g = (-z * z / 0.5).exp();
            let p = 1.0 - depth * g;
            let dp = depth * g * 4.0 * z / v;
            out.area[i] = self.area[i] * p;
            out.slope[i] = self.slope[i] * p + self.area[i] * dp;
        }
        out.metric = format!("{} (pinched at v={center_volume}, depth {depth})", self.metric);
        out
    }

    /// Rows `(s, r, v, A, dA/dv)`.
    pub fn table(&self) -> Vec<[f64; 5]> {
        (0..self.len())
            .map(|i| [self.geodesic_radius[i], self.radius[i], self.volume[i], self.area[i], self.slope[i]])
            .collect()
    }
}

fn log_log_slopes(volume: &[f64], area: &[f64]) -> Result<Vec<f64>> {
    let lv: Vec<f64> = volume.iter().map(|v| v.ln()).collect();
    let la: Vec<f64> = area.iter().map(|a| a.ln()).collect();
    let p = RadialProfile::monotone(lv, la)?;
    Ok(p.slopes()
        .iter()
        .zip(volume.iter().zip(area))
        .map(|(d, (v, a))| d * a / v)
        .collect())
}

/// Centered-ball profile on `nodes` radii, geometric in `[10⁻³ℓ, 10⁴ℓ]`.
pub fn profile_centered(metric: &RadialMetric) -> Result<IsoProfile> {
    profile_centered_with(metric, DEFAULT_NODES, 1e-3, 1e4)
}

pub fn profile_centered_with(metric: &RadialMetric, nodes: usize, lo_factor: f64, hi_factor: f64) -> Result<IsoProfile> {
    if nodes < 3 {
        return Err(Error::Config("profile needs at least 3 radii".into()));
    }
    let ell = metric.length_scale();
    let radius = log_grid(lo_factor * ell, hi_factor * ell, nodes);
    let mut volume = Vec::with_capacity(nodes);
    let mut geodesic = Vec::with_capacity(nodes);
    let mut v = metric.ball_volume(radius[0])?;
    let mut s = metric.geodesic_radius(radius[0])?;
    for (i, &x) in radius.iter().enumerate() {
        if i > 0 {
            let a = radius[i - 1];
            v += piece(|t| metric.volume_density(t), a, x)?;
            s += piece(|t| metric.ds_dx(t), a, x)?;
        }
        volume.push(v);
        geodesic.push(s);
    }
    let area = radius.iter().map(|&x| metric.area(x)).collect();
    let slope = radius
        .iter()
        .map(|&x| metric.mean_curvature_sphere(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(IsoProfile {
        metric: metric.describe(),
        radius,
        geodesic_radius: geodesic,
        volume,
        area,
        slope,
    })
}

fn contraction(eps: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::domain(format!("ε = {eps} must be nonnegative")));
    }
    Ok((1.0 - 2.0 * eps).max(0.0))
}

fn finish(mut cert: Certificate, eps: f64, profile: &IsoProfile) -> Certificate {
    cert = cert
        .param("epsilon", eps)
        .input("metric", profile.metric.clone())
        .with_caveat(Caveat::CenteredBallSurrogate);
    if eps >= 0.5 {
        cert.flag(Caveat::Vacuous);
    }
    cert
}

/// Check `dA/dv ≥ (1-2ε)√(16π/A)` at every tabulated volume, reported as
/// the minimum ratio of the two sides against 1.
pub fn check_differential_inequality(profile: &IsoProfile, eps: f64, tol: f64) -> Result<Certificate> {
    let k = contraction(eps)?;
    let mut worst = (f64::INFINITY, 0.0);
    for i in 0..profile.len() {
        let rhs = k * (16.0 * PI / profile.area[i]).sqrt();
        let ratio = if rhs > 0.0 { profile.slope[i] / rhs } else { f64::INFINITY };
        if ratio < worst.0 {
            worst = (ratio, profile.volume[i]);
        }
    }
    let lhs = if worst.0.is_finite() { worst.0 } else { 1.0 };
    let cert = Certificate::at_least("iso_differential_inequality", lhs, 1.0, tol).param("worst_volume", worst.1);
    Ok(finish(cert, eps, profile))
}

/// `y(v) = (1-2ε)^{2/3} (36π)^{1/3} v^{2/3}`, the solution of
/// `y' = (1-2ε)√(16π/y)`, `y(0) = 0`.
pub fn ode_comparison_solution(eps: f64, v: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::domain(format!("ε = {eps} outside [0, 1/2)")));
    }
    if !(v >= 0.0) {
        return Err(Error::domain(format!("volume {v} must be nonnegative")));
    }
    Ok((1.0 - 2.0 * eps).powf(2.0 / 3.0) * euclidean_profile(v))
}

/// `y'(v) - (1-2ε)√(16π/y(v))` relative to `y'(v)`, with `y'` from the closed form.
pub fn ode_residual(eps: f64, v: f64) -> Result<f64> {
    let y = ode_comparison_solution(eps, v)?;
    let dy = 2.0 * y / (3.0 * v);
    Ok((dy - (1.0 - 2.0 * eps) * (16.0 * PI / y).sqrt()) / dy)
}

/// Check `A(v) ≥ (1-2ε)^{2/3} I_euc(v)` on the table, as a minimum ratio.
pub fn compare_euclidean(profile: &IsoProfile, eps: f64, tol: f64) -> Result<Certificate> {
    let k = contraction(eps)?.powf(2.0 / 3.0);
    let mut worst = (f64::INFINITY, 0.0);
    for i in 0..profile.len() {
        let rhs = k * euclidean_profile(profile.volume[i]);
        let ratio = if rhs > 0.0 { profile.area[i] / rhs } else { f64::INFINITY };
        if ratio < worst.0 {
            worst = (ratio, profile.volume[i]);
        }
    }
    let lhs = if worst.0.is_finite() { worst.0 } else { 1.0 };
    let cert = Certificate::at_least("iso_euclidean_comparison", lhs, 1.0, tol).param("worst_volume", worst.1);
    Ok(finish(cert, eps, profile))
}

/// `inf A(v) / v^{2/3}` over the table.
pub fn iso_constant(profile: &IsoProfile) -> f64 {
    profile
        .volume
        .iter()
        .zip(&profile.area)
        .map(|(v, a)| a / v.powf(2.0 / 3.0))
        .fold(f64::INFINITY, f64::min)
}

/// `η = c_iso / (36π)^{1/3}`.
pub fn iso_ratio(profile: &IsoProfile) -> f64 {
    iso_constant(profile) / EUCLIDEAN_ISO_CONSTANT
}
