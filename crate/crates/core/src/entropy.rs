//! Perelman's W-functional on radial data and the rearrangement bound
//! `μ(g, τ) ≥ 3 log η`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{Caveat, Certificate};
use crate::error::{Error, Result};
use crate::manifold::RadialMetric;
use crate::profile::{log_grid, RadialProfile};
use crate::quadrature::{gauss_legendre, integrate, QuadOptions};

/// Nodes per datum grid.
pub const DATUM_NODES: usize = 2000;
/// Relative tolerance on `∫u² dv = (4πτ)^{3/2}`.
pub const NORMALIZATION_TOL: f64 = 1e-8;
/// Levels used by the distribution-function fallback of [`rearrange`].
pub const FALLBACK_LEVELS: usize = 1024;

/// Cumulative ball volumes at the nodes of `grid`.
fn volume_table(metric: &RadialMetric, grid: &[f64]) -> Result<Vec<f64>> {
    let mut v = metric.ball_volume(grid[0])?;
    let mut out = Vec::with_capacity(grid.len());
    out.push(v);
    for w in grid.windows(2) {
        v += integrate(|t| metric.volume_density(t), w[0], w[1], QuadOptions::with_rel_tol(1e-14))?.value;
        out.push(v);
    }
    Ok(out)
}

fn volume_radius(v: f64) -> f64 {
    (3.0 * v / (4.0 * PI)).cbrt()
}

/// Sum of `f(x, u, u')` against GL nodes over every cell of a profile.
fn cell_sum<F: Fn(f64, f64, f64) -> f64>(u: &RadialProfile, f: F) -> f64 {
    let gl = gauss_legendre(8);
    let g = u.grid();
    let mut total = 0.0;
    for w in g.windows(2) {
        let h = w[1] - w[0];
        let mut s = 0.0;
        for &(xi, wi) in &gl {
            let x = w[0] + 0.5 * (xi + 1.0) * h;
            let (v, d, _) = u.eval_all(x);
            s += wi * f(x, v, d);
        }
        total += 0.5 * h * s;
    }
    total
}

fn u2_log_u(u: f64) -> f64 {
    if u > 0.0 {
        u * u * u.ln()
    } else {
        0.0
    }
}

/// Normalized radial datum `u = e^{-f/2}` on a metric at scale `τ`.
///
/// `u` is held constant below the first grid node and vanishes beyond the
/// last one.
#[derive(Debug, Clone)]
pub struct EntropyDatum {
    metric: RadialMetric,
    tau: f64,
    u: RadialProfile,
    cap_volume: f64,
    cap_curvature: f64,
    label: String,
}

impl EntropyDatum {
    /// Wrap `u` as given; fails unless `∫u² dv = (4πτ)^{3/2}` to [`NORMALIZATION_TOL`].
    pub fn new(metric: &RadialMetric, tau: f64, u: RadialProfile) -> Result<Self> {
        let d = Self::unchecked(metric, tau, u, "profile")?;
        let target = (4.0 * PI * tau).powf(1.5);
        let mass = d.mass();
        if ((mass - target) / target).abs() > NORMALIZATION_TOL {
            return Err(Error::Precondition(format!(
                "datum not normalized: ∫u² dv = {mass}, expected (4πτ)^(3/2) = {target}"
            )));
        }
        Ok(d)
    }

    /// Rescale `u` so that the normalization holds.
    pub fn normalized(metric: &RadialMetric, tau: f64, u: RadialProfile, label: &str) -> Result<Self> {
        let d = Self::unchecked(metric, tau, u, label)?;
        let mass = d.mass();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::domain("datum has no mass"));
        }
        let c = ((4.0 * PI * tau).powf(1.5) / mass).sqrt();
        let u = d.u.dilate(1.0, c);
        Ok(Self { u, ..d })
    }

    fn unchecked(metric: &RadialMetric, tau: f64, u: RadialProfile, label: &str) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::domain(format!("τ = {tau} must be positive")));
        }
        if u.grid()[0] <= 0.0 || u.values().iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::domain("datum needs a positive grid and u ≥ 0"));
        }
        let x0 = u.grid()[0];
        let cap_volume = metric.ball_volume(x0)?;
        let cap_curvature = metric
            .integrate_native(|x| metric.scalar_curvature(x.max(1e-300)).unwrap_or(0.0) * metric.volume_density(x), 0.0, x0)?
            .value;
        Ok(Self {
            metric: metric.clone(),
            tau,
            u,
            cap_volume,
            cap_curvature,
            label: label.to_string(),
        })
    }

    /// Radial profile `c·g(ρ(x)/√σ)` on the native grid, `ρ` the volume radius.
    fn from_shape<G, D>(metric: &RadialMetric, tau: f64, sigma: f64, hi: f64, g: G, dg: D, label: String) -> Result<Self>
    where
        G: Fn(f64) -> f64,
        D: Fn(f64) -> f64,
    {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("σ = {sigma} must be positive")));
        }
        let sq = sigma.sqrt();
        let grid = log_grid(1e-3 * sq, hi * sq, DATUM_NODES);
        let vol = volume_table(metric, &grid)?;
        let mut values = Vec::with_capacity(grid.len());
        let mut slopes = Vec::with_capacity(grid.len());
        for (x, v) in grid.iter().zip(&vol) {
            let rho = volume_radius(*v);
            let drho = metric.volume_density(*x) / (4.0 * PI * rho * rho);
            values.push(g(rho / sq));
            slopes.push(dg(rho / sq) * drho / sq);
        }
        let u = RadialProfile::with_slopes(grid, values, slopes)?;
        Self::normalized(metric, tau, u, &label)
    }

    /// `u ∝ exp(-ρ²/(8σ))`; on flat space `f = |x|²/(4σ) + (3/2) log(σ/τ)`.
    pub fn gaussian(metric: &RadialMetric, tau: f64, sigma: f64) -> Result<Self> {
        Self::from_shape(
            metric,
            tau,
            sigma,
            40.0,
            |z| (-z * z / 8.0).exp(),
            |z| -z / 4.0 * (-z * z / 8.0).exp(),
            format!("gaussian(sigma={sigma})"),
        )
    }

    /// `u ∝ (1 + ρ²/σ)^{-2}`, the fourth power of the unit extremal profile.
    pub fn bump(metric: &RadialMetric, tau: f64, sigma: f64) -> Result<Self> {
        Self::from_shape(
            metric,
            tau,
            sigma,
            1e3,
            |z| (1.0 + z * z).powi(-2),
            |z| -4.0 * z * (1.0 + z * z).powi(-3),
            format!("bump(sigma={sigma})"),
        )
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.u
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `∫u² dv`.
    pub fn mass(&self) -> f64 {
        let g = &self.metric;
        let u0 = self.u.values()[0];
        cell_sum(&self.u, |x, v, _| v * v * g.volume_density(x)) + u0 * u0 * self.cap_volume
    }

    fn prefactor(&self) -> f64 {
        (4.0 * PI * self.tau).powf(-1.5)
    }

    fn curvature(&self, x: f64) -> f64 {
        self.metric.scalar_curvature(x).unwrap_or(0.0)
    }

    /// `(4πτ)^{-3/2} ∫ [4τ|∇u|² + τRu² - 2u² log u - 3u²] dv`.
    pub fn w_u_form(&self) -> f64 {
        let (g, tau) = (&self.metric, self.tau);
        let body = cell_sum(&self.u, |x, v, d| {
            4.0 * tau * d * d * g.energy_density(x)
                + (tau * self.curvature(x) * v * v - 2.0 * u2_log_u(v) - 3.0 * v * v) * g.volume_density(x)
        });
        let u0 = self.u.values()[0];
        let cap = tau * self.cap_curvature * u0 * u0 - (2.0 * u2_log_u(u0) + 3.0 * u0 * u0) * self.cap_volume;
        self.prefactor() * (body + cap)
    }

    /// `(4πτ)^{-3/2} ∫ [τ(|∇f|² + R) + f - 3] e^{-f} dv` with `f = -2 log u`.
    pub fn w_f_form(&self) -> f64 {
        let (g, tau) = (&self.metric, self.tau);
        let term = |x: f64, v: f64, d: f64, grad: bool| -> f64 {
            if v <= 0.0 {
                return 0.0;
            }
            let f = -2.0 * v.ln();
            let ef = (-f).exp();
            let df = -2.0 * d / v;
            // |∇f|²_g dv = (df/dx)² (A / (ds/dx)) dx
            let gradient = if grad { tau * df * df * g.energy_density(x) } else { 0.0 };
            gradient * ef + (tau * self.curvature(x) + f - 3.0) * ef * g.volume_density(x)
        };
        let body = cell_sum(&self.u, |x, v, d| term(x, v, d, true));
        let u0 = self.u.values()[0];
        let cap = if u0 > 0.0 {
            let f = -2.0 * u0.ln();
            let ef = (-f).exp();
            tau * self.cap_curvature * ef + (f - 3.0) * ef * self.cap_volume
        } else {
            0.0
        };
        self.prefactor() * (body + cap)
    }
}

/// `W(g, f, τ)` in both algebraic forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WValue {
    pub f_form: f64,
    pub u_form: f64,
}

impl WValue {
    pub fn value(&self) -> f64 {
        self.u_form
    }
    pub fn discrepancy(&self) -> f64 {
        (self.f_form - self.u_form).abs()
    }
}

pub fn w_functional(datum: &EntropyDatum) -> WValue {
    WValue {
        f_form: datum.w_f_form(),
        u_form: datum.w_u_form(),
    }
}

/// Rearranged profile `ū` on flat space, as a function of `ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rearrangement {
    pub profile: RadialProfile,
    /// Set when `u` was not monotone and the level-set construction was used.
    pub fallback: bool,
}

/// Decreasing rearrangement onto flat space. For nonincreasing `u` this is
/// the volume transport `ū(ρ(x)) = u(x)`, `(4π/3)ρ³ = V(x)`.
pub fn rearrange(metric: &RadialMetric, u: &RadialProfile) -> Result<Rearrangement> {
    let grid = u.grid();
    let vol = volume_table(metric, grid)?;
    let monotone = u.values().windows(2).all(|w| w[1] <= w[0]) && u.slopes().iter().all(|d| *d <= 0.0);
    if monotone {
        let rho: Vec<f64> = vol.iter().map(|v| volume_radius(*v)).collect();
        let slopes = grid
            .iter()
            .zip(&rho)
            .zip(u.slopes())
            .map(|((x, r), d)| d * 4.0 * PI * r * r / metric.volume_density(*x))
            .collect();
        return Ok(Rearrangement {
            profile: RadialProfile::with_slopes(rho, u.values().to_vec(), slopes)?,
            fallback: false,
        });
    }
    level_set_rearrangement(metric, u, &vol)
}

fn level_set_rearrangement(metric: &RadialMetric, u: &RadialProfile, vol: &[f64]) -> Result<Rearrangement> {
    let grid = u.grid();
    // u is taken linear on each sub-interval, so its volume spreads evenly
    // over the value range it spans; the distribution function is then a
    // piecewise-linear function of the level, swept from the top down
    let sub = 64;
    let flat_tol = 1e-14 * u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut events: Vec<(f64, f64, f64)> = Vec::new();
    events.push((u.values()[0], 0.0, vol[0]));
    let mut ua = u.values()[0];
    for i in 0..grid.len() - 1 {
        let h = (grid[i + 1] - grid[i]) / sub as f64;
        for k in 0..sub {
            let xa = grid[i] + k as f64 * h;
            let ub = if k + 1 == sub { u.values()[i + 1] } else { u.eval(xa + h) };
            let dv = metric.volume_density(xa + 0.5 * h) * h;
            let (lo, hi) = if ua <= ub { (ua, ub) } else { (ub, ua) };
            if hi - lo <= flat_tol {
                events.push((hi, 0.0, dv));
            } else {
                let rate = dv / (hi - lo);
                events.push((hi, rate, 0.0));
                events.push((lo, -rate, 0.0));
            }
            ua = ub;
        }
    }
    let top = events.iter().map(|e| e.0).fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::domain("cannot rearrange the zero function"));
    }
    events.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut cum: Vec<(f64, f64)> = Vec::new();
    let (mut acc, mut rate, mut prev) = (0.0, 0.0, top);
    let mut e = 0;
    while e < events.len() {
        let t = events[e].0;
        if t <= 0.0 {
            break;
        }
        acc += rate * (prev - t);
        prev = t;
        while e < events.len() && events[e].0 == t {
            rate += events[e].1;
            acc += events[e].2;
            e += 1;
        }
        cum.push((volume_radius(acc), t));
    }
    // levels: half evenly spaced in ρ, half evenly spaced in value
    let (first, last) = (cum[0].0, cum[cum.len() - 1].0);
    let half = FALLBACK_LEVELS / 2;
    let mut picks: Vec<usize> = Vec::with_capacity(FALLBACK_LEVELS);
    let mut j = 0;
    for k in 0..half {
        let target = first + (last - first) * k as f64 / (half - 1) as f64;
        while j + 1 < cum.len() && cum[j].0 < target {
            j += 1;
        }
        picks.push(j);
    }
    j = 0;
    for k in 0..half {
        let level = top * (1.0 - k as f64 / half as f64);
        while j + 1 < cum.len() && cum[j].1 > level {
            j += 1;
        }
        picks.push(j);
    }
    picks.push(cum.len() - 1);
    picks.sort_unstable();
    picks.dedup();
    let mut rho = Vec::with_capacity(picks.len());
    let mut val = Vec::with_capacity(picks.len());
    for k in picks {
        let (r, v) = cum[k];
        if rho.last().is_none_or(|prev| r > *prev) {
            rho.push(r);
            val.push(v);
        }
    }
    Ok(Rearrangement {
        profile: RadialProfile::monotone(rho, val)?,
        fallback: true,
    })
}

/// `(∫ū², ∫ū² log ū, ∫|∇ū|²)` on flat space, `ū` constant inside its first node.
fn flat_integrals(p: &RadialProfile) -> (f64, f64, f64) {
    let w = |r: f64| 4.0 * PI * r * r;
    let r0 = p.grid()[0];
    let u0 = p.values()[0];
    let cap = 4.0 * PI * r0.powi(3) / 3.0;
    (
        cell_sum(p, |r, v, _| v * v * w(r)) + u0 * u0 * cap,
        cell_sum(p, |r, v, _| u2_log_u(v) * w(r)) + u2_log_u(u0) * cap,
        cell_sum(p, |r, _, d| d * d * w(r)),
    )
}

/// `(∫u², ∫u² log u, ∫|∇u|²)` on the metric, `u` constant inside its first node.
fn metric_integrals(metric: &RadialMetric, u: &RadialProfile) -> Result<(f64, f64, f64)> {
    let u0 = u.values()[0];
    let cap = metric.ball_volume(u.grid()[0])?;
    Ok((
        cell_sum(u, |x, v, _| v * v * metric.volume_density(x)) + u0 * u0 * cap,
        cell_sum(u, |x, v, _| u2_log_u(v) * metric.volume_density(x)) + u2_log_u(u0) * cap,
        cell_sum(u, |x, _, d| d * d * metric.energy_density(x)),
    ))
}

/// Check the two equimeasurability identities and
/// `∫|∇u|² dv ≥ η² ∫|∇ū|² dv_euc`.
pub fn verify_rearrangement(metric: &RadialMetric, u: &RadialProfile, eta: f64, tol: f64) -> Result<Certificate> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!("η = {eta} outside (0, 1]")));
    }
    let r = rearrange(metric, u)?;
    let (m2, mlog, mgrad) = metric_integrals(metric, u)?;
    let (f2, flog, fgrad) = flat_integrals(&r.profile);
    let log_scale = cell_sum(u, |x, v, _| u2_log_u(v).abs() * metric.volume_density(x)).max(f64::MIN_POSITIVE);
    let eq_tol = if r.fallback { 1e-6 } else { tol.max(1e-8) };
    let parts = [
        Certificate::equal("rearrangement_l2", (m2 - f2) / m2, 0.0, eq_tol),
        Certificate::equal("rearrangement_entropy", (mlog - flog) / log_scale, 0.0, eq_tol),
        Certificate::at_least("rearrangement_gradient", mgrad / (eta * eta * fgrad), 1.0, tol)
            .param("gradient_metric", mgrad)
            .param("gradient_flat", fgrad),
    ];
    let mut cert = Certificate::bundle("rearrangement", &parts)
        .param("eta", eta)
        .input("metric", metric.describe());
    if r.fallback {
        cert.flag(Caveat::LevelSetFallback);
    }
    Ok(cert)
}

/// `3 log η`, the lower bound on `μ(g, τ)` for every `τ > 0`.
pub fn entropy_lower_bound(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!("η = {eta} outside (0, 1]")));
    }
    Ok(3.0 * eta.ln())
}

/// Test family for `μ`: Gaussians and bumps with `σ/τ` on given grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyFamily {
    pub gaussian_ratios: Vec<f64>,
    pub bump_ratios: Vec<f64>,
}

impl Default for EntropyFamily {
    fn default() -> Self {
        let mut gaussian_ratios = log_grid(0.05, 20.0, 25);
        gaussian_ratios.push(1.0);
        gaussian_ratios.sort_by(f64::total_cmp);
        Self {
            gaussian_ratios,
            bump_ratios: log_grid(0.1, 10.0, 9),
        }
    }
}

/// Family member and its W value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyValue {
    pub label: String,
    pub sigma: f64,
    pub w: WValue,
}

/// Minimum of W over a family: an upper bound on `μ(g, τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuEstimate {
    pub tau: f64,
    pub value: f64,
    pub best: String,
    pub members: Vec<FamilyValue>,
}

pub fn mu_estimate(metric: &RadialMetric, tau: f64, family: &EntropyFamily) -> Result<MuEstimate> {
    let specs: Vec<(bool, f64)> = family
        .gaussian_ratios
        .iter()
        .map(|r| (true, *r))
        .chain(family.bump_ratios.iter().map(|r| (false, *r)))
        .collect();
    if specs.is_empty() {
        return Err(Error::Config("entropy family is empty".into()));
    }
    let members = specs
        .par_iter()
        .map(|&(gauss, ratio)| {
            let sigma = ratio * tau;
            let d = if gauss {
                EntropyDatum::gaussian(metric, tau, sigma)?
            } else {
                EntropyDatum::bump(metric, tau, sigma)?
            };
            Ok(FamilyValue {
                label: d.label().to_string(),
                sigma,
                w: w_functional(&d),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (k, m) in members.iter().enumerate() {
        if m.w.value() < members[best].w.value() {
            best = k;
        }
    }
    Ok(MuEstimate {
        tau,
        value: members[best].w.value(),
        best: members[best].label.clone(),
        members,
    })
}

/// `ν(g, τ) ≈ min_{t ≤ τ} μ(g, t)` over `t ∈ [10⁻²τ, τ]`.
pub fn nu_estimate(metric: &RadialMetric, tau: f64, family: &EntropyFamily) -> Result<f64> {
    let ts = log_grid(1e-2 * tau, tau, 8);
    let mut best = f64::INFINITY;
    for t in ts {
        best = best.min(mu_estimate(metric, t, family)?.value);
    }
    Ok(best)
}

/// Check `μ(g, τ) ≥ 3 log η` on the family estimate.
pub fn check_entropy_bound(metric: &RadialMetric, tau: f64, eta: f64, family: &EntropyFamily, tol: f64) -> Result<Certificate> {
    let mu = mu_estimate(metric, tau, family)?;
    let bound = entropy_lower_bound(eta)?;
    Ok(Certificate::at_least("entropy_bound", mu.value, bound, tol)
        .param("tau", tau)
        .param("eta", eta)
        .input("best_member", mu.best)
        .input("metric", metric.describe())
        .with_caveat(Caveat::CenteredBallSurrogate))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_w(sigma: f64, tau: f64) -> f64 {
        1.5 * (tau / sigma + (sigma / tau).ln() - 1.0)
    }

    #[test]
    fn flat_gaussians_match_closed_form() {
        let g = RadialMetric::flat();
        let d = EntropyDatum::gaussian(&g, 1.0, 1.0).unwrap();
        let w = w_functional(&d);
        assert!(w.u_form.abs() < 1e-8 && w.f_form.abs() < 1e-8, "{w:?}");
        for (sigma, tau) in [(2.0, 1.0), (0.5, 1.0), (3.0, 0.7)] {
            let d = EntropyDatum::gaussian(&g, tau, sigma).unwrap();
            let w = w_functional(&d);
            assert!((w.u_form - gaussian_w(sigma, tau)).abs() < 1e-8, "σ={sigma}: {w:?}");
            assert!(w.discrepancy() < 1e-8);
        }
    }

    #[test]
    fn normalization_is_enforced() {
        let g = RadialMetric::flat();
        let d = EntropyDatum::gaussian(&g, 2.0, 1.0).unwrap();
        assert!((d.mass() / (8.0 * PI).powf(1.5) - 1.0).abs() < 1e-12);
        let off = d.profile().dilate(1.0, 1.01);
        assert!(matches!(EntropyDatum::new(&g, 2.0, off), Err(Error::Precondition(_))));
        assert!(EntropyDatum::new(&g, 2.0, d.profile().clone()).is_ok());
    }

    #[test]
    fn forms_agree_on_curved_metric() {
        let g = RadialMetric::smoothed_schwarzschild(0.3, 1.0).unwrap();
        for d in [EntropyDatum::gaussian(&g, 1.0, 0.8).unwrap(), EntropyDatum::bump(&g, 1.0, 0.5).unwrap()] {
            let w = w_functional(&d);
            assert!(w.discrepancy() < 1e-8 * w.u_form.abs().max(1.0), "{w:?}");
        }
    }

    #[test]
    fn flat_rearrangement_is_identity() {
        let g = RadialMetric::flat();
        let d = EntropyDatum::gaussian(&g, 1.0, 1.0).unwrap();
        let r = rearrange(&g, d.profile()).unwrap();
        assert!(!r.fallback);
        for (a, b) in r.profile.grid().iter().zip(d.profile().grid()) {
            assert!((a - b).abs() < 1e-12 * b);
        }
        let c = verify_rearrangement(&g, d.profile(), 1.0, 1e-8).unwrap();
        assert!(c.passed, "{c:?}");
    }

    #[test]
    fn curved_rearrangement_holds() {
        let g = RadialMetric::smoothed_schwarzschild(0.1, 1.0).unwrap();
        let p = crate::isoperimetric::profile_centered(&g).unwrap();
        let eta = crate::isoperimetric::iso_ratio(&p);
        assert!(eta < 1.0);
        let d = EntropyDatum::gaussian(&g, 1.0, 1.0).unwrap();
        let c = verify_rearrangement(&g, d.profile(), eta, 1e-8).unwrap();
        assert!(c.passed, "{c:?}");
    }

    #[test]
    fn far_profile_fails_with_unit_eta() {
        let g = RadialMetric::smoothed_schwarzschild(0.3, 1.0).unwrap();
        let d = EntropyDatum::gaussian(&g, 1e4, 1e4).unwrap();
        let c = verify_rearrangement(&g, d.profile(), 1.0, 1e-8).unwrap();
        assert!(!c.passed, "{c:?}");
    }

    #[test]
    fn level_set_fallback() {
        let g = RadialMetric::flat();
        let grid = log_grid(1e-3, 40.0, 1500);
        let vals: Vec<f64> = grid.iter().map(|r| (-(r - 2.0) * (r - 2.0)).exp()).collect();
        let der: Vec<f64> = grid.iter().map(|r| -2.0 * (r - 2.0) * (-(r - 2.0) * (r - 2.0)).exp()).collect();
        let u = RadialProfile::with_slopes(grid, vals, der).unwrap();
        let r = rearrange(&g, &u).unwrap();
        assert!(r.fallback);
        let (a, _, _) = metric_integrals(&g, &u).unwrap();
        let (b, _, _) = flat_integrals(&r.profile);
        assert!((a - b).abs() < 1e-6 * a, "{a} {b}");
    }

    #[test]
    fn lower_bound_values() {
        assert_eq!(entropy_lower_bound(1.0).unwrap(), 0.0);
        assert!((entropy_lower_bound((-1.0f64).exp()).unwrap() + 3.0).abs() < 1e-15);
        assert!(entropy_lower_bound(0.0).is_err());
        assert!(entropy_lower_bound(1.5).is_err());
        assert!(entropy_lower_bound(0.3).unwrap() < entropy_lower_bound(0.6).unwrap());
    }

    #[test]
    fn mu_is_scale_invariant() {
        let g = RadialMetric::smoothed_schwarzschild(0.1, 1.0).unwrap();
        let fam = EntropyFamily {
            gaussian_ratios: vec![0.5, 1.0],
            bump_ratios: vec![1.0],
        };
        let a = mu_estimate(&g, 1.0, &fam).unwrap();
        let b = mu_estimate(&g.dilate(3.0).unwrap(), 9.0, &fam).unwrap();
        assert!((a.value - b.value).abs() < 1e-8, "{} {}", a.value, b.value);
    }
}
