//! Sobolev quotients of radial functions and the radial optimal constant.
//!
//! The minimization uses a cubic Hermite discretization on a geometric grid.
//! Below the first node the function is held constant; beyond the last node
//! it continues as `v_N x_N / x`. Every discrete state is therefore an
//! admissible test function, so the computed minimum bounds the radial
//! infimum from above.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::euclidean_sobolev_constant;
use crate::error::{Error, Result};
use crate::linalg::{BandedCholesky, BandedSym};
use crate::manifold::RadialMetric;
use crate::profile::{log_grid, RadialFn, RadialProfile};
use crate::quadrature::gauss_legendre;
use crate::willmore::BetaProfile;

/// `Λ = 3(π/2)^{4/3}`.
pub fn euclidean_constant() -> f64 {
    euclidean_sobolev_constant()
}

/// `∫|∇u|² dv / (∫u⁶ dv)^{1/3}` for a radial `u` on `[0, ∞)`.
pub fn sobolev_quotient<R: RadialFn + ?Sized>(metric: &RadialMetric, u: &R) -> Result<f64> {
    let grad = metric.integrate_native_to_infinity(|x| u.derivative(x).powi(2) * metric.energy_density(x), 0.0)?;
    let l6 = metric.integrate_native_to_infinity(|x| u.value(x).powi(6) * metric.volume_density(x), 0.0)?;
    if !(grad.value.is_finite() && l6.value.is_finite() && l6.value > 0.0) {
        return Err(Error::domain("Sobolev integrals of the test function diverge or vanish"));
    }
    Ok(grad.value / l6.value.cbrt())
}

/// A sampled profile extended by a constant below its grid and by
/// `u_N x_N / x` above it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedProfile {
    pub profile: RadialProfile,
}

impl RadialFn for ExtendedProfile {
    fn value(&self, x: f64) -> f64 {
        let (lo, hi) = self.profile.domain();
        if x < lo {
            self.profile.values()[0]
        } else if x > hi {
            self.profile.values()[self.profile.values().len() - 1] * hi / x
        } else {
            self.profile.eval(x)
        }
    }
    fn derivative(&self, x: f64) -> f64 {
        let (lo, hi) = self.profile.domain();
        if x < lo {
            0.0
        } else if x > hi {
            -self.profile.values()[self.profile.values().len() - 1] * hi / (x * x)
        } else {
            self.profile.eval_all(x).1
        }
    }
}

/// Discretization and stopping parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevOptions {
    pub nodes: usize,
    /// Grid spans `[lo_factor ℓ, hi_factor ℓ]` with `ℓ` the metric length scale.
    pub lo_factor: f64,
    pub hi_factor: f64,
    pub betas: Vec<f64>,
    pub max_iter: usize,
    /// Target for `‖∇Q‖_{K⁻¹} / ‖z‖_K`.
    pub tol: f64,
}

impl Default for SobolevOptions {
    fn default() -> Self {
        Self {
            nodes: 2048,
            lo_factor: 1e-3,
            hi_factor: 1e4,
            betas: vec![1.0, 3.0, 10.0, 30.0],
            max_iter: 20_000,
            tol: 1e-6,
        }
    }
}

/// The discrete quotient `Q(z) = zᵀKz / N(z)^{1/3}` over Hermite degrees of
/// freedom `z = (v₀, d₀, v₁, d₁, …)`.
#[derive(Debug, Clone)]
pub struct DiscreteQuotient {
    grid: Vec<f64>,
    stiffness: BandedSym,
    factor: BandedCholesky,
    /// Per quadrature point: cell index, four basis values, `w_N`.
    points: Vec<(usize, [f64; 4], f64)>,
    cap_volume: f64,
    tail_l6: f64,
}

fn hermite(t: f64, h: f64) -> ([f64; 4], [f64; 4]) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        [2.0 * t3 - 3.0 * t2 + 1.0, h * (t3 - 2.0 * t2 + t), -2.0 * t3 + 3.0 * t2, h * (t3 - t2)],
        [
            (6.0 * t2 - 6.0 * t) / h,
            3.0 * t2 - 4.0 * t + 1.0,
            (-6.0 * t2 + 6.0 * t) / h,
            3.0 * t2 - 2.0 * t,
        ],
    )
}

impl DiscreteQuotient {
    pub fn new(metric: &RadialMetric, opts: &SobolevOptions) -> Result<Self> {
        if opts.nodes < 3 || !(opts.lo_factor > 0.0 && opts.hi_factor > opts.lo_factor) {
            return Err(Error::Config("Sobolev grid needs ≥ 3 nodes and 0 < lo < hi".into()));
        }
        let ell = metric.length_scale();
        let grid = log_grid(opts.lo_factor * ell, opts.hi_factor * ell, opts.nodes);
        let n = grid.len();
        let gl = gauss_legendre(8);
        let mut stiffness = BandedSym::zeros(2 * n, 3);
        let mut points = Vec::with_capacity((n - 1) * gl.len());
        for i in 0..n - 1 {
            let (x0, x1) = (grid[i], grid[i + 1]);
            let h = x1 - x0;
            for &(xi, wi) in &gl {
                let t = 0.5 * (xi + 1.0);
                let x = x0 + t * h;
                let w = 0.5 * wi * h;
                let (b, db) = hermite(t, h);
                let we = w * metric.energy_density(x);
                for a in 0..4 {
                    for c in 0..=a {
                        stiffness.add(2 * i + a, 2 * i + c, we * db[a] * db[c]);
                    }
                }
                points.push((i, b, w * metric.volume_density(x)));
            }
        }
        let (x0, xn) = (grid[0], grid[n - 1]);
        let tail_energy = metric
            .integrate_native_to_infinity(|x| metric.energy_density(x) / x.powi(4), xn)?
            .value;
        stiffness.add(2 * (n - 1), 2 * (n - 1), xn * xn * tail_energy);
        let cap_volume = metric.integrate_native(|x| metric.volume_density(x), 0.0, x0)?.value;
        let tail_l6 = xn.powi(6)
            * metric
                .integrate_native_to_infinity(|x| metric.volume_density(x) / x.powi(6), xn)?
                .value;
        let factor = stiffness.cholesky()?;
        Ok(Self {
            grid,
            stiffness,
            factor,
            points,
            cap_volume,
            tail_l6,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn dofs(&self) -> usize {
        2 * self.grid.len()
    }

    /// Degrees of freedom interpolating `u` (values and slopes at nodes).
    pub fn interpolate<R: RadialFn + ?Sized>(&self, u: &R) -> Vec<f64> {
        self.grid.iter().flat_map(|&x| [u.value(x), u.derivative(x)]).collect()
    }

    /// Degrees of freedom of `s_β(x/ℓ)`, `ℓ` the metric length scale.
    pub fn seed(&self, metric: &RadialMetric, beta: f64) -> Result<Vec<f64>> {
        let p = BetaProfile::new(beta)?;
        let ell = metric.length_scale();
        Ok(self.grid.iter().flat_map(|&x| [p.s(x / ell), p.ds(x / ell) / ell]).collect())
    }

    pub fn energy(&self, z: &[f64]) -> f64 {
        self.stiffness.quad_form(z)
    }

    fn u_at(&self, z: &[f64], i: usize, b: &[f64; 4]) -> f64 {
        b[0] * z[2 * i] + b[1] * z[2 * i + 1] + b[2] * z[2 * i + 2] + b[3] * z[2 * i + 3]
    }

    /// `N(z) = ∫u⁶ dv` including the constant core and the decaying tail.
    pub fn l6(&self, z: &[f64]) -> f64 {
        let n = self.grid.len();
        let body: f64 = self.points.iter().map(|(i, b, w)| w * self.u_at(z, *i, b).powi(6)).sum();
        body + self.cap_volume * z[0].powi(6) + self.tail_l6 * z[2 * (n - 1)].powi(6)
    }

    fn l6_gradient(&self, z: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let mut g = vec![0.0; z.len()];
        for (i, b, w) in &self.points {
            let u5 = 6.0 * w * self.u_at(z, *i, b).powi(5);
            for a in 0..4 {
                g[2 * i + a] += u5 * b[a];
            }
        }
        g[0] += 6.0 * self.cap_volume * z[0].powi(5);
        g[2 * (n - 1)] += 6.0 * self.tail_l6 * z[2 * (n - 1)].powi(5);
        g
    }

    pub fn quotient(&self, z: &[f64]) -> f64 {
        self.energy(z) / self.l6(z).cbrt()
    }

    /// `∇Q = 2Kz/N^{1/3} - (E/3) N^{-4/3} ∇N`.
    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let kz = self.stiffness.matvec(z);
        let e: f64 = kz.iter().zip(z).map(|(a, b)| a * b).sum();
        let nv = self.l6(z);
        let gn = self.l6_gradient(z);
        let c1 = 2.0 / nv.cbrt();
        let c2 = e / (3.0 * nv * nv.cbrt());
        kz.iter().zip(&gn).map(|(k, g)| c1 * k - c2 * g).collect()
    }

    /// Central differences of [`Self::quotient`] with relative step `h`.
    pub fn finite_difference_gradient(&self, z: &[f64], h: f64) -> Vec<f64> {
        let scale = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (0..z.len())
            .map(|k| {
                let step = h * z[k].abs().max(1e-3 * scale);
                let mut zp = z.to_vec();
                let mut zm = z.to_vec();
                zp[k] += step;
                zm[k] -= step;
                (self.quotient(&zp) - self.quotient(&zm)) / (2.0 * step)
            })
            .collect()
    }

    /// `‖g‖_{K⁻¹} / ‖z‖_K`.
    pub fn residual(&self, z: &[f64], g: &[f64]) -> f64 {
        let kg = self.factor.solve(g);
        let num: f64 = kg.iter().zip(g).map(|(a, b)| a * b).sum();
        (num.max(0.0) / self.energy(z)).sqrt()
    }

    fn normalize(&self, z: &mut [f64]) {
        let s = self.l6(z).powf(-1.0 / 6.0);
        z.iter_mut().for_each(|v| *v *= s);
    }

    /// Stiffness-preconditioned gradient descent with Armijo backtracking,
    /// projected back onto `N(z) = 1` after each step.
    pub fn descend(&self, mut z: Vec<f64>, max_iter: usize, tol: f64) -> Descent {
        self.normalize(&mut z);
        let mut q = self.quotient(&z);
        let mut history = vec![q];
        let mut alpha: f64 = 0.5;
        let mut residual = f64::INFINITY;
        for it in 0..max_iter {
            let g = self.gradient(&z);
            let p: Vec<f64> = self.factor.solve(&g).into_iter().map(|v| -v).collect();
            let slope: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
            residual = ((-slope).max(0.0) / self.energy(&z)).sqrt();
            if residual <= tol {
                return Descent::finish(z, q, history, it, residual, true);
            }
            alpha = (2.0 * alpha).min(1.0);
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = z.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
                let qt = self.quotient(&trial);
                if qt.is_finite() && qt <= q + 1e-4 * alpha * slope {
                    z = trial;
                    self.normalize(&mut z);
                    q = self.quotient(&z);
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            history.push(q);
            if !accepted {
                // no decrease available at round-off level
                return Descent::finish(z, q, history, it + 1, residual, residual <= tol);
            }
        }
        Descent::finish(z, q, history, max_iter, residual, residual <= tol)
    }

    /// Profile with the node values and slopes of `z`.
    pub fn profile(&self, z: &[f64]) -> Result<RadialProfile> {
        let values = z.iter().step_by(2).copied().collect();
        let slopes = z.iter().skip(1).step_by(2).copied().collect();
        RadialProfile::with_slopes(self.grid.clone(), values, slopes)
    }
}

/// One descent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descent {
    pub dofs: Vec<f64>,
    pub quotient: f64,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl Descent {
    fn finish(dofs: Vec<f64>, quotient: f64, history: Vec<f64>, iterations: usize, residual: f64, converged: bool) -> Self {
        Self {
            dofs,
            quotient,
            history,
            iterations,
            residual,
            converged,
        }
    }
}

/// Best radial quotient found and its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevResult {
    pub quotient: f64,
    /// `δ̂ = Λ - quotient`.
    pub deficit: f64,
    pub minimizer: ExtendedProfile,
    /// Index into the seed list of the winning start.
    pub seed_index: usize,
    pub seed_beta: f64,
    pub seed_quotients: Vec<f64>,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Minimize the quotient over radial profiles with the default options.
pub fn optimal_radial_constant(metric: &RadialMetric) -> Result<SobolevResult> {
    optimal_radial_constant_with(metric, &SobolevOptions::default())
}

pub fn optimal_radial_constant_with(metric: &RadialMetric, opts: &SobolevOptions) -> Result<SobolevResult> {
    if opts.betas.is_empty() {
        return Err(Error::Config("at least one seed β is required".into()));
    }
    let problem = DiscreteQuotient::new(metric, opts)?;
    let runs = opts
        .betas
        .par_iter()
        .map(|&beta| {
            let z = problem.seed(metric, beta)?;
            let q0 = problem.quotient(&z);
            Ok((q0, problem.descend(z, opts.max_iter, opts.tol)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (k, (_, d)) in runs.iter().enumerate() {
        if d.quotient < runs[best].1.quotient {
            best = k;
        }
    }
    let seed_quotients = runs.iter().map(|(q, _)| *q).collect();
    let (_, run) = runs.into_iter().nth(best).expect("non-empty");
    if !run.converged {
        return Err(Error::numerical(
            format!(
                "radial Sobolev descent from β = {} stopped after {} iterations at Q = {}",
                opts.betas[best], run.iterations, run.quotient
            ),
            run.residual,
        ));
    }
    Ok(SobolevResult {
        quotient: run.quotient,
        deficit: euclidean_constant() - run.quotient,
        minimizer: ExtendedProfile {
            profile: problem.profile(&run.dofs)?,
        },
        seed_index: best,
        seed_beta: opts.betas[best],
        seed_quotients,
        history: run.history,
        iterations: run.iterations,
        residual: run.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::FnProfile;

    fn small() -> SobolevOptions {
        SobolevOptions {
            nodes: 300,
            ..SobolevOptions::default()
        }
    }

    #[test]
    fn bubbles_attain_lambda_on_flat_space() {
        let g = RadialMetric::flat();
        for beta in [0.5, 1.0, 7.0] {
            let p = BetaProfile::new(beta).unwrap();
            let q = sobolev_quotient(&g, &p).unwrap();
            assert!((q - euclidean_constant()).abs() < 1e-8, "β={beta}: {q}");
        }
    }

    #[test]
    fn bump_exceeds_lambda() {
        let g = RadialMetric::flat();
        let bump = FnProfile::new(|r: f64| (-r * r).exp(), |r: f64| -2.0 * r * (-r * r).exp());
        assert!(sobolev_quotient(&g, &bump).unwrap() > euclidean_constant() + 0.1);
    }

    #[test]
    fn quotient_is_dilation_invariant() {
        let g = RadialMetric::smoothed_schwarzschild(0.3, 1.0).unwrap();
        let lam = 3.0;
        let gl = g.dilate(lam).unwrap();
        let p = BetaProfile::new(2.0).unwrap();
        let pl = FnProfile::new(move |x: f64| p.s(x / lam), move |x: f64| p.ds(x / lam) / lam);
        let (a, b) = (sobolev_quotient(&g, &p).unwrap(), sobolev_quotient(&gl, &pl).unwrap());
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn discrete_gradient_matches_differences() {
        let g = RadialMetric::smoothed_schwarzschild(0.1, 1.0).unwrap();
        let d = DiscreteQuotient::new(&g, &SobolevOptions { nodes: 60, ..small() }).unwrap();
        let mut z = d.seed(&g, 3.0).unwrap();
        z.iter_mut().enumerate().for_each(|(k, v)| *v *= 1.0 + 0.05 * (k as f64).sin());
        let a = d.gradient(&z);
        let b = d.finite_difference_gradient(&z, 1e-5);
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(dot / (na * nb) > 0.999_999, "cos = {}", dot / (na * nb));
    }

    #[test]
    fn discrete_seed_matches_continuum() {
        let g = RadialMetric::flat();
        let d = DiscreteQuotient::new(&g, &small()).unwrap();
        let z = d.seed(&g, 3.0).unwrap();
        assert!((d.quotient(&z) - euclidean_constant()).abs() < 1e-5);
    }

    #[test]
    fn flat_optimum_is_lambda() {
        let r = optimal_radial_constant_with(&RadialMetric::flat(), &small()).unwrap();
        assert!(r.deficit.abs() < 1e-5, "{}", r.deficit);
        assert!(r.residual <= 1e-6);
        for q in &r.seed_quotients {
            assert!(r.quotient <= *q);
        }
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn schwarzschild_has_positive_deficit() {
        let g = RadialMetric::smoothed_schwarzschild(0.1, 1.0).unwrap();
        let r = optimal_radial_constant_with(&g, &small()).unwrap();
        assert!(r.deficit > 0.1, "{}", r.deficit);
        let q = sobolev_quotient(&g, &r.minimizer).unwrap();
        assert!((q - r.quotient).abs() < 1e-6 * q, "{q} vs {}", r.quotient);
    }
}
