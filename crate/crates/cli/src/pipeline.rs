//! Per-metric verification chain and run orchestration.

use std::time::Instant;

use nearflat_core::capacity::{check_miao_bound, check_w_monotonicity, check_w_monotonicity_from, solve_capacitary_potential};
use nearflat_core::conformal::{check_suite, ConformalFactor};
use nearflat_core::entropy::{check_entropy_bound, verify_rearrangement, EntropyDatum, EntropyFamily};
use nearflat_core::isoperimetric::{
    check_differential_inequality, compare_euclidean, iso_constant, iso_ratio, profile_centered, profile_centered_with,
};
use nearflat_core::sobolev::{optimal_radial_constant_with, SobolevOptions};
use nearflat_core::willmore::{
    beta_for_deficit, chain_at_sphere, willmore_certificate, willmore_certificate_for_epsilon, ChainCalibration,
};
use nearflat_core::{Caveat, Certificate, Error, RadialMetric};
use serde::{Deserialize, Serialize};

use crate::config::{Fixture, MetricSpec, RunConfig};
use crate::dp::{run_dp_section, Dump};
use crate::report::{slope_fit, MetricReport, MetricRow, Report, Timings};
use crate::StageError;

type StageResult<T> = std::result::Result<T, StageError>;

fn stage<T>(metric: &str, name: &str, r: nearflat_core::Result<T>) -> StageResult<T> {
    r.map_err(|source| StageError {
        metric: metric.to_string(),
        stage: name.to_string(),
        source,
    })
}

/// Which parts of a run to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Verify,
    Sweep,
    Dp,
}

impl Command {
    fn runs_metrics(self) -> bool {
        matches!(self, Self::Verify | Self::Sweep)
    }
}

/// Chain `sobolev → willmore → isoperimetric → entropy` on one metric.
pub fn verify_metric(spec: &MetricSpec, cfg: &RunConfig, timings: &mut Timings) -> StageResult<MetricReport> {
    let label = spec.label();
    let tol = cfg.tol();
    let metric = stage(&label, "build", spec.build())?;
    let length = metric.length_scale();
    let mut certs = Vec::new();

    let clock = Instant::now();
    let opts = SobolevOptions {
        nodes: cfg.sobolev.nodes,
        betas: cfg.sobolev.betas.clone(),
        ..SobolevOptions::default()
    };
    let sob = stage(&label, "sobolev", optimal_radial_constant_with(&metric, &opts))?;
    certs.push(
        Certificate::at_least("sobolev_deficit", sob.deficit, 0.0, tol)
            .param("quotient", sob.quotient)
            .param("seed_beta", sob.seed_beta)
            .param("iterations", sob.iterations as f64)
            .input("metric", metric.describe())
            .with_caveat(Caveat::RadialMinimizerOnly),
    );
    certs.push(
        Certificate::at_least("sobolev_stationarity", opts.tol * cfg.tolerances.scale, sob.residual, 0.0)
            .input("metric", metric.describe()),
    );
    timings.record(&label, "sobolev", clock);

    let clock = Instant::now();
    let calibration = stage(&label, "willmore", ChainCalibration::new(cfg.checks.delta_max))?;
    let delta = sob.deficit.max(0.0);
    let epsilon = stage(&label, "willmore", calibration.bound(delta))?;
    let spheres: Vec<f64> = cfg.checks.spheres.iter().map(|s| s * length).collect();
    let mut min_willmore = f64::INFINITY;
    for &x0 in &spheres {
        let pot = stage(&label, "capacity", solve_capacitary_potential(&metric, x0))?;
        certs.push(stage(&label, "capacity", check_w_monotonicity(&pot, tol))?);
        certs.push(stage(&label, "capacity", check_miao_bound(&metric, x0, tol))?);
        certs.push(stage(&label, "willmore", willmore_certificate(&metric, x0, delta, &calibration, tol))?);
        min_willmore = min_willmore.min(stage(&label, "willmore", metric.willmore_energy_sphere(x0))?);
    }
    // chain integrals at the unit sphere, with β from the measured deficit
    let beta = if delta > 0.0 { beta_for_deficit(delta).clamp(1.0, 1e3) } else { 1e3 };
    let chain = stage(&label, "willmore", chain_at_sphere(&metric, length, beta))?;
    certs.push(
        Certificate::at_least("chain_gap", chain.gap(), 0.0, tol)
            .param("beta", beta)
            .param("a", chain.a)
            .param("b", chain.b)
            .param("c", chain.c)
            .param("eta", chain.eta)
            .input("metric", metric.describe()),
    );
    certs.push(
        Certificate::at_least("chain_l6_bound", chain.exact_l6 / chain.bound_l6, 1.0, tol)
            .param("beta", beta)
            .param("exact_l6", chain.exact_l6)
            .param("bound_l6", chain.bound_l6)
            .input("metric", metric.describe()),
    );
    timings.record(&label, "willmore", clock);

    let clock = Instant::now();
    let profile = stage(&label, "isoperimetric", profile_centered(&metric))?;
    certs.push(stage(&label, "isoperimetric", check_differential_inequality(&profile, epsilon, tol))?);
    certs.push(stage(&label, "isoperimetric", compare_euclidean(&profile, epsilon, tol))?);
    let iso = iso_constant(&profile);
    let eta = iso_ratio(&profile).min(1.0);
    timings.record(&label, "isoperimetric", clock);

    let clock = Instant::now();
    for &sigma in &cfg.checks.rearrangement_sigmas {
        let d = stage(&label, "entropy", EntropyDatum::gaussian(&metric, length * length, sigma * length * length))?;
        certs.push(stage(&label, "entropy", verify_rearrangement(&metric, d.profile(), eta, tol))?.param("sigma", sigma));
    }
    let bump = stage(&label, "entropy", EntropyDatum::bump(&metric, length * length, length * length))?;
    certs.push(stage(&label, "entropy", verify_rearrangement(&metric, bump.profile(), eta, tol))?.input("profile", "bump"));
    let family = EntropyFamily::default();
    let mut mu = f64::INFINITY;
    for &tau in &cfg.checks.taus {
        let c = stage(&label, "entropy", check_entropy_bound(&metric, tau * length * length, eta, &family, tol))?;
        mu = mu.min(c.lhs);
        certs.push(c);
    }
    timings.record(&label, "entropy", clock);

    let (mass, core) = spec.mass_core();
    Ok(MetricReport {
        label,
        row: MetricRow {
            mass,
            core,
            deficit: sob.deficit,
            epsilon,
            min_willmore,
            iso_constant: iso,
            eta,
            mu,
            ball_volume_deviation: None,
            gh_distortion: None,
        },
        sobolev_iterations: sob.iterations,
        sobolev_residual: sob.residual,
        certificates: certs,
    })
}

/// Certificates that `values` strictly decrease along `order`.
pub fn trend_certificate(check: &str, order: &[usize], values: &[f64]) -> Certificate {
    let steps: Vec<f64> = order.windows(2).map(|w| values[w[0]] - values[w[1]]).collect();
    let worst = steps.iter().copied().fold(f64::INFINITY, f64::min);
    let mut c = Certificate::at_least(check, worst, 0.0, 0.0).param("points", order.len() as f64);
    // strict decrease
    c.passed = worst.is_finite() && worst > 0.0;
    c
}

/// Indices of non-flat rows ordered by decreasing mass.
pub fn mass_order(rows: &[MetricRow]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows.len()).filter(|i| rows[*i].mass > 0.0).collect();
    order.sort_by(|a, b| rows[*b].mass.total_cmp(&rows[*a].mass).then(a.cmp(b)));
    order
}

fn trend_certificates(rows: &[MetricRow]) -> Vec<Certificate> {
    let order = mass_order(rows);
    if order.len() < 2 {
        return Vec::new();
    }
    let col = |f: fn(&MetricRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    vec![
        trend_certificate("trend_deficit", &order, &col(|r| r.deficit)),
        trend_certificate("trend_epsilon", &order, &col(|r| r.epsilon)),
        trend_certificate("trend_one_minus_eta", &order, &col(|r| 1.0 - r.eta)),
    ]
}

/// Deliberately broken fixtures, each marked with [`Caveat::NegativeFixture`].
pub fn negative_fixture(fixture: Fixture, tol: f64) -> nearflat_core::Result<Certificate> {
    let curved = RadialMetric::smoothed_schwarzschild(0.3, 1.0)?;
    let cert = match fixture {
        Fixture::WillmoreZeroEpsilon => willmore_certificate_for_epsilon(&curved, 1.0, 0.0, tol)?,
        Fixture::PinchedProfile => {
            let p = profile_centered_with(&RadialMetric::flat(), 400, 1e-2, 1e2)?.pinched(1.0, 0.2);
            check_differential_inequality(&p, 0.0, tol)?
        }
        Fixture::UnitEta => {
            let d = EntropyDatum::gaussian(&curved, 1e4, 1e4)?;
            verify_rearrangement(&curved, d.profile(), 1.0, tol)?
        }
        Fixture::UnderstatedFlux => {
            let pot = solve_capacitary_potential(&curved, 1.0)?;
            check_w_monotonicity_from(&pot, 0.5 * pot.flux_w(0.0)?, tol)?
        }
        Fixture::PerturbedConformal => check_suite(&ConformalFactor::perturbed(4.1)?, true)?,
    };
    Ok(cert.input("fixture", format!("{fixture:?}")).with_caveat(Caveat::NegativeFixture))
}

/// Report, wall-clock timings, and binary dumps of one run. Timings are
/// kept out of the report so reruns are byte-identical.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub timings: Timings,
    pub dumps: Vec<Dump>,
}

/// Execute `command` on a configuration.
pub fn run(cfg: &RunConfig, command: Command) -> StageResult<RunOutput> {
    let mut timings = Timings::default();
    let mut dumps = Vec::new();
    let mut report = Report::new(&cfg.name, command);
    if command.runs_metrics() {
        for spec in &cfg.metrics {
            report.metrics.push(verify_metric(spec, cfg, &mut timings)?);
        }
        let rows: Vec<MetricRow> = report.metrics.iter().map(|m| m.row.clone()).collect();
        report.trends = trend_certificates(&rows);
        report.fit = slope_fit(&rows);
    }
    if command == Command::Verify && cfg.checks.conformal {
        let clock = Instant::now();
        let c = stage("conformal", "conformal", check_suite(&ConformalFactor::canonical(), true))?;
        report.conformal = Some(c);
        timings.record("conformal", "conformal", clock);
    }
    if let Some(section) = &cfg.dp {
        let (dp, blobs) = run_dp_section(section, cfg, &mut report, &mut timings)?;
        report.dp = Some(dp);
        dumps = blobs;
    }
    if command == Command::Verify {
        for &f in &cfg.negative.fixtures {
            report.negative.push(stage("negative", &format!("{f:?}"), negative_fixture(f, cfg.tol()))?);
        }
    }
    report.summarize();
    Ok(RunOutput { report, timings, dumps })
}

pub fn run_verify(cfg: &RunConfig) -> StageResult<RunOutput> {
    run(cfg, Command::Verify)
}

pub fn run_sweep(cfg: &RunConfig) -> StageResult<RunOutput> {
    run(cfg, Command::Sweep)
}

pub fn run_dp(cfg: &RunConfig) -> StageResult<RunOutput> {
    if cfg.dp.is_none() {
        return Err(StageError {
            metric: String::new(),
            stage: "dp".into(),
            source: Error::Config("configuration has no [dp] section".into()),
        });
    }
    run(cfg, Command::Dp)
}
