//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL` line to the unbuffered stderr so the verdict is
//! visible even when libtest captures output.

use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nearflat_cli::{run_dp, run_sweep, run_verify, RunConfig, RunOutput};
use nearflat_core::capacity::{check_miao_bound, level_grid, solve_capacitary_potential};
use nearflat_core::conformal::{check_norms, check_pde, check_round_sphere, check_sobolev_equality, ConformalFactor};
use nearflat_core::entropy::{w_functional, EntropyDatum};
use nearflat_core::isoperimetric::profile_centered;
use nearflat_core::sobolev::sobolev_quotient;
use nearflat_core::willmore::{beta_integrals_closed_form, sobolev_quotient_expansion, BetaProfile};
use nearflat_core::RadialMetric;

fn report_line(n: usize, title: &str, pass: bool, elapsed: Duration, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n}: {verdict} [{title}] ({:.2} s) {detail}\n", elapsed.as_secs_f64());
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn config(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("loading {}: {e}", path.display()))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let clock = Instant::now();
    let v = f();
    (v, clock.elapsed())
}

static SWEEP: OnceLock<(RunOutput, Duration)> = OnceLock::new();
static DP: OnceLock<(RunOutput, Duration)> = OnceLock::new();

fn sweep() -> &'static (RunOutput, Duration) {
    SWEEP.get_or_init(|| {
        let cfg = config("schwarzschild_sweep.toml");
        timed(|| run_verify(&cfg).expect("sweep run"))
    })
}

fn dp() -> &'static (RunOutput, Duration) {
    DP.get_or_init(|| {
        let cfg = config("dp.toml");
        timed(|| run_dp(&cfg).expect("dp run"))
    })
}

/// Gauss-Legendre rule on [-1, 1] by Newton iteration on `P_n`.
fn legendre_rule(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Composite Gauss-Legendre over `[a, b]` with `panels` equal panels.
fn composite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, rule: &[(f64, f64)]) -> f64 {
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        let part: f64 = rule.iter().map(|(x, w)| w * f(mid + 0.5 * h * x)).sum();
        sum += 0.5 * h * part;
    }
    sum
}

/// Exterior integrals of `s_β` in `x = ln r`, truncated where the
/// integrands have decayed by `e^{-45}` relative to their scale.
fn beta_integrals_oracle(beta: f64, rule: &[(f64, f64)]) -> (f64, f64) {
    let b2 = beta * beta;
    let top = beta.ln().max(0.0) + 45.0;
    let panels = (top * 8.0).ceil() as usize;
    let grad = composite(
        |x: f64| {
            let r = x.exp();
            4.0 * PI * (b2 + 1.0) * r.powi(5) / (b2 + r * r).powi(3)
        },
        0.0,
        top,
        panels,
        rule,
    );
    let l6 = composite(
        |x: f64| {
            let r = x.exp();
            4.0 * PI * r.powi(3) * ((b2 + 1.0) / (b2 + r * r)).powi(3)
        },
        0.0,
        top,
        panels,
        rule,
    );
    (grad, l6)
}

#[test]
fn criterion_1_closed_form_beta_integrals() {
    let clock = Instant::now();
    let rule = legendre_rule(20);
    let betas: Vec<f64> = (0..=40).map(|k| 0.5 * 2000f64.powf(k as f64 / 40.0)).collect();
    let mut worst = 0.0f64;
    for &b in &betas {
        let (g, s) = beta_integrals_closed_form(b).unwrap();
        let (go, so) = beta_integrals_oracle(b, &rule);
        worst = worst.max(((g - go) / go).abs()).max(((s - so) / so).abs());
    }
    let residuals: Vec<f64> = [10.0, 20.0, 40.0, 80.0, 160.0]
        .iter()
        .map(|b| sobolev_quotient_expansion(*b).unwrap().residual)
        .collect();
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    let ratios_ok = ratios.iter().all(|r| (r / 16.0 - 1.0).abs() <= 0.2);
    let elapsed = clock.elapsed();
    let integrals_ok = worst <= 1e-9;
    let pass = integrals_ok && ratios_ok && elapsed < Duration::from_secs(5);
    report_line(
        1,
        "closed-form oracle suite",
        pass,
        elapsed,
        &format!("max rel err {worst:.2e} (<= 1e-9: {integrals_ok}); doubling ratios {ratios:.2?} (16 +/- 20%: {ratios_ok})"),
    );
    assert!(integrals_ok, "closed forms differ from quadrature by {worst:e}");
    assert!(ratios_ok, "expansion residual doubling ratios {ratios:?} not within 16 +/- 20%");
    assert!(elapsed < Duration::from_secs(5));
}

#[test]
fn criterion_2_flat_equality_suite() {
    let clock = Instant::now();
    let flat = RadialMetric::flat();
    let four_pi = 4.0 * PI;
    let mut failures = Vec::new();

    let mut w_err = 0.0f64;
    for x0 in [0.5, 1.0, 3.0] {
        let pot = solve_capacitary_potential(&flat, x0).unwrap();
        for t in level_grid() {
            w_err = w_err.max((pot.flux_w(t).unwrap() / four_pi - 1.0).abs());
        }
    }
    if w_err > 1e-9 {
        failures.push(format!("W(t) rel err {w_err:e}"));
    }

    let mut miao_err = 0.0f64;
    for x0 in [0.25, 1.0, 3.0, 8.0] {
        let c = check_miao_bound(&flat, x0, 1e-9).unwrap();
        miao_err = miao_err.max((c.lhs - 2.0 * PI.sqrt()).abs()).max((c.rhs - 2.0 * PI.sqrt()).abs());
    }
    if miao_err > 1e-9 {
        failures.push(format!("Miao equality err {miao_err:e}"));
    }

    let mut willmore_err = 0.0f64;
    for x0 in [1e-2, 0.3, 1.0, 7.0, 1e3] {
        let w = flat.willmore_energy_sphere(x0).unwrap();
        willmore_err = willmore_err.max((w / (16.0 * PI) - 1.0).abs());
    }
    if willmore_err > 1e-9 {
        failures.push(format!("Willmore rel err {willmore_err:e}"));
    }

    let iso = (36.0 * PI).cbrt();
    let profile = profile_centered(&flat).unwrap();
    let vmin = profile.volume.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = profile.volume.iter().copied().fold(0.0, f64::max);
    let mut iso_err = 0.0f64;
    for (v, a) in profile.volume.iter().zip(&profile.area) {
        iso_err = iso_err.max((a / (iso * v.powf(2.0 / 3.0)) - 1.0).abs());
    }
    for k in 0..=60 {
        let v = 1e-3 * 10f64.powf(k as f64 / 10.0);
        let r = flat.radius_for_volume(v).unwrap();
        let a = flat.sphere_area(r).unwrap();
        iso_err = iso_err.max((a / (iso * v.powf(2.0 / 3.0)) - 1.0).abs());
    }
    let decades = (vmax / vmin).log10();
    if iso_err > 1e-9 || decades < 6.0 {
        failures.push(format!("I(v) rel err {iso_err:e} over {decades:.1} decades"));
    }

    let lambda = 3.0 * (PI / 2.0).powf(4.0 / 3.0);
    let mut sob_err = 0.0f64;
    for beta in [0.5, 1.0, 4.0, 30.0] {
        let q = sobolev_quotient(&flat, &BetaProfile::new(beta).unwrap()).unwrap();
        sob_err = sob_err.max((q - lambda).abs());
    }
    if sob_err > 1e-8 {
        failures.push(format!("Sobolev quotient err {sob_err:e}"));
    }

    let mut gauss_err = 0.0f64;
    for tau in [0.5, 1.0, 2.0] {
        let d = EntropyDatum::gaussian(&flat, tau, tau).unwrap();
        gauss_err = gauss_err.max(w_functional(&d).value().abs());
    }
    if gauss_err > 1e-8 {
        failures.push(format!("Gaussian W {gauss_err:e}"));
    }

    let elapsed = clock.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(10);
    report_line(
        2,
        "flat-space equality suite",
        pass,
        elapsed,
        &format!(
            "W {w_err:.1e}, Miao {miao_err:.1e}, Willmore {willmore_err:.1e}, I(v) {iso_err:.1e}, Sobolev {sob_err:.1e}, Gaussian W {gauss_err:.1e}"
        ),
    );
    assert!(failures.is_empty(), "{failures:?}");
    assert!(elapsed < Duration::from_secs(10));
}

#[test]
fn criterion_3_limit_object_suite() {
    let clock = Instant::now();
    let w = ConformalFactor::canonical();
    let pde = check_pde(&w);
    let norms = check_norms(&w).unwrap();
    let sob = check_sobolev_equality(&w).unwrap();
    let sphere = check_round_sphere(&w);

    // independent L⁶ norm: w⁶ = 64/(4+ρ²)³ in x = ln ρ
    let rule = legendre_rule(20);
    let l6 = composite(
        |x: f64| {
            let r = x.exp();
            4.0 * PI * r.powi(3) * 64.0 / (4.0 + r * r).powi(3)
        },
        -40.0,
        40.0,
        640,
        &rule,
    );
    let l6_err = (l6 - 2.0 * PI * PI).abs();
    let lambda = 3.0 * (PI / 2.0).powf(4.0 / 3.0);
    let equality_err = (lambda - 0.75 * l6.powf(2.0 / 3.0)).abs();

    let elapsed = clock.elapsed();
    let parts_ok = pde.passed && pde.lhs <= 1e-9 && norms.passed && sob.passed && sphere.passed;
    let oracle_ok = l6_err <= 1e-8 && equality_err <= 1e-8;
    let pass = parts_ok && oracle_ok && elapsed < Duration::from_secs(5);
    report_line(
        3,
        "limit-object suite",
        pass,
        elapsed,
        &format!(
            "PDE residual {:.1e}, R deviation {:.1e}, |int w^6 - 2pi^2| {l6_err:.1e}, |Lambda - 3/4 (int w^6)^(2/3)| {equality_err:.1e}, Sobolev equality {}",
            pde.lhs,
            sphere.lhs - 6.0,
            sob.passed
        ),
    );
    assert!(parts_ok, "{pde:?}\n{norms:?}\n{sob:?}\n{sphere:?}");
    assert!(oracle_ok);
    assert!(elapsed < Duration::from_secs(5));
}

#[test]
fn criterion_4_pipeline_inequalities() {
    let (out, elapsed) = sweep();
    let report = &out.report;
    let masses: Vec<f64> = report.metrics.iter().map(|m| m.row.mass).filter(|m| *m > 0.0).collect();
    let mut bad = Vec::new();
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for m in &report.metrics {
        for c in &m.certificates {
            count += 1;
            worst = worst.min(c.margin);
            if !c.passed || c.margin < -1e-6 {
                bad.push(format!("{}/{} margin {:e}", m.label, c.check, c.margin));
            }
        }
    }
    let trends = ["trend_deficit", "trend_epsilon", "trend_one_minus_eta"];
    for t in trends {
        match report.find("trend", t) {
            Some(c) if c.passed => {}
            Some(c) => bad.push(format!("{t} worst step {:e}", c.lhs)),
            None => bad.push(format!("{t} missing")),
        }
    }
    let corpus_ok = [1.0, 0.3, 0.1, 0.03, 0.01].iter().all(|m| masses.contains(m));
    let pass = bad.is_empty() && corpus_ok && *elapsed < Duration::from_secs(300);
    report_line(
        4,
        "pipeline inequality suite",
        pass,
        *elapsed,
        &format!("{count} certificates, worst margin {worst:.2e}, trends passed: {}", bad.is_empty()),
    );
    assert!(corpus_ok, "sweep masses {masses:?}");
    assert!(bad.is_empty(), "{bad:#?}");
    assert!(*elapsed < Duration::from_secs(300));
}

#[test]
fn criterion_5_stability_exponent() {
    let (out, elapsed) = sweep();
    let fit = out.report.fit.as_ref().expect("sweep has a slope fit");
    let pass = (0.6..=0.75).contains(&fit.slope);
    report_line(
        5,
        "stability exponent trend",
        pass,
        *elapsed,
        &format!("slope {:.4} over {} points, 95% CI [{:.4}, {:.4}]", fit.slope, fit.points, fit.lower, fit.upper),
    );
    assert!(pass, "slope {} outside [0.6, 0.75]", fit.slope);
}

#[test]
fn criterion_6_dp_suite() {
    let (out, elapsed) = dp();
    let dp = out.report.dp.as_ref().expect("dp section ran");
    let mut bad = Vec::new();
    if dp.flat_max_gap > 0.05 {
        bad.push(format!("flat gap {:e}", dp.flat_max_gap));
    }
    for p in [4.0, 6.0, 10.0] {
        match dp.exponent.iter().find(|e| e.p == p) {
            Some(e) if e.relative_error <= 0.02 => {}
            Some(e) => bad.push(format!("p={p} slope {} vs {}", e.slope, e.expected)),
            None => bad.push(format!("p={p} not studied")),
        }
    }
    for check in ["dp_gap_flat", "dp_weak_duality", "dp_triangle", "dp_trend_ball_volume", "dp_trend_gh_distortion"] {
        match dp.certificates.iter().find(|c| c.check == check) {
            Some(c) if c.passed => {}
            Some(c) => bad.push(format!("{check} margin {:e}", c.margin)),
            None => bad.push(format!("{check} missing")),
        }
    }
    let resolution_ok = dp.shells == 16 && dp.p == 6.0;
    let pass = bad.is_empty() && resolution_ok && *elapsed < Duration::from_secs(600);
    let exponents: Vec<String> = dp.exponent.iter().map(|e| format!("p={} err {:.2e}", e.p, e.relative_error)).collect();
    report_line(
        6,
        "d_p suite",
        pass,
        *elapsed,
        &format!("flat gap {:.1e}, {}, {} rows", dp.flat_max_gap, exponents.join(", "), dp.rows.len()),
    );
    assert!(resolution_ok);
    assert!(bad.is_empty(), "{bad:#?}");
    assert!(*elapsed < Duration::from_secs(600));
}

#[test]
fn criterion_7_determinism() {
    let clock = Instant::now();
    let flat = config("flat.toml");
    let first_flat = run_verify(&flat).expect("flat run");
    let second_flat = run_verify(&flat).expect("flat rerun");
    let second_sweep = run_sweep(&config("schwarzschild_sweep.toml")).expect("sweep rerun");
    let second_verify = run_verify(&config("schwarzschild_sweep.toml")).expect("verify rerun");
    let second_dp = run_dp(&config("dp.toml")).expect("dp rerun");
    let elapsed = clock.elapsed();

    let same = |a: &RunOutput, b: &RunOutput| {
        a.report.to_json() == b.report.to_json()
            && a.report.certificates_csv() == b.report.certificates_csv()
            && a.report.sweep_csv() == b.report.sweep_csv()
            && a.report.dp.as_ref().map(|d| d.to_csv()) == b.report.dp.as_ref().map(|d| d.to_csv())
            && a.dumps == b.dumps
    };
    let flat_same = same(&first_flat, &second_flat);
    let sweep_same = same(&sweep().0, &second_verify);
    let sweep_rows_same = sweep().0.report.sweep_csv() == second_sweep.report.sweep_csv();
    let dp_same = same(&dp().0, &second_dp);
    let pass = flat_same && sweep_same && sweep_rows_same && dp_same;
    report_line(
        7,
        "determinism",
        pass,
        elapsed,
        &format!("flat {flat_same}, sweep {sweep_same}, sweep table {sweep_rows_same}, dp {dp_same}"),
    );
    assert!(pass);
}
