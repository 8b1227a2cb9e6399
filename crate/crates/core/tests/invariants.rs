//! Property tests over the smoothed-Schwarzschild family.

use std::f64::consts::PI;

use nearflat_core::capacity::solve_capacitary_potential;
use nearflat_core::entropy::{entropy_lower_bound, mu_estimate, w_functional, EntropyDatum, EntropyFamily};
use nearflat_core::isoperimetric::{iso_constant, profile_centered};
use nearflat_core::sobolev::{euclidean_constant, sobolev_quotient};
use nearflat_core::willmore::BetaProfile;
use nearflat_core::RadialMetric;
use proptest::prelude::*;

fn metric(mass: f64, core: f64) -> RadialMetric {
    RadialMetric::smoothed_schwarzschild(mass, core).unwrap()
}

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig::with_cases(n)
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn scalar_curvature_is_nonnegative(mass in 1e-3f64..3.0, core in 0.2f64..5.0, log_r in -4.0f64..4.0) {
        let g = metric(mass, core);
        prop_assert!(g.scalar_curvature(10f64.powf(log_r)).unwrap() >= -1e-10);
    }

    #[test]
    fn willmore_energy_is_scale_invariant(mass in 1e-3f64..3.0, x in 0.05f64..20.0, lambda in 0.1f64..10.0) {
        let g = metric(mass, 1.0);
        let a = g.willmore_energy_sphere(x).unwrap();
        let b = g.dilate(lambda).unwrap().willmore_energy_sphere(g.dilated_radius(x, lambda)).unwrap();
        prop_assert!((a / b - 1.0).abs() <= 1e-10, "{} vs {}", a, b);
    }

    #[test]
    fn ball_volume_derivative_is_sphere_area(mass in 1e-3f64..3.0, x in 0.1f64..10.0) {
        let g = metric(mass, 1.0);
        let h = 1e-4 * x;
        let dv = (g.ball_volume(x + h).unwrap() - g.ball_volume(x - h).unwrap()) / (2.0 * h);
        let area = g.sphere_area(x).unwrap() * g.ds_dx(x);
        prop_assert!((dv / area - 1.0).abs() <= 1e-6, "{} vs {}", dv, area);
    }

    #[test]
    fn to_warped_is_a_fixpoint(mass in 1e-2f64..2.0, log_r in -1.0f64..1.0) {
        let g = metric(mass, 1.0);
        let w = g.to_warped().unwrap();
        let ww = w.to_warped().unwrap();
        prop_assert_eq!(&w, &ww);
        // the same sphere has the same area in both charts
        let x = 10f64.powf(log_r);
        let s = g.geodesic_radius(x).unwrap();
        let a = g.sphere_area(x).unwrap();
        let b = w.sphere_area(s).unwrap();
        prop_assert!((a / b - 1.0).abs() <= 1e-6, "{} vs {}", a, b);
    }
}

proptest! {
    #![proptest_config(cases(12))]

    #[test]
    fn capacity_flux_normalizes_at_infinity(mass in 1e-3f64..2.0, x0 in 0.2f64..4.0) {
        let pot = solve_capacitary_potential(&metric(mass, 1.0), x0).unwrap();
        let w = pot.flux_w(12.0).unwrap();
        prop_assert!((w / (4.0 * PI) - 1.0).abs() <= 1e-4, "W(12) = {}", w);
    }

    #[test]
    fn capacity_w_is_scale_invariant(mass in 1e-3f64..2.0, lambda in 0.2f64..5.0, t in 0.0f64..8.0) {
        let g = metric(mass, 1.0);
        let a = solve_capacitary_potential(&g, 1.0).unwrap().flux_w(t).unwrap();
        let b = solve_capacitary_potential(&g.dilate(lambda).unwrap(), g.dilated_radius(1.0, lambda))
            .unwrap()
            .flux_w(t)
            .unwrap();
        prop_assert!((a / b - 1.0).abs() <= 1e-10, "{} vs {}", a, b);
    }

    #[test]
    fn level_flux_is_the_flux_constant(mass in 1e-3f64..2.0, t in 0.0f64..10.0) {
        let pot = solve_capacitary_potential(&metric(mass, 1.0), 1.0).unwrap();
        let lhs = pot.level_flux(t).unwrap() * (-t).exp();
        prop_assert!((lhs / pot.flux_constant() - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn beta_profiles_attain_lambda_on_flat_space(beta in 0.5f64..1e3) {
        let q = sobolev_quotient(&RadialMetric::flat(), &BetaProfile::new(beta).unwrap()).unwrap();
        prop_assert!((q - euclidean_constant()).abs() <= 1e-8);
    }

    #[test]
    fn sobolev_quotient_is_dilation_invariant(mass in 1e-2f64..2.0, beta in 0.5f64..20.0, lambda in 0.2f64..5.0) {
        let g = metric(mass, 1.0);
        let u = BetaProfile::new(beta).unwrap();
        let a = sobolev_quotient(&g, &u).unwrap();
        let v = BetaProfile::new(beta * lambda).unwrap();
        // u(x/λ) up to a constant factor, which the quotient ignores
        let b = sobolev_quotient(&g.dilate(lambda).unwrap(), &v).unwrap();
        prop_assert!((a / b - 1.0).abs() <= 1e-10, "{} vs {}", a, b);
    }

    #[test]
    fn w_functional_forms_agree(mass in 0.0f64..1.0, tau in 0.3f64..3.0, ratio in 0.2f64..5.0) {
        let g = if mass == 0.0 { RadialMetric::flat() } else { metric(mass, 1.0) };
        let d = EntropyDatum::gaussian(&g, tau, ratio * tau).unwrap();
        let w = w_functional(&d);
        prop_assert!(w.discrepancy() <= 1e-8 * w.f_form.abs().max(1.0));
    }
}

#[test]
fn iso_constant_is_dilation_invariant() {
    let g = metric(0.3, 1.0);
    let a = iso_constant(&profile_centered(&g).unwrap());
    let b = iso_constant(&profile_centered(&g.dilate(4.0).unwrap()).unwrap());
    assert!((a / b - 1.0).abs() <= 1e-8, "{a} vs {b}");
}

#[test]
fn entropy_bound_is_sharp_on_flat_space() {
    assert_eq!(entropy_lower_bound(1.0).unwrap(), 0.0);
    let mu = mu_estimate(&RadialMetric::flat(), 1.0, &EntropyFamily::default()).unwrap();
    assert!(mu.value.abs() <= 1e-8, "flat mu estimate {}", mu.value);
}
