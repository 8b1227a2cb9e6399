//! d_p solver properties on small flat and curved meshes.

use nearflat_core::dpmetric::{build_mesh, dp_distance, sample_set, DpOptions, MeshGraph, MeshSpec};
use nearflat_core::RadialMetric;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn flat_mesh(shells: usize) -> MeshGraph {
    build_mesh(&RadialMetric::flat(), MeshSpec::new(8.0, shells)).unwrap()
}

#[test]
fn weak_duality_and_gap_on_flat_pairs() {
    let mesh = flat_mesh(8);
    let opts = DpOptions::default();
    let center = 0;
    for (shell, dir) in [(2, 0), (4, 3), (6, 7), (8, 11)] {
        let (d, sol) = dp_distance(&mesh, center, mesh.vertex(shell, dir), 6.0, &opts).unwrap();
        assert!(sol.primal <= sol.dual * (1.0 + 1e-12), "{sol:?}");
        assert!(sol.primal <= d && d <= sol.dual);
        assert!(sol.gap <= 0.05, "gap {}", sol.gap);
    }
}

#[test]
fn distances_are_symmetric_and_satisfy_the_triangle_inequality() {
    let mesh = flat_mesh(6);
    let opts = DpOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..6 {
        let v: Vec<usize> = (0..3).map(|_| rng.random_range(0..mesh.len())).collect();
        if v[0] == v[1] || v[1] == v[2] || v[0] == v[2] {
            continue;
        }
        let d = |a: usize, b: usize| dp_distance(&mesh, a, b, 6.0, &opts).unwrap();
        let (xy, sxy) = d(v[0], v[1]);
        let (yx, syx) = d(v[1], v[0]);
        let (yz, syz) = d(v[1], v[2]);
        let (xz, sxz) = d(v[0], v[2]);
        let gap = |s: &nearflat_core::dpmetric::DpSolution| s.dual - s.primal;
        let slack = 2.0 * [gap(&sxy), gap(&syx), gap(&syz), gap(&sxz)].iter().copied().fold(0.0, f64::max);
        assert!((xy - yx).abs() <= slack.max(1e-12), "{xy} vs {yx}");
        assert!(xz <= xy + yz + slack, "{xz} > {xy} + {yz}");
    }
}

#[test]
fn euclidean_scaling_exponent_on_a_graded_mesh() {
    // d_p(0, x) ~ |x|^{1 - 3/p} on flat space
    let p = 10.0;
    let mesh = build_mesh(
        &RadialMetric::flat(),
        MeshSpec {
            inner_ratio: 1e-6,
            ..MeshSpec::new(16.0, 40)
        },
    )
    .unwrap();
    let opts = DpOptions::default();
    let center = 0;
    let shells = [28, 30, 32];
    let pts: Vec<(f64, f64)> = shells
        .iter()
        .map(|&k| {
            let (d, _) = dp_distance(&mesh, center, mesh.vertex(k, 0), p, &opts).unwrap();
            (mesh.radii[k].ln(), d.ln())
        })
        .collect();
    let slope = (pts[2].1 - pts[0].1) / (pts[2].0 - pts[0].0);
    let expected = 1.0 - 3.0 / p;
    assert!((slope / expected - 1.0).abs() <= 0.02, "slope {slope} vs {expected}");
}

#[test]
fn sampled_distances_are_deterministic() {
    let mesh = flat_mesh(5);
    let verts = [0, mesh.vertex(3, 0), mesh.vertex(5, 5)];
    let a = sample_set(&mesh, &verts, 6.0, &DpOptions::default()).unwrap();
    let b = sample_set(&mesh, &verts, 6.0, &DpOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn curved_mesh_keeps_weak_duality() {
    let g = RadialMetric::smoothed_schwarzschild(0.5, 1.0).unwrap();
    let mesh = build_mesh(&g, MeshSpec::new(8.0, 6)).unwrap();
    let (_, sol) = dp_distance(&mesh, 0, mesh.vertex(6, 2), 4.0, &DpOptions::default()).unwrap();
    assert!(sol.primal <= sol.dual * (1.0 + 1e-12));
}
