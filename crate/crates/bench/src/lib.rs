//! Shared fixtures for benchmarks.

use nearflat_core::dpmetric::{build_mesh, MeshGraph, MeshSpec};
use nearflat_core::RadialMetric;

/// Corpus member used throughout the benches.
pub fn schwarzschild() -> RadialMetric {
    RadialMetric::smoothed_schwarzschild(0.1, 1.0).expect("valid corpus metric")
}

/// Flat shell mesh of radius 16 with `shells` shells.
pub fn flat_mesh(shells: usize) -> MeshGraph {
    build_mesh(&RadialMetric::flat(), MeshSpec::new(16.0, shells)).expect("valid mesh")
}
