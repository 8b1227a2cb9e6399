//! Discrete `d_p` distances, `d_p` balls and Euclidean-proximity
//! diagnostics on shell meshes of coordinate balls.
//!
//! `d_p(x, y) = sup { |f(x) - f(y)| : ∫|∇f|^p dv ≤ 1 }` is computed on P1
//! functions with a certified enclosure `[primal, dual]`.

pub mod ball;
pub mod dump;
pub mod mesh;
pub mod solver;

pub use ball::{ball_from_field, distance_field, dp_ball, gh_distortion, sample_set, DistanceField, DpBall, SampledSet};
pub use mesh::{build_mesh, MeshGraph, MeshSpec};
pub use solver::{dp_distance, DpOptions, DpSolution};
