//! `d_p` balls, their volumes, and a Gromov–Hausdorff distortion proxy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mesh::{MeshGraph, DIRECTIONS};
use super::solver::{dp_distance, DpOptions};
use crate::error::{Error, Result};

/// `d_p` from one source to every vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceField {
    pub source: usize,
    pub p: f64,
    /// Primal (lower) values; zero at the source.
    pub values: Vec<f64>,
    /// Dual (upper) values; zero at the source.
    pub upper: Vec<f64>,
    pub max_gap: f64,
    /// Some solve exceeded the gap tolerance.
    pub flagged: bool,
}

/// Solve `d_p(source, v)` for every vertex `v`; solves run in parallel.
pub fn distance_field(mesh: &MeshGraph, source: usize, p: f64, opts: &DpOptions) -> Result<DistanceField> {
    if source >= mesh.len() {
        return Err(Error::domain(format!("source {source} outside mesh of {} vertices", mesh.len())));
    }
    let sols = (0..mesh.len())
        .into_par_iter()
        .map(|v| {
            if v == source {
                Ok(None)
            } else {
                dp_distance(mesh, source, v, p, opts).map(|(_, s)| Some(s))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut field = DistanceField {
        source,
        p,
        values: vec![0.0; mesh.len()],
        upper: vec![0.0; mesh.len()],
        max_gap: 0.0,
        flagged: false,
    };
    for (v, s) in sols.into_iter().enumerate() {
        if let Some(s) = s {
            field.values[v] = s.primal;
            field.upper[v] = s.dual;
            field.max_gap = field.max_gap.max(s.gap);
            field.flagged |= s.flagged;
        }
    }
    Ok(field)
}

/// Vertices and metric volume of `{v : d_p(x, v) ≤ r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpBall {
    pub source: usize,
    pub radius: f64,
    pub p: f64,
    pub members: Vec<usize>,
    pub volume: f64,
    pub max_gap: f64,
}

/// Fraction of a tetrahedron where the linear interpolant of `d` is `≤ r`.
pub fn sublevel_fraction(d: [f64; 4], r: f64) -> f64 {
    let mut v = d;
    v.sort_by(f64::total_cmp);
    let below = v.iter().filter(|x| **x <= r).count();
    match below {
        0 => 0.0,
        4 => 1.0,
        1 => (1..4).map(|j| (r - v[0]) / (v[j] - v[0])).product(),
        3 => 1.0 - (0..3).map(|j| (v[3] - r) / (v[3] - v[j])).product::<f64>(),
        _ => {
            // divided difference of x³/((x+γ)(x+δ)) at α, β
            let (alpha, beta, gamma, delta) = (r - v[0], r - v[1], v[2] - r, v[3] - r);
            let f = |x: f64| x * x * x / ((x + gamma) * (x + delta));
            let scale = alpha.max(gamma).max(delta);
            if (alpha - beta) > 1e-4 * scale {
                (f(alpha) - f(beta)) / (alpha - beta)
            } else {
                let x = 0.5 * (alpha + beta);
                let (a, b) = (x + gamma, x + delta);
                (3.0 * x * x * a * b - x * x * x * (a + b)) / (a * a * b * b)
            }
        }
    }
}

/// Ball of radius `r` read off a distance field, with boundary cells
/// counted by the exact sublevel fraction of the interpolated distance.
pub fn ball_from_field(mesh: &MeshGraph, field: &DistanceField, r: f64) -> Result<DpBall> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("ball radius {r} must be positive")));
    }
    if mesh.boundary.iter().any(|v| field.values[*v] <= r) {
        return Err(Error::OutOfValidity(format!(
            "d_p ball of radius {r} touches the mesh boundary; enlarge the mesh"
        )));
    }
    let members = (0..mesh.len()).filter(|v| field.values[*v] <= r).collect();
    let volume = mesh
        .tets
        .iter()
        .zip(&mesh.weights)
        .map(|(t, w)| w * sublevel_fraction(t.map(|v| field.values[v]), r))
        .sum();
    Ok(DpBall {
        source: field.source,
        radius: r,
        p: field.p,
        members,
        volume,
        max_gap: field.max_gap,
    })
}

/// `𝓑_p(x, r)` on the mesh.
pub fn dp_ball(mesh: &MeshGraph, x: usize, r: f64, p: f64, opts: &DpOptions) -> Result<DpBall> {
    let field = distance_field(mesh, x, p, opts)?;
    ball_from_field(mesh, &field, r)
}

/// Sampled points with their pairwise `d_p` matrix. Points are keyed by
/// chart radius and direction index for matching across meshes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSet {
    pub keys: Vec<(f64, usize)>,
    pub dist: Vec<Vec<f64>>,
    pub max_gap: f64,
}

/// Pairwise `d_p` among `vertices`.
pub fn sample_set(mesh: &MeshGraph, vertices: &[usize], p: f64, opts: &DpOptions) -> Result<SampledSet> {
    let k = vertices.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let sols = pairs
        .par_iter()
        .map(|&(i, j)| dp_distance(mesh, vertices[i], vertices[j], p, opts).map(|(_, s)| s))
        .collect::<Result<Vec<_>>>()?;
    let mut dist = vec![vec![0.0; k]; k];
    let mut max_gap = 0.0f64;
    for ((i, j), s) in pairs.into_iter().zip(sols) {
        dist[i][j] = s.primal;
        dist[j][i] = s.primal;
        max_gap = max_gap.max(s.gap);
    }
    let keys = vertices
        .iter()
        .map(|&v| {
            let (shell, dir) = mesh.label(v);
            (mesh.radii[shell], dir)
        })
        .collect();
    Ok(SampledSet { keys, dist, max_gap })
}

/// Vertices of `ball` lying on the given directions, plus the center if it
/// belongs to the ball.
pub fn ball_samples(mesh: &MeshGraph, ball: &DpBall, directions: &[usize]) -> Vec<usize> {
    ball.members
        .iter()
        .copied()
        .filter(|&v| {
            let (shell, dir) = mesh.label(v);
            shell == 0 || directions.contains(&(dir % DIRECTIONS))
        })
        .collect()
}

/// Half the largest `|d_A(x, x') - d_B(φx, φx')|` over the correspondence
/// that pairs points with equal keys; an upper bound on the GH distance
/// between the sampled sets.
pub fn gh_distortion(a: &SampledSet, b: &SampledSet) -> Result<f64> {
    if a.keys.len() != b.keys.len() {
        return Err(Error::Config(format!(
            "sample sizes differ ({} vs {})",
            a.keys.len(),
            b.keys.len()
        )));
    }
    // index of b's point matched to each point of a
    let mut phi = Vec::with_capacity(a.keys.len());
    for &(ra, da) in &a.keys {
        let j = b
            .keys
            .iter()
            .position(|&(rb, db)| db == da && (ra - rb).abs() <= 1e-9 * ra.abs().max(rb.abs()).max(1e-300))
            .ok_or_else(|| Error::Config(format!("no match for sample at radius {ra}, direction {da}")))?;
        phi.push(j);
    }
    let mut worst = 0.0f64;
    for i in 0..phi.len() {
        for k in 0..phi.len() {
            worst = worst.max((a.dist[i][k] - b.dist[phi[i]][phi[k]]).abs());
        }
    }
    Ok(0.5 * worst)
}
