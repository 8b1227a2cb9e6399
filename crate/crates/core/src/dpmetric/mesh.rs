//! Shell meshes of coordinate balls: a center vertex plus geometrically
//! graded spherical shells, each carrying the 12 icosahedron directions.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::manifold::RadialMetric;

/// Number of directions per shell (icosahedron vertices, a spherical 5-design).
pub const DIRECTIONS: usize = 12;
/// Icosahedron faces.
pub const FACES: usize = 20;
/// Fewest shells accepted by [`build_mesh`].
pub const MIN_SHELLS: usize = 4;

/// Unit icosahedron vertices.
pub fn icosahedron() -> [[f64; 3]; DIRECTIONS] {
    let g = 0.5 * (1.0 + 5f64.sqrt());
    let raw = [
        [0.0, 1.0, g],
        [0.0, -1.0, g],
        [0.0, 1.0, -g],
        [0.0, -1.0, -g],
        [1.0, g, 0.0],
        [-1.0, g, 0.0],
        [1.0, -g, 0.0],
        [-1.0, -g, 0.0],
        [g, 0.0, 1.0],
        [-g, 0.0, 1.0],
        [g, 0.0, -1.0],
        [-g, 0.0, -1.0],
    ];
    let n = (1.0 + g * g).sqrt();
    raw.map(|v| [v[0] / n, v[1] / n, v[2] / n])
}

/// Faces as ascending direction triples.
pub fn icosahedron_faces() -> Vec<[usize; 3]> {
    let v = icosahedron();
    let d2 = |a: usize, b: usize| sub(v[a], v[b]).iter().map(|x| x * x).sum::<f64>();
    let edge = (0..DIRECTIONS).skip(1).map(|j| d2(0, j)).fold(f64::INFINITY, f64::min);
    let adj = |a: usize, b: usize| (d2(a, b) - edge).abs() < 1e-9;
    let mut faces = Vec::with_capacity(FACES);
    for i in 0..DIRECTIONS {
        for j in i + 1..DIRECTIONS {
            for k in j + 1..DIRECTIONS {
                if adj(i, j) && adj(j, k) && adj(i, k) {
                    faces.push([i, j, k]);
                }
            }
        }
    }
    faces
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Shape of the coordinate-ball mesh.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeshSpec {
    /// Native radius of the outer shell.
    pub radius: f64,
    /// Number of shells.
    pub shells: usize,
    /// Innermost shell radius as a fraction of `radius`.
    pub inner_ratio: f64,
}

impl MeshSpec {
    pub fn new(radius: f64, shells: usize) -> Self {
        Self {
            radius,
            shells,
            inner_ratio: 1.0 / 32.0,
        }
    }

    /// Same grading with twice the shells.
    pub fn refined(&self) -> Self {
        Self {
            shells: 2 * self.shells - 1,
            ..*self
        }
    }

    /// Ratio between consecutive shell radii.
    pub fn grading(&self) -> f64 {
        (1.0 / self.inner_ratio).powf(1.0 / (self.shells - 1) as f64)
    }

    /// Shell radii, innermost first.
    pub fn radii(&self) -> Vec<f64> {
        let n = self.shells;
        let l = self.inner_ratio.ln();
        (0..n)
            .map(|k| {
                if k == n - 1 {
                    self.radius
                } else {
                    self.radius * (l * (n - 1 - k) as f64 / (n - 1) as f64).exp()
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.shells < MIN_SHELLS {
            return Err(Error::Config(format!(
                "mesh resolution {} is below the minimum of {MIN_SHELLS} shells",
                self.shells
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!("mesh radius {} must be positive", self.radius)));
        }
        if !(self.inner_ratio > 0.0 && self.inner_ratio < 1.0) {
            return Err(Error::Config(format!("inner ratio {} must lie in (0, 1)", self.inner_ratio)));
        }
        Ok(())
    }
}

/// Tetrahedral mesh of a coordinate ball with metric weights.
///
/// Vertex 0 is the center; shell `k ≥ 1` direction `d` is vertex
/// `1 + 12(k-1) + d`. Each shell slab over an icosahedron face is a curved
/// prism split into three tetrahedra with conforming diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshGraph {
    pub spec: MeshSpec,
    pub metric: String,
    pub vertices: Vec<[f64; 3]>,
    /// Native radius of each shell; entry 0 is the center.
    pub radii: Vec<f64>,
    pub tets: Vec<[usize; 4]>,
    /// Metric volume carried by each tetrahedron.
    pub weights: Vec<f64>,
    /// Gradients of the barycentric coordinates, normalized by the metric so
    /// that `|∇f|_g = |Σ f_i d_i|`.
    pub grads: Vec<[[f64; 3]; 4]>,
    /// Metric length of every mesh edge, `(i, j, length)` with `i < j`.
    pub edges: Vec<(usize, usize, f64)>,
    /// Vertices on the outer shell.
    pub boundary: Vec<usize>,
}

impl MeshGraph {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn shells(&self) -> usize {
        self.spec.shells
    }

    /// Index of the vertex on `shell` (1-based) in `direction`.
    pub fn vertex(&self, shell: usize, direction: usize) -> usize {
        assert!(shell >= 1 && shell <= self.spec.shells && direction < DIRECTIONS);
        1 + DIRECTIONS * (shell - 1) + direction
    }

    /// `(shell, direction)` of a vertex; the center is `(0, 0)`.
    pub fn label(&self, v: usize) -> (usize, usize) {
        if v == 0 {
            (0, 0)
        } else {
            (1 + (v - 1) / DIRECTIONS, (v - 1) % DIRECTIONS)
        }
    }

    pub fn total_volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn max_cell_diameter(&self) -> f64 {
        self.tets
            .iter()
            .map(|t| {
                let mut d = 0.0f64;
                for i in 0..4 {
                    for j in i + 1..4 {
                        d = d.max(dot(sub(self.vertices[t[i]], self.vertices[t[j]]), sub(self.vertices[t[i]], self.vertices[t[j]])).sqrt());
                    }
                }
                d
            })
            .fold(0.0, f64::max)
    }

    /// Bandwidth of vertex coupling (shell neighbours only).
    pub fn bandwidth(&self) -> usize {
        2 * DIRECTIONS
    }
}

/// Build the shell mesh of the coordinate ball `|x| ≤ spec.radius`.
pub fn build_mesh(metric: &RadialMetric, spec: MeshSpec) -> Result<MeshGraph> {
    spec.validate()?;
    let dirs = icosahedron();
    let faces = icosahedron_faces();
    let mut radii = vec![0.0];
    radii.extend(spec.radii());
    let n = spec.shells;
    let mut vertices = vec![[0.0; 3]];
    for r in &radii[1..] {
        for d in dirs {
            vertices.push(scale(d, *r));
        }
    }
    let idx = |k: usize, d: usize| if k == 0 { 0 } else { 1 + DIRECTIONS * (k - 1) + d };

    let mut tets = Vec::with_capacity(FACES * (3 * n - 2));
    let mut weights = Vec::with_capacity(tets.capacity());
    for k in 1..=n {
        let (r0, r1) = (radii[k - 1], radii[k]);
        let mid = 0.5 * (r0 + r1);
        // lumped volume of the curved cell: midpoint rule in the radius
        let cell = metric.volume_density(mid) * (r1 - r0) / FACES as f64;
        for f in &faces {
            let [i, j, l] = *f;
            let group: Vec<[usize; 4]> = if k == 1 {
                vec![[0, idx(1, i), idx(1, j), idx(1, l)]]
            } else {
                let (a, b) = (|d| idx(k - 1, d), |d| idx(k, d));
                vec![
                    [a(i), a(j), a(l), b(i)],
                    [a(j), a(l), b(i), b(j)],
                    [a(l), b(i), b(j), b(l)],
                ]
            };
            let vols: Vec<f64> = group.iter().map(|t| euclidean_volume(&vertices, t)).collect();
            let total: f64 = vols.iter().sum();
            for (t, v) in group.into_iter().zip(vols) {
                tets.push(t);
                weights.push(cell * v / total);
            }
        }
    }

    let mut grads = Vec::with_capacity(tets.len());
    for t in &tets {
        grads.push(metric_gradients(metric, &vertices, t)?);
    }
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::Model("mesh has a cell with non-positive metric volume".into()));
    }

    let edges = metric_edges(metric, &vertices, &radii, &tets)?;
    let boundary = (0..DIRECTIONS).map(|d| idx(n, d)).collect();
    Ok(MeshGraph {
        spec,
        metric: metric.describe(),
        vertices,
        radii,
        tets,
        weights,
        grads,
        edges,
        boundary,
    })
}

fn euclidean_volume(v: &[[f64; 3]], t: &[usize; 4]) -> f64 {
    let p0 = v[t[0]];
    det3(sub(v[t[1]], p0), sub(v[t[2]], p0), sub(v[t[3]], p0)).abs() / 6.0
}

/// Radial and tangential stretch `(a, b)` of the metric at chart radius `x`:
/// `g = a² dx² + b² x² g_{S²}`.
pub fn stretches(metric: &RadialMetric, x: f64) -> (f64, f64) {
    (metric.ds_dx(x), metric.warped_value(x) / x)
}

fn metric_gradients(metric: &RadialMetric, v: &[[f64; 3]], t: &[usize; 4]) -> Result<[[f64; 3]; 4]> {
    let p0 = v[t[0]];
    let (e1, e2, e3) = (sub(v[t[1]], p0), sub(v[t[2]], p0), sub(v[t[3]], p0));
    let det = det3(e1, e2, e3);
    if det.abs() < 1e-300 {
        return Err(Error::Model("degenerate tetrahedron in mesh".into()));
    }
    // rows of the inverse edge matrix are the barycentric gradients
    let cross = |a: [f64; 3], b: [f64; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let g1 = scale(cross(e2, e3), 1.0 / det);
    let g2 = scale(cross(e3, e1), 1.0 / det);
    let g3 = scale(cross(e1, e2), 1.0 / det);
    let g0 = scale([g1[0] + g2[0] + g3[0], g1[1] + g2[1] + g3[1], g1[2] + g2[2] + g3[2]], -1.0);
    let c = t.iter().fold([0.0; 3], |acc, &i| [acc[0] + 0.25 * v[i][0], acc[1] + 0.25 * v[i][1], acc[2] + 0.25 * v[i][2]]);
    let x = dot(c, c).sqrt();
    let n = scale(c, 1.0 / x);
    let (a, b) = stretches(metric, x);
    let norm = |g: [f64; 3]| {
        let gn = dot(g, n);
        let radial = scale(n, gn);
        let tang = sub(g, radial);
        let (r, s) = (scale(radial, 1.0 / a), scale(tang, 1.0 / b));
        [r[0] + s[0], r[1] + s[1], r[2] + s[2]]
    };
    Ok([norm(g0), norm(g1), norm(g2), norm(g3)])
}

fn metric_edges(metric: &RadialMetric, v: &[[f64; 3]], radii: &[f64], tets: &[[usize; 4]]) -> Result<Vec<(usize, usize, f64)>> {
    let mut pairs: Vec<(usize, usize)> = tets
        .iter()
        .flat_map(|t| {
            let mut out = Vec::with_capacity(6);
            for i in 0..4 {
                for j in i + 1..4 {
                    out.push((t[i].min(t[j]), t[i].max(t[j])));
                }
            }
            out
        })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let geo: Vec<f64> = radii
        .iter()
        .map(|&r| if r == 0.0 { Ok(0.0) } else { metric.geodesic_radius(r) })
        .collect::<Result<_>>()?;
    let shell = |i: usize| if i == 0 { 0 } else { 1 + (i - 1) / DIRECTIONS };
    let mut edges = Vec::with_capacity(pairs.len());
    for (i, j) in pairs {
        let (p, q) = (v[i], v[j]);
        let (ri, rj) = (dot(p, p).sqrt(), dot(q, q).sqrt());
        let len = if i == 0 || ((p[0] * rj - q[0] * ri).abs() + (p[1] * rj - q[1] * ri).abs() + (p[2] * rj - q[2] * ri).abs()) < 1e-12 * ri * rj {
            // radial edge: exact geodesic length along the ray
            (geo[shell(j)] - geo[shell(i)]).abs()
        } else {
            let d = sub(q, p);
            let m = scale([p[0] + q[0], p[1] + q[1], p[2] + q[2]], 0.5);
            let x = dot(m, m).sqrt();
            let n = scale(m, 1.0 / x);
            let dn = dot(d, n);
            let tang = sub(d, scale(n, dn));
            let (a, b) = stretches(metric, x);
            (a * a * dn * dn + b * b * dot(tang, tang)).sqrt()
        };
        edges.push((i, j, len));
    }
    if edges.iter().any(|e| !(e.2 > 0.0)) {
        return Err(Error::Model("mesh has an edge of non-positive metric length".into()));
    }
    Ok(edges)
}

/// Sphere area check used by the fixtures: `Σ` face solid angles is `4π`.
pub fn total_solid_angle() -> f64 {
    let v = icosahedron();
    icosahedron_faces()
        .iter()
        .map(|f| {
            let (a, b, c) = (v[f[0]], v[f[1]], v[f[2]]);
            let num = det3(a, b, c).abs();
            let den = 1.0 + dot(a, b) + dot(b, c) + dot(a, c);
            2.0 * num.atan2(den)
        })
        .sum::<f64>()
        / (4.0 * PI)
}
