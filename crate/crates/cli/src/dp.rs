//! `d_p` part of a run: family balls and distortions against flat space,
//! the flat scaling study, and the symmetry / triangle audits.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Instant;

use nearflat_core::dpmetric::{
    ball_from_field, build_mesh, distance_field, dp_distance, dump, gh_distortion, sample_set, DistanceField, DpOptions,
    DpSolution, MeshGraph, SampledSet,
};
use nearflat_core::{Certificate, RadialMetric};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AuditSection, DpSection, ExponentStudy, RunConfig};
use crate::pipeline::{mass_order, trend_certificate};
use crate::report::{MetricRow, Report, Timings, DP_SCHEMA, FLAGGED_PARAM};
use crate::StageError;

type StageResult<T> = std::result::Result<T, StageError>;

fn stage<T>(group: &str, name: &str, r: nearflat_core::Result<T>) -> StageResult<T> {
    r.map_err(|source| StageError {
        metric: group.to_string(),
        stage: format!("dp/{name}"),
        source,
    })
}

/// Ball volume and distortion of one metric against flat space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpRow {
    pub label: String,
    pub mass: f64,
    pub core: f64,
    pub ball_radius: f64,
    pub ball_volume: f64,
    pub flat_ball_volume: f64,
    /// `|Vol_g / Vol_flat - 1|` at the same `d_p` radius.
    pub volume_deviation: f64,
    /// Distortion of the chart-identity correspondence on the samples.
    pub gh_distortion: f64,
    pub max_gap: f64,
    pub flagged: bool,
}

/// Fitted exponent of `d_p(0, x)` against `|x|` on flat space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub p: f64,
    pub slope: f64,
    pub expected: f64,
    pub relative_error: f64,
    pub radii: Vec<f64>,
    pub distances: Vec<f64>,
    pub max_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub triples: usize,
    /// Largest `d(x,z) - d(x,y) - d(y,z)` over the triples.
    pub triangle_excess: f64,
    /// Smallest `2·gap - excess` over the triples.
    pub triangle_slack: f64,
    pub pairs: usize,
    /// Largest `|d(x,y) - d(y,x)|`.
    pub symmetry_defect: f64,
    /// Smallest `2·gap - |d(x,y) - d(y,x)|`.
    pub symmetry_slack: f64,
    pub refined_shells: usize,
    pub refined_ball_volume: f64,
    pub ball_cauchy: f64,
    pub resample_distortion: f64,
    pub max_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpReport {
    pub p: f64,
    pub shells: usize,
    pub mesh_radius: f64,
    pub gap_tol: f64,
    pub flat_max_gap: f64,
    pub rows: Vec<DpRow>,
    pub exponent: Vec<ExponentRow>,
    pub audit: Option<AuditSummary>,
    /// Names of the binary dumps written next to the report.
    pub dumps: Vec<String>,
    pub certificates: Vec<Certificate>,
}

impl DpReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "{DP_SCHEMA}\nkind,metric,m,a,p,shells,r,value,reference,deviation,gh_distortion,max_gap,flagged\n"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "ball,\"{}\",{},{},{},{},{},{},{},{},{},{},{}",
                r.label,
                r.mass,
                r.core,
                self.p,
                self.shells,
                r.ball_radius,
                r.ball_volume,
                r.flat_ball_volume,
                r.volume_deviation,
                r.gh_distortion,
                r.max_gap,
                r.flagged
            );
        }
        for e in &self.exponent {
            let _ = writeln!(
                out,
                "exponent,flat,0,1,{},{},,{},{},{},,{},false",
                e.p,
                e.radii.len(),
                e.slope,
                e.expected,
                e.relative_error,
                e.max_gap
            );
        }
        if let Some(a) = &self.audit {
            let _ = writeln!(
                out,
                "triangle,flat,0,1,{},{},,{},{},{},,,false",
                self.p, self.shells, a.triangle_excess, a.triangle_slack, a.triples
            );
            let _ = writeln!(
                out,
                "symmetry,flat,0,1,{},{},,{},{},{},,,false",
                self.p, self.shells, a.symmetry_defect, a.symmetry_slack, a.pairs
            );
            let _ = writeln!(
                out,
                "refinement,flat,0,1,{},{},,{},,{},{},,false",
                self.p, a.refined_shells, a.refined_ball_volume, a.ball_cauchy, a.resample_distortion
            );
        }
        out
    }
}

/// Flat reference for one mesh scale.
struct FlatReference {
    length: f64,
    mesh: MeshGraph,
    field: DistanceField,
    radius: f64,
    volume: f64,
    vertices: Vec<usize>,
    samples: SampledSet,
}

fn sample_vertices(mesh: &MeshGraph, section: &DpSection) -> Vec<usize> {
    let mut v = vec![0];
    for &s in &section.sample_shells {
        for &d in &section.sample_dirs {
            v.push(mesh.vertex(s, d));
        }
    }
    v
}

fn ball_shell(mesh: &MeshGraph, fraction: f64) -> usize {
    let target = fraction * mesh.spec.radius;
    (1..=mesh.shells())
        .min_by(|a, b| {
            let da = (mesh.radii[*a] / target).ln().abs();
            let db = (mesh.radii[*b] / target).ln().abs();
            da.total_cmp(&db)
        })
        .expect("mesh has shells")
}

fn min_weak_duality(field: &DistanceField) -> f64 {
    field
        .values
        .iter()
        .zip(&field.upper)
        .map(|(lo, hi)| hi - lo)
        .fold(f64::INFINITY, f64::min)
}

fn flat_reference(section: &DpSection, length: f64, opts: &DpOptions) -> nearflat_core::Result<FlatReference> {
    let mesh = build_mesh(&RadialMetric::flat(), section.mesh_spec(length))?;
    let field = distance_field(&mesh, 0, section.p, opts)?;
    let radius = field.values[mesh.vertex(ball_shell(&mesh, section.ball_fraction), 0)];
    let volume = ball_from_field(&mesh, &field, radius)?.volume;
    let vertices = sample_vertices(&mesh, section);
    let samples = sample_set(&mesh, &vertices, section.p, opts)?;
    Ok(FlatReference {
        length,
        mesh,
        field,
        radius,
        volume,
        vertices,
        samples,
    })
}

fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Slope of `log d_p(0, x)` against `log |x|` on a deep flat mesh.
pub fn exponent_study(study: &ExponentStudy, radius: f64, opts: &DpOptions) -> nearflat_core::Result<Vec<ExponentRow>> {
    let mesh = build_mesh(&RadialMetric::flat(), study.mesh_spec(radius))?;
    let shells: Vec<usize> = (study.center_shell - study.span..=study.center_shell + study.span).collect();
    let jobs: Vec<(f64, usize)> = study.ps.iter().flat_map(|&p| shells.iter().map(move |&k| (p, k))).collect();
    let sols = jobs
        .par_iter()
        .map(|&(p, k)| dp_distance(&mesh, 0, mesh.vertex(k, 0), p, opts).map(|(_, s)| s))
        .collect::<nearflat_core::Result<Vec<_>>>()?;
    let radii: Vec<f64> = shells.iter().map(|&k| mesh.radii[k]).collect();
    Ok(study
        .ps
        .iter()
        .zip(sols.chunks(shells.len()))
        .map(|(&p, chunk)| {
            let distances: Vec<f64> = chunk.iter().map(|s| s.primal).collect();
            let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
            let ly: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
            let slope = fit_slope(&lx, &ly);
            let expected = 1.0 - 3.0 / p;
            ExponentRow {
                p,
                slope,
                expected,
                relative_error: (slope - expected).abs() / expected,
                radii: radii.clone(),
                distances,
                max_gap: chunk.iter().map(|s| s.gap).fold(0.0, f64::max),
            }
        })
        .collect())
}

fn abs_gap(s: &DpSolution) -> f64 {
    s.dual - s.primal
}

fn audit(
    flat: &FlatReference,
    section: &DpSection,
    audit: &AuditSection,
    seed: u64,
    opts: &DpOptions,
) -> nearflat_core::Result<AuditSummary> {
    let mesh = &flat.mesh;
    let n = mesh.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triples: Vec<[usize; 3]> = (0..audit.triples)
        .map(|_| {
            let s = sample(&mut rng, n, 3);
            [s.index(0), s.index(1), s.index(2)]
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..audit.pairs)
        .map(|_| {
            let s = sample(&mut rng, n, 2);
            (s.index(0), s.index(1))
        })
        .collect();

    let mut needed = BTreeSet::new();
    for t in &triples {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[0], t[2])] {
            needed.insert((a.min(b), a.max(b)));
        }
    }
    for &(a, b) in &pairs {
        needed.insert((a, b));
        needed.insert((b, a));
    }
    let keys: Vec<(usize, usize)> = needed.into_iter().collect();
    let sols = keys
        .par_iter()
        .map(|&(a, b)| dp_distance(mesh, a, b, section.p, opts).map(|(_, s)| s))
        .collect::<nearflat_core::Result<Vec<_>>>()?;
    let get = |a: usize, b: usize| {
        let i = keys.binary_search(&(a, b)).expect("pair was solved");
        &sols[i]
    };
    let sym = |a: usize, b: usize| get(a.min(b), a.max(b));

    let (mut excess, mut slack) = (f64::NEG_INFINITY, f64::INFINITY);
    for t in &triples {
        for [x, y, z] in [[t[0], t[1], t[2]], [t[1], t[2], t[0]], [t[2], t[0], t[1]]] {
            let (xy, yz, xz) = (sym(x, y), sym(y, z), sym(x, z));
            let e = xz.primal - xy.primal - yz.primal;
            let allowed = 2.0 * abs_gap(xy).max(abs_gap(yz)).max(abs_gap(xz));
            excess = excess.max(e);
            slack = slack.min(allowed - e);
        }
    }
    let (mut defect, mut sym_slack) = (0.0f64, f64::INFINITY);
    for &(a, b) in &pairs {
        let (ab, ba) = (get(a, b), get(b, a));
        let d = (ab.primal - ba.primal).abs();
        defect = defect.max(d);
        sym_slack = sym_slack.min(2.0 * abs_gap(ab).max(abs_gap(ba)) - d);
    }

    // same ball and samples on the refined mesh
    let fine_spec = section.mesh_spec(flat.length).refined();
    let fine = build_mesh(&RadialMetric::flat(), fine_spec)?;
    let fine_field = distance_field(&fine, 0, section.p, opts)?;
    let fine_volume = ball_from_field(&fine, &fine_field, flat.radius)?.volume;
    let fine_vertices: Vec<usize> = flat
        .vertices
        .iter()
        .map(|&v| {
            let (s, d) = mesh.label(v);
            if s == 0 {
                0
            } else {
                fine.vertex(2 * s - 1, d)
            }
        })
        .collect();
    let fine_samples = sample_set(&fine, &fine_vertices, section.p, opts)?;
    let max_distance = flat.samples.dist.iter().flatten().copied().fold(0.0, f64::max);
    Ok(AuditSummary {
        triples: triples.len(),
        triangle_excess: excess,
        triangle_slack: slack,
        pairs: pairs.len(),
        symmetry_defect: defect,
        symmetry_slack: sym_slack,
        refined_shells: fine_spec.shells,
        refined_ball_volume: fine_volume,
        ball_cauchy: (flat.volume / fine_volume - 1.0).abs(),
        resample_distortion: gh_distortion(&flat.samples, &fine_samples)?,
        max_distance,
    })
}

/// Named binary blob written next to the report.
pub type Dump = (String, Vec<u8>);

/// Run the `[dp]` section. Family rows are matched to `report.metrics` by
/// label and copied into the sweep columns.
pub fn run_dp_section(
    section: &DpSection,
    cfg: &RunConfig,
    report: &mut Report,
    timings: &mut Timings,
) -> StageResult<(DpReport, Vec<Dump>)> {
    let opts = section.options();
    let mut dumps = Vec::new();
    let mut certs = Vec::new();
    let mut refs: Vec<FlatReference> = Vec::new();
    let mut rows = Vec::new();
    let mut weak = f64::INFINITY;

    for (i, spec) in cfg.metrics.iter().enumerate() {
        let label = spec.label();
        let clock = Instant::now();
        let metric = stage(&label, "metric", spec.build())?;
        let length = metric.length_scale();
        if !refs.iter().any(|f| f.length == length) {
            refs.push(stage("flat", "reference", flat_reference(section, length, &opts))?);
            weak = weak.min(min_weak_duality(&refs.last().expect("just pushed").field));
        }
        let flat = refs.iter().find(|f| f.length == length).expect("reference exists");
        let (mesh, field, samples) = if metric.is_flat() {
            (flat.mesh.clone(), flat.field.clone(), flat.samples.clone())
        } else {
            let mesh = stage(&label, "mesh", build_mesh(&metric, section.mesh_spec(length)))?;
            let field = stage(&label, "field", distance_field(&mesh, 0, section.p, &opts))?;
            let samples = stage(&label, "samples", sample_set(&mesh, &flat.vertices, section.p, &opts))?;
            (mesh, field, samples)
        };
        weak = weak.min(min_weak_duality(&field));
        let ball = stage(&label, "ball", ball_from_field(&mesh, &field, flat.radius))?;
        let gh = stage(&label, "distortion", gh_distortion(&samples, &flat.samples))?;
        let (mass, core) = spec.mass_core();
        rows.push(DpRow {
            label: label.clone(),
            mass,
            core,
            ball_radius: flat.radius,
            ball_volume: ball.volume,
            flat_ball_volume: flat.volume,
            volume_deviation: (ball.volume / flat.volume - 1.0).abs(),
            gh_distortion: gh,
            max_gap: field.max_gap.max(samples.max_gap),
            flagged: field.flagged,
        });
        if section.dumps {
            let target = *ball.members.iter().max().expect("ball contains the center");
            let target = if target == 0 { mesh.vertex(1, 0) } else { target };
            let (_, sol) = stage(&label, "dump", dp_distance(&mesh, 0, target, section.p, &opts))?;
            dumps.push((format!("mesh_{i}.bin"), dump::encode_mesh(&mesh)));
            dumps.push((format!("solution_{i}.bin"), dump::encode_solution(&sol, mesh.shells())));
        }
        timings.record(&label, "dp", clock);
    }

    let flat_max_gap = refs
        .iter()
        .map(|f| f.field.max_gap.max(f.samples.max_gap))
        .fold(0.0, f64::max);
    if !refs.is_empty() {
        certs.push(
            Certificate::at_least("dp_gap_flat", section.gap_tol, flat_max_gap, 0.0)
                .param("p", section.p)
                .param("shells", section.shells as f64),
        );
        certs.push(Certificate::at_least("dp_weak_duality", weak, 0.0, 1e-12));
    }

    let family: Vec<MetricRow> = rows.iter().map(dp_row_as_metric).collect();
    let order = mass_order(&family);
    if order.len() >= 2 {
        let flagged = order.iter().any(|i| rows[*i].flagged);
        for (check, values) in [
            ("dp_trend_ball_volume", rows.iter().map(|r| r.volume_deviation).collect::<Vec<_>>()),
            ("dp_trend_gh_distortion", rows.iter().map(|r| r.gh_distortion).collect()),
        ] {
            let c = trend_certificate(check, &order, &values).param("p", section.p);
            certs.push(if flagged { c.param(FLAGGED_PARAM, 1.0) } else { c });
        }
    }

    let mut exponent = Vec::new();
    if let Some(study) = &section.exponent {
        let clock = Instant::now();
        exponent = stage("flat", "exponent", exponent_study(study, section.radius, &opts))?;
        for e in &exponent {
            certs.push(
                Certificate::equal(format!("dp_exponent_p{}", e.p), e.slope / e.expected, 1.0, study.tolerance)
                    .param("p", e.p)
                    .param("slope", e.slope)
                    .param("expected", e.expected)
                    .param("max_gap", e.max_gap)
                    .param("shells", study.shells as f64),
            );
        }
        timings.record("flat", "exponent", clock);
    }

    let mut audit_summary = None;
    if let Some(a) = &section.audit {
        let clock = Instant::now();
        if refs.is_empty() {
            refs.push(stage("flat", "reference", flat_reference(section, 1.0, &opts))?);
        }
        let flat = &refs[0];
        let s = stage("flat", "audit", audit(flat, section, a, cfg.seed, &opts))?;
        certs.push(
            Certificate::at_least("dp_triangle", s.triangle_slack, 0.0, 0.0)
                .param("triples", s.triples as f64)
                .param("worst_excess", s.triangle_excess),
        );
        certs.push(
            Certificate::at_least("dp_symmetry", s.symmetry_slack, 0.0, 0.0)
                .param("pairs", s.pairs as f64)
                .param("worst_defect", s.symmetry_defect),
        );
        certs.push(
            Certificate::at_least("dp_ball_cauchy", 0.03, s.ball_cauchy, 0.0)
                .param("refined_shells", s.refined_shells as f64)
                .param("refined_volume", s.refined_ball_volume),
        );
        certs.push(
            Certificate::at_least("dp_resample_distortion", 0.03 * s.max_distance, s.resample_distortion, 0.0)
                .param("max_distance", s.max_distance),
        );
        audit_summary = Some(s);
        timings.record("flat", "audit", clock);
    }

    for r in &rows {
        if let Some(m) = report.metrics.iter_mut().find(|m| m.label == r.label) {
            m.row.ball_volume_deviation = Some(r.volume_deviation);
            m.row.gh_distortion = Some(r.gh_distortion);
        }
    }
    let names = dumps.iter().map(|d| d.0.clone()).collect();
    Ok((
        DpReport {
            p: section.p,
            shells: section.shells,
            mesh_radius: section.radius,
            gap_tol: section.gap_tol,
            flat_max_gap,
            rows,
            exponent,
            audit: audit_summary,
            dumps: names,
            certificates: certs,
        },
        dumps,
    ))
}

fn dp_row_as_metric(r: &DpRow) -> MetricRow {
    MetricRow {
        mass: r.mass,
        core: r.core,
        deficit: 0.0,
        epsilon: 0.0,
        min_willmore: 0.0,
        iso_constant: 0.0,
        eta: 1.0,
        mu: 0.0,
        ball_volume_deviation: Some(r.volume_deviation),
        gh_distortion: Some(r.gh_distortion),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x: Vec<f64> = (0..5).map(|k| (k as f64 * 0.3).exp()).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v.powf(0.5)).collect();
        let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        assert!((fit_slope(&lx, &ly) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ball_shell_picks_nearest_radius() {
        let m = build_mesh(&RadialMetric::flat(), nearflat_core::dpmetric::MeshSpec::new(16.0, 16)).unwrap();
        let k = ball_shell(&m, 0.25);
        assert_eq!(k, 10);
        assert!((m.radii[k] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn small_flat_section_runs() {
        let text = "name = \"t\"\n[[metric]]\nfamily = \"flat\"\n[dp]\nshells = 6\nradius = 4.0\nsample_shells = [2, 3]\ndumps = true\n";
        let cfg = RunConfig::parse(text).unwrap();
        let mut report = Report::new("t", crate::pipeline::Command::Dp);
        let mut timings = Timings::default();
        let (dp, dumps) = run_dp_section(cfg.dp.as_ref().unwrap(), &cfg, &mut report, &mut timings).unwrap();
        assert_eq!(dp.rows.len(), 1);
        assert_eq!(dp.rows[0].volume_deviation, 0.0);
        assert_eq!(dp.rows[0].gh_distortion, 0.0);
        assert!(dp.certificates.iter().all(|c| c.passed), "{:?}", dp.certificates);
        assert_eq!(dumps.len(), 2);
        assert!(dumps[0].1.starts_with(dump::MESH_MAGIC));
        let csv = dp.to_csv();
        assert!(csv.starts_with(DP_SCHEMA));
        assert_eq!(csv.lines().count(), 3);
    }
}
