//! Report assembly and CSV / JSON rendering.
//!
//! Every CSV starts with a `# nearflat-<table> v<N>` line. Reports contain
//! no timings or absolute paths, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nearflat_core::Certificate;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dp::DpReport;
use crate::pipeline::{mass_order, Command};

pub const REPORT_SCHEMA: &str = "nearflat-report v1";
pub const SWEEP_SCHEMA: &str = "# nearflat-sweep v1";
pub const CERTIFICATE_SCHEMA: &str = "# nearflat-certificates v1";
pub const DP_SCHEMA: &str = "# nearflat-dp v1";

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub mass: f64,
    pub core: f64,
    /// `δ̂ = Λ - (radial Sobolev infimum)`.
    pub deficit: f64,
    /// `ε(δ̂)` from the calibrated chain.
    pub epsilon: f64,
    /// Least Willmore energy over the sphere grid.
    pub min_willmore: f64,
    pub iso_constant: f64,
    /// `c_iso / (36π)^{1/3}`.
    pub eta: f64,
    /// Least `μ` estimate over the configured `τ`.
    pub mu: f64,
    pub ball_volume_deviation: Option<f64>,
    pub gh_distortion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub label: String,
    pub row: MetricRow,
    pub sobolev_iterations: usize,
    pub sobolev_residual: f64,
    pub certificates: Vec<Certificate>,
}

/// Least-squares fit of `log ε` against `log δ̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub points: usize,
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    /// 95% confidence band on the slope.
    pub lower: f64,
    pub upper: f64,
}

/// Fit over non-flat rows with positive `δ̂` and `ε`; `None` below two points.
pub fn slope_fit(rows: &[MetricRow]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = mass_order(rows)
        .into_iter()
        .map(|i| &rows[i])
        .filter(|r| r.deficit > 0.0 && r.epsilon > 0.0)
        .map(|r| (r.deficit.ln(), r.epsilon.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (std_error, half) = if n > 2 {
        let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        let se = (sse / (nf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 2.0).expect("positive degrees of freedom").inverse_cdf(0.975);
        (se, t * se)
    } else {
        (f64::NAN, f64::NAN)
    };
    Some(SlopeFit {
        points: n,
        slope,
        intercept,
        std_error,
        lower: slope - half,
        upper: slope + half,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub certificates: usize,
    pub passed: usize,
    /// `group/check` of every failing certificate, in report order.
    pub failures: Vec<String>,
    /// Certificates excluded from the exit status (flagged `d_p` solves).
    pub flagged: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub name: String,
    pub command: Command,
    pub metrics: Vec<MetricReport>,
    pub trends: Vec<Certificate>,
    pub fit: Option<SlopeFit>,
    pub conformal: Option<Certificate>,
    pub dp: Option<DpReport>,
    pub negative: Vec<Certificate>,
    pub summary: Summary,
}

/// Flag marking a certificate that rests on a solve above the gap tolerance.
pub const FLAGGED_PARAM: &str = "flagged";

impl Report {
    pub fn new(name: &str, command: Command) -> Self {
        Self {
            schema: REPORT_SCHEMA.into(),
            name: name.into(),
            command,
            metrics: Vec::new(),
            trends: Vec::new(),
            fit: None,
            conformal: None,
            dp: None,
            negative: Vec::new(),
            summary: Summary::default(),
        }
    }

    /// Every certificate with its group label, in report order.
    pub fn certificates(&self) -> Vec<(String, &Certificate)> {
        let mut out = Vec::new();
        for m in &self.metrics {
            out.extend(m.certificates.iter().map(|c| (m.label.clone(), c)));
        }
        out.extend(self.trends.iter().map(|c| ("trend".to_string(), c)));
        out.extend(self.conformal.iter().map(|c| ("conformal".to_string(), c)));
        if let Some(dp) = &self.dp {
            out.extend(dp.certificates.iter().map(|c| ("dp".to_string(), c)));
        }
        out.extend(self.negative.iter().map(|c| ("negative".to_string(), c)));
        out
    }

    pub fn summarize(&mut self) {
        let mut s = Summary::default();
        for (group, c) in self.certificates() {
            let id = format!("{group}/{}", c.check);
            s.certificates += 1;
            if c.params.get(FLAGGED_PARAM).is_some_and(|v| *v != 0.0) {
                s.flagged.push(id);
            } else if c.passed {
                s.passed += 1;
            } else {
                s.failures.push(id);
            }
        }
        self.summary = s;
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failures.is_empty()
    }

    /// Find a certificate by group and check name.
    pub fn find(&self, group: &str, check: &str) -> Option<&Certificate> {
        self.certificates()
            .into_iter()
            .find(|(g, c)| g == group && c.check == check)
            .map(|(_, c)| c)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn certificates_csv(&self) -> String {
        let mut out = format!("{CERTIFICATE_SCHEMA}\ngroup,check,lhs,rhs,margin,tolerance,passed,caveats\n");
        for (group, c) in self.certificates() {
            let caveats: Vec<String> = c
                .caveats
                .iter()
                .map(|k| serde_json::to_value(k).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
                .collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                quote(&group),
                quote(&c.check),
                c.lhs,
                c.rhs,
                c.margin,
                c.tolerance,
                c.passed,
                caveats.join(";")
            );
        }
        out
    }

    pub fn sweep_csv(&self) -> String {
        let mut out = format!(
            "{SWEEP_SCHEMA}\nmetric,m,a,delta_hat,epsilon,min_willmore,iso_constant,eta,mu,dp_ball_volume_deviation,gh_distortion\n"
        );
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for m in &self.metrics {
            let r = &m.row;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                quote(&m.label),
                r.mass,
                r.core,
                r.deficit,
                r.epsilon,
                r.min_willmore,
                r.iso_constant,
                r.eta,
                r.mu,
                opt(r.ball_volume_deviation),
                opt(r.gh_distortion)
            );
        }
        match &self.fit {
            Some(f) => {
                let _ = writeln!(
                    out,
                    "# fit log(epsilon) ~ log(delta_hat): slope={} intercept={} std_error={} ci95=[{}, {}] points={}",
                    f.slope, f.intercept, f.std_error, f.lower, f.upper, f.points
                );
            }
            None => out.push_str("# fit log(epsilon) ~ log(delta_hat): fewer than two rows\n"),
        }
        out
    }

    /// Human-readable summary for the terminal.
    pub fn summary_text(&self) -> String {
        let s = &self.summary;
        let mut out = format!(
            "{}: {} certificates, {} passed, {} failed, {} flagged\n",
            self.name,
            s.certificates,
            s.passed,
            s.failures.len(),
            s.flagged.len()
        );
        for f in &s.failures {
            let _ = writeln!(out, "  FAIL {f}");
        }
        for f in &s.flagged {
            let _ = writeln!(out, "  FLAGGED {f}");
        }
        out
    }

    /// Write `report.json`, `certificates.csv`, and the sweep / `d_p` tables.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let mut files = vec![
            ("report.json", self.to_json()),
            ("certificates.csv", self.certificates_csv()),
        ];
        if !self.metrics.is_empty() {
            files.push(("sweep.csv", self.sweep_csv()));
        }
        if let Some(dp) = &self.dp {
            files.push(("dp.csv", dp.to_csv()));
        }
        let mut names = Vec::new();
        for (name, text) in files {
            std::fs::write(dir.join(name), text)?;
            names.push(name.to_string());
        }
        Ok(names)
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Wall-clock seconds per `(group, stage)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings(pub BTreeMap<String, f64>);

impl Timings {
    pub fn record(&mut self, group: &str, stage: &str, since: Instant) {
        *self.0.entry(format!("{group}/{stage}")).or_default() += since.elapsed().as_secs_f64();
    }

    pub fn total(&self) -> f64 {
        self.0.values().fold(0.0, |a, b| a + b)
    }
}
