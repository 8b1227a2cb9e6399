//! Run configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use nearflat_core::dpmetric::{DpOptions, MeshSpec};
use nearflat_core::{Error, RadialMetric, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    /// Output directory; relative paths resolve against the working directory.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, rename = "metric")]
    pub metrics: Vec<MetricSpec>,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sobolev: SobolevSection,
    #[serde(default)]
    pub dp: Option<DpSection>,
    #[serde(default)]
    pub negative: NegativeSection,
}

fn default_seed() -> u64 {
    20_240_601
}

/// One metric of the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "family", rename_all = "snake_case")]
pub enum MetricSpec {
    Flat,
    SmoothedSchwarzschild { mass: f64, core: f64 },
}

impl MetricSpec {
    pub fn build(&self) -> Result<RadialMetric> {
        match self {
            Self::Flat => Ok(RadialMetric::flat()),
            Self::SmoothedSchwarzschild { mass, core } => RadialMetric::smoothed_schwarzschild(*mass, *core),
        }
    }

    /// `(m, a)`, with `m = 0` and `a = 1` for flat space.
    pub fn mass_core(&self) -> (f64, f64) {
        match self {
            Self::Flat => (0.0, 1.0),
            Self::SmoothedSchwarzschild { mass, core } => (*mass, *core),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Flat => "flat".into(),
            Self::SmoothedSchwarzschild { mass, core } => format!("schwarzschild(m={mass},a={core})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    /// Sphere radii in units of the metric length scale.
    pub spheres: Vec<f64>,
    pub taus: Vec<f64>,
    /// Validity threshold of the calibrated chain.
    pub delta_max: f64,
    pub conformal: bool,
    /// Rearrangement test profiles: Gaussian widths `σ/τ` at `τ = 1`.
    pub rearrangement_sigmas: Vec<f64>,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            spheres: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
            taus: vec![0.5, 1.0, 2.0],
            delta_max: nearflat_core::willmore::DEFAULT_DELTA_MAX,
            conformal: true,
            rearrangement_sigmas: vec![0.5, 1.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Margin allowed on pipeline inequality certificates.
    pub certificate: f64,
    /// Multiplier applied to every tolerance; overridden by `--tol-scale`.
    pub scale: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            certificate: 1e-6,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SobolevSection {
    pub nodes: usize,
    pub betas: Vec<f64>,
}

impl Default for SobolevSection {
    fn default() -> Self {
        let d = nearflat_core::sobolev::SobolevOptions::default();
        Self {
            nodes: d.nodes,
            betas: d.betas,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpSection {
    pub p: f64,
    /// Shells of the family mesh; overridden by `--resolution`.
    pub shells: usize,
    /// Mesh radius in units of the metric length scale.
    pub radius: f64,
    /// The ball radius is the flat `d_p` from the center to the shell
    /// nearest this fraction of the mesh radius.
    pub ball_fraction: f64,
    /// Shells and directions of the Gromov–Hausdorff samples.
    pub sample_shells: Vec<usize>,
    pub sample_dirs: Vec<usize>,
    pub gap_tol: f64,
    /// Write binary mesh and solution dumps.
    pub dumps: bool,
    pub exponent: Option<ExponentStudy>,
    pub audit: Option<AuditSection>,
}

impl Default for DpSection {
    fn default() -> Self {
        Self {
            p: 6.0,
            shells: 16,
            radius: 16.0,
            ball_fraction: 0.25,
            sample_shells: vec![4, 6, 8, 10],
            sample_dirs: vec![0, 5],
            gap_tol: DpOptions::default().gap_tol,
            dumps: true,
            exponent: None,
            audit: None,
        }
    }
}

impl DpSection {
    pub fn mesh_spec(&self, length: f64) -> MeshSpec {
        MeshSpec::new(self.radius * length, self.shells)
    }

    pub fn options(&self) -> DpOptions {
        DpOptions {
            gap_tol: self.gap_tol,
            ..DpOptions::default()
        }
    }
}

/// Flat-space scaling study `d_p(0, λx) = λ^{1-3/p} d_p(0, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExponentStudy {
    pub ps: Vec<f64>,
    pub shells: usize,
    pub inner_ratio: f64,
    /// Index of the reference shell; points run over `center ± span` shells.
    pub center_shell: usize,
    pub span: usize,
    pub tolerance: f64,
}

impl Default for ExponentStudy {
    fn default() -> Self {
        Self {
            ps: vec![4.0, 6.0, 10.0],
            shells: 91,
            inner_ratio: 1e-9,
            center_shell: 77,
            span: 6,
            tolerance: 0.02,
        }
    }
}

impl ExponentStudy {
    /// Mesh with the grading of the 16-shell default mesh, extended inward.
    pub fn mesh_spec(&self, radius: f64) -> MeshSpec {
        MeshSpec {
            radius,
            shells: self.shells,
            inner_ratio: self.inner_ratio,
        }
    }
}

/// Symmetry and triangle-inequality spot checks on the flat mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSection {
    pub triples: usize,
    pub pairs: usize,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self { triples: 100, pairs: 20 }
    }
}

/// Deliberately broken fixtures; every one is expected to fail.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NegativeSection {
    pub fixtures: Vec<Fixture>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixture {
    /// `ε = 0` in the Willmore check on a nonflat metric.
    WillmoreZeroEpsilon,
    /// `ε = 0` against a centered profile with an artificial dip.
    PinchedProfile,
    /// `η = 1` in the gradient comparison with a far-spread profile.
    UnitEta,
    /// `W(0)` understated in the monotonicity bound.
    UnderstatedFlux,
    /// Conformal factor with denominator 4.1.
    PerturbedConformal,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Config("name must not be empty".into()));
        }
        for m in &self.metrics {
            m.build().map_err(|e| Error::Config(format!("{}: {e}", m.label())))?;
        }
        let c = &self.checks;
        if c.spheres.iter().chain(&c.taus).chain(&c.rearrangement_sigmas).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("sphere radii, τ and σ values must be positive".into()));
        }
        if !(c.delta_max > 0.0 && c.delta_max.is_finite()) {
            return Err(Error::Config(format!("delta_max = {} must be positive", c.delta_max)));
        }
        let t = &self.tolerances;
        if !(t.certificate >= 0.0 && t.scale > 0.0 && t.scale.is_finite()) {
            return Err(Error::Config("tolerances must be nonnegative with a positive scale".into()));
        }
        if self.sobolev.betas.is_empty() || self.sobolev.nodes < 16 {
            return Err(Error::Config("sobolev needs ≥ 16 nodes and at least one seed β".into()));
        }
        if let Some(dp) = &self.dp {
            if !(dp.p > 3.0) {
                return Err(Error::Config(format!("d_p exponent {} must exceed 3", dp.p)));
            }
            if !(dp.ball_fraction > 0.0 && dp.ball_fraction < 1.0) || !(dp.radius > 0.0) {
                return Err(Error::Config("d_p radius must be positive and ball_fraction in (0, 1)".into()));
            }
            dp.mesh_spec(1.0).validate()?;
            if dp.sample_shells.iter().any(|s| *s == 0 || *s > dp.shells) {
                return Err(Error::Config("sample shells must lie in 1..=shells".into()));
            }
            if dp.sample_dirs.iter().any(|d| *d >= nearflat_core::dpmetric::mesh::DIRECTIONS) {
                return Err(Error::Config("sample directions must be below 12".into()));
            }
            if let Some(e) = &dp.exponent {
                if e.ps.iter().any(|p| !(*p > 3.0)) {
                    return Err(Error::Config("exponent study needs p > 3".into()));
                }
                e.mesh_spec(1.0).validate()?;
                if e.span == 0 || e.center_shell < e.span + 1 || e.center_shell + e.span > e.shells {
                    return Err(Error::Config("exponent study shells fall outside the mesh".into()));
                }
            }
        }
        Ok(())
    }

    /// Apply command-line overrides.
    pub fn with_overrides(mut self, tol_scale: Option<f64>, resolution: Option<usize>) -> Result<Self> {
        if let Some(s) = tol_scale {
            self.tolerances.scale = s;
        }
        if let Some(n) = resolution {
            match self.dp.as_mut() {
                Some(dp) => dp.shells = n,
                None => return Err(Error::Config("--resolution needs a [dp] section".into())),
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn tol(&self) -> f64 {
        self.tolerances.certificate * self.tolerances.scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse("name = \"x\"\n[[metric]]\nfamily = \"flat\"\n").unwrap();
        assert_eq!(c.metrics, vec![MetricSpec::Flat]);
        assert_eq!(c.checks, Checks::default());
        assert!(c.dp.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("name = \"x\"\nnmae = 1\n").is_err());
        assert!(RunConfig::parse("name = \"x\"\n[checks]\nsphere = [1.0]\n").is_err());
        let bad = "name = \"x\"\n[[metric]]\nfamily = \"smoothed_schwarzschild\"\nmass = 1.0\ncore = 1.0\nspin = 0.0\n";
        assert!(RunConfig::parse(bad).is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let neg = "name = \"x\"\n[[metric]]\nfamily = \"smoothed_schwarzschild\"\nmass = -1.0\ncore = 1.0\n";
        assert!(matches!(RunConfig::parse(neg), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("name = \"x\"\n[dp]\np = 2.5\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("name = \"x\"\n[dp]\nshells = 2\n"), Err(Error::Config(_))));
    }

    #[test]
    fn overrides_apply() {
        let c = RunConfig::parse("name = \"x\"\n[dp]\n").unwrap();
        let c = c.with_overrides(Some(2.0), Some(31)).unwrap();
        assert_eq!(c.dp.as_ref().unwrap().shells, 31);
        assert_eq!(c.tol(), 2e-6);
        let plain = RunConfig::parse("name = \"x\"\n").unwrap();
        assert!(plain.with_overrides(None, Some(8)).is_err());
    }
}
