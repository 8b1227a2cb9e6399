//! Audit record for one inequality instance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Known caveats attached to a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Caveat {
    /// Profile computed from centered balls only; an upper bound on the true profile.
    CenteredBallSurrogate,
    /// Sobolev infimum taken over radial test functions only.
    RadialMinimizerOnly,
    /// The bound being checked is trivially satisfied (e.g. ε ≥ 1/2).
    Vacuous,
    /// Rearrangement used the distribution-function fallback for a non-monotone profile.
    LevelSetFallback,
    /// Certificate produced from a deliberately broken fixture.
    NegativeFixture,
    /// Only centered spheres are tested as surfaces.
    CenteredSpheresOnly,
}

/// Outcome of one inequality check: `lhs ≥ rhs` up to `tolerance`,
/// with `margin = lhs - rhs` (or the worst margin over a sweep).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub params: BTreeMap<String, f64>,
    pub inputs: BTreeMap<String, String>,
    pub constants: BTreeMap<String, f64>,
    pub caveats: Vec<Caveat>,
}

impl Certificate {
    /// Certificate for `lhs ≥ rhs - tolerance`.
    pub fn at_least(check: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let margin = lhs - rhs;
        Self {
            check: check.into(),
            lhs,
            rhs,
            margin,
            tolerance,
            passed: margin.is_finite() && margin >= -tolerance,
            params: BTreeMap::new(),
            inputs: BTreeMap::new(),
            constants: BTreeMap::new(),
            caveats: Vec::new(),
        }
    }

    /// Certificate for `|lhs - rhs| ≤ tolerance`; margin is `tolerance - |lhs - rhs|`
    /// reported as the negative absolute residual.
    pub fn equal(check: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let resid = (lhs - rhs).abs();
        Self {
            check: check.into(),
            lhs,
            rhs,
            margin: -resid,
            tolerance,
            passed: resid.is_finite() && resid <= tolerance,
            params: BTreeMap::new(),
            inputs: BTreeMap::new(),
            constants: BTreeMap::new(),
            caveats: Vec::new(),
        }
    }

    /// Combine several certificates; passes iff all pass, margin is the worst.
    pub fn bundle(check: impl Into<String>, parts: &[Certificate]) -> Self {
        let worst = parts
            .iter()
            .min_by(|a, b| (a.margin + a.tolerance).total_cmp(&(b.margin + b.tolerance)));
        let mut c = match worst {
            Some(w) => Self {
                check: check.into(),
                lhs: w.lhs,
                rhs: w.rhs,
                margin: w.margin,
                tolerance: w.tolerance,
                passed: parts.iter().all(|p| p.passed),
                params: BTreeMap::new(),
                inputs: BTreeMap::new(),
                constants: BTreeMap::new(),
                caveats: Vec::new(),
            },
            None => Self::at_least(check, 0.0, 0.0, 0.0),
        };
        for p in parts {
            c.inputs.insert(p.check.clone(), if p.passed { "pass" } else { "fail" }.into());
            for cv in &p.caveats {
                c.flag(*cv);
            }
        }
        c
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn input(mut self, key: &str, value: impl Into<String>) -> Self {
        self.inputs.insert(key.to_string(), value.into());
        self
    }

    pub fn constant(mut self, key: &str, value: f64) -> Self {
        self.constants.insert(key.to_string(), value);
        self
    }

    pub fn with_caveat(mut self, caveat: Caveat) -> Self {
        self.flag(caveat);
        self
    }

    pub fn flag(&mut self, caveat: Caveat) {
        if let Err(pos) = self.caveats.binary_search(&caveat) {
            self.caveats.insert(pos, caveat);
        }
    }

    pub fn has(&self, caveat: Caveat) -> bool {
        self.caveats.contains(&caveat)
    }
}
