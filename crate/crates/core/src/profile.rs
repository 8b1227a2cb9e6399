//! Sampled radial functions with piecewise cubic Hermite interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A function of one radial variable with a first derivative.
pub trait RadialFn: Sync {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
}

/// Adapter turning a pair of closures into a [`RadialFn`].
pub struct FnProfile<F, D> {
    pub f: F,
    pub df: D,
}

impl<F, D> FnProfile<F, D>
where
    F: Fn(f64) -> f64 + Sync,
    D: Fn(f64) -> f64 + Sync,
{
    pub fn new(f: F, df: D) -> Self {
        Self { f, df }
    }
}

impl<F, D> RadialFn for FnProfile<F, D>
where
    F: Fn(f64) -> f64 + Sync,
    D: Fn(f64) -> f64 + Sync,
{
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        (self.df)(x)
    }
}

/// How nodal slopes were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlopeRule {
    /// Supplied by the caller (exact derivatives).
    Exact,
    /// Three-point finite differences on the nonuniform grid.
    ThreePoint,
    /// Fritsch–Carlson limited slopes; preserves monotonicity of the data.
    Monotone,
}

/// Piecewise cubic Hermite interpolant on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    grid: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    rule: SlopeRule,
}

impl RadialProfile {
    fn check(grid: &[f64], values: &[f64]) -> Result<()> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::Config(format!(
                "profile needs matching grid/value arrays of length >= 2 (got {} and {})",
                grid.len(),
                values.len()
            )));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("profile grid must be strictly increasing".into()));
        }
        if grid.iter().chain(values).any(|v| !v.is_finite()) {
            return Err(Error::Config("profile contains non-finite entries".into()));
        }
        Ok(())
    }

    /// Build from samples and exact slopes.
    pub fn with_slopes(grid: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        Self::check(&grid, &values)?;
        if slopes.len() != grid.len() || slopes.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("slope array must match the grid and be finite".into()));
        }
        Ok(Self {
            grid,
            values,
            slopes,
            rule: SlopeRule::Exact,
        })
    }

    /// Build from samples, estimating slopes with three-point differences.
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::check(&grid, &values)?;
        let slopes = three_point_slopes(&grid, &values);
        Ok(Self {
            grid,
            values,
            slopes,
            rule: SlopeRule::ThreePoint,
        })
    }

    /// Build from samples with monotonicity-preserving slopes.
    pub fn monotone(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::check(&grid, &values)?;
        let slopes = fritsch_carlson(&grid, &values);
        Ok(Self {
            grid,
            values,
            slopes,
            rule: SlopeRule::Monotone,
        })
    }

    /// Sample an analytic function and its derivative on `grid`.
    pub fn sample<R: RadialFn + ?Sized>(f: &R, grid: Vec<f64>) -> Result<Self> {
        let values = grid.iter().map(|&x| f.value(x)).collect();
        let slopes = grid.iter().map(|&x| f.derivative(x)).collect();
        Self::with_slopes(grid, values, slopes)
    }

    /// Parse a two-column text table (abscissa, value). `#` starts a comment.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::Config(format!(
                    "line {}: expected two columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))
            };
            grid.push(parse(cols[0])?);
            values.push(parse(cols[1])?);
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }
    pub fn slope_rule(&self) -> SlopeRule {
        self.rule
    }
    pub fn domain(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }
    pub fn contains(&self, x: f64) -> bool {
        let (a, b) = self.domain();
        x >= a && x <= b
    }

    fn cell(&self, x: f64) -> usize {
        let n = self.grid.len();
        self.grid.partition_point(|&g| g <= x).clamp(1, n - 1) - 1
    }

    /// Hermite basis evaluation: returns (value, first, second derivative).
    /// Points outside the grid use the nearest end cell's cubic.
    pub fn eval_all(&self, x: f64) -> (f64, f64, f64) {
        let i = self.cell(x);
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        let d = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1)
            / h;
        let dd = ((12.0 * t - 6.0) * y0
            + (6.0 * t - 4.0) * m0
            + (-12.0 * t + 6.0) * y1
            + (6.0 * t - 2.0) * m1)
            / (h * h);
        (v, d, dd)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_all(x).0
    }

    /// Value at `x`, or a domain error when `x` is outside the grid.
    pub fn try_eval(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            let (a, b) = self.domain();
            return Err(Error::domain(format!("{x} outside profile domain [{a}, {b}]")));
        }
        Ok(self.eval(x))
    }

    /// Exact integral of the interpolant over the whole grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let h = w[1] - w[0];
                0.5 * h * (self.values[i] + self.values[i + 1])
                    + h * h / 12.0 * (self.slopes[i] - self.slopes[i + 1])
            })
            .sum()
    }

    /// Same grid, abscissae scaled by `lambda` and values by `value_scale`.
    pub fn dilate(&self, lambda: f64, value_scale: f64) -> Self {
        Self {
            grid: self.grid.iter().map(|x| x * lambda).collect(),
            values: self.values.iter().map(|v| v * value_scale).collect(),
            slopes: self.slopes.iter().map(|s| s * value_scale / lambda).collect(),
            rule: self.rule,
        }
    }
}

impl RadialFn for RadialProfile {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        self.eval_all(x).1
    }
}

fn three_point_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 2 {
        let s = (y[1] - y[0]) / (x[1] - x[0]);
        return vec![s, s];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        let s0 = (y[i] - y[i - 1]) / h0;
        let s1 = (y[i + 1] - y[i]) / h1;
        d[i] = (h1 * s0 + h0 * s1) / (h0 + h1);
    }
    // one-sided second-order formulas at the ends
    let end = |i0: usize, i1: usize, i2: usize| {
        let h0 = x[i1] - x[i0];
        let h1 = x[i2] - x[i1];
        let s0 = (y[i1] - y[i0]) / h0;
        let s1 = (y[i2] - y[i1]) / h1;
        ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1)
    };
    d[0] = end(0, 1, 2);
    let h0 = x[n - 1] - x[n - 2];
    let h1 = x[n - 2] - x[n - 3];
    let s0 = (y[n - 1] - y[n - 2]) / h0;
    let s1 = (y[n - 2] - y[n - 3]) / h1;
    d[n - 1] = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    d
}

fn fritsch_carlson(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let secant: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut d = three_point_slopes(x, y);
    for i in 0..n {
        let left = if i > 0 { Some(secant[i - 1]) } else { None };
        let right = if i < n - 1 { Some(secant[i]) } else { None };
        match (left, right) {
            (Some(l), Some(r)) if l * r <= 0.0 => d[i] = 0.0,
            _ => {
                for s in [left, right].into_iter().flatten() {
                    if s == 0.0 {
                        d[i] = 0.0;
                    } else if d[i] / s > 3.0 {
                        d[i] = 3.0 * s;
                    } else if d[i] / s < 0.0 {
                        d[i] = 0.0;
                    }
                }
            }
        }
    }
    d
}

/// Geometric grid of `n` points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}
