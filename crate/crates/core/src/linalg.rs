//! Small dense-band and iterative solvers used by the discretizations.

use crate::error::{Error, Result};

/// Symmetric matrix stored as its lower band: entry `(i, j)` with
/// `i - bw ≤ j ≤ i` lives at `data[i * (bw + 1) + (j + bw - i)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `v` to the symmetric pair `(i, j)`, `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..i {
                let a = self.data[self.idx(i, j)];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += self.data[self.idx(i, i)] * x[i];
        }
        y
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Cholesky factorization `A = L Lᵀ` within the band.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.clone();
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut d = l.data[l.idx(j, j)];
            for k in lo..j {
                let v = l.data[l.idx(j, k)];
                d -= v * v;
            }
            if !(d > 0.0) {
                return Err(Error::numerical(format!("matrix not positive definite at pivot {j}"), d));
            }
            let d = d.sqrt();
            let jj = l.idx(j, j);
            l.data[jj] = d;
            for i in j + 1..(j + bw + 1).min(n) {
                let lo_i = i.saturating_sub(bw).max(lo);
                let mut s = l.data[l.idx(i, j)];
                for k in lo_i..j {
                    s -= l.data[l.idx(i, k)] * l.data[l.idx(j, k)];
                }
                let ij = l.idx(i, j);
                l.data[ij] = s / d;
            }
        }
        Ok(BandedCholesky { l })
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    l: BandedSym,
}

impl BandedCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.l;
        let (n, bw) = (l.n, l.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = y[i];
            for k in lo..i {
                s -= l.data[l.idx(i, k)] * y[k];
            }
            y[i] = s / l.data[l.idx(i, i)];
        }
        for i in (0..n).rev() {
            let hi = (i + bw + 1).min(n);
            let mut s = y[i];
            for k in i + 1..hi {
                s -= l.data[l.idx(k, i)] * y[k];
            }
            y[i] = s / l.data[l.idx(i, i)];
        }
        y
    }
}

/// Result of a preconditioned conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    #[allow(dead_code)]
    pub iterations: usize,
    /// Final `‖b - Ax‖ / ‖b‖`.
    #[allow(dead_code)]
    pub residual: f64,
}

/// Jacobi-preconditioned CG for a symmetric positive (semi)definite operator.
pub fn conjugate_gradient<A>(apply: A, diag: &[f64], b: &[f64], x0: &[f64], rel_tol: f64, max_iter: usize) -> Result<CgOutcome>
where
    A: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let dot = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).map(|(a, b)| a * b).sum() };
    let bnorm = dot(b, b).sqrt();
    let mut x = x0.to_vec();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let precond = |r: &[f64]| -> Vec<f64> {
        r.iter()
            .zip(diag)
            .map(|(r, d)| if *d > 0.0 { r / d } else { *r })
            .collect()
    };
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let res = dot(&r, &r).sqrt() / bnorm;
        if res <= rel_tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                residual: res,
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::numerical("CG breakdown: operator not positive on search direction", res));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = dot(&r, &r).sqrt() / bnorm;
    if res <= rel_tol {
        Ok(CgOutcome {
            x,
            iterations: max_iter,
            residual: res,
        })
    } else {
        Err(Error::numerical(format!("CG did not converge in {max_iter} iterations"), res))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, bw: usize, rng: &mut ChaCha8Rng) -> BandedSym {
        let mut a = BandedSym::zeros(n, bw);
        for i in 0..n {
            for j in i.saturating_sub(bw)..i {
                a.add(i, j, rng.random_range(-1.0..1.0));
            }
            a.add(i, i, 2.0 * bw as f64 + 1.0);
        }
        a
    }

    #[test]
    fn cholesky_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (n, bw) in [(1, 0), (5, 1), (40, 3), (100, 7)] {
            let a = random_spd(n, bw, &mut rng);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = a.matvec(&x);
            let y = a.cholesky().unwrap().solve(&b);
            for (u, v) in x.iter().zip(&y) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut a = BandedSym::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert!(a.cholesky().is_err());
        assert_eq!(a.get(0, 1), 2.0);
    }

    #[test]
    fn cg_matches_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(60, 4, &mut rng);
        let b: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = (0..60).map(|i| a.get(i, i)).collect();
        let out = conjugate_gradient(|x, y| y.copy_from_slice(&a.matvec(x)), &diag, &b, &vec![0.0; 60], 1e-13, 500).unwrap();
        let exact = a.cholesky().unwrap().solve(&b);
        for (u, v) in out.x.iter().zip(&exact) {
            assert!((u - v).abs() < 1e-10);
        }
        assert!(out.residual <= 1e-13);
    }
}
