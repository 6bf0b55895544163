//! Compressed sparse rows and a preconditioned conjugate gradient solver for
//! symmetric positive semidefinite systems with a constant null space.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed in the
    /// order given.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in triplets {
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .binary_search(&c)
            .map_or(0.0, |k| self.vals[range.start + k])
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        (0..self.n)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// Largest absolute row sum, an upper bound on the 2-norm for symmetric
    /// matrices.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.vals.iter_mut().for_each(|v| *v *= s);
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    Jacobi,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// `‖b − K x‖ / ‖b‖` at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Subtracts the `weights`-weighted mean.
pub fn remove_weighted_mean(x: &mut [f64], weights: &[f64]) {
    let total: f64 = weights.iter().sum();
    let mean = dot(x, weights) / total;
    x.iter_mut().for_each(|v| *v -= mean);
}

/// PCG for `K x = b` where `K` is SPSD with null space spanned by constants
/// and `b` sums to zero. The iterate is re-centred to zero `mass`-weighted
/// mean every step; this does not change the residual.
pub fn pcg_projected(
    k: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    mass: &[f64],
    tol: f64,
    max_iters: usize,
    precond: Preconditioner,
) -> CgOutcome {
    let n = k.dim();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let inv_diag: Vec<f64> = match precond {
        Preconditioner::Jacobi => k.diagonal().iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect(),
        Preconditioner::None => vec![1.0; n],
    };
    remove_weighted_mean(x, mass);
    let kx = k.mul_vec(x);
    let mut r: Vec<f64> = b.iter().zip(&kx).map(|(bi, ki)| bi - ki).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    while rel > tol && it < max_iters {
        let kp = k.mul_vec(&p);
        let pkp = dot(&p, &kp);
        if pkp <= 0.0 {
            break;
        }
        let alpha = rz / pkp;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        remove_weighted_mean(x, mass);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
        rel = dot(&r, &r).sqrt() / bnorm;
    }
    // recompute the true residual rather than trusting the recurrence
    let kx = k.mul_vec(x);
    let true_rel = b
        .iter()
        .zip(&kx)
        .map(|(bi, ki)| (bi - ki).powi(2))
        .sum::<f64>()
        .sqrt()
        / bnorm;
    CgOutcome {
        iterations: it,
        relative_residual: true_rel,
        converged: true_rel <= tol * 10.0 && rel <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Path-graph Laplacian: SPSD with constant null space.
    fn path_laplacian(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.push((i, i, 1.0));
            t.push((i + 1, i + 1, 1.0));
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, -1.0));
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn triplets_are_summed() {
        let m = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn singular_system_with_projection() {
        let n = 50;
        let k = path_laplacian(n);
        let mut b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mean = b.iter().sum::<f64>() / n as f64;
        b.iter_mut().for_each(|v| *v -= mean);
        let mass = vec![1.0; n];
        for pc in [Preconditioner::Jacobi, Preconditioner::None] {
            let mut x = vec![0.0; n];
            let out = pcg_projected(&k, &b, &mut x, &mass, 1e-12, 10 * n, pc);
            assert!(out.converged, "{out:?}");
            assert!(x.iter().sum::<f64>().abs() < 1e-9);
            let r = k.mul_vec(&x);
            assert!(r.iter().zip(&b).all(|(a, c)| (a - c).abs() < 1e-9));
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let k = path_laplacian(5);
        let mut x = vec![1.0; 5];
        let out = pcg_projected(&k, &[0.0; 5], &mut x, &[1.0; 5], 1e-10, 50, Preconditioner::Jacobi);
        assert_eq!(out.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }
}
