//! Compressed sparse rows, a banded Cholesky factorization and a Jacobi-preconditioned
//! conjugate gradient solver.

use crate::error::{Error, Result};

/// Symmetric sparse matrix in CSR layout.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut s = 0.0;
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[idx] * x[self.cols[idx]];
            }
            y[r] = s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    /// `x^T A x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for r in 0..self.n {
            let mut row = 0.0;
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.vals[idx] * x[self.cols[idx]];
            }
            s += x[r] * row;
        }
        s
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .find(|&idx| self.cols[idx] == r)
                    .map_or(0.0, |idx| self.vals[idx])
            })
            .collect()
    }

    /// `self + alpha * other`; both must share the sparsity pattern.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.row_ptr, other.row_ptr);
        assert_eq!(self.cols, other.cols);
        CsrMatrix {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals: self
                .vals
                .iter()
                .zip(&other.vals)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        }
    }

    /// Iterates the stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |idx| (r, self.cols[idx], self.vals[idx]))
        })
    }
    /// Largest `|row - col|` over the stored entries.
    pub fn bandwidth(&self) -> usize {
        self.entries().map(|(r, c, _)| r.abs_diff(c)).max().unwrap_or(0)
    }
}

/// Cholesky factor `L` of a symmetric positive definite band matrix, stored by rows.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
    // L^T by rows: u[i * w + (k - i)] = L_ki for i <= k <= i + bw
    u: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let bw = a.bandwidth();
        let w = bw + 1;
        // l[i * w + (j + bw - i)] holds L_ij for i - bw <= j <= i
        let mut l = vec![0.0; n * w];
        for (r, c, v) in a.entries() {
            if c <= r {
                l[r * w + c + bw - r] = v;
            }
        }
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let ri = &l[i * w + lo + bw - i..i * w + j + bw - i];
                let rj = &l[j * w + lo + bw - j..j * w + bw];
                let s = l[i * w + j + bw - i] - dot(ri, rj);
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::NumericalFailure("matrix is not positive definite".into()));
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + j + bw - i] = s / l[j * w + bw];
                }
            }
        }
        let mut u = vec![0.0; n * w];
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                u[j * w + i - j] = l[i * w + j + bw - i];
            }
        }
        Ok(Self { n, bw, l, u })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let s = dot(&self.l[i * w + lo + bw - i..i * w + bw], &x[lo..i]);
            x[i] = (x[i] - s) / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let s = dot(&self.u[i * w + 1..i * w + 1 + hi - i], &x[i + 1..=hi]);
            x[i] = (x[i] - s) / self.u[i * w];
        }
        x
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    // independent partial sums let the loop vectorize
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Dense Gaussian elimination with partial pivoting; `None` if singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col] == 0.0 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Solves `A x = b` for symmetric positive definite `A`, starting from `x`.
///
/// Stops when `|r| <= rel_tol * |b|`. Returns the iteration count.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = a.n();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let target = rel_tol * b_norm;
    for it in 0..max_iter {
        if dot(&r, &r).sqrt() <= target {
            return Ok(it);
        }
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NumericalFailure(
                "conjugate gradient met a non-positive curvature direction".into(),
            ));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if dot(&r, &r).sqrt() <= target {
        return Ok(max_iter);
    }
    Err(Error::NumericalFailure(format!(
        "conjugate gradient did not reach relative residual {rel_tol:e} in {max_iter} iterations"
    )))
}
