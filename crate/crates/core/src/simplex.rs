//! Regular-simplex reference vectors.
//!
//! Phase `i` of a `k`-phase system is represented by a unit vector `p_i` in
//! `R^{k-1}` pointing from the centroid of a regular simplex to one of its
//! vertices. The construction starts from the standard simplex in `R^k`,
//! shifts it so that its centroid is at the origin and expresses the shifted
//! vertices in the orthonormal basis
//!
//! ```text
//! q_1 = (k-1, -1, ..., -1)        / sqrt((k-1) k)
//! q_2 = (0, k-2, -1, ..., -1)     / sqrt((k-2)(k-1))
//! ...
//! q_{k-1} = (0, ..., 0, 1, -1)    / sqrt(2)
//! ```
//!
//! of the hyperplane that contains it. The coordinates are then normalized.

use crate::error::{invalid, Result};

/// The `k` reference unit vectors of a `k`-phase system.
///
/// Phases are indexed from 0 in code; user-facing output uses 1-based labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFrame {
    k: usize,
    vectors: Vec<Vec<f64>>,
}

impl ReferenceFrame {
    /// Builds the frame for `k >= 2` phases.
    pub fn new(k: usize) -> Result<Self> {
        reference_vectors(k)
    }

    /// Builds a frame from explicit vectors without validation.
    ///
    /// Used to feed deliberately broken frames to invariant checks.
    pub fn from_raw(vectors: Vec<Vec<f64>>) -> Self {
        Self {
            k: vectors.len(),
            vectors,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Dimension of the embedding space, `k - 1`.
    pub fn dim(&self) -> usize {
        self.k - 1
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// `p_i . u`
    pub fn dot(&self, i: usize, u: &[f64]) -> f64 {
        dot(&self.vectors[i], u)
    }

    /// Unit vector `(p_i - p_j) / |p_i - p_j|` for `i < j` (0-based).
    pub fn pair_direction(&self, i: usize, j: usize) -> Result<Vec<f64>> {
        pair_direction(self, i, j)
    }

    /// Largest deviation from the three frame invariants: unit norms, pairwise
    /// dot products `1/(1-k)` and zero vector sum.
    pub fn invariant_defect(&self) -> f64 {
        let k = self.k;
        let d = self.vectors.first().map_or(0, Vec::len);
        let target = 1.0 / (1.0 - k as f64);
        let mut worst = 0.0_f64;
        for i in 0..k {
            worst = worst.max((dot(&self.vectors[i], &self.vectors[i]).sqrt() - 1.0).abs());
            for j in (i + 1)..k {
                worst = worst.max((dot(&self.vectors[i], &self.vectors[j]) - target).abs());
            }
        }
        let sum_norm = (0..d)
            .map(|c| self.vectors.iter().map(|v| v[c]).sum::<f64>().powi(2))
            .sum::<f64>()
            .sqrt();
        worst.max(sum_norm)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rows `q_1, ..., q_{k-1}` of the orthonormal basis of the hyperplane
/// `sum x_i = 0` in `R^k`.
fn basis_rows(k: usize) -> Vec<Vec<f64>> {
    (1..k)
        .map(|j| {
            // row j (1-based) has j-1 leading zeros, then (k-j), then -1's
            let lead = (k - j) as f64;
            let scale = 1.0 / (lead * (lead + 1.0)).sqrt();
            (0..k)
                .map(|c| {
                    if c + 1 < j {
                        0.0
                    } else if c + 1 == j {
                        lead * scale
                    } else {
                        -scale
                    }
                })
                .collect()
        })
        .collect()
}

/// Constructs the reference frame for `k` phases.
pub fn reference_vectors(k: usize) -> Result<ReferenceFrame> {
    if k < 2 {
        return Err(invalid(format!("phase count must be at least 2, got {k}")));
    }
    let q = basis_rows(k);
    let kf = k as f64;
    let vectors = (0..k)
        .map(|i| {
            // centroid-shifted vertex of the standard simplex
            let shifted: Vec<f64> = (0..k)
                .map(|c| if c == i { (kf - 1.0) / kf } else { -1.0 / kf })
                .collect();
            let projected: Vec<f64> = q.iter().map(|row| dot(row, &shifted)).collect();
            let norm = dot(&projected, &projected).sqrt();
            projected.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    Ok(ReferenceFrame { k, vectors })
}

/// Unit vector along `p_i - p_j`, `i < j` (0-based phase indices).
pub fn pair_direction(frame: &ReferenceFrame, i: usize, j: usize) -> Result<Vec<f64>> {
    if i >= j {
        return Err(invalid(format!("pair direction needs i < j, got ({i}, {j})")));
    }
    if j >= frame.k() {
        return Err(invalid(format!(
            "phase index {j} out of range for k = {}",
            frame.k()
        )));
    }
    let diff: Vec<f64> = frame
        .vector(i)
        .iter()
        .zip(frame.vector(j))
        .map(|(a, b)| a - b)
        .collect();
    let norm = dot(&diff, &diff).sqrt();
    Ok(diff.into_iter().map(|x| x / norm).collect())
}
