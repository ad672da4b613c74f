//! RBF kernel, Gram matrices and kernel expansions of the latent functions.
//!
//! A latent function is never stored as a weight matrix over feature space.
//! It is kept as `f̃(x) = base + Σ_i c_i κ(x, x_i)` over a fixed set of
//! anchors, with coefficients accumulated across gradient steps.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn rbf(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::Config(alloc::format!(
                "kernel bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self {
            family: KernelFamily::Rbf,
            bandwidth,
        })
    }

    #[inline]
    pub(crate) fn eval_sq(&self, sq_dist: f64) -> f64 {
        match self.family {
            KernelFamily::Rbf => math::exp(-sq_dist / (2.0 * self.bandwidth * self.bandwidth)),
        }
    }

    /// `∂κ(x, y)/∂x = κ · (y − x) / h²`, returned as the scalar factor
    /// multiplying `(y − x)`.
    #[inline]
    pub(crate) fn grad_factor(&self, kappa: f64) -> f64 {
        kappa / (self.bandwidth * self.bandwidth)
    }
}

pub fn kappa(x: &[f64], y: &[f64], spec: &KernelSpec) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dim("kernel arguments", x.len(), y.len()));
    }
    Ok(spec.eval_sq(math::squared_distance(x, y)))
}

/// Gram matrix over the rows of `points`.
pub fn gram(points: &Matrix, spec: &KernelSpec) -> Matrix {
    cross_gram(points, points, spec)
}

/// `K[j][i] = κ(queries_j, keys_i)`.
pub fn cross_gram(queries: &Matrix, keys: &Matrix, spec: &KernelSpec) -> Matrix {
    let symmetric = core::ptr::eq(queries, keys);
    let mut k = Matrix::zeros(queries.rows(), keys.rows());
    for j in 0..queries.rows() {
        for i in 0..keys.rows() {
            if symmetric && i < j {
                k[(j, i)] = k[(i, j)];
                continue;
            }
            k[(j, i)] = if symmetric && i == j {
                1.0
            } else {
                spec.eval_sq(math::squared_distance(queries.row(j), keys.row(i)))
            };
        }
    }
    k
}

/// Pairwise Euclidean distances between distinct rows, in row-major pair order.
pub fn pairwise_distances(points: &Matrix) -> Vec<f64> {
    let n = points.rows();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(math::sqrt(math::squared_distance(
                points.row(i),
                points.row(j),
            )));
        }
    }
    out
}

/// Median pairwise distance; `None` for fewer than two points or a zero median.
pub fn median_heuristic(points: &Matrix) -> Option<f64> {
    let mut d = pairwise_distances(points);
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    let med = if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    };
    (med > 0.0 && med.is_finite()).then_some(med)
}

/// Kernel expansion `f̃(x) = base + Σ_i coeffs[i] κ(x, anchors[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelExpansion {
    /// N×d anchor points.
    pub anchors: Matrix,
    /// N×K; row `i` is the coefficient vector attached to anchor `i`.
    pub coeffs: Matrix,
    pub base: Vec<f64>,
    pub spec: KernelSpec,
}

impl KernelExpansion {
    pub fn zeros(anchors: Matrix, outputs: usize, spec: KernelSpec) -> Self {
        let n = anchors.rows();
        Self {
            anchors,
            coeffs: Matrix::zeros(n, outputs),
            base: alloc::vec![0.0; outputs],
            spec,
        }
    }

    pub fn outputs(&self) -> usize {
        self.base.len()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.anchors.cols() {
            return Err(Error::dim("expansion input", self.anchors.cols(), x.len()));
        }
        let mut out = self.base.clone();
        for i in 0..self.anchors.rows() {
            let k = self
                .spec
                .eval_sq(math::squared_distance(x, self.anchors.row(i)));
            for (o, &c) in out.iter_mut().zip(self.coeffs.row(i)) {
                *o += c * k;
            }
        }
        Ok(out)
    }

    /// Values at every anchor given their Gram matrix: an N×K matrix.
    pub fn eval_at_anchors(&self, gram: &Matrix) -> Result<Matrix> {
        let mut out = gram.matmul(&self.coeffs)?;
        for i in 0..out.rows() {
            for (o, &b) in out.row_mut(i).iter_mut().zip(&self.base) {
                *o += b;
            }
        }
        Ok(out)
    }
}
