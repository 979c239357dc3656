//! Small dense kernels shared by the pipeline stages.
//!
//! Reductions over the sample axis use [`row_blocks`], whose partition depends
//! only on the row count. Partial results are combined in block order, so sums
//! are bitwise identical whatever the size of the rayon pool.

use std::ops::Range;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::diag::Diag;
use faer::{Mat, Par};
use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};

const MIN_BLOCK_ROWS: usize = 512;
const MAX_BLOCKS: usize = 64;

/// Fixed partition of `0..n` used for deterministic parallel reductions.
pub fn row_blocks(n: usize) -> Vec<Range<usize>> {
    if n == 0 {
        return Vec::new();
    }
    let blocks = n.div_ceil(MIN_BLOCK_ROWS).clamp(1, MAX_BLOCKS);
    let size = n.div_ceil(blocks);
    (0..n)
        .step_by(size)
        .map(|start| start..(start + size).min(n))
        .collect()
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let d = x - y;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `mᵀ m` for a tall matrix, reduced over fixed row blocks.
pub fn gram(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let (n, c) = m.dim();
    let partials: Vec<Array2<f64>> = row_blocks(n)
        .into_par_iter()
        .map(|range| {
            let mut g = Array2::<f64>::zeros((c, c));
            for row in m.slice(ndarray::s![range, ..]).axis_iter(Axis(0)) {
                for a in 0..c {
                    let ra = row[a];
                    if ra == 0.0 {
                        continue;
                    }
                    for b in a..c {
                        g[[a, b]] += ra * row[b];
                    }
                }
            }
            g
        })
        .collect();
    let mut g = Array2::<f64>::zeros((c, c));
    for part in partials {
        g += &part;
    }
    mirror_upper(&mut g);
    g
}

/// `aᵀ b` for two tall matrices with the same row count, reduced over fixed
/// row blocks.
pub fn cross_gram(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    assert_eq!(a.nrows(), b.nrows());
    let (ca, cb) = (a.ncols(), b.ncols());
    let partials: Vec<Array2<f64>> = row_blocks(a.nrows())
        .into_par_iter()
        .map(|range| {
            let mut g = Array2::<f64>::zeros((ca, cb));
            for i in range {
                let (ra, rb) = (a.row(i), b.row(i));
                for x in 0..ca {
                    for y in 0..cb {
                        g[[x, y]] += ra[x] * rb[y];
                    }
                }
            }
            g
        })
        .collect();
    let mut g = Array2::<f64>::zeros((ca, cb));
    for part in partials {
        g += &part;
    }
    g
}

/// Copy the upper triangle onto the lower one.
pub(crate) fn mirror_upper(g: &mut Array2<f64>) {
    let c = g.nrows();
    for a in 0..c {
        for b in 0..a {
            g[[a, b]] = g[[b, a]];
        }
    }
}

/// Eigenpairs of a symmetric matrix in non-increasing eigenvalue order.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, aligned with `values`.
    pub vectors: Array2<f64>,
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Runs the sequential tridiagonalization solver so results do not depend on
/// the thread pool. Only the lower triangle of `a` is read.
pub fn symmetric_eigen(a: &Array2<f64>) -> Result<SymmetricEigen> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigen needs a square matrix");
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: Array2::zeros((0, 0)),
        });
    }
    let input = Mat::<f64>::from_fn(n, n, |i, j| a[[i, j]]);
    let mut s = Diag::<f64>::zeros(n);
    let mut u = Mat::<f64>::zeros(n, n);
    let par = Par::Seq;
    let params = Default::default();
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(
        n,
        ComputeEigenvectors::Yes,
        par,
        params,
    ));
    evd::self_adjoint_evd(
        input.as_ref(),
        s.as_mut(),
        Some(u.as_mut()),
        par,
        MemStack::new(&mut buf),
        params,
    )
    .map_err(|_| Error::Eigen(n))?;

    // faer sorts ascending
    let sv = s.column_vector();
    let values: Vec<f64> = (0..n).rev().map(|i| sv[i]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| u[(i, n - 1 - j)]);
    Ok(SymmetricEigen { values, vectors })
}

/// Flip each column so its largest-magnitude entry is positive (first such
/// entry wins ties).
pub fn canonicalize_signs(m: &mut Array2<f64>) {
    for mut col in m.axis_iter_mut(Axis(1)) {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &x in col.iter() {
            if x.abs() > best {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
}
