//! Spectral embedding of one view without forming the `n x n` Laplacian.
//!
//! The top-`k` left singular vectors of `Ẑ` are the top eigenvectors of
//! `L = Ẑ Ẑᵀ`. They are recovered from the `p x p` Gram matrix `G = Ẑᵀ Ẑ`:
//! if `G v = λ v` then `u = Ẑ v / √λ`.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::affinity::NormalizedRepresentation;
use crate::error::{Error, Result};
use crate::linalg::{canonicalize_signs, mirror_upper, row_blocks, symmetric_eigen};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Column-orthonormal `n x k` embedding with its singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedRepresentation {
    u: Array2<f64>,
    singular_values: Vec<f64>,
}

impl ReducedRepresentation {
    pub(crate) fn from_parts(u: Array2<f64>, singular_values: Vec<f64>) -> Self {
        Self { u, singular_values }
    }

    /// Wrap a matrix whose columns the caller guarantees orthonormal.
    pub fn from_orthonormal(u: Array2<f64>) -> Self {
        let k = u.ncols();
        Self {
            u,
            singular_values: vec![1.0; k],
        }
    }

    pub fn u(&self) -> ArrayView2<'_, f64> {
        self.u.view()
    }

    pub fn into_u(self) -> Array2<f64> {
        self.u
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn k(&self) -> usize {
        self.u.ncols()
    }
}

/// Exact `Ẑᵀ Ẑ`, accumulated from the row-sparse structure.
pub fn gram_matrix(zhat: &NormalizedRepresentation) -> Array2<f64> {
    let (n, p) = (zhat.n(), zhat.p());
    let partials: Vec<Array2<f64>> = row_blocks(n)
        .into_par_iter()
        .map(|range| {
            let mut g = Array2::<f64>::zeros((p, p));
            for i in range {
                let (c, v) = zhat.row(i);
                for a in 0..c.len() {
                    if v[a] == 0.0 {
                        continue;
                    }
                    for b in a..c.len() {
                        // columns are stored ascending, so this is the upper triangle
                        g[[c[a], c[b]]] += v[a] * v[b];
                    }
                }
            }
            g
        })
        .collect();
    let mut g = Array2::<f64>::zeros((p, p));
    for part in partials {
        g += &part;
    }
    mirror_upper(&mut g);
    g
}

/// Top-`k` left singular vectors of `Ẑ`.
pub fn reduced_representation(zhat: &NormalizedRepresentation, k: usize) -> Result<ReducedRepresentation> {
    let (n, p) = (zhat.n(), zhat.p());
    if k == 0 || k > p || k > n {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= min(n, p), got k = {k}, n = {n}, p = {p}")));
    }
    let eig = symmetric_eigen(&gram_matrix(zhat))?;
    let sigma: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let cutoff = RANK_TOLERANCE * sigma[0];
    let rank = sigma.iter().take_while(|&&s| s > cutoff && s > 0.0).count();
    if rank < k {
        return Err(Error::RankDeficient {
            view: 0,
            achieved: rank,
            requested: k,
        });
    }

    // back-projection u_j = Ẑ v_j / σ_j with the k right vectors scaled up front
    let mut right = eig.vectors.slice(ndarray::s![.., ..k]).to_owned();
    for (j, mut col) in right.columns_mut().into_iter().enumerate() {
        col /= sigma[j];
    }
    let mut u = Array2::<f64>::zeros((n, k));
    u.as_slice_mut()
        .expect("fresh array is contiguous")
        .par_chunks_mut(k)
        .enumerate()
        .for_each(|(i, out)| {
            let (c, v) = zhat.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if x == 0.0 {
                    continue;
                }
                for (o, r) in out.iter_mut().zip(right.row(j)) {
                    *o += x * r;
                }
            }
        });
    canonicalize_signs(&mut u);
    Ok(ReducedRepresentation {
        u,
        singular_values: sigma[..k].to_vec(),
    })
}
