//! Gaussian-blob multi-view fixtures.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{MultiViewDataset, ViewMatrix};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub dim: usize,
    /// Standard deviation of the isotropic within-cluster noise.
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub k: usize,
    pub views: Vec<ViewSpec>,
    /// Scale of the per-coordinate Gaussian draw for cluster means.
    pub separation: f64,
    /// `(view, clusters)`: inside `view`, every listed cluster shares the mean
    /// of the first one, so that view cannot tell them apart.
    pub merges: Vec<(usize, Vec<usize>)>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn blobs(n: usize, k: usize, num_views: usize, dim: usize, noise: f64, seed: u64) -> Self {
        Self {
            n,
            k,
            views: vec![ViewSpec { dim, noise }; num_views],
            separation: 10.0,
            merges: Vec::new(),
            seed,
        }
    }

    pub fn with_merge(mut self, view: usize, clusters: Vec<usize>) -> Self {
        self.merges.push((view, clusters));
        self
    }
}

/// Sample `i` belongs to cluster `i % k`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultiViewDataset> {
    let SyntheticSpec { n, k, .. } = *spec;
    if k == 0 || n < k {
        return Err(Error::InvalidParameter(format!("need n >= k >= 1, got n = {n}, k = {k}")));
    }
    if spec.views.is_empty() {
        return Err(Error::InvalidParameter("need at least one view".into()));
    }
    if !(spec.separation.is_finite() && spec.separation > 0.0) {
        return Err(Error::InvalidParameter("separation must be positive".into()));
    }
    for (v, vs) in spec.views.iter().enumerate() {
        if vs.dim == 0 {
            return Err(Error::InvalidParameter(format!("view {v} has dim 0")));
        }
        if !(vs.noise.is_finite() && vs.noise >= 0.0) {
            return Err(Error::InvalidParameter(format!("view {v} has invalid noise {}", vs.noise)));
        }
    }
    for (v, group) in &spec.merges {
        if *v >= spec.views.len() || group.iter().any(|&c| c >= k) || group.is_empty() {
            return Err(Error::InvalidParameter(format!("invalid merge ({v}, {group:?})")));
        }
    }

    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let mut views = Vec::with_capacity(spec.views.len());
    for (v, vs) in spec.views.iter().enumerate() {
        let mut mean_rng = rng::stream(spec.seed, &format!("synthetic/means/{v}"));
        let mut means = Array2::<f64>::zeros((k, vs.dim));
        means.mapv_inplace(|_| spec.separation * mean_rng.sample::<f64, _>(StandardNormal));
        for (_, group) in spec.merges.iter().filter(|(mv, _)| *mv == v) {
            let anchor = means.row(group[0]).to_owned();
            for &c in &group[1..] {
                means.row_mut(c).assign(&anchor);
            }
        }

        let mut noise_rng = rng::stream(spec.seed, &format!("synthetic/noise/{v}"));
        let mut data = Array2::<f64>::zeros((n, vs.dim));
        for (i, mut row) in data.rows_mut().into_iter().enumerate() {
            let mean = means.row(labels[i]);
            for (x, m) in row.iter_mut().zip(mean) {
                let e: f64 = noise_rng.sample(StandardNormal);
                *x = m + vs.noise * e;
            }
        }
        views.push(ViewMatrix::new(format!("view{}", v + 1), data)?);
    }
    MultiViewDataset::new(views, Some(labels))
}
