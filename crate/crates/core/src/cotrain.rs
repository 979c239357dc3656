//! Co-training of per-view landmark affinities against a shared embedding.
//!
//! Every round builds each view's spectral embedding `U^v`, fuses them into
//! the augmented embedding `U*` (the top-`k` left singular vectors of
//! `[U¹ ⋯ U^V]`, which minimizes `Σ_v ‖U Uᵀ − U^v U^vᵀ‖²_F` over orthonormal
//! `U`), and then reweights every view's affinities entrywise by the
//! augmented affinities between samples and landmarks.
//!
//! Neither `A* = U* U*ᵀ` nor any other `n x n` matrix is ever formed; only
//! the `n x p` landmark columns of `A*` are materialized.

use std::time::Instant;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::{
    build_sparse_representation, median_bandwidth, normalize_columns, SparseRepresentation, DEFAULT_MEDIAN_PAIRS,
};
use crate::data::{concatenate_views, MultiViewDataset};
use crate::error::{Error, Result};
use crate::linalg::{canonicalize_signs, cross_gram, dot, gram, row_blocks, symmetric_eigen};
use crate::rng;
use crate::sampling::{kmedoids_landmarks, random_landmarks, LandmarkSet, DEFAULT_KMEDOIDS_ITERS};
use crate::spectral::{reduced_representation, ReducedRepresentation};

/// How negative augmented affinities enter the entrywise update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClampMode {
    /// `max(a, 0)`
    #[default]
    Zero,
    /// `|a|`
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaMode {
    /// Per-view median of pairwise distances.
    Median { pairs: usize },
    /// The same bandwidth for every view.
    Fixed(f64),
}

impl Default for SigmaMode {
    fn default() -> Self {
        SigmaMode::Median {
            pairs: DEFAULT_MEDIAN_PAIRS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandmarkMethod {
    KMedoids { iters: usize },
    Random,
}

impl Default for LandmarkMethod {
    fn default() -> Self {
        LandmarkMethod::KMedoids {
            iters: DEFAULT_KMEDOIDS_ITERS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UpdateOptions {
    pub clamp: ClampMode,
    /// Rescale rows to sum to one after every update.
    pub renormalize_rows: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoTrainConfig {
    pub k: usize,
    pub p: usize,
    pub q: usize,
    /// Upper bound on rounds; zero computes the augmented view once without
    /// touching the affinities.
    pub max_iters: usize,
    /// Stop once the augmented projector moves less than this (Frobenius).
    pub tol: f64,
    pub seed: u64,
    pub sigma: SigmaMode,
    pub landmarks: LandmarkMethod,
    pub update: UpdateOptions,
}

impl CoTrainConfig {
    pub const DEFAULT_P: usize = 600;
    pub const DEFAULT_Q: usize = 8;
    pub const DEFAULT_MAX_ITERS: usize = 10;

    pub fn new(k: usize) -> Self {
        Self {
            k,
            p: Self::DEFAULT_P,
            q: Self::DEFAULT_Q,
            max_iters: Self::DEFAULT_MAX_ITERS,
            tol: default_tol(k),
            seed: 0,
            sigma: SigmaMode::default(),
            landmarks: LandmarkMethod::default(),
            update: UpdateOptions {
                clamp: ClampMode::Zero,
                renormalize_rows: true,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if self.k > self.p {
            return bad(format!("k = {} exceeds p = {}", self.k, self.p));
        }
        if self.q == 0 || self.q >= self.p {
            return bad(format!("need 0 < q < p, got q = {}, p = {}", self.q, self.p));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if let SigmaMode::Fixed(s) = self.sigma {
            if !(s.is_finite() && s > 0.0) {
                return bad(format!("fixed bandwidth must be positive, got {s}"));
            }
        }
        if let LandmarkMethod::KMedoids { iters: 0 } = self.landmarks {
            return bad("k-medoids needs at least one iteration".into());
        }
        Ok(())
    }
}

/// Relative default: one thousandth of the largest possible projector move.
pub fn default_tol(k: usize) -> f64 {
    1e-3 * (2.0 * k as f64).sqrt()
}

/// The augmented embedding `U*` of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedView {
    pub ustar: ReducedRepresentation,
    pub iteration: usize,
    /// `λ_k − λ_{k+1}` of `ŨᵀŨ` (zero beyond its size); near zero means the
    /// top-`k` subspace is not unique.
    pub eigengap: f64,
}

/// The `n x p` landmark columns of `A* = U* U*ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkAffinity {
    pub atil: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Fraction of stored entries whose augmented affinity was negative.
    pub clamped_fraction: f64,
    /// Rows whose weights all vanished and were restored.
    pub collapsed_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub delta: f64,
    pub seconds: f64,
    pub eigengap: f64,
    pub views: Vec<UpdateStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub landmarks: f64,
    pub bandwidth: f64,
    pub affinity: f64,
    pub cotrain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoTrainingTrace {
    pub records: Vec<IterationRecord>,
    pub timings: StageTimings,
    pub landmarks: LandmarkSet,
    pub sigmas: Vec<f64>,
    pub converged: bool,
}

impl CoTrainingTrace {
    pub fn final_delta(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.delta)
    }

    /// `iteration,delta,seconds,eigengap,clamped_<view>...,collapsed_<view>...`
    pub fn to_csv(&self, view_names: &[&str]) -> String {
        let mut out = String::from("iteration,delta,seconds,eigengap");
        for name in view_names {
            out.push_str(&format!(",clamped_{name}"));
        }
        for name in view_names {
            out.push_str(&format!(",collapsed_{name}"));
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{},{},{},{}", r.iteration, r.delta, r.seconds, r.eigengap));
            for v in 0..view_names.len() {
                match r.views.get(v) {
                    Some(s) => out.push_str(&format!(",{}", s.clamped_fraction)),
                    None => out.push(','),
                }
            }
            for v in 0..view_names.len() {
                match r.views.get(v) {
                    Some(s) => out.push_str(&format!(",{}", s.collapsed_rows)),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Top-`k` left singular vectors of `[U¹ ⋯ U^V]`, via its `Vk x Vk` Gram
/// matrix.
pub fn augmented_representation(us: &[ReducedRepresentation], k: usize) -> Result<AugmentedView> {
    let Some(first) = us.first() else {
        return Err(Error::InvalidParameter("need at least one view embedding".into()));
    };
    let n = first.n();
    if us.iter().any(|u| u.n() != n) {
        return Err(Error::Shape("view embeddings disagree on the sample count".into()));
    }
    let width: usize = us.iter().map(ReducedRepresentation::k).sum();
    if k == 0 || k > width || k > n {
        return Err(Error::InvalidParameter(format!(
            "cannot take {k} vectors from {width} stacked columns over {n} samples"
        )));
    }
    let views: Vec<ArrayView2<'_, f64>> = us.iter().map(ReducedRepresentation::u).collect();
    let stacked = concatenate(Axis(1), &views).expect("row counts checked");
    let eig = symmetric_eigen(&gram(stacked.view()))?;
    let lambda_k = eig.values[k - 1];
    if lambda_k <= 0.0 {
        return Err(Error::RankDeficient {
            view: 0,
            achieved: eig.values.iter().filter(|&&l| l > 0.0).count(),
            requested: k,
        });
    }
    let eigengap = lambda_k - eig.values.get(k).copied().unwrap_or(0.0).max(0.0);

    let mut w = eig.vectors.slice(ndarray::s![.., ..k]).to_owned();
    let mut sv = Vec::with_capacity(k);
    for (j, mut col) in w.columns_mut().into_iter().enumerate() {
        let s = eig.values[j].sqrt();
        col /= s;
        sv.push(s);
    }
    let mut ustar = Array2::<f64>::zeros((n, k));
    ustar
        .as_slice_mut()
        .expect("fresh array is contiguous")
        .par_chunks_mut(k)
        .enumerate()
        .for_each(|(i, out)| {
            for (&x, wr) in stacked.row(i).iter().zip(w.rows()) {
                for (o, c) in out.iter_mut().zip(wr) {
                    *o += x * c;
                }
            }
        });
    canonicalize_signs(&mut ustar);
    Ok(AugmentedView {
        ustar: ReducedRepresentation::from_parts(ustar, sv),
        iteration: 0,
        eigengap,
    })
}

/// `Ã*_{ij} = ⟨U*_i, U*_{m_j}⟩`.
pub fn extract_landmark_affinity(aug: &AugmentedView, landmarks: &LandmarkSet) -> LandmarkAffinity {
    let u = aug.ustar.u().as_standard_layout().into_owned();
    let n = u.nrows();
    let p = landmarks.len();
    let rows: Vec<&[f64]> = (0..n).map(|i| u.row(i).to_slice().expect("standard layout")).collect();
    let centers: Vec<&[f64]> = landmarks.indices().iter().map(|&m| rows[m]).collect();
    let mut atil = Array2::<f64>::zeros((n, p));
    atil.as_slice_mut()
        .expect("fresh array is contiguous")
        .par_chunks_mut(p)
        .enumerate()
        .for_each(|(i, out)| {
            for (o, c) in out.iter_mut().zip(&centers) {
                *o = dot(rows[i], c);
            }
        });
    LandmarkAffinity { atil }
}

/// Entrywise reweighting `z_ij ← f(Ã*_ij) z_ij` on the stored entries, where
/// `f` is the clamp. Rows whose weights all vanish keep their previous
/// values.
pub fn update_view(
    z: &SparseRepresentation,
    atil: &LandmarkAffinity,
    opts: UpdateOptions,
) -> Result<(SparseRepresentation, UpdateStats)> {
    if atil.atil.dim() != (z.n(), z.p()) {
        return Err(Error::Shape(format!(
            "affinity is {:?}, representation is {}x{}",
            atil.atil.dim(),
            z.n(),
            z.p()
        )));
    }
    let q = z.q();
    let mut out = z.clone();
    let cols = z.columns();
    let old = z.values();
    let counts: Vec<(usize, bool)> = out
        .matrix
        .values_mut()
        .par_chunks_mut(q)
        .enumerate()
        .map(|(i, row)| {
            let a = atil.atil.row(i);
            let mut clamped = 0;
            for (x, &j) in row.iter_mut().zip(&cols[i * q..(i + 1) * q]) {
                let mut w = a[j];
                if w < 0.0 {
                    clamped += 1;
                    w = match opts.clamp {
                        ClampMode::Zero => 0.0,
                        ClampMode::Abs => -w,
                    };
                }
                *x *= w;
            }
            let s: f64 = row.iter().sum();
            if s < 1e-300 {
                row.copy_from_slice(&old[i * q..(i + 1) * q]);
                return (clamped, true);
            }
            if opts.renormalize_rows {
                row.iter_mut().for_each(|x| *x /= s);
            }
            (clamped, false)
        })
        .collect();

    let clamped: usize = counts.iter().map(|c| c.0).sum();
    let collapsed = counts.iter().filter(|c| c.1).count();
    Ok((
        out,
        UpdateStats {
            clamped_fraction: clamped as f64 / (z.n() * q).max(1) as f64,
            collapsed_rows: collapsed,
        },
    ))
}

/// `‖A Aᵀ − B Bᵀ‖_F` for column-orthonormal `A` and `B`, through `k x k`
/// products only.
///
/// Evaluated as `√(‖A − B BᵀA‖² + ‖B − A AᵀB‖²)`: each residual equals
/// `k − ‖AᵀB‖²` under orthonormality, and summing squares directly keeps
/// full accuracy for nearly equal projectors, where `2k − 2‖AᵀB‖²` cancels.
pub fn projector_distance(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "projector distance needs equal shapes");
    let ba = cross_gram(b, a);
    let ab = ba.t().to_owned();
    (residual(a, b, &ba) + residual(b, a, &ab)).sqrt()
}

/// `‖x − y m‖²_F`, reduced over fixed row blocks.
fn residual(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, m: &Array2<f64>) -> f64 {
    let k = x.ncols();
    let partials: Vec<f64> = row_blocks(x.nrows())
        .into_par_iter()
        .map(|range| {
            let mut acc = 0.0;
            let mut r = vec![0.0; k];
            for i in range {
                let (xi, yi) = (x.row(i), y.row(i));
                for (j, rj) in r.iter_mut().enumerate() {
                    let mut s = xi[j];
                    for c in 0..k {
                        s -= yi[c] * m[[c, j]];
                    }
                    *rj = s;
                }
                acc += r.iter().map(|v| v * v).sum::<f64>();
            }
            acc
        })
        .collect();
    partials.iter().sum()
}

pub fn convergence_delta(prev: &AugmentedView, curr: &AugmentedView) -> f64 {
    projector_distance(prev.ustar.u(), curr.ustar.u())
}

/// Landmarks, per-view affinities, then alternating augmented-view and update
/// rounds until the augmented projector settles.
pub fn run_guided_cotraining(ds: &MultiViewDataset, config: &CoTrainConfig) -> Result<(AugmentedView, CoTrainingTrace)> {
    config.validate()?;
    let n = ds.n();
    let CoTrainConfig { k, p, q, .. } = *config;
    if p > n {
        return Err(Error::InvalidParameter(format!("{p} landmarks requested from {n} samples")));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds n = {n}")));
    }
    let mut timings = StageTimings::default();

    let clock = Instant::now();
    let landmarks = match config.landmarks {
        LandmarkMethod::KMedoids { iters } => {
            let x = concatenate_views(ds);
            kmedoids_landmarks(x.data(), p, iters, config.seed)?
        }
        LandmarkMethod::Random => random_landmarks(n, p, config.seed)?,
    };
    timings.landmarks = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let sigmas = match config.sigma {
        SigmaMode::Fixed(s) => vec![s; ds.num_views()],
        SigmaMode::Median { pairs } => ds
            .views()
            .par_iter()
            .enumerate()
            .map(|(v, view)| median_bandwidth(view.data(), pairs, rng::substream_seed(config.seed, &format!("bandwidth/{v}"))))
            .collect::<Result<Vec<_>>>()?,
    };
    timings.bandwidth = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let mut zs = ds
        .views()
        .par_iter()
        .zip(sigmas.par_iter())
        .map(|(view, &s)| build_sparse_representation(view.data(), &landmarks, q, s))
        .collect::<Result<Vec<_>>>()?;
    timings.affinity = clock.elapsed().as_secs_f64();

    let loop_clock = Instant::now();
    let rounds = config.max_iters.max(1);
    let first_delta = (2.0 * k as f64).sqrt();
    let mut records = Vec::with_capacity(rounds);
    let mut current: Option<AugmentedView> = None;
    let mut converged = false;

    for round in 1..=rounds {
        let clock = Instant::now();
        let us = zs
            .par_iter()
            .enumerate()
            .map(|(v, z)| reduced_representation(&normalize_columns(z), k).map_err(|e| e.in_view(v)))
            .collect::<Result<Vec<_>>>()?;
        let mut aug = augmented_representation(&us, k)?;
        drop(us);
        aug.iteration = if config.max_iters == 0 { 0 } else { round };
        let delta = current.as_ref().map_or(first_delta, |prev| convergence_delta(prev, &aug));
        converged = delta < config.tol;

        let mut view_stats = Vec::new();
        if config.max_iters > 0 {
            let atil = extract_landmark_affinity(&aug, &landmarks);
            let updated = zs
                .par_iter()
                .map(|z| update_view(z, &atil, config.update))
                .collect::<Result<Vec<_>>>()?;
            zs = Vec::with_capacity(updated.len());
            for (z, s) in updated {
                zs.push(z);
                view_stats.push(s);
            }
        }

        records.push(IterationRecord {
            iteration: aug.iteration,
            delta,
            seconds: clock.elapsed().as_secs_f64(),
            eigengap: aug.eigengap,
            views: view_stats,
        });
        current = Some(aug);
        if converged {
            break;
        }
    }
    timings.cotrain = loop_clock.elapsed().as_secs_f64();

    let aug = current.expect("at least one round runs");
    Ok((
        aug,
        CoTrainingTrace {
            records,
            timings,
            landmarks,
            sigmas,
            converged,
        },
    ))
}
