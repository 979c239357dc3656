//! Brute-force oracles and randomized instance checks.
//!
//! Everything here is deliberately naive: dense `n x n` matrices, cyclic
//! Jacobi eigensolves, exhaustive permutation scans. Each `check_*` function
//! draws one random instance from its seed and returns a description of the
//! first disagreement with the library.

#![allow(dead_code)]

use gcmvsc::affinity::{build_sparse_representation, median_bandwidth, normalize_columns, SparseRepresentation};
use gcmvsc::cotrain::{
    augmented_representation, extract_landmark_affinity, projector_distance, update_view, AugmentedView, ClampMode,
    LandmarkAffinity, UpdateOptions,
};
use gcmvsc::metrics::{accuracy, hungarian};
use gcmvsc::sampling::{random_landmarks, LandmarkSet};
use gcmvsc::spectral::{reduced_representation, ReducedRepresentation};
use gcmvsc::Error;
use ndarray::{s, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

/// Points around `centers` random centers with unit noise.
pub fn clustered(rng: &mut ChaCha8Rng, n: usize, d: usize, centers: usize) -> Array2<f64> {
    let means = gaussian(rng, centers, d) * 6.0;
    let mut x = gaussian(rng, n, d);
    for i in 0..n {
        let c = rng.gen_range(0..centers);
        let mut row = x.row_mut(i);
        row += &means.row(c);
    }
    x
}

/// Column-orthonormal matrix by two passes of modified Gram-Schmidt.
pub fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Array2<f64> {
    let mut m = gaussian(rng, n, k);
    for _ in 0..2 {
        for j in 0..k {
            for i in 0..j {
                let proj = m.column(i).dot(&m.column(j));
                let ci = m.column(i).to_owned();
                let mut cj = m.column_mut(j);
                cj.scaled_add(-proj, &ci);
            }
            let norm = m.column(j).dot(&m.column(j)).sqrt();
            m.column_mut(j).mapv_inplace(|x| x / norm);
        }
    }
    m
}

pub fn projector(u: ArrayView2<'_, f64>) -> Array2<f64> {
    u.dot(&u.t())
}

pub fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn orthonormality_error(u: ArrayView2<'_, f64>) -> f64 {
    let g = u.t().dot(&u);
    frobenius(&(g - Array2::<f64>::eye(u.ncols())))
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix: eigenvalues in
/// non-increasing order with eigenvectors as matching columns.
pub fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let total: f64 = m.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if off <= 1e-32 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]));
    let values = order.iter().map(|&i| m[[i, i]]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    (values, vectors)
}

/// Every permutation of `0..m` (Heap's algorithm).
pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a: Vec<usize> = (0..m).collect();
    let mut out = Vec::new();
    heap(m, &mut a, &mut out);
    out
}

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

/// Dense Gaussian kernel to the landmarks, masked to the `q` nearest
/// (lower landmark position first on ties), rows scaled to sum one.
pub fn dense_sparse_oracle(x: ArrayView2<'_, f64>, landmarks: &[usize], q: usize, sigma: f64) -> Array2<f64> {
    let (n, p) = (x.nrows(), landmarks.len());
    let mut out = Array2::<f64>::zeros((n, p));
    for i in 0..n {
        let d2: Vec<f64> = landmarks
            .iter()
            .map(|&m| x.row(i).iter().zip(x.row(m)).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| d2[a].total_cmp(&d2[b]).then(a.cmp(&b)));
        for &j in &order[..q] {
            out[[i, j]] = (-d2[j] / (2.0 * sigma * sigma)).exp();
        }
        let s: f64 = out.row(i).sum();
        out.row_mut(i).mapv_inplace(|v| v / s);
    }
    out
}

/// Affinity construction against the dense kernel with a top-`q` mask.
pub fn check_sparse_representation(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.gen_range(5..=40);
    let d = r.gen_range(1..=5);
    let p = r.gen_range(2..=n.min(10));
    let q = r.gen_range(1..p);
    let sigma = r.gen_range(0.3..3.0);
    let x = gaussian(&mut r, n, d);
    let lm = random_landmarks(n, p, seed).map_err(|e| e.to_string())?;
    let z = build_sparse_representation(x.view(), &lm, q, sigma).map_err(|e| e.to_string())?;
    let oracle = dense_sparse_oracle(x.view(), lm.indices(), q, sigma);
    let dense = z.to_dense();
    let err = (&dense - &oracle).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ensure(err <= 1e-10, || format!("seed {seed}: sparse representation off by {err:e}"))?;
    for i in 0..n {
        let (cols, _) = z.row(i);
        let mut support: Vec<usize> = (0..p).filter(|&j| oracle[[i, j]] > 0.0).collect();
        support.sort_unstable();
        ensure(cols.len() == q, || format!("seed {seed}: row {i} stores {} slots", cols.len()))?;
        ensure(support.iter().all(|j| cols.contains(j)), || format!("seed {seed}: row {i} support differs"))?;
    }
    let zhat = normalize_columns(&z);
    let zd = zhat.to_dense();
    let sums = dense.sum_axis(ndarray::Axis(0));
    for ((i, j), &v) in zd.indexed_iter() {
        let expect = if sums[j] > 0.0 { dense[[i, j]] / sums[j].sqrt() } else { 0.0 };
        ensure((v - expect).abs() <= 1e-12, || format!("seed {seed}: normalized entry ({i},{j}) off"))?;
        ensure(v == 0.0 || dense[[i, j]] != 0.0, || format!("seed {seed}: fill-in at ({i},{j})"))?;
    }
    Ok(())
}

/// Random landmark-based normalized representation with a chosen `k`.
pub struct SpectralInstance {
    pub x: Array2<f64>,
    pub landmarks: LandmarkSet,
    pub z: SparseRepresentation,
    pub k: usize,
}

pub fn spectral_instance(seed: u64, n_min: usize, n_max: usize) -> Result<SpectralInstance, String> {
    let mut r = rng(seed);
    let n = r.gen_range(n_min..=n_max);
    let d = r.gen_range(2..=6);
    let centers = r.gen_range(1..=6);
    let p = r.gen_range(4..=n.min(40));
    let q = r.gen_range(2..p.min(7));
    let k = r.gen_range(1..=5.min(p - 1));
    let x = clustered(&mut r, n, d, centers);
    let landmarks = random_landmarks(n, p, seed ^ 0x5eed).map_err(|e| e.to_string())?;
    let sigma = median_bandwidth(x.view(), 1000, seed).map_err(|e| e.to_string())?;
    let z = build_sparse_representation(x.view(), &landmarks, q, sigma).map_err(|e| e.to_string())?;
    Ok(SpectralInstance { x, landmarks, z, k })
}

/// Reduced representation against the Jacobi eigenprojector of the dense
/// `Ẑ Ẑᵀ`.
pub fn check_spectral(seed: u64, n_min: usize, n_max: usize) -> Check {
    let inst = spectral_instance(seed, n_min, n_max)?;
    let k = inst.k;
    let zhat = normalize_columns(&inst.z);
    let zd = zhat.to_dense();
    let l = zd.dot(&zd.t());
    let (lambda, vecs) = jacobi_eigen(&l);
    let rep = match reduced_representation(&zhat, k) {
        Ok(rep) => rep,
        Err(Error::RankDeficient { .. }) => {
            return ensure(lambda[k - 1] <= 1e-12 * lambda[0], || {
                format!("seed {seed}: reported rank deficiency but λ_k = {:e}", lambda[k - 1])
            })
        }
        Err(e) => return Err(format!("seed {seed}: {e}")),
    };
    let u = rep.u();
    let ortho = orthonormality_error(u);
    ensure(ortho <= 1e-8, || format!("seed {seed}: orthonormality error {ortho:e}"))?;

    let g = zd.t().dot(&zd);
    let (mu, _) = jacobi_eigen(&g);
    for (j, s) in rep.singular_values().iter().enumerate() {
        let e = (s * s - mu[j]).abs();
        ensure(e <= 1e-10, || format!("seed {seed}: σ_{j}² differs from Gram eigenvalue by {e:e}"))?;
    }

    let gap = lambda[k - 1] - lambda.get(k).copied().unwrap_or(0.0);
    let err = if gap > 1e-8 {
        let oracle = vecs.slice(s![.., ..k]).to_owned();
        frobenius(&(projector(u) - projector(oracle.view())))
    } else {
        // tied eigenvalues: U must lie inside the oracle's invariant subspace
        let m = lambda.iter().take_while(|&&v| v >= lambda[k - 1] - 1e-8).count();
        let basis = vecs.slice(s![.., ..m]).to_owned();
        frobenius(&(&u - &basis.dot(&basis.t().dot(&u))))
    };
    ensure(err <= 1e-6, || format!("seed {seed}: projector error {err:e} (gap {gap:e})"))
}

/// `Σ_v ‖U Uᵀ − U^v U^vᵀ‖²_F` with dense projectors.
pub fn dense_objective(u: ArrayView2<'_, f64>, views: &[Array2<f64>]) -> f64 {
    let pu = projector(u);
    views
        .iter()
        .map(|v| frobenius(&(&pu - &projector(v.view()))).powi(2))
        .sum()
}

/// Same objective via `2Vk − 2 Σ_v ‖Uᵀ U^v‖²`, valid for orthonormal inputs.
pub fn trace_objective(u: ArrayView2<'_, f64>, views: &[Array2<f64>]) -> f64 {
    let k = u.ncols() as f64;
    views
        .iter()
        .map(|v| {
            let c = u.t().dot(v);
            2.0 * k - 2.0 * c.iter().map(|x| x * x).sum::<f64>()
        })
        .sum()
}

/// Augmented embedding against the dense eigenprojector of `Σ_v U^v U^vᵀ`
/// and against `candidates` random orthonormal competitors.
pub fn check_augmented(seed: u64, candidates: usize) -> Check {
    let mut r = rng(seed);
    let k = r.gen_range(1..=5);
    let nv = r.gen_range(1..=4);
    let n = r.gen_range((k + 1).max(6)..=100);
    let mut views: Vec<Array2<f64>> = Vec::new();
    for v in 0..nv {
        if v > 0 && r.gen_bool(0.2) {
            views.push(views[0].clone());
        } else {
            views.push(random_orthonormal(&mut r, n, k));
        }
    }
    let reps: Vec<ReducedRepresentation> = views
        .iter()
        .map(|u| ReducedRepresentation::from_orthonormal(u.clone()))
        .collect();
    let aug = augmented_representation(&reps, k).map_err(|e| format!("seed {seed}: {e}"))?;
    let ustar = aug.ustar.u();
    let ortho = orthonormality_error(ustar);
    ensure(ortho <= 1e-8, || format!("seed {seed}: orthonormality error {ortho:e}"))?;

    let mut sum = Array2::<f64>::zeros((n, n));
    for v in &views {
        sum += &projector(v.view());
    }
    let (lambda, vecs) = jacobi_eigen(&sum);
    let gap = lambda[k - 1] - lambda[k];
    if gap > 1e-8 {
        let oracle = vecs.slice(s![.., ..k]).to_owned();
        let err = frobenius(&(projector(ustar) - projector(oracle.view())));
        ensure(err <= 1e-6, || format!("seed {seed}: projector error {err:e}"))?;
    }
    let optimum = 2.0 * (nv * k) as f64 - 2.0 * lambda[..k].iter().sum::<f64>();
    let achieved = dense_objective(ustar, &views);
    ensure((achieved - optimum).abs() <= 1e-8, || {
        format!("seed {seed}: objective {achieved} vs dense optimum {optimum}")
    })?;
    for c in 0..candidates {
        let cand = random_orthonormal(&mut r, n, k);
        let other = trace_objective(cand.view(), &views);
        ensure(achieved <= other + 1e-10, || {
            format!("seed {seed}: candidate {c} beats the augmented view ({other} < {achieved})")
        })?;
    }
    Ok(())
}

fn augmented_from(u: Array2<f64>) -> AugmentedView {
    AugmentedView {
        ustar: ReducedRepresentation::from_orthonormal(u),
        iteration: 1,
        eigengap: 1.0,
    }
}

/// Landmark columns against the dense `U* U*ᵀ`.
pub fn check_landmark_affinity(seed: u64) -> Check {
    let mut r = rng(seed);
    let p = r.gen_range(1..=8);
    let n = r.gen_range(p.max(2)..=60);
    let k = r.gen_range(1..=5.min(n));
    let u = random_orthonormal(&mut r, n, k);
    let lm = random_landmarks(n, p, seed).map_err(|e| e.to_string())?;
    let atil = extract_landmark_affinity(&augmented_from(u.clone()), &lm);
    let full = projector(u.view());
    for i in 0..n {
        for (j, &m) in lm.indices().iter().enumerate() {
            let e = (atil.atil[[i, j]] - full[[i, m]]).abs();
            ensure(e <= 1e-12, || format!("seed {seed}: entry ({i},{j}) off by {e:e}"))?;
        }
    }
    Ok(())
}

/// Entrywise update against a dense Hadamard product.
pub fn check_update(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.gen_range(3..=40);
    let p = r.gen_range(2..=10.min(n));
    let q = r.gen_range(1..p);
    let x = gaussian(&mut r, n, 3);
    let lm = random_landmarks(n, p, seed).map_err(|e| e.to_string())?;
    let z = build_sparse_representation(x.view(), &lm, q, 1.0).map_err(|e| e.to_string())?;
    let atil = Array2::from_shape_fn((n, p), |_| r.gen_range(-1.0..1.0));
    let opts = UpdateOptions {
        clamp: if r.gen_bool(0.5) { ClampMode::Zero } else { ClampMode::Abs },
        renormalize_rows: r.gen_bool(0.5),
    };
    let (out, stats) = update_view(&z, &LandmarkAffinity { atil: atil.clone() }, opts).map_err(|e| e.to_string())?;

    let before = z.to_dense();
    let mut oracle = Array2::<f64>::zeros((n, p));
    let mut collapsed = 0;
    for i in 0..n {
        for j in 0..p {
            let a = atil[[i, j]];
            let w = match opts.clamp {
                ClampMode::Zero => a.max(0.0),
                ClampMode::Abs => a.abs(),
            };
            oracle[[i, j]] = before[[i, j]] * w;
        }
        let s: f64 = oracle.row(i).sum();
        if s < 1e-300 {
            collapsed += 1;
            oracle.row_mut(i).assign(&before.row(i));
        } else if opts.renormalize_rows {
            oracle.row_mut(i).mapv_inplace(|v| v / s);
        }
    }
    let err = (&out.to_dense() - &oracle).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ensure(err <= 1e-10, || format!("seed {seed}: update off by {err:e}"))?;
    ensure(stats.collapsed_rows == collapsed, || {
        format!("seed {seed}: {} collapsed rows, oracle {collapsed}", stats.collapsed_rows)
    })
}

/// Projector distance against the dense Frobenius norm.
pub fn check_delta(seed: u64) -> Check {
    let mut r = rng(seed);
    let k = r.gen_range(1..=5);
    let n = r.gen_range(k..=60);
    let a = random_orthonormal(&mut r, n, k);
    let b = random_orthonormal(&mut r, n, k);
    let dense = frobenius(&(projector(a.view()) - projector(b.view())));
    let got = projector_distance(a.view(), b.view());
    ensure((got - dense).abs() <= 1e-10, || format!("seed {seed}: delta {got} vs dense {dense}"))?;
    let back = projector_distance(b.view(), a.view());
    ensure((got - back).abs() <= 1e-12, || format!("seed {seed}: asymmetric delta"))?;
    let rot = random_orthonormal(&mut r, k, k);
    let rotated = a.dot(&rot);
    let still = projector_distance(a.view(), rotated.view());
    ensure(still <= 1e-10, || format!("seed {seed}: rotation moved the projector by {still:e}"))
}

/// Accuracy against the best of all one-to-one mappings.
pub fn check_accuracy(seed: u64) -> Check {
    let mut r = rng(seed);
    let kt = r.gen_range(1..=7);
    let kp = r.gen_range(1..=7);
    let n = r.gen_range(1..=60);
    let truth: Vec<usize> = (0..n).map(|_| r.gen_range(0..kt)).collect();
    let pred: Vec<usize> = (0..n).map(|_| r.gen_range(0..kp)).collect();
    let m = kt.max(kp);
    let mut counts = vec![vec![0usize; m]; m];
    for (&a, &b) in pred.iter().zip(&truth) {
        counts[a][b] += 1;
    }
    let best = permutations(m)
        .iter()
        .map(|perm| (0..m).map(|i| counts[i][perm[i]]).sum::<usize>())
        .max()
        .unwrap();
    let expect = best as f64 / n as f64;
    let got = accuracy(&pred, &truth).map_err(|e| e.to_string())?;
    ensure((got - expect).abs() <= 1e-12, || format!("seed {seed}: acc {got} vs exhaustive {expect}"))
}

/// Assignment cost against every permutation.
pub fn check_hungarian(seed: u64) -> Check {
    let mut r = rng(seed);
    let m = r.gen_range(1..=7);
    let cost = Array2::from_shape_fn((m, m), |_| {
        if r.gen_bool(0.3) {
            r.gen_range(0..5) as f64
        } else {
            r.gen_range(-10.0..10.0)
        }
    });
    let assignment = hungarian(&cost);
    let mut seen = vec![false; m];
    for &j in &assignment {
        ensure(j < m && !seen[j], || format!("seed {seed}: assignment is not a permutation"))?;
        seen[j] = true;
    }
    let got: f64 = (0..m).map(|i| cost[[i, assignment[i]]]).sum();
    let best = permutations(m)
        .iter()
        .map(|perm| (0..m).map(|i| cost[[i, perm[i]]]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    ensure((got - best).abs() <= 1e-10, || format!("seed {seed}: cost {got} vs exhaustive {best}"))
}
