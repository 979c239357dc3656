//! Landmark selection on the concatenated feature space.
//!
//! The k-medoids routine is the alternating Voronoi heuristic: assign every
//! point to its nearest medoid, then re-pick each cluster's medoid. The
//! re-pick scores a bounded candidate set (the cluster members closest to the
//! cluster mean, plus the current medoid) by their exact within-cluster
//! distance sum, so a sweep costs `O(n p d)` and the total assignment cost
//! never increases.

use ndarray::ArrayView2;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::sq_dist;
use crate::rng;

/// Upper bound on medoid candidates scored per cluster and sweep.
pub const MEDOID_CANDIDATES: usize = 64;

pub const DEFAULT_KMEDOIDS_ITERS: usize = 10;

/// `p` distinct sample indices, shared by every view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandmarkSet {
    indices: Vec<usize>,
}

impl LandmarkSet {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidParameter("landmark set is empty".into()));
        }
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(Error::InvalidParameter(format!("landmark index {i} out of range for n = {n}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter(format!("landmark index {i} repeated")));
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Full outcome of a k-medoids run.
#[derive(Debug, Clone)]
pub struct KMedoids {
    pub landmarks: LandmarkSet,
    /// Medoid position (in `0..p`) of every sample.
    pub assignment: Vec<usize>,
    /// Sum of Euclidean distances to the assigned medoid: the seeding cost
    /// first, then one entry per accepted sweep.
    pub costs: Vec<f64>,
    pub iterations: usize,
}

fn check_sizes(n: usize, p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidParameter("number of landmarks must be positive".into()));
    }
    if p > n {
        return Err(Error::InvalidParameter(format!("{p} landmarks requested from {n} samples")));
    }
    Ok(())
}

pub fn kmedoids_landmarks(x: ArrayView2<'_, f64>, p: usize, max_iters: usize, seed: u64) -> Result<LandmarkSet> {
    kmedoids(x, p, max_iters, seed).map(|r| r.landmarks)
}

pub fn kmedoids(x: ArrayView2<'_, f64>, p: usize, max_iters: usize, seed: u64) -> Result<KMedoids> {
    let n = x.nrows();
    check_sizes(n, p)?;
    if max_iters == 0 {
        return Err(Error::InvalidParameter("k-medoids needs at least one iteration".into()));
    }
    let x = x.as_standard_layout();
    let x = x.view();
    let mut rng = rng::stream(seed, "landmarks/kmedoids");
    let mut medoids = plus_plus_seeds(x, p, &mut rng);

    let (mut assignment, mut dist) = assign_with_distance(x, &medoids);
    let mut cost = total(&dist);
    let mut costs = vec![cost];
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        let candidate = update_medoids(x, &medoids, &assignment, &dist);
        if candidate == medoids {
            break;
        }
        let (a, d) = assign_with_distance(x, &candidate);
        let c = total(&d);
        if c > cost {
            // rounding can only push a non-improving sweep above the old cost
            break;
        }
        medoids = candidate;
        assignment = a;
        dist = d;
        cost = c;
        costs.push(cost);
    }

    Ok(KMedoids {
        landmarks: LandmarkSet::new(medoids, n)?,
        assignment,
        costs,
        iterations,
    })
}

fn total(d: &[f64]) -> f64 {
    d.iter().sum()
}

/// k-means++ style seeding returning `p` distinct row indices.
pub(crate) fn plus_plus_seeds(x: ArrayView2<'_, f64>, p: usize, rng: &mut rng::StreamRng) -> Vec<usize> {
    let n = x.nrows();
    let mut chosen = vec![false; n];
    let mut seeds = Vec::with_capacity(p);
    let first = rng.gen_range(0..n);
    seeds.push(first);
    chosen[first] = true;
    let row = |i: usize| x.row(i).to_slice().expect("standard layout");
    let mut d2: Vec<f64> = (0..n).into_par_iter().map(|i| sq_dist(row(i), row(first))).collect();

    while seeds.len() < p {
        let weight: f64 = d2.iter().enumerate().filter(|(i, _)| !chosen[*i]).map(|(_, w)| w).sum();
        let next = if weight > 0.0 {
            let mut target = rng.gen::<f64>() * weight;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if chosen[i] || w <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < w {
                    break;
                }
                target -= w;
            }
            pick.expect("positive total weight has a positive entry")
        } else {
            // remaining points all coincide with chosen ones
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.gen_range(0..free.len())]
        };
        seeds.push(next);
        chosen[next] = true;
        let c = row(next);
        d2.par_iter_mut().enumerate().for_each(|(i, d)| {
            let e = sq_dist(row(i), c);
            if e < *d {
                *d = e;
            }
        });
    }
    seeds
}

/// Index (into `medoids`) of the nearest medoid for every sample. Ties go to
/// the lowest medoid position.
pub fn assign_nearest(x: ArrayView2<'_, f64>, medoids: &LandmarkSet) -> Vec<usize> {
    let x = x.as_standard_layout();
    assign_with_distance(x.view(), medoids.indices()).0
}

fn assign_with_distance(x: ArrayView2<'_, f64>, medoids: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let centers: Vec<&[f64]> = medoids
        .iter()
        .map(|&m| x.row(m).to_slice().expect("standard layout"))
        .collect();
    let out: Vec<(usize, f64)> = (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i).to_slice().expect("standard layout");
            let mut best = (0, f64::INFINITY);
            for (j, c) in centers.iter().enumerate() {
                let d = sq_dist(xi, c);
                if d < best.1 {
                    best = (j, d);
                }
            }
            (best.0, best.1.sqrt())
        })
        .collect();
    out.into_iter().unzip()
}

fn update_medoids(x: ArrayView2<'_, f64>, medoids: &[usize], assignment: &[usize], dist: &[f64]) -> Vec<usize> {
    let p = medoids.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); p];
    for (i, &a) in assignment.iter().enumerate() {
        members[a].push(i);
    }
    let row = |i: usize| x.row(i).to_slice().expect("standard layout");

    let mut next: Vec<Option<usize>> = members
        .par_iter()
        .zip(medoids.par_iter())
        .map(|(m, &current)| {
            if m.is_empty() {
                return None;
            }
            Some(best_medoid(x, m, current, row))
        })
        .collect();

    // Empty clusters only arise from duplicate points; move their medoid to
    // the farthest point that is not already a medoid.
    if next.iter().any(Option::is_none) {
        let mut taken = vec![false; x.nrows()];
        for &m in next.iter().flatten() {
            taken[m] = true;
        }
        let mut order: Vec<usize> = (0..x.nrows()).collect();
        order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
        let mut free = order.into_iter().filter(|&i| !taken[i]);
        for slot in next.iter_mut().filter(|s| s.is_none()) {
            *slot = Some(free.next().expect("p <= n leaves a free point"));
        }
    }
    next.into_iter().map(|m| m.expect("all slots filled")).collect()
}

fn best_medoid<'a>(x: ArrayView2<'a, f64>, members: &[usize], current: usize, row: impl Fn(usize) -> &'a [f64]) -> usize {
    let d = x.ncols();
    let candidates: Vec<usize> = if members.len() <= MEDOID_CANDIDATES {
        members.to_vec()
    } else {
        let mut mean = vec![0.0; d];
        for &i in members {
            for (m, v) in mean.iter_mut().zip(row(i)) {
                *m += v;
            }
        }
        let inv = 1.0 / members.len() as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        let mut scored: Vec<(f64, usize)> = members.iter().map(|&i| (sq_dist(row(i), &mean), i)).collect();
        scored.select_nth_unstable_by(MEDOID_CANDIDATES - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut c: Vec<usize> = scored[..MEDOID_CANDIDATES].iter().map(|s| s.1).collect();
        if !c.contains(&current) {
            c.push(current);
        }
        c.sort_unstable();
        c
    };

    let within = |c: usize| -> f64 { members.iter().map(|&i| sq_dist(row(i), row(c)).sqrt()).sum() };
    let mut best = current;
    let mut best_cost = within(current);
    for &c in &candidates {
        if c == current {
            continue;
        }
        let cost = within(c);
        if cost < best_cost {
            best = c;
            best_cost = cost;
        }
    }
    best
}

/// Uniform sample of `p` distinct indices.
pub fn random_landmarks(n: usize, p: usize, seed: u64) -> Result<LandmarkSet> {
    check_sizes(n, p)?;
    let mut rng = rng::stream(seed, "landmarks/random");
    let indices = rand::seq::index::sample(&mut rng, n, p).into_vec();
    LandmarkSet::new(indices, n)
}
