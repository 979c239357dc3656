//! Seeded k-means on the rows of the final embedding.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{row_blocks, sq_dist};
use crate::rng;
use crate::sampling::plus_plus_seeds;

pub const DEFAULT_MAX_ITERS: usize = 300;
pub const DEFAULT_RESTARTS: usize = 10;
/// Lloyd stops once inertia improves by less than this fraction.
pub const RELATIVE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    /// Cluster of every row, numbered by first appearance.
    pub labels: Vec<usize>,
    /// `k x d` centers aligned with the labels.
    pub centroids: Array2<f64>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
}

/// Best of `restarts` Lloyd runs, each seeded by k-means++ from its own
/// stream. Ties in inertia go to the earliest restart.
pub fn kmeans(rows: ArrayView2<'_, f64>, k: usize, max_iters: usize, restarts: usize, seed: u64) -> Result<ClusteringResult> {
    let n = rows.nrows();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if n < k {
        return Err(Error::InvalidParameter(format!("cannot form {k} clusters from {n} rows")));
    }
    if restarts == 0 || max_iters == 0 {
        return Err(Error::InvalidParameter("k-means needs at least one restart and one iteration".into()));
    }
    if let Some(((i, j), _)) = rows.indexed_iter().find(|(_, x)| !x.is_finite()) {
        return Err(Error::NonFinite { view: "embedding".into(), row: i, col: j });
    }
    let rows = rows.as_standard_layout();
    let rows = rows.view();

    let runs: Vec<ClusteringResult> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, &format!("kmeans-restart-{r}"));
            let seeds = plus_plus_seeds(rows, k, &mut rng);
            let init = rows.select(Axis(0), &seeds);
            lloyd(rows, init, max_iters)
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, r| if r.inertia < best.inertia { r } else { best })
        .expect("at least one restart");
    Ok(best)
}

/// Lloyd iterations from the given centers.
///
/// Each step assigns rows to their nearest center (ties to the lowest
/// index), fills any empty cluster with the point farthest from its center,
/// and records the inertia before moving centers to their means.
pub fn lloyd(rows: ArrayView2<'_, f64>, init: Array2<f64>, max_iters: usize) -> ClusteringResult {
    let rows = rows.as_standard_layout();
    let rows = rows.view();
    let (n, d) = rows.dim();
    let k = init.nrows();
    assert_eq!(init.ncols(), d, "centers and rows disagree on dimension");

    let mut centroids = init.as_standard_layout().into_owned();
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let (mut next, mut dist) = assign(&rows, &centroids);
        repair_empty(&rows, &mut next, &mut dist, &mut centroids);
        let inertia: f64 = dist.iter().sum();
        let stable = next == labels;
        labels = next;
        let small_gain = history
            .last()
            .is_some_and(|&prev: &f64| prev - inertia <= RELATIVE_TOLERANCE * prev);
        history.push(inertia);
        if stable || small_gain || iterations >= max_iters {
            break;
        }
        centroids = means(&rows, &labels, k, &centroids);
    }
    canonical(labels, centroids, history, iterations)
}

fn assign(rows: &ArrayView2<'_, f64>, centroids: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    let k = centroids.nrows();
    let centers: Vec<&[f64]> = (0..k)
        .map(|c| centroids.row(c).to_slice().expect("standard layout"))
        .collect();
    (0..rows.nrows())
        .into_par_iter()
        .map(|i| {
            let x = rows.row(i);
            let x = x.to_slice().expect("standard layout");
            let mut best = (0, f64::INFINITY);
            for (c, m) in centers.iter().enumerate() {
                let e = sq_dist(x, m);
                if e < best.1 {
                    best = (c, e);
                }
            }
            best
        })
        .unzip()
}

/// Give every empty cluster the point farthest from its own center, taken
/// only from clusters that keep at least one member.
fn repair_empty(rows: &ArrayView2<'_, f64>, labels: &mut [usize], dist: &mut [f64], centroids: &mut Array2<f64>) {
    let k = centroids.nrows();
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let mut pick: Option<usize> = None;
        for i in 0..labels.len() {
            if sizes[labels[i]] < 2 {
                continue;
            }
            if pick.is_none_or(|p| dist[i] > dist[p]) {
                pick = Some(i);
            }
        }
        let Some(i) = pick else { break };
        sizes[labels[i]] -= 1;
        sizes[c] = 1;
        labels[i] = c;
        dist[i] = 0.0;
        centroids.row_mut(c).assign(&rows.row(i));
    }
}

/// Cluster means; a cluster without members keeps its previous center.
fn means(rows: &ArrayView2<'_, f64>, labels: &[usize], k: usize, previous: &Array2<f64>) -> Array2<f64> {
    let d = rows.ncols();
    let partials: Vec<(Array2<f64>, Vec<usize>)> = row_blocks(rows.nrows())
        .into_par_iter()
        .map(|range| {
            let mut sums = Array2::<f64>::zeros((k, d));
            let mut counts = vec![0usize; k];
            for i in range {
                let l = labels[i];
                counts[l] += 1;
                let mut s = sums.row_mut(l);
                s += &rows.row(i);
            }
            (sums, counts)
        })
        .collect();
    let mut sums = Array2::<f64>::zeros((k, d));
    let mut counts = vec![0usize; k];
    for (s, c) in partials {
        sums += &s;
        counts.iter_mut().zip(c).for_each(|(a, b)| *a += b);
    }
    for (c, mut row) in sums.axis_iter_mut(Axis(0)).enumerate() {
        if counts[c] == 0 {
            row.assign(&previous.row(c));
        } else {
            row /= counts[c] as f64;
        }
    }
    sums
}

/// Renumber clusters by first appearance; unused clusters go last in their
/// original order.
fn canonical(labels: Vec<usize>, centroids: Array2<f64>, history: Vec<f64>, iterations: usize) -> ClusteringResult {
    let k = centroids.nrows();
    let mut map = vec![usize::MAX; k];
    let mut order = Vec::with_capacity(k);
    for &l in &labels {
        if map[l] == usize::MAX {
            map[l] = order.len();
            order.push(l);
        }
    }
    for (c, slot) in map.iter_mut().enumerate() {
        if *slot == usize::MAX {
            *slot = order.len();
            order.push(c);
        }
    }
    ClusteringResult {
        labels: labels.into_iter().map(|l| map[l]).collect(),
        centroids: centroids.select(Axis(0), &order),
        inertia: *history.last().expect("at least one step"),
        iterations,
        inertia_history: history,
    }
}

/// Scale rows to unit Euclidean norm; zero rows stay zero.
pub fn row_normalize(rows: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = rows.to_owned();
    for mut r in out.axis_iter_mut(Axis(0)) {
        let norm = r.dot(&r).sqrt();
        if norm > 0.0 {
            r /= norm;
        }
    }
    out
}
