//! Sample-to-landmark affinities.
//!
//! Each sample keeps Gaussian weights to its `q` nearest landmarks; rows are
//! scaled to sum to one and columns are then scaled by the inverse square root
//! of their sums.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{row_blocks, sq_dist};
use crate::rng;
use crate::sampling::LandmarkSet;

/// Up to this many samples the bandwidth uses every pair.
pub const EXACT_MEDIAN_LIMIT: usize = 2000;
pub const DEFAULT_MEDIAN_PAIRS: usize = 1_000_000;

/// Fixed-width row-sparse `n x p` matrix: every row stores exactly `q`
/// `(column, value)` slots, columns ascending. A slot may hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSparse {
    n: usize,
    p: usize,
    q: usize,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl RowSparse {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = i * self.q..(i + 1) * self.q;
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    pub fn columns(&self) -> &[usize] {
        &self.cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.n, self.p));
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                d[[i, j]] += x;
            }
        }
        d
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.vals.chunks(self.q).map(|r| r.iter().sum()).collect()
    }

    /// Column sums, reduced over fixed row blocks.
    pub fn column_sums(&self) -> Vec<f64> {
        let partials: Vec<Vec<f64>> = row_blocks(self.n)
            .into_par_iter()
            .map(|range| {
                let mut s = vec![0.0; self.p];
                for i in range {
                    let (c, v) = self.row(i);
                    for (&j, &x) in c.iter().zip(v) {
                        s[j] += x;
                    }
                }
                s
            })
            .collect();
        let mut sums = vec![0.0; self.p];
        for part in partials {
            for (s, x) in sums.iter_mut().zip(part) {
                *s += x;
            }
        }
        sums
    }

    /// Divide every non-empty row by its sum.
    pub fn normalize_rows(&mut self) {
        let q = self.q;
        self.vals.par_chunks_mut(q).for_each(|r| {
            let s: f64 = r.iter().sum();
            if s > 0.0 {
                r.iter_mut().for_each(|x| *x /= s);
            }
        });
    }

    /// Coordinate-list dump (`row,col,value`) of the stored entries.
    pub fn write_coo_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut go = || -> std::io::Result<()> {
            writeln!(w, "row,col,value")?;
            for i in 0..self.n {
                let (c, v) = self.row(i);
                for (j, x) in c.iter().zip(v) {
                    writeln!(w, "{i},{j},{x}")?;
                }
            }
            w.flush()
        };
        go().map_err(|e| Error::io(path, e))
    }
}

/// Row-normalized q-NN Gaussian affinities of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRepresentation {
    pub matrix: RowSparse,
    pub sigma: f64,
}

impl std::ops::Deref for SparseRepresentation {
    type Target = RowSparse;
    fn deref(&self) -> &RowSparse {
        &self.matrix
    }
}

/// Column-scaled affinities `Z D^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedRepresentation {
    pub matrix: RowSparse,
    /// Column sums of the unscaled matrix.
    pub column_sums: Vec<f64>,
}

impl std::ops::Deref for NormalizedRepresentation {
    type Target = RowSparse;
    fn deref(&self) -> &RowSparse {
        &self.matrix
    }
}

/// Median pairwise Euclidean distance, over all pairs when `n` is at most
/// [`EXACT_MEDIAN_LIMIT`] and over `sample_pairs` random pairs otherwise.
pub fn median_bandwidth(x: ArrayView2<'_, f64>, sample_pairs: usize, seed: u64) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidParameter("bandwidth needs at least two samples".into()));
    }
    let x = x.as_standard_layout();
    let row = |i: usize| x.row(i).to_slice().expect("standard layout");
    let mut dists: Vec<f64> = if n <= EXACT_MEDIAN_LIMIT {
        (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (i + 1..n).map(move |j| sq_dist(row(i), row(j)).sqrt()))
            .collect()
    } else {
        if sample_pairs == 0 {
            return Err(Error::InvalidParameter("sample_pairs must be positive".into()));
        }
        let mut rng = rng::stream(seed, "bandwidth");
        let pairs: Vec<(usize, usize)> = (0..sample_pairs)
            .map(|_| {
                let i = rng.gen_range(0..n);
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                (i, j)
            })
            .collect();
        pairs.into_par_iter().map(|(i, j)| sq_dist(row(i), row(j)).sqrt()).collect()
    };

    let m = median(&mut dists);
    if m > 0.0 {
        return Ok(m);
    }
    // more than half the pairs coincide: fall back to the positive distances
    let mut positive: Vec<f64> = dists.into_iter().filter(|&d| d > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::DegenerateView);
    }
    Ok(median(&mut positive))
}

fn median(v: &mut [f64]) -> f64 {
    let len = v.len();
    let mid = len / 2;
    let (_, &mut upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if len % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Gaussian weights to the `q` nearest landmarks of every sample, rows scaled
/// to sum to one. Distance ties at the `q`-th neighbour go to the lower
/// landmark position.
pub fn build_sparse_representation(
    x: ArrayView2<'_, f64>,
    landmarks: &LandmarkSet,
    q: usize,
    sigma: f64,
) -> Result<SparseRepresentation> {
    let p = landmarks.len();
    let n = x.nrows();
    if q == 0 || q >= p {
        return Err(Error::InvalidParameter(format!("need 0 < q < p, got q = {q}, p = {p}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {sigma}")));
    }
    if let Some(&bad) = landmarks.indices().iter().find(|&&m| m >= n) {
        return Err(Error::InvalidParameter(format!("landmark {bad} out of range for n = {n}")));
    }
    let x = x.as_standard_layout();
    let row = |i: usize| x.row(i).to_slice().expect("standard layout");
    let centers: Vec<&[f64]> = landmarks.indices().iter().map(|&m| row(m)).collect();
    let scale = 1.0 / (2.0 * sigma * sigma);

    let mut cols = vec![0usize; n * q];
    let mut vals = vec![0.0f64; n * q];
    cols.par_chunks_mut(q)
        .zip(vals.par_chunks_mut(q))
        .enumerate()
        .for_each_init(
            || Vec::with_capacity(p),
            |scratch: &mut Vec<(f64, usize)>, (i, (c_out, v_out))| {
                let xi = row(i);
                scratch.clear();
                scratch.extend(centers.iter().enumerate().map(|(j, c)| (sq_dist(xi, c), j)));
                let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                scratch.select_nth_unstable_by(q - 1, by_dist);
                let nearest = &mut scratch[..q];
                let d_min = nearest.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
                nearest.sort_unstable_by_key(|e| e.1);
                // shifting by the nearest distance cancels in the row scaling
                // and keeps far rows from underflowing
                let mut sum = 0.0;
                for (slot, &(d, j)) in nearest.iter().enumerate() {
                    let w = (-(d - d_min) * scale).exp();
                    c_out[slot] = j;
                    v_out[slot] = w;
                    sum += w;
                }
                v_out.iter_mut().for_each(|w| *w /= sum);
            },
        );

    Ok(SparseRepresentation {
        matrix: RowSparse { n, p, q, cols, vals },
        sigma,
    })
}

/// Scale column `j` by `1 / sqrt(d_j)`; columns with zero sum stay zero.
pub fn normalize_columns(z: &SparseRepresentation) -> NormalizedRepresentation {
    let column_sums = z.column_sums();
    let scale: Vec<f64> = column_sums
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut matrix = z.matrix.clone();
    let q = matrix.q;
    matrix
        .vals
        .par_chunks_mut(q)
        .zip(z.matrix.cols.par_chunks(q))
        .for_each(|(v, c)| {
            for (x, &j) in v.iter_mut().zip(c) {
                *x *= scale[j];
            }
        });
    NormalizedRepresentation { matrix, column_sums }
}

#[cfg(test)]
pub(crate) fn from_parts(n: usize, p: usize, q: usize, cols: Vec<usize>, vals: Vec<f64>) -> RowSparse {
    assert_eq!(cols.len(), n * q);
    assert_eq!(vals.len(), n * q);
    RowSparse { n, p, q, cols, vals }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn bandwidth_of_single_pair() {
        let x = array![[0.0, 0.0], [4.0, 0.0]];
        assert_abs_diff_eq!(median_bandwidth(x.view(), 10, 0).unwrap(), 4.0);
    }

    #[test]
    fn bandwidth_by_pair_enumeration() {
        // pairwise distances {1, 9, 10}
        let x = array![[0.0], [1.0], [10.0]];
        assert_abs_diff_eq!(median_bandwidth(x.view(), 10, 0).unwrap(), 9.0);
    }

    #[test]
    fn bandwidth_rejects_identical_points() {
        let x = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        assert!(matches!(median_bandwidth(x.view(), 10, 0), Err(Error::DegenerateView)));
        assert!(median_bandwidth(array![[1.0]].view(), 10, 0).is_err());
    }

    #[test]
    fn bandwidth_subsamples_large_inputs_reproducibly() {
        let x = Array2::from_shape_fn((2500, 2), |(i, j)| ((i * 31 + j * 7) % 97) as f64);
        let a = median_bandwidth(x.view(), 20_000, 3).unwrap();
        let b = median_bandwidth(x.view(), 20_000, 3).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
    }

    #[test]
    fn coincident_sample_gets_unit_weight() {
        let x = array![[0.0, 0.0], [5.0, 5.0], [9.0, 1.0], [0.0, 0.1]];
        let lm = LandmarkSet::new(vec![0, 1, 2], 4).unwrap();
        let z = build_sparse_representation(x.view(), &lm, 1, 1.0).unwrap();
        assert_eq!(z.row(1), (&[1usize][..], &[1.0][..]));
        assert_eq!(z.row(3), (&[0usize][..], &[1.0][..]));
    }

    #[test]
    fn equidistant_neighbours_share_weight() {
        let x = array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, 50.0], [0.0, 0.0]];
        let lm = LandmarkSet::new(vec![0, 1, 2, 3], 5).unwrap();
        let z = build_sparse_representation(x.view(), &lm, 3, 0.7).unwrap();
        let (c, v) = z.row(4);
        assert_eq!(c, &[0, 1, 2]);
        for w in v {
            assert_abs_diff_eq!(*w, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn q_tie_goes_to_lower_landmark() {
        let x = array![[1.0], [-1.0], [0.0]];
        let lm = LandmarkSet::new(vec![1, 0], 3).unwrap();
        let z = build_sparse_representation(x.view(), &lm, 1, 1.0).unwrap();
        // sample 2 is equidistant; position 0 holds sample 1
        assert_eq!(z.row(2).0, &[0]);
    }

    #[test]
    fn rejects_bad_q_and_sigma() {
        let x = array![[0.0], [1.0], [2.0]];
        let lm = LandmarkSet::new(vec![0, 1], 3).unwrap();
        assert!(build_sparse_representation(x.view(), &lm, 2, 1.0).is_err());
        assert!(build_sparse_representation(x.view(), &lm, 0, 1.0).is_err());
        assert!(build_sparse_representation(x.view(), &lm, 1, 0.0).is_err());
    }

    #[test]
    fn far_rows_do_not_underflow() {
        let x = array![[0.0], [1.0], [1e6]];
        let lm = LandmarkSet::new(vec![0, 1], 3).unwrap();
        let z = build_sparse_representation(x.view(), &lm, 1, 0.01).unwrap();
        assert_eq!(z.row_sums(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn single_all_ones_column_scales_to_half() {
        let z = SparseRepresentation {
            matrix: from_parts(4, 2, 1, vec![0; 4], vec![1.0; 4]),
            sigma: 1.0,
        };
        let zh = normalize_columns(&z);
        assert_eq!(zh.values(), &[0.5; 4]);
        assert_eq!(zh.column_sums, vec![4.0, 0.0]);
    }

    #[test]
    fn zero_column_stays_zero() {
        let z = SparseRepresentation {
            matrix: from_parts(2, 3, 2, vec![0, 2, 0, 2], vec![0.5, 0.5, 0.25, 0.75]),
            sigma: 1.0,
        };
        let zh = normalize_columns(&z).to_dense();
        assert!(zh.column(1).iter().all(|&x| x == 0.0));
        assert!(zh.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn coo_dump_lists_stored_entries() {
        let dir = tempfile::tempdir().unwrap();
        let z = from_parts(2, 3, 1, vec![2, 0], vec![1.0, 1.0]);
        let p = dir.path().join("z.csv");
        z.write_coo_csv(&p).unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "row,col,value\n0,2,1\n1,0,1\n");
    }
}
