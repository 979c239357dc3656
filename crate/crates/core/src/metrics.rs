//! External clustering quality: accuracy under the best one-to-one label
//! matching, and normalized mutual information.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Co-occurrence counts of predicted clusters (rows) and true classes
/// (columns). Both label sets are compacted in increasing label order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Array2<usize>,
    pub pred_labels: Vec<usize>,
    pub truth_labels: Vec<usize>,
}

impl ContingencyTable {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::Shape(format!(
                "{} predicted labels against {} true labels",
                pred.len(),
                truth.len()
            )));
        }
        if pred.is_empty() {
            return Err(Error::InvalidParameter("label vectors are empty".into()));
        }
        let compact = |labels: &[usize]| {
            let mut ids = BTreeMap::new();
            for &l in labels {
                ids.entry(l).or_insert(0usize);
            }
            for (pos, v) in ids.values_mut().enumerate() {
                *v = pos;
            }
            ids
        };
        let pi = compact(pred);
        let ti = compact(truth);
        let mut counts = Array2::<usize>::zeros((pi.len(), ti.len()));
        for (a, b) in pred.iter().zip(truth) {
            counts[[pi[a], ti[b]]] += 1;
        }
        Ok(Self {
            counts,
            pred_labels: pi.into_keys().collect(),
            truth_labels: ti.into_keys().collect(),
        })
    }

    pub fn total(&self) -> usize {
        self.counts.sum()
    }
}

/// Fraction of samples correctly labelled under the best one-to-one mapping
/// of predicted clusters to classes. Unequal cluster counts are handled by
/// zero padding, so surplus clusters count as wrong.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let (r, c) = table.counts.dim();
    let m = r.max(c);
    let cost = Array2::from_shape_fn((m, m), |(i, j)| {
        if i < r && j < c {
            -(table.counts[[i, j]] as f64)
        } else {
            0.0
        }
    });
    let assignment = hungarian(&cost);
    let matched: usize = assignment
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < r && j < c)
        .map(|(i, &j)| table.counts[[i, j]])
        .sum();
    Ok(matched as f64 / pred.len() as f64)
}

/// `I(pred; truth) / √(H(pred) H(truth))` with natural logarithms.
///
/// Two single-cluster partitions score 1. If exactly one side has a single
/// cluster the score is 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let n = table.total() as f64;
    let (r, c) = table.counts.dim();
    let rows: Vec<f64> = (0..r).map(|i| table.counts.row(i).sum() as f64).collect();
    let cols: Vec<f64> = (0..c).map(|j| table.counts.column(j).sum() as f64).collect();
    let entropy = |m: &[f64]| -m.iter().map(|&x| x / n).filter(|&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
    let (hp, ht) = (entropy(&rows), entropy(&cols));
    if r == 1 && c == 1 {
        return Ok(1.0);
    }
    if r == 1 || c == 1 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for ((i, j), &nij) in table.counts.indexed_iter() {
        if nij == 0 {
            continue;
        }
        let nij = nij as f64;
        mi += nij / n * (n * nij / (rows[i] * cols[j])).ln();
    }
    Ok((mi / (hp * ht).sqrt()).clamp(0.0, 1.0))
}

/// Minimum-cost perfect matching on a square cost matrix: entry `i` of the
/// result is the column assigned to row `i`. `O(m³)` shortest augmenting
/// paths with row and column potentials.
pub fn hungarian(cost: &Array2<f64>) -> Vec<usize> {
    let m = cost.nrows();
    assert_eq!(m, cost.ncols(), "hungarian needs a square matrix");
    // 1-based with a virtual column 0 that holds the row being inserted
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=m {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[col0] = true;
            let i0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; m];
    for j in 1..=m {
        assignment[owner[j] - 1] = j - 1;
    }
    assignment
}
