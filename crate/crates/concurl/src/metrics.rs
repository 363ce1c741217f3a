//! Clustering evaluation: accuracy under the optimal cluster-to-class
//! matching, normalized mutual information, and the adjusted Rand index.
//!
//! All three work off a contingency table between the two labelings. ARI is
//! computed in exact integer arithmetic; NMI uses natural logs (the
//! normalization is base-invariant).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Co-occurrence counts between two labelings of the same points.
#[derive(Clone, Debug)]
pub struct ContingencyTable {
    /// counts[i][j] = number of points with row label i and column label j.
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
    pub row_marginals: Vec<u64>,
    pub col_marginals: Vec<u64>,
    /// Original label values, ascending, indexing the rows/columns.
    pub row_values: Vec<usize>,
    pub col_values: Vec<usize>,
}

impl ContingencyTable {
    pub fn from_labels(u: &[usize], v: &[usize]) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::Data(format!(
                "labelings have different lengths: {} vs {}",
                u.len(),
                v.len()
            )));
        }
        if u.is_empty() {
            return Err(Error::Data("labelings are empty".into()));
        }
        let mut row_index = BTreeMap::new();
        let mut col_index = BTreeMap::new();
        for &a in u {
            let next = row_index.len();
            row_index.entry(a).or_insert(next);
        }
        for &b in v {
            let next = col_index.len();
            col_index.entry(b).or_insert(next);
        }
        // BTreeMap iteration is ascending; reassign indices in that order.
        let row_values: Vec<usize> = row_index.keys().copied().collect();
        let col_values: Vec<usize> = col_index.keys().copied().collect();
        for (i, k) in row_values.iter().enumerate() {
            row_index.insert(*k, i);
        }
        for (j, k) in col_values.iter().enumerate() {
            col_index.insert(*k, j);
        }
        let (r, c) = (row_values.len(), col_values.len());
        let mut counts = vec![vec![0u64; c]; r];
        for (&a, &b) in u.iter().zip(v) {
            counts[row_index[&a]][col_index[&b]] += 1;
        }
        let row_marginals: Vec<u64> = counts.iter().map(|row| row.iter().sum()).collect();
        let mut col_marginals = vec![0u64; c];
        for row in &counts {
            for (j, &x) in row.iter().enumerate() {
                col_marginals[j] += x;
            }
        }
        Ok(ContingencyTable {
            counts,
            n: u.len() as u64,
            row_marginals,
            col_marginals,
            row_values,
            col_values,
        })
    }

    /// True when the two labelings induce the same partition, i.e. the table
    /// is a permutation pattern (one nonzero per row and per column).
    pub fn same_partition(&self) -> bool {
        if self.row_values.len() != self.col_values.len() {
            return false;
        }
        let c = self.col_values.len();
        let mut col_nonzeros = vec![0usize; c];
        for row in &self.counts {
            let mut row_nonzeros = 0;
            for (j, &x) in row.iter().enumerate() {
                if x > 0 {
                    row_nonzeros += 1;
                    col_nonzeros[j] += 1;
                }
            }
            if row_nonzeros != 1 {
                return false;
            }
        }
        col_nonzeros.iter().all(|&k| k == 1)
    }
}

/// Minimum-cost assignment on an `n x m` matrix with `n <= m`, via the
/// potentials form of the Hungarian algorithm, O(n^2 m). Returns the column
/// assigned to each row.
fn hungarian_min(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let m = cost[0].len();
    assert!(n <= m, "hungarian_min needs rows <= cols");
    // 1-indexed potentials and matching; p[j] = row matched to column j.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=m {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Fraction of points whose cluster, after the accuracy-maximizing injective
/// cluster-to-class relabeling, matches the true class. Also returns that
/// relabeling as `(cluster value, class value)` pairs.
///
/// Errors if `pred` uses more distinct labels than `truth`.
pub fn cluster_accuracy(pred: &[usize], truth: &[usize]) -> Result<(f64, Vec<(usize, usize)>)> {
    let ct = ContingencyTable::from_labels(pred, truth)?;
    let r = ct.row_values.len();
    let c = ct.col_values.len();
    if r > c {
        return Err(Error::Data(format!(
            "{} predicted clusters but only {} classes",
            r, c
        )));
    }
    // Maximize matched counts: run min-cost on (max - profit), padding the
    // profit matrix square with zero rows.
    let max_count = ct.counts.iter().flatten().copied().max().unwrap_or(0) as f64;
    let mut cost = vec![vec![max_count; c]; c];
    for i in 0..r {
        for j in 0..c {
            cost[i][j] = max_count - ct.counts[i][j] as f64;
        }
    }
    let assignment = hungarian_min(&cost);
    let mut matched = 0u64;
    let mut mapping = Vec::with_capacity(r);
    for i in 0..r {
        matched += ct.counts[i][assignment[i]];
        mapping.push((ct.row_values[i], ct.col_values[assignment[i]]));
    }
    Ok((matched as f64 / ct.n as f64, mapping))
}

/// Sums in ascending value order, so the result does not depend on how the
/// terms were enumerated (keeps nmi exactly symmetric and exactly invariant
/// under label renames).
fn stable_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Mutual information of the two labelings, in nats.
pub fn mutual_information(ct: &ContingencyTable) -> f64 {
    let n = ct.n as f64;
    let mut terms = Vec::new();
    for (i, row) in ct.counts.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij == 0 {
                continue;
            }
            let nij = nij as f64;
            let a = ct.row_marginals[i] as f64;
            let b = ct.col_marginals[j] as f64;
            terms.push((nij / n) * ((n * nij) / (a * b)).ln());
        }
    }
    stable_sum(terms).max(0.0)
}

fn entropy(marginals: &[u64], n: u64) -> f64 {
    let n = n as f64;
    let terms: Vec<f64> = marginals
        .iter()
        .filter(|&&a| a > 0)
        .map(|&a| {
            let p = a as f64 / n;
            -p * p.ln()
        })
        .collect();
    stable_sum(terms).max(0.0)
}

/// Normalized mutual information, MI / sqrt(H(u) * H(v)), in [0, 1].
///
/// Identical partitions give exactly 1.0; otherwise a zero entropy on either
/// side gives 0.0.
pub fn nmi(u: &[usize], v: &[usize]) -> Result<f64> {
    let ct = ContingencyTable::from_labels(u, v)?;
    if ct.same_partition() {
        return Ok(1.0);
    }
    let hu = entropy(&ct.row_marginals, ct.n);
    let hv = entropy(&ct.col_marginals, ct.n);
    if hu == 0.0 || hv == 0.0 {
        return Ok(0.0);
    }
    let val = mutual_information(&ct) / (hu * hv).sqrt();
    Ok(val.clamp(0.0, 1.0))
}

fn choose2(x: u64) -> i128 {
    let x = x as i128;
    x * (x - 1) / 2
}

/// Adjusted Rand index via the contingency-table closed form, evaluated in
/// exact integer arithmetic with one final division.
///
/// Identical partitions give exactly 1.0; a degenerate denominator (both
/// partitions trivial) gives 0.0.
pub fn ari(u: &[usize], v: &[usize]) -> Result<f64> {
    let ct = ContingencyTable::from_labels(u, v)?;
    if ct.n < 2 {
        return Err(Error::Data("ari needs at least 2 points".into()));
    }
    if ct.same_partition() {
        return Ok(1.0);
    }
    let index: i128 = ct.counts.iter().flatten().map(|&x| choose2(x)).sum();
    let rows: i128 = ct.row_marginals.iter().map(|&x| choose2(x)).sum();
    let cols: i128 = ct.col_marginals.iter().map(|&x| choose2(x)).sum();
    let total = choose2(ct.n);
    // (index - rows*cols/total) / ((rows+cols)/2 - rows*cols/total), cleared
    // of fractions by multiplying through by 2*total.
    let num = 2 * (index * total - rows * cols);
    let den = total * (rows + cols) - 2 * rows * cols;
    if den == 0 {
        return Ok(0.0);
    }
    Ok(num as f64 / den as f64)
}

/// Everything the evaluation loop reports about one labeling of a dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterReport {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    /// Accuracy-maximizing relabeling as (cluster value, class value) pairs.
    pub mapping: Vec<(usize, usize)>,
    pub k_clusters: usize,
    pub k_classes: usize,
}

pub fn evaluate_clustering(pred: &[usize], truth: &[usize]) -> Result<ClusterReport> {
    let ct = ContingencyTable::from_labels(pred, truth)?;
    let (acc, mapping) = cluster_accuracy(pred, truth)?;
    Ok(ClusterReport {
        acc,
        nmi: nmi(pred, truth)?,
        ari: ari(pred, truth)?,
        mapping,
        k_clusters: ct.row_values.len(),
        k_classes: ct.col_values.len(),
    })
}
