//! Lloyd's k-means with k-means++ seeding, used to cluster target-network
//! projections when the run has no clustering head to read codes from.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAX_ITERS: usize = 300;
const REL_TOL: f64 = 1e-6;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: D²-weighted draws after a uniform first pick.
fn seed_centers(features: &Tensor, k: usize, rng: &mut ChaCha20Rng) -> Vec<Vec<f64>> {
    let (n, _) = features.dims2().expect("seed_centers needs rank 2");
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    centers.push(features.row(first).to_vec());
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(features.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // All remaining points coincide with chosen centers.
            rng.random_range(0..n)
        };
        centers.push(features.row(idx).to_vec());
        for i in 0..n {
            d2[i] = d2[i].min(sq_dist(features.row(i), centers.last().unwrap()));
        }
    }
    centers
}

fn assign(features: &Tensor, centers: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let (n, _) = features.dims2().expect("assign needs rank 2");
    let mut labels = vec![0usize; n];
    let mut inertia = 0.0;
    for i in 0..n {
        let row = features.row(i);
        let mut best = 0usize;
        let mut best_d = sq_dist(row, &centers[0]);
        for (c, center) in centers.iter().enumerate().skip(1) {
            let d = sq_dist(row, center);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best;
        inertia += best_d;
    }
    (labels, inertia)
}

fn lloyd(features: &Tensor, k: usize, rng: &mut ChaCha20Rng) -> (Vec<usize>, f64) {
    let (n, dim) = features.dims2().expect("lloyd needs rank 2");
    let mut centers = seed_centers(features, k, rng);
    let (mut labels, mut inertia) = assign(features, &centers);
    for _ in 0..MAX_ITERS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, &x) in sums[labels[i]].iter_mut().zip(features.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                continue; // empty cluster keeps its previous center
            }
            for (ctr, s) in centers[c].iter_mut().zip(&sums[c]) {
                *ctr = s / counts[c] as f64;
            }
        }
        let (new_labels, new_inertia) = assign(features, &centers);
        let unchanged = new_labels == labels;
        let rel_drop = if inertia > 0.0 {
            (inertia - new_inertia) / inertia
        } else {
            0.0
        };
        labels = new_labels;
        inertia = new_inertia;
        if unchanged || rel_drop.abs() < REL_TOL {
            break;
        }
    }
    (labels, inertia)
}

/// Clusters the rows of `features` into `k` groups, best of `restarts` runs
/// by within-cluster sum of squares.
pub fn kmeans(features: &Tensor, k: usize, restarts: usize, seed: u64) -> Result<Vec<usize>> {
    let (n, _) = features.dims2()?;
    if k == 0 {
        return Err(Error::Config("kmeans needs k >= 1".into()));
    }
    if n < k {
        return Err(Error::Data(format!("kmeans with k={k} needs at least {k} points, got {n}")));
    }
    if !features.is_finite() {
        return Err(Error::Numeric("kmeans input contains non-finite values".into()));
    }
    let restarts = restarts.max(1);
    let mut master = ChaCha20Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts {
        let mut rng = ChaCha20Rng::seed_from_u64(master.random());
        let (labels, inertia) = lloyd(features, k, &mut rng);
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((labels, inertia));
        }
    }
    Ok(best.unwrap().0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::cluster_accuracy;

    /// Minimum-inertia partition by brute force over all k^n assignments.
    fn exhaustive_best_partition(features: &Tensor, k: usize) -> Vec<usize> {
        let (n, dim) = features.dims2().unwrap();
        let mut best_labels = vec![0usize; n];
        let mut best_inertia = f64::INFINITY;
        let mut labels = vec![0usize; n];
        loop {
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for i in 0..n {
                counts[labels[i]] += 1;
                for (s, &x) in sums[labels[i]].iter_mut().zip(features.row(i)) {
                    *s += x;
                }
            }
            let mut inertia = 0.0;
            for i in 0..n {
                let c = labels[i];
                for (j, &x) in features.row(i).iter().enumerate() {
                    let ctr = sums[c][j] / counts[c] as f64;
                    inertia += (x - ctr) * (x - ctr);
                }
            }
            if inertia < best_inertia {
                best_inertia = inertia;
                best_labels = labels.clone();
            }
            // Next assignment in base-k counting order.
            let mut pos = 0;
            loop {
                if pos == n {
                    return best_labels;
                }
                labels[pos] += 1;
                if labels[pos] < k {
                    break;
                }
                labels[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn recovers_well_separated_singletons() {
        let features = Tensor::from_rows(&[
            vec![0.0, 0.0],
            vec![100.0, 0.0],
            vec![0.0, 100.0],
        ])
        .unwrap();
        let labels = kmeans(&features, 3, 5, 1).unwrap();
        let (acc, _) = cluster_accuracy(&labels, &[0, 1, 2]).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn k_equal_one_labels_everything_zero() {
        let features = Tensor::from_rows(&[vec![1.0], vec![2.0], vec![5.0]]).unwrap();
        assert_eq!(kmeans(&features, 1, 3, 0).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn one_dimensional_pairs_match_exhaustive_oracle() {
        let features = Tensor::from_rows(&[vec![0.0], vec![0.1], vec![0.9], vec![1.0]]).unwrap();
        let labels = kmeans(&features, 2, 10, 3).unwrap();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
        let oracle = exhaustive_best_partition(&features, 2);
        assert_eq!(crate::metrics::nmi(&labels, &oracle).unwrap(), 1.0);
    }

    #[test]
    fn matches_exhaustive_oracle_on_small_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for trial in 0..10 {
            let n = rng.random_range(4..=8usize);
            let k = rng.random_range(2..=3usize).min(n);
            let data: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let features = Tensor::from_rows(&data).unwrap();
            let labels = kmeans(&features, k, 20, trial).unwrap();
            let oracle = exhaustive_best_partition(&features, k);
            // Compare inertia of both partitions; k-means with many restarts
            // should find the global optimum on instances this small.
            let inertia = |ls: &[usize]| -> f64 {
                let mut sums = vec![vec![0.0; 2]; k];
                let mut counts = vec![0usize; k];
                for i in 0..n {
                    counts[ls[i]] += 1;
                    for (s, &x) in sums[ls[i]].iter_mut().zip(features.row(i)) {
                        *s += x;
                    }
                }
                let mut total = 0.0;
                for i in 0..n {
                    for (j, &x) in features.row(i).iter().enumerate() {
                        if counts[ls[i]] > 0 {
                            let c = sums[ls[i]][j] / counts[ls[i]] as f64;
                            total += (x - c) * (x - c);
                        }
                    }
                }
                total
            };
            assert!(
                inertia(&labels) <= inertia(&oracle) + 1e-9,
                "trial {trial}: kmeans inertia {} vs oracle {}",
                inertia(&labels),
                inertia(&oracle)
            );
        }
    }

    #[test]
    fn rejects_fewer_points_than_clusters() {
        let features = Tensor::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(kmeans(&features, 3, 1, 0).is_err());
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let features = Tensor::from_rows(&[
            vec![0.0, 0.1],
            vec![0.2, 0.0],
            vec![5.0, 5.1],
            vec![5.2, 4.9],
            vec![-3.0, 2.0],
        ])
        .unwrap();
        let a = kmeans(&features, 2, 4, 9).unwrap();
        let b = kmeans(&features, 2, 4, 9).unwrap();
        assert_eq!(a, b);
    }
}
