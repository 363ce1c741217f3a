//! Fixed ensemble of random feature-space transformations and its diversity
//! measurement. The ensemble is generated once per run from a seed and never
//! changes afterwards; every transform is applied as a gradient-free constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::autodiff::Var;
use crate::checkpoint::Container;
use crate::error::{Error, Result};
use crate::metrics::nmi;
use crate::objectives::soft_assign;
use crate::tensor::Tensor;

/// Rows of a fresh Gaussian draw are considered dependent below this residual
/// norm and redrawn (probability ~0, but handled).
const RANK_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub enum Transform {
    /// Row-orthonormal matrix `[d_out, d]` scaled by sqrt(d / d_out), applied
    /// as `x A^T`.
    Projection(Tensor),
    /// Strictly positive per-coordinate scales `[d]`.
    Diagonal(Tensor),
}

impl Transform {
    pub fn input_dim(&self) -> usize {
        match self {
            Transform::Projection(a) => a.shape()[1],
            Transform::Diagonal(s) => s.len(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Transform::Projection(a) => a.shape()[0],
            Transform::Diagonal(s) => s.len(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    GaussianProjection,
    Diagonal,
    /// Built from explicit transforms rather than a generator.
    Custom,
}

#[derive(Clone, Debug)]
pub struct TransformEnsemble {
    transforms: Vec<Transform>,
    kind: EnsembleKind,
    d: usize,
    d_out: Option<usize>,
    seed: u64,
}

fn orthonormal_rows(d_out: usize, d: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d_out);
    while rows.len() < d_out {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        // Modified Gram-Schmidt against the rows accepted so far.
        for r in &rows {
            let dot: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            for (vi, ri) in v.iter_mut().zip(r) {
                *vi -= dot * ri;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < RANK_TOL {
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        rows.push(v);
    }
    rows.into_iter().flatten().collect()
}

impl TransformEnsemble {
    /// M matrices with orthonormal Gaussian rows, scaled by sqrt(d / d_out)
    /// so a random unit vector keeps unit expected squared length.
    pub fn gaussian_projections(m: usize, d: usize, d_out: usize, seed: u64) -> Result<Self> {
        if m == 0 || d == 0 || d_out == 0 {
            return Err(Error::Config("ensemble sizes must be positive".into()));
        }
        if d_out > d {
            return Err(Error::Config(format!(
                "projection dim {d_out} exceeds embedding dim {d}"
            )));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let gain = (d as f64 / d_out as f64).sqrt();
        let transforms = (0..m)
            .map(|_| {
                let rows = orthonormal_rows(d_out, d, &mut rng);
                let a = Tensor::new(vec![d_out, d], rows).expect("projection shape");
                Transform::Projection(a.scale(gain))
            })
            .collect();
        Ok(TransformEnsemble {
            transforms,
            kind: EnsembleKind::GaussianProjection,
            d,
            d_out: Some(d_out),
            seed,
        })
    }

    /// M diagonal transforms with scales drawn log-uniform in [1/4, 4].
    pub fn diagonal_transforms(m: usize, d: usize, seed: u64) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::Config("ensemble sizes must be positive".into()));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (lo, hi) = (0.25f64.ln(), 4.0f64.ln());
        let transforms = (0..m)
            .map(|_| {
                let scales: Vec<f64> =
                    (0..d).map(|_| rng.random_range(lo..hi).exp()).collect();
                Transform::Diagonal(Tensor::vector(&scales))
            })
            .collect();
        Ok(TransformEnsemble { transforms, kind: EnsembleKind::Diagonal, d, d_out: None, seed })
    }

    /// Wraps explicit transforms (used for hand-built ensembles such as the
    /// identity). All transforms must accept the same input dimension.
    pub fn from_transforms(transforms: Vec<Transform>, seed: u64) -> Result<Self> {
        if transforms.is_empty() {
            return Err(Error::Config("ensemble must contain at least one transform".into()));
        }
        let d = transforms[0].input_dim();
        if transforms.iter().any(|t| t.input_dim() != d) {
            return Err(Error::Config("transform input dimensions disagree".into()));
        }
        Ok(TransformEnsemble { transforms, kind: EnsembleKind::Custom, d, d_out: None, seed })
    }

    pub fn len(&self) -> usize {
        self.transforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transforms.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    /// Applies transform `m` to the rows of `x`.
    pub fn apply(&self, m: usize, x: &Tensor) -> Result<Tensor> {
        match &self.transforms[m] {
            Transform::Projection(a) => x.matmul(&a.transpose()?),
            Transform::Diagonal(s) => x.mul_row(s),
        }
    }

    /// Tape version of [`apply`]: the transform enters as a constant, so
    /// gradients flow into `x` only.
    pub fn apply_var(&self, m: usize, x: &Var) -> Result<Var> {
        let graph = x.graph();
        match &self.transforms[m] {
            Transform::Projection(a) => x.matmul(&graph.constant(a.transpose()?)),
            Transform::Diagonal(s) => x.mul_row(&graph.constant(s.clone())),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = serde_json::json!({
            "kind": self.kind,
            "m": self.transforms.len(),
            "d": self.d,
            "d_out": self.d_out,
            "seed": self.seed,
        });
        let blobs = self
            .transforms
            .iter()
            .enumerate()
            .map(|(i, t)| match t {
                Transform::Projection(a) => (format!("transform.{i}.projection"), a.clone()),
                Transform::Diagonal(s) => (format!("transform.{i}.diagonal"), s.clone()),
            })
            .collect();
        Container::new(meta, blobs).save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let container = Container::load(path)?;
        let meta = &container.meta;
        let bad = |what: &str| Error::Data(format!("{}: {what}", path.display()));
        let kind: EnsembleKind = serde_json::from_value(meta["kind"].clone())
            .map_err(|_| bad("bad ensemble kind"))?;
        let m = meta["m"].as_u64().ok_or_else(|| bad("missing m"))? as usize;
        let d = meta["d"].as_u64().ok_or_else(|| bad("missing d"))? as usize;
        let d_out = meta["d_out"].as_u64().map(|v| v as usize);
        let seed = meta["seed"].as_u64().ok_or_else(|| bad("missing seed"))?;
        let mut transforms = Vec::with_capacity(m);
        for i in 0..m {
            let t = if let Some(a) = container.blob(&format!("transform.{i}.projection")) {
                Transform::Projection(a.clone())
            } else if let Some(s) = container.blob(&format!("transform.{i}.diagonal")) {
                Transform::Diagonal(s.clone())
            } else {
                return Err(bad(&format!("missing transform {i}")));
            };
            transforms.push(t);
        }
        let ensemble = TransformEnsemble { transforms, kind, d, d_out, seed };
        if ensemble.transforms.iter().any(|t| t.input_dim() != d) {
            return Err(bad("transform dimensions disagree with header"));
        }
        Ok(ensemble)
    }
}

/// Per-transform hard cluster assignments: argmax of the softmax
/// probabilities computed in each transformed space.
pub fn ensemble_assignments(
    z: &Tensor,
    prototypes: &Tensor,
    ensemble: &TransformEnsemble,
    tau: f64,
) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::with_capacity(ensemble.len());
    for m in 0..ensemble.len() {
        let tz = ensemble.apply(m, z)?;
        let tc = ensemble.apply(m, prototypes)?;
        let probs = soft_assign(&tz, &tc, tau)?;
        out.push(probs.p.argmax_rows()?);
    }
    Ok(out)
}

/// Agreement statistics across the ensemble's clusterings at one epoch.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DiversityRecord {
    pub epoch: usize,
    pub mean_pairwise_nmi: f64,
    pub std_pairwise_nmi: f64,
    pub num_pairs: usize,
}

/// Mean and population standard deviation of NMI over all unordered pairs of
/// labelings.
pub fn diversity(epoch: usize, labelings: &[Vec<usize>]) -> Result<DiversityRecord> {
    let m = labelings.len();
    if m < 2 {
        return Err(Error::Config(format!("diversity needs at least 2 labelings, got {m}")));
    }
    let n = labelings[0].len();
    if labelings.iter().any(|l| l.len() != n) {
        return Err(Error::Shape("labelings have unequal lengths".into()));
    }
    let mut values = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            values.push(nmi(&labelings[i], &labelings[j])?);
        }
    }
    let num_pairs = values.len();
    let mean = values.iter().sum::<f64>() / num_pairs as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / num_pairs as f64;
    Ok(DiversityRecord {
        epoch,
        mean_pairwise_nmi: mean,
        std_pairwise_nmi: var.sqrt(),
        num_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testdir::TestDir;
    use rand::seq::SliceRandom;

    fn identity_transform(d: usize) -> Transform {
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            data[i * d + i] = 1.0;
        }
        Transform::Projection(Tensor::new(vec![d, d], data).unwrap())
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
        Tensor::new(vec![rows, cols], data).unwrap()
    }

    #[test]
    fn square_projection_is_orthogonal() {
        let e = TransformEnsemble::gaussian_projections(2, 12, 12, 9).unwrap();
        for t in e.transforms() {
            let Transform::Projection(a) = t else { panic!("expected projection") };
            let gram = a.matmul(&a.transpose().unwrap()).unwrap();
            for i in 0..12 {
                for j in 0..12 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((gram.at2(i, j) - want).abs() < 1e-9, "gram[{i}][{j}]");
                }
            }
        }
    }

    #[test]
    fn projection_rows_are_orthonormal_before_gain() {
        let e = TransformEnsemble::gaussian_projections(3, 20, 7, 4).unwrap();
        let gain = (20.0f64 / 7.0).sqrt();
        for t in e.transforms() {
            let Transform::Projection(a) = t else { panic!("expected projection") };
            let gram = a.matmul(&a.transpose().unwrap()).unwrap();
            for i in 0..7 {
                for j in 0..7 {
                    let want = if i == j { gain * gain } else { 0.0 };
                    assert!((gram.at2(i, j) - want).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn projection_of_zero_is_zero() {
        let e = TransformEnsemble::gaussian_projections(1, 8, 3, 1).unwrap();
        let out = e.apply(0, &Tensor::zeros(&[2, 8])).unwrap();
        assert_eq!(out.shape(), &[2, 3]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn random_projection_preserves_expected_squared_length() {
        // Johnson-Lindenstrauss sanity: for row-orthonormal A scaled by
        // sqrt(d/d_out), E[|Ax|^2] = 1 for random unit x.
        let (d, d_out, draws) = (256, 64, 10_000);
        let e = TransformEnsemble::gaussian_projections(1, d, d_out, 77).unwrap();
        let x = random_matrix(draws, d, 78).l2_normalize(1e-12).unwrap();
        let projected = e.apply(0, &x).unwrap();
        let mut mean = 0.0;
        for i in 0..draws {
            mean += projected.row(i).iter().map(|v| v * v).sum::<f64>();
        }
        mean /= draws as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean squared length {mean}");
    }

    #[test]
    fn diagonal_scales_are_log_uniform() {
        // Kolmogorov-Smirnov statistic of log-scales against U(ln 1/4, ln 4).
        let (m, d) = (40, 250);
        let e = TransformEnsemble::diagonal_transforms(m, d, 5).unwrap();
        let mut logs: Vec<f64> = Vec::with_capacity(m * d);
        for t in e.transforms() {
            let Transform::Diagonal(s) = t else { panic!("expected diagonal") };
            assert!(s.data().iter().all(|&v| (0.25..=4.0).contains(&v)));
            logs.extend(s.data().iter().map(|v| v.ln()));
        }
        logs.sort_by(f64::total_cmp);
        let (lo, hi) = (0.25f64.ln(), 4.0f64.ln());
        let n = logs.len() as f64;
        let mut ks = 0.0f64;
        for (i, v) in logs.iter().enumerate() {
            let cdf = (v - lo) / (hi - lo);
            let lo_emp = i as f64 / n;
            let hi_emp = (i + 1) as f64 / n;
            ks = ks.max((cdf - lo_emp).abs()).max((cdf - hi_emp).abs());
        }
        assert!(ks < 0.05, "KS statistic {ks}");
    }

    #[test]
    fn diagonal_applied_twice_equals_squared_scales() {
        let e = TransformEnsemble::diagonal_transforms(1, 6, 3).unwrap();
        let Transform::Diagonal(s) = &e.transforms()[0] else { panic!() };
        let squared: Vec<f64> = s.data().iter().map(|v| v * v).collect();
        let e2 = TransformEnsemble::from_transforms(
            vec![Transform::Diagonal(Tensor::vector(&squared))],
            0,
        )
        .unwrap();
        let x = random_matrix(4, 6, 11);
        let twice = e.apply(0, &e.apply(0, &x).unwrap()).unwrap();
        let once = e2.apply(0, &x).unwrap();
        for (a, b) in twice.data().iter().zip(once.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_scales_are_the_identity() {
        let e = TransformEnsemble::from_transforms(
            vec![Transform::Diagonal(Tensor::full(&[5], 1.0))],
            0,
        )
        .unwrap();
        let x = random_matrix(3, 5, 2);
        assert_eq!(e.apply(0, &x).unwrap().data(), x.data());
    }

    #[test]
    fn identity_transforms_reproduce_plain_assignments() {
        let z = random_matrix(10, 6, 21);
        let c = random_matrix(4, 6, 22);
        let e = TransformEnsemble::from_transforms(
            vec![identity_transform(6), identity_transform(6), identity_transform(6)],
            0,
        )
        .unwrap();
        let got = ensemble_assignments(&z, &c, &e, 0.1).unwrap();
        let plain = soft_assign(&z, &c, 0.1).unwrap().p.argmax_rows().unwrap();
        assert_eq!(got.len(), 3);
        for labels in &got {
            assert_eq!(labels, &plain);
        }
    }

    #[test]
    fn uniform_diagonal_scaling_keeps_assignments() {
        let z = random_matrix(12, 5, 31);
        let c = random_matrix(3, 5, 32);
        let plain = soft_assign(&z, &c, 0.1).unwrap().p.argmax_rows().unwrap();
        let e = TransformEnsemble::from_transforms(
            vec![Transform::Diagonal(Tensor::full(&[5], 2.5))],
            0,
        )
        .unwrap();
        let got = ensemble_assignments(&z, &c, &e, 0.1).unwrap();
        assert_eq!(got[0], plain);
    }

    #[test]
    fn rescaling_one_diagonal_keeps_assignments() {
        let z = random_matrix(15, 6, 41);
        let c = random_matrix(4, 6, 42);
        let e1 = TransformEnsemble::diagonal_transforms(3, 6, 43).unwrap();
        let mut transforms = e1.transforms().to_vec();
        if let Transform::Diagonal(s) = &transforms[1] {
            transforms[1] = Transform::Diagonal(s.scale(7.0));
        }
        let e2 = TransformEnsemble::from_transforms(transforms, 43).unwrap();
        assert_eq!(
            ensemble_assignments(&z, &c, &e1, 0.1).unwrap(),
            ensemble_assignments(&z, &c, &e2, 0.1).unwrap()
        );
    }

    #[test]
    fn distinct_projections_match_per_transform_oracle() {
        let z = random_matrix(9, 8, 51);
        let c = random_matrix(3, 8, 52);
        let e = TransformEnsemble::gaussian_projections(2, 8, 4, 53).unwrap();
        let got = ensemble_assignments(&z, &c, &e, 0.1).unwrap();
        for m in 0..2 {
            let tz = e.apply(m, &z).unwrap();
            let tc = e.apply(m, &c).unwrap();
            let labels = soft_assign(&tz, &tc, 0.1).unwrap().p.argmax_rows().unwrap();
            assert_eq!(got[m], labels);
        }
        assert_ne!(got[0], got[1], "two random projections should disagree somewhere");
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = TransformEnsemble::gaussian_projections(3, 10, 5, 7).unwrap();
        let b = TransformEnsemble::gaussian_projections(3, 10, 5, 7).unwrap();
        let c = TransformEnsemble::gaussian_projections(3, 10, 5, 8).unwrap();
        for (ta, tb) in a.transforms().iter().zip(b.transforms()) {
            let (Transform::Projection(ma), Transform::Projection(mb)) = (ta, tb) else {
                panic!()
            };
            assert_eq!(ma.data(), mb.data());
        }
        let (Transform::Projection(ma), Transform::Projection(mc)) =
            (&a.transforms()[0], &c.transforms()[0])
        else {
            panic!()
        };
        assert_ne!(ma.data(), mc.data());
    }

    #[test]
    fn save_load_round_trip_is_bit_identical() {
        let dir = TestDir::new("ensemble");
        let path = dir.path().join("ensemble.ccrl");
        let path2 = dir.path().join("ensemble2.ccrl");
        let e = TransformEnsemble::gaussian_projections(4, 12, 3, 99).unwrap();
        e.save(&path).unwrap();
        let loaded = TransformEnsemble::load(&path).unwrap();
        assert_eq!(loaded.kind(), e.kind());
        assert_eq!(loaded.seed(), e.seed());
        loaded.save(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
        // Using the ensemble must not change what a later save writes.
        let z = random_matrix(6, 12, 1);
        let c = random_matrix(3, 12, 2);
        let before = ensemble_assignments(&z, &c, &e, 0.1).unwrap();
        e.save(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
        assert_eq!(ensemble_assignments(&z, &c, &loaded, 0.1).unwrap(), before);

        let d = TransformEnsemble::diagonal_transforms(2, 5, 3).unwrap();
        d.save(&path).unwrap();
        let loaded = TransformEnsemble::load(&path).unwrap();
        assert_eq!(loaded.kind(), EnsembleKind::Diagonal);
        let (Transform::Diagonal(sa), Transform::Diagonal(sb)) =
            (&d.transforms()[1], &loaded.transforms()[1])
        else {
            panic!()
        };
        assert_eq!(sa.data(), sb.data());
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        assert!(TransformEnsemble::gaussian_projections(2, 4, 9, 0).is_err());
        assert!(TransformEnsemble::gaussian_projections(0, 4, 2, 0).is_err());
        assert!(TransformEnsemble::diagonal_transforms(0, 4, 0).is_err());
        assert!(TransformEnsemble::from_transforms(vec![], 0).is_err());
        assert!(TransformEnsemble::from_transforms(
            vec![identity_transform(3), identity_transform(4)],
            0
        )
        .is_err());
    }

    #[test]
    fn diversity_of_identical_labelings_is_one_with_zero_std() {
        let l = vec![0usize, 1, 0, 1, 2, 2];
        let rec = diversity(3, &[l.clone(), l.clone(), l]).unwrap();
        assert_eq!(rec.epoch, 3);
        assert_eq!(rec.num_pairs, 3);
        assert_eq!(rec.mean_pairwise_nmi, 1.0);
        assert_eq!(rec.std_pairwise_nmi, 0.0);
    }

    #[test]
    fn diversity_of_independent_partitions_is_zero() {
        let u = vec![0usize, 0, 1, 1];
        let v = vec![0usize, 1, 0, 1];
        let rec = diversity(0, &[u, v]).unwrap();
        assert_eq!(rec.num_pairs, 1);
        assert!(rec.mean_pairwise_nmi.abs() < 1e-12);
    }

    #[test]
    fn diversity_matches_hand_computed_nmi() {
        // Three labelings of 6 points; each pairwise NMI recomputed here from
        // the raw count formula with natural logs.
        let la = vec![0usize, 0, 0, 1, 1, 1];
        let lb = vec![0usize, 0, 1, 1, 2, 2];
        let lc = vec![0usize, 1, 0, 1, 0, 1];
        let direct = |u: &[usize], v: &[usize]| -> f64 {
            let n = u.len() as f64;
            let ku = u.iter().max().unwrap() + 1;
            let kv = v.iter().max().unwrap() + 1;
            let mut joint = vec![vec![0.0f64; kv]; ku];
            for (&a, &b) in u.iter().zip(v) {
                joint[a][b] += 1.0;
            }
            let ru: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
            let rv: Vec<f64> =
                (0..kv).map(|j| joint.iter().map(|r| r[j]).sum()).collect();
            let mut mi = 0.0;
            for i in 0..ku {
                for j in 0..kv {
                    if joint[i][j] > 0.0 {
                        mi += joint[i][j] / n * ((n * joint[i][j]) / (ru[i] * rv[j])).ln();
                    }
                }
            }
            let hu: f64 = ru.iter().map(|&c| -(c / n) * (c / n).ln()).sum();
            let hv: f64 = rv.iter().map(|&c| -(c / n) * (c / n).ln()).sum();
            mi / (hu * hv).sqrt()
        };
        let vals = [direct(&la, &lb), direct(&la, &lc), direct(&lb, &lc)];
        let mean = vals.iter().sum::<f64>() / 3.0;
        let std =
            (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0).sqrt();
        let rec = diversity(7, &[la, lb, lc]).unwrap();
        assert!((rec.mean_pairwise_nmi - mean).abs() < 1e-9);
        assert!((rec.std_pairwise_nmi - std).abs() < 1e-9);
    }

    #[test]
    fn diversity_mean_stays_in_unit_interval() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        for _ in 0..20 {
            let n = rng.random_range(4..40);
            let m = rng.random_range(2..6);
            let labelings: Vec<Vec<usize>> = (0..m)
                .map(|_| {
                    let k = rng.random_range(2..5);
                    let mut l: Vec<usize> = (0..n).map(|i| i % k).collect();
                    l.shuffle(&mut rng);
                    l
                })
                .collect();
            let rec = diversity(0, &labelings).unwrap();
            assert!((0.0..=1.0).contains(&rec.mean_pairwise_nmi));
            assert!(rec.std_pairwise_nmi >= 0.0);
            assert_eq!(rec.num_pairs, m * (m - 1) / 2);
        }
    }

    #[test]
    fn diversity_rejects_degenerate_input() {
        assert!(diversity(0, &[vec![0, 1]]).is_err());
        assert!(diversity(0, &[vec![0, 1], vec![0, 1, 0]]).is_err());
    }
}
