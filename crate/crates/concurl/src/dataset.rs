//! Labeled desk-scale datasets: a synthetic Gaussian-blob generator, CSV and
//! IDX ingestion, batch sampling, and a JSON manifest tying files together.
//! Ground-truth labels ride along for evaluation only; training never reads
//! them.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DataKind {
    Vector { dim: usize },
    Image { h: usize, w: usize, c: usize },
}

impl DataKind {
    pub fn feature_dim(&self) -> usize {
        match self {
            DataKind::Vector { dim } => *dim,
            DataKind::Image { h, w, c } => h * w * c,
        }
    }
}

/// An immutable labeled dataset. Every feature tensor shares one shape:
/// `[dim]` for vectors, `[h, w, c]` for images.
#[derive(Clone, Debug)]
pub struct Dataset {
    features: Vec<Tensor>,
    labels: Vec<usize>,
    num_classes: usize,
    kind: DataKind,
}

impl Dataset {
    pub fn new(features: Vec<Tensor>, labels: Vec<usize>, num_classes: usize, kind: DataKind) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} feature tensors but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if features.is_empty() {
            return Err(Error::Data("dataset is empty".into()));
        }
        if num_classes == 0 {
            return Err(Error::Data("dataset needs at least one class".into()));
        }
        let expected_shape: Vec<usize> = match &kind {
            DataKind::Vector { dim } => vec![*dim],
            DataKind::Image { h, w, c } => vec![*h, *w, *c],
        };
        for f in &features {
            if f.shape() != expected_shape.as_slice() {
                return Err(Error::Data(format!(
                    "feature shape {:?} does not match dataset kind shape {:?}",
                    f.shape(),
                    expected_shape
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Data(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        Ok(Dataset { features, labels, num_classes, kind })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn kind(&self) -> &DataKind {
        &self.kind
    }

    pub fn feature_dim(&self) -> usize {
        self.kind.feature_dim()
    }

    pub fn feature(&self, i: usize) -> &Tensor {
        &self.features[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Stacks the selected items into one batch tensor: `[b, dim]` for
    /// vectors, `[b, h, w, c]` for images.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor> {
        if indices.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(self.features[0].shape());
        let mut data = Vec::with_capacity(shape.iter().product());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Data(format!("batch index {i} out of range")));
            }
            data.extend_from_slice(self.features[i].data());
        }
        Tensor::new(shape, data)
    }

    pub fn labels_for(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }

    /// True when class counts differ by at most one, the balance the
    /// swapped-prediction codes assume.
    pub fn is_balanced(&self) -> bool {
        let mut counts = vec![0usize; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        let lo = counts.iter().min().copied().unwrap_or(0);
        let hi = counts.iter().max().copied().unwrap_or(0);
        hi - lo <= 1
    }
}

const SEPARATION_ATTEMPTS: usize = 10_000;

/// Isotropic Gaussian clusters with centers drawn uniformly in
/// `[-center_scale, center_scale]^dim`, exactly `points_per_cluster` points
/// per class. Center sets whose minimum pairwise distance falls below
/// `4 * noise_sigma` are redrawn.
pub fn generate_blobs(
    num_clusters: usize,
    dim: usize,
    points_per_cluster: usize,
    center_scale: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if num_clusters == 0 || dim == 0 || points_per_cluster == 0 {
        return Err(Error::Config("generate_blobs needs positive counts".into()));
    }
    if noise_sigma < 0.0 {
        return Err(Error::Config(format!("noise_sigma must be >= 0, got {noise_sigma}")));
    }
    if center_scale < 0.0 || !center_scale.is_finite() || !noise_sigma.is_finite() {
        return Err(Error::Config("center_scale must be finite and >= 0".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let min_sep = 4.0 * noise_sigma;
    let mut centers: Vec<Vec<f64>> = Vec::new();
    'attempt: for attempt in 0..=SEPARATION_ATTEMPTS {
        if attempt == SEPARATION_ATTEMPTS {
            return Err(Error::Data(format!(
                "could not draw {num_clusters} centers separated by {min_sep} in \
                 [-{center_scale}, {center_scale}]^{dim} after {SEPARATION_ATTEMPTS} attempts"
            )));
        }
        centers = (0..num_clusters)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        if center_scale == 0.0 {
                            0.0
                        } else {
                            rng.random_range(-center_scale..=center_scale)
                        }
                    })
                    .collect()
            })
            .collect();
        for a in 0..num_clusters {
            for b in (a + 1)..num_clusters {
                let d2: f64 = centers[a]
                    .iter()
                    .zip(&centers[b])
                    .map(|(&x, &y)| (x - y) * (x - y))
                    .sum();
                if d2.sqrt() < min_sep {
                    continue 'attempt;
                }
            }
        }
        break;
    }
    let normal = StandardNormal;
    let mut features = Vec::with_capacity(num_clusters * points_per_cluster);
    let mut labels = Vec::with_capacity(num_clusters * points_per_cluster);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..points_per_cluster {
            let point: Vec<f64> = center
                .iter()
                .map(|&m| {
                    let z: f64 = normal.sample(&mut rng);
                    m + noise_sigma * z
                })
                .collect();
            features.push(Tensor::vector(&point));
            labels.push(c);
        }
    }
    Dataset::new(features, labels, num_clusters, DataKind::Vector { dim })
}

/// Sorts label keys numerically when every key parses as a number, otherwise
/// lexicographically, and maps them onto `0..K`.
fn remap_labels(raw: &[String]) -> (Vec<usize>, usize) {
    let mut keys: Vec<&String> = {
        let set: std::collections::BTreeSet<&String> = raw.iter().collect();
        set.into_iter().collect()
    };
    let numeric: Option<BTreeMap<&String, f64>> = keys
        .iter()
        .map(|k| k.parse::<f64>().ok().map(|v| (*k, v)))
        .collect();
    if let Some(values) = numeric {
        keys.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    }
    let index: BTreeMap<&String, usize> =
        keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let labels = raw.iter().map(|k| index[k]).collect();
    (labels, keys.len())
}

/// Loads a headerless rectangular CSV; every column except `label_column`
/// must be numeric and becomes a feature, the label column may hold arbitrary
/// strings and is remapped onto `[0, K)`.
pub fn load_csv(path: &Path, label_column: usize) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut width = None;
    for (lineno, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let w = record.len();
        match width {
            None => {
                if label_column >= w {
                    return Err(Error::Data(format!(
                        "{}: label column {label_column} out of range for {w}-column rows",
                        path.display()
                    )));
                }
                width = Some(w);
            }
            Some(prev) if prev != w => {
                return Err(Error::Data(format!(
                    "{}: row {} has {} fields, expected {}",
                    path.display(),
                    lineno + 1,
                    w,
                    prev
                )));
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(w - 1);
        for (col, field) in record.iter().enumerate() {
            if col == label_column {
                raw_labels.push(field.to_string());
            } else {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Data(format!(
                        "{}: row {} column {col}: '{field}' is not numeric",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                row.push(v);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no rows", path.display())));
    }
    let dim = rows[0].len();
    if dim == 0 {
        return Err(Error::Data(format!("{}: no feature columns", path.display())));
    }
    let (labels, num_classes) = remap_labels(&raw_labels);
    let features = rows.iter().map(|r| Tensor::vector(r)).collect();
    Dataset::new(features, labels, num_classes, DataKind::Vector { dim })
}

/// Writes a vector dataset as headerless CSV with the label as the final
/// column, and returns that label column index. Floats print in shortest
/// round-trip form, so `load_csv` reads back bit-identical features.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<usize> {
    let dim = match dataset.kind() {
        DataKind::Vector { dim } => *dim,
        other => {
            return Err(Error::Data(format!(
                "save_csv supports vector datasets, got {other:?}"
            )))
        }
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..dataset.len() {
        let mut fields: Vec<String> =
            dataset.feature(i).data().iter().map(|v| format!("{v}")).collect();
        fields.push(format!("{}", dataset.labels()[i]));
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(dim)
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Data(format!("truncated IDX header reading {what}")));
    }
    Ok(u32::from_be_bytes([bytes[offset], bytes[offset + 1], bytes[offset + 2], bytes[offset + 3]]))
}

/// Loads grayscale images and labels in the IDX binary format (big-endian
/// headers, magic 0x00000803 for images and 0x00000801 for labels). Pixels
/// scale to `[0, 1]`. `limit` caps the item count.
pub fn load_idx_images(
    images_path: &Path,
    labels_path: &Path,
    limit: Option<usize>,
) -> Result<Dataset> {
    let img_bytes = std::fs::read(images_path)?;
    let lbl_bytes = std::fs::read(labels_path)?;
    let img_magic = read_be_u32(&img_bytes, 0, "images magic")?;
    if img_magic != IDX_IMAGES_MAGIC {
        return Err(Error::Data(format!(
            "{}: bad magic {img_magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}",
            images_path.display()
        )));
    }
    let count = read_be_u32(&img_bytes, 4, "image count")? as usize;
    let h = read_be_u32(&img_bytes, 8, "image rows")? as usize;
    let w = read_be_u32(&img_bytes, 12, "image cols")? as usize;
    let expected = 16 + count * h * w;
    if img_bytes.len() != expected {
        return Err(Error::Data(format!(
            "{}: payload is {} bytes, header implies {}",
            images_path.display(),
            img_bytes.len(),
            expected
        )));
    }
    let lbl_magic = read_be_u32(&lbl_bytes, 0, "labels magic")?;
    if lbl_magic != IDX_LABELS_MAGIC {
        return Err(Error::Data(format!(
            "{}: bad magic {lbl_magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}",
            labels_path.display()
        )));
    }
    let lbl_count = read_be_u32(&lbl_bytes, 4, "label count")? as usize;
    if lbl_bytes.len() != 8 + lbl_count {
        return Err(Error::Data(format!(
            "{}: payload is {} bytes, header implies {}",
            labels_path.display(),
            lbl_bytes.len(),
            8 + lbl_count
        )));
    }
    if count != lbl_count {
        return Err(Error::Data(format!(
            "{count} images but {lbl_count} labels"
        )));
    }
    let take = limit.map_or(count, |l| l.min(count));
    if take == 0 {
        return Err(Error::Data("IDX load selects zero items".into()));
    }
    let mut features = Vec::with_capacity(take);
    let mut raw_labels = Vec::with_capacity(take);
    for i in 0..take {
        let start = 16 + i * h * w;
        let pixels: Vec<f64> =
            img_bytes[start..start + h * w].iter().map(|&b| b as f64 / 255.0).collect();
        features.push(Tensor::new(vec![h, w, 1], pixels)?);
        raw_labels.push(lbl_bytes[8 + i].to_string());
    }
    let (labels, num_classes) = remap_labels(&raw_labels);
    Dataset::new(features, labels, num_classes, DataKind::Image { h, w, c: 1 })
}

/// Deterministic epoch batching; with `shuffle` each epoch visits a fresh
/// permutation of the indices derived from (seed, epoch).
#[derive(Clone, Debug)]
pub struct BatchSampler {
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl BatchSampler {
    pub fn epoch_batches(&self, n: usize, epoch: usize) -> Vec<Vec<usize>> {
        let mut indices: Vec<usize> = (0..n).collect();
        if self.shuffle {
            let epoch_seed =
                self.seed.wrapping_add((epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut rng = ChaCha20Rng::seed_from_u64(epoch_seed);
            indices.shuffle(&mut rng);
        }
        indices.chunks(self.batch_size.max(1)).map(|c| c.to_vec()).collect()
    }
}

/// Pointers to dataset files, stored next to generated data so runs can name
/// a dataset with one path.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub paths: ManifestPaths,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ManifestPaths {
    Csv { csv: PathBuf, label_column: usize },
    Idx { images: PathBuf, labels: PathBuf, #[serde(skip_serializing_if = "Option::is_none")] limit: Option<usize> },
}

impl Manifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Data(format!("manifest serialization: {e}")))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }

    /// Loads the dataset the manifest points at; relative paths resolve
    /// against the manifest's directory.
    pub fn load_dataset(&self, manifest_path: &Path) -> Result<Dataset> {
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &PathBuf| -> PathBuf {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };
        let dataset = match &self.paths {
            ManifestPaths::Csv { csv, label_column } => load_csv(&resolve(csv), *label_column)?,
            ManifestPaths::Idx { images, labels, limit } => {
                load_idx_images(&resolve(images), &resolve(labels), *limit)?
            }
        };
        if dataset.num_classes() != self.k {
            return Err(Error::Data(format!(
                "manifest claims K={} but data has {} classes",
                self.k,
                dataset.num_classes()
            )));
        }
        let kind_ok = matches!(
            (dataset.kind(), self.kind.as_str()),
            (DataKind::Vector { .. }, "vector") | (DataKind::Image { .. }, "image")
        );
        if !kind_ok {
            return Err(Error::Data(format!(
                "manifest kind '{}' does not match loaded data {:?}",
                self.kind,
                dataset.kind()
            )));
        }
        Ok(dataset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmeans::kmeans;
    use crate::metrics::cluster_accuracy;
    use crate::testdir::TestDir;

    #[test]
    fn zero_noise_blobs_sit_on_centers_and_cluster_perfectly() {
        let ds = generate_blobs(3, 4, 5, 2.0, 0.0, 11).unwrap();
        assert_eq!(ds.len(), 15);
        assert_eq!(ds.num_classes(), 3);
        assert!(ds.is_balanced());
        // All points of a class coincide.
        for c in 0..3 {
            let members: Vec<usize> =
                (0..ds.len()).filter(|&i| ds.labels()[i] == c).collect();
            for &m in &members[1..] {
                assert_eq!(ds.feature(m).data(), ds.feature(members[0]).data());
            }
        }
        let all: Vec<usize> = (0..ds.len()).collect();
        let features = ds.batch(&all).unwrap();
        let labels = kmeans(&features, 3, 5, 0).unwrap();
        let (acc, _) = cluster_accuracy(&labels, ds.labels()).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn fixed_seed_reproduces_blobs_bit_identically() {
        let a = generate_blobs(4, 16, 8, 5.0, 0.5, 42).unwrap();
        let b = generate_blobs(4, 16, 8, 5.0, 0.5, 42).unwrap();
        for i in 0..a.len() {
            assert_eq!(a.feature(i).data(), b.feature(i).data());
        }
        assert_eq!(a.labels(), b.labels());
    }

    #[test]
    fn blob_centers_respect_separation() {
        let ds = generate_blobs(4, 16, 32, 5.0, 0.5, 7).unwrap();
        // Class means approximate the centers; with sigma=0.5 and 4-sigma
        // separation enforced, the means must be at least ~2 sigma apart.
        let dim = 16;
        let mut means = vec![vec![0.0; dim]; 4];
        let mut counts = vec![0usize; 4];
        for i in 0..ds.len() {
            let c = ds.labels()[i];
            counts[c] += 1;
            for (m, &x) in means[c].iter_mut().zip(ds.feature(i).data()) {
                *m += x;
            }
        }
        for c in 0..4 {
            for m in means[c].iter_mut() {
                *m /= counts[c] as f64;
            }
        }
        for a in 0..4 {
            for b in (a + 1)..4 {
                let d: f64 = means[a]
                    .iter()
                    .zip(&means[b])
                    .map(|(&x, &y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                assert!(d > 1.0, "class means {a} and {b} only {d} apart");
            }
        }
    }

    #[test]
    fn blob_parameter_validation() {
        assert!(generate_blobs(3, 4, 5, 2.0, -0.1, 0).is_err());
        assert!(generate_blobs(0, 4, 5, 2.0, 0.1, 0).is_err());
        // Separation impossible: many clusters, tiny box, huge sigma.
        assert!(generate_blobs(16, 1, 1, 0.001, 10.0, 0).is_err());
    }

    #[test]
    fn csv_with_string_labels() {
        let dir = TestDir::new("csv_string_labels");
        let path = dir.path().join("toy.csv");
        std::fs::write(&path, "1,2,a\n3,4,b\n").unwrap();
        let ds = load_csv(&path, 2).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.num_classes(), 2);
        assert_eq!(ds.labels(), &[0, 1]);
        assert_eq!(ds.feature(0).data(), &[1.0, 2.0]);
        assert_eq!(ds.feature(1).data(), &[3.0, 4.0]);
    }

    #[test]
    fn csv_rejects_empty_ragged_and_non_numeric() {
        let dir = TestDir::new("csv_bad_inputs");
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        assert!(load_csv(&empty, 0).is_err());

        let ragged = dir.path().join("ragged.csv");
        std::fs::write(&ragged, "1,2,0\n3,4\n").unwrap();
        assert!(load_csv(&ragged, 2).is_err());

        let alpha = dir.path().join("alpha.csv");
        std::fs::write(&alpha, "1,x,0\n").unwrap();
        assert!(load_csv(&alpha, 2).is_err());

        let missing = dir.path().join("missing.csv");
        std::fs::write(&missing, "1,2,0\n").unwrap();
        assert!(load_csv(&missing, 5).is_err());
    }

    #[test]
    fn csv_round_trips_bit_exactly() {
        let dir = TestDir::new("csv_round_trip");
        let ds = generate_blobs(3, 7, 50, 3.0, 0.8, 123).unwrap();
        let path = dir.path().join("blobs.csv");
        let label_col = save_csv(&ds, &path).unwrap();
        let back = load_csv(&path, label_col).unwrap();
        assert_eq!(back.len(), ds.len());
        assert_eq!(back.num_classes(), ds.num_classes());
        assert_eq!(back.labels(), ds.labels());
        for i in 0..ds.len() {
            assert_eq!(back.feature(i).data(), ds.feature(i).data(), "row {i}");
        }
    }

    fn write_idx_pair(dir: &TestDir, count: usize, h: usize, w: usize) -> (PathBuf, PathBuf, Vec<u8>) {
        let mut img = Vec::new();
        img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        img.extend_from_slice(&(count as u32).to_be_bytes());
        img.extend_from_slice(&(h as u32).to_be_bytes());
        img.extend_from_slice(&(w as u32).to_be_bytes());
        let pixels: Vec<u8> = (0..count * h * w).map(|i| (i * 37 % 256) as u8).collect();
        img.extend_from_slice(&pixels);
        let mut lbl = Vec::new();
        lbl.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        lbl.extend_from_slice(&(count as u32).to_be_bytes());
        lbl.extend((0..count).map(|i| (i % 3) as u8));
        let img_path = dir.path().join("images.idx");
        let lbl_path = dir.path().join("labels.idx");
        std::fs::write(&img_path, &img).unwrap();
        std::fs::write(&lbl_path, &lbl).unwrap();
        (img_path, lbl_path, pixels)
    }

    #[test]
    fn idx_limit_caps_item_count() {
        let dir = TestDir::new("idx_limit");
        let (img, lbl, _) = write_idx_pair(&dir, 10, 4, 4);
        let ds = load_idx_images(&img, &lbl, Some(4)).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.kind(), &DataKind::Image { h: 4, w: 4, c: 1 });
    }

    #[test]
    fn idx_first_image_matches_byte_reader() {
        let dir = TestDir::new("idx_bytes");
        let (img, lbl, pixels) = write_idx_pair(&dir, 3, 5, 7);
        let ds = load_idx_images(&img, &lbl, None).unwrap();
        let byte_sum: u64 = pixels[..35].iter().map(|&b| b as u64).sum();
        let tensor_sum: f64 = ds.feature(0).data().iter().sum::<f64>() * 255.0;
        assert!((tensor_sum - byte_sum as f64).abs() < 1e-9);
    }

    #[test]
    fn idx_rejects_bad_magic_truncation_and_count_mismatch() {
        let dir = TestDir::new("idx_bad");
        let (img, lbl, _) = write_idx_pair(&dir, 3, 2, 2);

        let mut bytes = std::fs::read(&img).unwrap();
        bytes[3] = 0x99;
        let bad_magic = dir.path().join("bad_magic.idx");
        std::fs::write(&bad_magic, &bytes).unwrap();
        assert!(load_idx_images(&bad_magic, &lbl, None).is_err());

        let truncated = dir.path().join("truncated.idx");
        let orig = std::fs::read(&img).unwrap();
        std::fs::write(&truncated, &orig[..orig.len() - 2]).unwrap();
        assert!(load_idx_images(&truncated, &lbl, None).is_err());

        let mut lbl_bytes = std::fs::read(&lbl).unwrap();
        lbl_bytes[7] = 9; // claims 9 labels
        let mismatched = dir.path().join("mismatch.idx");
        std::fs::write(&mismatched, &lbl_bytes).unwrap();
        assert!(load_idx_images(&img, &mismatched, None).is_err());
    }

    #[test]
    fn sampler_epochs_are_permutations_and_deterministic() {
        let sampler = BatchSampler { batch_size: 4, seed: 9, shuffle: true };
        let batches = sampler.epoch_batches(10, 1);
        assert_eq!(batches.len(), 3);
        assert_eq!(batches[2].len(), 2);
        let mut seen: Vec<usize> = batches.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        assert_eq!(sampler.epoch_batches(10, 1), batches);
        assert_ne!(
            sampler.epoch_batches(10, 2).concat(),
            batches.concat(),
            "different epochs should reshuffle"
        );
        let plain = BatchSampler { batch_size: 3, seed: 0, shuffle: false };
        assert_eq!(plain.epoch_batches(5, 7), vec![vec![0, 1, 2], vec![3, 4]]);
    }

    #[test]
    fn manifest_round_trip_loads_same_dataset() {
        let dir = TestDir::new("manifest");
        let ds = generate_blobs(2, 3, 4, 2.0, 0.1, 5).unwrap();
        let csv_path = dir.path().join("data.csv");
        let label_col = save_csv(&ds, &csv_path).unwrap();
        let manifest = Manifest {
            kind: "vector".into(),
            k: 2,
            paths: ManifestPaths::Csv { csv: PathBuf::from("data.csv"), label_column: label_col },
            seed: 5,
        };
        let mpath = dir.path().join("manifest.json");
        manifest.save(&mpath).unwrap();
        let loaded = Manifest::load(&mpath).unwrap();
        assert_eq!(loaded.k, 2);
        let ds2 = loaded.load_dataset(&mpath).unwrap();
        assert_eq!(ds2.len(), ds.len());
        assert_eq!(ds2.labels(), ds.labels());

        let wrong_k = Manifest { k: 3, ..manifest };
        wrong_k.save(&mpath).unwrap();
        assert!(Manifest::load(&mpath).unwrap().load_dataset(&mpath).is_err());
    }
}
