//! Training loop, periodic evaluation, and artifact emission. A run writes
//! everything under `output_dir`: a config echo, per-step loss CSV, per-eval
//! clustering and diversity CSVs, the final checkpoint, and a report JSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::augment::{make_views, ChannelStats};
use crate::autodiff::Graph;
use crate::config::{Mode, TrainConfig};
use crate::dataset::{BatchSampler, DataKind, Dataset};
use crate::ensemble::{self, DiversityRecord, TransformEnsemble};
use crate::error::{Error, Result};
use crate::kmeans::kmeans;
use crate::metrics::{evaluate_clustering, ClusterReport};
use crate::model::{Model, NetworkSpec};
use crate::objectives::{hard_assign, sinkhorn_codes, total_loss, LossBreakdown, SinkhornConfig};
use crate::optim::Adam;
use crate::tensor::Tensor;

/// Largest evaluation batch; bigger datasets get per-batch codes.
pub const EVAL_BATCH: usize = 1024;

/// Steps the swapped loss must sit within [`LN_K_TOL`] of ln K before the
/// collapse warning fires.
pub const LN_K_PLATEAU_STEPS: usize = 50;
pub const LN_K_TOL: f64 = 1e-3;

const STREAM_SAMPLER: u64 = 1;
const STREAM_ENSEMBLE: u64 = 2;
const STREAM_EVAL: u64 = 3;
const STREAM_AUGMENT: u64 = 1 << 62;

/// splitmix64 finalizer; distinct (seed, stream) pairs give distinct values.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// File paths a completed run leaves behind, plus its final report.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub output_dir: PathBuf,
    pub metrics_csv: PathBuf,
    pub eval_csv: PathBuf,
    /// Present when the ensemble has at least two members.
    pub diversity_csv: Option<PathBuf>,
    pub checkpoint: PathBuf,
    pub ensemble_file: PathBuf,
    pub report_json: PathBuf,
    pub final_report: ClusterReport,
}

/// Watches the swapped loss for the uniform-assignment failure mode, where
/// it sits at ln K because every row of p is flat.
struct PlateauMonitor {
    ln_k: f64,
    run: usize,
    fired: bool,
}

impl PlateauMonitor {
    fn new(k: usize) -> Self {
        PlateauMonitor { ln_k: (k as f64).ln(), run: 0, fired: false }
    }

    /// Returns true exactly once, on the step the plateau is first confirmed.
    fn observe(&mut self, l2: f64) -> bool {
        if (l2 - self.ln_k).abs() < LN_K_TOL {
            self.run += 1;
        } else {
            self.run = 0;
        }
        if self.run >= LN_K_PLATEAU_STEPS && !self.fired {
            self.fired = true;
            return true;
        }
        false
    }
}

fn non_finite_component(b: &LossBreakdown) -> Option<(&'static str, f64)> {
    [
        ("similarity loss (l1)", b.l1),
        ("swapped clustering loss (l2)", b.l2),
        ("consensus loss (l3)", b.l3),
        ("total loss", b.total),
    ]
    .into_iter()
    .find(|(_, v)| !v.is_finite())
}

fn csv_writer(path: &Path, header: &str) -> Result<BufWriter<File>> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    Ok(w)
}

/// Hard cluster labels for the whole dataset, in index order. Code-based
/// modes run balanced assignment per evaluation batch; the similarity-only
/// mode clusters target projections with k-means instead.
pub fn predict_labels(
    model: &Model,
    dataset: &Dataset,
    mode: Mode,
    sinkhorn: &SinkhornConfig,
    eval_seed: u64,
) -> Result<Vec<usize>> {
    let n = dataset.len();
    let indices: Vec<usize> = (0..n).collect();
    let chunk = EVAL_BATCH.min(n).max(1);
    match mode {
        Mode::Byol => {
            let mut rows = Vec::with_capacity(n * model.spec().projection_dim());
            for batch_indices in indices.chunks(chunk) {
                let batch = dataset.batch(batch_indices)?;
                let v = model.target_projection_eval(&batch)?;
                rows.extend_from_slice(v.data());
            }
            let features = Tensor::new(vec![n, model.spec().projection_dim()], rows)?;
            kmeans(&features, model.k(), 10, eval_seed)
        }
        Mode::Concurl | Mode::Soft | Mode::ByolSoft => {
            let mut labels = Vec::with_capacity(n);
            for batch_indices in indices.chunks(chunk) {
                let batch = dataset.batch(batch_indices)?;
                let z = model.cluster_embeddings_eval(&batch)?;
                let codes = sinkhorn_codes(&z, model.prototypes(), sinkhorn)?;
                labels.extend(hard_assign(&codes));
            }
            Ok(labels)
        }
    }
}

/// Pairwise-agreement statistics of the ensemble's hard assignments over the
/// full dataset.
pub fn measure_diversity(
    model: &Model,
    dataset: &Dataset,
    transforms: &TransformEnsemble,
    tau: f64,
    epoch: usize,
) -> Result<DiversityRecord> {
    let n = dataset.len();
    let indices: Vec<usize> = (0..n).collect();
    let chunk = EVAL_BATCH.min(n).max(1);
    let mut labelings: Vec<Vec<usize>> = vec![Vec::with_capacity(n); transforms.len()];
    for batch_indices in indices.chunks(chunk) {
        let batch = dataset.batch(batch_indices)?;
        let z = model.cluster_embeddings_eval(&batch)?;
        let per_transform = ensemble::ensemble_assignments(&z, model.prototypes(), transforms, tau)?;
        for (dst, src) in labelings.iter_mut().zip(per_transform) {
            dst.extend(src);
        }
    }
    ensemble::diversity(epoch, &labelings)
}

fn evaluate_model(
    model: &Model,
    dataset: &Dataset,
    mode: Mode,
    sinkhorn: &SinkhornConfig,
    eval_seed: u64,
) -> Result<ClusterReport> {
    let pred = predict_labels(model, dataset, mode, sinkhorn, eval_seed)?;
    evaluate_clustering(&pred, dataset.labels())
}

/// Runs the configured number of epochs and returns the artifact paths.
/// With `epochs = 0` only the initial evaluation happens and the saved model
/// is the untouched initialization.
pub fn train(config: &TrainConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let dataset = config.dataset.load()?;
    let n = dataset.len();
    let k = dataset.num_classes();
    if config.batch_size > n {
        return Err(Error::Config(format!(
            "batch_size {} exceeds dataset size {n}",
            config.batch_size
        )));
    }
    if config.batch_size < k {
        return Err(Error::Config(format!(
            "batch_size {} is below the class count {k}; balanced codes need at \
             least one point per prototype on average",
            config.batch_size
        )));
    }

    let spec = match &config.network {
        Some(spec) => spec.clone(),
        None => NetworkSpec::default_for_input(dataset.feature_dim()),
    };
    if spec.input_dim() != dataset.feature_dim() {
        return Err(Error::Config(format!(
            "network expects input dimension {} but the data has {}",
            spec.input_dim(),
            dataset.feature_dim()
        )));
    }
    let mut model = Model::init(&spec, k, config.tau_b, config.seed)?;
    let transforms = config
        .ensemble
        .build(spec.cluster_dim(), derive_seed(config.seed, STREAM_ENSEMBLE))?;
    let weights = config.weights();
    let mut adam = Adam::new(config.adam())?;
    let sampler = BatchSampler {
        batch_size: config.batch_size,
        seed: derive_seed(config.seed, STREAM_SAMPLER),
        shuffle: true,
    };
    let eval_seed = derive_seed(config.seed, STREAM_EVAL);

    let mut base_policy = config.augment.clone();
    if base_policy.channel_stats.is_none() {
        if let DataKind::Image { .. } = dataset.kind() {
            base_policy.channel_stats =
                Some(ChannelStats::from_images((0..n).map(|i| dataset.feature(i)))?);
        }
    }

    std::fs::create_dir_all(&config.output_dir)?;
    let dir = &config.output_dir;
    config.to_json_file(&dir.join("config.json"))?;
    let metrics_csv = dir.join("metrics.csv");
    let eval_csv = dir.join("eval.csv");
    let mut metrics_w = csv_writer(&metrics_csv, "step,epoch,l1,l2,l3,total")?;
    let mut eval_w = csv_writer(&eval_csv, "epoch,acc,nmi,ari")?;
    let log_diversity = transforms.len() >= 2;
    let diversity_csv = log_diversity.then(|| dir.join("diversity.csv"));
    let mut diversity_w = diversity_csv
        .as_deref()
        .map(|p| csv_writer(p, "epoch,mean_pairwise_nmi,std_pairwise_nmi,num_pairs"))
        .transpose()?;

    let run_eval = |model: &Model,
                        epoch: usize,
                        eval_w: &mut BufWriter<File>,
                        diversity_w: &mut Option<BufWriter<File>>|
     -> Result<ClusterReport> {
        let r = evaluate_model(model, &dataset, config.mode, &config.sinkhorn, eval_seed)?;
        writeln!(eval_w, "{epoch},{},{},{}", r.acc, r.nmi, r.ari)?;
        if let Some(w) = diversity_w {
            let d = measure_diversity(model, &dataset, &transforms, config.temperature, epoch)?;
            writeln!(
                w,
                "{},{},{},{}",
                d.epoch, d.mean_pairwise_nmi, d.std_pairwise_nmi, d.num_pairs
            )?;
        }
        Ok(r)
    };

    let mut report = run_eval(&model, 0, &mut eval_w, &mut diversity_w)?;

    let mut plateau = PlateauMonitor::new(k);
    let mut step = 0u64;
    for epoch in 1..=config.epochs {
        for batch_indices in sampler.epoch_batches(n, epoch) {
            step += 1;
            let batch = dataset.batch(&batch_indices)?;
            let mut policy = base_policy.clone();
            policy.seed = derive_seed(config.seed, STREAM_AUGMENT | step);
            let views = make_views(&batch, &policy)?;
            let graph = Graph::new();
            let bundle = model.forward(&graph, &views)?;
            let (loss, parts) = total_loss(
                &bundle,
                Some(&transforms),
                &weights,
                config.temperature,
                &config.sinkhorn,
            )?;
            if let Some((component, value)) = non_finite_component(&parts) {
                let hint = if plateau.fired {
                    "; the swapped loss had already plateaued at ln K (uniform assignments)"
                } else {
                    ""
                };
                return Err(Error::Numeric(format!(
                    "{component} became {value} at step {step} (epoch {epoch}); aborting{hint}"
                )));
            }
            if weights.beta > 0.0 && plateau.observe(parts.l2) {
                eprintln!(
                    "warning: swapped clustering loss has stayed within {LN_K_TOL} of \
                     ln K = {:.6} for {LN_K_PLATEAU_STEPS} consecutive steps; \
                     assignments look uniform (collapse)",
                    plateau.ln_k
                );
            }
            loss.backward()?;
            let mut grads = Vec::with_capacity(bundle.params.len());
            for (name, var) in &bundle.params {
                let g = var.grad();
                if !g.is_finite() {
                    return Err(Error::Numeric(format!(
                        "gradient for {name} is not finite at step {step} (epoch {epoch})"
                    )));
                }
                grads.push(g);
            }
            let mut params = model.theta_mut();
            adam.step(&mut params, &grads)?;
            model.ema_update();
            writeln!(
                metrics_w,
                "{step},{epoch},{},{},{},{}",
                parts.l1, parts.l2, parts.l3, parts.total
            )?;
        }
        if epoch % config.eval_every == 0 || epoch == config.epochs {
            report = run_eval(&model, epoch, &mut eval_w, &mut diversity_w)?;
        }
    }
    metrics_w.flush()?;
    eval_w.flush()?;
    if let Some(w) = &mut diversity_w {
        w.flush()?;
    }

    let checkpoint = dir.join("model.ccrl");
    let run_meta = json!({
        "config": config,
        "epochs_trained": config.epochs,
        "steps": step,
    });
    model.save(&checkpoint, run_meta)?;
    let ensemble_file = dir.join("ensemble.ccrl");
    transforms.save(&ensemble_file)?;
    let report_json = dir.join("report.json");
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Numeric(format!("report serialization: {e}")))?;
    std::fs::write(&report_json, text + "\n")?;

    Ok(RunArtifacts {
        output_dir: dir.clone(),
        metrics_csv,
        eval_csv,
        diversity_csv,
        checkpoint,
        ensemble_file,
        report_json,
        final_report: report,
    })
}

/// Loads a checkpoint and its recorded run settings.
pub fn load_checkpoint(path: &Path) -> Result<(Model, TrainConfig)> {
    let (model, meta) = Model::load(path)?;
    let config_value = meta
        .get("config")
        .cloned()
        .ok_or_else(|| Error::Data(format!("{}: checkpoint lacks run config", path.display())))?;
    let config: TrainConfig = serde_json::from_value(config_value)
        .map_err(|e| Error::Data(format!("{}: bad run config: {e}", path.display())))?;
    Ok((model, config))
}

/// Scores a saved model on a dataset, using the mode and Sinkhorn settings
/// recorded at training time. The evaluation seed derives from the run seed,
/// so repeat calls give identical reports.
pub fn evaluate(checkpoint: &Path, dataset: &Dataset) -> Result<ClusterReport> {
    let (model, config) = load_checkpoint(checkpoint)?;
    if model.k() != dataset.num_classes() {
        return Err(Error::Data(format!(
            "checkpoint was trained with K={} but the data has {} classes",
            model.k(),
            dataset.num_classes()
        )));
    }
    if model.spec().input_dim() != dataset.feature_dim() {
        return Err(Error::Data(format!(
            "checkpoint expects input dimension {} but the data has {}",
            model.spec().input_dim(),
            dataset.feature_dim()
        )));
    }
    evaluate_model(
        &model,
        dataset,
        config.mode,
        &config.sinkhorn,
        derive_seed(config.seed, STREAM_EVAL),
    )
}
