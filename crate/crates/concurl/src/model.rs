//! The two-network model: an online tower (encoder, projector, predictor,
//! cluster projector, prototypes) trained by gradient, and a target tower
//! (encoder, projector) that trails it as an exponential moving average.
//!
//! The online path of a training step runs on the autodiff tape; the target
//! path runs as plain tensor arithmetic, so it can never contribute
//! gradients. Batch norm uses per-batch statistics while training and frozen
//! running averages during evaluation; a single-row batch degrades to the
//! affine map so no variance division can blow up.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::augment::ViewPair;
use crate::autodiff::{Graph, Var};
use crate::checkpoint::Container;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const NORM_EPS: f64 = 1e-12;
const BN_EPS: f64 = 1e-5;
/// Fraction of the previous running statistic kept per batch-norm update.
const BN_MOMENTUM: f64 = 0.9;

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

/// Widths of every head. All heads are two-layer MLPs
/// (linear, batch norm, relu, linear) except the encoder, whose layer list is
/// free-form: `encoder_layers = [input, hidden..., rep_dim]`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NetworkSpec {
    pub encoder_layers: Vec<usize>,
    /// (hidden width, output dim) of the target-predicting projector.
    pub projector: (usize, usize),
    /// (hidden width, output dim); output must match the projector's.
    pub predictor: (usize, usize),
    /// (hidden width, cluster embedding dim d).
    pub cluster_projector: (usize, usize),
    #[serde(default)]
    pub activation: Activation,
    pub batch_norm: bool,
}

impl NetworkSpec {
    /// Scaled-down default: encoder input -> 256 -> 128, all heads
    /// hidden 256 with 64-dimensional outputs.
    pub fn default_for_input(input_dim: usize) -> Self {
        NetworkSpec {
            encoder_layers: vec![input_dim, 256, 128],
            projector: (256, 64),
            predictor: (256, 64),
            cluster_projector: (256, 64),
            activation: Activation::Relu,
            batch_norm: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_layers.len() < 2 {
            return Err(Error::Config("encoder needs at least input and output widths".into()));
        }
        let widths = self
            .encoder_layers
            .iter()
            .chain([&self.projector.0, &self.projector.1])
            .chain([&self.predictor.0, &self.predictor.1])
            .chain([&self.cluster_projector.0, &self.cluster_projector.1]);
        for &w in widths {
            if w == 0 {
                return Err(Error::Config("network widths must be positive".into()));
            }
        }
        if self.projector.1 != self.predictor.1 {
            return Err(Error::Config(format!(
                "predictor output {} must match projector output {}",
                self.predictor.1, self.projector.1
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.encoder_layers[0]
    }

    pub fn rep_dim(&self) -> usize {
        *self.encoder_layers.last().unwrap()
    }

    pub fn projection_dim(&self) -> usize {
        self.projector.1
    }

    pub fn cluster_dim(&self) -> usize {
        self.cluster_projector.1
    }
}

#[derive(Clone, Debug)]
struct Linear {
    weight: Tensor, // [out, in]
    bias: Tensor,   // [out]
}

impl Linear {
    fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha20Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let data: Vec<f64> =
            (0..out_dim * in_dim).map(|_| rng.random_range(-bound..=bound)).collect();
        Linear {
            weight: Tensor::new(vec![out_dim, in_dim], data).expect("linear init"),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    fn forward_value(&self, x: &Tensor) -> Result<Tensor> {
        x.matmul(&self.weight.transpose()?)?.add_row(&self.bias)
    }
}

#[derive(Clone, Debug)]
struct BnState {
    gamma: Tensor,
    beta: Tensor,
    running_mean: Tensor,
    running_var: Tensor,
}

impl BnState {
    fn init(n: usize) -> Self {
        BnState {
            gamma: Tensor::full(&[n], 1.0),
            beta: Tensor::zeros(&[n]),
            running_mean: Tensor::zeros(&[n]),
            running_var: Tensor::full(&[n], 1.0),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Per-batch statistics (single-row batches degrade to the affine map).
    Train,
    /// Frozen running averages.
    Eval,
}

#[derive(Clone, Debug)]
struct MlpLayer {
    linear: Linear,
    bn: Option<BnState>,
    activate: bool,
}

#[derive(Clone, Debug)]
struct Mlp {
    layers: Vec<MlpLayer>,
}

impl Mlp {
    /// `widths[0]` is the input; every layer but the last gets batch norm
    /// (when enabled) and the activation.
    fn init(widths: &[usize], batch_norm: bool, rng: &mut ChaCha20Rng) -> Self {
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for i in 0..widths.len() - 1 {
            let last = i == widths.len() - 2;
            layers.push(MlpLayer {
                linear: Linear::init(widths[i], widths[i + 1], rng),
                bn: (!last && batch_norm).then(|| BnState::init(widths[i + 1])),
                activate: !last,
            });
        }
        Mlp { layers }
    }

    fn forward_value(&self, x: &Tensor, mode: BnMode) -> Result<Tensor> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.linear.forward_value(&h)?;
            if let Some(bn) = &layer.bn {
                h = match mode {
                    BnMode::Eval => {
                        let (_, n) = h.dims2()?;
                        let std_inv: Vec<f64> = bn
                            .running_var
                            .data()
                            .iter()
                            .map(|&v| 1.0 / (v + BN_EPS).sqrt())
                            .collect();
                        let centered = h.add_row(&bn.running_mean.scale(-1.0))?;
                        let scaled = centered.mul_row(&Tensor::vector(&std_inv))?;
                        debug_assert_eq!(std_inv.len(), n);
                        scaled.mul_row(&bn.gamma)?.add_row(&bn.beta)?
                    }
                    BnMode::Train => {
                        let (b, n) = h.dims2()?;
                        if b == 1 {
                            h.mul_row(&bn.gamma)?.add_row(&bn.beta)?
                        } else {
                            let mut mean = vec![0.0; n];
                            for i in 0..b {
                                for (m, &v) in mean.iter_mut().zip(h.row(i)) {
                                    *m += v;
                                }
                            }
                            for m in mean.iter_mut() {
                                *m /= b as f64;
                            }
                            let mut var = vec![0.0; n];
                            for i in 0..b {
                                for ((s, &v), &m) in var.iter_mut().zip(h.row(i)).zip(&mean) {
                                    *s += (v - m) * (v - m);
                                }
                            }
                            for v in var.iter_mut() {
                                *v /= b as f64;
                            }
                            let std_inv: Vec<f64> =
                                var.iter().map(|&v| 1.0 / (v + BN_EPS).sqrt()).collect();
                            let centered = h.add_row(&Tensor::vector(&mean).scale(-1.0))?;
                            centered
                                .mul_row(&Tensor::vector(&std_inv))?
                                .mul_row(&bn.gamma)?
                                .add_row(&bn.beta)?
                        }
                    }
                };
            }
            if layer.activate {
                h = h.relu();
            }
        }
        Ok(h)
    }

    fn bind(&self, graph: &Graph) -> MlpVars {
        let layers = self
            .layers
            .iter()
            .map(|layer| LayerVars {
                w: graph.leaf(layer.linear.weight.clone()),
                b: graph.leaf(layer.linear.bias.clone()),
                bn: layer
                    .bn
                    .as_ref()
                    .map(|bn| (graph.leaf(bn.gamma.clone()), graph.leaf(bn.beta.clone()))),
            })
            .collect();
        MlpVars { layers }
    }

    /// Tape forward in training mode. Batch statistics produced by batch-norm
    /// nodes are appended to `updates` as (layer index, mean, var).
    fn forward_traced(
        &self,
        vars: &MlpVars,
        x: &Var,
        updates: &mut Vec<(usize, Tensor, Tensor)>,
    ) -> Result<Var> {
        let mut h = x.clone();
        for (i, (layer, lv)) in self.layers.iter().zip(&vars.layers).enumerate() {
            h = h.matmul(&lv.w.transpose()?)?.add_row(&lv.b)?;
            if let Some((gamma, beta)) = &lv.bn {
                let (out, stats) = h.batch_norm(gamma, beta, BN_EPS)?;
                if let Some((mean, var)) = stats {
                    updates.push((i, mean, var));
                }
                h = out;
            }
            if layer.activate {
                h = h.relu();
            }
        }
        Ok(h)
    }

    fn apply_bn_updates(&mut self, updates: &[(usize, Tensor, Tensor)]) {
        for (i, mean, var) in updates {
            let bn = self.layers[*i].bn.as_mut().expect("update for non-bn layer");
            bn.running_mean = bn.running_mean.scale(BN_MOMENTUM).add(&mean.scale(1.0 - BN_MOMENTUM)).unwrap();
            bn.running_var = bn.running_var.scale(BN_MOMENTUM).add(&var.scale(1.0 - BN_MOMENTUM)).unwrap();
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in self.layers.iter_mut() {
            out.push(&mut layer.linear.weight);
            out.push(&mut layer.linear.bias);
            if let Some(bn) = layer.bn.as_mut() {
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
        }
        out
    }

    /// Clones every tensor, parameters and running statistics, under
    /// `prefix.layer.` names.
    fn collect_all(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        for (i, layer) in self.layers.iter().enumerate() {
            out.push((format!("{prefix}.{i}.weight"), layer.linear.weight.clone()));
            out.push((format!("{prefix}.{i}.bias"), layer.linear.bias.clone()));
            if let Some(bn) = &layer.bn {
                out.push((format!("{prefix}.{i}.bn.gamma"), bn.gamma.clone()));
                out.push((format!("{prefix}.{i}.bn.beta"), bn.beta.clone()));
                out.push((format!("{prefix}.{i}.bn.running_mean"), bn.running_mean.clone()));
                out.push((format!("{prefix}.{i}.bn.running_var"), bn.running_var.clone()));
            }
        }
    }

    fn fill_from(&mut self, prefix: &str, fetch: &mut impl FnMut(&str, &Tensor) -> Result<Tensor>) -> Result<()> {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.linear.weight = fetch(&format!("{prefix}.{i}.weight"), &layer.linear.weight)?;
            layer.linear.bias = fetch(&format!("{prefix}.{i}.bias"), &layer.linear.bias)?;
            if let Some(bn) = layer.bn.as_mut() {
                bn.gamma = fetch(&format!("{prefix}.{i}.bn.gamma"), &bn.gamma)?;
                bn.beta = fetch(&format!("{prefix}.{i}.bn.beta"), &bn.beta)?;
                bn.running_mean = fetch(&format!("{prefix}.{i}.bn.running_mean"), &bn.running_mean)?;
                bn.running_var = fetch(&format!("{prefix}.{i}.bn.running_var"), &bn.running_var)?;
            }
        }
        Ok(())
    }

    /// EMA of every tensor (parameters and running statistics) toward `src`.
    fn ema_from(&mut self, src: &Mlp, tau: f64) {
        let blend = |t: &Tensor, s: &Tensor| -> Tensor {
            t.scale(tau).add(&s.scale(1.0 - tau)).expect("ema shapes mirror")
        };
        for (dst, org) in self.layers.iter_mut().zip(&src.layers) {
            dst.linear.weight = blend(&dst.linear.weight, &org.linear.weight);
            dst.linear.bias = blend(&dst.linear.bias, &org.linear.bias);
            if let (Some(d), Some(o)) = (dst.bn.as_mut(), org.bn.as_ref()) {
                d.gamma = blend(&d.gamma, &o.gamma);
                d.beta = blend(&d.beta, &o.beta);
                d.running_mean = blend(&d.running_mean, &o.running_mean);
                d.running_var = blend(&d.running_var, &o.running_var);
            }
        }
    }
}

pub struct LayerVars {
    pub w: Var,
    pub b: Var,
    pub bn: Option<(Var, Var)>,
}

pub struct MlpVars {
    pub layers: Vec<LayerVars>,
}

impl MlpVars {
    fn named(&self, prefix: &str, out: &mut Vec<(String, Var)>) {
        for (i, lv) in self.layers.iter().enumerate() {
            out.push((format!("{prefix}.{i}.weight"), lv.w.clone()));
            out.push((format!("{prefix}.{i}.bias"), lv.b.clone()));
            if let Some((g, b)) = &lv.bn {
                out.push((format!("{prefix}.{i}.bn.gamma"), g.clone()));
                out.push((format!("{prefix}.{i}.bn.beta"), b.clone()));
            }
        }
    }
}

#[derive(Clone, Debug)]
struct OnlineNet {
    encoder: Mlp,
    projector: Mlp,
    predictor: Mlp,
    cluster: Mlp,
    /// One prototype per row, `[K, d]`; normalized on use, not in storage.
    prototypes: Tensor,
}

#[derive(Clone, Debug)]
struct TargetNet {
    encoder: Mlp,
    projector: Mlp,
}

/// Everything one training step's forward pass produces for one view.
pub struct ViewForward {
    /// Online representation y (encoder output).
    pub y: Var,
    /// Online projection v.
    pub v: Var,
    /// Online prediction w.
    pub w: Var,
    /// Row-normalized prediction, the w-bar the similarity loss consumes.
    pub w_norm: Var,
    /// Cluster embeddings z, `[B, d]`.
    pub z: Var,
    /// Target representation (no gradient).
    pub y_target: Tensor,
    /// Target projection (no gradient).
    pub v_target: Tensor,
    /// Row-normalized target projection.
    pub v_target_norm: Tensor,
}

pub struct ForwardBundle {
    pub views: [ViewForward; 2],
    /// Prototype matrix as a differentiable leaf, `[K, d]`.
    pub prototypes: Var,
    /// Every trainable parameter in optimizer order.
    pub params: Vec<(String, Var)>,
    pub batch_size: usize,
}

#[derive(Clone, Debug)]
pub struct Model {
    spec: NetworkSpec,
    k: usize,
    tau_b: f64,
    online: OnlineNet,
    target: TargetNet,
}

impl Model {
    /// Fresh model: uniform fan-in-scaled weights, unit-Gaussian prototypes
    /// normalized per row, and a target tower copied exactly from the online
    /// encoder and projector.
    pub fn init(spec: &NetworkSpec, k: usize, tau_b: f64, seed: u64) -> Result<Model> {
        spec.validate()?;
        if k < 2 {
            return Err(Error::Config(format!("need at least 2 prototypes, got {k}")));
        }
        if !(0.0..=1.0).contains(&tau_b) {
            return Err(Error::Config(format!("tau_b must be in [0, 1], got {tau_b}")));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let rep = spec.rep_dim();
        let encoder = Mlp::init(&spec.encoder_layers, spec.batch_norm, &mut rng);
        let projector = Mlp::init(&[rep, spec.projector.0, spec.projector.1], spec.batch_norm, &mut rng);
        let predictor = Mlp::init(
            &[spec.projector.1, spec.predictor.0, spec.predictor.1],
            spec.batch_norm,
            &mut rng,
        );
        let cluster = Mlp::init(
            &[rep, spec.cluster_projector.0, spec.cluster_projector.1],
            spec.batch_norm,
            &mut rng,
        );
        let d = spec.cluster_dim();
        let raw: Vec<f64> = (0..k * d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let prototypes = Tensor::new(vec![k, d], raw)?.l2_normalize(NORM_EPS)?;
        let target = TargetNet { encoder: encoder.clone(), projector: projector.clone() };
        Ok(Model {
            spec: spec.clone(),
            k,
            tau_b,
            online: OnlineNet { encoder, projector, predictor, cluster, prototypes },
            target,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tau_b(&self) -> f64 {
        self.tau_b
    }

    pub fn prototypes(&self) -> &Tensor {
        &self.online.prototypes
    }

    fn flatten(&self, batch: &Tensor) -> Result<Tensor> {
        let shape = batch.shape();
        let flat = match shape.len() {
            2 => batch.clone(),
            4 => batch.reshape(&[shape[0], shape[1] * shape[2] * shape[3]])?,
            r => return Err(Error::Shape(format!("expected rank 2 or 4 batch, got rank {r}"))),
        };
        let (_, dim) = flat.dims2()?;
        if dim != self.spec.input_dim() {
            return Err(Error::Shape(format!(
                "batch features have dim {dim}, network expects {}",
                self.spec.input_dim()
            )));
        }
        Ok(flat)
    }

    /// Training forward over both views: online tower on the tape, target
    /// tower as plain values. Updates batch-norm running statistics.
    pub fn forward(&mut self, graph: &Graph, views: &ViewPair) -> Result<ForwardBundle> {
        let x1 = self.flatten(&views.view1)?;
        let x2 = self.flatten(&views.view2)?;
        let batch_size = x1.shape()[0];
        let enc_vars = self.online.encoder.bind(graph);
        let proj_vars = self.online.projector.bind(graph);
        let pred_vars = self.online.predictor.bind(graph);
        let clus_vars = self.online.cluster.bind(graph);
        let proto_var = graph.leaf(self.online.prototypes.clone());

        let mut enc_updates = Vec::new();
        let mut proj_updates = Vec::new();
        let mut pred_updates = Vec::new();
        let mut clus_updates = Vec::new();
        let mut run_view = |x: &Tensor| -> Result<ViewForward> {
            let xc = graph.constant(x.clone());
            let y = self.online.encoder.forward_traced(&enc_vars, &xc, &mut enc_updates)?;
            let v = self.online.projector.forward_traced(&proj_vars, &y, &mut proj_updates)?;
            let w = self.online.predictor.forward_traced(&pred_vars, &v, &mut pred_updates)?;
            let w_norm = w.l2_normalize(NORM_EPS)?;
            let z = self.online.cluster.forward_traced(&clus_vars, &y, &mut clus_updates)?;
            if !z.value().is_finite() {
                return Err(Error::Numeric("cluster embeddings are non-finite".into()));
            }
            let y_target = self.target.encoder.forward_value(x, BnMode::Train)?;
            let v_target = self.target.projector.forward_value(&y_target, BnMode::Train)?;
            let v_target_norm = v_target.l2_normalize(NORM_EPS)?;
            Ok(ViewForward { y, v, w, w_norm, z, y_target, v_target, v_target_norm })
        };
        let view1 = run_view(&x1)?;
        let view2 = run_view(&x2)?;
        self.online.encoder.apply_bn_updates(&enc_updates);
        self.online.projector.apply_bn_updates(&proj_updates);
        self.online.predictor.apply_bn_updates(&pred_updates);
        self.online.cluster.apply_bn_updates(&clus_updates);

        let mut params = Vec::new();
        enc_vars.named("online.encoder", &mut params);
        proj_vars.named("online.projector", &mut params);
        pred_vars.named("online.predictor", &mut params);
        clus_vars.named("online.cluster", &mut params);
        params.push(("online.prototypes".into(), proto_var.clone()));
        Ok(ForwardBundle { views: [view1, view2], prototypes: proto_var, params, batch_size })
    }

    /// Cluster embeddings z for evaluation (online tower, frozen batch-norm
    /// statistics).
    pub fn cluster_embeddings_eval(&self, batch: &Tensor) -> Result<Tensor> {
        let x = self.flatten(batch)?;
        let y = self.online.encoder.forward_value(&x, BnMode::Eval)?;
        self.online.cluster.forward_value(&y, BnMode::Eval)
    }

    /// Target projection v for evaluation (frozen batch-norm statistics).
    pub fn target_projection_eval(&self, batch: &Tensor) -> Result<Tensor> {
        let x = self.flatten(batch)?;
        let y = self.target.encoder.forward_value(&x, BnMode::Eval)?;
        self.target.projector.forward_value(&y, BnMode::Eval)
    }

    /// Trainable parameters in the same order as `ForwardBundle::params`.
    pub fn theta_mut(&mut self) -> Vec<&mut Tensor> {
        let o = &mut self.online;
        let mut out = o.encoder.params_mut();
        out.extend(o.projector.params_mut());
        out.extend(o.predictor.params_mut());
        out.extend(o.cluster.params_mut());
        out.push(&mut o.prototypes);
        out
    }

    /// Moves every target tensor toward its online counterpart:
    /// `xi = tau_b * xi + (1 - tau_b) * theta`. Running batch-norm statistics
    /// follow the same average.
    pub fn ema_update(&mut self) {
        let tau = self.tau_b;
        self.target.encoder.ema_from(&self.online.encoder, tau);
        self.target.projector.ema_from(&self.online.projector, tau);
    }

    /// Every tensor in the model (parameters and running statistics) in
    /// canonical checkpoint order.
    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        self.online.encoder.collect_all("online.encoder", &mut out);
        self.online.projector.collect_all("online.projector", &mut out);
        self.online.predictor.collect_all("online.predictor", &mut out);
        self.online.cluster.collect_all("online.cluster", &mut out);
        out.push(("online.prototypes".into(), self.online.prototypes.clone()));
        self.target.encoder.collect_all("target.encoder", &mut out);
        self.target.projector.collect_all("target.projector", &mut out);
        out
    }

    /// Writes the model and caller metadata (stored under `"run"`) to a
    /// container file.
    pub fn save(&self, path: &Path, run_meta: serde_json::Value) -> Result<()> {
        let meta = serde_json::json!({
            "spec": self.spec,
            "k": self.k,
            "tau_b": self.tau_b,
            "run": run_meta,
        });
        Container::new(meta, self.named_tensors()).save(path)
    }

    /// Loads a model written by [`Model::save`], returning it with the stored
    /// run metadata.
    pub fn load(path: &Path) -> Result<(Model, serde_json::Value)> {
        let container = Container::load(path)?;
        let meta = &container.meta;
        let spec: NetworkSpec = serde_json::from_value(meta["spec"].clone())
            .map_err(|e| Error::Data(format!("{}: bad spec metadata: {e}", path.display())))?;
        let k = meta["k"]
            .as_u64()
            .ok_or_else(|| Error::Data(format!("{}: missing k", path.display())))?
            as usize;
        let tau_b = meta["tau_b"]
            .as_f64()
            .ok_or_else(|| Error::Data(format!("{}: missing tau_b", path.display())))?;
        let mut model = Model::init(&spec, k, tau_b, 0)?;
        let lookup: std::collections::HashMap<&str, &Tensor> =
            container.blobs.iter().map(|(n, t)| (n.as_str(), t)).collect();
        let mut used = 0usize;
        {
            let mut fetch = |name: &str, current: &Tensor| -> Result<Tensor> {
                let t = lookup.get(name).ok_or_else(|| {
                    Error::Data(format!("{}: missing blob '{name}'", path.display()))
                })?;
                if t.shape() != current.shape() {
                    return Err(Error::Data(format!(
                        "{}: blob '{name}' has shape {:?}, expected {:?}",
                        path.display(),
                        t.shape(),
                        current.shape()
                    )));
                }
                used += 1;
                Ok((*t).clone())
            };
            model.online.encoder.fill_from("online.encoder", &mut fetch)?;
            model.online.projector.fill_from("online.projector", &mut fetch)?;
            model.online.predictor.fill_from("online.predictor", &mut fetch)?;
            model.online.cluster.fill_from("online.cluster", &mut fetch)?;
            model.online.prototypes = fetch("online.prototypes", &model.online.prototypes.clone())?;
            model.target.encoder.fill_from("target.encoder", &mut fetch)?;
            model.target.projector.fill_from("target.projector", &mut fetch)?;
        }
        if used != container.blobs.len() {
            return Err(Error::Data(format!(
                "{}: {} unused blobs",
                path.display(),
                container.blobs.len() - used
            )));
        }
        let run = meta.get("run").cloned().unwrap_or(serde_json::Value::Null);
        Ok((model, run))
    }
}
