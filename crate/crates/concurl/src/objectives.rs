//! Training objectives: the similarity loss between online predictions and
//! target projections, the swapped soft-clustering loss against balanced
//! codes, and the consensus loss that repeats the swapped comparison in every
//! transformed feature space.
//!
//! Codes are always plain tensors: they are targets, so no gradient may flow
//! into them. The assignment probabilities stay on the tape.

use serde::{Deserialize, Serialize};

use crate::autodiff::Var;
use crate::ensemble::TransformEnsemble;
use crate::error::{Error, Result};
use crate::model::ForwardBundle;
use crate::tensor::Tensor;

/// Row norms below this count as degenerate prototypes.
const NORM_EPS: f64 = 1e-12;
/// Probabilities are clamped here before the log so cross-entropies stay
/// finite.
const LOG_FLOOR: f64 = 1e-12;
/// Hard cap on balancing rounds when running to a convergence tolerance.
const MAX_BALANCE_ROUNDS: usize = 100_000;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SinkhornConfig {
    /// Entropic regularizer; scores are divided by this before exponentiation.
    pub epsilon: f64,
    /// Balancing rounds when no convergence tolerance is set.
    pub num_iters: usize,
    /// When set, iterate until the summed marginal residual drops below this
    /// value instead of running a fixed round count.
    #[serde(default)]
    pub convergence_tol: Option<f64>,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig { epsilon: 0.05, num_iters: 3, convergence_tol: None }
    }
}

impl SinkhornConfig {
    /// Fixed-round training defaults.
    pub fn training() -> Self {
        SinkhornConfig::default()
    }

    /// Runs the solver to a tight marginal residual; used by tests and
    /// evaluation oracles.
    pub fn converged() -> Self {
        SinkhornConfig { convergence_tol: Some(1e-10), ..SinkhornConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.num_iters == 0 {
            return Err(Error::Config("num_iters must be at least 1".into()));
        }
        if let Some(tol) = self.convergence_tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::Config(format!("convergence_tol must be positive, got {tol}")));
            }
        }
        Ok(())
    }
}

/// Softmax cluster probabilities `[B, K]` at the temperature they were
/// computed with.
#[derive(Clone, Debug)]
pub struct AssignmentMatrix {
    pub p: Tensor,
    pub tau: f64,
}

/// Balanced codes `[B, K]`. Rows sum to 1 (the solver's final row rescale),
/// and the matrix is a plain tensor so it can never carry gradient.
#[derive(Clone, Debug)]
pub struct CodeMatrix {
    pub q: Tensor,
    pub rescaled: bool,
}

/// Per-step loss components and the weighted total. Components skipped
/// because their weight is zero are reported as 0.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub total: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let w = LossWeights { alpha, beta, gamma };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_prototype_rows(prototypes: &Tensor) -> Result<()> {
    let (k, _) = prototypes.dims2()?;
    for i in 0..k {
        let norm = prototypes.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < NORM_EPS {
            return Err(Error::Numeric(format!("prototype {i} is degenerate (norm {norm:e})")));
        }
    }
    Ok(())
}

/// Softmax probabilities over prototypes from normalized inner products:
/// `p[i][j] = softmax_j(<z_i/|z_i|, c_j/|c_j|> / tau)`.
pub fn soft_assign(z: &Tensor, prototypes: &Tensor, tau: f64) -> Result<AssignmentMatrix> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Config(format!("temperature must be positive, got {tau}")));
    }
    check_prototype_rows(prototypes)?;
    let zn = z.l2_normalize(NORM_EPS)?;
    let cn = prototypes.l2_normalize(NORM_EPS)?;
    let p = zn.matmul(&cn.transpose()?)?.scale(1.0 / tau).softmax_rows()?;
    Ok(AssignmentMatrix { p, tau })
}

/// Tape version of [`soft_assign`]; gradients flow into both `z` and the
/// prototypes.
pub fn soft_assign_probs(z: &Var, prototypes: &Var, tau: f64) -> Result<Var> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Config(format!("temperature must be positive, got {tau}")));
    }
    check_prototype_rows(&prototypes.value())?;
    let zn = z.l2_normalize(NORM_EPS)?;
    let cn = prototypes.l2_normalize(NORM_EPS)?;
    zn.matmul(&cn.transpose()?)?.scale(1.0 / tau).softmax_rows()
}

/// One column-then-row balancing round. Column sums are driven to 1/K, row
/// sums to 1/B.
fn balance_round(q: &mut [f64], b: usize, k: usize) {
    let col_target = 1.0 / k as f64;
    let row_target = 1.0 / b as f64;
    for j in 0..k {
        let mut sum = 0.0;
        for i in 0..b {
            sum += q[i * k + j];
        }
        let factor = col_target / sum;
        for i in 0..b {
            q[i * k + j] *= factor;
        }
    }
    for i in 0..b {
        let row = &mut q[i * k..(i + 1) * k];
        let sum: f64 = row.iter().sum();
        let factor = row_target / sum;
        for v in row.iter_mut() {
            *v *= factor;
        }
    }
}

fn marginal_residual(q: &[f64], b: usize, k: usize) -> f64 {
    let col_target = 1.0 / k as f64;
    let row_target = 1.0 / b as f64;
    let mut res = 0.0;
    for i in 0..b {
        let sum: f64 = q[i * k..(i + 1) * k].iter().sum();
        res += (sum - row_target).abs();
    }
    for j in 0..k {
        let mut sum = 0.0;
        for i in 0..b {
            sum += q[i * k + j];
        }
        res += (sum - col_target).abs();
    }
    res
}

/// Core balancing loop; returns the final codes and the marginal residual
/// measured after each round.
fn balance(scores: &Tensor, cfg: &SinkhornConfig) -> Result<(Tensor, Vec<f64>)> {
    cfg.validate()?;
    let (b, k) = scores.dims2()?;
    if b == 0 || k == 0 {
        return Err(Error::Shape("scores must be non-empty".into()));
    }
    if !scores.is_finite() {
        return Err(Error::Numeric("non-finite scores".into()));
    }
    let max = scores.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut q: Vec<f64> =
        scores.data().iter().map(|&s| ((s - max) / cfg.epsilon).exp()).collect();
    let mut residuals = Vec::new();
    let rounds = match cfg.convergence_tol {
        Some(_) => MAX_BALANCE_ROUNDS,
        None => cfg.num_iters,
    };
    for _ in 0..rounds {
        balance_round(&mut q, b, k);
        let res = marginal_residual(&q, b, k);
        residuals.push(res);
        if cfg.convergence_tol.is_some_and(|tol| res < tol) {
            break;
        }
    }
    if let Some(tol) = cfg.convergence_tol {
        let last = residuals.last().copied().unwrap_or(f64::INFINITY);
        if last >= tol {
            return Err(Error::Numeric(format!(
                "sinkhorn stalled: marginal residual {last:.3e} after {MAX_BALANCE_ROUNDS} \
                 rounds, wanted {tol:.0e}"
            )));
        }
    }
    // Final row rescale: each sample's code becomes a probability vector.
    for v in q.iter_mut() {
        *v *= b as f64;
    }
    Ok((Tensor::new(vec![b, k], q)?, residuals))
}

/// Balanced codes from a precomputed score matrix `[B, K]`.
pub fn sinkhorn_from_scores(scores: &Tensor, cfg: &SinkhornConfig) -> Result<CodeMatrix> {
    let (q, _) = balance(scores, cfg)?;
    Ok(CodeMatrix { q, rescaled: true })
}

/// Balanced codes for embeddings against prototypes; scores are normalized
/// inner products. Inputs are plain tensors on purpose: codes are targets.
pub fn sinkhorn_codes(z: &Tensor, prototypes: &Tensor, cfg: &SinkhornConfig) -> Result<CodeMatrix> {
    let zn = z.l2_normalize(NORM_EPS)?;
    let cn = prototypes.l2_normalize(NORM_EPS)?;
    sinkhorn_from_scores(&zn.matmul(&cn.transpose()?)?, cfg)
}

/// Per-row argmax of the codes; ties break to the lowest index.
pub fn hard_assign(codes: &CodeMatrix) -> Vec<usize> {
    codes.q.argmax_rows().expect("codes are always rank 2")
}

/// Mean squared distance between each view's normalized prediction and the
/// other view's normalized target projection. Each of the two terms lies in
/// [0, 4].
pub fn byol_loss(bundle: &ForwardBundle) -> Result<Var> {
    let b = bundle.batch_size as f64;
    let graph = bundle.views[0].w_norm.graph();
    let mut terms = Vec::with_capacity(2);
    for (view, other) in [(0, 1), (1, 0)] {
        let target = graph.constant(bundle.views[other].v_target_norm.clone());
        let diff = bundle.views[view].w_norm.sub(&target)?;
        terms.push(diff.mul_elem(&diff)?.sum().scale(1.0 / b));
    }
    terms[0].add(&terms[1])
}

/// Sum over all entries of `codes * log(probs)` with the log clamped at
/// [`LOG_FLOOR`].
fn cross_entropy_sum(probs: &Var, codes: &CodeMatrix) -> Result<Var> {
    if probs.shape() != codes.q.shape() {
        return Err(Error::Shape(format!(
            "probabilities {:?} vs codes {:?}",
            probs.shape(),
            codes.q.shape()
        )));
    }
    let graph = probs.graph();
    Ok(probs.log_clamped(LOG_FLOOR).mul_elem(&graph.constant(codes.q.clone()))?.sum())
}

/// Swapped prediction loss: view 1's probabilities against view 2's codes and
/// vice versa, averaged over both directions and the batch.
pub fn swapped_cluster_loss(
    p1: &Var,
    p2: &Var,
    q1: &CodeMatrix,
    q2: &CodeMatrix,
) -> Result<Var> {
    let b = p1.shape()[0] as f64;
    let ce = cross_entropy_sum(p1, q2)?.add(&cross_entropy_sum(p2, q1)?)?;
    Ok(ce.scale(-1.0 / (2.0 * b)))
}

/// Swapped prediction loss repeated in every transformed space: probabilities
/// come from transformed embeddings and prototypes, codes stay untransformed.
/// Gradients flow through the probabilities into `z` and the prototypes,
/// never into the transforms.
pub fn consensus_loss(
    z1: &Var,
    z2: &Var,
    prototypes: &Var,
    q1: &CodeMatrix,
    q2: &CodeMatrix,
    ensemble: &TransformEnsemble,
    tau: f64,
) -> Result<Var> {
    if ensemble.is_empty() {
        return Err(Error::Config("consensus loss needs a non-empty ensemble".into()));
    }
    let b = z1.shape()[0] as f64;
    let m = ensemble.len() as f64;
    let mut acc: Option<Var> = None;
    for i in 0..ensemble.len() {
        let tc = ensemble.apply_var(i, prototypes)?;
        let p1 = soft_assign_probs(&ensemble.apply_var(i, z1)?, &tc, tau)?;
        let p2 = soft_assign_probs(&ensemble.apply_var(i, z2)?, &tc, tau)?;
        let ce = cross_entropy_sum(&p1, q2)?.add(&cross_entropy_sum(&p2, q1)?)?;
        acc = Some(match acc {
            Some(a) => a.add(&ce)?,
            None => ce,
        });
    }
    Ok(acc.expect("non-empty ensemble").scale(-1.0 / (2.0 * b * m)))
}

/// Weighted combination of the three losses with the codes supplied by the
/// caller. Components with weight zero are skipped entirely.
pub fn loss_with_codes(
    bundle: &ForwardBundle,
    codes: Option<(&CodeMatrix, &CodeMatrix)>,
    ensemble: Option<&TransformEnsemble>,
    weights: &LossWeights,
    tau: f64,
) -> Result<(Var, LossBreakdown)> {
    weights.validate()?;
    let graph = bundle.prototypes.graph();
    let needs_codes = weights.beta > 0.0 || weights.gamma > 0.0;
    if needs_codes && codes.is_none() {
        return Err(Error::Config("cluster losses need codes".into()));
    }
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    let mut l3 = 0.0;
    let mut total: Option<Var> = None;
    let mut accumulate = |term: Var, weight: f64| {
        let scaled = term.scale(weight);
        total = Some(match total.take() {
            Some(t) => t.add(&scaled).expect("scalar shapes"),
            None => scaled,
        });
    };
    if weights.alpha > 0.0 {
        let term = byol_loss(bundle)?;
        l1 = term.value().item();
        accumulate(term, weights.alpha);
    }
    if weights.beta > 0.0 {
        let (q1, q2) = codes.expect("checked above");
        let p1 = soft_assign_probs(&bundle.views[0].z, &bundle.prototypes, tau)?;
        let p2 = soft_assign_probs(&bundle.views[1].z, &bundle.prototypes, tau)?;
        let term = swapped_cluster_loss(&p1, &p2, q1, q2)?;
        l2 = term.value().item();
        accumulate(term, weights.beta);
    }
    if weights.gamma > 0.0 {
        let (q1, q2) = codes.expect("checked above");
        let ensemble = ensemble
            .ok_or_else(|| Error::Config("consensus weight set but no ensemble given".into()))?;
        let term = consensus_loss(
            &bundle.views[0].z,
            &bundle.views[1].z,
            &bundle.prototypes,
            q1,
            q2,
            ensemble,
            tau,
        )?;
        l3 = term.value().item();
        accumulate(term, weights.gamma);
    }
    let total = total.unwrap_or_else(|| graph.constant(Tensor::scalar(0.0)));
    let breakdown = LossBreakdown {
        l1,
        l2,
        l3,
        total: total.value().item(),
        alpha: weights.alpha,
        beta: weights.beta,
        gamma: weights.gamma,
    };
    Ok((total, breakdown))
}

/// Weighted combination of the three losses; codes are computed here from the
/// gradient-free values of the cluster embeddings when any cluster loss is
/// active.
pub fn total_loss(
    bundle: &ForwardBundle,
    ensemble: Option<&TransformEnsemble>,
    weights: &LossWeights,
    tau: f64,
    sinkhorn: &SinkhornConfig,
) -> Result<(Var, LossBreakdown)> {
    weights.validate()?;
    let codes = if weights.beta > 0.0 || weights.gamma > 0.0 {
        let prototypes = bundle.prototypes.value();
        Some((
            sinkhorn_codes(&bundle.views[0].z.value(), &prototypes, sinkhorn)?,
            sinkhorn_codes(&bundle.views[1].z.value(), &prototypes, sinkhorn)?,
        ))
    } else {
        None
    };
    loss_with_codes(bundle, codes.as_ref().map(|(a, b)| (a, b)), ensemble, weights, tau)
}
