//! Reverse-mode automatic differentiation on a tape of tensor operations.
//!
//! A [`Graph`] owns the tape. [`Var`] is a cheap handle (graph pointer plus
//! node id); building expressions out of `Var`s records nodes, and
//! [`Var::backward`] walks the tape in reverse. Gradients accumulate into
//! persistent per-leaf buffers, so calling `backward` twice on the same loss
//! doubles every leaf gradient exactly. Interior nodes use per-call scratch
//! buffers and keep no gradient state between calls.
//!
//! The operation vocabulary is deliberately small: exactly what an MLP
//! encoder with batch norm, L2-normalized embeddings, softmax assignment
//! probabilities and weighted cross-entropy losses needs.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Matmul(usize, usize),
    Transpose(usize),
    AddRow(usize, usize),
    MulRow(usize, usize),
    Relu(usize),
    L2NormalizeRows(usize, f64),
    SoftmaxRows(usize),
    LogClamped(usize, f64),
    Sum(usize),
    BatchNorm { x: usize, gamma: usize, beta: usize },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    /// Persistent gradient accumulator; populated for leaves only.
    grad: Option<Tensor>,
    /// Forward-pass tensors the backward pass reuses (op-specific).
    saved: Vec<Tensor>,
}

#[derive(Default)]
struct GraphInner {
    nodes: Vec<Node>,
}

/// Shared tape. Cloning is cheap and refers to the same tape.
#[derive(Clone, Default)]
pub struct Graph {
    inner: Rc<RefCell<GraphInner>>,
}

/// Handle to one node of a [`Graph`].
#[derive(Clone)]
pub struct Var {
    graph: Graph,
    id: usize,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool, saved: Vec<Tensor>) -> Var {
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node { value, op, requires_grad, grad: None, saved });
        Var { graph: self.clone(), id }
    }

    /// A differentiable input; gradients accumulate here.
    pub fn leaf(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true, Vec::new())
    }

    /// A non-differentiable input; backward never flows into it.
    pub fn constant(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false, Vec::new())
    }

    /// Number of nodes currently on the tape.
    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Clears every leaf's accumulated gradient.
    pub fn zero_grads(&self) {
        for node in self.inner.borrow_mut().nodes.iter_mut() {
            node.grad = None;
        }
    }
}

fn same_graph(a: &Var, b: &Var) -> Result<()> {
    if !Rc::ptr_eq(&a.graph.inner, &b.graph.inner) {
        return Err(Error::Shape("operands belong to different graphs".into()));
    }
    Ok(())
}

impl Var {
    pub fn id(&self) -> usize {
        self.id
    }

    /// The tape this variable lives on.
    pub fn graph(&self) -> Graph {
        self.graph.clone()
    }

    pub fn value(&self) -> Tensor {
        self.graph.inner.borrow().nodes[self.id].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.inner.borrow().nodes[self.id].value.shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.inner.borrow().nodes[self.id].requires_grad
    }

    /// Accumulated gradient of a leaf; zeros if backward has not reached it.
    pub fn grad(&self) -> Tensor {
        let inner = self.graph.inner.borrow();
        let node = &inner.nodes[self.id];
        match &node.grad {
            Some(g) => g.clone(),
            None => Tensor::zeros(node.value.shape()),
        }
    }

    fn unary(&self, value: Tensor, op: Op, saved: Vec<Tensor>) -> Var {
        let rg = self.requires_grad();
        self.graph.push(value, op, rg, saved)
    }

    fn binary(&self, other: &Var, value: Tensor, op: Op, saved: Vec<Tensor>) -> Var {
        let rg = self.requires_grad() || other.requires_grad();
        self.graph.push(value, op, rg, saved)
    }

    pub fn add(&self, other: &Var) -> Result<Var> {
        same_graph(self, other)?;
        let value = self.value().add(&other.value())?;
        Ok(self.binary(other, value, Op::Add(self.id, other.id), Vec::new()))
    }

    pub fn sub(&self, other: &Var) -> Result<Var> {
        same_graph(self, other)?;
        let value = self.value().sub(&other.value())?;
        Ok(self.binary(other, value, Op::Sub(self.id, other.id), Vec::new()))
    }

    pub fn mul_elem(&self, other: &Var) -> Result<Var> {
        same_graph(self, other)?;
        let value = self.value().mul_elem(&other.value())?;
        Ok(self.binary(other, value, Op::Mul(self.id, other.id), Vec::new()))
    }

    pub fn scale(&self, c: f64) -> Var {
        let value = self.value().scale(c);
        self.unary(value, Op::Scale(self.id, c), Vec::new())
    }

    pub fn matmul(&self, other: &Var) -> Result<Var> {
        same_graph(self, other)?;
        let value = self.value().matmul(&other.value())?;
        Ok(self.binary(other, value, Op::Matmul(self.id, other.id), Vec::new()))
    }

    pub fn transpose(&self) -> Result<Var> {
        let value = self.value().transpose()?;
        Ok(self.unary(value, Op::Transpose(self.id), Vec::new()))
    }

    /// Adds a `[n]` bias row to every row of a `[m, n]` tensor.
    pub fn add_row(&self, bias: &Var) -> Result<Var> {
        same_graph(self, bias)?;
        let value = self.value().add_row(&bias.value())?;
        Ok(self.binary(bias, value, Op::AddRow(self.id, bias.id), Vec::new()))
    }

    /// Multiplies every row of a `[m, n]` tensor by a `[n]` vector.
    pub fn mul_row(&self, scales: &Var) -> Result<Var> {
        same_graph(self, scales)?;
        let value = self.value().mul_row(&scales.value())?;
        Ok(self.binary(scales, value, Op::MulRow(self.id, scales.id), Vec::new()))
    }

    pub fn relu(&self) -> Var {
        let value = self.value().relu();
        self.unary(value, Op::Relu(self.id), Vec::new())
    }

    /// Row-wise L2 normalization; rows with norm below `eps` are divided by
    /// `eps` (a linear map there, so still differentiable).
    pub fn l2_normalize(&self, eps: f64) -> Result<Var> {
        let input = self.value();
        let value = input.l2_normalize(eps)?;
        let (rows, cols) = if input.shape().len() == 1 {
            (1, input.shape()[0])
        } else {
            (input.shape()[0], input.shape()[1])
        };
        let mut denoms = Vec::with_capacity(rows);
        for i in 0..rows {
            let norm = input.data()[i * cols..(i + 1) * cols]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            denoms.push(norm.max(eps));
        }
        let saved = vec![value.clone(), Tensor::vector(&denoms)];
        Ok(self.unary(value, Op::L2NormalizeRows(self.id, eps), saved))
    }

    pub fn softmax_rows(&self) -> Result<Var> {
        let value = self.value().softmax_rows()?;
        let saved = vec![value.clone()];
        Ok(self.unary(value, Op::SoftmaxRows(self.id), saved))
    }

    /// Natural log of `max(x, floor)` per element.
    pub fn log_clamped(&self, floor: f64) -> Var {
        let value = self.value().log_clamped(floor);
        self.unary(value, Op::LogClamped(self.id, floor), Vec::new())
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(&self) -> Var {
        let value = Tensor::scalar(self.value().sum());
        self.unary(value, Op::Sum(self.id), Vec::new())
    }

    /// Training-mode batch normalization over the rows of `[b, n]` input with
    /// per-column scale `gamma` and shift `beta` (both `[n]`).
    ///
    /// Uses per-batch mean and population variance. A single-row batch
    /// degrades to the affine map `gamma * x + beta`. Returns the output and,
    /// for multi-row batches, the batch `(mean, variance)` used, which the
    /// caller folds into running statistics.
    pub fn batch_norm(
        &self,
        gamma: &Var,
        beta: &Var,
        eps: f64,
    ) -> Result<(Var, Option<(Tensor, Tensor)>)> {
        same_graph(self, gamma)?;
        same_graph(self, beta)?;
        let x = self.value();
        let (b, n) = x.dims2()?;
        let g = gamma.value();
        let be = beta.value();
        if g.shape() != [n] || be.shape() != [n] {
            return Err(Error::Shape(format!(
                "batch_norm expects gamma/beta of shape [{}], got {:?} and {:?}",
                n,
                g.shape(),
                be.shape()
            )));
        }
        let rg = self.requires_grad() || gamma.requires_grad() || beta.requires_grad();
        let op = Op::BatchNorm { x: self.id, gamma: gamma.id, beta: beta.id };
        if b == 1 {
            let value = x.mul_row(&g)?.add_row(&be)?;
            let out = self.graph.push(value, op, rg, Vec::new());
            return Ok((out, None));
        }
        let mut mean = vec![0.0; n];
        for i in 0..b {
            for j in 0..n {
                mean[j] += x.at2(i, j);
            }
        }
        for m in mean.iter_mut() {
            *m /= b as f64;
        }
        let mut var = vec![0.0; n];
        for i in 0..b {
            for j in 0..n {
                let d = x.at2(i, j) - mean[j];
                var[j] += d * d;
            }
        }
        for v in var.iter_mut() {
            *v /= b as f64;
        }
        let std_inv: Vec<f64> = var.iter().map(|&v| 1.0 / (v + eps).sqrt()).collect();
        let mut xhat = vec![0.0; b * n];
        let mut out = vec![0.0; b * n];
        for i in 0..b {
            for j in 0..n {
                let h = (x.at2(i, j) - mean[j]) * std_inv[j];
                xhat[i * n + j] = h;
                out[i * n + j] = h * g.data()[j] + be.data()[j];
            }
        }
        let xhat = Tensor::new(vec![b, n], xhat)?;
        let value = Tensor::new(vec![b, n], out)?;
        let saved = vec![Tensor::vector(&std_inv), xhat];
        let out = self.graph.push(value, op, rg, saved);
        let stats = (Tensor::vector(&mean), Tensor::vector(&var));
        Ok((out, Some(stats)))
    }

    /// Reverse pass from a single-element output. Leaf gradients accumulate
    /// on top of whatever previous calls left there.
    pub fn backward(&self) -> Result<()> {
        let mut inner = self.graph.inner.borrow_mut();
        let nodes = &mut inner.nodes;
        if nodes[self.id].value.len() != 1 {
            return Err(Error::Shape(format!(
                "backward requires a single-element output, got shape {:?}",
                nodes[self.id].value.shape()
            )));
        }
        let mut local: Vec<Option<Tensor>> = vec![None; self.id + 1];
        local[self.id] = Some(Tensor::full(nodes[self.id].value.shape(), 1.0));

        fn accumulate(buf: &mut [Option<Tensor>], id: usize, t: Tensor) {
            match &mut buf[id] {
                Some(existing) => {
                    *existing = existing.add(&t).expect("gradient shape drift");
                }
                slot @ None => *slot = Some(t),
            }
        }

        for id in (0..=self.id).rev() {
            let g = match local[id].take() {
                Some(g) => g,
                None => continue,
            };
            let op = nodes[id].op.clone();
            match op {
                Op::Leaf => {
                    if nodes[id].requires_grad {
                        let node = &mut nodes[id];
                        node.grad = Some(match node.grad.take() {
                            Some(acc) => acc.add(&g)?,
                            None => g,
                        });
                    }
                }
                Op::Add(a, b) => {
                    if nodes[a].requires_grad {
                        accumulate(&mut local, a, g.clone());
                    }
                    if nodes[b].requires_grad {
                        accumulate(&mut local, b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if nodes[a].requires_grad {
                        accumulate(&mut local, a, g.clone());
                    }
                    if nodes[b].requires_grad {
                        accumulate(&mut local, b, g.scale(-1.0));
                    }
                }
                Op::Mul(a, b) => {
                    if nodes[a].requires_grad {
                        accumulate(&mut local, a, g.mul_elem(&nodes[b].value)?);
                    }
                    if nodes[b].requires_grad {
                        accumulate(&mut local, b, g.mul_elem(&nodes[a].value)?);
                    }
                }
                Op::Scale(a, c) => {
                    if nodes[a].requires_grad {
                        accumulate(&mut local, a, g.scale(c));
                    }
                }
                Op::Matmul(a, b) => {
                    if nodes[a].requires_grad {
                        let bt = nodes[b].value.transpose()?;
                        accumulate(&mut local, a, g.matmul(&bt)?);
                    }
                    if nodes[b].requires_grad {
                        let at = nodes[a].value.transpose()?;
                        accumulate(&mut local, b, at.matmul(&g)?);
                    }
                }
                Op::Transpose(a) => {
                    if nodes[a].requires_grad {
                        accumulate(&mut local, a, g.transpose()?);
                    }
                }
                Op::AddRow(x, bias) => {
                    if nodes[x].requires_grad {
                        accumulate(&mut local, x, g.clone());
                    }
                    if nodes[bias].requires_grad {
                        let (m, n) = g.dims2()?;
                        let mut db = vec![0.0; n];
                        for i in 0..m {
                            for j in 0..n {
                                db[j] += g.at2(i, j);
                            }
                        }
                        accumulate(&mut local, bias, Tensor::vector(&db));
                    }
                }
                Op::MulRow(x, scales) => {
                    if nodes[x].requires_grad {
                        accumulate(&mut local, x, g.mul_row(&nodes[scales].value)?);
                    }
                    if nodes[scales].requires_grad {
                        let (m, n) = g.dims2()?;
                        let xv = &nodes[x].value;
                        let mut ds = vec![0.0; n];
                        for i in 0..m {
                            for j in 0..n {
                                ds[j] += g.at2(i, j) * xv.at2(i, j);
                            }
                        }
                        accumulate(&mut local, scales, Tensor::vector(&ds));
                    }
                }
                Op::Relu(a) => {
                    if nodes[a].requires_grad {
                        let xv = &nodes[a].value;
                        let mut dg = g.clone();
                        for (d, &x) in dg.data_mut().iter_mut().zip(xv.data()) {
                            if x <= 0.0 {
                                *d = 0.0;
                            }
                        }
                        accumulate(&mut local, a, dg);
                    }
                }
                Op::L2NormalizeRows(a, _eps) => {
                    if nodes[a].requires_grad {
                        let y = &nodes[id].saved[0];
                        let denoms = &nodes[id].saved[1];
                        let shape = y.shape().to_vec();
                        let (rows, cols) = if shape.len() == 1 {
                            (1, shape[0])
                        } else {
                            (shape[0], shape[1])
                        };
                        let mut dx = vec![0.0; rows * cols];
                        for i in 0..rows {
                            let yr = &y.data()[i * cols..(i + 1) * cols];
                            let gr = &g.data()[i * cols..(i + 1) * cols];
                            let d = denoms.data()[i];
                            let dot: f64 = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                            for j in 0..cols {
                                dx[i * cols + j] = (gr[j] - yr[j] * dot) / d;
                            }
                        }
                        accumulate(&mut local, a, Tensor::new(shape, dx)?);
                    }
                }
                Op::SoftmaxRows(a) => {
                    if nodes[a].requires_grad {
                        let p = &nodes[id].saved[0];
                        let shape = p.shape().to_vec();
                        let (rows, cols) = if shape.len() == 1 {
                            (1, shape[0])
                        } else {
                            (shape[0], shape[1])
                        };
                        let mut dx = vec![0.0; rows * cols];
                        for i in 0..rows {
                            let pr = &p.data()[i * cols..(i + 1) * cols];
                            let gr = &g.data()[i * cols..(i + 1) * cols];
                            let dot: f64 = pr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                            for j in 0..cols {
                                dx[i * cols + j] = pr[j] * (gr[j] - dot);
                            }
                        }
                        accumulate(&mut local, a, Tensor::new(shape, dx)?);
                    }
                }
                Op::LogClamped(a, floor) => {
                    if nodes[a].requires_grad {
                        let xv = &nodes[a].value;
                        let mut dg = g.clone();
                        for (d, &x) in dg.data_mut().iter_mut().zip(xv.data()) {
                            if x > floor {
                                *d /= x;
                            } else {
                                *d = 0.0;
                            }
                        }
                        accumulate(&mut local, a, dg);
                    }
                }
                Op::Sum(a) => {
                    if nodes[a].requires_grad {
                        let gv = g.item();
                        accumulate(&mut local, a, Tensor::full(nodes[a].value.shape(), gv));
                    }
                }
                Op::BatchNorm { x, gamma, beta } => {
                    let single_row = nodes[id].saved.is_empty();
                    if single_row {
                        // Output was gamma * x + beta per row.
                        let xv = nodes[x].value.clone();
                        let gv = nodes[gamma].value.clone();
                        let (_, n) = xv.dims2()?;
                        if nodes[x].requires_grad {
                            accumulate(&mut local, x, g.mul_row(&gv)?);
                        }
                        if nodes[gamma].requires_grad {
                            let mut dgm = vec![0.0; n];
                            for j in 0..n {
                                dgm[j] = g.at2(0, j) * xv.at2(0, j);
                            }
                            accumulate(&mut local, gamma, Tensor::vector(&dgm));
                        }
                        if nodes[beta].requires_grad {
                            let db: Vec<f64> = (0..n).map(|j| g.at2(0, j)).collect();
                            accumulate(&mut local, beta, Tensor::vector(&db));
                        }
                    } else {
                        let std_inv = nodes[id].saved[0].clone();
                        let xhat = nodes[id].saved[1].clone();
                        let gv = nodes[gamma].value.clone();
                        let (b, n) = xhat.dims2()?;
                        if nodes[gamma].requires_grad {
                            let mut dgm = vec![0.0; n];
                            for i in 0..b {
                                for j in 0..n {
                                    dgm[j] += g.at2(i, j) * xhat.at2(i, j);
                                }
                            }
                            accumulate(&mut local, gamma, Tensor::vector(&dgm));
                        }
                        if nodes[beta].requires_grad {
                            let mut db = vec![0.0; n];
                            for i in 0..b {
                                for j in 0..n {
                                    db[j] += g.at2(i, j);
                                }
                            }
                            accumulate(&mut local, beta, Tensor::vector(&db));
                        }
                        if nodes[x].requires_grad {
                            // dxhat = g * gamma; dx folds the mean and
                            // variance paths into the standard fused form.
                            let mut sum_dh = vec![0.0; n];
                            let mut sum_dh_h = vec![0.0; n];
                            for i in 0..b {
                                for j in 0..n {
                                    let dh = g.at2(i, j) * gv.data()[j];
                                    sum_dh[j] += dh;
                                    sum_dh_h[j] += dh * xhat.at2(i, j);
                                }
                            }
                            let bf = b as f64;
                            let mut dx = vec![0.0; b * n];
                            for i in 0..b {
                                for j in 0..n {
                                    let dh = g.at2(i, j) * gv.data()[j];
                                    dx[i * n + j] = std_inv.data()[j] / bf
                                        * (bf * dh - sum_dh[j] - xhat.at2(i, j) * sum_dh_h[j]);
                                }
                            }
                            accumulate(&mut local, x, Tensor::new(vec![b, n], dx)?);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Central-difference gradient of a scalar function, for checking analytic
/// gradients. The step for coordinate `i` is `step * max(1, |x[i]|)`.
pub fn central_difference<F>(mut f: F, x: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut xs = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = step * x[i].abs().max(1.0);
        let orig = xs[i];
        xs[i] = orig + h;
        let fp = f(&xs);
        xs[i] = orig - h;
        let fm = f(&xs);
        xs[i] = orig;
        grad.push((fp - fm) / (2.0 * h));
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn quadratic_gradient_is_exact() {
        // f(x) = sum(x*x), df/dx = 2x.
        let g = Graph::new();
        let x = g.leaf(Tensor::vector(&[1.5, -2.0, 0.25]));
        let f = x.mul_elem(&x).unwrap().sum();
        f.backward().unwrap();
        assert_eq!(x.grad().data(), &[3.0, -4.0, 0.5]);
    }

    #[test]
    fn repeated_backward_accumulates_exactly() {
        let g = Graph::new();
        let x = g.leaf(Tensor::vector(&[2.0, 3.0]));
        let f = x.mul_elem(&x).unwrap().sum();
        f.backward().unwrap();
        f.backward().unwrap();
        assert_eq!(x.grad().data(), &[8.0, 12.0]);
        g.zero_grads();
        f.backward().unwrap();
        assert_eq!(x.grad().data(), &[4.0, 6.0]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let g = Graph::new();
        let x = g.leaf(Tensor::vector(&[1.0, 2.0]));
        let c = g.constant(Tensor::vector(&[5.0, 7.0]));
        let f = x.mul_elem(&c).unwrap().sum();
        f.backward().unwrap();
        assert_eq!(x.grad().data(), &[5.0, 7.0]);
        assert_eq!(c.grad().data(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let g = Graph::new();
        let x = g.leaf(Tensor::vector(&[1.0, 2.0]));
        assert!(x.backward().is_err());
    }

    #[test]
    fn sub_scale_chain_gradient() {
        // f = sum(3 * (x - y)), df/dx = 3, df/dy = -3.
        let g = Graph::new();
        let x = g.leaf(Tensor::vector(&[1.0, 4.0]));
        let y = g.leaf(Tensor::vector(&[2.0, 2.0]));
        let f = x.sub(&y).unwrap().scale(3.0).sum();
        f.backward().unwrap();
        assert_eq!(x.grad().data(), &[3.0, 3.0]);
        assert_eq!(y.grad().data(), &[-3.0, -3.0]);
    }

    /// Runs central differences over every leaf of a scalar expression built
    /// by `build` from flat parameter slices, and compares.
    fn check_gradients(shapes: &[Vec<usize>], init: &[Vec<f64>], build: &dyn Fn(&[Var]) -> Var) {
        let g = Graph::new();
        let leaves: Vec<Var> = shapes
            .iter()
            .zip(init)
            .map(|(s, d)| g.leaf(Tensor::new(s.clone(), d.clone()).unwrap()))
            .collect();
        let out = build(&leaves);
        out.backward().unwrap();
        for (pi, leaf) in leaves.iter().enumerate() {
            let analytic = leaf.grad();
            let numeric = central_difference(
                |xs| {
                    let g2 = Graph::new();
                    let vars: Vec<Var> = shapes
                        .iter()
                        .enumerate()
                        .map(|(qi, s)| {
                            let data = if qi == pi { xs.to_vec() } else { init[qi].clone() };
                            g2.leaf(Tensor::new(s.clone(), data).unwrap())
                        })
                        .collect();
                    build(&vars).value().item()
                },
                &init[pi],
                1e-5,
            );
            for (j, (&a, &n)) in analytic.data().iter().zip(&numeric).enumerate() {
                assert!(
                    rel_err(a, n) < 1e-6 || (a - n).abs() < 1e-8,
                    "leaf {pi} entry {j}: analytic {a} vs numeric {n}"
                );
            }
        }
    }

    #[test]
    fn mlp_style_chain_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut rand_vec = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let shapes = vec![vec![4, 3], vec![2, 3], vec![2], vec![3, 4]];
        let init = vec![rand_vec(12), rand_vec(6), rand_vec(2), rand_vec(12)];
        check_gradients(&shapes, &init, &|vars| {
            // x[3,4] @ w1[4,3] -> relu -> @ w2t[3,2] -> +bias -> softmax
            // -> log -> sum
            let (w1, w2, b, x) = (&vars[0], &vars[1], &vars[2], &vars[3]);
            let h = x.matmul(w1).unwrap().relu();
            let y = h.matmul(&w2.transpose().unwrap()).unwrap().add_row(b).unwrap();
            let p = y.softmax_rows().unwrap();
            p.log_clamped(1e-12).mul_elem(&p).unwrap().sum()
        });
    }

    #[test]
    fn l2_normalize_matches_finite_differences() {
        let shapes = vec![vec![3, 4]];
        let init = vec![vec![
            0.3, -1.2, 0.5, 2.0, -0.7, 0.1, 0.9, -0.4, 1.1, 0.6, -1.5, 0.2,
        ]];
        check_gradients(&shapes, &init, &|vars| {
            let y = vars[0].l2_normalize(1e-12).unwrap();
            // Weighted sum so the gradient is row-asymmetric.
            let w = vars[0].graph.constant(
                Tensor::new(
                    vec![3, 4],
                    (0..12).map(|i| 0.1 * (i as f64) - 0.5).collect(),
                )
                .unwrap(),
            );
            y.mul_elem(&w).unwrap().sum()
        });
    }

    #[test]
    fn l2_normalize_below_eps_uses_linear_branch() {
        // For ||x|| < eps the forward pass divides by eps, so the gradient of
        // sum(normalize(x)) is exactly 1/eps per coordinate.
        let g = Graph::new();
        let eps = 1e-12;
        let x = g.leaf(Tensor::vector(&[0.0, 0.0]));
        let f = x.l2_normalize(eps).unwrap().sum();
        f.backward().unwrap();
        for &v in x.grad().data() {
            assert_eq!(v, 1.0 / eps);
        }
    }

    #[test]
    fn softmax_rows_matches_finite_differences() {
        let shapes = vec![vec![2, 5]];
        let init = vec![vec![0.5, -0.3, 1.2, 0.0, -1.0, 2.0, 0.1, -0.8, 0.4, 0.9]];
        check_gradients(&shapes, &init, &|vars| {
            let p = vars[0].softmax_rows().unwrap();
            let w = vars[0].graph.constant(
                Tensor::new(vec![2, 5], (0..10).map(|i| (i as f64) * 0.3 - 1.0).collect())
                    .unwrap(),
            );
            p.mul_elem(&w).unwrap().sum()
        });
    }

    #[test]
    fn batch_norm_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..20).map(|_| rng.random_range(-2.0..2.0)).collect();
        let shapes = vec![vec![5, 4], vec![4], vec![4]];
        let init = vec![x, vec![1.2, 0.8, -0.5, 1.0], vec![0.1, -0.2, 0.3, 0.0]];
        check_gradients(&shapes, &init, &|vars| {
            let (y, _) = vars[0].batch_norm(&vars[1], &vars[2], 1e-5).unwrap();
            let w = vars[0].graph.constant(
                Tensor::new(vec![5, 4], (0..20).map(|i| (i as f64) * 0.17 - 1.3).collect())
                    .unwrap(),
            );
            y.relu().mul_elem(&w).unwrap().sum()
        });
    }

    #[test]
    fn batch_norm_single_row_is_affine() {
        let g = Graph::new();
        let x = g.leaf(Tensor::new(vec![1, 3], vec![1.0, -2.0, 3.0]).unwrap());
        let gamma = g.leaf(Tensor::vector(&[2.0, 3.0, 4.0]));
        let beta = g.leaf(Tensor::vector(&[0.5, 0.0, -0.5]));
        let (y, stats) = x.batch_norm(&gamma, &beta, 1e-5).unwrap();
        assert!(stats.is_none());
        assert_eq!(y.value().data(), &[2.5, -6.0, 11.5]);
        y.sum().backward().unwrap();
        assert_eq!(x.grad().data(), &[2.0, 3.0, 4.0]);
        assert_eq!(gamma.grad().data(), &[1.0, -2.0, 3.0]);
        assert_eq!(beta.grad().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn batch_norm_output_is_standardized() {
        let g = Graph::new();
        let x = g.leaf(Tensor::new(vec![4, 2], vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0]).unwrap());
        let gamma = g.constant(Tensor::vector(&[1.0, 1.0]));
        let beta = g.constant(Tensor::vector(&[0.0, 0.0]));
        let (y, stats) = x.batch_norm(&gamma, &beta, 0.0).unwrap();
        let (mean, var) = stats.unwrap();
        assert_eq!(mean.data(), &[2.5, 25.0]);
        assert_eq!(var.data(), &[1.25, 125.0]);
        let yv = y.value();
        for j in 0..2 {
            let col: Vec<f64> = (0..4).map(|i| yv.at2(i, j)).collect();
            let m: f64 = col.iter().sum::<f64>() / 4.0;
            let v: f64 = col.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / 4.0;
            assert!(m.abs() < 1e-12);
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn matmul_through_shared_leaf_accumulates_both_paths() {
        // f = sum(x @ x^T): gradient check on a leaf that is used twice.
        let shapes = vec![vec![3, 3]];
        let init = vec![vec![0.5, -0.1, 0.3, 0.2, 0.7, -0.6, -0.4, 0.9, 0.1]];
        check_gradients(&shapes, &init, &|vars| {
            let xt = vars[0].transpose().unwrap();
            vars[0].matmul(&xt).unwrap().sum()
        });
    }
}
