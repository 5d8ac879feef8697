//! Reverse-mode automatic differentiation over f64 matrices.
//!
//! A `Tape` records every operation; `backward` walks the record in reverse
//! accumulating exact gradients. Everything is two-dimensional: vectors are
//! 1xN rows. No broadcasting beyond row-vector bias addition, so each
//! backward rule stays auditable.

use std::cell::RefCell;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TapeError {
    #[error("shape mismatch in {op}: {a:?} vs {b:?}")]
    Shape {
        op: &'static str,
        a: (usize, usize),
        b: (usize, usize),
    },
    #[error("backward root must be a scalar, got {0:?}")]
    NotScalar((usize, usize)),
}

/// Handle to a value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tensor {
    pub id: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Tensor {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

enum Op {
    Leaf,
    /// A x B
    MatMul(usize, usize),
    /// A x B^T
    MatMulT(usize, usize),
    Add(usize, usize),
    /// Matrix plus a broadcast row vector.
    AddRow(usize, usize),
    Mul(usize, usize),
    /// a*x + b elementwise; the offset is baked into the forward
    /// value and has zero gradient.
    Affine(usize, f64, #[allow(dead_code)] f64),
    Relu(usize),
    Tanh(usize),
    Sigmoid(usize),
    Exp(usize),
    Softmax(usize),
    SumAll(usize),
    SumRows(usize),
    ConcatCols(Vec<usize>),
    SelectRows(usize, Vec<usize>),
    /// Same data, new dimensions.
    Reshape(usize),
    /// Negative log softmax of a row of logits at a target index.
    NllLogits(usize, usize),
    /// Binary cross entropy on a scalar logit against a 0/1 target.
    BceLogit(usize, f64),
}

struct Node {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    grad: Vec<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, rows: usize, cols: usize, data: Vec<f64>, op: Op) -> Tensor {
        debug_assert_eq!(data.len(), rows * cols);
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        let grad = vec![0.0; data.len()];
        nodes.push(Node {
            rows,
            cols,
            data,
            grad,
            op,
        });
        Tensor { id, rows, cols }
    }

    pub fn leaf(&self, rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        self.push(rows, cols, data, Op::Leaf)
    }

    pub fn scalar(&self, v: f64) -> Tensor {
        self.leaf(1, 1, vec![v])
    }

    pub fn zeros(&self, rows: usize, cols: usize) -> Tensor {
        self.leaf(rows, cols, vec![0.0; rows * cols])
    }

    pub fn value(&self, t: Tensor) -> Vec<f64> {
        self.nodes.borrow()[t.id].data.clone()
    }

    pub fn scalar_value(&self, t: Tensor) -> f64 {
        self.nodes.borrow()[t.id].data[0]
    }

    pub fn grad(&self, t: Tensor) -> Vec<f64> {
        self.nodes.borrow()[t.id].grad.clone()
    }

    fn data_of(&self, id: usize) -> (usize, usize, Vec<f64>) {
        let nodes = self.nodes.borrow();
        let n = &nodes[id];
        (n.rows, n.cols, n.data.clone())
    }

    pub fn matmul(&self, a: Tensor, b: Tensor) -> Result<Tensor, TapeError> {
        if a.cols != b.rows {
            return Err(TapeError::Shape {
                op: "matmul",
                a: a.shape(),
                b: b.shape(),
            });
        }
        let (_, _, da) = self.data_of(a.id);
        let (_, _, db) = self.data_of(b.id);
        let mut out = vec![0.0; a.rows * b.cols];
        for i in 0..a.rows {
            for k in 0..a.cols {
                let aik = da[i * a.cols + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..b.cols {
                    out[i * b.cols + j] += aik * db[k * b.cols + j];
                }
            }
        }
        Ok(self.push(a.rows, b.cols, out, Op::MatMul(a.id, b.id)))
    }

    /// x · Wᵀ — the usual "apply weight matrix [out, in] to row vector".
    pub fn matmul_t(&self, a: Tensor, w: Tensor) -> Result<Tensor, TapeError> {
        if a.cols != w.cols {
            return Err(TapeError::Shape {
                op: "matmul_t",
                a: a.shape(),
                b: w.shape(),
            });
        }
        let (_, _, da) = self.data_of(a.id);
        let (_, _, dw) = self.data_of(w.id);
        let mut out = vec![0.0; a.rows * w.rows];
        for i in 0..a.rows {
            for o in 0..w.rows {
                let mut acc = 0.0;
                for k in 0..a.cols {
                    acc += da[i * a.cols + k] * dw[o * w.cols + k];
                }
                out[i * w.rows + o] = acc;
            }
        }
        Ok(self.push(a.rows, w.rows, out, Op::MatMulT(a.id, w.id)))
    }

    pub fn add(&self, a: Tensor, b: Tensor) -> Result<Tensor, TapeError> {
        if a.shape() != b.shape() {
            return Err(TapeError::Shape {
                op: "add",
                a: a.shape(),
                b: b.shape(),
            });
        }
        let (_, _, da) = self.data_of(a.id);
        let (_, _, db) = self.data_of(b.id);
        let out = da.iter().zip(&db).map(|(x, y)| x + y).collect();
        Ok(self.push(a.rows, a.cols, out, Op::Add(a.id, b.id)))
    }

    /// Adds a [1, c] bias row to every row of a.
    pub fn add_row(&self, a: Tensor, bias: Tensor) -> Result<Tensor, TapeError> {
        if bias.rows != 1 || bias.cols != a.cols {
            return Err(TapeError::Shape {
                op: "add_row",
                a: a.shape(),
                b: bias.shape(),
            });
        }
        let (_, _, da) = self.data_of(a.id);
        let (_, _, db) = self.data_of(bias.id);
        let mut out = da.clone();
        for i in 0..a.rows {
            for j in 0..a.cols {
                out[i * a.cols + j] += db[j];
            }
        }
        Ok(self.push(a.rows, a.cols, out, Op::AddRow(a.id, bias.id)))
    }

    pub fn mul(&self, a: Tensor, b: Tensor) -> Result<Tensor, TapeError> {
        if a.shape() != b.shape() {
            return Err(TapeError::Shape {
                op: "mul",
                a: a.shape(),
                b: b.shape(),
            });
        }
        let (_, _, da) = self.data_of(a.id);
        let (_, _, db) = self.data_of(b.id);
        let out = da.iter().zip(&db).map(|(x, y)| x * y).collect();
        Ok(self.push(a.rows, a.cols, out, Op::Mul(a.id, b.id)))
    }

    /// a*x + b, elementwise constants.
    pub fn affine(&self, x: Tensor, a: f64, b: f64) -> Tensor {
        let (_, _, dx) = self.data_of(x.id);
        let out = dx.iter().map(|v| a * v + b).collect();
        self.push(x.rows, x.cols, out, Op::Affine(x.id, a, b))
    }

    pub fn scale(&self, x: Tensor, a: f64) -> Tensor {
        self.affine(x, a, 0.0)
    }

    pub fn relu(&self, x: Tensor) -> Tensor {
        let (_, _, dx) = self.data_of(x.id);
        let out = dx.iter().map(|v| v.max(0.0)).collect();
        self.push(x.rows, x.cols, out, Op::Relu(x.id))
    }

    pub fn tanh(&self, x: Tensor) -> Tensor {
        let (_, _, dx) = self.data_of(x.id);
        let out = dx.iter().map(|v| v.tanh()).collect();
        self.push(x.rows, x.cols, out, Op::Tanh(x.id))
    }

    pub fn sigmoid(&self, x: Tensor) -> Tensor {
        let (_, _, dx) = self.data_of(x.id);
        let out = dx
            .iter()
            .map(|v| 1.0 / (1.0 + (-v).exp()))
            .collect();
        self.push(x.rows, x.cols, out, Op::Sigmoid(x.id))
    }

    pub fn exp(&self, x: Tensor) -> Tensor {
        let (_, _, dx) = self.data_of(x.id);
        let out = dx.iter().map(|v| v.exp()).collect();
        self.push(x.rows, x.cols, out, Op::Exp(x.id))
    }

    /// Row-wise softmax, numerically stabilized.
    pub fn softmax(&self, x: Tensor) -> Tensor {
        let (_, _, dx) = self.data_of(x.id);
        let mut out = vec![0.0; dx.len()];
        for r in 0..x.rows {
            let row = &dx[r * x.cols..(r + 1) * x.cols];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|v| (v - mx).exp()).collect();
            let z: f64 = exps.iter().sum();
            for (j, e) in exps.iter().enumerate() {
                out[r * x.cols + j] = e / z;
            }
        }
        self.push(x.rows, x.cols, out, Op::Softmax(x.id))
    }

    pub fn sum_all(&self, x: Tensor) -> Tensor {
        let (_, _, dx) = self.data_of(x.id);
        let s: f64 = dx.iter().sum();
        self.push(1, 1, vec![s], Op::SumAll(x.id))
    }

    /// Column sums: [r, c] -> [1, c].
    pub fn sum_rows(&self, x: Tensor) -> Tensor {
        let (_, _, dx) = self.data_of(x.id);
        let mut out = vec![0.0; x.cols];
        for r in 0..x.rows {
            for j in 0..x.cols {
                out[j] += dx[r * x.cols + j];
            }
        }
        self.push(1, x.cols, out, Op::SumRows(x.id))
    }

    /// Concatenates along columns; all inputs must share the row count.
    pub fn concat_cols(&self, xs: &[Tensor]) -> Result<Tensor, TapeError> {
        assert!(!xs.is_empty());
        let rows = xs[0].rows;
        for x in xs {
            if x.rows != rows {
                return Err(TapeError::Shape {
                    op: "concat_cols",
                    a: xs[0].shape(),
                    b: x.shape(),
                });
            }
        }
        let total: usize = xs.iter().map(|x| x.cols).sum();
        let mut out = vec![0.0; rows * total];
        let mut col0 = 0;
        for x in xs {
            let (_, _, dx) = self.data_of(x.id);
            for r in 0..rows {
                for j in 0..x.cols {
                    out[r * total + col0 + j] = dx[r * x.cols + j];
                }
            }
            col0 += x.cols;
        }
        Ok(self.push(
            rows,
            total,
            out,
            Op::ConcatCols(xs.iter().map(|x| x.id).collect()),
        ))
    }

    /// Gathers rows (embedding lookup).
    pub fn select_rows(&self, x: Tensor, idx: &[usize]) -> Tensor {
        let (_, _, dx) = self.data_of(x.id);
        let mut out = vec![0.0; idx.len() * x.cols];
        for (r, &i) in idx.iter().enumerate() {
            out[r * x.cols..(r + 1) * x.cols]
                .copy_from_slice(&dx[i * x.cols..(i + 1) * x.cols]);
        }
        self.push(idx.len(), x.cols, out, Op::SelectRows(x.id, idx.to_vec()))
    }

    pub fn row(&self, x: Tensor, i: usize) -> Tensor {
        self.select_rows(x, &[i])
    }

    /// Reinterprets the buffer with new dimensions (row-major, same length).
    pub fn reshape(&self, x: Tensor, rows: usize, cols: usize) -> Result<Tensor, TapeError> {
        if rows * cols != x.len() {
            return Err(TapeError::Shape {
                op: "reshape",
                a: x.shape(),
                b: (rows, cols),
            });
        }
        let (_, _, dx) = self.data_of(x.id);
        Ok(self.push(rows, cols, dx, Op::Reshape(x.id)))
    }

    /// -log softmax(logits)[target] for a single row of logits.
    pub fn nll_logits(&self, logits: Tensor, target: usize) -> Result<Tensor, TapeError> {
        if logits.rows != 1 {
            return Err(TapeError::Shape {
                op: "nll_logits",
                a: logits.shape(),
                b: (1, logits.cols),
            });
        }
        let (_, _, d) = self.data_of(logits.id);
        let mx = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + d.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
        let loss = lse - d[target];
        Ok(self.push(1, 1, vec![loss], Op::NllLogits(logits.id, target)))
    }

    /// Stable binary cross entropy on a scalar logit.
    pub fn bce_logit(&self, logit: Tensor, target: f64) -> Result<Tensor, TapeError> {
        if logit.shape() != (1, 1) {
            return Err(TapeError::Shape {
                op: "bce_logit",
                a: logit.shape(),
                b: (1, 1),
            });
        }
        let x = self.scalar_value(logit);
        let loss = x.max(0.0) - x * target + (1.0 + (-x.abs()).exp()).ln();
        Ok(self.push(1, 1, vec![loss], Op::BceLogit(logit.id, target)))
    }

    /// Sums a list of scalars (empty list is a fresh zero).
    pub fn sum_scalars(&self, xs: &[Tensor]) -> Result<Tensor, TapeError> {
        match xs.split_first() {
            None => Ok(self.scalar(0.0)),
            Some((&first, rest)) => {
                let mut acc = first;
                for &x in rest {
                    acc = self.add(acc, x)?;
                }
                Ok(acc)
            }
        }
    }

    /// Reverse pass from a scalar root; gradients accumulate on every node.
    pub fn backward(&self, root: Tensor) -> Result<(), TapeError> {
        if root.shape() != (1, 1) {
            return Err(TapeError::NotScalar(root.shape()));
        }
        let mut nodes = self.nodes.borrow_mut();
        for n in nodes.iter_mut() {
            for g in n.grad.iter_mut() {
                *g = 0.0;
            }
        }
        nodes[root.id].grad[0] = 1.0;

        for id in (0..=root.id).rev() {
            let (rows, cols, grad) = {
                let n = &nodes[id];
                if n.grad.iter().all(|&g| g == 0.0) {
                    continue;
                }
                (n.rows, n.cols, n.grad.clone())
            };
            match &nodes[id].op {
                Op::Leaf => {}
                &Op::MatMul(a, b) => {
                    let (ar, ac, da) = node_data(&nodes, a);
                    let (_, bc, db) = node_data(&nodes, b);
                    // dA += dC · Bᵀ ; dB += Aᵀ · dC
                    for i in 0..ar {
                        for k in 0..ac {
                            let mut acc = 0.0;
                            for j in 0..bc {
                                acc += grad[i * bc + j] * db[k * bc + j];
                            }
                            nodes[a].grad[i * ac + k] += acc;
                        }
                    }
                    for k in 0..ac {
                        for j in 0..bc {
                            let mut acc = 0.0;
                            for i in 0..ar {
                                acc += da[i * ac + k] * grad[i * bc + j];
                            }
                            nodes[b].grad[k * bc + j] += acc;
                        }
                    }
                }
                &Op::MatMulT(a, w) => {
                    let (ar, ac, da) = node_data(&nodes, a);
                    let (wr, _, dw) = node_data(&nodes, w);
                    // C = A·Wᵀ: dA += dC·W ; dW += dCᵀ·A
                    for i in 0..ar {
                        for k in 0..ac {
                            let mut acc = 0.0;
                            for o in 0..wr {
                                acc += grad[i * wr + o] * dw[o * ac + k];
                            }
                            nodes[a].grad[i * ac + k] += acc;
                        }
                    }
                    for o in 0..wr {
                        for k in 0..ac {
                            let mut acc = 0.0;
                            for i in 0..ar {
                                acc += grad[i * wr + o] * da[i * ac + k];
                            }
                            nodes[w].grad[o * ac + k] += acc;
                        }
                    }
                }
                &Op::Add(a, b) => {
                    for (i, &g) in grad.iter().enumerate() {
                        nodes[a].grad[i] += g;
                    }
                    for (i, &g) in grad.iter().enumerate() {
                        nodes[b].grad[i] += g;
                    }
                }
                &Op::AddRow(a, bias) => {
                    for (i, &g) in grad.iter().enumerate() {
                        nodes[a].grad[i] += g;
                    }
                    for r in 0..rows {
                        for j in 0..cols {
                            nodes[bias].grad[j] += grad[r * cols + j];
                        }
                    }
                }
                &Op::Mul(a, b) => {
                    let (_, _, da) = node_data(&nodes, a);
                    let (_, _, db) = node_data(&nodes, b);
                    for (i, &g) in grad.iter().enumerate() {
                        nodes[a].grad[i] += g * db[i];
                    }
                    for (i, &g) in grad.iter().enumerate() {
                        nodes[b].grad[i] += g * da[i];
                    }
                }
                &Op::Affine(a, k, _) => {
                    for (i, &g) in grad.iter().enumerate() {
                        nodes[a].grad[i] += g * k;
                    }
                }
                &Op::Relu(a) => {
                    let (_, _, da) = node_data(&nodes, a);
                    for (i, &g) in grad.iter().enumerate() {
                        if da[i] > 0.0 {
                            nodes[a].grad[i] += g;
                        }
                    }
                }
                &Op::Tanh(a) => {
                    let y = nodes[id].data.clone();
                    for (i, &g) in grad.iter().enumerate() {
                        nodes[a].grad[i] += g * (1.0 - y[i] * y[i]);
                    }
                }
                &Op::Sigmoid(a) => {
                    let y = nodes[id].data.clone();
                    for (i, &g) in grad.iter().enumerate() {
                        nodes[a].grad[i] += g * y[i] * (1.0 - y[i]);
                    }
                }
                &Op::Exp(a) => {
                    let y = nodes[id].data.clone();
                    for (i, &g) in grad.iter().enumerate() {
                        nodes[a].grad[i] += g * y[i];
                    }
                }
                &Op::Softmax(a) => {
                    let y = nodes[id].data.clone();
                    for r in 0..rows {
                        let row = &y[r * cols..(r + 1) * cols];
                        let grow = &grad[r * cols..(r + 1) * cols];
                        let dot: f64 = row.iter().zip(grow).map(|(v, g)| v * g).sum();
                        for j in 0..cols {
                            nodes[a].grad[r * cols + j] += row[j] * (grow[j] - dot);
                        }
                    }
                }
                &Op::SumAll(a) => {
                    let g = grad[0];
                    for ga in nodes[a].grad.iter_mut() {
                        *ga += g;
                    }
                }
                &Op::SumRows(a) => {
                    let (ar, ac, _) = node_data(&nodes, a);
                    for r in 0..ar {
                        for j in 0..ac {
                            nodes[a].grad[r * ac + j] += grad[j];
                        }
                    }
                }
                Op::ConcatCols(parts) => {
                    let parts = parts.clone();
                    let mut col0 = 0;
                    for pid in parts {
                        let (pr, pc, _) = node_data(&nodes, pid);
                        for r in 0..pr {
                            for j in 0..pc {
                                nodes[pid].grad[r * pc + j] += grad[r * cols + col0 + j];
                            }
                        }
                        col0 += pc;
                    }
                }
                Op::SelectRows(src, idx) => {
                    let (src, idx) = (*src, idx.clone());
                    let (_, sc, _) = node_data(&nodes, src);
                    for (r, &i) in idx.iter().enumerate() {
                        for j in 0..sc {
                            nodes[src].grad[i * sc + j] += grad[r * cols + j];
                        }
                    }
                }
                &Op::Reshape(a) => {
                    for (i, &g) in grad.iter().enumerate() {
                        nodes[a].grad[i] += g;
                    }
                }
                &Op::NllLogits(a, target) => {
                    let (_, ac, da) = node_data(&nodes, a);
                    let mx = da.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = da.iter().map(|v| (v - mx).exp()).collect();
                    let z: f64 = exps.iter().sum();
                    let g = grad[0];
                    for j in 0..ac {
                        let p = exps[j] / z;
                        let onehot = if j == target { 1.0 } else { 0.0 };
                        nodes[a].grad[j] += g * (p - onehot);
                    }
                }
                &Op::BceLogit(a, target) => {
                    let (_, _, da) = node_data(&nodes, a);
                    let s = 1.0 / (1.0 + (-da[0]).exp());
                    nodes[a].grad[0] += grad[0] * (s - target);
                }
            }
        }
        Ok(())
    }
}

fn node_data(nodes: &[Node], id: usize) -> (usize, usize, Vec<f64>) {
    let n = &nodes[id];
    (n.rows, n.cols, n.data.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_and_softmax_values() {
        let t = Tape::new();
        let x = t.leaf(1, 2, vec![-1.0, 2.0]);
        let y = t.relu(x);
        assert_eq!(t.value(y), vec![0.0, 2.0]);

        let u = t.leaf(1, 4, vec![0.5, 0.5, 0.5, 0.5]);
        let s = t.softmax(u);
        for v in t.value(s) {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn matmul_grad_matches_finite_difference() {
        // Central differences with h = 1e-5 on a random 4x5 · 5x3 product.
        let mut seed = 0x12345u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed as f64 / u64::MAX as f64) - 0.5
        };
        let a_data: Vec<f64> = (0..20).map(|_| next()).collect();
        let b_data: Vec<f64> = (0..15).map(|_| next()).collect();

        let loss_fn = |a_data: &[f64], b_data: &[f64]| -> f64 {
            let t = Tape::new();
            let a = t.leaf(4, 5, a_data.to_vec());
            let b = t.leaf(5, 3, b_data.to_vec());
            let c = t.matmul(a, b).unwrap();
            let c2 = t.mul(c, c).unwrap();
            t.scalar_value(t.sum_all(c2))
        };

        let t = Tape::new();
        let a = t.leaf(4, 5, a_data.clone());
        let b = t.leaf(5, 3, b_data.clone());
        let c = t.matmul(a, b).unwrap();
        let c2 = t.mul(c, c).unwrap();
        let loss = t.sum_all(c2);
        t.backward(loss).unwrap();

        let h = 1e-5;
        let ga = t.grad(a);
        for i in 0..a_data.len() {
            let mut plus = a_data.clone();
            plus[i] += h;
            let mut minus = a_data.clone();
            minus[i] -= h;
            let num = (loss_fn(&plus, &b_data) - loss_fn(&minus, &b_data)) / (2.0 * h);
            let rel = (ga[i] - num).abs() / num.abs().max(1.0);
            assert!(rel < 1e-6, "a[{i}]: analytic {} vs numeric {num}", ga[i]);
        }
        let gb = t.grad(b);
        for i in 0..b_data.len() {
            let mut plus = b_data.clone();
            plus[i] += h;
            let mut minus = b_data.clone();
            minus[i] -= h;
            let num = (loss_fn(&a_data, &plus) - loss_fn(&a_data, &minus)) / (2.0 * h);
            let rel = (gb[i] - num).abs() / num.abs().max(1.0);
            assert!(rel < 1e-6, "b[{i}]: analytic {} vs numeric {num}", gb[i]);
        }
    }

    #[test]
    fn shape_errors_report_both_shapes() {
        let t = Tape::new();
        let a = t.zeros(2, 3);
        let b = t.zeros(2, 3);
        match t.matmul(a, b) {
            Err(TapeError::Shape { a, b, .. }) => {
                assert_eq!(a, (2, 3));
                assert_eq!(b, (2, 3));
            }
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn nll_and_bce_gradients() {
        let t = Tape::new();
        let logits = t.leaf(1, 3, vec![0.2, -0.1, 0.5]);
        let loss = t.nll_logits(logits, 2).unwrap();
        t.backward(loss).unwrap();
        let g = t.grad(logits);
        // Gradient sums to zero and is softmax - onehot.
        assert!((g.iter().sum::<f64>()).abs() < 1e-12);
        assert!(g[2] < 0.0);

        let t2 = Tape::new();
        let logit = t2.scalar(0.3);
        let l = t2.bce_logit(logit, 1.0).unwrap();
        t2.backward(l).unwrap();
        let s = 1.0 / (1.0 + (-0.3f64).exp());
        assert!((t2.grad(logit)[0] - (s - 1.0)).abs() < 1e-12);
        assert!((t2.scalar_value(l) - (-(s.ln()))).abs() < 1e-12);
    }

    #[test]
    fn deterministic_forward() {
        let run = || {
            let t = Tape::new();
            let x = t.leaf(1, 3, vec![0.25, -0.5, 1.5]);
            let w = t.leaf(2, 3, vec![0.1, 0.2, 0.3, -0.1, -0.2, -0.3]);
            let y = t.matmul_t(x, w).unwrap();
            let z = t.tanh(y);
            t.scalar_value(t.sum_all(z))
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }
}
