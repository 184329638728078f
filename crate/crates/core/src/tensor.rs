//! Eager tape-based reverse-mode autodiff over dense `f64` matrices.
//!
//! Every operation computes its value immediately and appends one node
//! to the [`Tape`]; [`Tape::backward`] walks the nodes in reverse,
//! accumulating vector-Jacobian products. The op set is exactly what
//! the encoder, message-passing layers, readout, and losses need —
//! dense only, no broadcasting beyond a row bias, no higher-order
//! derivatives.
//!
//! The one non-generic op is [`Tape::factored_project`]: per row it
//! reshapes `h` to a `d × d` matrix `X` and returns
//! `vec(Σₖ Wₖ · X · Qₖᵀ)`, which as a linear map on `h` equals
//! multiplication by `Σₖ Wₖ ⊗ Qₖ` under the row-major layout used
//! throughout (`Mat(h)[r][c] = h[r·d + c]`, `(a ⊗ b)[i·q + j] = aᵢbⱼ`).
//!
//! Gradient conventions at kinks: `relu'(0) = 0` and `d|x|/dx = 0` at
//! `x = 0`. [`grad_check`] compares against central differences and is
//! meant to be used away from those kinks.

use crate::linalg::DMat;

/// Shape or structure violation in a tape operation. Every mismatch
/// reports both offending shapes.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {lhs:?} vs {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: (usize, usize), rhs: (usize, usize) },
    #[error("{op}: expected a scalar, got {shape:?}")]
    NotScalar { op: &'static str, shape: (usize, usize) },
    #[error("{op}: width {cols} is not a perfect square")]
    NotSquare { op: &'static str, cols: usize },
    #[error("{op}: needs at least one row")]
    Empty { op: &'static str },
}

/// Returns `d` when `n == d²`.
pub fn perfect_sqrt(n: usize) -> Option<usize> {
    let d = n.isqrt();
    (d * d == n).then_some(d)
}

/// Single-row matrix view of a flat vector: `Mat(h)[r][c] = h[r·d + c]`.
pub fn mat_view(h: &[f64], d: usize) -> Result<DMat, TensorError> {
    if h.len() != d * d {
        return Err(TensorError::ShapeMismatch {
            op: "mat_view",
            lhs: (1, h.len()),
            rhs: (d, d),
        });
    }
    Ok(DMat::from_vec(d, d, h.to_vec()))
}

/// Handle to a tape node: id plus shape, cheap to copy around.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    id: usize,
    rows: usize,
    cols: usize,
}

impl Var {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddRowBias(usize, usize),
    Matmul(usize, usize),
    MatmulNT(usize, usize),
    RowConcat(usize, usize),
    Relu(usize),
    Sigmoid(usize),
    Softplus(usize),
    Abs(usize),
    SumRows(usize),
    MeanRows(usize),
    MaxRows(usize),
    SumAll(usize),
    Reshape(usize),
    KronRows(usize, usize),
    FactoredProject { h: usize, pairs: Vec<(usize, usize)> },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: DMat,
}

/// Append-only record of an eager forward pass; inputs of every node
/// precede it, so one reverse sweep computes all gradients.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Option<Vec<DMat>>,
}

fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus_scalar(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Number of nodes recorded so far.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: DMat) -> Var {
        // New ops invalidate previously computed gradients.
        self.grads = None;
        let id = self.nodes.len();
        let var = Var { id, rows: value.rows(), cols: value.cols() };
        self.nodes.push(Node { op, value });
        var
    }

    /// Registers an input (parameter or constant).
    pub fn leaf(&mut self, value: DMat) -> Var {
        self.push(Op::Leaf, value)
    }

    /// Forward value of a node.
    pub fn value(&self, v: Var) -> &DMat {
        &self.nodes[v.id].value
    }

    fn same_shape(op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        if a.shape() != b.shape() {
            return Err(TensorError::ShapeMismatch { op, lhs: a.shape(), rhs: b.shape() });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        Self::same_shape("add", a, b)?;
        let mut v = self.nodes[a.id].value.clone();
        v.add_assign(&self.nodes[b.id].value);
        Ok(self.push(Op::Add(a.id, b.id), v))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        Self::same_shape("sub", a, b)?;
        let mut v = self.nodes[a.id].value.clone();
        v.scaled_add_assign(-1.0, &self.nodes[b.id].value);
        Ok(self.push(Op::Sub(a.id, b.id), v))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        Self::same_shape("mul", a, b)?;
        let mut v = self.nodes[a.id].value.clone();
        for (x, &y) in v.data_mut().iter_mut().zip(self.nodes[b.id].value.data()) {
            *x *= y;
        }
        Ok(self.push(Op::Mul(a.id, b.id), v))
    }

    /// Multiplication by a compile-time constant.
    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let mut v = self.nodes[a.id].value.clone();
        for x in v.data_mut() {
            *x *= c;
        }
        self.push(Op::Scale(a.id, c), v)
    }

    /// Adds a `1 × d` bias row to every row of an `n × d` matrix.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var, TensorError> {
        if bias.rows != 1 || bias.cols != x.cols {
            return Err(TensorError::ShapeMismatch {
                op: "add_row_bias",
                lhs: x.shape(),
                rhs: bias.shape(),
            });
        }
        let mut v = self.nodes[x.id].value.clone();
        let b = self.nodes[bias.id].value.row(0).to_vec();
        for i in 0..v.rows() {
            for (x, &bb) in v.row_mut(i).iter_mut().zip(&b) {
                *x += bb;
            }
        }
        Ok(self.push(Op::AddRowBias(x.id, bias.id), v))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if a.cols != b.rows {
            return Err(TensorError::ShapeMismatch { op: "matmul", lhs: a.shape(), rhs: b.shape() });
        }
        let v = self.nodes[a.id].value.matmul(&self.nodes[b.id].value);
        Ok(self.push(Op::Matmul(a.id, b.id), v))
    }

    /// `a · bᵀ` — the shape `x · Wᵀ` every dense linear layer wants.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if a.cols != b.cols {
            return Err(TensorError::ShapeMismatch {
                op: "matmul_nt",
                lhs: a.shape(),
                rhs: b.shape(),
            });
        }
        let v = self.nodes[a.id].value.matmul_nt(&self.nodes[b.id].value);
        Ok(self.push(Op::MatmulNT(a.id, b.id), v))
    }

    /// Horizontal concatenation: `n × a` and `n × b` give `n × (a+b)`.
    pub fn row_concat(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if a.rows != b.rows {
            return Err(TensorError::ShapeMismatch {
                op: "row_concat",
                lhs: a.shape(),
                rhs: b.shape(),
            });
        }
        let mut v = DMat::zeros(a.rows, a.cols + b.cols);
        for i in 0..a.rows {
            v.row_mut(i)[..a.cols].copy_from_slice(self.nodes[a.id].value.row(i));
            v.row_mut(i)[a.cols..].copy_from_slice(self.nodes[b.id].value.row(i));
        }
        Ok(self.push(Op::RowConcat(a.id, b.id), v))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let mut v = self.nodes[a.id].value.clone();
        for x in v.data_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        self.push(Op::Relu(a.id), v)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let mut v = self.nodes[a.id].value.clone();
        for x in v.data_mut() {
            *x = sigmoid_scalar(*x);
        }
        self.push(Op::Sigmoid(a.id), v)
    }

    /// `ln(1 + eˣ)`, computed stably.
    pub fn softplus(&mut self, a: Var) -> Var {
        let mut v = self.nodes[a.id].value.clone();
        for x in v.data_mut() {
            *x = softplus_scalar(*x);
        }
        self.push(Op::Softplus(a.id), v)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let mut v = self.nodes[a.id].value.clone();
        for x in v.data_mut() {
            *x = x.abs();
        }
        self.push(Op::Abs(a.id), v)
    }

    /// Column sums: `n × d` collapses to `1 × d`.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let src = &self.nodes[a.id].value;
        let mut v = DMat::zeros(1, a.cols);
        for i in 0..a.rows {
            for (o, &x) in v.row_mut(0).iter_mut().zip(src.row(i)) {
                *o += x;
            }
        }
        self.push(Op::SumRows(a.id), v)
    }

    /// Column means: `n × d` collapses to `1 × d`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var, TensorError> {
        if a.rows == 0 {
            return Err(TensorError::Empty { op: "mean_rows" });
        }
        let src = &self.nodes[a.id].value;
        let inv = 1.0 / a.rows as f64;
        let mut v = DMat::zeros(1, a.cols);
        for i in 0..a.rows {
            for (o, &x) in v.row_mut(0).iter_mut().zip(src.row(i)) {
                *o += x * inv;
            }
        }
        Ok(self.push(Op::MeanRows(a.id), v))
    }

    /// Column maxima: `n × d` collapses to `1 × d`. The gradient flows
    /// to the first row attaining each column's maximum.
    pub fn max_rows(&mut self, a: Var) -> Result<Var, TensorError> {
        if a.rows == 0 {
            return Err(TensorError::Empty { op: "max_rows" });
        }
        let src = &self.nodes[a.id].value;
        let mut v = DMat::from_vec(1, a.cols, src.row(0).to_vec());
        for i in 1..a.rows {
            for (o, &x) in v.row_mut(0).iter_mut().zip(src.row(i)) {
                if x > *o {
                    *o = x;
                }
            }
        }
        Ok(self.push(Op::MaxRows(a.id), v))
    }

    /// Total sum as a `1 × 1` scalar.
    pub fn sum_all(&mut self, a: Var) -> Var {
        let s: f64 = self.nodes[a.id].value.data().iter().sum();
        self.push(Op::SumAll(a.id), DMat::from_vec(1, 1, vec![s]))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, TensorError> {
        if rows * cols != a.rows * a.cols {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                lhs: a.shape(),
                rhs: (rows, cols),
            });
        }
        let v = DMat::from_vec(rows, cols, self.nodes[a.id].value.data().to_vec());
        Ok(self.push(Op::Reshape(a.id), v))
    }

    /// Row-wise Kronecker product: row i of the result is `aᵢ ⊗ bᵢ`,
    /// with element `aᵢ[p]·bᵢ[q]` at index `p·q_dim + q`.
    pub fn kron_rows(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if a.rows != b.rows {
            return Err(TensorError::ShapeMismatch {
                op: "kron_rows",
                lhs: a.shape(),
                rhs: b.shape(),
            });
        }
        let (av, bv) = (&self.nodes[a.id].value, &self.nodes[b.id].value);
        let mut v = DMat::zeros(a.rows, a.cols * b.cols);
        for i in 0..a.rows {
            let (ar, br) = (av.row(i), bv.row(i));
            let out = v.row_mut(i);
            for (p, &x) in ar.iter().enumerate() {
                for (q, &y) in br.iter().enumerate() {
                    out[p * br.len() + q] = x * y;
                }
            }
        }
        Ok(self.push(Op::KronRows(a.id, b.id), v))
    }

    /// Entangled projection: per row, `vec(Σₖ Wₖ · Mat(hᵢ) · Qₖᵀ)`.
    /// As a linear map this is `hᵢ ↦ (Σₖ Wₖ ⊗ Qₖ) hᵢ`.
    pub fn factored_project(
        &mut self,
        h: Var,
        ws: &[Var],
        qs: &[Var],
    ) -> Result<Var, TensorError> {
        let d = perfect_sqrt(h.cols)
            .ok_or(TensorError::NotSquare { op: "factored_project", cols: h.cols })?;
        if ws.len() != qs.len() || ws.is_empty() {
            return Err(TensorError::Empty { op: "factored_project" });
        }
        for f in ws.iter().chain(qs) {
            if f.shape() != (d, d) {
                return Err(TensorError::ShapeMismatch {
                    op: "factored_project",
                    lhs: f.shape(),
                    rhs: (d, d),
                });
            }
        }

        let mut v = DMat::zeros(h.rows, h.cols);
        for i in 0..h.rows {
            let x = DMat::from_vec(d, d, self.nodes[h.id].value.row(i).to_vec());
            let mut y = DMat::zeros(d, d);
            for (&w, &q) in ws.iter().zip(qs) {
                let xq = x.matmul_nt(&self.nodes[q.id].value);
                y.add_assign(&self.nodes[w.id].value.matmul(&xq));
            }
            v.row_mut(i).copy_from_slice(y.data());
        }
        let pairs = ws.iter().zip(qs).map(|(w, q)| (w.id, q.id)).collect();
        Ok(self.push(Op::FactoredProject { h: h.id, pairs }, v))
    }

    /// Reverse sweep from a scalar loss. Populates a gradient for every
    /// node; nodes the loss does not reach keep zero gradients.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        if loss.shape() != (1, 1) {
            return Err(TensorError::NotScalar { op: "backward", shape: loss.shape() });
        }
        let mut grads: Vec<DMat> = self
            .nodes
            .iter()
            .map(|n| DMat::zeros(n.value.rows(), n.value.cols()))
            .collect();
        grads[loss.id] = DMat::from_vec(1, 1, vec![1.0]);

        for idx in (0..self.nodes.len()).rev() {
            let (lo, hi) = grads.split_at_mut(idx);
            let g = &hi[0];
            if g.data().iter().all(|&x| x == 0.0) {
                continue;
            }
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    lo[*a].add_assign(g);
                    lo[*b].add_assign(g);
                }
                Op::Sub(a, b) => {
                    lo[*a].add_assign(g);
                    lo[*b].scaled_add_assign(-1.0, g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    for ((ga, &x), &gy) in lo[*a].data_mut().iter_mut().zip(bv.data()).zip(g.data())
                    {
                        *ga += x * gy;
                    }
                    for ((gb, &x), &gy) in lo[*b].data_mut().iter_mut().zip(av.data()).zip(g.data())
                    {
                        *gb += x * gy;
                    }
                }
                Op::Scale(a, c) => lo[*a].scaled_add_assign(*c, g),
                Op::AddRowBias(x, bias) => {
                    lo[*x].add_assign(g);
                    for i in 0..g.rows() {
                        for (gb, &gy) in lo[*bias].row_mut(0).iter_mut().zip(g.row(i)) {
                            *gb += gy;
                        }
                    }
                }
                Op::Matmul(a, b) => {
                    let da = g.matmul_nt(&self.nodes[*b].value);
                    let db = self.nodes[*a].value.matmul_tn(g);
                    lo[*a].add_assign(&da);
                    lo[*b].add_assign(&db);
                }
                Op::MatmulNT(a, b) => {
                    let da = g.matmul(&self.nodes[*b].value);
                    let db = g.matmul_tn(&self.nodes[*a].value);
                    lo[*a].add_assign(&da);
                    lo[*b].add_assign(&db);
                }
                Op::RowConcat(a, b) => {
                    let ac = self.nodes[*a].value.cols();
                    for i in 0..g.rows() {
                        let row = g.row(i);
                        for (ga, &gy) in lo[*a].row_mut(i).iter_mut().zip(&row[..ac]) {
                            *ga += gy;
                        }
                        for (gb, &gy) in lo[*b].row_mut(i).iter_mut().zip(&row[ac..]) {
                            *gb += gy;
                        }
                    }
                }
                Op::Relu(a) => {
                    let av = &self.nodes[*a].value;
                    for ((ga, &x), &gy) in lo[*a].data_mut().iter_mut().zip(av.data()).zip(g.data())
                    {
                        if x > 0.0 {
                            *ga += gy;
                        }
                    }
                }
                Op::Sigmoid(a) => {
                    let sv = &self.nodes[idx].value;
                    for ((ga, &s), &gy) in lo[*a].data_mut().iter_mut().zip(sv.data()).zip(g.data())
                    {
                        *ga += s * (1.0 - s) * gy;
                    }
                }
                Op::Softplus(a) => {
                    let av = &self.nodes[*a].value;
                    for ((ga, &x), &gy) in lo[*a].data_mut().iter_mut().zip(av.data()).zip(g.data())
                    {
                        *ga += sigmoid_scalar(x) * gy;
                    }
                }
                Op::Abs(a) => {
                    let av = &self.nodes[*a].value;
                    for ((ga, &x), &gy) in lo[*a].data_mut().iter_mut().zip(av.data()).zip(g.data())
                    {
                        let s = if x > 0.0 {
                            1.0
                        } else if x < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        *ga += s * gy;
                    }
                }
                Op::SumRows(a) => {
                    for i in 0..lo[*a].rows() {
                        for (ga, &gy) in lo[*a].row_mut(i).iter_mut().zip(g.row(0)) {
                            *ga += gy;
                        }
                    }
                }
                Op::MeanRows(a) => {
                    let inv = 1.0 / lo[*a].rows() as f64;
                    for i in 0..lo[*a].rows() {
                        for (ga, &gy) in lo[*a].row_mut(i).iter_mut().zip(g.row(0)) {
                            *ga += gy * inv;
                        }
                    }
                }
                Op::MaxRows(a) => {
                    let av = &self.nodes[*a].value;
                    let maxv = &self.nodes[idx].value;
                    for j in 0..av.cols() {
                        let winner = (0..av.rows())
                            .find(|&i| av[(i, j)] == maxv[(0, j)])
                            .expect("max_rows winner exists");
                        lo[*a][(winner, j)] += g[(0, j)];
                    }
                }
                Op::SumAll(a) => {
                    let gy = g[(0, 0)];
                    for ga in lo[*a].data_mut() {
                        *ga += gy;
                    }
                }
                Op::Reshape(a) => {
                    for (ga, &gy) in lo[*a].data_mut().iter_mut().zip(g.data()) {
                        *ga += gy;
                    }
                }
                Op::KronRows(a, b) => {
                    let (av, bv) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let bc = bv.cols();
                    for i in 0..g.rows() {
                        let grow = g.row(i);
                        for p in 0..av.cols() {
                            let mut acc = 0.0;
                            for q in 0..bc {
                                acc += grow[p * bc + q] * bv.row(i)[q];
                            }
                            lo[*a].row_mut(i)[p] += acc;
                        }
                        for q in 0..bc {
                            let mut acc = 0.0;
                            for p in 0..av.cols() {
                                acc += grow[p * bc + q] * av.row(i)[p];
                            }
                            lo[*b].row_mut(i)[q] += acc;
                        }
                    }
                }
                Op::FactoredProject { h, pairs } => {
                    let pairs = pairs.clone();
                    let d = self.nodes[pairs[0].0].value.rows();
                    for i in 0..g.rows() {
                        let gi = DMat::from_vec(d, d, g.row(i).to_vec());
                        let x = DMat::from_vec(d, d, self.nodes[*h].value.row(i).to_vec());
                        let mut dx = DMat::zeros(d, d);
                        for &(w, q) in &pairs {
                            let wv = &self.nodes[w].value;
                            let qv = &self.nodes[q].value;
                            // dX += Wᵀ G Q ; dW += G Q Xᵀ ; dQ += Gᵀ W X
                            let gq = gi.matmul(qv);
                            dx.add_assign(&wv.matmul_tn(&gq));
                            lo[w].add_assign(&gq.matmul_nt(&x));
                            let wx = wv.matmul(&x);
                            lo[q].add_assign(&gi.matmul_tn(&wx));
                        }
                        for (gh, &v) in lo[*h].row_mut(i).iter_mut().zip(dx.data()) {
                            *gh += v;
                        }
                    }
                }
            }
        }
        self.grads = Some(grads);
        Ok(())
    }

    /// Gradient computed by the last [`Tape::backward`]. Panics if no
    /// backward pass has run since the last op was recorded.
    pub fn grad(&self, v: Var) -> &DMat {
        &self.grads.as_ref().expect("backward has not run")[v.id]
    }
}

/// Max relative error between analytic and central-difference gradients
/// at the given coordinates of `x` (all coordinates when `coords` is
/// empty). `f` must rebuild the same scalar loss from a fresh leaf.
pub fn grad_check_coords<F>(f: F, x: &DMat, step: f64, coords: &[usize]) -> f64
where
    F: Fn(&mut Tape, Var) -> Result<Var, TensorError>,
{
    let loss_at = |m: &DMat| -> f64 {
        let mut tape = Tape::new();
        let v = tape.leaf(m.clone());
        let loss = f(&mut tape, v).expect("grad_check loss construction failed");
        assert_eq!((loss.rows, loss.cols), (1, 1), "grad_check needs a scalar loss");
        tape.value(loss)[(0, 0)]
    };

    let mut tape = Tape::new();
    let v = tape.leaf(x.clone());
    let loss = f(&mut tape, v).expect("grad_check loss construction failed");
    tape.backward(loss).expect("grad_check backward failed");
    let analytic = tape.grad(v).clone();

    let all: Vec<usize>;
    let coords = if coords.is_empty() {
        all = (0..x.numel()).collect();
        &all
    } else {
        coords
    };

    let mut max_err = 0.0f64;
    for &c in coords {
        let mut plus = x.clone();
        plus.data_mut()[c] += step;
        let mut minus = x.clone();
        minus.data_mut()[c] -= step;
        let central = (loss_at(&plus) - loss_at(&minus)) / (2.0 * step);
        let err = (analytic.data()[c] - central).abs() / central.abs().max(1.0);
        max_err = max_err.max(err);
    }
    max_err
}

/// [`grad_check_coords`] over every coordinate of `x`.
pub fn grad_check<F>(f: F, x: &DMat, step: f64) -> f64
where
    F: Fn(&mut Tape, Var) -> Result<Var, TensorError>,
{
    grad_check_coords(f, x, step, &[])
}
