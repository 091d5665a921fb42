//! Tape-based reverse-mode automatic differentiation over [`Tensor`].
//!
//! Ops are recorded eagerly: each call validates shapes, computes the value,
//! and appends a node. `backward` walks the tape in reverse insertion order,
//! which is a reverse topological order because parents always precede their
//! consumers.

use crate::error::{Error, Result};
use crate::tensor::{Tensor, NORM_EPS};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Constant,
    Add(Var, Var),
    Sub(Var, Var),
    MulElem(Var, Var),
    ScalarMul(Var, f64),
    AddScalar(Var),
    MatMul(Var, Var),
    Dot(Var, Var),
    GatherRows(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    AddRowBcast(Var, Var),
    SubRowBcast(Var, Var),
    Sum(Var),
    Mean(Var),
    RowSums(Var),
    Exp(Var),
    LogGuarded(Var, f64),
    Sqrt(Var),
    LeakyRelu(Var, f64),
    L2Normalize(Var),
    SoftmaxRow(Var, f64),
    Transpose(Var),
    Reshape(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    no_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let no_grad = matches!(op, Op::Constant);
        self.nodes.push(Node { value, op, no_grad });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    /// A trainable input; its gradient is available after `backward`.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// A fixed input; gradients are not propagated into it.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    // ---- elementwise and scalar ----

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul_elem(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).mul_elem(self.value(b))?;
        Ok(self.push(v, Op::MulElem(a, b)))
    }

    pub fn scalar_mul(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).scale(c);
        self.push(v, Op::ScalarMul(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Op::AddScalar(a))
    }

    // ---- linear algebra ----

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() || va.rows().min(va.cols()) != 1 {
            return Err(Error::ShapeMismatch {
                op: "dot",
                lhs_rows: va.rows(),
                lhs_cols: va.cols(),
                rhs_rows: vb.rows(),
                rhs_cols: vb.cols(),
            });
        }
        let s: f64 = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).sum();
        Ok(self.push(Tensor::scalar(s), Op::Dot(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let v = self.value(a).reshape(rows, cols)?;
        Ok(self.push(v, Op::Reshape(a)))
    }

    // ---- structural ----

    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let v = self.value(a).gather_rows(indices)?;
        Ok(self.push(v, Op::GatherRows(a, indices.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let tensors: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Tensor::concat_rows(&tensors)?;
        Ok(self.push(v, Op::ConcatRows(parts.to_vec())))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let tensors: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Tensor::concat_cols(&tensors)?;
        Ok(self.push(v, Op::ConcatCols(parts.to_vec())))
    }

    /// Add a 1xN row vector to every row of an MxN matrix.
    pub fn add_row_bcast(&mut self, a: Var, row: Var) -> Result<Var> {
        let v = row_bcast(self.value(a), self.value(row), 1.0, "add_row_bcast")?;
        Ok(self.push(v, Op::AddRowBcast(a, row)))
    }

    /// Subtract a 1xN row vector from every row of an MxN matrix.
    pub fn sub_row_bcast(&mut self, a: Var, row: Var) -> Result<Var> {
        let v = row_bcast(self.value(a), self.value(row), -1.0, "sub_row_bcast")?;
        Ok(self.push(v, Op::SubRowBcast(a, row)))
    }

    // ---- reductions ----

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let v = Tensor::scalar(t.sum() / t.len() as f64);
        self.push(v, Op::Mean(a))
    }

    /// Sum along each row: MxN -> Mx1.
    pub fn row_sums(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let sums: Vec<f64> = (0..t.rows()).map(|i| t.row(i).iter().sum()).collect();
        let v = Tensor::col_vec(&sums);
        self.push(v, Op::RowSums(a))
    }

    // ---- nonlinear ----

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::exp);
        self.push(v, Op::Exp(a))
    }

    /// Natural log; errors if any element is non-positive.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        if let Some(&bad) = self.value(a).data().iter().find(|v| **v <= 0.0) {
            return Err(Error::LogNonPositive(bad));
        }
        let v = self.value(a).map(f64::ln);
        Ok(self.push(v, Op::LogGuarded(a, 0.0)))
    }

    /// Natural log of max(x, eps); gradient is zero where the clamp is active.
    pub fn log_guarded(&mut self, a: Var, eps: f64) -> Var {
        let v = self.value(a).map(|x| x.max(eps).ln());
        self.push(v, Op::LogGuarded(a, eps))
    }

    /// Elementwise square root; inputs must be nonnegative. The gradient is
    /// clamped near zero so a zero distance does not produce an infinity.
    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        if let Some(&bad) = self.value(a).data().iter().find(|v| **v < 0.0) {
            return Err(Error::LogNonPositive(bad));
        }
        let v = self.value(a).map(f64::sqrt);
        Ok(self.push(v, Op::Sqrt(a)))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push(v, Op::LeakyRelu(a, slope))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.leaky_relu(a, 0.0)
    }

    /// Unit-normalize a vector (1xN or Nx1); errors on near-zero norm rather
    /// than clamping, so degenerate embeddings surface.
    pub fn l2_normalize(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.rows() != 1 && t.cols() != 1 {
            return Err(Error::BadShape {
                op: "l2_normalize",
                expected: "a vector",
                rows: t.rows(),
                cols: t.cols(),
            });
        }
        let v = t.l2_normalized()?;
        Ok(self.push(v, Op::L2Normalize(a)))
    }

    /// Temperature softmax over a 1xN row, computed with max-subtraction.
    pub fn softmax_row(&mut self, a: Var, tau: f64) -> Result<Var> {
        let t = self.value(a);
        if t.rows() != 1 {
            return Err(Error::BadShape {
                op: "softmax_row",
                expected: "a 1xN row",
                rows: t.rows(),
                cols: t.cols(),
            });
        }
        assert!(tau > 0.0, "softmax_row: tau must be positive, got {tau}");
        let z: Vec<f64> = t.data().iter().map(|x| x / tau).collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|x| (x - m).exp()).collect();
        let s: f64 = e.iter().sum();
        let y: Vec<f64> = e.iter().map(|x| x / s).collect();
        Ok(self.push(Tensor::row_vec(&y), Op::SoftmaxRow(a, tau)))
    }

    // ---- backward ----

    /// Backpropagate from a scalar loss; gradients of leaves are then
    /// available via [`Tape::grad`]. Consumes the tape (second call errors).
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let t = self.value(loss);
        if !t.is_scalar() {
            return Err(Error::NonScalarLoss {
                rows: t.rows(),
                cols: t.cols(),
            });
        }
        self.backward_seeded(loss, Tensor::scalar(1.0))
    }

    /// Backpropagate an arbitrary adjoint from a node (vector-Jacobian product).
    pub fn backward_seeded(&mut self, node: Var, seed: Tensor) -> Result<()> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        if seed.shape() != self.value(node).shape() {
            return Err(Error::ShapeMismatch {
                op: "backward_seeded",
                lhs_rows: seed.rows(),
                lhs_cols: seed.cols(),
                rhs_rows: self.value(node).rows(),
                rhs_cols: self.value(node).cols(),
            });
        }
        self.consumed = true;
        self.accum(node, seed);

        for i in (0..=node.0).rev() {
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            self.propagate(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    /// Gradient of the backward root w.r.t. `v`; zeros for nodes off the path.
    pub fn grad(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.value(v).shape();
                Tensor::zeros(r, c)
            }
        }
    }

    fn accum(&mut self, v: Var, delta: Tensor) {
        if self.nodes[v.0].no_grad {
            return;
        }
        match &mut self.grads[v.0] {
            Some(g) => g
                .add_assign_scaled(&delta, 1.0)
                .expect("gradient shape matches value shape"),
            slot @ None => *slot = Some(delta),
        }
    }

    fn propagate(&mut self, i: usize, g: &Tensor) {
        // The borrow dance: compute parent deltas from immutable state, then
        // accumulate.
        let mut deltas: Vec<(Var, Tensor)> = Vec::new();
        {
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf | Op::Constant => {}
                Op::Add(a, b) => {
                    deltas.push((*a, g.clone()));
                    deltas.push((*b, g.clone()));
                }
                Op::Sub(a, b) => {
                    deltas.push((*a, g.clone()));
                    deltas.push((*b, g.scale(-1.0)));
                }
                Op::MulElem(a, b) => {
                    let va = &self.nodes[a.0].value;
                    let vb = &self.nodes[b.0].value;
                    deltas.push((*a, g.mul_elem(vb).expect("shapes match")));
                    deltas.push((*b, g.mul_elem(va).expect("shapes match")));
                }
                Op::ScalarMul(a, c) => deltas.push((*a, g.scale(*c))),
                Op::AddScalar(a) => deltas.push((*a, g.clone())),
                Op::MatMul(a, b) => {
                    let va = &self.nodes[a.0].value;
                    let vb = &self.nodes[b.0].value;
                    deltas.push((*a, g.matmul(&vb.transpose()).expect("shapes match")));
                    deltas.push((*b, va.transpose().matmul(g).expect("shapes match")));
                }
                Op::Dot(a, b) => {
                    let s = g.get(0, 0);
                    let va = &self.nodes[a.0].value;
                    let vb = &self.nodes[b.0].value;
                    deltas.push((*a, vb.scale(s)));
                    deltas.push((*b, va.scale(s)));
                }
                Op::GatherRows(a, idx) => {
                    let (r, c) = self.nodes[a.0].value.shape();
                    let mut da = Tensor::zeros(r, c);
                    for (out_row, &src_row) in idx.iter().enumerate() {
                        let grow = g.row(out_row).to_vec();
                        let dst = &mut da.data_mut()[src_row * c..(src_row + 1) * c];
                        for (d, gv) in dst.iter_mut().zip(grow) {
                            *d += gv;
                        }
                    }
                    deltas.push((*a, da));
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let r = self.nodes[p.0].value.rows();
                        let rows: Vec<usize> = (offset..offset + r).collect();
                        deltas.push((p, g.gather_rows(&rows).expect("in range")));
                        offset += r;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (r, c) = self.nodes[p.0].value.shape();
                        let mut dp = Tensor::zeros(r, c);
                        for i in 0..r {
                            let src = &g.row(i)[offset..offset + c];
                            dp.data_mut()[i * c..(i + 1) * c].copy_from_slice(src);
                        }
                        deltas.push((p, dp));
                        offset += c;
                    }
                }
                Op::AddRowBcast(a, row) | Op::SubRowBcast(a, row) => {
                    let sign = if matches!(node.op, Op::AddRowBcast(..)) {
                        1.0
                    } else {
                        -1.0
                    };
                    deltas.push((*a, g.clone()));
                    let c = g.cols();
                    let mut colsum = vec![0.0; c];
                    for i in 0..g.rows() {
                        for (j, v) in g.row(i).iter().enumerate() {
                            colsum[j] += v;
                        }
                    }
                    deltas.push((*row, Tensor::row_vec(&colsum).scale(sign)));
                }
                Op::Sum(a) => {
                    let (r, c) = self.nodes[a.0].value.shape();
                    deltas.push((*a, Tensor::filled(r, c, g.get(0, 0))));
                }
                Op::Mean(a) => {
                    let (r, c) = self.nodes[a.0].value.shape();
                    let n = (r * c) as f64;
                    deltas.push((*a, Tensor::filled(r, c, g.get(0, 0) / n)));
                }
                Op::RowSums(a) => {
                    let (r, c) = self.nodes[a.0].value.shape();
                    let mut da = Tensor::zeros(r, c);
                    for i in 0..r {
                        let gi = g.get(i, 0);
                        for v in &mut da.data_mut()[i * c..(i + 1) * c] {
                            *v = gi;
                        }
                    }
                    deltas.push((*a, da));
                }
                Op::Exp(a) => {
                    deltas.push((*a, g.mul_elem(&node.value).expect("shapes match")));
                }
                Op::LogGuarded(a, eps) => {
                    let va = &self.nodes[a.0].value;
                    let mut da = g.clone();
                    for (d, &x) in da.data_mut().iter_mut().zip(va.data()) {
                        *d = if x > *eps { *d / x } else { 0.0 };
                    }
                    deltas.push((*a, da));
                }
                Op::Sqrt(a) => {
                    let mut da = g.clone();
                    for (d, &y) in da.data_mut().iter_mut().zip(node.value.data()) {
                        *d /= 2.0 * y.max(NORM_EPS);
                    }
                    deltas.push((*a, da));
                }
                Op::LeakyRelu(a, slope) => {
                    let va = &self.nodes[a.0].value;
                    let mut da = g.clone();
                    for (d, &x) in da.data_mut().iter_mut().zip(va.data()) {
                        if x <= 0.0 {
                            *d *= slope;
                        }
                    }
                    deltas.push((*a, da));
                }
                Op::L2Normalize(a) => {
                    let va = &self.nodes[a.0].value;
                    let n = va.l2_norm();
                    let y = &node.value;
                    let gy: f64 = g.data().iter().zip(y.data()).map(|(gi, yi)| gi * yi).sum();
                    let mut da = g.clone();
                    for (d, &yi) in da.data_mut().iter_mut().zip(y.data()) {
                        *d = (*d - gy * yi) / n;
                    }
                    deltas.push((*a, da));
                }
                Op::SoftmaxRow(a, tau) => {
                    let y = &node.value;
                    let s: f64 = g.data().iter().zip(y.data()).map(|(gi, yi)| gi * yi).sum();
                    let mut da = g.clone();
                    for (d, &yi) in da.data_mut().iter_mut().zip(y.data()) {
                        *d = yi * (*d - s) / tau;
                    }
                    deltas.push((*a, da));
                }
                Op::Transpose(a) => deltas.push((*a, g.transpose())),
                Op::Reshape(a) => {
                    let (r, c) = self.nodes[a.0].value.shape();
                    deltas.push((*a, g.reshape(r, c).expect("same length")));
                }
            }
        }
        for (p, d) in deltas {
            self.accum(p, d);
        }
    }
}

fn row_bcast(a: &Tensor, row: &Tensor, sign: f64, op: &'static str) -> Result<Tensor> {
    if row.rows() != 1 || row.cols() != a.cols() {
        return Err(Error::ShapeMismatch {
            op: if sign > 0.0 { "add_row_bcast" } else { "sub_row_bcast" },
            lhs_rows: a.rows(),
            lhs_cols: a.cols(),
            rhs_rows: row.rows(),
            rhs_cols: row.cols(),
        });
    }
    let _ = op;
    let mut out = a.clone();
    let rv = row.data().to_vec();
    let c = a.cols();
    for i in 0..a.rows() {
        for (d, rvj) in out.data_mut()[i * c..(i + 1) * c].iter_mut().zip(&rv) {
            *d += sign * rvj;
        }
    }
    Ok(out)
}

// ---- gradient checking ----

/// Outcome of comparing autodiff gradients against central finite differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// (input index, flat coordinate) of the worst disagreement.
    pub worst: Option<(usize, usize)>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Check the autodiff gradient of a scalar-valued tensor function against
/// central finite differences at `point`.
///
/// The relative error per coordinate is |ad - fd| / max(|ad|, |fd|, 1e-6).
pub fn gradient_check<F>(f: F, point: &[Tensor], step: f64, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = point.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    tape.backward(loss)?;
    let auto: Vec<Tensor> = vars.iter().map(|&v| tape.grad(v)).collect();

    let eval = |pt: &[Tensor]| -> Result<f64> {
        let mut t = Tape::new();
        let vs: Vec<Var> = pt.iter().map(|x| t.leaf(x.clone())).collect();
        let out = f(&mut t, &vs)?;
        t.value(out).scalar_value()
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        tolerance,
        pass: true,
    };
    let mut work: Vec<Tensor> = point.to_vec();
    for i in 0..point.len() {
        for c in 0..point[i].len() {
            let orig = work[i].data()[c];
            work[i].data_mut()[c] = orig + step;
            let fp = eval(&work)?;
            work[i].data_mut()[c] = orig - step;
            let fm = eval(&work)?;
            work[i].data_mut()[c] = orig;

            let fd = (fp - fm) / (2.0 * step);
            let ad = auto[i].data()[c];
            let rel = (ad - fd).abs() / ad.abs().max(fd.abs()).max(1e-6);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((i, c));
            }
        }
    }
    report.pass = report.max_rel_err < tolerance;
    Ok(report)
}
