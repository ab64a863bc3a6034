//! Tape-based reverse-mode differentiation for the fixed set of operations
//! the network uses.
//!
//! A [`Tape`] is an append-only list of nodes; building an op computes its
//! value immediately, so the tape order is already topological. [`Tape::backward`]
//! walks the list once in reverse. Inputs can be overwritten and the whole
//! tape recomputed with [`Tape::replay`], which is what the finite-difference
//! checker uses.
//!
//! Values are dense `[batch × features]` matrices in f64. The L1 reduction
//! uses the subgradient convention `sign(0) = 0`.

use crate::mat::{accum_grad_w, accum_grad_x, Mat};
use crate::rot::{euler_to_matrix, euler_to_matrix_derivs};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("backward requires a scalar loss node, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Op {
    Input,
    /// x[B×m] · wᵀ where w is [n×m].
    MatMul { x: NodeId, w: NodeId },
    /// x[B×n] + b[1×n] per row.
    AddBias { x: NodeId, b: NodeId },
    /// sin(omega0 · x); `bw_omega0` is the factor used by backward. It equals
    /// `omega0` from every public constructor and exists only so tests can
    /// verify that the gradient checker catches a wrong Jacobian.
    SinAct { x: NodeId, omega0: f64, bw_omega0: f64 },
    ReluAct { x: NodeId },
    Concat { parts: Vec<NodeId> },
    Scale { x: NodeId, factor: f64 },
    /// points[B×3] · R(angles); angles is a [1×3] node.
    Rotate3 { points: NodeId, angles: NodeId },
    /// Repeats a [1×c] row B times.
    BroadcastRows { x: NodeId },
    Sub { a: NodeId, b: NodeId },
    /// Scalar mean of |x| over all entries.
    MeanAbs { x: NodeId },
    /// Scalar Σ x².
    SumSq { x: NodeId },
    /// Scalar sum of scalar nodes.
    SumScalars { parts: Vec<NodeId> },
}

struct Node {
    value: Mat,
    grad: Option<Mat>,
    op: Op,
    requires_grad: bool,
}

/// Append-only computation tape.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Constant input (no gradient tracked).
    pub fn constant(&mut self, value: Mat) -> NodeId {
        self.push(value, Op::Input, false)
    }

    /// Trainable input; `backward` will fill its gradient.
    pub fn leaf(&mut self, value: Mat) -> NodeId {
        self.push(value, Op::Input, true)
    }

    pub fn value(&self, id: NodeId) -> &Mat {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward` call; zeros if the node is off-path.
    pub fn grad(&self, id: NodeId) -> Mat {
        let node = &self.nodes[id.0];
        node.grad
            .clone()
            .unwrap_or_else(|| Mat::zeros(node.value.rows(), node.value.cols()))
    }

    /// Overwrites an input node's value (for replay).
    pub fn set_value(&mut self, id: NodeId, value: Mat) {
        assert!(
            matches!(self.nodes[id.0].op, Op::Input),
            "only input nodes can be overwritten"
        );
        assert_eq!(self.nodes[id.0].value.shape(), value.shape());
        self.nodes[id.0].value = value;
    }

    pub fn set_entry(&mut self, id: NodeId, i: usize, j: usize, v: f64) {
        assert!(matches!(self.nodes[id.0].op, Op::Input));
        self.nodes[id.0].value.set(i, j, v);
    }

    pub fn entry(&self, id: NodeId, i: usize, j: usize) -> f64 {
        self.nodes[id.0].value.get(i, j)
    }

    // ---- operations ----

    /// `x·Wᵀ + b`: the affine layer as one call.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let mm = self.matmul(x, w)?;
        self.add_bias(mm, b)
    }

    pub fn matmul(&mut self, x: NodeId, w: NodeId) -> Result<NodeId, GraphError> {
        let (xr, xc) = self.value(x).shape();
        let (wr, wc) = self.value(w).shape();
        if xc != wc {
            return Err(GraphError::ShapeMismatch {
                op: "matmul",
                detail: format!("x is {xr}x{xc}, w is {wr}x{wc} (expected x.cols == w.cols)"),
            });
        }
        let value = self.value(x).matmul_nt(self.value(w));
        let rg = self.rg(x) || self.rg(w);
        Ok(self.push(value, Op::MatMul { x, w }, rg))
    }

    pub fn add_bias(&mut self, x: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let (_, xc) = self.value(x).shape();
        let (br, bc) = self.value(b).shape();
        if br != 1 || bc != xc {
            return Err(GraphError::ShapeMismatch {
                op: "add_bias",
                detail: format!("bias is {br}x{bc}, activations have {xc} columns"),
            });
        }
        let mut value = self.value(x).clone();
        value.add_bias_rows(self.value(b).data());
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(value, Op::AddBias { x, b }, rg))
    }

    pub fn sine(&mut self, x: NodeId, omega0: f64) -> NodeId {
        self.sine_raw(x, omega0, omega0)
    }

    /// Sine activation with a decoupled backward factor. Only for negative
    /// controls in gradient-checker tests; use [`Tape::sine`] everywhere else.
    #[doc(hidden)]
    pub fn sine_raw(&mut self, x: NodeId, omega0: f64, bw_omega0: f64) -> NodeId {
        let value = self.value(x).map(|v| (omega0 * v).sin());
        let rg = self.rg(x);
        self.push(value, Op::SinAct { x, omega0, bw_omega0 }, rg)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| v.max(0.0));
        let rg = self.rg(x);
        self.push(value, Op::ReluAct { x }, rg)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId, GraphError> {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(GraphError::ShapeMismatch {
                    op: "concat",
                    detail: format!(
                        "row counts differ: {} vs {}",
                        rows,
                        self.value(p).rows()
                    ),
                });
            }
            cols += self.value(p).cols();
        }
        let mut value = Mat::zeros(rows, cols);
        for i in 0..rows {
            let orow = value.row_mut(i);
            let mut off = 0;
            for &p in parts {
                let prow = self.value(p).row(i);
                orow[off..off + prow.len()].copy_from_slice(prow);
                off += prow.len();
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(value, Op::Concat { parts: parts.to_vec() }, rg))
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        let value = self.value(x).map(|v| factor * v);
        let rg = self.rg(x);
        self.push(value, Op::Scale { x, factor }, rg)
    }

    /// Rows of `points` become `Rᵀx` for `R` built from the `angles` node.
    pub fn rotate3(&mut self, points: NodeId, angles: NodeId) -> Result<NodeId, GraphError> {
        let (_, pc) = self.value(points).shape();
        let (ar, ac) = self.value(angles).shape();
        if pc != 3 || ar != 1 || ac != 3 {
            return Err(GraphError::ShapeMismatch {
                op: "rotate3",
                detail: format!("points must be Bx3 (got cols {pc}), angles 1x3 (got {ar}x{ac})"),
            });
        }
        let value = rotate_points(self.value(points), self.value(angles).data());
        let rg = self.rg(points) || self.rg(angles);
        Ok(self.push(value, Op::Rotate3 { points, angles }, rg))
    }

    pub fn broadcast_rows(&mut self, x: NodeId, rows: usize) -> Result<NodeId, GraphError> {
        let (xr, xc) = self.value(x).shape();
        if xr != 1 {
            return Err(GraphError::ShapeMismatch {
                op: "broadcast_rows",
                detail: format!("expected a 1xC row, got {xr}x{xc}"),
            });
        }
        let src = self.value(x).clone();
        let mut value = Mat::zeros(rows, xc);
        for i in 0..rows {
            value.row_mut(i).copy_from_slice(src.row(0));
        }
        let rg = self.rg(x);
        Ok(self.push(value, Op::BroadcastRows { x }, rg))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(GraphError::ShapeMismatch {
                op: "sub",
                detail: format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            });
        }
        let bv = self.value(b);
        let av = self.value(a);
        let data: Vec<f64> = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(x, y)| x - y)
            .collect();
        let value = Mat::from_vec(av.rows(), av.cols(), data);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Sub { a, b }, rg))
    }

    /// Mean of |x| over all entries, as a 1×1 node. Errors on empty input.
    pub fn mean_abs(&mut self, x: NodeId) -> Result<NodeId, GraphError> {
        let v = self.value(x);
        if v.is_empty() {
            return Err(GraphError::ShapeMismatch {
                op: "mean_abs",
                detail: "empty input".into(),
            });
        }
        let total: f64 = v.data().iter().map(|a| a.abs()).sum();
        let value = Mat::scalar(total / v.len() as f64);
        let rg = self.rg(x);
        Ok(self.push(value, Op::MeanAbs { x }, rg))
    }

    pub fn sum_sq(&mut self, x: NodeId) -> NodeId {
        let total: f64 = self.value(x).data().iter().map(|a| a * a).sum();
        let rg = self.rg(x);
        self.push(Mat::scalar(total), Op::SumSq { x }, rg)
    }

    pub fn sum_scalars(&mut self, parts: &[NodeId]) -> Result<NodeId, GraphError> {
        let mut total = 0.0;
        for &p in parts {
            if self.value(p).shape() != (1, 1) {
                return Err(GraphError::ShapeMismatch {
                    op: "sum_scalars",
                    detail: format!("part has shape {:?}", self.value(p).shape()),
                });
            }
            total += self.value(p).get(0, 0);
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Mat::scalar(total), Op::SumScalars { parts: parts.to_vec() }, rg))
    }

    // ---- execution ----

    /// Recomputes every non-input node in creation order.
    pub fn replay(&mut self) {
        for i in 0..self.nodes.len() {
            let value = match &self.nodes[i].op {
                Op::Input => continue,
                Op::MatMul { x, w } => self.nodes[x.0].value.matmul_nt(&self.nodes[w.0].value),
                Op::AddBias { x, b } => {
                    let mut v = self.nodes[x.0].value.clone();
                    v.add_bias_rows(self.nodes[b.0].value.data());
                    v
                }
                Op::SinAct { x, omega0, .. } => {
                    let om = *omega0;
                    self.nodes[x.0].value.map(|v| (om * v).sin())
                }
                Op::ReluAct { x } => self.nodes[x.0].value.map(|v| v.max(0.0)),
                Op::Concat { parts } => {
                    let rows = self.nodes[parts[0].0].value.rows();
                    let cols = parts.iter().map(|p| self.nodes[p.0].value.cols()).sum();
                    let mut out = Mat::zeros(rows, cols);
                    for i in 0..rows {
                        let mut off = 0;
                        for &p in parts {
                            let prow = self.nodes[p.0].value.row(i);
                            out.row_mut(i)[off..off + prow.len()].copy_from_slice(prow);
                            off += prow.len();
                        }
                    }
                    out
                }
                Op::Scale { x, factor } => {
                    let f = *factor;
                    self.nodes[x.0].value.map(|v| f * v)
                }
                Op::Rotate3 { points, angles } => rotate_points(
                    &self.nodes[points.0].value,
                    self.nodes[angles.0].value.data(),
                ),
                Op::BroadcastRows { x } => {
                    let src = &self.nodes[x.0].value;
                    let rows = self.nodes[i].value.rows();
                    let mut out = Mat::zeros(rows, src.cols());
                    for r in 0..rows {
                        out.row_mut(r).copy_from_slice(src.row(0));
                    }
                    out
                }
                Op::Sub { a, b } => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let data = av
                        .data()
                        .iter()
                        .zip(bv.data())
                        .map(|(x, y)| x - y)
                        .collect();
                    Mat::from_vec(av.rows(), av.cols(), data)
                }
                Op::MeanAbs { x } => {
                    let v = &self.nodes[x.0].value;
                    Mat::scalar(v.data().iter().map(|a| a.abs()).sum::<f64>() / v.len() as f64)
                }
                Op::SumSq { x } => Mat::scalar(
                    self.nodes[x.0].value.data().iter().map(|a| a * a).sum::<f64>(),
                ),
                Op::SumScalars { parts } => Mat::scalar(
                    parts.iter().map(|p| self.nodes[p.0].value.get(0, 0)).sum(),
                ),
            };
            self.nodes[i].value = value;
        }
    }

    /// Reverse pass from a scalar `loss`. Every node reachable from `loss`
    /// is visited exactly once; unreachable nodes keep zero gradients.
    pub fn backward(&mut self, loss: NodeId) -> Result<(), GraphError> {
        let (r, c) = self.value(loss).shape();
        if (r, c) != (1, 1) {
            return Err(GraphError::NonScalarLoss { rows: r, cols: c });
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[loss.0].grad = Some(Mat::scalar(1.0));

        for i in (0..self.nodes.len()).rev() {
            if self.nodes[i].grad.is_none() || !self.nodes[i].requires_grad {
                continue;
            }
            let g = self.nodes[i].grad.take().unwrap();
            self.propagate(i, &g);
            self.nodes[i].grad = Some(g);
        }
        Ok(())
    }

    fn ensure_grad(&mut self, id: NodeId) {
        if self.nodes[id.0].grad.is_none() {
            let (r, c) = self.nodes[id.0].value.shape();
            self.nodes[id.0].grad = Some(Mat::zeros(r, c));
        }
    }

    fn propagate(&mut self, i: usize, g: &Mat) {
        let op = self.nodes[i].op.clone();
        match op {
            Op::Input => {}
            Op::MatMul { x, w } => {
                if self.rg(w) {
                    self.ensure_grad(w);
                    let xv = std::mem::replace(&mut self.nodes[x.0].value, Mat::zeros(0, 0));
                    let mut gw = self.nodes[w.0].grad.take().unwrap();
                    accum_grad_w(&mut gw, g, &xv);
                    self.nodes[w.0].grad = Some(gw);
                    self.nodes[x.0].value = xv;
                }
                if self.rg(x) {
                    self.ensure_grad(x);
                    let wv = std::mem::replace(&mut self.nodes[w.0].value, Mat::zeros(0, 0));
                    let mut gx = self.nodes[x.0].grad.take().unwrap();
                    accum_grad_x(&mut gx, g, &wv);
                    self.nodes[x.0].grad = Some(gx);
                    self.nodes[w.0].value = wv;
                }
            }
            Op::AddBias { x, b } => {
                if self.rg(x) {
                    self.ensure_grad(x);
                    let gx = self.nodes[x.0].grad.as_mut().unwrap();
                    for (o, gi) in gx.data_mut().iter_mut().zip(g.data()) {
                        *o += gi;
                    }
                }
                if self.rg(b) {
                    self.ensure_grad(b);
                    let cols = g.cols();
                    let gb = self.nodes[b.0].grad.as_mut().unwrap();
                    for row in g.data().chunks(cols) {
                        for (o, gi) in gb.data_mut().iter_mut().zip(row) {
                            *o += gi;
                        }
                    }
                }
            }
            Op::SinAct { x, omega0, bw_omega0 } => {
                if self.rg(x) {
                    self.ensure_grad(x);
                    let xv = std::mem::replace(&mut self.nodes[x.0].value, Mat::zeros(0, 0));
                    {
                        let gx = self.nodes[x.0].grad.as_mut().unwrap();
                        sin_backward(gx.data_mut(), g.data(), xv.data(), omega0, bw_omega0);
                    }
                    self.nodes[x.0].value = xv;
                }
            }
            Op::ReluAct { x } => {
                if self.rg(x) {
                    self.ensure_grad(x);
                    let xv = std::mem::replace(&mut self.nodes[x.0].value, Mat::zeros(0, 0));
                    {
                        let gx = self.nodes[x.0].grad.as_mut().unwrap();
                        for ((o, gi), xi) in gx.data_mut().iter_mut().zip(g.data()).zip(xv.data()) {
                            if *xi > 0.0 {
                                *o += gi;
                            }
                        }
                    }
                    self.nodes[x.0].value = xv;
                }
            }
            Op::Concat { parts } => {
                let rows = g.rows();
                let mut off = 0;
                for &p in &parts {
                    let pc = self.nodes[p.0].value.cols();
                    if self.rg(p) {
                        self.ensure_grad(p);
                        let gp = self.nodes[p.0].grad.as_mut().unwrap();
                        for i in 0..rows {
                            let grow = &g.row(i)[off..off + pc];
                            for (o, gi) in gp.row_mut(i).iter_mut().zip(grow) {
                                *o += gi;
                            }
                        }
                    }
                    off += pc;
                }
            }
            Op::Scale { x, factor } => {
                if self.rg(x) {
                    self.ensure_grad(x);
                    let gx = self.nodes[x.0].grad.as_mut().unwrap();
                    for (o, gi) in gx.data_mut().iter_mut().zip(g.data()) {
                        *o += factor * gi;
                    }
                }
            }
            Op::Rotate3 { points, angles } => {
                let ang = [
                    self.nodes[angles.0].value.get(0, 0),
                    self.nodes[angles.0].value.get(0, 1),
                    self.nodes[angles.0].value.get(0, 2),
                ];
                let r = euler_to_matrix(ang);
                if self.rg(points) {
                    // dL/dP = G · Rᵀ, and matmul_nt multiplies by the transpose,
                    // so pass R directly.
                    self.ensure_grad(points);
                    let rmat = Mat::from_vec(3, 3, r.iter().flatten().copied().collect());
                    let add = g.matmul_nt(&rmat);
                    let gp = self.nodes[points.0].grad.as_mut().unwrap();
                    for (o, a) in gp.data_mut().iter_mut().zip(add.data()) {
                        *o += a;
                    }
                }
                if self.rg(angles) {
                    self.ensure_grad(angles);
                    let derivs = euler_to_matrix_derivs(ang);
                    let pv = &self.nodes[points.0].value;
                    let mut acc = [0.0f64; 3];
                    for (k, dr) in derivs.iter().enumerate() {
                        // Σ_ij G[i,j] · (P·dR)[i,j]; dR columns gathered per row.
                        let mut s = 0.0;
                        for i in 0..pv.rows() {
                            let p = pv.row(i);
                            let gr = g.row(i);
                            for j in 0..3 {
                                let pd = p[0] * dr[0][j] + p[1] * dr[1][j] + p[2] * dr[2][j];
                                s += gr[j] * pd;
                            }
                        }
                        acc[k] = s;
                    }
                    let ga = self.nodes[angles.0].grad.as_mut().unwrap();
                    for (k, a) in acc.iter().enumerate() {
                        let cur = ga.get(0, k);
                        ga.set(0, k, cur + a);
                    }
                }
            }
            Op::BroadcastRows { x } => {
                if self.rg(x) {
                    self.ensure_grad(x);
                    let cols = g.cols();
                    let gx = self.nodes[x.0].grad.as_mut().unwrap();
                    for row in g.data().chunks(cols) {
                        for (o, gi) in gx.data_mut().iter_mut().zip(row) {
                            *o += gi;
                        }
                    }
                }
            }
            Op::Sub { a, b } => {
                if self.rg(a) {
                    self.ensure_grad(a);
                    let ga = self.nodes[a.0].grad.as_mut().unwrap();
                    for (o, gi) in ga.data_mut().iter_mut().zip(g.data()) {
                        *o += gi;
                    }
                }
                if self.rg(b) {
                    self.ensure_grad(b);
                    let gb = self.nodes[b.0].grad.as_mut().unwrap();
                    for (o, gi) in gb.data_mut().iter_mut().zip(g.data()) {
                        *o -= gi;
                    }
                }
            }
            Op::MeanAbs { x } => {
                if self.rg(x) {
                    self.ensure_grad(x);
                    let scale = g.get(0, 0) / self.nodes[x.0].value.len() as f64;
                    let xv = std::mem::replace(&mut self.nodes[x.0].value, Mat::zeros(0, 0));
                    {
                        let gx = self.nodes[x.0].grad.as_mut().unwrap();
                        for (o, xi) in gx.data_mut().iter_mut().zip(xv.data()) {
                            // sign(0) = 0 by convention.
                            *o += scale * if *xi > 0.0 { 1.0 } else if *xi < 0.0 { -1.0 } else { 0.0 };
                        }
                    }
                    self.nodes[x.0].value = xv;
                }
            }
            Op::SumSq { x } => {
                if self.rg(x) {
                    self.ensure_grad(x);
                    let scale = 2.0 * g.get(0, 0);
                    let xv = std::mem::replace(&mut self.nodes[x.0].value, Mat::zeros(0, 0));
                    {
                        let gx = self.nodes[x.0].grad.as_mut().unwrap();
                        for (o, xi) in gx.data_mut().iter_mut().zip(xv.data()) {
                            *o += scale * xi;
                        }
                    }
                    self.nodes[x.0].value = xv;
                }
            }
            Op::SumScalars { parts } => {
                for &p in &parts {
                    if self.rg(p) {
                        self.ensure_grad(p);
                        let gp = self.nodes[p.0].grad.as_mut().unwrap();
                        let cur = gp.get(0, 0);
                        gp.set(0, 0, cur + g.get(0, 0));
                    }
                }
            }
        }
    }
}

fn rotate_points(points: &Mat, angles: &[f64]) -> Mat {
    crate::rot::rotate_points_rows(points, [angles[0], angles[1], angles[2]])
}

/// `gx += g · bw·cos(ω·x)` elementwise, parallel over chunks for large
/// tensors (elementwise, so the split cannot change results).
fn sin_backward(gx: &mut [f64], g: &[f64], xv: &[f64], omega0: f64, bw_omega0: f64) {
    use crate::mat::{PAR_ELEM_CHUNK, PAR_ELEM_THRESHOLD};
    use rayon::prelude::*;
    if gx.len() >= PAR_ELEM_THRESHOLD {
        gx.par_chunks_mut(PAR_ELEM_CHUNK)
            .zip(g.par_chunks(PAR_ELEM_CHUNK).zip(xv.par_chunks(PAR_ELEM_CHUNK)))
            .for_each(|(go, (gi, xi))| {
                for ((o, gi), xi) in go.iter_mut().zip(gi).zip(xi) {
                    *o += gi * bw_omega0 * (omega0 * xi).cos();
                }
            });
    } else {
        for ((o, gi), xi) in gx.iter_mut().zip(g).zip(xv) {
            *o += gi * bw_omega0 * (omega0 * xi).cos();
        }
    }
}

/// Result of a finite-difference gradient check.
#[derive(Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub pass: bool,
}

/// Compares analytic gradients against central finite differences.
///
/// `build` constructs a fresh graph and returns the scalar loss plus the
/// named parameter nodes to perturb. Differences use step `h`; the relative
/// error denominator is floored at 1e-7 so near-zero gradients compare
/// absolutely.
pub fn check_gradients(
    build: impl Fn(&mut Tape) -> (NodeId, Vec<(String, NodeId)>),
    h: f64,
    tol: f64,
) -> GradCheckReport {
    let mut tape = Tape::new();
    let (loss, params) = build(&mut tape);
    tape.backward(loss).expect("loss must be scalar");
    let analytic: Vec<Mat> = params.iter().map(|(_, id)| tape.grad(*id)).collect();

    let mut max_rel_err: f64 = 0.0;
    let mut worst_param = String::new();
    for ((name, id), ga) in params.iter().zip(&analytic) {
        let (rows, cols) = tape.value(*id).shape();
        for i in 0..rows {
            for j in 0..cols {
                let orig = tape.entry(*id, i, j);
                tape.set_entry(*id, i, j, orig + h);
                tape.replay();
                let up = tape.value(loss).get(0, 0);
                tape.set_entry(*id, i, j, orig - h);
                tape.replay();
                let down = tape.value(loss).get(0, 0);
                tape.set_entry(*id, i, j, orig);
                let fd = (up - down) / (2.0 * h);
                let a = ga.get(i, j);
                let denom = a.abs().max(fd.abs()).max(1e-7);
                let rel = (a - fd).abs() / denom;
                if rel > max_rel_err {
                    max_rel_err = rel;
                    worst_param = format!("{name}[{i},{j}]");
                }
            }
        }
    }
    // Restore values touched by the final replay.
    tape.replay();
    GradCheckReport {
        max_rel_err,
        worst_param,
        pass: max_rel_err <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_identity_and_hand_values() {
        let mut t = Tape::new();
        let x = t.constant(Mat::from_vec(1, 2, vec![1.0, 2.0]));
        let w = t.leaf(Mat::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]));
        let b = t.leaf(Mat::from_vec(1, 2, vec![0.0, 0.0]));
        let y = t.linear(x, w, b).unwrap();
        assert_eq!(t.value(y).data(), &[1.0, 2.0]);

        let x2 = t.constant(Mat::from_vec(1, 2, vec![1.0, 1.0]));
        let w2 = t.leaf(Mat::from_vec(1, 2, vec![2.0, 3.0]));
        let b2 = t.leaf(Mat::from_vec(1, 1, vec![1.0]));
        let y2 = t.linear(x2, w2, b2).unwrap();
        assert_eq!(t.value(y2).data(), &[6.0]);
    }

    #[test]
    fn linear_shape_mismatch_rejected() {
        let mut t = Tape::new();
        let x = t.constant(Mat::zeros(2, 3));
        let w = t.leaf(Mat::zeros(4, 2));
        let b = t.leaf(Mat::zeros(1, 4));
        assert!(t.linear(x, w, b).is_err());
    }

    #[test]
    fn sine_values() {
        let mut t = Tape::new();
        let x = t.constant(Mat::from_vec(1, 2, vec![0.0, std::f64::consts::PI / 60.0]));
        let y = t.sine(x, 30.0);
        assert_eq!(t.value(y).get(0, 0), 0.0);
        assert!((t.value(y).get(0, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn backward_sum_of_input_is_ones() {
        let mut t = Tape::new();
        let x = t.leaf(Mat::from_vec(2, 2, vec![1.0; 4]));
        // sum(x) via mean_abs * count on positive entries.
        let m = t.mean_abs(x).unwrap();
        let s = t.scale(m, 4.0);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).data(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn off_path_node_has_zero_grad() {
        let mut t = Tape::new();
        let x = t.leaf(Mat::from_vec(1, 2, vec![1.0, -2.0]));
        let unused = t.leaf(Mat::from_vec(1, 2, vec![3.0, 4.0]));
        let loss = t.mean_abs(x).unwrap();
        t.backward(loss).unwrap();
        assert_eq!(t.grad(unused).data(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let x = t.leaf(Mat::from_vec(1, 2, vec![1.0, 2.0]));
        assert!(matches!(
            t.backward(x),
            Err(GraphError::NonScalarLoss { .. })
        ));
    }

    #[test]
    fn l1_subgradient_at_zero_is_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Mat::from_vec(1, 3, vec![1.0, 0.0, -1.0]));
        let loss = t.mean_abs(x).unwrap();
        t.backward(loss).unwrap();
        let g = t.grad(x);
        assert!((g.get(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(g.get(0, 1), 0.0);
        assert!((g.get(0, 2) + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn replay_reproduces_forward_bitwise() {
        let mut t = Tape::new();
        let x = t.constant(Mat::from_vec(3, 2, vec![0.3, -0.7, 1.1, 0.2, -0.4, 0.9]));
        let w = t.leaf(Mat::from_vec(4, 2, vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8]));
        let b = t.leaf(Mat::from_vec(1, 4, vec![0.01, -0.02, 0.03, -0.04]));
        let lin = t.linear(x, w, b).unwrap();
        let act = t.sine(lin, 30.0);
        let loss = t.mean_abs(act).unwrap();
        let before = t.value(loss).get(0, 0);
        t.replay();
        let after = t.value(loss).get(0, 0);
        assert_eq!(before.to_bits(), after.to_bits());
    }

    #[test]
    fn gradcheck_linear_model_near_exact() {
        let report = check_gradients(
            |t| {
                let x = t.constant(Mat::from_vec(4, 3, vec![
                    0.5, -0.2, 0.8, 1.0, 0.3, -0.7, -0.9, 0.1, 0.4, 0.2, -0.6, 0.75,
                ]));
                let w = t.leaf(Mat::from_vec(2, 3, vec![0.3, -0.5, 0.9, -0.1, 0.7, 0.2]));
                let b = t.leaf(Mat::from_vec(1, 2, vec![0.05, -0.15]));
                let y = t.linear(x, w, b).unwrap();
                let target = t.constant(Mat::from_vec(4, 2, vec![
                    0.9, 0.1, -0.2, 0.4, 0.6, -0.8, 0.3, 0.7,
                ]));
                let d = t.sub(y, target).unwrap();
                let sq = t.sum_sq(d);
                (sq, vec![("w".into(), w), ("b".into(), b)])
            },
            1e-6,
            1e-9,
        );
        assert!(report.pass, "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn gradcheck_two_layer_sine_net() {
        let report = check_gradients(
            |t| {
                let x = t.constant(Mat::from_vec(8, 2, vec![
                    0.31, -0.22, 0.84, 0.10, -0.77, 0.42, 0.05, -0.93, 0.66, 0.27, -0.18, 0.59,
                    -0.41, -0.64, 0.73, 0.88,
                ]));
                let w1 = t.leaf(Mat::from_vec(5, 2, vec![
                    0.12, -0.30, 0.44, 0.21, -0.26, 0.18, 0.07, -0.41, 0.33, 0.25,
                ]));
                let b1 = t.leaf(Mat::from_vec(1, 5, vec![0.01, -0.02, 0.03, 0.02, -0.01]));
                let h = t.linear(x, w1, b1).unwrap();
                let a = t.sine(h, 7.0);
                let w2 = t.leaf(Mat::from_vec(1, 5, vec![0.5, -0.4, 0.3, -0.2, 0.1]));
                let b2 = t.leaf(Mat::from_vec(1, 1, vec![0.005]));
                let y = t.linear(a, w2, b2).unwrap();
                // Offset targets keep |residual| away from the L1 kink so the
                // finite-difference probe stays one-sided.
                let tv: Vec<f64> = t.value(y).data().iter().map(|v| v + 0.05).collect();
                let target = t.constant(Mat::from_vec(8, 1, tv));
                let d = t.sub(y, target).unwrap();
                let loss = t.mean_abs(d).unwrap();
                (
                    loss,
                    vec![
                        ("w1".into(), w1),
                        ("b1".into(), b1),
                        ("w2".into(), w2),
                        ("b2".into(), b2),
                    ],
                )
            },
            1e-6,
            1e-5,
        );
        assert!(report.pass, "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn gradcheck_rotate3_angles() {
        // The target must break rotation invariance (‖P·R‖² alone is
        // constant in R and only measures finite-difference noise).
        let report = check_gradients(
            |t| {
                let pts = t.constant(Mat::from_vec(6, 3, vec![
                    0.4, -0.1, 0.3, -0.5, 0.2, 0.6, 0.1, 0.8, -0.3, 0.7, -0.6, 0.2, -0.2, -0.4,
                    0.5, 0.3, 0.1, -0.7,
                ]));
                let ang = t.leaf(Mat::from_vec(1, 3, vec![0.3, -0.8, 1.2]));
                let rp = t.rotate3(pts, ang).unwrap();
                let target = t.constant(Mat::from_vec(6, 3, vec![
                    0.9, 0.2, -0.5, 0.1, -0.3, 0.8, -0.6, 0.4, 0.2, 0.3, 0.7, -0.1, 0.5, -0.2,
                    -0.9, -0.4, 0.6, 0.35,
                ]));
                let d = t.sub(rp, target).unwrap();
                let loss = t.sum_sq(d);
                (loss, vec![("angles".into(), ang)])
            },
            1e-6,
            1e-5,
        );
        assert!(report.pass, "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn gradcheck_detects_corrupted_sine_backward() {
        // Negative control: drop omega0 from the backward factor and the
        // checker must flag roughly |1 - 1/omega0| relative error.
        let omega0 = 5.0;
        let report = check_gradients(
            |t| {
                let x = t.constant(Mat::from_vec(4, 1, vec![0.21, -0.53, 0.08, 0.95]));
                let w = t.leaf(Mat::from_vec(1, 1, vec![0.7]));
                let b = t.leaf(Mat::from_vec(1, 1, vec![0.1]));
                let h = t.linear(x, w, b).unwrap();
                let a = t.sine_raw(h, omega0, 1.0);
                let loss = t.sum_sq(a);
                (loss, vec![("w".into(), w)])
            },
            1e-6,
            1e-5,
        );
        assert!(!report.pass);
        let expected = 1.0 - 1.0 / omega0;
        assert!(
            (report.max_rel_err - expected).abs() < 0.05,
            "err {} vs expected scale {}",
            report.max_rel_err,
            expected
        );
    }
}
