//! Reverse-mode differentiation over named parameters.
//!
//! A [`TapeGraph`] records tensor operations during a forward pass; calling
//! [`TapeGraph::backward`] walks the tape in reverse and accumulates
//! `d loss / d parameter` for every parameter leaf. The primitive set is
//! exactly what the model families here need: matmul, elementwise
//! arithmetic, concat, activations, gather/scatter by rows, segment
//! softmax/sum for message passing, a trilinear contraction, reductions,
//! and a training-only dropout mask.
//!
//! Reductions (matmul inner products, row/full sums, segment sums, the
//! trilinear contraction) accumulate in f64 and store f32.

use crate::error::{Error, Result};
use crate::params::ParameterSet;
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::rc::Rc;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRef(usize);

#[derive(Debug)]
enum Op {
    Param(String),
    Constant,
    Matmul(NodeRef, NodeRef),
    Add(NodeRef, NodeRef),
    Sub(NodeRef, NodeRef),
    Mul(NodeRef, NodeRef),
    AddRow(NodeRef, NodeRef),
    Scale(NodeRef, f32),
    AddScalar(NodeRef, f32),
    Neg(NodeRef),
    Relu(NodeRef),
    LeakyRelu(NodeRef, f32),
    Sigmoid(NodeRef),
    Log(NodeRef),
    Sqrt(NodeRef),
    Softplus(NodeRef),
    ConcatCols(NodeRef, NodeRef),
    GatherRows(NodeRef, Rc<Vec<usize>>),
    SegmentSum(NodeRef, Rc<Vec<usize>>),
    ScaleRows(NodeRef, NodeRef),
    ScaleRowsConst(NodeRef, Rc<Vec<f32>>),
    SegmentSoftmax(NodeRef, Rc<Vec<usize>>),
    RowSum(NodeRef),
    Trilinear {
        core: NodeRef,
        head: NodeRef,
        rel: NodeRef,
        tail: NodeRef,
    },
    SumAll(NodeRef),
    MeanAll(NodeRef),
    Dropout(NodeRef, Rc<Vec<f32>>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Param(_) => "param",
            Op::Constant => "constant",
            Op::Matmul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Neg(..) => "neg",
            Op::Relu(..) => "relu",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Sigmoid(..) => "sigmoid",
            Op::Log(..) => "log",
            Op::Sqrt(..) => "sqrt",
            Op::Softplus(..) => "softplus",
            Op::ConcatCols(..) => "concat_cols",
            Op::GatherRows(..) => "gather_rows",
            Op::SegmentSum(..) => "segment_sum",
            Op::ScaleRows(..) => "scale_rows",
            Op::ScaleRowsConst(..) => "scale_rows_const",
            Op::SegmentSoftmax(..) => "segment_softmax",
            Op::RowSum(..) => "row_sum",
            Op::Trilinear { .. } => "trilinear",
            Op::SumAll(..) => "sum_all",
            Op::MeanAll(..) => "mean_all",
            Op::Dropout(..) => "dropout",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
}

enum Mode {
    Train { dropout_rng: ChaCha8Rng },
    Eval,
}

/// Recorded forward computation over a borrowed [`ParameterSet`].
pub struct TapeGraph<'p> {
    params: &'p ParameterSet,
    nodes: Vec<Node>,
    param_nodes: BTreeMap<String, NodeRef>,
    mode: Mode,
}

impl<'p> TapeGraph<'p> {
    /// Training-mode tape. Dropout masks are drawn from a generator seeded
    /// with `dropout_seed`, so rebuilding with the same seed reproduces the
    /// same masks (required by the finite-difference checker).
    pub fn train(params: &'p ParameterSet, dropout_seed: u64) -> Self {
        TapeGraph {
            params,
            nodes: Vec::new(),
            param_nodes: BTreeMap::new(),
            mode: Mode::Train {
                dropout_rng: ChaCha8Rng::seed_from_u64(dropout_seed),
            },
        }
    }

    /// Evaluation-mode tape: dropout is the identity.
    pub fn eval(params: &'p ParameterSet) -> Self {
        TapeGraph {
            params,
            nodes: Vec::new(),
            param_nodes: BTreeMap::new(),
            mode: Mode::Eval,
        }
    }

    pub fn is_train(&self) -> bool {
        matches!(self.mode, Mode::Train { .. })
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeRef {
        self.nodes.push(Node { value, op });
        NodeRef(self.nodes.len() - 1)
    }

    /// Leaf bound to a named parameter; gradients flow back to it.
    pub fn param(&mut self, name: &str) -> Result<NodeRef> {
        if let Some(&r) = self.param_nodes.get(name) {
            return Ok(r);
        }
        let value = self.params.value(name)?.clone();
        let r = self.push(value, Op::Param(name.to_string()));
        self.param_nodes.insert(name.to_string(), r);
        Ok(r)
    }

    /// Leaf holding a frozen input; gradients stop here.
    pub fn constant(&mut self, t: Tensor) -> NodeRef {
        self.push(t, Op::Constant)
    }

    pub fn value(&self, r: NodeRef) -> &Tensor {
        &self.nodes[r.0].value
    }

    fn shape(&self, r: NodeRef) -> &[usize] {
        self.nodes[r.0].value.shape()
    }

    // ---- binary elementwise ----

    fn check_same_shape(&self, a: NodeRef, b: NodeRef, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "{what}: shapes {:?} and {:?} differ",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.check_same_shape(a, b, "add")?;
        let mut v = self.value(a).clone();
        for (x, y) in v.data_mut().iter_mut().zip(self.nodes[b.0].value.data()) {
            *x += y;
        }
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.check_same_shape(a, b, "sub")?;
        let mut v = self.value(a).clone();
        for (x, y) in v.data_mut().iter_mut().zip(self.nodes[b.0].value.data()) {
            *x -= y;
        }
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.check_same_shape(a, b, "mul")?;
        let mut v = self.value(a).clone();
        for (x, y) in v.data_mut().iter_mut().zip(self.nodes[b.0].value.data()) {
            *x *= y;
        }
        Ok(self.push(v, Op::Mul(a, b)))
    }

    /// `[n, d]` matrix plus a `[d]` row vector broadcast over rows.
    pub fn add_row(&mut self, x: NodeRef, row: NodeRef) -> Result<NodeRef> {
        let d = self.value(x).cols();
        if self.shape(row) != [d] {
            return Err(Error::Shape(format!(
                "add_row: row shape {:?} does not match matrix cols {d}",
                self.shape(row)
            )));
        }
        let mut v = self.value(x).clone();
        let n = v.rows();
        for i in 0..n {
            let rdata = self.nodes[row.0].value.data();
            for (x, y) in v.row_mut(i).iter_mut().zip(rdata) {
                *x += y;
            }
        }
        Ok(self.push(v, Op::AddRow(x, row)))
    }

    // ---- scalar and unary ----

    pub fn scale(&mut self, x: NodeRef, c: f32) -> NodeRef {
        let mut v = self.value(x).clone();
        v.data_mut().iter_mut().for_each(|a| *a *= c);
        self.push(v, Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: NodeRef, c: f32) -> NodeRef {
        let mut v = self.value(x).clone();
        v.data_mut().iter_mut().for_each(|a| *a += c);
        self.push(v, Op::AddScalar(x, c))
    }

    pub fn neg(&mut self, x: NodeRef) -> NodeRef {
        let mut v = self.value(x).clone();
        v.data_mut().iter_mut().for_each(|a| *a = -*a);
        self.push(v, Op::Neg(x))
    }

    pub fn relu(&mut self, x: NodeRef) -> NodeRef {
        let mut v = self.value(x).clone();
        v.data_mut().iter_mut().for_each(|a| *a = a.max(0.0));
        self.push(v, Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: NodeRef, slope: f32) -> NodeRef {
        let mut v = self.value(x).clone();
        v.data_mut()
            .iter_mut()
            .for_each(|a| *a = if *a > 0.0 { *a } else { slope * *a });
        self.push(v, Op::LeakyRelu(x, slope))
    }

    pub fn sigmoid(&mut self, x: NodeRef) -> NodeRef {
        let mut v = self.value(x).clone();
        v.data_mut().iter_mut().for_each(|a| *a = sigmoid_f(*a));
        self.push(v, Op::Sigmoid(x))
    }

    pub fn log(&mut self, x: NodeRef) -> NodeRef {
        let mut v = self.value(x).clone();
        v.data_mut().iter_mut().for_each(|a| *a = a.ln());
        self.push(v, Op::Log(x))
    }

    pub fn sqrt(&mut self, x: NodeRef) -> NodeRef {
        let mut v = self.value(x).clone();
        v.data_mut().iter_mut().for_each(|a| *a = a.sqrt());
        self.push(v, Op::Sqrt(x))
    }

    /// Numerically stable `ln(1 + exp(x))`.
    pub fn softplus(&mut self, x: NodeRef) -> NodeRef {
        let mut v = self.value(x).clone();
        v.data_mut().iter_mut().for_each(|a| *a = softplus_f(*a));
        self.push(v, Op::Softplus(x))
    }

    // ---- structure ----

    pub fn matmul(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        let v = crate::tensor::matmul(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::Matmul(a, b)))
    }

    pub fn concat_cols(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.rows() != tb.rows() {
            return Err(Error::Shape(format!(
                "concat_cols: shapes {:?} and {:?} incompatible",
                ta.shape(),
                tb.shape()
            )));
        }
        let (n, da, db) = (ta.rows(), ta.cols(), tb.cols());
        let mut data = Vec::with_capacity(n * (da + db));
        for i in 0..n {
            data.extend_from_slice(ta.row(i));
            data.extend_from_slice(tb.row(i));
        }
        let v = Tensor::from_vec(&[n, da + db], data)?;
        Ok(self.push(v, Op::ConcatCols(a, b)))
    }

    /// Pick rows of a matrix (or elements of a vector) by index, with
    /// repetition allowed. Gradients scatter-add back.
    pub fn gather_rows(&mut self, x: NodeRef, idx: Vec<usize>) -> Result<NodeRef> {
        let t = self.value(x);
        let n = t.rows();
        if let Some(bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::Index(format!(
                "gather_rows: index {bad} out of range ({n} rows)"
            )));
        }
        let d = t.cols();
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in &idx {
            data.extend_from_slice(t.row(i));
        }
        let shape = if t.shape().len() == 1 {
            vec![idx.len()]
        } else {
            vec![idx.len(), d]
        };
        let v = Tensor::from_vec(&shape, data)?;
        Ok(self.push(v, Op::GatherRows(x, Rc::new(idx))))
    }

    /// Sum rows of `x` into `num_segments` buckets: `out[s] = Σ_{i: seg[i]=s} x[i]`.
    pub fn segment_sum(
        &mut self,
        x: NodeRef,
        seg: Rc<Vec<usize>>,
        num_segments: usize,
    ) -> Result<NodeRef> {
        let t = self.value(x);
        if seg.len() != t.rows() {
            return Err(Error::Shape(format!(
                "segment_sum: {} segment ids for {} rows",
                seg.len(),
                t.rows()
            )));
        }
        if let Some(bad) = seg.iter().find(|&&s| s >= num_segments) {
            return Err(Error::Index(format!(
                "segment_sum: segment {bad} out of range ({num_segments})"
            )));
        }
        let d = t.cols();
        let mut acc = vec![0.0f64; num_segments * d];
        for (i, &s) in seg.iter().enumerate() {
            for (j, v) in t.row(i).iter().enumerate() {
                acc[s * d + j] += *v as f64;
            }
        }
        let v = Tensor::from_vec(
            &[num_segments, d],
            acc.into_iter().map(|a| a as f32).collect(),
        )?;
        Ok(self.push(v, Op::SegmentSum(x, seg)))
    }

    /// Scale row `i` of `x` by `w[i]`; `w` has shape `[n]` or `[n, 1]`.
    pub fn scale_rows(&mut self, x: NodeRef, w: NodeRef) -> Result<NodeRef> {
        let n = self.value(x).rows();
        if self.value(w).numel() != n {
            return Err(Error::Shape(format!(
                "scale_rows: weight numel {} != rows {n}",
                self.value(w).numel()
            )));
        }
        let mut v = self.value(x).clone();
        for i in 0..n {
            let wi = self.nodes[w.0].value.data()[i];
            v.row_mut(i).iter_mut().for_each(|a| *a *= wi);
        }
        Ok(self.push(v, Op::ScaleRows(x, w)))
    }

    /// Scale rows by fixed, non-differentiated weights (e.g. 1/|N_i|).
    pub fn scale_rows_const(&mut self, x: NodeRef, w: Rc<Vec<f32>>) -> Result<NodeRef> {
        let n = self.value(x).rows();
        if w.len() != n {
            return Err(Error::Shape(format!(
                "scale_rows_const: {} weights for {n} rows",
                w.len()
            )));
        }
        let mut v = self.value(x).clone();
        for i in 0..n {
            let wi = w[i];
            v.row_mut(i).iter_mut().for_each(|a| *a *= wi);
        }
        Ok(self.push(v, Op::ScaleRowsConst(x, w)))
    }

    /// Softmax over entries sharing a segment id. `logits` has shape `[e]`
    /// or `[e, 1]`; within each segment the outputs are positive and sum
    /// to one.
    pub fn segment_softmax(&mut self, logits: NodeRef, seg: Rc<Vec<usize>>) -> Result<NodeRef> {
        let t = self.value(logits);
        if seg.len() != t.rows() || t.cols() != 1 {
            return Err(Error::Shape(format!(
                "segment_softmax: logits shape {:?} with {} segment ids",
                t.shape(),
                seg.len()
            )));
        }
        let nseg = seg.iter().copied().max().map_or(0, |m| m + 1);
        let mut seg_max = vec![f32::NEG_INFINITY; nseg];
        for (i, &s) in seg.iter().enumerate() {
            seg_max[s] = seg_max[s].max(t.data()[i]);
        }
        let mut exps: Vec<f32> = Vec::with_capacity(seg.len());
        let mut seg_sum = vec![0.0f64; nseg];
        for (i, &s) in seg.iter().enumerate() {
            let e = (t.data()[i] - seg_max[s]).exp();
            exps.push(e);
            seg_sum[s] += e as f64;
        }
        let mut v = self.value(logits).clone();
        for (i, &s) in seg.iter().enumerate() {
            v.data_mut()[i] = (exps[i] as f64 / seg_sum[s]) as f32;
        }
        Ok(self.push(v, Op::SegmentSoftmax(logits, seg)))
    }

    /// Per-row sum: `[n, d]` to `[n]`.
    pub fn row_sum(&mut self, x: NodeRef) -> Result<NodeRef> {
        let t = self.value(x);
        if t.shape().len() != 2 {
            return Err(Error::Shape(format!(
                "row_sum expects a matrix, got {:?}",
                t.shape()
            )));
        }
        let data: Vec<f32> = (0..t.rows())
            .map(|i| t.row(i).iter().map(|v| *v as f64).sum::<f64>() as f32)
            .collect();
        let v = Tensor::from_vec(&[t.rows()], data)?;
        Ok(self.push(v, Op::RowSum(x)))
    }

    /// Batched trilinear contraction `out[s] = Σ_{a,b,c} core[a,b,c]·head[s,a]·rel[s,b]·tail[s,c]`.
    pub fn trilinear(
        &mut self,
        core: NodeRef,
        head: NodeRef,
        rel: NodeRef,
        tail: NodeRef,
    ) -> Result<NodeRef> {
        let cs = self.shape(core).to_vec();
        if cs.len() != 3 {
            return Err(Error::Shape(format!("trilinear core shape {cs:?} not 3-d")));
        }
        let (da, db, dc) = (cs[0], cs[1], cs[2]);
        let (h, r, t) = (self.value(head), self.value(rel), self.value(tail));
        let batch = h.rows();
        if h.cols() != da || r.cols() != db || t.cols() != dc || r.rows() != batch || t.rows() != batch
        {
            return Err(Error::Shape(format!(
                "trilinear: core {cs:?} with head {:?}, rel {:?}, tail {:?}",
                h.shape(),
                r.shape(),
                t.shape()
            )));
        }
        let core_data = self.value(core).data();
        let mut out = Vec::with_capacity(batch);
        for s in 0..batch {
            let (hs, rs, ts) = (
                self.value(head).row(s),
                self.value(rel).row(s),
                self.value(tail).row(s),
            );
            let mut acc = 0.0f64;
            for a in 0..da {
                let ha = hs[a] as f64;
                if ha == 0.0 {
                    continue;
                }
                for b in 0..db {
                    let hr = ha * rs[b] as f64;
                    let base = (a * db + b) * dc;
                    for c in 0..dc {
                        acc += hr * core_data[base + c] as f64 * ts[c] as f64;
                    }
                }
            }
            out.push(acc as f32);
        }
        let v = Tensor::from_vec(&[batch], out)?;
        Ok(self.push(v, Op::Trilinear { core, head, rel, tail }))
    }

    pub fn sum_all(&mut self, x: NodeRef) -> NodeRef {
        let s: f64 = self.value(x).data().iter().map(|v| *v as f64).sum();
        self.push(Tensor::scalar(s as f32), Op::SumAll(x))
    }

    pub fn mean_all(&mut self, x: NodeRef) -> NodeRef {
        let n = self.value(x).numel().max(1);
        let s: f64 = self.value(x).data().iter().map(|v| *v as f64).sum();
        self.push(Tensor::scalar((s / n as f64) as f32), Op::MeanAll(x))
    }

    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `rate` and survivors are scaled by `1/(1-rate)`; in
    /// eval mode this is the identity.
    pub fn dropout(&mut self, x: NodeRef, rate: f32) -> NodeRef {
        if rate <= 0.0 {
            return x;
        }
        match &mut self.mode {
            Mode::Eval => x,
            Mode::Train { dropout_rng } => {
                let keep = 1.0 - rate;
                let scale = 1.0 / keep;
                let mask: Vec<f32> = (0..self.nodes[x.0].value.numel())
                    .map(|_| {
                        if dropout_rng.gen::<f32>() < keep {
                            scale
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let mut v = self.nodes[x.0].value.clone();
                for (a, m) in v.data_mut().iter_mut().zip(&mask) {
                    *a *= m;
                }
                self.push(v, Op::Dropout(x, Rc::new(mask)))
            }
        }
    }

    // ---- backward ----

    /// Backpropagate from a scalar loss node. Returns the gradient of the
    /// loss with respect to every parameter leaf that was touched.
    ///
    /// If the loss is non-finite, the error names the first primitive on
    /// the tape whose output went non-finite.
    pub fn backward(&self, loss: NodeRef) -> Result<BTreeMap<String, Tensor>> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Shape(format!(
                "backward expects a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        if !self.value(loss).item().is_finite() {
            let culprit = self
                .nodes
                .iter()
                .find(|n| !n.value.is_finite())
                .map(|n| n.op.name())
                .unwrap_or("loss");
            return Err(Error::Numeric(format!(
                "non-finite loss (first non-finite output from primitive `{culprit}`)"
            )));
        }

        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..self.nodes.len()).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        let mut out = BTreeMap::new();
        for (name, r) in &self.param_nodes {
            if let Some(g) = grads[r.0].take() {
                out.insert(name.clone(), g);
            }
        }
        Ok(out)
    }

    fn add_grad(&self, grads: &mut [Option<Tensor>], target: NodeRef, g: Tensor) {
        match &mut grads[target.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn backprop_node(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &self.nodes[i].op {
            Op::Param(_) | Op::Constant => {}
            Op::Add(a, b) => {
                self.add_grad(grads, *a, g.clone());
                self.add_grad(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.add_grad(grads, *a, g.clone());
                let mut gb = g.clone();
                gb.data_mut().iter_mut().for_each(|v| *v = -*v);
                self.add_grad(grads, *b, gb);
            }
            Op::Mul(a, b) => {
                let mut ga = g.clone();
                for (x, y) in ga.data_mut().iter_mut().zip(self.value(*b).data()) {
                    *x *= y;
                }
                let mut gb = g.clone();
                for (x, y) in gb.data_mut().iter_mut().zip(self.value(*a).data()) {
                    *x *= y;
                }
                self.add_grad(grads, *a, ga);
                self.add_grad(grads, *b, gb);
            }
            Op::AddRow(x, row) => {
                self.add_grad(grads, *x, g.clone());
                let d = self.value(*row).numel();
                let mut acc = vec![0.0f64; d];
                for i in 0..g.rows() {
                    for (j, v) in g.row(i).iter().enumerate() {
                        acc[j] += *v as f64;
                    }
                }
                let gr = Tensor::from_vec(&[d], acc.into_iter().map(|v| v as f32).collect())
                    .expect("add_row grad shape");
                self.add_grad(grads, *row, gr);
            }
            Op::Scale(x, c) => {
                let mut gx = g.clone();
                gx.data_mut().iter_mut().for_each(|v| *v *= c);
                self.add_grad(grads, *x, gx);
            }
            Op::AddScalar(x, _) => self.add_grad(grads, *x, g.clone()),
            Op::Neg(x) => {
                let mut gx = g.clone();
                gx.data_mut().iter_mut().for_each(|v| *v = -*v);
                self.add_grad(grads, *x, gx);
            }
            Op::Relu(x) => {
                let mut gx = g.clone();
                for (v, inp) in gx.data_mut().iter_mut().zip(self.value(*x).data()) {
                    if *inp <= 0.0 {
                        *v = 0.0;
                    }
                }
                self.add_grad(grads, *x, gx);
            }
            Op::LeakyRelu(x, slope) => {
                let mut gx = g.clone();
                for (v, inp) in gx.data_mut().iter_mut().zip(self.value(*x).data()) {
                    if *inp <= 0.0 {
                        *v *= slope;
                    }
                }
                self.add_grad(grads, *x, gx);
            }
            Op::Sigmoid(x) => {
                let mut gx = g.clone();
                for (v, y) in gx.data_mut().iter_mut().zip(self.nodes[i].value.data()) {
                    *v *= y * (1.0 - y);
                }
                self.add_grad(grads, *x, gx);
            }
            Op::Log(x) => {
                let mut gx = g.clone();
                for (v, inp) in gx.data_mut().iter_mut().zip(self.value(*x).data()) {
                    *v /= inp;
                }
                self.add_grad(grads, *x, gx);
            }
            Op::Sqrt(x) => {
                let mut gx = g.clone();
                for (v, y) in gx.data_mut().iter_mut().zip(self.nodes[i].value.data()) {
                    *v *= 0.5 / y.max(1e-12);
                }
                self.add_grad(grads, *x, gx);
            }
            Op::Softplus(x) => {
                let mut gx = g.clone();
                for (v, inp) in gx.data_mut().iter_mut().zip(self.value(*x).data()) {
                    *v *= sigmoid_f(*inp);
                }
                self.add_grad(grads, *x, gx);
            }
            Op::Matmul(a, b) => {
                // dA = dC @ B^T ; dB = A^T @ dC
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                let mut ga = vec![0.0f64; m * k];
                for i in 0..m {
                    for l in 0..k {
                        let mut acc = 0.0f64;
                        for j in 0..n {
                            acc += g.data()[i * n + j] as f64 * tb.data()[l * n + j] as f64;
                        }
                        ga[i * k + l] = acc;
                    }
                }
                let mut gb = vec![0.0f64; k * n];
                for l in 0..k {
                    for j in 0..n {
                        let mut acc = 0.0f64;
                        for i in 0..m {
                            acc += ta.data()[i * k + l] as f64 * g.data()[i * n + j] as f64;
                        }
                        gb[l * n + j] = acc;
                    }
                }
                self.add_grad(
                    grads,
                    *a,
                    Tensor::from_vec(&[m, k], ga.into_iter().map(|v| v as f32).collect())
                        .expect("matmul grad a"),
                );
                self.add_grad(
                    grads,
                    *b,
                    Tensor::from_vec(&[k, n], gb.into_iter().map(|v| v as f32).collect())
                        .expect("matmul grad b"),
                );
            }
            Op::ConcatCols(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (n, da, db) = (ta.rows(), ta.cols(), tb.cols());
                let mut ga = Tensor::zeros(ta.shape());
                let mut gb = Tensor::zeros(tb.shape());
                for i in 0..n {
                    ga.row_mut(i).copy_from_slice(&g.row(i)[..da]);
                    gb.row_mut(i).copy_from_slice(&g.row(i)[da..da + db]);
                }
                self.add_grad(grads, *a, ga);
                self.add_grad(grads, *b, gb);
            }
            Op::GatherRows(x, idx) => {
                let mut gx = Tensor::zeros(self.value(*x).shape());
                let d = gx.cols();
                for (out_i, &src_i) in idx.iter().enumerate() {
                    let gr = &g.data()[out_i * d..(out_i + 1) * d];
                    for (v, gv) in gx.row_mut(src_i).iter_mut().zip(gr) {
                        *v += gv;
                    }
                }
                self.add_grad(grads, *x, gx);
            }
            Op::SegmentSum(x, seg) => {
                let mut gx = Tensor::zeros(self.value(*x).shape());
                let d = gx.cols();
                for (i, &s) in seg.iter().enumerate() {
                    let gr = &g.data()[s * d..(s + 1) * d];
                    gx.row_mut(i).copy_from_slice(gr);
                }
                self.add_grad(grads, *x, gx);
            }
            Op::ScaleRows(x, w) => {
                let tx = self.value(*x);
                let tw = self.value(*w);
                let mut gx = g.clone();
                let mut gw = Tensor::zeros(tw.shape());
                for i in 0..tx.rows() {
                    let wi = tw.data()[i];
                    let mut dot = 0.0f64;
                    for (gv, xv) in g.row(i).iter().zip(tx.row(i)) {
                        dot += *gv as f64 * *xv as f64;
                    }
                    gx.row_mut(i).iter_mut().for_each(|v| *v *= wi);
                    gw.data_mut()[i] = dot as f32;
                }
                self.add_grad(grads, *x, gx);
                self.add_grad(grads, *w, gw);
            }
            Op::ScaleRowsConst(x, w) => {
                let mut gx = g.clone();
                for i in 0..gx.rows() {
                    let wi = w[i];
                    gx.row_mut(i).iter_mut().for_each(|v| *v *= wi);
                }
                self.add_grad(grads, *x, gx);
            }
            Op::SegmentSoftmax(x, seg) => {
                // dx = y ⊙ (dy − Σ_seg dy⊙y)
                let y = self.nodes[i].value.data();
                let nseg = seg.iter().copied().max().map_or(0, |m| m + 1);
                let mut seg_dot = vec![0.0f64; nseg];
                for (j, &s) in seg.iter().enumerate() {
                    seg_dot[s] += g.data()[j] as f64 * y[j] as f64;
                }
                let mut gx = g.clone();
                for (j, &s) in seg.iter().enumerate() {
                    gx.data_mut()[j] = (y[j] as f64 * (g.data()[j] as f64 - seg_dot[s])) as f32;
                }
                self.add_grad(grads, *x, gx);
            }
            Op::RowSum(x) => {
                let tx = self.value(*x);
                let mut gx = Tensor::zeros(tx.shape());
                for i in 0..tx.rows() {
                    let gi = g.data()[i];
                    gx.row_mut(i).iter_mut().for_each(|v| *v = gi);
                }
                self.add_grad(grads, *x, gx);
            }
            Op::Trilinear { core, head, rel, tail } => {
                let cs = self.shape(*core).to_vec();
                let (da, db, dc) = (cs[0], cs[1], cs[2]);
                let w = self.value(*core).data();
                let (th, tr, tt) = (self.value(*head), self.value(*rel), self.value(*tail));
                let batch = th.rows();
                let mut gcore = vec![0.0f64; da * db * dc];
                let mut ghead = Tensor::zeros(th.shape());
                let mut grel = Tensor::zeros(tr.shape());
                let mut gtail = Tensor::zeros(tt.shape());
                for s in 0..batch {
                    let gs = g.data()[s] as f64;
                    if gs == 0.0 {
                        continue;
                    }
                    let (hs, rs, ts) = (th.row(s), tr.row(s), tt.row(s));
                    let gh = ghead.row_mut(s);
                    for a in 0..da {
                        let mut acc_h = 0.0f64;
                        for b in 0..db
                        {
                            let rb = rs[b] as f64;
                            let base = (a * db + b) * dc;
                            let mut inner = 0.0f64;
                            for c in 0..dc {
                                inner += w[base + c] as f64 * ts[c] as f64;
                            }
                            acc_h += rb * inner;
                        }
                        gh[a] += (gs * acc_h) as f32;
                    }
                    let gr = grel.row_mut(s);
                    for b in 0..db {
                        let mut acc_r = 0.0f64;
                        for a in 0..da {
                            let ha = hs[a] as f64;
                            let base = (a * db + b) * dc;
                            let mut inner = 0.0f64;
                            for c in 0..dc {
                                inner += w[base + c] as f64 * ts[c] as f64;
                            }
                            acc_r += ha * inner;
                        }
                        gr[b] += (gs * acc_r) as f32;
                    }
                    let gt = gtail.row_mut(s);
                    for c in 0..dc {
                        let mut acc_t = 0.0f64;
                        for a in 0..da {
                            let ha = hs[a] as f64;
                            for b in 0..db {
                                acc_t += ha * rs[b] as f64 * w[(a * db + b) * dc + c] as f64;
                            }
                        }
                        gt[c] += (gs * acc_t) as f32;
                    }
                    for a in 0..da {
                        let gha = gs * hs[a] as f64;
                        for b in 0..db {
                            let ghr = gha * rs[b] as f64;
                            let base = (a * db + b) * dc;
                            for c in 0..dc {
                                gcore[base + c] += ghr * ts[c] as f64;
                            }
                        }
                    }
                }
                self.add_grad(
                    grads,
                    *core,
                    Tensor::from_vec(&cs, gcore.into_iter().map(|v| v as f32).collect())
                        .expect("trilinear core grad"),
                );
                self.add_grad(grads, *head, ghead);
                self.add_grad(grads, *rel, grel);
                self.add_grad(grads, *tail, gtail);
            }
            Op::SumAll(x) => {
                let gv = g.item();
                let mut gx = Tensor::zeros(self.value(*x).shape());
                gx.fill(gv);
                self.add_grad(grads, *x, gx);
            }
            Op::MeanAll(x) => {
                let n = self.value(*x).numel().max(1);
                let gv = g.item() / n as f32;
                let mut gx = Tensor::zeros(self.value(*x).shape());
                gx.fill(gv);
                self.add_grad(grads, *x, gx);
            }
            Op::Dropout(x, mask) => {
                let mut gx = g.clone();
                for (v, m) in gx.data_mut().iter_mut().zip(mask.iter()) {
                    *v *= m;
                }
                self.add_grad(grads, *x, gx);
            }
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid_f(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + exp(x))`.
pub fn softplus_f(x: f32) -> f32 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Run a forward pass built by `build`, backpropagate, and accumulate
/// gradients into `params`. Returns the scalar loss.
pub fn forward_backward<F>(params: &mut ParameterSet, dropout_seed: u64, build: F) -> Result<f32>
where
    F: FnOnce(&mut TapeGraph) -> Result<NodeRef>,
{
    let (loss_value, grads) = {
        let mut g = TapeGraph::train(params, dropout_seed);
        let loss = build(&mut g)?;
        let grads = g.backward(loss)?;
        (g.value(loss).item(), grads)
    };
    for (name, grad) in &grads {
        params.accumulate_grad(name, grad)?;
    }
    Ok(loss_value)
}
