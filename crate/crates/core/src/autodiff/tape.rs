use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{gemm, Matrix};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Index of a [`Parameter`] inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Parameter {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Ordered collection of trainable parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Parameter>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, param: Parameter) -> ParamId {
        self.params.push(param);
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn zero_grads(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// Node-to-group assignment used by segment pooling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segments {
    ids: Vec<usize>,
    sizes: Vec<usize>,
}

impl Segments {
    pub fn new(ids: Vec<usize>, count: usize) -> Result<Self> {
        let mut sizes = vec![0; count];
        for &id in &ids {
            if id >= count {
                return Err(Error::ShapeMismatch {
                    op: "Segments::new",
                    left: (id, 0),
                    right: (count, 0),
                });
            }
            sizes[id] += 1;
        }
        Ok(Segments { ids, sizes })
    }

    /// Every row in one segment.
    pub fn single(rows: usize) -> Self {
        Segments {
            ids: vec![0; rows],
            sizes: vec![rows],
        }
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }
}

/// Fixed sparse linear map: `out[dst] += weight * x[src]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub num_out: usize,
    pub num_in: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    ScalarMul(Var, f64),
    ScaleRows(Var, Var),
    RowConcat(Vec<Var>),
    ColConcat(Vec<Var>),
    RowSlice(Var, usize),
    LeakyRelu(Var, f64),
    Relu(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    MaskedSoftmax(Var),
    SegmentMean(Var, Rc<Segments>),
    SegmentMaxAbs(Var, Vec<usize>),
    Gather(Var, Rc<Vec<usize>>),
    ScatterAdd(Var, Rc<Vec<usize>>),
    GroupSoftmax(Var, Rc<Vec<usize>>),
    Propagate(Var, Rc<Propagation>),
    Dropout(Var, Vec<f64>),
    Log(Var),
    Exp(Var),
    Transpose(Var),
    Sum(Var),
    Mean(Var),
    Nll(Var, Rc<Vec<usize>>, Rc<Vec<f64>>),
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Records forward operations so gradients can be computed in reverse.
///
/// Nodes are appended in evaluation order, which is already a topological
/// order, so backward walks the node list from the end.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, left: &Matrix, right: &Matrix) -> Error {
    Error::ShapeMismatch {
        op,
        left: left.shape(),
        right: right.shape(),
    }
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

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Var {
        self.push(params.get(id).value.clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    fn zip_with(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Matrix> {
        let (x, y) = (self.value(a), self.value(b));
        x.check_same(name, y)?;
        let data = x
            .as_slice()
            .iter()
            .zip(y.as_slice())
            .map(|(&p, &q)| f(p, q))
            .collect();
        Matrix::new(x.rows(), x.cols(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with("add", a, b, |p, q| p + q)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with("sub", a, b, |p, q| p - q)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with("mul", a, b, |p, q| p * q)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// Adds the `1 x c` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(shape_err("add_row", x, b));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (o, &v) in out.row_mut(r).iter_mut().zip(b.as_slice()) {
                *o += v;
            }
        }
        Ok(self.push(out, Op::AddRow(a, bias)))
    }

    pub fn scalar_mul(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x * s);
        self.push(out, Op::ScalarMul(a, s))
    }

    /// Multiplies row `r` of `a` by `s[r]`, where `s` is a column vector.
    pub fn scale_rows(&mut self, a: Var, s: Var) -> Result<Var> {
        let (x, w) = (self.value(a), self.value(s));
        if w.cols() != 1 || w.rows() != x.rows() {
            return Err(shape_err("scale_rows", x, w));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            let f = w[(r, 0)];
            out.row_mut(r).iter_mut().for_each(|v| *v *= f);
        }
        Ok(self.push(out, Op::ScaleRows(a, s)))
    }

    /// Stacks matrices vertically.
    pub fn row_concat(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts.first().map_or(0, |&p| self.value(p).cols());
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let m = self.value(p);
            if m.cols() != cols {
                return Err(shape_err("row_concat", self.value(parts[0]), m));
            }
            rows += m.rows();
            data.extend_from_slice(m.as_slice());
        }
        let out = Matrix::new(rows, cols, data)?;
        Ok(self.push(out, Op::RowConcat(parts.to_vec())))
    }

    /// Places matrices side by side.
    pub fn col_concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map_or(0, |&p| self.value(p).rows());
        let mut cols = 0;
        for &p in parts {
            let m = self.value(p);
            if m.rows() != rows {
                return Err(shape_err("col_concat", self.value(parts[0]), m));
            }
            cols += m.cols();
        }
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let m = &self.nodes[p.0].value;
            for r in 0..rows {
                out.row_mut(r)[offset..offset + m.cols()].copy_from_slice(m.row(r));
            }
            offset += m.cols();
        }
        Ok(self.push(out, Op::ColConcat(parts.to_vec())))
    }

    /// Rows `start..start + len` of `a`.
    pub fn row_slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        if start + len > x.rows() {
            return Err(Error::ShapeMismatch {
                op: "row_slice",
                left: x.shape(),
                right: (start + len, x.cols()),
            });
        }
        let data = x.as_slice()[start * x.cols()..(start + len) * x.cols()].to_vec();
        let out = Matrix::new(len, x.cols(), data)?;
        Ok(self.push(out, Op::RowSlice(a, start)))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self
            .value(a)
            .map(|x| if x > 0.0 { x } else { slope * x });
        self.push(out, Op::LeakyRelu(a, slope))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = x.clone();
        for r in 0..out.rows() {
            softmax_in_place(out.row_mut(r));
        }
        self.push(out, Op::SoftmaxRows(a))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = x.clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            row.iter_mut().for_each(|v| *v -= log_sum);
        }
        self.push(out, Op::LogSoftmaxRows(a))
    }

    /// Row softmax over the entries where `mask` is set; masked-out entries
    /// are exactly zero. Every row needs at least one unmasked entry.
    pub fn masked_softmax(&mut self, a: Var, mask: Rc<Vec<bool>>) -> Result<Var> {
        let x = self.value(a);
        if mask.len() != x.len() {
            return Err(Error::ShapeMismatch {
                op: "masked_softmax",
                left: x.shape(),
                right: (mask.len(), 1),
            });
        }
        let cols = x.cols();
        let mut out = Matrix::zeros(x.rows(), cols);
        for r in 0..x.rows() {
            let keep = &mask[r * cols..(r + 1) * cols];
            let row = x.row(r);
            let max = row
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(&v, _)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::ShapeMismatch {
                    op: "masked_softmax (row fully masked)",
                    left: (r, cols),
                    right: (0, 0),
                });
            }
            let out_row = out.row_mut(r);
            let mut total = 0.0;
            for c in 0..cols {
                if keep[c] {
                    out_row[c] = (row[c] - max).exp();
                    total += out_row[c];
                }
            }
            out_row.iter_mut().for_each(|v| *v /= total);
        }
        Ok(self.push(out, Op::MaskedSoftmax(a)))
    }

    /// Per-segment mean of rows; empty segments give zero rows.
    pub fn segment_mean(&mut self, a: Var, segments: Rc<Segments>) -> Result<Var> {
        let x = self.value(a);
        if segments.ids().len() != x.rows() {
            return Err(Error::ShapeMismatch {
                op: "segment_mean",
                left: x.shape(),
                right: (segments.ids().len(), segments.count()),
            });
        }
        let mut out = Matrix::zeros(segments.count(), x.cols());
        for (r, &s) in segments.ids().iter().enumerate() {
            for (o, &v) in out.row_mut(s).iter_mut().zip(x.row(r)) {
                *o += v;
            }
        }
        for (s, &size) in segments.sizes().iter().enumerate() {
            if size > 0 {
                out.row_mut(s).iter_mut().for_each(|v| *v /= size as f64);
            }
        }
        Ok(self.push(out, Op::SegmentMean(a, segments)))
    }

    /// Per-segment, per-column maximum of absolute values.
    pub fn segment_max_abs(&mut self, a: Var, segments: &Segments) -> Result<Var> {
        let x = self.value(a);
        if segments.ids().len() != x.rows() {
            return Err(Error::ShapeMismatch {
                op: "segment_max_abs",
                left: x.shape(),
                right: (segments.ids().len(), segments.count()),
            });
        }
        let cols = x.cols();
        let mut out = Matrix::zeros(segments.count(), cols);
        let mut best = vec![usize::MAX; segments.count() * cols];
        for (r, &s) in segments.ids().iter().enumerate() {
            for c in 0..cols {
                let v = x[(r, c)].abs();
                let slot = s * cols + c;
                if best[slot] == usize::MAX || v > out[(s, c)] {
                    out[(s, c)] = v;
                    best[slot] = r;
                }
            }
        }
        Ok(self.push(out, Op::SegmentMaxAbs(a, best)))
    }

    /// `out[e] = a[index[e]]`
    pub fn gather_rows(&mut self, a: Var, index: Rc<Vec<usize>>) -> Result<Var> {
        let x = self.value(a);
        let mut out = Matrix::zeros(index.len(), x.cols());
        for (e, &i) in index.iter().enumerate() {
            if i >= x.rows() {
                return Err(Error::ShapeMismatch {
                    op: "gather_rows",
                    left: x.shape(),
                    right: (i, 0),
                });
            }
            out.row_mut(e).copy_from_slice(x.row(i));
        }
        Ok(self.push(out, Op::Gather(a, index)))
    }

    /// `out[index[e]] += a[e]`, producing `rows` rows.
    pub fn scatter_add_rows(&mut self, a: Var, index: Rc<Vec<usize>>, rows: usize) -> Result<Var> {
        let x = self.value(a);
        if index.len() != x.rows() || index.iter().any(|&i| i >= rows) {
            return Err(Error::ShapeMismatch {
                op: "scatter_add_rows",
                left: x.shape(),
                right: (index.len(), rows),
            });
        }
        let mut out = Matrix::zeros(rows, x.cols());
        for (e, &i) in index.iter().enumerate() {
            for (o, &v) in out.row_mut(i).iter_mut().zip(x.row(e)) {
                *o += v;
            }
        }
        Ok(self.push(out, Op::ScatterAdd(a, index)))
    }

    /// Softmax of each column of `a` over rows sharing the same group id.
    /// This is the sparse form of a neighbourhood-masked softmax: rows are
    /// edges and groups are their target nodes.
    pub fn group_softmax(&mut self, a: Var, groups: Rc<Vec<usize>>) -> Result<Var> {
        let x = self.value(a);
        if groups.len() != x.rows() {
            return Err(Error::ShapeMismatch {
                op: "group_softmax",
                left: x.shape(),
                right: (groups.len(), 1),
            });
        }
        let n_groups = groups.iter().map(|&g| g + 1).max().unwrap_or(0);
        let cols = x.cols();
        let mut max = Matrix::filled(n_groups, cols, f64::NEG_INFINITY);
        for (e, &g) in groups.iter().enumerate() {
            for c in 0..cols {
                max[(g, c)] = max[(g, c)].max(x[(e, c)]);
            }
        }
        let mut out = Matrix::zeros(x.rows(), cols);
        let mut total = Matrix::zeros(n_groups, cols);
        for (e, &g) in groups.iter().enumerate() {
            for c in 0..cols {
                let v = (x[(e, c)] - max[(g, c)]).exp();
                out[(e, c)] = v;
                total[(g, c)] += v;
            }
        }
        for (e, &g) in groups.iter().enumerate() {
            for c in 0..cols {
                out[(e, c)] /= total[(g, c)];
            }
        }
        Ok(self.push(out, Op::GroupSoftmax(a, groups)))
    }

    pub fn propagate(&mut self, a: Var, prop: Rc<Propagation>) -> Result<Var> {
        let x = self.value(a);
        if x.rows() != prop.num_in {
            return Err(Error::ShapeMismatch {
                op: "propagate",
                left: x.shape(),
                right: (prop.num_out, prop.num_in),
            });
        }
        let mut out = Matrix::zeros(prop.num_out, x.cols());
        for &(dst, src, w) in &prop.entries {
            for (o, &v) in out.row_mut(dst).iter_mut().zip(x.row(src)) {
                *o += w * v;
            }
        }
        Ok(self.push(out, Op::Propagate(a, prop)))
    }

    /// Inverted dropout. Outside training, or at rate 0, this returns `a`
    /// itself and records nothing.
    pub fn dropout(&mut self, a: Var, rate: f64, training: bool, seed: u64) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        if !training || rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - rate);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = self.value(a);
        let mask: Vec<f64> = (0..x.len())
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let data = x.as_slice().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let out = Matrix::new(x.rows(), x.cols(), data)?;
        Ok(self.push(out, Op::Dropout(a, mask)))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::ln);
        self.push(out, Op::Log(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::exp);
        self.push(out, Op::Exp(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Matrix::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Matrix::scalar(x.sum() / x.len().max(1) as f64);
        self.push(out, Op::Mean(a))
    }

    /// `-(1/N) * sum_n weights[labels[n]] * logp[n, labels[n]]`.
    pub fn nll(&mut self, logp: Var, labels: Rc<Vec<usize>>, weights: Rc<Vec<f64>>) -> Result<Var> {
        let x = self.value(logp);
        if labels.len() != x.rows() || weights.len() != x.cols() || x.rows() == 0 {
            return Err(Error::ShapeMismatch {
                op: "nll",
                left: x.shape(),
                right: (labels.len(), weights.len()),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= x.cols()) {
            return Err(Error::InvalidConfig(format!(
                "label {bad} out of range for {} classes",
                x.cols()
            )));
        }
        let total: f64 = labels
            .iter()
            .enumerate()
            .map(|(n, &y)| weights[y] * x[(n, y)])
            .sum();
        let out = Matrix::scalar(-total / labels.len() as f64);
        Ok(self.push(out, Op::Nll(logp, labels, weights)))
    }

    /// Gradients of `loss` with respect to every recorded node.
    pub fn gradients(&self, loss: Var) -> Result<Gradients> {
        let l = self.value(loss);
        if l.shape() != (1, 1) {
            return Err(Error::NonScalarLoss {
                rows: l.rows(),
                cols: l.cols(),
            });
        }
        let mut grads: Vec<Option<Matrix>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(Matrix::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Writes d`loss`/dp into every parameter's `grad`. Parameters the loss
    /// does not reach end up with a zero gradient.
    pub fn backward(&self, loss: Var, params: &mut ParamSet) -> Result<()> {
        let grads = self.gradients(loss)?;
        params.zero_grads();
        for (node, g) in self.nodes.iter().zip(&grads.grads) {
            if let (Op::Param(id), Some(g)) = (&node.op, g) {
                params.get_mut(*id).grad.add_scaled(g, 1.0)?;
            }
        }
        Ok(())
    }

    fn backprop_node(&self, i: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[i];
        let y = &node.value;
        let val = |v: &Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (val(a), val(b));
                let ga = slot(grads, *a, av);
                gemm(1.0, g, false, bv, true, 1.0, ga);
                let gb = slot(grads, *b, bv);
                gemm(1.0, av, true, g, false, 1.0, gb);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, val(a), g);
                accumulate(grads, *b, val(b), g);
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, val(a), g);
                let gb = slot(grads, *b, val(b));
                gb.add_scaled(g, -1.0).expect("shapes recorded");
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(a), val(b));
                let ga = slot(grads, *a, av);
                for ((o, &d), &q) in ga.as_mut_slice().iter_mut().zip(g.as_slice()).zip(bv.as_slice()) {
                    *o += d * q;
                }
                let gb = slot(grads, *b, bv);
                for ((o, &d), &p) in gb.as_mut_slice().iter_mut().zip(g.as_slice()).zip(av.as_slice()) {
                    *o += d * p;
                }
            }
            Op::AddRow(a, bias) => {
                accumulate(grads, *a, val(a), g);
                let gb = slot(grads, *bias, val(bias));
                for r in 0..g.rows() {
                    for (o, &d) in gb.as_mut_slice().iter_mut().zip(g.row(r)) {
                        *o += d;
                    }
                }
            }
            Op::ScalarMul(a, s) => {
                slot(grads, *a, val(a)).add_scaled(g, *s).expect("shapes recorded");
            }
            Op::ScaleRows(a, s) => {
                let (av, sv) = (val(a), val(s));
                let ga = slot(grads, *a, av);
                for r in 0..g.rows() {
                    let f = sv[(r, 0)];
                    for (o, &d) in ga.row_mut(r).iter_mut().zip(g.row(r)) {
                        *o += d * f;
                    }
                }
                let gs = slot(grads, *s, sv);
                for r in 0..g.rows() {
                    gs[(r, 0)] += g.row(r).iter().zip(av.row(r)).map(|(d, x)| d * x).sum::<f64>();
                }
            }
            Op::RowConcat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let pv = val(p);
                    let gp = slot(grads, *p, pv);
                    let n = pv.len();
                    for (o, &d) in gp.as_mut_slice().iter_mut().zip(&g.as_slice()[offset..offset + n]) {
                        *o += d;
                    }
                    offset += n;
                }
            }
            Op::ColConcat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let pv = val(p);
                    let width = pv.cols();
                    let gp = slot(grads, *p, pv);
                    for r in 0..g.rows() {
                        for (o, &d) in gp.row_mut(r).iter_mut().zip(&g.row(r)[offset..offset + width]) {
                            *o += d;
                        }
                    }
                    offset += width;
                }
            }
            Op::RowSlice(a, start) => {
                let av = val(a);
                let cols = av.cols();
                let ga = slot(grads, *a, av);
                let dst = &mut ga.as_mut_slice()[start * cols..start * cols + g.len()];
                for (o, &d) in dst.iter_mut().zip(g.as_slice()) {
                    *o += d;
                }
            }
            Op::LeakyRelu(a, slope) => {
                let av = val(a);
                let ga = slot(grads, *a, av);
                for ((o, &d), &x) in ga.as_mut_slice().iter_mut().zip(g.as_slice()).zip(av.as_slice()) {
                    *o += if x > 0.0 { d } else { slope * d };
                }
            }
            Op::Relu(a) => {
                let av = val(a);
                let ga = slot(grads, *a, av);
                for ((o, &d), &x) in ga.as_mut_slice().iter_mut().zip(g.as_slice()).zip(av.as_slice()) {
                    if x > 0.0 {
                        *o += d;
                    }
                }
            }
            Op::SoftmaxRows(a) | Op::MaskedSoftmax(a) => {
                // Masked entries have y = 0, so they receive no gradient.
                let ga = slot(grads, *a, val(a));
                for r in 0..g.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(p, d)| p * d).sum();
                    for ((o, &p), &d) in ga.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *o += p * (d - dot);
                    }
                }
            }
            Op::LogSoftmaxRows(a) => {
                let ga = slot(grads, *a, val(a));
                for r in 0..g.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let total: f64 = gr.iter().sum();
                    for ((o, &lp), &d) in ga.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *o += d - lp.exp() * total;
                    }
                }
            }
            Op::SegmentMean(a, segments) => {
                let ga = slot(grads, *a, val(a));
                for (r, &s) in segments.ids().iter().enumerate() {
                    let inv = 1.0 / segments.sizes()[s] as f64;
                    for (o, &d) in ga.row_mut(r).iter_mut().zip(g.row(s)) {
                        *o += d * inv;
                    }
                }
            }
            Op::SegmentMaxAbs(a, best) => {
                let av = val(a);
                let cols = av.cols();
                let ga = slot(grads, *a, av);
                for (slot_idx, &r) in best.iter().enumerate() {
                    if r == usize::MAX {
                        continue;
                    }
                    let (s, c) = (slot_idx / cols, slot_idx % cols);
                    let x = av[(r, c)];
                    let sign = if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    ga[(r, c)] += sign * g[(s, c)];
                }
            }
            Op::Gather(a, index) => {
                let ga = slot(grads, *a, val(a));
                for (e, &src) in index.iter().enumerate() {
                    for (o, &d) in ga.row_mut(src).iter_mut().zip(g.row(e)) {
                        *o += d;
                    }
                }
            }
            Op::ScatterAdd(a, index) => {
                let ga = slot(grads, *a, val(a));
                for (e, &dst) in index.iter().enumerate() {
                    for (o, &d) in ga.row_mut(e).iter_mut().zip(g.row(dst)) {
                        *o += d;
                    }
                }
            }
            Op::GroupSoftmax(a, groups) => {
                let cols = y.cols();
                let n_groups = groups.iter().map(|&gid| gid + 1).max().unwrap_or(0);
                let mut dot = Matrix::zeros(n_groups, cols);
                for (e, &gid) in groups.iter().enumerate() {
                    for c in 0..cols {
                        dot[(gid, c)] += y[(e, c)] * g[(e, c)];
                    }
                }
                let ga = slot(grads, *a, val(a));
                for (e, &gid) in groups.iter().enumerate() {
                    for c in 0..cols {
                        ga[(e, c)] += y[(e, c)] * (g[(e, c)] - dot[(gid, c)]);
                    }
                }
            }
            Op::Propagate(a, prop) => {
                let ga = slot(grads, *a, val(a));
                for &(dst, src, w) in &prop.entries {
                    for (o, &d) in ga.row_mut(src).iter_mut().zip(g.row(dst)) {
                        *o += w * d;
                    }
                }
            }
            Op::Dropout(a, mask) => {
                let ga = slot(grads, *a, val(a));
                for ((o, &d), &m) in ga.as_mut_slice().iter_mut().zip(g.as_slice()).zip(mask) {
                    *o += d * m;
                }
            }
            Op::Log(a) => {
                let av = val(a);
                let ga = slot(grads, *a, av);
                for ((o, &d), &x) in ga.as_mut_slice().iter_mut().zip(g.as_slice()).zip(av.as_slice()) {
                    *o += d / x;
                }
            }
            Op::Exp(a) => {
                let ga = slot(grads, *a, val(a));
                for ((o, &d), &e) in ga.as_mut_slice().iter_mut().zip(g.as_slice()).zip(y.as_slice()) {
                    *o += d * e;
                }
            }
            Op::Transpose(a) => {
                let gt = g.transpose();
                accumulate(grads, *a, val(a), &gt);
            }
            Op::Sum(a) | Op::Mean(a) => {
                let av = val(a);
                let scale = match node.op {
                    Op::Mean(_) => 1.0 / av.len().max(1) as f64,
                    _ => 1.0,
                };
                let d = g[(0, 0)] * scale;
                slot(grads, *a, av).as_mut_slice().iter_mut().for_each(|o| *o += d);
            }
            Op::Nll(a, labels, weights) => {
                let ga = slot(grads, *a, val(a));
                let scale = -g[(0, 0)] / labels.len() as f64;
                for (n, &label) in labels.iter().enumerate() {
                    ga[(n, label)] += scale * weights[label];
                }
            }
        }
    }
}

/// Per-node gradients produced by [`Tape::gradients`].
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// `None` when the loss does not depend on `v`.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

fn slot<'a>(grads: &'a mut [Option<Matrix>], v: Var, like: &Matrix) -> &'a mut Matrix {
    grads[v.0].get_or_insert_with(|| Matrix::zeros(like.rows(), like.cols()))
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, like: &Matrix, g: &Matrix) {
    slot(grads, v, like)
        .add_scaled(g, 1.0)
        .expect("gradient shape matches its node");
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}
