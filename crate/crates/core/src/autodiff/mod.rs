//! Define-by-run reverse-mode differentiation.
//!
//! Every primitive applied through a [`Tape`] appends one node holding its
//! forward value and whatever it needs for the reverse pass. Nodes are
//! appended in execution order, so walking them backwards is a reverse
//! topological order and each node is visited exactly once.

mod attention;

use std::collections::HashMap;
use std::sync::Arc;

pub use attention::{AttnPattern, AttnPatternBuilder};

use crate::error::{Error, Result};
use crate::param::{ParamId, ParamStore};
use crate::tensor::{Float, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<F> {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, F),
    Relu(Var),
    LayerNorm { x: Var, rstd: Vec<F> },
    Embedding { table: Var, ids: Vec<usize> },
    MaskedSoftmax(Var),
    ConcatCols(Vec<Var>),
    SliceCols { x: Var, start: usize },
    SelectRows { x: Var, rows: Vec<usize> },
    GatherFill { src: Var, index: Vec<Option<usize>> },
    Sum(Var),
    CrossEntropy { logits: Var, targets: Vec<usize>, probs: Vec<F> },
    SparseAttention {
        q: Var,
        k: Var,
        v: Var,
        bias: Var,
        pattern: Arc<AttnPattern>,
        heads: usize,
        probs: Vec<F>,
    },
}

struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
    needs_grad: bool,
}

/// The computation trace of one forward pass.
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
    params: HashMap<ParamId, Var>,
}

impl<F: Float> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Float> Tape<F> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dims2()
    }

    /// A constant input; no gradient is tracked for it.
    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// An input whose gradient is retrievable after `backward`.
    pub fn input(&mut self, value: Tensor<F>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Registers a parameter on the tape. Repeated calls for the same id
    /// return the same node, so every reuse site accumulates into one
    /// gradient.
    pub fn param(&mut self, store: &ParamStore<F>, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param(id), true);
        self.params.insert(id, v);
        v
    }

    /// Registers a fresh node for a parameter even when it is already on the
    /// tape. Gradients of all such nodes still sum into the same parameter.
    pub fn param_site(&mut self, store: &ParamStore<F>, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(Error::shape("matmul", self.shape(a), self.shape(b)));
        }
        let out = self.value(a).matmul(self.value(b))?;
        debug_assert_eq!(out.shape(), &[m, n]);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::MatMul(a, b), ng))
    }

    /// `a @ bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (n, k2) = self.dims(b);
        if k != k2 {
            return Err(Error::shape("matmul_t", self.shape(a), self.shape(b)));
        }
        let mut out = Tensor::zeros(&[m, n]);
        F::gemm(
            m,
            k,
            n,
            F::one(),
            self.value(a).data(),
            k as isize,
            1,
            self.value(b).data(),
            1,
            k as isize,
            F::zero(),
            out.data_mut(),
            n as isize,
            1,
        );
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::MatMulT(a, b), ng))
    }

    fn zip_same(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(F, F) -> F) -> Result<Tensor<F>> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, self.shape(a), self.shape(b)));
        }
        let mut out = self.value(a).clone();
        for (x, &y) in out.data_mut().iter_mut().zip(self.value(b).data()) {
            *x = f(*x, y);
        }
        Ok(out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same("add", a, b, |x, y| x + y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Add(a, b), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same("mul", a, b, |x, y| x * y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Mul(a, b), ng))
    }

    fn broadcast_row(&mut self, op: &'static str, a: Var, row: Var, f: impl Fn(F, F) -> F) -> Result<Tensor<F>> {
        let (_, c) = self.dims(a);
        if self.value(row).len() != c {
            return Err(Error::shape(op, self.shape(a), self.shape(row)));
        }
        let r = self.value(row).data();
        let mut out = self.value(a).clone();
        for chunk in out.data_mut().chunks_mut(c) {
            for (x, &y) in chunk.iter_mut().zip(r) {
                *x = f(*x, y);
            }
        }
        Ok(out)
    }

    /// Adds a row vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let out = self.broadcast_row("add_row", a, row, |x, y| x + y)?;
        let ng = self.ng(a) || self.ng(row);
        Ok(self.push(out, Op::AddRow(a, row), ng))
    }

    /// Multiplies every row of `a` elementwise by a row vector.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let out = self.broadcast_row("mul_row", a, row, |x, y| x * y)?;
        let ng = self.ng(a) || self.ng(row);
        Ok(self.push(out, Op::MulRow(a, row), ng))
    }

    pub fn scale(&mut self, a: Var, s: F) -> Var {
        let out = self.value(a).map(|x| x * s);
        let ng = self.ng(a);
        self.push(out, Op::Scale(a, s), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| if x > F::zero() { x } else { F::zero() });
        let ng = self.ng(a);
        self.push(out, Op::Relu(a), ng)
    }

    /// Normalizes each row to zero mean and unit variance (no affine part).
    pub fn layer_norm(&mut self, x: Var) -> Var {
        let (r, c) = self.dims(x);
        let xv = self.value(x);
        let mut out = Tensor::zeros(xv.shape());
        let mut rstd = Vec::with_capacity(r);
        let n = F::of(c as f64);
        let eps = F::of(LAYER_NORM_EPS);
        for (src, dst) in xv.data().chunks(c).zip(out.data_mut().chunks_mut(c)) {
            let mean = src.iter().copied().sum::<F>() / n;
            let var = src.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / n;
            let rs = F::one() / (var + eps).sqrt();
            for (o, &v) in dst.iter_mut().zip(src) {
                *o = (v - mean) * rs;
            }
            rstd.push(rs);
        }
        let ng = self.ng(x);
        self.push(out, Op::LayerNorm { x, rstd }, ng)
    }

    /// Rows of `table` selected by `ids`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (v, d) = self.dims(table);
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::invalid("embedding", format!("id {bad} out of range for vocabulary {v}")));
        }
        let tv = self.value(table);
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            data.extend_from_slice(tv.row(i));
        }
        let out = Tensor::new(&[ids.len(), d], data)?;
        let ng = self.ng(table);
        Ok(self.push(out, Op::Embedding { table, ids: ids.to_vec() }, ng))
    }

    /// Row-wise softmax where `-inf` entries become exact zeros.
    pub fn masked_softmax(&mut self, x: Var) -> Result<Var> {
        let (_, c) = self.dims(x);
        let xv = self.value(x);
        let mut out = Tensor::zeros(xv.shape());
        for (row, (src, dst)) in xv.data().chunks(c).zip(out.data_mut().chunks_mut(c)).enumerate() {
            let max = src.iter().copied().fold(F::neg_infinity(), F::max);
            if !max.is_finite() {
                return Err(Error::AllMasked { row });
            }
            let mut z = F::zero();
            for (o, &v) in dst.iter_mut().zip(src) {
                *o = if v == F::neg_infinity() { F::zero() } else { (v - max).exp() };
                z += *o;
            }
            for o in dst.iter_mut() {
                *o = *o / z;
            }
        }
        let ng = self.ng(x);
        Ok(self.push(out, Op::MaskedSoftmax(x), ng))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::invalid("concat_cols", "no inputs"))?;
        let (r, _) = self.dims(first);
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (pr, pc) = self.dims(p);
            if pr != r {
                return Err(Error::shape("concat_cols", self.shape(first), self.shape(p)));
            }
            widths.push(pc);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(r * total);
        for i in 0..r {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let out = Tensor::new(&[r, total], data)?;
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), ng))
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.dims(x);
        if start >= end || end > c {
            return Err(Error::invalid("slice_cols", format!("range {start}..{end} outside 0..{c}")));
        }
        let xv = self.value(x).data();
        let mut data = Vec::with_capacity(r * (end - start));
        for i in 0..r {
            data.extend_from_slice(&xv[i * c + start..i * c + end]);
        }
        let out = Tensor::new(&[r, end - start], data)?;
        let ng = self.ng(x);
        Ok(self.push(out, Op::SliceCols { x, start }, ng))
    }

    pub fn select_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let (r, c) = self.dims(x);
        if let Some(&bad) = rows.iter().find(|&&i| i >= r) {
            return Err(Error::invalid("select_rows", format!("row {bad} out of range for {r} rows")));
        }
        let xv = self.value(x);
        let mut data = Vec::with_capacity(rows.len() * c);
        for &i in rows {
            data.extend_from_slice(xv.row(i));
        }
        let out = Tensor::new(&[rows.len(), c], data)?;
        let ng = self.ng(x);
        Ok(self.push(out, Op::SelectRows { x, rows: rows.to_vec() }, ng))
    }

    /// `out[i] = src[index[i]]`, or `fill` where the index is `None`.
    pub fn gather_fill(&mut self, src: Var, index: Vec<Option<usize>>, shape: &[usize], fill: F) -> Result<Var> {
        let n = self.value(src).len();
        if shape.iter().product::<usize>() != index.len() {
            return Err(Error::shape("gather_fill", shape, &[index.len()]));
        }
        if let Some(bad) = index.iter().flatten().find(|&&i| i >= n) {
            return Err(Error::invalid("gather_fill", format!("index {bad} out of range for {n} elements")));
        }
        let s = self.value(src).data();
        let data = index.iter().map(|i| i.map_or(fill, |i| s[i])).collect();
        let out = Tensor::new(shape, data)?;
        let ng = self.ng(src);
        Ok(self.push(out, Op::GatherFill { src, index }, ng))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum();
        let ng = self.ng(x);
        self.push(Tensor::scalar(s), Op::Sum(x), ng)
    }

    /// Mean cross-entropy of each row of `logits` against its integer target.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let (r, c) = self.dims(logits);
        if targets.len() != r {
            return Err(Error::shape("cross_entropy", self.shape(logits), &[targets.len()]));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
            return Err(Error::invalid("cross_entropy", format!("target {bad} out of range for {c} classes")));
        }
        let lv = self.value(logits).data();
        let mut probs = vec![F::zero(); r * c];
        let mut loss = F::zero();
        for i in 0..r {
            let row = &lv[i * c..(i + 1) * c];
            let max = row.iter().copied().fold(F::neg_infinity(), F::max);
            let mut z = F::zero();
            for (p, &x) in probs[i * c..(i + 1) * c].iter_mut().zip(row) {
                *p = (x - max).exp();
                z += *p;
            }
            for p in probs[i * c..(i + 1) * c].iter_mut() {
                *p = *p / z;
            }
            loss += z.ln() + max - row[targets[i]];
        }
        let loss = loss / F::of(r.max(1) as f64);
        let ng = self.ng(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            ng,
        ))
    }

    /// Multi-head attention restricted to `pattern`. `q`, `k`, `v` are
    /// `rows × d`; `bias` holds one learnable scalar per head and slot,
    /// shape `[heads, slots]`.
    pub fn sparse_attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        bias: Var,
        pattern: Arc<AttnPattern>,
        heads: usize,
    ) -> Result<Var> {
        let (rows, d) = self.dims(q);
        if self.shape(k) != self.shape(q) {
            return Err(Error::shape("sparse_attention", self.shape(q), self.shape(k)));
        }
        if self.shape(v) != self.shape(q) {
            return Err(Error::shape("sparse_attention", self.shape(q), self.shape(v)));
        }
        if heads == 0 || d % heads != 0 {
            return Err(Error::invalid("sparse_attention", format!("width {d} not divisible by {heads} heads")));
        }
        let (bh, slots) = self.dims(bias);
        if bh != heads {
            return Err(Error::shape("sparse_attention", &[heads], self.shape(bias)));
        }
        if pattern.num_queries() != rows || pattern.max_key().is_some_and(|k| k >= rows) {
            return Err(Error::invalid("sparse_attention", "pattern does not fit the query rows"));
        }
        if pattern.max_slot().is_some_and(|s| s >= slots) {
            return Err(Error::invalid("sparse_attention", "pattern references a missing bias slot"));
        }
        let dims = attention::AttnDims { rows, d, heads, slots };
        let (out, probs) = attention::forward(
            self.value(q).data(),
            self.value(k).data(),
            self.value(v).data(),
            self.value(bias).data(),
            &pattern,
            &dims,
        )?;
        let out = Tensor::new(&[rows, d], out)?;
        let ng = [q, k, v, bias].iter().any(|&x| self.ng(x));
        Ok(self.push(
            out,
            Op::SparseAttention {
                q,
                k,
                v,
                bias,
                pattern,
                heads,
                probs,
            },
            ng,
        ))
    }

    /// Attention weights saved by a `sparse_attention` node, indexed
    /// `[entry * heads + head]`.
    pub fn attention_probs(&self, v: Var) -> Option<&[F]> {
        match &self.nodes.get(v.0)?.op {
            Op::SparseAttention { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Reverse pass from a scalar `loss`. Gradients are retained for
    /// parameters and `input` leaves.
    pub fn backward(&self, loss: Var) -> Result<Gradients<F>> {
        self.backward_keep(loss, &[])
    }

    /// Like `backward`, additionally retaining the gradients of `keep`
    /// (e.g. intermediate embeddings).
    pub fn backward_keep(&self, loss: Var, keep: &[Var]) -> Result<Gradients<F>> {
        let node = self.nodes.get(loss.0).ok_or(Error::NoTrace)?;
        if let Some(v) = keep.iter().find(|v| v.0 >= self.nodes.len()) {
            return Err(Error::invalid("backward", format!("variable {} is not on this tape", v.0)));
        }
        if node.value.len() != 1 {
            return Err(Error::invalid("backward", format!("loss must be a scalar, got {:?}", node.value.shape())));
        }
        let mut grads: Vec<Option<Tensor<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(node.value.shape(), F::one()));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads);
            if matches!(node.op, Op::Leaf | Op::Param(_)) || keep.iter().any(|v| v.0 == idx) {
                grads[idx] = Some(g);
            }
        }

        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Param(id) => Some((id, Var(i))),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads, params })
    }

    fn propagate(&self, node: &Node<F>, g: &Tensor<F>, grads: &mut [Option<Tensor<F>>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let (_, n) = self.dims(*b);
                if self.ng(*a) {
                    let bv = self.value(*b).data();
                    let da = slot(grads, self, *a);
                    // dA += dC Bᵀ
                    F::gemm(m, n, k, F::one(), gd, n as isize, 1, bv, 1, n as isize, F::one(), da, k as isize, 1);
                }
                if self.ng(*b) {
                    let av = self.value(*a).data();
                    let db = slot(grads, self, *b);
                    // dB += Aᵀ dC
                    F::gemm(k, m, n, F::one(), av, 1, k as isize, gd, n as isize, 1, F::one(), db, n as isize, 1);
                }
            }
            Op::MatMulT(a, b) => {
                let (m, k) = self.dims(*a);
                let (n, _) = self.dims(*b);
                if self.ng(*a) {
                    let bv = self.value(*b).data();
                    let da = slot(grads, self, *a);
                    // dA += dC B
                    F::gemm(m, n, k, F::one(), gd, n as isize, 1, bv, k as isize, 1, F::one(), da, k as isize, 1);
                }
                if self.ng(*b) {
                    let av = self.value(*a).data();
                    let db = slot(grads, self, *b);
                    // dB += dCᵀ A
                    F::gemm(n, m, k, F::one(), gd, 1, n as isize, av, k as isize, 1, F::one(), db, k as isize, 1);
                }
            }
            Op::Add(a, b) => {
                for x in [a, b] {
                    if self.ng(*x) {
                        axpy(slot(grads, self, *x), gd, F::one());
                    }
                }
            }
            Op::Mul(a, b) => {
                if self.ng(*a) {
                    let bv = self.value(*b).data();
                    for ((d, &gg), &y) in slot(grads, self, *a).iter_mut().zip(gd).zip(bv) {
                        *d += gg * y;
                    }
                }
                if self.ng(*b) {
                    let av = self.value(*a).data();
                    for ((d, &gg), &x) in slot(grads, self, *b).iter_mut().zip(gd).zip(av) {
                        *d += gg * x;
                    }
                }
            }
            Op::AddRow(a, row) => {
                if self.ng(*a) {
                    axpy(slot(grads, self, *a), gd, F::one());
                }
                if self.ng(*row) {
                    let dr = slot(grads, self, *row);
                    let c = dr.len();
                    for chunk in gd.chunks(c) {
                        axpy(dr, chunk, F::one());
                    }
                }
            }
            Op::MulRow(a, row) => {
                let c = self.value(*row).len();
                if self.ng(*a) {
                    let rv = self.value(*row).data();
                    let da = slot(grads, self, *a);
                    for (dchunk, gchunk) in da.chunks_mut(c).zip(gd.chunks(c)) {
                        for ((d, &gg), &r) in dchunk.iter_mut().zip(gchunk).zip(rv) {
                            *d += gg * r;
                        }
                    }
                }
                if self.ng(*row) {
                    let av = self.value(*a).data();
                    let dr = slot(grads, self, *row);
                    for (achunk, gchunk) in av.chunks(c).zip(gd.chunks(c)) {
                        for ((d, &gg), &x) in dr.iter_mut().zip(gchunk).zip(achunk) {
                            *d += gg * x;
                        }
                    }
                }
            }
            Op::Scale(a, s) => {
                if self.ng(*a) {
                    axpy(slot(grads, self, *a), gd, *s);
                }
            }
            Op::Relu(a) => {
                if self.ng(*a) {
                    let out = node.value.data();
                    for ((d, &gg), &y) in slot(grads, self, *a).iter_mut().zip(gd).zip(out) {
                        if y > F::zero() {
                            *d += gg;
                        }
                    }
                }
            }
            Op::LayerNorm { x, rstd } => {
                if self.ng(*x) {
                    let (_, c) = self.dims(*x);
                    let n = F::of(c as f64);
                    let y = node.value.data();
                    let dx = slot(grads, self, *x);
                    for (i, &rs) in rstd.iter().enumerate() {
                        let gy = &gd[i * c..(i + 1) * c];
                        let yy = &y[i * c..(i + 1) * c];
                        let mean_g = gy.iter().copied().sum::<F>() / n;
                        let mean_gy = gy.iter().zip(yy).map(|(&a, &b)| a * b).sum::<F>() / n;
                        for ((d, &gv), &yv) in dx[i * c..(i + 1) * c].iter_mut().zip(gy).zip(yy) {
                            *d += rs * (gv - mean_g - yv * mean_gy);
                        }
                    }
                }
            }
            Op::Embedding { table, ids } => {
                if self.ng(*table) {
                    let (_, d) = self.dims(*table);
                    let dt = slot(grads, self, *table);
                    for (r, &id) in ids.iter().enumerate() {
                        axpy(&mut dt[id * d..(id + 1) * d], &gd[r * d..(r + 1) * d], F::one());
                    }
                }
            }
            Op::MaskedSoftmax(x) => {
                if self.ng(*x) {
                    let (_, c) = self.dims(*x);
                    let y = node.value.data();
                    let dx = slot(grads, self, *x);
                    for i in 0..y.len() / c {
                        let yy = &y[i * c..(i + 1) * c];
                        let gy = &gd[i * c..(i + 1) * c];
                        let dot = yy.iter().zip(gy).map(|(&a, &b)| a * b).sum::<F>();
                        for ((d, &yv), &gv) in dx[i * c..(i + 1) * c].iter_mut().zip(yy).zip(gy) {
                            *d += yv * (gv - dot);
                        }
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let (r, total) = node.value.dims2();
                let mut off = 0;
                for &p in parts {
                    let (_, w) = self.dims(p);
                    if self.ng(p) {
                        let dp = slot(grads, self, p);
                        for i in 0..r {
                            axpy(&mut dp[i * w..(i + 1) * w], &gd[i * total + off..i * total + off + w], F::one());
                        }
                    }
                    off += w;
                }
            }
            Op::SliceCols { x, start } => {
                if self.ng(*x) {
                    let (r, c) = self.dims(*x);
                    let (_, w) = node.value.dims2();
                    let dx = slot(grads, self, *x);
                    for i in 0..r {
                        axpy(&mut dx[i * c + start..i * c + start + w], &gd[i * w..(i + 1) * w], F::one());
                    }
                }
            }
            Op::SelectRows { x, rows } => {
                if self.ng(*x) {
                    let (_, c) = self.dims(*x);
                    let dx = slot(grads, self, *x);
                    for (j, &i) in rows.iter().enumerate() {
                        axpy(&mut dx[i * c..(i + 1) * c], &gd[j * c..(j + 1) * c], F::one());
                    }
                }
            }
            Op::GatherFill { src, index } => {
                if self.ng(*src) {
                    let ds = slot(grads, self, *src);
                    for (&gg, i) in gd.iter().zip(index) {
                        if let Some(i) = i {
                            ds[*i] += gg;
                        }
                    }
                }
            }
            Op::Sum(x) => {
                if self.ng(*x) {
                    let s = gd[0];
                    for d in slot(grads, self, *x).iter_mut() {
                        *d += s;
                    }
                }
            }
            Op::CrossEntropy { logits, targets, probs } => {
                if self.ng(*logits) {
                    let (r, c) = self.dims(*logits);
                    let s = gd[0] / F::of(r.max(1) as f64);
                    let dl = slot(grads, self, *logits);
                    for (i, &t) in targets.iter().enumerate() {
                        for j in 0..c {
                            let onehot = if j == t { F::one() } else { F::zero() };
                            dl[i * c + j] += s * (probs[i * c + j] - onehot);
                        }
                    }
                }
            }
            Op::SparseAttention {
                q,
                k,
                v,
                bias,
                pattern,
                heads,
                probs,
            } => {
                let (rows, d) = self.dims(*q);
                let (_, slots) = self.dims(*bias);
                let dims = attention::AttnDims {
                    rows,
                    d,
                    heads: *heads,
                    slots,
                };
                let mut take = |x: Var| -> Option<Tensor<F>> {
                    if self.ng(x) {
                        Some(grads[x.0].take().unwrap_or_else(|| Tensor::zeros(self.shape(x))))
                    } else {
                        None
                    }
                };
                // q, k, v may alias one node; take each buffer once.
                let mut dq = take(*q);
                let mut dk = if k == q { None } else { take(*k) };
                let mut dv = if v == q || v == k { None } else { take(*v) };
                let mut db = take(*bias);
                let aliased = k == q || v == q || v == k;
                if aliased {
                    // Rare path: accumulate into scratch buffers and merge.
                    let mut sq = self.ng(*q).then(|| Tensor::<F>::zeros(self.shape(*q)));
                    let mut sk = self.ng(*k).then(|| Tensor::<F>::zeros(self.shape(*k)));
                    let mut sv = self.ng(*v).then(|| Tensor::<F>::zeros(self.shape(*v)));
                    attention::backward(
                        self.value(*q).data(),
                        self.value(*k).data(),
                        self.value(*v).data(),
                        probs,
                        gd,
                        pattern,
                        &dims,
                        attention::AttnGrads {
                            dq: sq.as_mut().map(|t| t.data_mut()),
                            dk: sk.as_mut().map(|t| t.data_mut()),
                            dv: sv.as_mut().map(|t| t.data_mut()),
                            dbias: db.as_mut().map(|t| t.data_mut()),
                        },
                    );
                    for (var, scratch) in [(*q, sq), (*k, sk), (*v, sv)] {
                        if let Some(s) = scratch {
                            let buf = if var == *q {
                                dq.as_mut()
                            } else if var == *k {
                                dk.as_mut()
                            } else {
                                dv.as_mut()
                            };
                            buf.expect("gradient buffer").add_assign(&s);
                        }
                    }
                } else {
                    attention::backward(
                        self.value(*q).data(),
                        self.value(*k).data(),
                        self.value(*v).data(),
                        probs,
                        gd,
                        pattern,
                        &dims,
                        attention::AttnGrads {
                            dq: dq.as_mut().map(|t| t.data_mut()),
                            dk: dk.as_mut().map(|t| t.data_mut()),
                            dv: dv.as_mut().map(|t| t.data_mut()),
                            dbias: db.as_mut().map(|t| t.data_mut()),
                        },
                    );
                }
                for (var, buf) in [(*q, dq), (*k, dk), (*v, dv), (*bias, db)] {
                    if let Some(b) = buf {
                        grads[var.0] = Some(b);
                    }
                }
            }
        }
    }
}

fn slot<'a, F: Float>(grads: &'a mut [Option<Tensor<F>>], tape: &Tape<F>, v: Var) -> &'a mut [F] {
    grads[v.0]
        .get_or_insert_with(|| Tensor::zeros(tape.shape(v)))
        .data_mut()
}

fn axpy<F: Float>(dst: &mut [F], src: &[F], alpha: F) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}

/// Result of a reverse pass.
pub struct Gradients<F> {
    grads: Vec<Option<Tensor<F>>>,
    params: Vec<(ParamId, Var)>,
}

impl<F: Float> Gradients<F> {
    /// Gradient with respect to any node, `None` if it received none.
    pub fn get(&self, v: Var) -> Option<&Tensor<F>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Adds every parameter node's gradient into its `Parameter::grad`,
    /// scaled by `weight`.
    pub fn accumulate_into(&self, store: &mut ParamStore<F>, weight: F) {
        for &(id, v) in &self.params {
            if let Some(g) = self.get(v) {
                axpy(store.get_mut(id).grad.data_mut(), g.data(), weight);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape, data).unwrap()
    }

    #[test]
    fn masked_softmax_symmetric_row() {
        let mut tape = Tape::new();
        let x = tape.input(t(&[1, 3], &[0.0, f64::NEG_INFINITY, 0.0]));
        let y = tape.masked_softmax(x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5, 0.0, 0.5]);
    }

    #[test]
    fn masked_softmax_rejects_fully_masked_row() {
        let mut tape = Tape::new();
        let x = tape.input(t(&[2, 2], &[0.0, 1.0, f64::NEG_INFINITY, f64::NEG_INFINITY]));
        assert!(matches!(tape.masked_softmax(x), Err(Error::AllMasked { row: 1 })));
    }

    #[test]
    fn relu_multiplies_binary_scalars() {
        for a in [0.0, 1.0] {
            for b in [0.0, 1.0] {
                let mut tape = Tape::<f64>::new();
                let x = tape.constant(t(&[1], &[a]));
                let y = tape.constant(t(&[1], &[b]));
                let m1 = tape.constant(t(&[1], &[-1.0]));
                let s = tape.add(x, y).unwrap();
                let s = tape.add(s, m1).unwrap();
                let r = tape.relu(s);
                assert_eq!(tape.value(r).item(), a * b);
            }
        }
    }

    #[test]
    fn layer_norm_of_constant_is_zero() {
        let mut tape = Tape::new();
        let x = tape.input(t(&[1, 4], &[3.0; 4]));
        let y = tape.layer_norm(x);
        assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sum_of_squares_gradient() {
        let mut tape = Tape::new();
        let x = tape.input(t(&[3], &[1.0, 2.0, 3.0]));
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum(sq);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn shared_parameter_accumulates() {
        let mut store = ParamStore::<f64>::new();
        let w = store.add("w", t(&[1], &[0.7])).unwrap();
        let mut tape = Tape::new();
        let a = tape.param(&store, w);
        let b = tape.param_site(&store, w);
        let s = tape.add(a, b).unwrap();
        let loss = tape.sum(s);
        tape.backward(loss).unwrap().accumulate_into(&mut store, 1.0);
        assert_eq!(store.get(w).grad.data(), &[2.0]);
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let mut tape = Tape::<f32>::new();
        let a = tape.input(Tensor::zeros(&[2, 3]));
        let b = tape.input(Tensor::zeros(&[2, 3]));
        let err = tape.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn backward_rejects_foreign_var() {
        let tape = Tape::<f32>::new();
        assert!(matches!(tape.backward(Var(3)), Err(Error::NoTrace)));
    }
}
