//! Reverse-mode differentiation over a fixed set of dense primitives.
//!
//! Tensors are rank-3 `(batch, rows, cols)`; plain matrices use `batch = 1`.
//! Row-wise primitives (softmax, layer norm, bias add) act on the last axis.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::real::Real;
use crate::error::{dim_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub batch: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub const fn new(batch: usize, rows: usize, cols: usize) -> Self {
        Self { batch, rows, cols }
    }

    pub const fn matrix(rows: usize, cols: usize) -> Self {
        Self::new(1, rows, cols)
    }

    pub const fn scalar() -> Self {
        Self::new(1, 1, 1)
    }

    pub fn len(&self) -> usize {
        self.batch * self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Shape,
    pub values: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Shape, values: Vec<T>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(dim_err(format!("{} values for shape {shape:?}", values.len())));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            values: vec![T::ZERO; shape.len()],
        }
    }

    pub fn from_f32(shape: Shape, values: &[f32]) -> Result<Self> {
        Self::new(shape, values.iter().map(|v| T::from_f64(*v as f64)).collect())
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, T),
    RowSoftmax(Var),
    RowLogSoftmax(Var),
    Gelu(Var),
    LayerNorm { x: Var, inv_std: Vec<T> },
    Dropout { x: Var, mask: Vec<T> },
    MeanRows(Var),
    MeanAll(Var),
    Cosine { a: Var, b: Var, na: Vec<T>, nb: Vec<T> },
    Log(Var),
    Exp(Var),
    ConcatRows(Vec<Var>),
    SliceRows { x: Var, start: usize },
    Reshape(Var),
    PickCols { x: Var, idx: Vec<usize> },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Computation record; build forward with the op methods, then [`Tape::backward`].
pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
    rng: Option<ChaCha8Rng>,
    zero_norm_rows: usize,
}

/// Gradients of a scalar with respect to every node that needs one.
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn gelu_parts<T: Real>(x: T) -> (T, T) {
    let c = T::from_f64((2.0 / std::f64::consts::PI).sqrt());
    let k = T::from_f64(0.044715);
    let half = T::from_f64(0.5);
    let u = c * (x + k * x * x * x);
    let t = u.tanh();
    let y = half * x * (T::ONE + t);
    let du = c * (T::ONE + T::from_f64(3.0) * k * x * x);
    let dy = half * (T::ONE + t) + half * x * (T::ONE - t * t) * du;
    (y, dy)
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::eval()
    }
}

impl<T: Real> Tape<T> {
    /// Tape with dropout disabled.
    pub fn eval() -> Self {
        Self {
            nodes: Vec::new(),
            rng: None,
            zero_norm_rows: 0,
        }
    }

    /// Tape with dropout active, masks drawn from `seed`.
    pub fn train(seed: u64) -> Self {
        Self {
            nodes: Vec::new(),
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
            zero_norm_rows: 0,
        }
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Rows with zero norm seen by [`Tape::cosine`]; their similarity is 0.
    pub fn zero_norm_rows(&self) -> usize {
        self.zero_norm_rows
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape
    }

    /// First element; the value of a scalar node.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value.values[0]
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// Trainable leaf.
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// `(b, m, k) x (1|b, k, n) -> (b, m, n)`; a batch-1 right operand is shared.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.cols != sb.rows || !(sb.batch == 1 || sb.batch == sa.batch) {
            return Err(dim_err(format!("matmul {sa:?} x {sb:?}")));
        }
        let out_shape = Shape::new(sa.batch, sa.rows, sb.cols);
        let mut out = vec![T::ZERO; out_shape.len()];
        let (av, bv) = (&self.nodes[a.0].value.values, &self.nodes[b.0].value.values);
        let (m, k, n) = (sa.rows, sa.cols, sb.cols);
        if sb.batch == 1 {
            T::gemm(sa.batch * m, k, n, T::ONE, av, k as isize, 1, bv, n as isize, 1, T::ZERO, &mut out);
        } else {
            for bi in 0..sa.batch {
                T::gemm(
                    m,
                    k,
                    n,
                    T::ONE,
                    &av[bi * m * k..],
                    k as isize,
                    1,
                    &bv[bi * k * n..],
                    n as isize,
                    1,
                    T::ZERO,
                    &mut out[bi * m * n..(bi + 1) * m * n],
                );
            }
        }
        let needs = self.needs(&[a, b]);
        Ok(self.push(Tensor { shape: out_shape, values: out }, Op::MatMul(a, b), needs))
    }

    /// Swaps the last two axes.
    pub fn transpose(&mut self, a: Var) -> Var {
        let s = self.shape(a);
        let src = &self.nodes[a.0].value.values;
        let mut out = vec![T::ZERO; s.len()];
        for b in 0..s.batch {
            let off = b * s.rows * s.cols;
            for r in 0..s.rows {
                for c in 0..s.cols {
                    out[off + c * s.rows + r] = src[off + r * s.cols + c];
                }
            }
        }
        let needs = self.needs(&[a]);
        self.push(
            Tensor { shape: Shape::new(s.batch, s.cols, s.rows), values: out },
            Op::Transpose(a),
            needs,
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(dim_err(format!("add {:?} + {:?}", self.shape(a), self.shape(b))));
        }
        let values = self.nodes[a.0]
            .value
            .values
            .iter()
            .zip(&self.nodes[b.0].value.values)
            .map(|(x, y)| *x + *y)
            .collect();
        let needs = self.needs(&[a, b]);
        Ok(self.push(Tensor { shape: self.shape(a), values }, Op::Add(a, b), needs))
    }

    fn check_row(&self, a: Var, row: Var, what: &str) -> Result<()> {
        let (s, r) = (self.shape(a), self.shape(row));
        if r != Shape::matrix(1, s.cols) {
            return Err(dim_err(format!("{what}: row {r:?} for {s:?}")));
        }
        Ok(())
    }

    /// Adds a `(1, 1, cols)` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.check_row(a, row, "add_row")?;
        let cols = self.shape(a).cols;
        let r = &self.nodes[row.0].value.values;
        let values = self.nodes[a.0]
            .value
            .values
            .iter()
            .enumerate()
            .map(|(i, x)| *x + r[i % cols])
            .collect();
        let needs = self.needs(&[a, row]);
        Ok(self.push(Tensor { shape: self.shape(a), values }, Op::AddRow(a, row), needs))
    }

    /// Multiplies every row of `a` elementwise by a `(1, 1, cols)` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.check_row(a, row, "mul_row")?;
        let cols = self.shape(a).cols;
        let r = &self.nodes[row.0].value.values;
        let values = self.nodes[a.0]
            .value
            .values
            .iter()
            .enumerate()
            .map(|(i, x)| *x * r[i % cols])
            .collect();
        let needs = self.needs(&[a, row]);
        Ok(self.push(Tensor { shape: self.shape(a), values }, Op::MulRow(a, row), needs))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let values = self.nodes[a.0].value.values.iter().map(|x| *x * s).collect();
        let needs = self.needs(&[a]);
        self.push(Tensor { shape: self.shape(a), values }, Op::Scale(a, s), needs)
    }

    fn map_rows(&self, a: Var, f: impl Fn(&[T], &mut [T])) -> Tensor<T> {
        let s = self.shape(a);
        let src = &self.nodes[a.0].value.values;
        let mut out = vec![T::ZERO; s.len()];
        if s.cols > 0 {
            for (x, y) in src.chunks(s.cols).zip(out.chunks_mut(s.cols)) {
                f(x, y);
            }
        }
        Tensor { shape: s, values: out }
    }

    pub fn row_softmax(&mut self, a: Var) -> Var {
        let t = self.map_rows(a, |x, y| {
            let m = x.iter().copied().fold(x[0], T::max);
            let mut sum = T::ZERO;
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = (*xi - m).exp();
                sum += *yi;
            }
            for yi in y.iter_mut() {
                *yi = *yi / sum;
            }
        });
        let needs = self.needs(&[a]);
        self.push(t, Op::RowSoftmax(a), needs)
    }

    pub fn row_log_softmax(&mut self, a: Var) -> Var {
        let t = self.map_rows(a, |x, y| {
            let m = x.iter().copied().fold(x[0], T::max);
            let mut sum = T::ZERO;
            for xi in x {
                sum += (*xi - m).exp();
            }
            let lse = m + sum.ln();
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = *xi - lse;
            }
        });
        let needs = self.needs(&[a]);
        self.push(t, Op::RowLogSoftmax(a), needs)
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let values = self.nodes[a.0].value.values.iter().map(|x| gelu_parts(*x).0).collect();
        let needs = self.needs(&[a]);
        self.push(Tensor { shape: self.shape(a), values }, Op::Gelu(a), needs)
    }

    /// Per-row standardization without affine parameters.
    pub fn layer_norm(&mut self, a: Var) -> Var {
        let s = self.shape(a);
        let eps = T::from_f64(LAYER_NORM_EPS);
        let n = T::from_f64(s.cols as f64);
        let mut inv_std = Vec::with_capacity(s.batch * s.rows);
        let t = {
            let src = &self.nodes[a.0].value.values;
            let mut out = vec![T::ZERO; s.len()];
            for (x, y) in src.chunks(s.cols.max(1)).zip(out.chunks_mut(s.cols.max(1))) {
                let mut mu = T::ZERO;
                for v in x {
                    mu += *v;
                }
                mu = mu / n;
                let mut var = T::ZERO;
                for v in x {
                    var += (*v - mu) * (*v - mu);
                }
                let inv = T::ONE / (var / n + eps).sqrt();
                for (yi, xi) in y.iter_mut().zip(x) {
                    *yi = (*xi - mu) * inv;
                }
                inv_std.push(inv);
            }
            Tensor { shape: s, values: out }
        };
        let needs = self.needs(&[a]);
        self.push(t, Op::LayerNorm { x: a, inv_std }, needs)
    }

    /// Inverted dropout; the identity on an eval tape or when `p == 0`.
    pub fn dropout(&mut self, a: Var, p: f64) -> Var {
        let Some(rng) = self.rng.as_mut() else {
            return a;
        };
        if p <= 0.0 {
            return a;
        }
        let keep = T::from_f64(1.0 / (1.0 - p));
        let n = self.nodes[a.0].value.values.len();
        let mask: Vec<T> = (0..n)
            .map(|_| if rng.random::<f64>() >= p { keep } else { T::ZERO })
            .collect();
        let values = self.nodes[a.0]
            .value
            .values
            .iter()
            .zip(&mask)
            .map(|(x, m)| *x * *m)
            .collect();
        let needs = self.needs(&[a]);
        self.push(Tensor { shape: self.shape(a), values }, Op::Dropout { x: a, mask }, needs)
    }

    /// `(b, r, c) -> (b, 1, c)`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let s = self.shape(a);
        let src = &self.nodes[a.0].value.values;
        let mut out = vec![T::ZERO; s.batch * s.cols];
        let inv = T::ONE / T::from_f64(s.rows as f64);
        for b in 0..s.batch {
            for r in 0..s.rows {
                let row = &src[(b * s.rows + r) * s.cols..][..s.cols];
                for (o, v) in out[b * s.cols..][..s.cols].iter_mut().zip(row) {
                    *o += *v * inv;
                }
            }
        }
        let needs = self.needs(&[a]);
        self.push(
            Tensor { shape: Shape::new(s.batch, 1, s.cols), values: out },
            Op::MeanRows(a),
            needs,
        )
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let src = &self.nodes[a.0].value.values;
        let mut sum = T::ZERO;
        for v in src {
            sum += *v;
        }
        let v = sum / T::from_f64(src.len() as f64);
        let needs = self.needs(&[a]);
        self.push(Tensor { shape: Shape::scalar(), values: vec![v] }, Op::MeanAll(a), needs)
    }

    /// Pairwise cosine similarity of the rows of two `(1, n, d)` / `(1, m, d)`
    /// matrices, giving `(1, n, m)`. A zero row has similarity 0 to everything.
    pub fn cosine(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.batch != 1 || sb.batch != 1 || sa.cols != sb.cols {
            return Err(dim_err(format!("cosine {sa:?} vs {sb:?}")));
        }
        let d = sa.cols;
        let norms = |v: &[T]| -> Vec<T> {
            v.chunks(d.max(1))
                .map(|r| {
                    let mut s = T::ZERO;
                    for x in r {
                        s += *x * *x;
                    }
                    s.sqrt()
                })
                .collect()
        };
        let (av, bv) = (&self.nodes[a.0].value.values, &self.nodes[b.0].value.values);
        let (na, nb) = (norms(av), norms(bv));
        let zero_rows = na.iter().chain(&nb).filter(|n| **n == T::ZERO).count();
        let mut out = vec![T::ZERO; sa.rows * sb.rows];
        for i in 0..sa.rows {
            for j in 0..sb.rows {
                let den = na[i] * nb[j];
                if den == T::ZERO {
                    continue;
                }
                let mut dot = T::ZERO;
                for (x, y) in av[i * d..][..d].iter().zip(&bv[j * d..][..d]) {
                    dot += *x * *y;
                }
                out[i * sb.rows + j] = dot / den;
            }
        }
        if zero_rows > 0 {
            log::warn!("cosine similarity: {zero_rows} zero-norm rows treated as similarity 0");
            self.zero_norm_rows += zero_rows;
        }
        let needs = self.needs(&[a, b]);
        Ok(self.push(
            Tensor { shape: Shape::matrix(sa.rows, sb.rows), values: out },
            Op::Cosine { a, b, na, nb },
            needs,
        ))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let values = self.nodes[a.0].value.values.iter().map(|x| x.ln()).collect();
        let needs = self.needs(&[a]);
        self.push(Tensor { shape: self.shape(a), values }, Op::Log(a), needs)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let values = self.nodes[a.0].value.values.iter().map(|x| x.exp()).collect();
        let needs = self.needs(&[a]);
        self.push(Tensor { shape: self.shape(a), values }, Op::Exp(a), needs)
    }

    /// Concatenates along the row axis; inputs share batch and column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = self.shape(*parts.first().ok_or_else(|| dim_err("concat of nothing"))?);
        let mut rows = 0;
        for p in parts {
            let s = self.shape(*p);
            if s.batch != first.batch || s.cols != first.cols {
                return Err(dim_err(format!("concat_rows {s:?} with {first:?}")));
            }
            rows += s.rows;
        }
        let shape = Shape::new(first.batch, rows, first.cols);
        let mut out = Vec::with_capacity(shape.len());
        for b in 0..first.batch {
            for p in parts {
                let s = self.shape(*p);
                let block = s.rows * s.cols;
                out.extend_from_slice(&self.nodes[p.0].value.values[b * block..(b + 1) * block]);
            }
        }
        let needs = self.needs(parts);
        Ok(self.push(Tensor { shape, values: out }, Op::ConcatRows(parts.to_vec()), needs))
    }

    /// Rows `start..start + len` of every batch entry.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(a);
        if start + len > s.rows {
            return Err(dim_err(format!("slice {start}..{} of {s:?}", start + len)));
        }
        let src = &self.nodes[a.0].value.values;
        let mut out = Vec::with_capacity(s.batch * len * s.cols);
        for b in 0..s.batch {
            let off = (b * s.rows + start) * s.cols;
            out.extend_from_slice(&src[off..off + len * s.cols]);
        }
        let needs = self.needs(&[a]);
        Ok(self.push(
            Tensor { shape: Shape::new(s.batch, len, s.cols), values: out },
            Op::SliceRows { x: a, start },
            needs,
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: Shape) -> Result<Var> {
        if shape.len() != self.shape(a).len() {
            return Err(dim_err(format!("reshape {:?} to {shape:?}", self.shape(a))));
        }
        let values = self.nodes[a.0].value.values.clone();
        let needs = self.needs(&[a]);
        Ok(self.push(Tensor { shape, values }, Op::Reshape(a), needs))
    }

    /// Picks one column per row: `(b, r, c) -> (b, r, 1)`, `idx` has `b * r` entries.
    pub fn pick_cols(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let s = self.shape(a);
        if idx.len() != s.batch * s.rows || idx.iter().any(|i| *i >= s.cols) {
            return Err(dim_err(format!("pick_cols with {} indices on {s:?}", idx.len())));
        }
        let src = &self.nodes[a.0].value.values;
        let values = idx.iter().enumerate().map(|(r, c)| src[r * s.cols + c]).collect();
        let needs = self.needs(&[a]);
        Ok(self.push(
            Tensor { shape: Shape::new(s.batch, s.rows, 1), values },
            Op::PickCols { x: a, idx: idx.to_vec() },
            needs,
        ))
    }

    /// Backpropagates from a single-element node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.shape(loss).len() != 1 {
            return Err(dim_err(format!("backward from non-scalar {:?}", self.shape(loss))));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::ONE]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<T>>], v: Var, f: impl FnOnce(&mut [T])) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        let slot = grads[v.0].get_or_insert_with(|| vec![T::ZERO; self.nodes[v.0].value.values.len()]);
        f(slot);
    }

    fn backprop_node(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let y = &node.value.values;
        let ys = node.value.shape;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa.rows, sa.cols, sb.cols);
                let av = &self.nodes[a.0].value.values;
                let bv = &self.nodes[b.0].value.values;
                // dA = dC · Bᵀ
                self.accumulate(grads, *a, |da| {
                    if sb.batch == 1 {
                        T::gemm(sa.batch * m, n, k, T::ONE, g, n as isize, 1, bv, 1, n as isize, T::ONE, da);
                    } else {
                        for bi in 0..sa.batch {
                            T::gemm(
                                m, n, k, T::ONE,
                                &g[bi * m * n..], n as isize, 1,
                                &bv[bi * k * n..], 1, n as isize,
                                T::ONE, &mut da[bi * m * k..(bi + 1) * m * k],
                            );
                        }
                    }
                });
                // dB = Aᵀ · dC
                self.accumulate(grads, *b, |db| {
                    if sb.batch == 1 {
                        let rows = sa.batch * m;
                        T::gemm(k, rows, n, T::ONE, av, 1, k as isize, g, n as isize, 1, T::ONE, db);
                    } else {
                        for bi in 0..sa.batch {
                            T::gemm(
                                k, m, n, T::ONE,
                                &av[bi * m * k..], 1, k as isize,
                                &g[bi * m * n..], n as isize, 1,
                                T::ONE, &mut db[bi * k * n..(bi + 1) * k * n],
                            );
                        }
                    }
                });
            }
            Op::Transpose(a) => {
                let s = self.shape(*a);
                self.accumulate(grads, *a, |da| {
                    for b in 0..s.batch {
                        let off = b * s.rows * s.cols;
                        for r in 0..s.rows {
                            for c in 0..s.cols {
                                da[off + r * s.cols + c] += g[off + c * s.rows + r];
                            }
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    self.accumulate(grads, *v, |d| d.iter_mut().zip(g).for_each(|(x, y)| *x += *y));
                }
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, |d| d.iter_mut().zip(g).for_each(|(x, y)| *x += *y));
                self.accumulate(grads, *row, |d| {
                    for (j, gv) in g.iter().enumerate() {
                        d[j % ys.cols] += *gv;
                    }
                });
            }
            Op::MulRow(a, row) => {
                let av = &self.nodes[a.0].value.values;
                let rv = &self.nodes[row.0].value.values;
                self.accumulate(grads, *a, |d| {
                    for (j, gv) in g.iter().enumerate() {
                        d[j] += *gv * rv[j % ys.cols];
                    }
                });
                self.accumulate(grads, *row, |d| {
                    for (j, gv) in g.iter().enumerate() {
                        d[j % ys.cols] += *gv * av[j];
                    }
                });
            }
            Op::Scale(a, s) => {
                self.accumulate(grads, *a, |d| d.iter_mut().zip(g).for_each(|(x, y)| *x += *y * *s));
            }
            Op::RowSoftmax(a) => {
                self.accumulate(grads, *a, |d| {
                    for ((dr, yr), gr) in d.chunks_mut(ys.cols).zip(y.chunks(ys.cols)).zip(g.chunks(ys.cols)) {
                        let mut dot = T::ZERO;
                        for (yv, gv) in yr.iter().zip(gr) {
                            dot += *yv * *gv;
                        }
                        for ((dv, yv), gv) in dr.iter_mut().zip(yr).zip(gr) {
                            *dv += *yv * (*gv - dot);
                        }
                    }
                });
            }
            Op::RowLogSoftmax(a) => {
                self.accumulate(grads, *a, |d| {
                    for ((dr, yr), gr) in d.chunks_mut(ys.cols).zip(y.chunks(ys.cols)).zip(g.chunks(ys.cols)) {
                        let mut gsum = T::ZERO;
                        for gv in gr {
                            gsum += *gv;
                        }
                        for ((dv, yv), gv) in dr.iter_mut().zip(yr).zip(gr) {
                            *dv += *gv - yv.exp() * gsum;
                        }
                    }
                });
            }
            Op::Gelu(a) => {
                let av = &self.nodes[a.0].value.values;
                self.accumulate(grads, *a, |d| {
                    for ((dv, x), gv) in d.iter_mut().zip(av).zip(g) {
                        *dv += *gv * gelu_parts(*x).1;
                    }
                });
            }
            Op::LayerNorm { x, inv_std } => {
                let n = T::from_f64(ys.cols as f64);
                self.accumulate(grads, *x, |d| {
                    for (((dr, yr), gr), inv) in d
                        .chunks_mut(ys.cols)
                        .zip(y.chunks(ys.cols))
                        .zip(g.chunks(ys.cols))
                        .zip(inv_std)
                    {
                        let (mut gm, mut gy) = (T::ZERO, T::ZERO);
                        for (gv, yv) in gr.iter().zip(yr) {
                            gm += *gv;
                            gy += *gv * *yv;
                        }
                        gm = gm / n;
                        gy = gy / n;
                        for ((dv, gv), yv) in dr.iter_mut().zip(gr).zip(yr) {
                            *dv += *inv * (*gv - gm - *yv * gy);
                        }
                    }
                });
            }
            Op::Dropout { x, mask } => {
                self.accumulate(grads, *x, |d| {
                    for ((dv, gv), m) in d.iter_mut().zip(g).zip(mask) {
                        *dv += *gv * *m;
                    }
                });
            }
            Op::MeanRows(a) => {
                let s = self.shape(*a);
                let inv = T::ONE / T::from_f64(s.rows as f64);
                self.accumulate(grads, *a, |d| {
                    for b in 0..s.batch {
                        for r in 0..s.rows {
                            let dr = &mut d[(b * s.rows + r) * s.cols..][..s.cols];
                            for (dv, gv) in dr.iter_mut().zip(&g[b * s.cols..][..s.cols]) {
                                *dv += *gv * inv;
                            }
                        }
                    }
                });
            }
            Op::MeanAll(a) => {
                let n = self.shape(*a).len();
                let share = g[0] / T::from_f64(n as f64);
                self.accumulate(grads, *a, |d| d.iter_mut().for_each(|v| *v += share));
            }
            Op::Cosine { a, b, na, nb } => {
                let d = self.shape(*a).cols;
                let (ra, rb) = (self.shape(*a).rows, self.shape(*b).rows);
                let av = &self.nodes[a.0].value.values;
                let bv = &self.nodes[b.0].value.values;
                // s_ij = â_i·b̂_j; dâ_i = Σ_j g_ij b̂_j, da_i = (dâ_i - (dâ_i·â_i) â_i) / |a_i|
                let unit = |v: &[T], norms: &[T], i: usize| -> Vec<T> {
                    let n = norms[i];
                    v[i * d..][..d]
                        .iter()
                        .map(|x| if n == T::ZERO { T::ZERO } else { *x / n })
                        .collect()
                };
                let ua: Vec<Vec<T>> = (0..ra).map(|i| unit(av, na, i)).collect();
                let ub: Vec<Vec<T>> = (0..rb).map(|j| unit(bv, nb, j)).collect();
                let project = |dir: Vec<T>, u: &[T], n: T| -> Vec<T> {
                    if n == T::ZERO {
                        return vec![T::ZERO; d];
                    }
                    let mut dot = T::ZERO;
                    for (x, y) in dir.iter().zip(u) {
                        dot += *x * *y;
                    }
                    dir.iter().zip(u).map(|(x, y)| (*x - dot * *y) / n).collect()
                };
                self.accumulate(grads, *a, |da| {
                    for i in 0..ra {
                        let mut dir = vec![T::ZERO; d];
                        for j in 0..rb {
                            let gij = g[i * rb + j];
                            if nb[j] == T::ZERO {
                                continue;
                            }
                            for (x, y) in dir.iter_mut().zip(&ub[j]) {
                                *x += gij * *y;
                            }
                        }
                        for (t, v) in da[i * d..][..d].iter_mut().zip(project(dir, &ua[i], na[i])) {
                            *t += v;
                        }
                    }
                });
                self.accumulate(grads, *b, |db| {
                    for j in 0..rb {
                        let mut dir = vec![T::ZERO; d];
                        for i in 0..ra {
                            let gij = g[i * rb + j];
                            if na[i] == T::ZERO {
                                continue;
                            }
                            for (x, y) in dir.iter_mut().zip(&ua[i]) {
                                *x += gij * *y;
                            }
                        }
                        for (t, v) in db[j * d..][..d].iter_mut().zip(project(dir, &ub[j], nb[j])) {
                            *t += v;
                        }
                    }
                });
            }
            Op::Log(a) => {
                let av = &self.nodes[a.0].value.values;
                self.accumulate(grads, *a, |d| {
                    for ((dv, x), gv) in d.iter_mut().zip(av).zip(g) {
                        *dv += *gv / *x;
                    }
                });
            }
            Op::Exp(a) => {
                self.accumulate(grads, *a, |d| {
                    for ((dv, yv), gv) in d.iter_mut().zip(y).zip(g) {
                        *dv += *gv * *yv;
                    }
                });
            }
            Op::ConcatRows(parts) => {
                let mut offsets = Vec::with_capacity(parts.len());
                let mut acc = 0;
                for p in parts {
                    offsets.push(acc);
                    acc += self.shape(*p).rows;
                }
                for (p, off) in parts.iter().zip(offsets) {
                    let s = self.shape(*p);
                    self.accumulate(grads, *p, |d| {
                        for b in 0..s.batch {
                            let src = &g[(b * ys.rows + off) * ys.cols..][..s.rows * s.cols];
                            for (dv, gv) in d[b * s.rows * s.cols..][..s.rows * s.cols].iter_mut().zip(src) {
                                *dv += *gv;
                            }
                        }
                    });
                }
            }
            Op::SliceRows { x, start } => {
                let s = self.shape(*x);
                self.accumulate(grads, *x, |d| {
                    for b in 0..s.batch {
                        let dst = &mut d[(b * s.rows + start) * s.cols..][..ys.rows * s.cols];
                        for (dv, gv) in dst.iter_mut().zip(&g[b * ys.rows * s.cols..][..ys.rows * s.cols]) {
                            *dv += *gv;
                        }
                    }
                });
            }
            Op::Reshape(a) => {
                self.accumulate(grads, *a, |d| d.iter_mut().zip(g).for_each(|(x, y)| *x += *y));
            }
            Op::PickCols { x, idx } => {
                let cols = self.shape(*x).cols;
                self.accumulate(grads, *x, |d| {
                    for (r, (c, gv)) in idx.iter().zip(g).enumerate() {
                        d[r * cols + c] += *gv;
                    }
                });
            }
        }
    }
}
