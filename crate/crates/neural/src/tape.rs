//! Reverse-mode gradient tape over small dense matrices.
//!
//! Every value is a row-major `rows x cols` matrix. Parameters are read in
//! place from a flat slice and their gradients are accumulated into a
//! caller-provided buffer of the same length.

use std::sync::Arc;

use dpo_core::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Shape and offset of one parameter matrix inside a flat array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamRef {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl ParamRef {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Directed edges `(dst, src)` sorted by `dst`; `starts[i]..starts[i+1]`
/// indexes the incoming edges of node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edges {
    pub pairs: Vec<(usize, usize)>,
    pub starts: Vec<usize>,
}

impl Edges {
    /// Builds the segment layout from per-node in-neighbour lists.
    pub fn from_neighbors(neighbors: &[Vec<usize>]) -> Self {
        let mut pairs = Vec::new();
        let mut starts = Vec::with_capacity(neighbors.len() + 1);
        for (i, list) in neighbors.iter().enumerate() {
            starts.push(pairs.len());
            pairs.extend(list.iter().map(|&j| (i, j)));
        }
        starts.push(pairs.len());
        Self { pairs, starts }
    }

    pub fn num_nodes(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn segment(&self, i: usize) -> std::ops::Range<usize> {
        self.starts[i]..self.starts[i + 1]
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Constant,
    Param(usize),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    LeakyRelu(Var, T),
    Elu(Var),
    Tanh(Var),
    Relu(Var),
    Softmax(Var),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    Transpose(Var),
    Sum(Var),
    EdgeScores { dst: Var, src: Var, edges: Arc<Edges> },
    SegmentSoftmax(Var, Arc<Edges>),
    SegmentSum { alpha: Var, z: Var, edges: Arc<Edges> },
}

#[derive(Debug, Clone)]
struct Node<T> {
    op: Op<T>,
    rows: usize,
    cols: usize,
    /// Empty for parameter nodes, which read from the parameter slice.
    value: Vec<T>,
}

/// Recorded forward computation.
pub struct Tape<'p, T> {
    params: &'p [T],
    nodes: Vec<Node<T>>,
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p [T]) -> Self {
        Self { params, nodes: Vec::new() }
    }

    fn push(&mut self, op: Op<T>, rows: usize, cols: usize, value: Vec<T>) -> Var {
        debug_assert!(matches!(op, Op::Param(_)) || value.len() == rows * cols);
        self.nodes.push(Node { op, rows, cols, value });
        Var(self.nodes.len() - 1)
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[T] {
        let n = &self.nodes[v.0];
        match n.op {
            Op::Param(offset) => &self.params[offset..offset + n.rows * n.cols],
            _ => &n.value,
        }
    }

    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[0]
    }

    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<T>) -> Var {
        assert_eq!(value.len(), rows * cols, "constant shape");
        self.push(Op::Constant, rows, cols, value)
    }

    pub fn param(&mut self, p: ParamRef) -> Var {
        assert!(p.offset + p.len() <= self.params.len(), "parameter out of range");
        self.push(Op::Param(p.offset), p.rows, p.cols, Vec::new())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        assert_eq!(k, k2, "matmul inner dimension");
        let mut out = vec![T::zero(); m * n];
        let (av, bv) = (self.value(a), self.value(b));
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for (p, &aip) in av[i * k..(i + 1) * k].iter().enumerate() {
                if aip == T::zero() {
                    continue;
                }
                for (o, &bpj) in row.iter_mut().zip(&bv[p * n..(p + 1) * n]) {
                    *o += aip * bpj;
                }
            }
        }
        self.push(Op::MatMul(a, b), m, n, out)
    }

    /// Adds a `1 x cols` row to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Var {
        let (m, n) = self.shape(a);
        assert_eq!(self.shape(bias), (1, n), "bias shape");
        let bv = self.value(bias);
        let out: Vec<T> = self.value(a).iter().enumerate().map(|(k, &x)| x + bv[k % n]).collect();
        self.push(Op::AddBias(a, bias), m, n, out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b));
        let out = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x + y).collect();
        let (m, n) = self.shape(a);
        self.push(Op::Add(a, b), m, n, out)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b));
        let out = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x * y).collect();
        let (m, n) = self.shape(a);
        self.push(Op::Mul(a, b), m, n, out)
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let out = self.value(a).iter().map(|&x| x * s).collect();
        let (m, n) = self.shape(a);
        self.push(Op::Scale(a, s), m, n, out)
    }

    fn unary(&mut self, a: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let out = self.value(a).iter().map(|&x| f(x)).collect();
        let (m, n) = self.shape(a);
        self.push(op, m, n, out)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Var {
        self.unary(a, Op::LeakyRelu(a, slope), |x| if x > T::zero() { x } else { slope * x })
    }

    pub fn elu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Elu(a), |x| if x > T::zero() { x } else { x.exp_m1() })
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), T::tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), |x| x.max(T::zero()))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let (m, n) = self.shape(a);
        let mut out = self.value(a).to_vec();
        for row in out.chunks_mut(n.max(1)) {
            softmax_in_place(row);
        }
        self.push(Op::Softmax(a), m, n, out)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let m = self.shape(parts[0]).0;
        let widths: Vec<usize> = parts.iter().map(|&p| self.shape(p).1).collect();
        let n: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                assert_eq!(self.shape(p).0, m, "concat row count");
                out.extend_from_slice(&self.value(p)[i * w..(i + 1) * w]);
            }
        }
        self.push(Op::ConcatCols(parts.to_vec()), m, n, out)
    }

    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Var {
        let n = self.shape(a).1;
        let av = self.value(a);
        let mut out = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            out.extend_from_slice(&av[r * n..(r + 1) * n]);
        }
        self.push(Op::GatherRows(a, rows.to_vec()), rows.len(), n, out)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let (m, n) = self.shape(a);
        let av = self.value(a);
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = av[i * n + j];
            }
        }
        self.push(Op::Transpose(a), n, m, out)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().copied().sum();
        self.push(Op::Sum(a), 1, 1, vec![s])
    }

    /// `e_k = dst[i_k] + src[j_k]` for every edge `k = (i_k, j_k)`; inputs
    /// are `n x 1` columns.
    pub fn edge_scores(&mut self, dst: Var, src: Var, edges: &Arc<Edges>) -> Var {
        let (dv, sv) = (self.value(dst), self.value(src));
        let out = edges.pairs.iter().map(|&(i, j)| dv[i] + sv[j]).collect();
        self.push(Op::EdgeScores { dst, src, edges: edges.clone() }, edges.len(), 1, out)
    }

    /// Softmax of an `E x 1` edge column within each destination segment.
    pub fn segment_softmax(&mut self, a: Var, edges: &Arc<Edges>) -> Var {
        let mut out = self.value(a).to_vec();
        for i in 0..edges.num_nodes() {
            softmax_in_place(&mut out[edges.segment(i)]);
        }
        self.push(Op::SegmentSoftmax(a, edges.clone()), edges.len(), 1, out)
    }

    /// `out_i = sum_k alpha_k z_{j_k}` over the incoming edges of node `i`.
    /// Nodes without incoming edges get a zero row.
    pub fn segment_sum(&mut self, alpha: Var, z: Var, edges: &Arc<Edges>) -> Var {
        let b = self.shape(z).1;
        let (av, zv) = (self.value(alpha), self.value(z));
        let mut out = vec![T::zero(); edges.num_nodes() * b];
        for (k, &(i, j)) in edges.pairs.iter().enumerate() {
            let row = &mut out[i * b..(i + 1) * b];
            for (o, &x) in row.iter_mut().zip(&zv[j * b..(j + 1) * b]) {
                *o += av[k] * x;
            }
        }
        self.push(Op::SegmentSum { alpha, z, edges: edges.clone() }, edges.num_nodes(), b, out)
    }

    /// Gradient of a scalar output with respect to every parameter.
    pub fn backward_scalar(&self, loss: Var, grads: &mut [T]) {
        self.backward(&[(loss, &[T::one()])], grads);
    }

    /// Propagates the given output adjoints and adds parameter gradients into
    /// `grads` (same layout as the parameter slice).
    pub fn backward(&self, seeds: &[(Var, &[T])], grads: &mut [T]) {
        assert_eq!(grads.len(), self.params.len(), "gradient buffer length");
        let mut adj: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        for &(v, seed) in seeds {
            assert_eq!(seed.len(), self.nodes[v.0].rows * self.nodes[v.0].cols, "seed shape");
            accumulate(&mut adj[v.0], seed);
        }
        for idx in (0..self.nodes.len()).rev() {
            let Some(d) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = &node.value;
            match &node.op {
                Op::Constant => {}
                Op::Param(offset) => {
                    for (g, x) in grads[*offset..*offset + d.len()].iter_mut().zip(&d) {
                        *g += *x;
                    }
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.shape(*a);
                    let n = node.cols;
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let mut da = vec![T::zero(); m * k];
                    let mut db = vec![T::zero(); k * n];
                    for i in 0..m {
                        let drow = &d[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &bv[p * n..(p + 1) * n];
                            let mut acc = T::zero();
                            for (&dij, &bpj) in drow.iter().zip(brow) {
                                acc += dij * bpj;
                            }
                            da[i * k + p] = acc;
                            let aip = av[i * k + p];
                            if aip != T::zero() {
                                for (g, &dij) in db[p * n..(p + 1) * n].iter_mut().zip(drow) {
                                    *g += aip * dij;
                                }
                            }
                        }
                    }
                    accumulate(&mut adj[a.0], &da);
                    accumulate(&mut adj[b.0], &db);
                }
                Op::AddBias(a, bias) => {
                    let n = node.cols;
                    let mut db = vec![T::zero(); n];
                    for (k, &x) in d.iter().enumerate() {
                        db[k % n] += x;
                    }
                    accumulate(&mut adj[a.0], &d);
                    accumulate(&mut adj[bias.0], &db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj[a.0], &d);
                    accumulate(&mut adj[b.0], &d);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let da: Vec<T> = d.iter().zip(bv).map(|(&g, &y)| g * y).collect();
                    let db: Vec<T> = d.iter().zip(av).map(|(&g, &x)| g * x).collect();
                    accumulate(&mut adj[a.0], &da);
                    accumulate(&mut adj[b.0], &db);
                }
                Op::Scale(a, s) => {
                    let da: Vec<T> = d.iter().map(|&g| g * *s).collect();
                    accumulate(&mut adj[a.0], &da);
                }
                Op::LeakyRelu(a, slope) => {
                    let x = self.value(*a);
                    let da: Vec<T> = d.iter().zip(x).map(|(&g, &x)| if x > T::zero() { g } else { g * *slope }).collect();
                    accumulate(&mut adj[a.0], &da);
                }
                Op::Elu(a) => {
                    let x = self.value(*a);
                    let da: Vec<T> = d
                        .iter()
                        .zip(x.iter().zip(y))
                        .map(|(&g, (&x, &y))| if x > T::zero() { g } else { g * (y + T::one()) })
                        .collect();
                    accumulate(&mut adj[a.0], &da);
                }
                Op::Tanh(a) => {
                    let da: Vec<T> = d.iter().zip(y).map(|(&g, &y)| g * (T::one() - y * y)).collect();
                    accumulate(&mut adj[a.0], &da);
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let da: Vec<T> = d.iter().zip(x).map(|(&g, &x)| if x > T::zero() { g } else { T::zero() }).collect();
                    accumulate(&mut adj[a.0], &da);
                }
                Op::Softmax(a) => {
                    let n = node.cols.max(1);
                    let mut da = vec![T::zero(); d.len()];
                    for ((dr, yr), out) in d.chunks(n).zip(y.chunks(n)).zip(da.chunks_mut(n)) {
                        softmax_backward(dr, yr, out);
                    }
                    accumulate(&mut adj[a.0], &da);
                }
                Op::ConcatCols(parts) => {
                    let m = node.rows;
                    let mut col = 0;
                    for p in parts {
                        let w = self.nodes[p.0].cols;
                        let mut dp = Vec::with_capacity(m * w);
                        for i in 0..m {
                            dp.extend_from_slice(&d[i * node.cols + col..i * node.cols + col + w]);
                        }
                        accumulate(&mut adj[p.0], &dp);
                        col += w;
                    }
                }
                Op::GatherRows(a, rows) => {
                    let (m, n) = self.shape(*a);
                    let mut da = vec![T::zero(); m * n];
                    for (k, &r) in rows.iter().enumerate() {
                        for c in 0..n {
                            da[r * n + c] += d[k * n + c];
                        }
                    }
                    accumulate(&mut adj[a.0], &da);
                }
                Op::Transpose(a) => {
                    let (m, n) = self.shape(*a);
                    let mut da = vec![T::zero(); m * n];
                    for i in 0..m {
                        for j in 0..n {
                            da[i * n + j] = d[j * m + i];
                        }
                    }
                    accumulate(&mut adj[a.0], &da);
                }
                Op::Sum(a) => {
                    let (m, n) = self.shape(*a);
                    accumulate(&mut adj[a.0], &vec![d[0]; m * n]);
                }
                Op::EdgeScores { dst, src, edges } => {
                    let mut dd = vec![T::zero(); self.nodes[dst.0].rows];
                    let mut ds = vec![T::zero(); self.nodes[src.0].rows];
                    for (k, &(i, j)) in edges.pairs.iter().enumerate() {
                        dd[i] += d[k];
                        ds[j] += d[k];
                    }
                    accumulate(&mut adj[dst.0], &dd);
                    accumulate(&mut adj[src.0], &ds);
                }
                Op::SegmentSoftmax(a, edges) => {
                    let mut da = vec![T::zero(); d.len()];
                    for i in 0..edges.num_nodes() {
                        let r = edges.segment(i);
                        softmax_backward(&d[r.clone()], &y[r.clone()], &mut da[r]);
                    }
                    accumulate(&mut adj[a.0], &da);
                }
                Op::SegmentSum { alpha, z, edges } => {
                    let b = node.cols;
                    let (av, zv) = (self.value(*alpha), self.value(*z));
                    let mut dal = vec![T::zero(); edges.len()];
                    let mut dz = vec![T::zero(); zv.len()];
                    for (k, &(i, j)) in edges.pairs.iter().enumerate() {
                        let drow = &d[i * b..(i + 1) * b];
                        let zrow = &zv[j * b..(j + 1) * b];
                        let mut acc = T::zero();
                        for (&g, &x) in drow.iter().zip(zrow) {
                            acc += g * x;
                        }
                        dal[k] = acc;
                        for (o, &g) in dz[j * b..(j + 1) * b].iter_mut().zip(drow) {
                            *o += av[k] * g;
                        }
                    }
                    accumulate(&mut adj[alpha.0], &dal);
                    accumulate(&mut adj[z.0], &dz);
                }
            }
        }
    }
}

fn accumulate<T: Scalar>(slot: &mut Option<Vec<T>>, d: &[T]) {
    match slot {
        Some(acc) => {
            for (a, &x) in acc.iter_mut().zip(d) {
                *a += x;
            }
        }
        None => *slot = Some(d.to_vec()),
    }
}

/// Numerically stable softmax; an empty slice is left unchanged.
pub fn softmax_in_place<T: Scalar>(xs: &mut [T]) {
    let Some(max) = xs.iter().copied().reduce(T::max) else { return };
    let mut total = T::zero();
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

fn softmax_backward<T: Scalar>(d: &[T], y: &[T], out: &mut [T]) {
    let dot: T = d.iter().zip(y).map(|(&g, &p)| g * p).sum();
    for ((o, &g), &p) in out.iter_mut().zip(d).zip(y) {
        *o = p * (g - dot);
    }
}
