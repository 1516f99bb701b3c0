//! A small define-by-run reverse-mode differentiation tape over dense
//! matrices. Forward values are computed eagerly as nodes are added;
//! `backward` walks the tape once in reverse. The op set is exactly what the
//! scorer needs, nothing more.

use crate::linalg::{self, Mat};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone)]
enum Op<F> {
    Leaf,
    MatMul(NodeId, NodeId),
    /// `a · bᵀ`.
    MatMulNT(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    /// Matrix plus a broadcast row vector.
    AddRow(NodeId, NodeId),
    /// Matrix times a broadcast row vector, elementwise.
    MulRow(NodeId, NodeId),
    Scale(NodeId, F),
    Relu(NodeId),
    SoftmaxRows(NodeId),
    RmsNormRows(NodeId, F),
    SelectRows(NodeId, Vec<usize>),
    ConcatCols(NodeId, NodeId),
    ConcatRows(NodeId, NodeId),
    /// Each output element is the sum of the addressed scalars.
    GatherSum(Vec<Vec<(NodeId, usize)>>),
    /// Log-sum-exp of a column vector, producing a 1x1 node.
    LogSumExp(NodeId),
    /// Sum of 1x1 nodes.
    SumList(Vec<NodeId>),
}

struct Node<F> {
    rows: usize,
    cols: usize,
    value: Vec<F>,
    grad: Vec<F>,
    op: Op<F>,
    needs_grad: bool,
}

pub struct Graph<F: Real> {
    nodes: Vec<Node<F>>,
}

impl<F: Real> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> Graph<F> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    fn push(
        &mut self,
        rows: usize,
        cols: usize,
        value: Vec<F>,
        op: Op<F>,
        needs_grad: bool,
    ) -> NodeId {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node {
            rows,
            cols,
            value,
            grad: vec![F::ZERO; rows * cols],
            op,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        (self.nodes[id.0].rows, self.nodes[id.0].cols)
    }

    pub fn value(&self, id: NodeId) -> &[F] {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> &[F] {
        &self.nodes[id.0].grad
    }

    /// A constant input; no gradient flows into it.
    pub fn constant(&mut self, m: Mat<F>) -> NodeId {
        self.push(m.rows, m.cols, m.data, Op::Leaf, false)
    }

    /// A trainable leaf; its gradient is available after `backward`.
    pub fn param(&mut self, m: &Mat<F>) -> NodeId {
        self.push(m.rows, m.cols, m.data.clone(), Op::Leaf, true)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        assert_eq!(k, k2, "matmul inner dimensions");
        let mut out = vec![F::ZERO; m * n];
        linalg::matmul_acc(self.value(a), m, k, self.value(b), n, &mut out);
        let ng = self.needs(a) || self.needs(b);
        self.push(m, n, out, Op::MatMul(a, b), ng)
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, k) = self.shape(a);
        let (n, k2) = self.shape(b);
        assert_eq!(k, k2, "matmul_nt inner dimensions");
        let mut out = vec![F::ZERO; m * n];
        linalg::matmul_nt_acc(self.value(a), m, k, self.value(b), n, &mut out);
        let ng = self.needs(a) || self.needs(b);
        self.push(m, n, out, Op::MatMulNT(a, b), ng)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, n) = self.shape(a);
        assert_eq!(self.shape(b), (m, n), "add shapes");
        let out: Vec<F> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| *x + *y)
            .collect();
        let ng = self.needs(a) || self.needs(b);
        self.push(m, n, out, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, n) = self.shape(a);
        assert_eq!(self.shape(b), (m, n), "sub shapes");
        let out: Vec<F> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| *x - *y)
            .collect();
        let ng = self.needs(a) || self.needs(b);
        self.push(m, n, out, Op::Sub(a, b), ng)
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let (m, n) = self.shape(a);
        assert_eq!(self.shape(row), (1, n), "broadcast row shape");
        let mut out = self.value(a).to_vec();
        for r in 0..m {
            for c in 0..n {
                out[r * n + c] += self.value(row)[c];
            }
        }
        let ng = self.needs(a) || self.needs(row);
        self.push(m, n, out, Op::AddRow(a, row), ng)
    }

    pub fn mul_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let (m, n) = self.shape(a);
        assert_eq!(self.shape(row), (1, n), "broadcast row shape");
        let mut out = self.value(a).to_vec();
        for r in 0..m {
            for c in 0..n {
                out[r * n + c] *= self.value(row)[c];
            }
        }
        let ng = self.needs(a) || self.needs(row);
        self.push(m, n, out, Op::MulRow(a, row), ng)
    }

    pub fn scale(&mut self, a: NodeId, s: F) -> NodeId {
        let (m, n) = self.shape(a);
        let out: Vec<F> = self.value(a).iter().map(|x| *x * s).collect();
        let ng = self.needs(a);
        self.push(m, n, out, Op::Scale(a, s), ng)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let (m, n) = self.shape(a);
        let out: Vec<F> = self
            .value(a)
            .iter()
            .map(|x| if *x > F::ZERO { *x } else { F::ZERO })
            .collect();
        let ng = self.needs(a);
        self.push(m, n, out, Op::Relu(a), ng)
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let (m, n) = self.shape(a);
        let mut out = self.value(a).to_vec();
        for r in 0..m {
            linalg::softmax_row(&mut out[r * n..(r + 1) * n]);
        }
        let ng = self.needs(a);
        self.push(m, n, out, Op::SoftmaxRows(a), ng)
    }

    pub fn rmsnorm_rows(&mut self, a: NodeId, eps: F) -> NodeId {
        let (m, n) = self.shape(a);
        let mut out = vec![F::ZERO; m * n];
        for r in 0..m {
            linalg::rmsnorm_row(
                &self.value(a)[r * n..(r + 1) * n],
                eps,
                &mut out[r * n..(r + 1) * n],
            );
        }
        let ng = self.needs(a);
        self.push(m, n, out, Op::RmsNormRows(a, eps), ng)
    }

    pub fn select_rows(&mut self, a: NodeId, idx: Vec<usize>) -> NodeId {
        let (rows, n) = self.shape(a);
        let mut out = Vec::with_capacity(idx.len() * n);
        for &i in &idx {
            assert!(i < rows, "select_rows index in range");
            out.extend_from_slice(&self.value(a)[i * n..(i + 1) * n]);
        }
        let m = idx.len();
        let ng = self.needs(a);
        self.push(m, n, out, Op::SelectRows(a, idx), ng)
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, na) = self.shape(a);
        let (mb, nb) = self.shape(b);
        assert_eq!(m, mb, "concat_cols row count");
        let mut out = Vec::with_capacity(m * (na + nb));
        for r in 0..m {
            out.extend_from_slice(&self.value(a)[r * na..(r + 1) * na]);
            out.extend_from_slice(&self.value(b)[r * nb..(r + 1) * nb]);
        }
        let ng = self.needs(a) || self.needs(b);
        self.push(m, na + nb, out, Op::ConcatCols(a, b), ng)
    }

    pub fn concat_rows(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ma, n) = self.shape(a);
        let (mb, nb) = self.shape(b);
        assert_eq!(n, nb, "concat_rows column count");
        let mut out = Vec::with_capacity((ma + mb) * n);
        out.extend_from_slice(self.value(a));
        out.extend_from_slice(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push(ma + mb, n, out, Op::ConcatRows(a, b), ng)
    }

    /// Column vector whose element `i` is the sum of the addressed scalars
    /// in `terms[i]`; addresses are (node, flat index) pairs.
    pub fn gather_sum(&mut self, terms: Vec<Vec<(NodeId, usize)>>) -> NodeId {
        let mut out = Vec::with_capacity(terms.len());
        let mut ng = false;
        for term in &terms {
            let mut acc = F::ZERO;
            for &(src, idx) in term {
                acc += self.value(src)[idx];
                ng |= self.needs(src);
            }
            out.push(acc);
        }
        let m = terms.len();
        self.push(m, 1, out, Op::GatherSum(terms), ng)
    }

    pub fn log_sum_exp(&mut self, a: NodeId) -> NodeId {
        let (m, n) = self.shape(a);
        assert_eq!(n, 1, "log_sum_exp expects a column vector");
        assert!(m >= 1, "log_sum_exp of an empty vector");
        let v = linalg::log_sum_exp(self.value(a));
        let ng = self.needs(a);
        self.push(1, 1, vec![v], Op::LogSumExp(a), ng)
    }

    pub fn sum_list(&mut self, items: Vec<NodeId>) -> NodeId {
        let mut acc = F::ZERO;
        let mut ng = false;
        for &i in &items {
            assert_eq!(self.shape(i), (1, 1), "sum_list expects scalars");
            acc += self.value(i)[0];
            ng |= self.needs(i);
        }
        self.push(1, 1, vec![acc], Op::SumList(items), ng)
    }

    /// Reverse pass from a scalar loss node. Gradients accumulate on every
    /// node with `needs_grad`, in particular on the `param` leaves.
    pub fn backward(&mut self, loss: NodeId) {
        assert_eq!(self.shape(loss), (1, 1), "loss must be scalar");
        self.nodes[loss.0].grad[0] = F::ONE;
        for i in (0..self.nodes.len()).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let dc = std::mem::take(&mut self.nodes[i].grad);
            match &op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (m, k) = self.shape(*a);
                    let n = self.shape(*b).1;
                    if self.needs(*a) {
                        let mut tmp = vec![F::ZERO; m * k];
                        linalg::matmul_nt_acc(&dc, m, n, self.value(*b), k, &mut tmp);
                        self.accumulate(*a, &tmp);
                    }
                    if self.needs(*b) {
                        let mut tmp = vec![F::ZERO; k * n];
                        linalg::matmul_tn_acc(self.value(*a), m, k, &dc, n, &mut tmp);
                        self.accumulate(*b, &tmp);
                    }
                }
                Op::MatMulNT(a, b) => {
                    let (m, k) = self.shape(*a);
                    let n = self.shape(*b).0;
                    if self.needs(*a) {
                        let mut tmp = vec![F::ZERO; m * k];
                        linalg::matmul_acc(&dc, m, n, self.value(*b), k, &mut tmp);
                        self.accumulate(*a, &tmp);
                    }
                    if self.needs(*b) {
                        let mut tmp = vec![F::ZERO; n * k];
                        linalg::matmul_tn_acc(&dc, m, n, self.value(*a), k, &mut tmp);
                        self.accumulate(*b, &tmp);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*a) {
                        self.accumulate(*a, &dc);
                    }
                    if self.needs(*b) {
                        self.accumulate(*b, &dc);
                    }
                }
                Op::Sub(a, b) => {
                    if self.needs(*a) {
                        self.accumulate(*a, &dc);
                    }
                    if self.needs(*b) {
                        let neg: Vec<F> = dc.iter().map(|x| -*x).collect();
                        self.accumulate(*b, &neg);
                    }
                }
                Op::AddRow(a, row) => {
                    let (m, n) = self.shape(*a);
                    if self.needs(*a) {
                        self.accumulate(*a, &dc);
                    }
                    if self.needs(*row) {
                        let mut tmp = vec![F::ZERO; n];
                        for r in 0..m {
                            for c in 0..n {
                                tmp[c] += dc[r * n + c];
                            }
                        }
                        self.accumulate(*row, &tmp);
                    }
                }
                Op::MulRow(a, row) => {
                    let (m, n) = self.shape(*a);
                    if self.needs(*a) {
                        let rv = self.value(*row).to_vec();
                        let mut tmp = vec![F::ZERO; m * n];
                        for r in 0..m {
                            for c in 0..n {
                                tmp[r * n + c] = dc[r * n + c] * rv[c];
                            }
                        }
                        self.accumulate(*a, &tmp);
                    }
                    if self.needs(*row) {
                        let mut tmp = vec![F::ZERO; n];
                        {
                            let av = self.value(*a);
                            for r in 0..m {
                                for c in 0..n {
                                    tmp[c] += dc[r * n + c] * av[r * n + c];
                                }
                            }
                        }
                        self.accumulate(*row, &tmp);
                    }
                }
                Op::Scale(a, s) => {
                    if self.needs(*a) {
                        let tmp: Vec<F> = dc.iter().map(|x| *x * *s).collect();
                        self.accumulate(*a, &tmp);
                    }
                }
                Op::Relu(a) => {
                    if self.needs(*a) {
                        let tmp: Vec<F> = dc
                            .iter()
                            .zip(self.value(*a))
                            .map(|(d, x)| if *x > F::ZERO { *d } else { F::ZERO })
                            .collect();
                        self.accumulate(*a, &tmp);
                    }
                }
                Op::SoftmaxRows(a) => {
                    if self.needs(*a) {
                        let (m, n) = self.shape(*a);
                        let y = self.nodes[i].value.clone();
                        let mut tmp = vec![F::ZERO; m * n];
                        for r in 0..m {
                            let yr = &y[r * n..(r + 1) * n];
                            let dr = &dc[r * n..(r + 1) * n];
                            let dotv = linalg::dot(dr, yr);
                            for c in 0..n {
                                tmp[r * n + c] = yr[c] * (dr[c] - dotv);
                            }
                        }
                        self.accumulate(*a, &tmp);
                    }
                }
                Op::RmsNormRows(a, eps) => {
                    if self.needs(*a) {
                        let (m, n) = self.shape(*a);
                        let nf = F::from_f64(n as f64);
                        let y = self.nodes[i].value.clone();
                        let mut tmp = vec![F::ZERO; m * n];
                        {
                            let xv = self.value(*a);
                            for r in 0..m {
                                let xr = &xv[r * n..(r + 1) * n];
                                let yr = &y[r * n..(r + 1) * n];
                                let dr = &dc[r * n..(r + 1) * n];
                                let mut ms = F::ZERO;
                                for &x in xr {
                                    ms += x * x;
                                }
                                let rms = (ms / nf + *eps).sqrt();
                                let mean_dy_y = linalg::dot(dr, yr) / nf;
                                for c in 0..n {
                                    tmp[r * n + c] = (dr[c] - yr[c] * mean_dy_y) / rms;
                                }
                            }
                        }
                        self.accumulate(*a, &tmp);
                    }
                }
                Op::SelectRows(a, idx) => {
                    if self.needs(*a) {
                        let n = self.shape(*a).1;
                        for (r, &src) in idx.iter().enumerate() {
                            for c in 0..n {
                                self.nodes[a.0].grad[src * n + c] += dc[r * n + c];
                            }
                        }
                    }
                }
                Op::ConcatCols(a, b) => {
                    let (m, na) = self.shape(*a);
                    let nb = self.shape(*b).1;
                    let n = na + nb;
                    if self.needs(*a) {
                        let mut tmp = vec![F::ZERO; m * na];
                        for r in 0..m {
                            tmp[r * na..(r + 1) * na].copy_from_slice(&dc[r * n..r * n + na]);
                        }
                        self.accumulate(*a, &tmp);
                    }
                    if self.needs(*b) {
                        let mut tmp = vec![F::ZERO; m * nb];
                        for r in 0..m {
                            tmp[r * nb..(r + 1) * nb].copy_from_slice(&dc[r * n + na..(r + 1) * n]);
                        }
                        self.accumulate(*b, &tmp);
                    }
                }
                Op::ConcatRows(a, b) => {
                    let (ma, n) = self.shape(*a);
                    let mb = self.shape(*b).0;
                    if self.needs(*a) {
                        self.accumulate(*a, &dc[..ma * n]);
                    }
                    if self.needs(*b) {
                        self.accumulate(*b, &dc[ma * n..(ma + mb) * n]);
                    }
                }
                Op::GatherSum(terms) => {
                    for (r, term) in terms.iter().enumerate() {
                        for &(src, idx) in term {
                            if self.needs(src) {
                                self.nodes[src.0].grad[idx] += dc[r];
                            }
                        }
                    }
                }
                Op::LogSumExp(a) => {
                    if self.needs(*a) {
                        let mut soft = self.value(*a).to_vec();
                        linalg::softmax_row(&mut soft);
                        let tmp: Vec<F> = soft.iter().map(|p| *p * dc[0]).collect();
                        self.accumulate(*a, &tmp);
                    }
                }
                Op::SumList(items) => {
                    for &item in items {
                        if self.needs(item) {
                            self.nodes[item.0].grad[0] += dc[0];
                        }
                    }
                }
            }
            self.nodes[i].grad = dc;
        }
    }

    fn accumulate(&mut self, id: NodeId, delta: &[F]) {
        let g = &mut self.nodes[id.0].grad;
        debug_assert_eq!(g.len(), delta.len());
        for (gi, di) in g.iter_mut().zip(delta) {
            *gi += *di;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Scalar function exercising every op, parameterized by a flat vector.
    // Returns (loss value, graph, param node, loss node).
    fn composite(theta: &[f64]) -> (f64, Graph<f64>, NodeId, NodeId) {
        let mut g: Graph<f64> = Graph::new();
        let p = g.param(&Mat::from_vec(3, 4, theta.to_vec()));
        let c = g.constant(Mat::from_vec(
            4,
            2,
            (0..8).map(|i| 0.3 * i as f64 - 1.1).collect(),
        ));

        let mm = g.matmul(p, c); // 3x2
        let b2 = g.select_rows(mm, vec![1, 2]); // 2x2
        let nt = g.matmul_nt(mm, b2); // 3x2

        let biasrow = g.select_rows(p, vec![2, 2]); // repeated selection, 2x4
        let pick2 = g.constant(Mat::from_vec(4, 2, vec![1., 0., 0., 1., 0., 0., 0., 0.]));
        let bias_wide = g.matmul(biasrow, pick2); // 2x2
        let bias2 = g.select_rows(bias_wide, vec![0]); // 1x2
        let ar = g.add_row(nt, bias2); // 3x2
        let mr = g.mul_row(ar, bias2);
        let sc = g.scale(mr, 0.7);
        let re = g.relu(sc);
        let sm = g.softmax_rows(re);
        let rn = g.rmsnorm_rows(sm, 1e-6);
        let cc = g.concat_cols(rn, sm); // 3x4
        let cr = g.concat_rows(cc, cc); // 6x4
        let gs = g.gather_sum(vec![
            vec![(cr, 0)],
            vec![(cr, 5), (cc, 2)],
            vec![(cr, 9), (mm, 1), (p, 7)],
        ]);
        let lse = g.log_sum_exp(gs);
        let pick = g.gather_sum(vec![vec![(gs, 1)]]);
        let diff = g.sub(lse, pick);
        let also = g.add(diff, lse);
        let total = g.sum_list(vec![diff, also]);
        let v = g.value(total)[0];
        (v, g, p, total)
    }

    #[test]
    fn composite_gradient_matches_central_differences() {
        let theta: Vec<f64> = (0..12)
            .map(|i| 0.17 * (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -0.8 })
            .collect();
        let (_, mut g, p, loss) = composite(&theta);
        g.backward(loss);
        let analytic = g.grad(p).to_vec();

        let h = 1e-5;
        for i in 0..theta.len() {
            let mut plus = theta.clone();
            plus[i] += h;
            let mut minus = theta.clone();
            minus[i] -= h;
            let numeric = (composite(&plus).0 - composite(&minus).0) / (2.0 * h);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
            let rel = (analytic[i] - numeric).abs() / denom;
            assert!(
                rel < 1e-6,
                "param {i}: analytic {} vs numeric {} (rel {rel})",
                analytic[i],
                numeric
            );
        }
    }

    #[test]
    fn gradients_accumulate_over_repeated_use() {
        // loss = p + p through one gather: d/dp = 2.
        let mut g: Graph<f64> = Graph::new();
        let p = g.param(&Mat::from_vec(1, 1, vec![0.5]));
        let gs = g.gather_sum(vec![vec![(p, 0), (p, 0)]]);
        let loss = g.sum_list(vec![gs]);
        g.backward(loss);
        assert_eq!(g.grad(p), &[2.0]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut g: Graph<f64> = Graph::new();
        let c = g.constant(Mat::from_vec(1, 2, vec![1.0, 2.0]));
        let p = g.param(&Mat::from_vec(1, 2, vec![3.0, 4.0]));
        let s = g.add(c, p);
        let gs = g.gather_sum(vec![vec![(s, 0), (s, 1)]]);
        let loss = g.sum_list(vec![gs]);
        g.backward(loss);
        assert_eq!(g.grad(p), &[1.0, 1.0]);
        assert_eq!(g.grad(c), &[0.0, 0.0]);
    }

    #[test]
    fn log_sum_exp_is_stable_for_large_scores() {
        let mut g: Graph<f64> = Graph::new();
        let p = g.param(&Mat::from_vec(3, 1, vec![1000.0, 999.0, -2000.0]));
        let lse = g.log_sum_exp(p);
        let v = g.value(lse)[0];
        assert!(v.is_finite());
        assert!((v - (1000.0 + (1.0 + (-1.0f64).exp()).ln())).abs() < 1e-9);
    }
}
