//! Reverse-mode automatic differentiation on a Wengert tape.
//!
//! Every primitive appends a node holding its output value and the ids of
//! its inputs. Nodes are only ever appended, so inputs always precede the
//! nodes that consume them and the reverse sweep in [`Tape::backward`] is a
//! plain walk from the seeded node down to id 0.
//!
//! Shape mismatches inside primitives are programmer errors and panic; the
//! user-facing entry points (`MlpParams::forward`, `Tape::backward`) validate
//! their inputs and return [`Error::Shape`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    AddScalar(Var),
    MulScalar(Var, f64),
    Matmul(Var, Var),
    Linear { x: Var, w: Var, b: Var },
    Relu(Var),
    Exp(Var),
    Ln(Var),
    Sqrt(Var),
    ClampMin(Var, f64),
    Softmax(Var),
    Sum(Var),
    SumLast(Var),
    /// Reduction over the last axis that routes the gradient to one element
    /// per row (max or min).
    SelectLast { x: Var, picks: Vec<usize> },
    Reshape(Var),
    Transpose(Var),
    ConcatLast(Vec<Var>),
    SliceLast { x: Var, start: usize },
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    first_nonfinite: Option<usize>,
}

/// Gradients produced by [`Tape::backward`], indexed by node.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the seeded output with respect to `v`, or `None` when no
    /// path connects them.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient with respect to `v`, zeros when `v` does not influence the
    /// output.
    pub fn wrt(&self, v: Var) -> Tensor {
        match self.get(v) {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }
}

fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for k in 0..rank {
        let da = if k + a.len() >= rank { a[k + a.len() - rank] } else { 1 };
        let db = if k + b.len() >= rank { b[k + b.len() - rank] } else { 1 };
        out[k] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// For each flat index of `out`, the flat index of the broadcast input.
fn broadcast_map(input: &[usize], out: &[usize]) -> Vec<usize> {
    let n: usize = out.iter().product();
    if input == out {
        return (0..n).collect();
    }
    let rank = out.len();
    let pad = rank - input.len();
    let mut in_strides = vec![0usize; rank];
    let mut s = 1;
    for k in (0..rank).rev() {
        let d = if k >= pad { input[k - pad] } else { 1 };
        in_strides[k] = if d == 1 { 0 } else { s };
        s *= d;
    }
    let mut map = Vec::with_capacity(n);
    let mut coord = vec![0usize; rank];
    let mut idx = 0usize;
    for _ in 0..n {
        map.push(idx);
        for k in (0..rank).rev() {
            coord[k] += 1;
            idx += in_strides[k];
            if coord[k] < out[k] {
                break;
            }
            idx -= in_strides[k] * coord[k];
            coord[k] = 0;
        }
    }
    map
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => {
            for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        None => *slot = Some(g),
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Id of the first node whose value contained a NaN or infinity.
    pub fn first_nonfinite(&self) -> Option<usize> {
        self.first_nonfinite
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        let id = self.nodes.len();
        if self.first_nonfinite.is_none() && !value.is_finite() {
            self.first_nonfinite = Some(id);
        }
        self.nodes.push(Node { op, value });
        Var(id)
    }

    /// Records an input. Gradients flow to leaves but not past them, so a
    /// leaf built from a computed value acts as a stop-gradient.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn scalar(&mut self, x: f64) -> Var {
        self.leaf(Tensor::scalar(x))
    }

    pub fn vector(&mut self, xs: Vec<f64>) -> Var {
        self.leaf(Tensor::vector(xs))
    }

    /// Stop-gradient copy of `v`.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.leaf(value)
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let out = broadcast_shape(sa, sb)
            .unwrap_or_else(|| panic!("cannot broadcast {:?} with {:?}", sa, sb));
        let va = self.value(a).data();
        let vb = self.value(b).data();
        let data = if sa == sb {
            va.iter().zip(vb).map(|(&x, &y)| f(x, y)).collect()
        } else {
            let ma = broadcast_map(sa, &out);
            let mb = broadcast_map(sb, &out);
            ma.iter().zip(&mb).map(|(&i, &j)| f(va[i], vb[j])).collect()
        };
        let value = Tensor::new(out, data).expect("broadcast shape");
        self.push(op, value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| -x);
        self.push(Op::Neg(a), value)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x + c);
        self.push(Op::AddScalar(a), value)
    }

    pub fn mul_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| c * x);
        self.push(Op::MulScalar(a, c), value)
    }

    /// Matrix product of `[r, k]` and `[k, c]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        assert!(
            sa.len() == 2 && sb.len() == 2 && sa[1] == sb[0],
            "matmul of {:?} and {:?}",
            sa,
            sb
        );
        let (r, k, c) = (sa[0], sa[1], sb[1]);
        let (va, vb) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for l in 0..k {
                let x = va[i * k + l];
                if x == 0.0 {
                    continue;
                }
                for j in 0..c {
                    out[i * c + j] += x * vb[l * c + j];
                }
            }
        }
        let value = Tensor::matrix(r, c, out).expect("matmul shape");
        self.push(Op::Matmul(a, b), value)
    }

    /// Affine map `x W^T + b` for `x` of shape `[in]` or `[rows, in]`,
    /// `W` of shape `[out, in]` and `b` of shape `[out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        let sb = self.shape(b).to_vec();
        assert!(
            sw.len() == 2 && sb == [sw[0]] && (sx.len() == 1 || sx.len() == 2),
            "linear with x {:?}, w {:?}, b {:?}",
            sx,
            sw,
            sb
        );
        let (out_dim, in_dim) = (sw[0], sw[1]);
        assert_eq!(*sx.last().unwrap(), in_dim, "linear input width {:?} vs weight {:?}", sx, sw);
        let rows = if sx.len() == 1 { 1 } else { sx[0] };
        let (vx, vw, vb) = (self.value(x).data(), self.value(w).data(), self.value(b).data());
        let mut out = Vec::with_capacity(rows * out_dim);
        for r in 0..rows {
            let xr = &vx[r * in_dim..(r + 1) * in_dim];
            for o in 0..out_dim {
                let wr = &vw[o * in_dim..(o + 1) * in_dim];
                out.push(vb[o] + math::dot(wr, xr));
            }
        }
        let shape = if sx.len() == 1 { vec![out_dim] } else { vec![rows, out_dim] };
        let value = Tensor::new(shape, out).expect("linear shape");
        self.push(Op::Linear { x, w, b }, value)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(Op::Relu(a), value)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(math::exp);
        self.push(Op::Exp(a), value)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let value = self.value(a).map(math::ln);
        self.push(Op::Ln(a), value)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let value = self.value(a).map(math::sqrt);
        self.push(Op::Sqrt(a), value)
    }

    /// Elementwise `max(x, floor)`; the gradient passes only where `x > floor`.
    pub fn clamp_min(&mut self, a: Var, floor: f64) -> Var {
        let value = self.value(a).map(|x| if x > floor { x } else { floor });
        self.push(Op::ClampMin(a, floor), value)
    }

    /// Softmax over the last axis, computed with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let c = v.last_dim();
        let mut out = Vec::with_capacity(v.len());
        for r in 0..v.rows() {
            let row = v.row(r);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let start = out.len();
            let mut z = 0.0;
            for &x in row {
                let e = math::exp(x - m);
                z += e;
                out.push(e);
            }
            for y in &mut out[start..start + c] {
                *y /= z;
            }
        }
        let value = Tensor::new(v.shape().to_vec(), out).expect("softmax shape");
        self.push(Op::Softmax(a), value)
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        self.push(Op::Sum(a), value)
    }

    /// Sum over the last axis, keeping it with size 1.
    pub fn sum_last(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let data: Vec<f64> = (0..v.rows()).map(|r| v.row(r).iter().sum()).collect();
        let mut shape = v.shape().to_vec();
        match shape.last_mut() {
            Some(d) => *d = 1,
            None => shape.push(1),
        }
        let value = Tensor::new(shape, data).expect("sum_last shape");
        self.push(Op::SumLast(a), value)
    }

    fn select_last(&mut self, a: Var, pick: fn(&[f64]) -> usize) -> Var {
        let v = self.value(a);
        let picks: Vec<usize> = (0..v.rows()).map(|r| pick(v.row(r))).collect();
        let data = picks.iter().enumerate().map(|(r, &j)| v.row(r)[j]).collect();
        let mut shape = v.shape().to_vec();
        match shape.last_mut() {
            Some(d) => *d = 1,
            None => shape.push(1),
        }
        let value = Tensor::new(shape, data).expect("select shape");
        self.push(Op::SelectLast { x: a, picks }, value)
    }

    /// Row maximum over the last axis (lowest index on ties).
    pub fn max_last(&mut self, a: Var) -> Var {
        self.select_last(a, math::argmax)
    }

    /// Row minimum over the last axis (lowest index on ties).
    pub fn min_last(&mut self, a: Var) -> Var {
        self.select_last(a, math::argmin)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        let value = self
            .value(a)
            .clone()
            .reshaped(shape)
            .unwrap_or_else(|e| panic!("{}", e));
        self.push(Op::Reshape(a), value)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a);
        assert_eq!(v.rank(), 2, "transpose needs a matrix, got {:?}", v.shape());
        let (r, c) = (v.shape()[0], v.shape()[1]);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = v.data()[i * c + j];
            }
        }
        let value = Tensor::matrix(c, r, out).expect("transpose shape");
        self.push(Op::Transpose(a), value)
    }

    /// Concatenation along the last axis; leading dimensions must agree.
    pub fn concat_last(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of nothing");
        let lead: Vec<usize> = {
            let s = self.shape(parts[0]);
            s[..s.len() - 1].to_vec()
        };
        for &p in parts {
            let s = self.shape(p);
            assert!(
                !s.is_empty() && s[..s.len() - 1] == lead[..],
                "concat of {:?} with leading dims {:?}",
                s,
                lead
            );
        }
        let rows: usize = lead.iter().product();
        let width: usize = parts.iter().map(|&p| self.value(p).last_dim()).sum();
        let mut out = Vec::with_capacity(rows * width);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let mut shape = lead;
        shape.push(width);
        let value = Tensor::new(shape, out).expect("concat shape");
        self.push(Op::ConcatLast(parts.to_vec()), value)
    }

    /// Columns `start..start + len` of the last axis.
    pub fn slice_last(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a);
        let c = v.last_dim();
        assert!(start + len <= c, "slice {}..{} of width {}", start, start + len, c);
        let mut out = Vec::with_capacity(v.rows() * len);
        for r in 0..v.rows() {
            out.extend_from_slice(&v.row(r)[start..start + len]);
        }
        let mut shape = v.shape().to_vec();
        match shape.last_mut() {
            Some(d) => *d = len,
            None => shape.push(len),
        }
        let value = Tensor::new(shape, out).expect("slice shape");
        self.push(Op::SliceLast { x: a, start }, value)
    }

    /// Dot product of two equally shaped tensors, as a scalar.
    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let p = self.mul(a, b);
        self.sum(p)
    }

    /// `ln(sum(exp(x)))` over the last axis, keeping it with size 1.
    pub fn log_sum_exp_last(&mut self, a: Var) -> Var {
        let m = self.max_last(a);
        let m = self.detach(m);
        let shifted = self.sub(a, m);
        let e = self.exp(shifted);
        let s = self.sum_last(e);
        let l = self.ln(s);
        self.add(l, m)
    }

    /// Reverse sweep from `output` seeded with `seed`.
    pub fn backward(&self, output: Var, seed: &Tensor) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::invalid("backward on an empty tape"));
        }
        let out_shape = self.shape(output);
        if seed.shape() != out_shape {
            return Err(Error::shape(format!(
                "seed {:?} does not match output {:?}",
                seed.shape(),
                out_shape
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(seed.clone());
        for id in (0..=output.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        if let Some((id, _)) = grads
            .iter()
            .enumerate()
            .find(|(_, g)| g.as_ref().is_some_and(|g| !g.is_finite()))
        {
            return Err(Error::NonFinite(format!("gradient at node {}", id)));
        }
        grads.resize(self.nodes.len(), None);
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    /// Reverse sweep from a scalar output with seed 1.
    pub fn backward_scalar(&self, output: Var) -> Result<Gradients> {
        let seed = Tensor::filled(self.shape(output), 1.0);
        self.backward(output, &seed)
    }

    fn reduce_to(&self, g: &Tensor, target: Var) -> Tensor {
        let ts = self.shape(target);
        if g.shape() == ts {
            return g.clone();
        }
        let map = broadcast_map(ts, g.shape());
        let mut out = Tensor::zeros(ts);
        let d = out.data_mut();
        for (k, &i) in map.iter().enumerate() {
            d[i] += g.data()[k];
        }
        out
    }

    fn propagate(&self, id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[id];
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                accumulate(&mut grads[a.0], self.reduce_to(g, *a));
                accumulate(&mut grads[b.0], self.reduce_to(g, *b));
            }
            Op::Sub(a, b) => {
                accumulate(&mut grads[a.0], self.reduce_to(g, *a));
                accumulate(&mut grads[b.0], self.reduce_to(&g.scale(-1.0), *b));
            }
            Op::Mul(a, b) | Op::Div(a, b) => {
                let is_div = matches!(node.op, Op::Div(..));
                let out = g.shape();
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                let ma = broadcast_map(sa, out);
                let mb = broadcast_map(sb, out);
                let mut ga = Tensor::zeros(sa);
                let mut gb = Tensor::zeros(sb);
                for k in 0..g.len() {
                    let (x, z) = (va[ma[k]], vb[mb[k]]);
                    let gk = g.data()[k];
                    if is_div {
                        ga.data_mut()[ma[k]] += gk / z;
                        gb.data_mut()[mb[k]] -= gk * x / (z * z);
                    } else {
                        ga.data_mut()[ma[k]] += gk * z;
                        gb.data_mut()[mb[k]] += gk * x;
                    }
                }
                accumulate(&mut grads[a.0], ga);
                accumulate(&mut grads[b.0], gb);
            }
            Op::Neg(a) => accumulate(&mut grads[a.0], g.scale(-1.0)),
            Op::AddScalar(a) => accumulate(&mut grads[a.0], g.clone()),
            Op::MulScalar(a, c) => accumulate(&mut grads[a.0], g.scale(*c)),
            Op::Matmul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (r, k) = (va.shape()[0], va.shape()[1]);
                let c = vb.shape()[1];
                let mut ga = vec![0.0; r * k];
                let mut gb = vec![0.0; k * c];
                for i in 0..r {
                    for l in 0..k {
                        let mut s = 0.0;
                        for j in 0..c {
                            let gij = g.data()[i * c + j];
                            s += gij * vb.data()[l * c + j];
                            gb[l * c + j] += va.data()[i * k + l] * gij;
                        }
                        ga[i * k + l] = s;
                    }
                }
                accumulate(&mut grads[a.0], Tensor::matrix(r, k, ga).unwrap());
                accumulate(&mut grads[b.0], Tensor::matrix(k, c, gb).unwrap());
            }
            Op::Linear { x, w, b } => {
                let (vx, vw) = (self.value(*x), self.value(*w));
                let (out_dim, in_dim) = (vw.shape()[0], vw.shape()[1]);
                let rows = vx.len() / in_dim;
                let mut gx = vec![0.0; vx.len()];
                let mut gw = vec![0.0; vw.len()];
                let mut gb = vec![0.0; out_dim];
                for r in 0..rows {
                    let xr = &vx.data()[r * in_dim..(r + 1) * in_dim];
                    for o in 0..out_dim {
                        let go = g.data()[r * out_dim + o];
                        if go == 0.0 {
                            continue;
                        }
                        gb[o] += go;
                        let wr = &vw.data()[o * in_dim..(o + 1) * in_dim];
                        let gwr = &mut gw[o * in_dim..(o + 1) * in_dim];
                        let gxr = &mut gx[r * in_dim..(r + 1) * in_dim];
                        for l in 0..in_dim {
                            gwr[l] += go * xr[l];
                            gxr[l] += go * wr[l];
                        }
                    }
                }
                accumulate(&mut grads[x.0], Tensor::new(vx.shape().to_vec(), gx).unwrap());
                accumulate(&mut grads[w.0], Tensor::new(vw.shape().to_vec(), gw).unwrap());
                accumulate(&mut grads[b.0], Tensor::vector(gb));
            }
            Op::Relu(a) => {
                let va = self.value(*a).data();
                let data = g
                    .data()
                    .iter()
                    .zip(va)
                    .map(|(&gk, &x)| if x > 0.0 { gk } else { 0.0 })
                    .collect();
                accumulate(&mut grads[a.0], Tensor::new(g.shape().to_vec(), data).unwrap());
            }
            Op::ClampMin(a, floor) => {
                let va = self.value(*a).data();
                let data = g
                    .data()
                    .iter()
                    .zip(va)
                    .map(|(&gk, &x)| if x > *floor { gk } else { 0.0 })
                    .collect();
                accumulate(&mut grads[a.0], Tensor::new(g.shape().to_vec(), data).unwrap());
            }
            Op::Exp(a) => {
                let data = g.data().iter().zip(y.data()).map(|(gk, yk)| gk * yk).collect();
                accumulate(&mut grads[a.0], Tensor::new(g.shape().to_vec(), data).unwrap());
            }
            Op::Ln(a) => {
                let va = self.value(*a).data();
                let data = g.data().iter().zip(va).map(|(gk, x)| gk / x).collect();
                accumulate(&mut grads[a.0], Tensor::new(g.shape().to_vec(), data).unwrap());
            }
            Op::Sqrt(a) => {
                let data = g.data().iter().zip(y.data()).map(|(gk, yk)| 0.5 * gk / yk).collect();
                accumulate(&mut grads[a.0], Tensor::new(g.shape().to_vec(), data).unwrap());
            }
            Op::Softmax(a) => {
                let c = y.last_dim();
                let mut data = vec![0.0; y.len()];
                for r in 0..y.rows() {
                    let yr = y.row(r);
                    let gr = &g.data()[r * c..(r + 1) * c];
                    let inner = math::dot(yr, gr);
                    for j in 0..c {
                        data[r * c + j] = yr[j] * (gr[j] - inner);
                    }
                }
                accumulate(&mut grads[a.0], Tensor::new(y.shape().to_vec(), data).unwrap());
            }
            Op::Sum(a) => {
                let s = g.item();
                accumulate(&mut grads[a.0], Tensor::filled(self.shape(*a), s));
            }
            Op::SumLast(a) => {
                let va = self.value(*a);
                let c = va.last_dim();
                let mut data = Vec::with_capacity(va.len());
                for r in 0..va.rows() {
                    data.extend(core::iter::repeat(g.data()[r]).take(c));
                }
                accumulate(&mut grads[a.0], Tensor::new(va.shape().to_vec(), data).unwrap());
            }
            Op::SelectLast { x, picks } => {
                let vx = self.value(*x);
                let c = vx.last_dim();
                let mut out = Tensor::zeros(vx.shape());
                for (r, &j) in picks.iter().enumerate() {
                    out.data_mut()[r * c + j] = g.data()[r];
                }
                accumulate(&mut grads[x.0], out);
            }
            Op::Reshape(a) => {
                let gr = g.clone().reshaped(self.shape(*a)).unwrap();
                accumulate(&mut grads[a.0], gr);
            }
            Op::Transpose(a) => {
                let (r, c) = (g.shape()[0], g.shape()[1]);
                let mut out = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        out[j * r + i] = g.data()[i * c + j];
                    }
                }
                accumulate(&mut grads[a.0], Tensor::matrix(c, r, out).unwrap());
            }
            Op::ConcatLast(parts) => {
                let width = g.last_dim();
                let rows = g.rows();
                let mut offset = 0;
                for p in parts {
                    let vp = self.value(*p);
                    let w = vp.last_dim();
                    let mut data = Vec::with_capacity(vp.len());
                    for r in 0..rows {
                        data.extend_from_slice(&g.data()[r * width + offset..r * width + offset + w]);
                    }
                    accumulate(&mut grads[p.0], Tensor::new(vp.shape().to_vec(), data).unwrap());
                    offset += w;
                }
            }
            Op::SliceLast { x, start } => {
                let vx = self.value(*x);
                let c = vx.last_dim();
                let len = g.last_dim();
                let mut out = Tensor::zeros(vx.shape());
                for r in 0..vx.rows() {
                    out.data_mut()[r * c + start..r * c + start + len]
                        .copy_from_slice(&g.data()[r * len..(r + 1) * len]);
                }
                accumulate(&mut grads[x.0], out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn square_has_gradient_six_at_three() {
        let mut t = Tape::new();
        let x = t.scalar(3.0);
        let y = t.mul(x, x);
        let g = t.backward_scalar(y).unwrap();
        assert_eq!(g.wrt(x).item(), 6.0);
    }

    #[test]
    fn sum_of_softmax_has_zero_gradient() {
        let mut t = Tape::new();
        let x = t.vector(vec![0.3, -1.2, 2.5, 0.0]);
        let s = t.softmax(x);
        let y = t.sum(s);
        let g = t.backward_scalar(y).unwrap();
        for v in g.wrt(x).data() {
            assert!(v.abs() < 1e-15, "{}", v);
        }
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let mut t = Tape::new();
        let x = t.vector(vec![1.0, 2.0]);
        let unused = t.vector(vec![5.0, 6.0, 7.0]);
        let y = t.sum(x);
        let g = t.backward_scalar(y).unwrap();
        assert!(g.get(unused).is_none());
        assert_eq!(g.wrt(unused).data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn seed_shape_is_checked() {
        let mut t = Tape::new();
        let x = t.vector(vec![1.0, 2.0]);
        let y = t.relu(x);
        let err = t.backward(y, &Tensor::vector(vec![1.0])).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn empty_tape_backward_is_rejected() {
        let t = Tape::new();
        let mut other = Tape::new();
        let v = other.scalar(1.0);
        assert!(t.backward(v, &Tensor::scalar(1.0)).is_err());
    }

    #[test]
    fn broadcasting_reduces_gradients() {
        // y = sum(A * r) where r is a row broadcast over A
        let mut t = Tape::new();
        let a = t.leaf(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let r = t.leaf(Tensor::matrix(1, 3, vec![1.0, 10.0, 100.0]).unwrap());
        let c = t.leaf(Tensor::matrix(2, 1, vec![2.0, 3.0]).unwrap());
        let p = t.mul(a, r);
        let q = t.div(p, c);
        let y = t.sum(q);
        let g = t.backward_scalar(y).unwrap();
        let expected = [1.0 / 2.0 + 4.0 / 3.0, 2.0 / 2.0 + 5.0 / 3.0, 3.0 / 2.0 + 6.0 / 3.0];
        for (got, want) in g.wrt(r).data().iter().zip(expected) {
            assert!(close(*got, want, 1e-15));
        }
        let gc = g.wrt(c);
        assert!(close(gc.data()[0], -(1.0 + 20.0 + 300.0) / 4.0, 1e-15));
        assert!(close(gc.data()[1], -(4.0 + 50.0 + 600.0) / 9.0, 1e-15));
    }

    #[test]
    fn nonfinite_values_are_tracked() {
        let mut t = Tape::new();
        let x = t.vector(vec![0.0, 1.0]);
        assert_eq!(t.first_nonfinite(), None);
        let l = t.ln(x);
        assert_eq!(t.first_nonfinite(), Some(l.id()));
        let y = t.sum(l);
        assert!(matches!(t.backward_scalar(y), Err(Error::NonFinite(_))));
    }
}
