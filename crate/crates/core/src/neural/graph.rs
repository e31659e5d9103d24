//! Tape-based reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so a reverse sweep over the tape
//! visits every node after all of its consumers. Each node keeps its value
//! and whatever the backward rule needs (pool argmax, batch-norm statistics,
//! dropout mask).

use rand::Rng as _;

use super::gemm::gemm;
use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::util::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(&self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output keeps the input size; odd excess goes to the bottom/right.
    Same,
    Valid,
}

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    batch: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    groups: usize,
    pad_t: usize,
    pad_l: usize,
    ho: usize,
    wo: usize,
}

impl ConvGeom {
    fn cin_g(&self) -> usize {
        self.cin / self.groups
    }

    fn cout_g(&self) -> usize {
        self.cout / self.groups
    }

    fn k(&self) -> usize {
        self.cin_g() * self.kh * self.kw
    }

    fn p(&self) -> usize {
        self.ho * self.wo
    }

    fn im2col(&self, x: &[f64], b: usize, g: usize, cols: &mut [f64]) {
        let (p, hw) = (self.p(), self.h * self.w);
        for ci in 0..self.cin_g() {
            let plane = &x[(b * self.cin + g * self.cin_g() + ci) * hw..][..hw];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = &mut cols[((ci * self.kh + ki) * self.kw + kj) * p..][..p];
                    for oy in 0..self.ho {
                        let iy = (oy + ki) as isize - self.pad_t as isize;
                        let dst = &mut row[oy * self.wo..(oy + 1) * self.wo];
                        if iy < 0 || iy >= self.h as isize {
                            dst.iter_mut().for_each(|v| *v = 0.0);
                            continue;
                        }
                        let src = &plane[iy as usize * self.w..][..self.w];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox + kj) as isize - self.pad_l as isize;
                            *d = if ix < 0 || ix >= self.w as isize { 0.0 } else { src[ix as usize] };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, cols: &[f64], b: usize, g: usize, dx: &mut [f64]) {
        let (p, hw) = (self.p(), self.h * self.w);
        for ci in 0..self.cin_g() {
            let plane = &mut dx[(b * self.cin + g * self.cin_g() + ci) * hw..][..hw];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = &cols[((ci * self.kh + ki) * self.kw + kj) * p..][..p];
                    for oy in 0..self.ho {
                        let iy = (oy + ki) as isize - self.pad_t as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        for ox in 0..self.wo {
                            let ix = (ox + kj) as isize - self.pad_l as isize;
                            if ix >= 0 && ix < self.w as isize {
                                plane[iy as usize * self.w + ix as usize] += row[oy * self.wo + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(usize),
    Dense { x: Var, w: Var, b: Option<Var> },
    Conv2d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    MaxPool2d { x: Var, argmax: Vec<usize> },
    AvgPool2d { x: Var, kh: usize, kw: usize },
    BatchNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64>, train: bool },
    Dropout { x: Var, mask: Vec<f64> },
    Reshape { x: Var },
    Relu { x: Var },
    Sigmoid { x: Var },
    Concat { a: Var, b: Var },
    SelectRows { x: Var, idx: Vec<usize> },
    L2Distance { a: Var, b: Var },
    SoftmaxXent { logits: Var, labels: Vec<usize>, probs: Vec<f64> },
    Contrastive { d: Var, y: Vec<f64>, margin: f64 },
    WeightedSum { x: Var, weights: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

/// Batch statistics observed by a training-mode batch-norm, to be folded into
/// the running estimates by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct BnObservation {
    pub running_mean: usize,
    pub running_var: usize,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

pub const BN_EPS: f64 = 1e-5;
/// Distance offset that keeps the norm differentiable at zero.
pub const L2_EPS: f64 = 1e-12;

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    pub bn_observations: Vec<BnObservation>,
}

fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, needs_grad: bool) -> Var {
        debug_assert_eq!(value.len(), shape.iter().product::<usize>());
        self.nodes.push(Node {
            shape,
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    /// Gradient of the last `backward` target with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Constant input; no gradient is propagated into it.
    pub fn input(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Result<Var> {
        self.leaf(shape, data, false)
    }

    /// Input whose gradient is wanted (used by gradient checks).
    pub fn input_with_grad(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Result<Var> {
        self.leaf(shape, data, true)
    }

    fn leaf(&mut self, shape: Vec<usize>, data: Vec<f64>, grad: bool) -> Result<Var> {
        if data.len() != shape.iter().product::<usize>() {
            return Err(shape_err("input", &shape, &[data.len()]));
        }
        Ok(self.push(shape, data, Op::Leaf, grad))
    }

    pub fn param(&mut self, store: &ParamStore, id: usize) -> Var {
        let p = store.get(id);
        let grad = p.trainable && !p.frozen;
        self.push(p.shape.clone(), p.data.clone(), Op::Param(id), grad)
    }

    /// Accumulated gradient for every parameter node, keyed by store index.
    pub fn param_grads(&self) -> Vec<(usize, Vec<f64>)> {
        let mut out: Vec<(usize, Vec<f64>)> = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if let (Op::Param(id), Some(Some(g))) = (&n.op, self.grads.get(i)) {
                match out.iter_mut().find(|(k, _)| k == id) {
                    Some((_, acc)) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
                    None => out.push((*id, g.clone())),
                }
            }
        }
        out
    }

    /// `x (B, in) . w (in, out) + b (out)`.
    pub fn dense(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xs, ws) = (self.shape(x), self.shape(w));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] {
            return Err(shape_err("dense", xs, ws));
        }
        let (batch, inp, out) = (xs[0], xs[1], ws[1]);
        let mut y = vec![0.0; batch * out];
        if let Some(b) = b {
            if self.shape(b) != [out] {
                return Err(shape_err("dense bias", &[out], self.shape(b)));
            }
            for row in y.chunks_mut(out) {
                row.copy_from_slice(self.value(b));
            }
        }
        gemm(batch, inp, out, self.value(x), false, self.value(w), false, &mut y, 1.0);
        let g = self.needs(x) || self.needs(w) || b.is_some_and(|b| self.needs(b));
        Ok(self.push(vec![batch, out], y, Op::Dense { x, w, b }, g))
    }

    /// Stride-1 grouped convolution on `(B, C, H, W)`; weights are
    /// `(Cout, Cin / groups, kh, kw)`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, groups: usize, padding: Padding) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 4 || ws.len() != 4 || groups == 0 || xs[1] % groups != 0 || ws[0] % groups != 0 || ws[1] * groups != xs[1] {
            return Err(shape_err("conv2d", &xs, &ws));
        }
        let (kh, kw) = (ws[2], ws[3]);
        let (pad_t, pad_l, ho, wo) = match padding {
            Padding::Same => ((kh - 1) / 2, (kw - 1) / 2, xs[2], xs[3]),
            Padding::Valid => {
                if kh > xs[2] || kw > xs[3] {
                    return Err(shape_err("conv2d valid", &xs, &ws));
                }
                (0, 0, xs[2] - kh + 1, xs[3] - kw + 1)
            }
        };
        let geom = ConvGeom {
            batch: xs[0],
            cin: xs[1],
            h: xs[2],
            w: xs[3],
            cout: ws[0],
            kh,
            kw,
            groups,
            pad_t,
            pad_l,
            ho,
            wo,
        };
        if let Some(b) = b {
            if self.shape(b) != [geom.cout] {
                return Err(shape_err("conv2d bias", &[geom.cout], self.shape(b)));
            }
        }
        let (k, p, cout_g) = (geom.k(), geom.p(), geom.cout_g());
        let mut y = vec![0.0; geom.batch * geom.cout * p];
        let mut cols = vec![0.0; k * p];
        let xv = &self.nodes[x.0].value;
        let wv = &self.nodes[w.0].value;
        for bi in 0..geom.batch {
            for g in 0..groups {
                geom.im2col(xv, bi, g, &mut cols);
                let out = &mut y[(bi * geom.cout + g * cout_g) * p..][..cout_g * p];
                gemm(cout_g, k, p, &wv[g * cout_g * k..], false, &cols, false, out, 0.0);
            }
        }
        if let Some(b) = b {
            let bv = self.value(b);
            for (i, plane) in y.chunks_mut(p).enumerate() {
                let c = bv[i % geom.cout];
                plane.iter_mut().for_each(|v| *v += c);
            }
        }
        let g = self.needs(x) || self.needs(w) || b.is_some_and(|b| self.needs(b));
        Ok(self.push(vec![geom.batch, geom.cout, ho, wo], y, Op::Conv2d { x, w, b, geom }, g))
    }

    /// Convolution over `(B, C, L)` with weights `(Cout, Cin, k)`, run as a
    /// height-1 2-D convolution.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Option<Var>, padding: Padding) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 3 || ws.len() != 3 {
            return Err(shape_err("conv1d", &xs, &ws));
        }
        let x4 = self.reshape(x, vec![xs[0], xs[1], 1, xs[2]])?;
        let w4 = self.reshape(w, vec![ws[0], ws[1], 1, ws[2]])?;
        let y = self.conv2d(x4, w4, b, 1, padding)?;
        let s = self.shape(y).to_vec();
        self.reshape(y, vec![s[0], s[1], s[3]])
    }

    pub fn maxpool1d(&mut self, x: Var, k: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 {
            return Err(shape_err("maxpool1d", &s, &[k]));
        }
        let x4 = self.reshape(x, vec![s[0], s[1], 1, s[2]])?;
        let y = self.maxpool2d(x4, 1, k)?;
        let o = self.shape(y).to_vec();
        self.reshape(y, vec![o[0], o[1], o[3]])
    }

    fn pool_dims(&self, x: Var, kh: usize, kw: usize, op: &'static str) -> Result<[usize; 6]> {
        let s = self.shape(x);
        if s.len() != 4 || kh == 0 || kw == 0 || s[2] / kh == 0 || s[3] / kw == 0 {
            return Err(shape_err(op, s, &[kh, kw]));
        }
        Ok([s[0], s[1], s[2], s[3], s[2] / kh, s[3] / kw])
    }

    /// Non-overlapping max pooling with floor division of the spatial size.
    pub fn maxpool2d(&mut self, x: Var, kh: usize, kw: usize) -> Result<Var> {
        let [b, c, h, w, ho, wo] = self.pool_dims(x, kh, kw, "maxpool2d")?;
        let xv = self.value(x);
        let mut y = Vec::with_capacity(b * c * ho * wo);
        let mut argmax = Vec::with_capacity(y.capacity());
        for plane in 0..b * c {
            let base = plane * h * w;
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best = base + oy * kh * w + ox * kw;
                    for i in 0..kh {
                        for j in 0..kw {
                            let idx = base + (oy * kh + i) * w + ox * kw + j;
                            if xv[idx] > xv[best] {
                                best = idx;
                            }
                        }
                    }
                    y.push(xv[best]);
                    argmax.push(best);
                }
            }
        }
        let g = self.needs(x);
        Ok(self.push(vec![b, c, ho, wo], y, Op::MaxPool2d { x, argmax }, g))
    }

    pub fn avgpool2d(&mut self, x: Var, kh: usize, kw: usize) -> Result<Var> {
        let [b, c, h, w, ho, wo] = self.pool_dims(x, kh, kw, "avgpool2d")?;
        let xv = self.value(x);
        let scale = 1.0 / (kh * kw) as f64;
        let mut y = Vec::with_capacity(b * c * ho * wo);
        for plane in 0..b * c {
            let base = plane * h * w;
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut s = 0.0;
                    for i in 0..kh {
                        for j in 0..kw {
                            s += xv[base + (oy * kh + i) * w + ox * kw + j];
                        }
                    }
                    y.push(s * scale);
                }
            }
        }
        let g = self.needs(x);
        Ok(self.push(vec![b, c, ho, wo], y, Op::AvgPool2d { x, kh, kw }, g))
    }

    /// Normalizes over every axis except 1. In training mode batch statistics
    /// are used and recorded in `bn_observations`; otherwise the running
    /// estimates passed in are used.
    #[allow(clippy::too_many_arguments)]
    pub fn batchnorm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running: (usize, usize),
        store: &ParamStore,
        train: bool,
    ) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() < 2 || self.shape(gamma) != [s[1]] || self.shape(beta) != [s[1]] {
            return Err(shape_err("batchnorm", &s, self.shape(gamma)));
        }
        let (b, c) = (s[0], s[1]);
        let inner: usize = s[2..].iter().product();
        let n = (b * inner) as f64;
        let xv = self.value(x);
        let (mean, var) = if train {
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for (i, v) in xv.iter().enumerate() {
                mean[(i / inner) % c] += v;
            }
            mean.iter_mut().for_each(|m| *m /= n);
            for (i, v) in xv.iter().enumerate() {
                let ch = (i / inner) % c;
                var[ch] += (v - mean[ch]) * (v - mean[ch]);
            }
            var.iter_mut().for_each(|m| *m /= n);
            (mean, var)
        } else {
            (store.get(running.0).data.clone(), store.get(running.1).data.clone())
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let (gv, bv) = (self.value(gamma), self.value(beta));
        let mut xhat = Vec::with_capacity(xv.len());
        let mut y = Vec::with_capacity(xv.len());
        for (i, v) in xv.iter().enumerate() {
            let ch = (i / inner) % c;
            let h = (v - mean[ch]) * inv_std[ch];
            xhat.push(h);
            y.push(gv[ch] * h + bv[ch]);
        }
        if train {
            self.bn_observations.push(BnObservation {
                running_mean: running.0,
                running_var: running.1,
                mean,
                var,
            });
        }
        let g = self.needs(x) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(
            s,
            y,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train,
            },
            g,
        ))
    }

    /// Inverted dropout: kept units are scaled by `1 / (1 - p)`.
    pub fn dropout(&mut self, x: Var, p: f64, seed: u64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("dropout rate {p}")));
        }
        let mut r = rng(seed);
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..self.value(x).len())
            .map(|_| if r.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let y = self.value(x).iter().zip(&mask).map(|(v, m)| v * m).collect();
        let (s, g) = (self.shape(x).to_vec(), self.needs(x));
        Ok(self.push(s, y, Op::Dropout { x, mask }, g))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        if shape.iter().product::<usize>() != self.value(x).len() {
            return Err(shape_err("reshape", self.shape(x), &shape));
        }
        let (v, g) = (self.value(x).to_vec(), self.needs(x));
        Ok(self.push(shape, v, Op::Reshape { x }, g))
    }

    /// `(B, ...) -> (B, prod(...))`.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x);
        let b = s[0];
        let rest = s[1..].iter().product();
        self.reshape(x, vec![b, rest])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = self.value(x).iter().map(|v| v.max(0.0)).collect();
        let (s, g) = (self.shape(x).to_vec(), self.needs(x));
        self.push(s, y, Op::Relu { x }, g)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let y = self.value(x).iter().map(|&v| sigmoid(v)).collect();
        let (s, g) = (self.shape(x).to_vec(), self.needs(x));
        self.push(s, y, Op::Sigmoid { x }, g)
    }

    /// Joins two `(B, n)` matrices along the feature axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[0] != sb[0] {
            return Err(shape_err("concat", sa, sb));
        }
        let (rows, na, nb) = (sa[0], sa[1], sb[1]);
        let mut y = Vec::with_capacity(rows * (na + nb));
        for r in 0..rows {
            y.extend_from_slice(&self.value(a)[r * na..(r + 1) * na]);
            y.extend_from_slice(&self.value(b)[r * nb..(r + 1) * nb]);
        }
        let g = self.needs(a) || self.needs(b);
        Ok(self.push(vec![rows, na + nb], y, Op::Concat { a, b }, g))
    }

    /// Gathers rows of a `(B, n)` matrix; indices may repeat.
    pub fn select_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 2 || idx.iter().any(|&i| i >= s[0]) {
            return Err(shape_err("select_rows", s, &[idx.len()]));
        }
        let n = s[1];
        let mut y = Vec::with_capacity(idx.len() * n);
        for &i in idx {
            y.extend_from_slice(&self.value(x)[i * n..(i + 1) * n]);
        }
        let g = self.needs(x);
        Ok(self.push(vec![idx.len(), n], y, Op::SelectRows { x, idx: idx.to_vec() }, g))
    }

    /// Row-wise `sqrt(|a - b|^2 + 1e-12)`.
    pub fn l2_distance(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sa != sb {
            return Err(shape_err("l2_distance", sa, sb));
        }
        let (rows, n) = (sa[0], sa[1]);
        let (av, bv) = (self.value(a), self.value(b));
        let y = (0..rows)
            .map(|r| {
                let s: f64 = (0..n).map(|j| (av[r * n + j] - bv[r * n + j]).powi(2)).sum();
                (s + L2_EPS).sqrt()
            })
            .collect();
        let g = self.needs(a) || self.needs(b);
        Ok(self.push(vec![rows], y, Op::L2Distance { a, b }, g))
    }

    /// Mean cross-entropy of softmax(logits) against class indices.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let s = self.shape(logits);
        if s.len() != 2 || s[0] != labels.len() || labels.iter().any(|&l| l >= s[1]) {
            return Err(shape_err("softmax_cross_entropy", s, &[labels.len()]));
        }
        let k = s[1];
        let probs = softmax_rows(self.value(logits), k);
        let loss = labels
            .iter()
            .enumerate()
            .map(|(r, &l)| -(probs[r * k + l].max(f64::MIN_POSITIVE)).ln())
            .sum::<f64>()
            / labels.len() as f64;
        let g = self.needs(logits);
        Ok(self.push(
            vec![1],
            vec![loss],
            Op::SoftmaxXent {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            g,
        ))
    }

    /// Mean of `y d^2 + (1 - y) max(0, m - d)^2`; `y = 1` marks a similar pair.
    pub fn contrastive_loss(&mut self, d: Var, y: &[f64], margin: f64) -> Result<Var> {
        let s = self.shape(d);
        if s != [y.len()] || y.is_empty() {
            return Err(shape_err("contrastive_loss", s, &[y.len()]));
        }
        let dv = self.value(d);
        let loss = dv
            .iter()
            .zip(y)
            .map(|(&d, &t)| t * d * d + (1.0 - t) * (margin - d).max(0.0).powi(2))
            .sum::<f64>()
            / y.len() as f64;
        let g = self.needs(d);
        Ok(self.push(
            vec![1],
            vec![loss],
            Op::Contrastive {
                d,
                y: y.to_vec(),
                margin,
            },
            g,
        ))
    }

    /// `sum_i w_i x_i`, a scalar probe for gradient checks.
    pub fn weighted_sum(&mut self, x: Var, weights: &[f64]) -> Result<Var> {
        if weights.len() != self.value(x).len() {
            return Err(shape_err("weighted_sum", self.shape(x), &[weights.len()]));
        }
        let v = self.value(x).iter().zip(weights).map(|(a, b)| a * b).sum();
        let g = self.needs(x);
        Ok(self.push(
            vec![1],
            vec![v],
            Op::WeightedSum {
                x,
                weights: weights.to_vec(),
            },
            g,
        ))
    }

    fn accumulate(&mut self, v: Var, g: Vec<f64>) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut self.grads[v.0] {
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
            slot => *slot = Some(g),
        }
    }

    fn accumulate_with(&mut self, v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        let n = self.nodes[v.0].value.len();
        let slot = self.grads[v.0].get_or_insert_with(|| vec![0.0; n]);
        f(slot);
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(shape_err("backward target", self.shape(loss), &[1]));
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(gy) = self.grads[i].take() else { continue };
            if self.nodes[i].needs_grad {
                self.backprop_node(i, &gy);
            }
            self.grads[i] = Some(gy);
        }
        Ok(())
    }

    fn backprop_node(&mut self, i: usize, gy: &[f64]) {
        // Take the op out temporarily so its caches can be read while other
        // nodes' gradients are written.
        let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
        match &op {
            Op::Leaf | Op::Param(_) => {}
            Op::Dense { x, w, b } => {
                let (batch, inp) = (self.shape(*x)[0], self.shape(*x)[1]);
                let out = self.shape(*w)[1];
                if self.needs(*w) {
                    let mut gw = vec![0.0; inp * out];
                    gemm(inp, batch, out, self.value(*x), true, gy, false, &mut gw, 0.0);
                    self.accumulate(*w, gw);
                }
                if let Some(b) = b {
                    let mut gb = vec![0.0; out];
                    for row in gy.chunks(out) {
                        gb.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                    }
                    self.accumulate(*b, gb);
                }
                if self.needs(*x) {
                    let mut gx = vec![0.0; batch * inp];
                    gemm(batch, out, inp, gy, false, self.value(*w), true, &mut gx, 0.0);
                    self.accumulate(*x, gx);
                }
            }
            Op::Conv2d { x, w, b, geom } => {
                let (k, p, cout_g) = (geom.k(), geom.p(), geom.cout_g());
                let mut cols = vec![0.0; k * p];
                let mut dcols = vec![0.0; k * p];
                let need_w = self.needs(*w);
                let need_x = self.needs(*x);
                let mut gw = vec![0.0; if need_w { geom.cout * k } else { 0 }];
                let mut gx = vec![0.0; if need_x { self.value(*x).len() } else { 0 }];
                for bi in 0..geom.batch {
                    for g in 0..geom.groups {
                        let dy = &gy[(bi * geom.cout + g * cout_g) * p..][..cout_g * p];
                        if need_w {
                            geom.im2col(self.value(*x), bi, g, &mut cols);
                            gemm(cout_g, p, k, dy, false, &cols, true, &mut gw[g * cout_g * k..], 1.0);
                        }
                        if need_x {
                            let wv = &self.value(*w)[g * cout_g * k..];
                            gemm(k, cout_g, p, wv, true, dy, false, &mut dcols, 0.0);
                            geom.col2im(&dcols, bi, g, &mut gx);
                        }
                    }
                }
                if need_w {
                    self.accumulate(*w, gw);
                }
                if need_x {
                    self.accumulate(*x, gx);
                }
                if let Some(b) = b {
                    let mut gb = vec![0.0; geom.cout];
                    for (plane, chunk) in gy.chunks(p).enumerate() {
                        gb[plane % geom.cout] += chunk.iter().sum::<f64>();
                    }
                    self.accumulate(*b, gb);
                }
            }
            Op::MaxPool2d { x, argmax } => {
                self.accumulate_with(*x, |gx| {
                    for (g, &idx) in gy.iter().zip(argmax) {
                        gx[idx] += g;
                    }
                });
            }
            Op::AvgPool2d { x, kh, kw } => {
                let s = self.shape(*x).to_vec();
                let (h, w) = (s[2], s[3]);
                let (ho, wo) = (h / kh, w / kw);
                let scale = 1.0 / (kh * kw) as f64;
                self.accumulate_with(*x, |gx| {
                    for plane in 0..s[0] * s[1] {
                        for oy in 0..ho {
                            for ox in 0..wo {
                                let g = gy[(plane * ho + oy) * wo + ox] * scale;
                                for a in 0..*kh {
                                    for c in 0..*kw {
                                        gx[plane * h * w + (oy * kh + a) * w + ox * kw + c] += g;
                                    }
                                }
                            }
                        }
                    }
                });
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train,
            } => {
                let s = self.shape(*x).to_vec();
                let c = s[1];
                let inner: usize = s[2..].iter().product();
                let n = (s[0] * inner) as f64;
                let mut sum_dy = vec![0.0; c];
                let mut sum_dy_xhat = vec![0.0; c];
                for (idx, g) in gy.iter().enumerate() {
                    let ch = (idx / inner) % c;
                    sum_dy[ch] += g;
                    sum_dy_xhat[ch] += g * xhat[idx];
                }
                self.accumulate(*gamma, sum_dy_xhat.clone());
                self.accumulate(*beta, sum_dy.clone());
                if self.needs(*x) {
                    let gv = self.value(*gamma).to_vec();
                    let gx = gy
                        .iter()
                        .enumerate()
                        .map(|(idx, g)| {
                            let ch = (idx / inner) % c;
                            if *train {
                                gv[ch] * inv_std[ch] / n
                                    * (n * g - sum_dy[ch] - xhat[idx] * sum_dy_xhat[ch])
                            } else {
                                gv[ch] * inv_std[ch] * g
                            }
                        })
                        .collect();
                    self.accumulate(*x, gx);
                }
            }
            Op::Dropout { x, mask } => {
                self.accumulate(*x, gy.iter().zip(mask).map(|(g, m)| g * m).collect());
            }
            Op::Reshape { x } => self.accumulate(*x, gy.to_vec()),
            Op::Relu { x } => {
                let gx = gy
                    .iter()
                    .zip(self.value(*x))
                    .map(|(g, v)| if *v > 0.0 { *g } else { 0.0 })
                    .collect();
                self.accumulate(*x, gx);
            }
            Op::Sigmoid { x } => {
                let gx = gy
                    .iter()
                    .zip(&self.nodes[i].value)
                    .map(|(g, s)| g * s * (1.0 - s))
                    .collect();
                self.accumulate(*x, gx);
            }
            Op::Concat { a, b } => {
                let (na, nb) = (self.shape(*a)[1], self.shape(*b)[1]);
                let rows = self.shape(*a)[0];
                let mut ga = Vec::with_capacity(rows * na);
                let mut gb = Vec::with_capacity(rows * nb);
                for r in 0..rows {
                    let row = &gy[r * (na + nb)..(r + 1) * (na + nb)];
                    ga.extend_from_slice(&row[..na]);
                    gb.extend_from_slice(&row[na..]);
                }
                self.accumulate(*a, ga);
                self.accumulate(*b, gb);
            }
            Op::SelectRows { x, idx } => {
                let n = self.shape(*x)[1];
                self.accumulate_with(*x, |gx| {
                    for (r, &src) in idx.iter().enumerate() {
                        for j in 0..n {
                            gx[src * n + j] += gy[r * n + j];
                        }
                    }
                });
            }
            Op::L2Distance { a, b } => {
                let n = self.shape(*a)[1];
                let d = self.nodes[i].value.clone();
                let diff: Vec<f64> = self
                    .value(*a)
                    .iter()
                    .zip(self.value(*b))
                    .enumerate()
                    .map(|(idx, (x, y))| (x - y) * gy[idx / n] / d[idx / n])
                    .collect();
                self.accumulate(*b, diff.iter().map(|v| -v).collect());
                self.accumulate(*a, diff);
            }
            Op::SoftmaxXent { logits, labels, probs } => {
                let k = self.shape(*logits)[1];
                let scale = gy[0] / labels.len() as f64;
                let mut gx = probs.clone();
                for (r, &l) in labels.iter().enumerate() {
                    gx[r * k + l] -= 1.0;
                }
                gx.iter_mut().for_each(|v| *v *= scale);
                self.accumulate(*logits, gx);
            }
            Op::Contrastive { d, y, margin } => {
                let scale = gy[0] / y.len() as f64;
                let gx = self
                    .value(*d)
                    .iter()
                    .zip(y)
                    .map(|(&d, &t)| scale * (2.0 * t * d - 2.0 * (1.0 - t) * (margin - d).max(0.0)))
                    .collect();
                self.accumulate(*d, gx);
            }
            Op::WeightedSum { x, weights } => {
                self.accumulate(*x, weights.iter().map(|w| w * gy[0]).collect());
            }
        }
        self.nodes[i].op = op;
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable row-wise softmax of a `(rows, k)` matrix.
pub fn softmax_rows(x: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks(k) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        out.extend(e.iter().map(|v| v / s));
    }
    out
}
