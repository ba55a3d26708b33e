//! Wengert tape for reverse-mode differentiation.
//!
//! A tape is built per forward pass and discarded after backward; every
//! operation records its inputs by node id, and the backward pass replays the
//! node list in reverse exactly once, accumulating adjoints. Parameters enter
//! through [`Tape::param`] leaves and their gradients are harvested into a
//! [`ParamGrads`] keyed by [`ParamId`].

use crate::array::{Array, Precision};
use crate::error::{Error, Result};
use crate::kernels;
use crate::params::{ParamGrads, ParamId, ParamStore};

pub type NodeId = usize;

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    AddScalar(NodeId),
    MulScalar(NodeId, f64),
    Sigmoid(NodeId),
    Gelu(NodeId),
    Conv2dSame { input: NodeId, kernel: NodeId },
    Conv2dDepthwise { input: NodeId, kernel: NodeId },
    MatMul { a: NodeId, b: NodeId },
    LayerNormChannels { input: NodeId, gain: NodeId, bias: NodeId, means: Vec<f64>, inv_stds: Vec<f64> },
    GlobalAvgPool(NodeId),
    AvgPool2(NodeId),
    UpsampleNearest2(NodeId),
    ConcatChannels(Vec<NodeId>),
    NarrowChannels { input: NodeId, start: usize },
    CropSpatial { input: NodeId, top: usize, left: usize },
    ScaleChannels { input: NodeId, scale: NodeId },
    AddBias { input: NodeId, bias: NodeId },
    Sum(NodeId),
    Mean(NodeId),
    Reshape(NodeId),
}

struct Node {
    value: Array,
    op: Op,
}

/// Dynamically built computation record; not shared across threads.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Array {
        &self.nodes[id].value
    }

    fn push(&mut self, value: Array, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    /// Constant input; receives no gradient.
    pub fn leaf(&mut self, value: Array) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// Parameter leaf; the current value is copied onto the tape.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).zip_map(self.value(b), "div", |x, y| x / y)?;
        Ok(self.push(v, Op::Div(a, b)))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Op::AddScalar(a))
    }

    pub fn mul_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).map(|x| x * c);
        self.push(v, Op::MulScalar(a, c))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(kernels::sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(kernels::gelu);
        self.push(v, Op::Gelu(a))
    }

    pub fn conv2d_same(&mut self, input: NodeId, kernel: NodeId) -> Result<NodeId> {
        let v = kernels::conv2d_same(self.value(input), self.value(kernel))?;
        Ok(self.push(v, Op::Conv2dSame { input, kernel }))
    }

    pub fn conv2d_depthwise(&mut self, input: NodeId, kernel: NodeId) -> Result<NodeId> {
        let v = kernels::conv2d_depthwise(self.value(input), self.value(kernel))?;
        Ok(self.push(v, Op::Conv2dDepthwise { input, kernel }))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = kernels::matmul(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::MatMul { a, b }))
    }

    pub fn layer_norm_channels(&mut self, input: NodeId, gain: NodeId, bias: NodeId, eps: f64) -> Result<NodeId> {
        let (v, means, inv_stds) =
            kernels::layer_norm_channels(self.value(input), self.value(gain), self.value(bias), eps)?;
        Ok(self.push(v, Op::LayerNormChannels { input, gain, bias, means, inv_stds }))
    }

    pub fn global_avg_pool(&mut self, input: NodeId) -> Result<NodeId> {
        let v = kernels::global_avg_pool(self.value(input))?;
        Ok(self.push(v, Op::GlobalAvgPool(input)))
    }

    pub fn avg_pool2(&mut self, input: NodeId) -> Result<NodeId> {
        let v = kernels::avg_pool2(self.value(input))?;
        Ok(self.push(v, Op::AvgPool2(input)))
    }

    pub fn upsample_nearest2(&mut self, input: NodeId) -> Result<NodeId> {
        let v = kernels::upsample_nearest2(self.value(input))?;
        Ok(self.push(v, Op::UpsampleNearest2(input)))
    }

    pub fn concat_channels(&mut self, inputs: &[NodeId]) -> Result<NodeId> {
        let arrays: Vec<&Array> = inputs.iter().map(|&i| self.value(i)).collect();
        let v = kernels::concat_channels(&arrays)?;
        Ok(self.push(v, Op::ConcatChannels(inputs.to_vec())))
    }

    pub fn narrow_channels(&mut self, input: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let v = kernels::narrow_channels(self.value(input), start, len)?;
        Ok(self.push(v, Op::NarrowChannels { input, start }))
    }

    pub fn crop_spatial(&mut self, input: NodeId, top: usize, left: usize, height: usize, width: usize) -> Result<NodeId> {
        let v = kernels::crop_spatial(self.value(input), top, left, height, width)?;
        Ok(self.push(v, Op::CropSpatial { input, top, left }))
    }

    pub fn scale_channels(&mut self, input: NodeId, scale: NodeId) -> Result<NodeId> {
        let v = kernels::scale_channels(self.value(input), self.value(scale))?;
        Ok(self.push(v, Op::ScaleChannels { input, scale }))
    }

    pub fn add_bias(&mut self, input: NodeId, bias: NodeId) -> Result<NodeId> {
        let v = kernels::add_bias_channels(self.value(input), self.value(bias))?;
        Ok(self.push(v, Op::AddBias { input, bias }))
    }

    pub fn sum(&mut self, input: NodeId) -> NodeId {
        let v = Array::scalar(self.value(input).sum());
        self.push(v, Op::Sum(input))
    }

    pub fn mean(&mut self, input: NodeId) -> NodeId {
        let a = self.value(input);
        let v = Array::scalar(a.sum() / a.numel() as f64);
        self.push(v, Op::Mean(input))
    }

    pub fn reshape(&mut self, input: NodeId, shape: &[usize]) -> Result<NodeId> {
        let a = self.value(input);
        if shape.iter().product::<usize>() != a.numel() {
            return Err(Error::shape(
                "reshape",
                format!("{} elements", a.numel()),
                format!("{shape:?}"),
            ));
        }
        let v = Array::from_vec_prec(shape, a.data().to_vec(), a.precision())?;
        Ok(self.push(v, Op::Reshape(input)))
    }

    /// Reverse sweep from a scalar loss; returns gradients for every
    /// parameter reached. Unreached parameters are simply absent.
    pub fn backward(&self, loss: NodeId) -> Result<ParamGrads> {
        let loss_value = self.value(loss);
        if loss_value.numel() != 1 {
            return Err(Error::shape("backward loss", "scalar", format!("{:?}", loss_value.shape())));
        }
        if !loss_value.is_finite() {
            return Err(Error::NonFinite("backward called on non-finite loss".into()));
        }

        let mut grads: Vec<Option<Array>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss] = Some(Array::scalar(1.0));

        let mut param_grads = ParamGrads::new();
        for id in (0..self.nodes.len()).rev() {
            let delta = match grads[id].take() {
                Some(d) => d,
                None => continue,
            };
            match &self.nodes[id].op {
                Op::Leaf => {}
                Op::Param(pid) => param_grads.add(*pid, delta),
                Op::Add(a, b) => {
                    accum(&mut grads, *a, &delta, self.shape_of(*a));
                    accum(&mut grads, *b, &delta, self.shape_of(*b));
                }
                Op::Sub(a, b) => {
                    accum(&mut grads, *a, &delta, self.shape_of(*a));
                    let neg = delta.map(|v| -v);
                    accum(&mut grads, *b, &neg, self.shape_of(*b));
                }
                Op::Mul(a, b) => {
                    let da = delta.zip_map(self.value(*b), "mul bwd", |d, v| d * v)?;
                    let db = delta.zip_map(self.value(*a), "mul bwd", |d, v| d * v)?;
                    accum(&mut grads, *a, &da, self.shape_of(*a));
                    accum(&mut grads, *b, &db, self.shape_of(*b));
                }
                Op::Div(a, b) => {
                    let vb = self.value(*b);
                    let da = delta.zip_map(vb, "div bwd", |d, v| d / v)?;
                    let mut db = delta.zip_map(self.value(*a), "div bwd", |d, v| d * v)?;
                    db = db.zip_map(vb, "div bwd", |x, v| -x / (v * v))?;
                    accum(&mut grads, *a, &da, self.shape_of(*a));
                    accum(&mut grads, *b, &db, self.shape_of(*b));
                }
                Op::AddScalar(a) => accum(&mut grads, *a, &delta, self.shape_of(*a)),
                Op::MulScalar(a, c) => {
                    let da = delta.map(|v| v * c);
                    accum(&mut grads, *a, &da, self.shape_of(*a));
                }
                Op::Sigmoid(a) => {
                    // uses the stored output: s' = s (1 - s)
                    let da = delta.zip_map(&self.nodes[id].value, "sigmoid bwd", |d, s| d * s * (1.0 - s))?;
                    accum(&mut grads, *a, &da, self.shape_of(*a));
                }
                Op::Gelu(a) => {
                    let da = delta.zip_map(self.value(*a), "gelu bwd", |d, x| d * kernels::gelu_grad(x))?;
                    accum(&mut grads, *a, &da, self.shape_of(*a));
                }
                Op::Conv2dSame { input, kernel } => {
                    let vi = self.value(*input);
                    let vk = self.value(*kernel);
                    let d_in = kernels::conv2d_same_grad_input(vk, &delta, vi.dim(0), vi.dim(1), vi.dim(2));
                    let d_k = kernels::conv2d_same_grad_kernel(vi, &delta, vk.dim(2), vk.dim(3));
                    accum(&mut grads, *input, &d_in, self.shape_of(*input));
                    accum(&mut grads, *kernel, &d_k, self.shape_of(*kernel));
                }
                Op::Conv2dDepthwise { input, kernel } => {
                    let vi = self.value(*input);
                    let vk = self.value(*kernel);
                    let d_in = kernels::conv2d_depthwise_grad_input(vk, &delta);
                    let d_k = kernels::conv2d_depthwise_grad_kernel(vi, &delta, vk.dim(2), vk.dim(3));
                    accum(&mut grads, *input, &d_in, self.shape_of(*input));
                    accum(&mut grads, *kernel, &d_k, self.shape_of(*kernel));
                }
                Op::MatMul { a, b } => {
                    let da = kernels::matmul(&delta, &kernels::transpose2(self.value(*b)))?;
                    let db = kernels::matmul(&kernels::transpose2(self.value(*a)), &delta)?;
                    accum(&mut grads, *a, &da, self.shape_of(*a));
                    accum(&mut grads, *b, &db, self.shape_of(*b));
                }
                Op::LayerNormChannels { input, gain, bias, means, inv_stds } => {
                    let (d_in, d_gain, d_bias) =
                        kernels::layer_norm_channels_grad(self.value(*input), self.value(*gain), &delta, means, inv_stds);
                    accum(&mut grads, *input, &d_in, self.shape_of(*input));
                    accum(&mut grads, *gain, &d_gain, self.shape_of(*gain));
                    accum(&mut grads, *bias, &d_bias, self.shape_of(*bias));
                }
                Op::GlobalAvgPool(a) => {
                    let s = self.shape_of(*a);
                    let da = kernels::global_avg_pool_grad(&delta, s[1], s[2]);
                    accum(&mut grads, *a, &da, s);
                }
                Op::AvgPool2(a) => {
                    let da = kernels::avg_pool2_grad(&delta);
                    accum(&mut grads, *a, &da, self.shape_of(*a));
                }
                Op::UpsampleNearest2(a) => {
                    let da = kernels::upsample_nearest2_grad(&delta);
                    accum(&mut grads, *a, &da, self.shape_of(*a));
                }
                Op::ConcatChannels(inputs) => {
                    let mut start = 0;
                    for &inp in inputs {
                        let c = self.shape_of(inp)[0];
                        let piece = kernels::narrow_channels(&delta, start, c)?;
                        accum(&mut grads, inp, &piece, self.shape_of(inp));
                        start += c;
                    }
                }
                Op::NarrowChannels { input, start } => {
                    let shape = self.shape_of(*input);
                    let plane = shape[1] * shape[2];
                    let mut da = Array::zeros(shape);
                    let off = start * plane;
                    da.data_mut()[off..off + delta.numel()].copy_from_slice(delta.data());
                    accum(&mut grads, *input, &da, shape);
                }
                Op::CropSpatial { input, top, left } => {
                    let shape = self.shape_of(*input);
                    let (c, h, w) = (shape[0], shape[1], shape[2]);
                    let (dh, dw) = (delta.dim(1), delta.dim(2));
                    let mut da = Array::zeros(shape);
                    for ci in 0..c {
                        for y in 0..dh {
                            let src = (ci * dh + y) * dw;
                            let dst = (ci * h + top + y) * w + left;
                            da.data_mut()[dst..dst + dw].copy_from_slice(&delta.data()[src..src + dw]);
                        }
                    }
                    accum(&mut grads, *input, &da, shape);
                }
                Op::ScaleChannels { input, scale } => {
                    let d_in = kernels::scale_channels(&delta, self.value(*scale))?;
                    let vi = self.value(*input);
                    let (c, h, w) = (vi.dim(0), vi.dim(1), vi.dim(2));
                    let plane = h * w;
                    let mut d_scale = vec![0.0; c];
                    for ci in 0..c {
                        let mut acc = 0.0;
                        for p in 0..plane {
                            acc += delta.data()[ci * plane + p] * vi.data()[ci * plane + p];
                        }
                        d_scale[ci] = acc;
                    }
                    accum(&mut grads, *input, &d_in, self.shape_of(*input));
                    let d_scale = Array::from_vec(&[c, 1, 1], d_scale)?;
                    accum(&mut grads, *scale, &d_scale, self.shape_of(*scale));
                }
                Op::AddBias { input, bias } => {
                    accum(&mut grads, *input, &delta, self.shape_of(*input));
                    let c = self.shape_of(*bias)[0];
                    let plane = delta.dim(1) * delta.dim(2);
                    let mut d_bias = vec![0.0; c];
                    for ci in 0..c {
                        d_bias[ci] = delta.data()[ci * plane..(ci + 1) * plane].iter().sum();
                    }
                    let d_bias = Array::from_vec(&[c], d_bias)?;
                    accum(&mut grads, *bias, &d_bias, self.shape_of(*bias));
                }
                Op::Sum(a) => {
                    let g = delta.data()[0];
                    let da = Array::filled(self.shape_of(*a), g);
                    accum(&mut grads, *a, &da, self.shape_of(*a));
                }
                Op::Mean(a) => {
                    let n = self.value(*a).numel() as f64;
                    let da = Array::filled(self.shape_of(*a), delta.data()[0] / n);
                    accum(&mut grads, *a, &da, self.shape_of(*a));
                }
                Op::Reshape(a) => {
                    let da = Array::from_vec(self.shape_of(*a), delta.data().to_vec())?;
                    accum(&mut grads, *a, &da, self.shape_of(*a));
                }
            }
        }
        Ok(param_grads)
    }

    fn shape_of(&self, id: NodeId) -> &[usize] {
        self.nodes[id].value.shape()
    }
}

fn accum(grads: &mut [Option<Array>], id: NodeId, delta: &Array, shape: &[usize]) {
    debug_assert_eq!(delta.shape(), shape, "adjoint shape mismatch");
    match &mut grads[id] {
        Some(existing) => {
            for (d, s) in existing.data_mut().iter_mut().zip(delta.data()) {
                *d += s;
            }
        }
        None => {
            // adjoints always accumulate in double precision
            let mut g = delta.clone();
            if g.precision() != Precision::Double {
                g = g.with_precision(Precision::Double);
            }
            grads[id] = Some(g);
        }
    }
}
