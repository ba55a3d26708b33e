//! Finite-difference validation of every tape primitive's backward rule,
//! each on at least three distinct shapes.

mod common;

use common::{rand_array, rng};
use ndauto::{gradient_check, Array, NodeId, ParamStore, Result, Tape};

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

/// Checks d loss / d p for `loss = build(tape, param_node)` at `point`.
fn check(point: &Array, build: impl Fn(&mut Tape, NodeId) -> Result<NodeId>) -> f64 {
    let eval = |x: &Array| -> Result<f64> {
        let mut store = ParamStore::new();
        let pid = store.register("p", x.clone())?;
        let mut tape = Tape::new();
        let p = tape.param(&store, pid);
        let loss = build(&mut tape, p)?;
        tape.value(loss).as_scalar()
    };
    let mut store = ParamStore::new();
    let pid = store.register("p", point.clone()).unwrap();
    let mut tape = Tape::new();
    let p = tape.param(&store, pid);
    let loss = build(&mut tape, p).unwrap();
    let grads = tape.backward(loss).unwrap();
    let analytic = grads.get(pid).expect("parameter reached");
    gradient_check(eval, point, analytic, STEP).unwrap()
}

fn shapes3() -> Vec<Vec<usize>> {
    vec![vec![2, 4, 4], vec![1, 6, 6], vec![3, 4, 6]]
}

/// Weighted sum with fixed coefficients, so the loss is sensitive to every
/// output coordinate with distinct weights.
fn weighted_mean(tape: &mut Tape, x: NodeId, seed: u64) -> Result<NodeId> {
    let shape = tape.value(x).shape().to_vec();
    let mut r = rng(seed ^ 0x5eed);
    let w = tape.leaf(rand_array(&mut r, &shape));
    let prod = tape.mul(x, w)?;
    Ok(tape.mean(prod))
}

#[test]
fn elementwise_and_scalar_ops() {
    let mut r = rng(11);
    for (i, shape) in shapes3().iter().enumerate() {
        let p = rand_array(&mut r, shape);
        let other = rand_array(&mut r, shape);
        let seed = i as u64;

        let o = other.clone();
        let err = check(&p, |t, x| {
            let b = t.leaf(o.clone());
            let s = t.add(x, b)?;
            weighted_mean(t, s, seed)
        });
        assert!(err <= TOL, "add: {err}");

        let o = other.clone();
        let err = check(&p, |t, x| {
            let b = t.leaf(o.clone());
            let s = t.sub(x, b)?;
            weighted_mean(t, s, seed)
        });
        assert!(err <= TOL, "sub: {err}");

        let o = other.clone();
        let err = check(&p, |t, x| {
            let b = t.leaf(o.clone());
            let s = t.mul(x, b)?;
            weighted_mean(t, s, seed)
        });
        assert!(err <= TOL, "mul: {err}");

        // keep the divisor away from zero
        let o = other.map(|v| 1.5 + 0.4 * v);
        let err = check(&p, |t, x| {
            let b = t.leaf(o.clone());
            let s = t.div(x, b)?;
            weighted_mean(t, s, seed)
        });
        assert!(err <= TOL, "div num: {err}");

        let o = other.clone();
        let pd = p.map(|v| 1.5 + 0.4 * v);
        let err = check(&pd, |t, x| {
            let b = t.leaf(o.clone());
            let s = t.div(b, x)?;
            weighted_mean(t, s, seed)
        });
        assert!(err <= TOL, "div den: {err}");

        let err = check(&p, |t, x| {
            let s = t.add_scalar(x, 0.7);
            let s = t.mul_scalar(s, -1.3);
            weighted_mean(t, s, seed)
        });
        assert!(err <= TOL, "scalar ops: {err}");

        let err = check(&p, |t, x| {
            let s = t.sigmoid(x);
            weighted_mean(t, s, seed)
        });
        assert!(err <= TOL, "sigmoid: {err}");

        let err = check(&p, |t, x| {
            let s = t.gelu(x);
            weighted_mean(t, s, seed)
        });
        assert!(err <= TOL, "gelu: {err}");
    }
}

#[test]
fn sigmoid_sum_high_accuracy() {
    // analytic derivative sigmoid * (1 - sigmoid); double precision
    let mut r = rng(12);
    let p = rand_array(&mut r, &[12]);
    let err = check(&p, |t, x| {
        let s = t.sigmoid(x);
        Ok(t.sum(s))
    });
    assert!(err <= 1e-6, "sigmoid sum: {err}");
}

#[test]
fn conv_gradients_both_arguments() {
    let mut r = rng(13);
    for (i, &(c_in, c_out, h, w, k)) in [(1usize, 1usize, 4usize, 4usize, 3usize), (2, 3, 5, 5, 3), (3, 2, 4, 6, 1)]
        .iter()
        .enumerate()
    {
        let input = rand_array(&mut r, &[c_in, h, w]);
        let kernel = rand_array(&mut r, &[c_out, c_in, k, k]);
        let seed = 100 + i as u64;

        let kk = kernel.clone();
        let err = check(&input, |t, x| {
            let kn = t.leaf(kk.clone());
            let y = t.conv2d_same(x, kn)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "conv input grad: {err}");

        let ii = input.clone();
        let err = check(&kernel, |t, x| {
            let inp = t.leaf(ii.clone());
            let y = t.conv2d_same(inp, x)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "conv kernel grad: {err}");
    }
}

#[test]
fn depthwise_conv_gradients() {
    let mut r = rng(14);
    for (i, &(c, h, w, k)) in [(2usize, 4usize, 4usize, 3usize), (1, 6, 5, 3), (4, 4, 4, 3)].iter().enumerate() {
        let input = rand_array(&mut r, &[c, h, w]);
        let kernel = rand_array(&mut r, &[c, 1, k, k]);
        let seed = 200 + i as u64;

        let kk = kernel.clone();
        let err = check(&input, |t, x| {
            let kn = t.leaf(kk.clone());
            let y = t.conv2d_depthwise(x, kn)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "dw input grad: {err}");

        let ii = input.clone();
        let err = check(&kernel, |t, x| {
            let inp = t.leaf(ii.clone());
            let y = t.conv2d_depthwise(inp, x)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "dw kernel grad: {err}");
    }
}

#[test]
fn conv_mse_loss_matches_fd() {
    // loss = MSE(conv2d_same(x, W), t); matches the backward example
    let mut r = rng(15);
    let x = rand_array(&mut r, &[2, 5, 5]);
    let w = rand_array(&mut r, &[2, 2, 3, 3]);
    let target = rand_array(&mut r, &[2, 5, 5]);

    let (tt, ww) = (target.clone(), w.clone());
    let err = check(&x, |t, xn| {
        let wn = t.leaf(ww.clone());
        let tn = t.leaf(tt.clone());
        let y = t.conv2d_same(xn, wn)?;
        let d = t.sub(y, tn)?;
        let sq = t.mul(d, d)?;
        Ok(t.mean(sq))
    });
    assert!(err <= TOL, "mse wrt input: {err}");

    let (tt, xx) = (target, x);
    let err = check(&w, |t, wn| {
        let xn = t.leaf(xx.clone());
        let tn = t.leaf(tt.clone());
        let y = t.conv2d_same(xn, wn)?;
        let d = t.sub(y, tn)?;
        let sq = t.mul(d, d)?;
        Ok(t.mean(sq))
    });
    assert!(err <= TOL, "mse wrt kernel: {err}");
}

#[test]
fn matmul_gradients() {
    let mut r = rng(16);
    for (i, &(m, k, n)) in [(1usize, 4usize, 3usize), (3, 2, 5), (2, 2, 2)].iter().enumerate() {
        let a = rand_array(&mut r, &[m, k]);
        let b = rand_array(&mut r, &[k, n]);
        let seed = 300 + i as u64;

        let bb = b.clone();
        let err = check(&a, |t, x| {
            let bn = t.leaf(bb.clone());
            let y = t.matmul(x, bn)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "matmul lhs: {err}");

        let aa = a.clone();
        let err = check(&b, |t, x| {
            let an = t.leaf(aa.clone());
            let y = t.matmul(an, x)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "matmul rhs: {err}");
    }
}

#[test]
fn layer_norm_gradients() {
    let mut r = rng(17);
    // C >= 3 with a per-channel ramp: keeps the per-pixel variance away from
    // zero (where the FD probe is ill-conditioned) without saturating the
    // normalization the way two widely separated channels would
    for (i, shape) in [vec![3usize, 4, 4], vec![4, 6, 6], vec![6, 4, 6]].iter().enumerate() {
        let c = shape[0];
        let plane = shape[1] * shape[2];
        let input = {
            let mut a = rand_array(&mut r, shape);
            for ci in 0..c {
                for v in &mut a.data_mut()[ci * plane..(ci + 1) * plane] {
                    *v += ci as f64;
                }
            }
            a
        };
        let gain = rand_array(&mut r, &[c]).map(|v| 1.0 + 0.3 * v);
        let bias = rand_array(&mut r, &[c]);
        let seed = 400 + i as u64;

        let (g, b) = (gain.clone(), bias.clone());
        let err = check(&input, |t, x| {
            let gn = t.leaf(g.clone());
            let bn = t.leaf(b.clone());
            let y = t.layer_norm_channels(x, gn, bn, 1e-6)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "ln input: {err}");

        let (inp, b) = (input.clone(), bias.clone());
        let err = check(&gain, |t, x| {
            let xn = t.leaf(inp.clone());
            let bn = t.leaf(b.clone());
            let y = t.layer_norm_channels(xn, x, bn, 1e-6)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "ln gain: {err}");

        let (inp, g) = (input.clone(), gain.clone());
        let err = check(&bias, |t, x| {
            let xn = t.leaf(inp.clone());
            let gn = t.leaf(g.clone());
            let y = t.layer_norm_channels(xn, gn, x, 1e-6)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "ln bias: {err}");
    }
}

#[test]
fn pooling_and_resampling_gradients() {
    let mut r = rng(18);
    for (i, shape) in [vec![2usize, 4usize, 4usize], vec![1, 6, 6], vec![3, 4, 6]].iter().enumerate() {
        let input = rand_array(&mut r, shape);
        let seed = 500 + i as u64;

        let err = check(&input, |t, x| {
            let y = t.global_avg_pool(x)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "gap: {err}");

        let err = check(&input, |t, x| {
            let y = t.avg_pool2(x)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "avgpool2: {err}");

        let err = check(&input, |t, x| {
            let y = t.upsample_nearest2(x)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "upsample: {err}");
    }
}

#[test]
fn structural_op_gradients() {
    let mut r = rng(19);
    for (i, shape) in [vec![4usize, 4usize, 4usize], vec![2, 6, 6], vec![6, 4, 6]].iter().enumerate() {
        let input = rand_array(&mut r, shape);
        let c = shape[0];
        let seed = 600 + i as u64;

        // channel split and recombine (SimpleGate shape)
        let err = check(&input, |t, x| {
            let lo = t.narrow_channels(x, 0, c / 2)?;
            let hi = t.narrow_channels(x, c / 2, c / 2)?;
            let y = t.mul(lo, hi)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "narrow/simplegate: {err}");

        let other = rand_array(&mut r, shape);
        let o = other.clone();
        let err = check(&input, |t, x| {
            let b = t.leaf(o.clone());
            let y = t.concat_channels(&[x, b])?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "concat: {err}");

        let err = check(&input, |t, x| {
            let y = t.crop_spatial(x, 1, 1, shape[1] - 2, shape[2] - 2)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "crop: {err}");

        let scale = rand_array(&mut r, &[c, 1, 1]);
        let s = scale.clone();
        let err = check(&input, |t, x| {
            let sn = t.leaf(s.clone());
            let y = t.scale_channels(x, sn)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "scale_channels input: {err}");

        let ii = input.clone();
        let err = check(&scale, |t, x| {
            let xn = t.leaf(ii.clone());
            let y = t.scale_channels(xn, x)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "scale_channels scale: {err}");

        let bias = rand_array(&mut r, &[c]);
        let b = bias.clone();
        let err = check(&input, |t, x| {
            let bn = t.leaf(b.clone());
            let y = t.add_bias(x, bn)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "add_bias input: {err}");

        let ii = input.clone();
        let err = check(&bias, |t, x| {
            let xn = t.leaf(ii.clone());
            let y = t.add_bias(xn, x)?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "add_bias bias: {err}");

        let err = check(&input, |t, x| {
            let y = t.reshape(x, &[c * shape[1], shape[2]])?;
            weighted_mean(t, y, seed)
        });
        assert!(err <= TOL, "reshape: {err}");

        let err = check(&input, |t, x| Ok(t.sum(x)));
        assert!(err <= 1e-9, "sum: {err}");

        let err = check(&input, |t, x| Ok(t.mean(x)));
        assert!(err <= 1e-9, "mean: {err}");
    }
}
