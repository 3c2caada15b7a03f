//! Batched forward and backward kernels for every layer kind.
//!
//! Activations travel between layers as `[batch, len]` matrices; sequence
//! shapes are laid out feature-major inside each row (`f * steps + t`).

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Array3, ArrayView2, ArrayViewMut2, Axis};

use super::param::{ParamTensor, Role};
use super::spec::{fast_tanh, sigmoid, Activation, LayerSpec, Shape};

/// Parameter roles and shapes for a layer, with the Glorot fan sizes used at
/// initialization (biases report `None`).
pub(crate) fn param_layout(spec: &LayerSpec) -> Vec<(Role, Vec<usize>, Option<(usize, usize)>)> {
    match *spec {
        LayerSpec::FullyConnected {
            inputs, outputs, ..
        } => vec![
            (Role::Weight, vec![inputs, outputs], Some((inputs, outputs))),
            (Role::Bias, vec![outputs], None),
        ],
        LayerSpec::SpatialConv { channels, maps, .. } => vec![
            (Role::Weight, vec![maps, channels], Some((channels, maps))),
            (Role::Bias, vec![maps], None),
        ],
        LayerSpec::TemporalConv {
            maps_in,
            filters,
            kernel,
            ..
        } => vec![
            (
                Role::Weight,
                vec![filters, maps_in * kernel],
                Some((maps_in * kernel, filters)),
            ),
            (Role::Bias, vec![filters], None),
        ],
        LayerSpec::SimpleRnn { inputs, hidden, .. } => vec![
            (Role::Weight, vec![inputs, hidden], Some((inputs, hidden))),
            (Role::Recurrent, vec![hidden, hidden], Some((hidden, hidden))),
            (Role::Bias, vec![hidden], None),
        ],
        LayerSpec::Lstm { inputs, hidden } => vec![
            (Role::Weight, vec![inputs, 4 * hidden], Some((inputs, 4 * hidden))),
            (Role::Recurrent, vec![hidden, 4 * hidden], Some((hidden, 4 * hidden))),
            (Role::Bias, vec![4 * hidden], None),
        ],
        LayerSpec::SigmoidUnit { inputs } => vec![
            (Role::Weight, vec![inputs, 1], Some((inputs, 1))),
            (Role::Bias, vec![1], None),
        ],
    }
}

/// Layer-specific intermediates kept for the backward pass.
#[derive(Debug)]
pub(crate) enum Cache {
    None,
    /// im2col patches, `[batch * positions, maps_in * kernel]`.
    Patches(Array2<f64>),
    Recurrent(RecurrentCache),
}

#[derive(Debug)]
pub(crate) struct RecurrentCache {
    /// Inputs in time-major order, `[steps * batch, features]`.
    x_time_major: Array2<f64>,
    /// Activated gates per step. LSTM: `[steps, batch, 4h]` ordered (i, f, g, o);
    /// simple RNN: the outputs `y(t)`, `[steps, batch, h]`.
    gates: Array3<f64>,
    /// Hidden outputs `y(t−1)` for t = 0..=steps, `[steps + 1, batch, h]`.
    ys: Array3<f64>,
    /// LSTM cell states `c(t−1)` for t = 0..=steps.
    cells: Array3<f64>,
    /// `tanh(c(t))`, `[steps, batch, h]`.
    tanh_cells: Array3<f64>,
}

/// Gradient arriving at a layer from above.
pub(crate) enum Upstream {
    /// With respect to the layer's activated output.
    Output(Array2<f64>),
    /// With respect to the pre-activation (used to seed the sigmoid unit).
    PreActivation(Array2<f64>),
}

fn add_bias_rows(z: &mut Array2<f64>, bias: &[f64]) {
    for mut row in z.rows_mut() {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

fn activate(z: &mut Array2<f64>, act: Activation) {
    if act != Activation::Identity {
        z.mapv_inplace(|v| act.apply(v));
    }
}

/// Always returns a row-major array; callers reshape its rows in place.
fn to_preactivation(up: Upstream, output: ArrayView2<f64>, act: Activation) -> Array2<f64> {
    let mut d = match up {
        Upstream::PreActivation(d) => d,
        Upstream::Output(mut d) => {
            if act != Activation::Identity {
                d.zip_mut_with(&output, |g, &y| *g *= act.derivative_from_output(y));
            }
            d
        }
    };
    if !d.is_standard_layout() {
        d = d.as_standard_layout().into_owned();
    }
    d
}

fn accumulate_bias(param: &mut ParamTensor, dz: &Array2<f64>) {
    for row in dz.rows() {
        for (g, d) in param.grad.iter_mut().zip(row.iter()) {
            *g += d;
        }
    }
}

fn seq_dims(shape: Shape) -> (usize, usize) {
    match shape {
        Shape::Seq { features, steps } => (features, steps),
        Shape::Flat(n) => (n, 1),
    }
}

pub(crate) fn forward(
    spec: &LayerSpec,
    in_shape: Shape,
    params: &[ParamTensor],
    x: ArrayView2<f64>,
) -> (Array2<f64>, Cache) {
    match *spec {
        LayerSpec::FullyConnected { activation, .. } => {
            let mut z = x.dot(&params[0].matrix());
            add_bias_rows(&mut z, &params[1].values);
            activate(&mut z, activation);
            (z, Cache::None)
        }
        LayerSpec::SigmoidUnit { .. } => {
            let mut z = x.dot(&params[0].matrix());
            add_bias_rows(&mut z, &params[1].values);
            activate(&mut z, Activation::Sigmoid);
            (z, Cache::None)
        }
        LayerSpec::SpatialConv {
            channels,
            maps,
            activation,
        } => {
            let (_, steps) = seq_dims(in_shape);
            let batch = x.nrows();
            let w = params[0].matrix();
            let bias = &params[1].values;
            let mut out = Array2::<f64>::zeros((batch, maps * steps));
            for (xi, mut oi) in x.rows().into_iter().zip(out.rows_mut()) {
                let xm = xi.into_shape_with_order((channels, steps)).expect("row layout");
                let mut om = oi
                    .view_mut()
                    .into_shape_with_order((maps, steps))
                    .expect("row layout");
                general_mat_mul(1.0, &w, &xm, 0.0, &mut om);
                for (m, mut r) in om.rows_mut().into_iter().enumerate() {
                    r.mapv_inplace(|v| activation.apply(v + bias[m]));
                }
            }
            (out, Cache::None)
        }
        LayerSpec::TemporalConv {
            maps_in,
            filters,
            kernel,
            stride,
            activation,
        } => {
            let (_, steps) = seq_dims(in_shape);
            let positions = (steps - kernel) / stride + 1;
            let batch = x.nrows();
            let mut patches = Array2::<f64>::zeros((batch * positions, maps_in * kernel));
            for b in 0..batch {
                let xr = x.row(b);
                for p in 0..positions {
                    let mut pr = patches.row_mut(b * positions + p);
                    for m in 0..maps_in {
                        for k in 0..kernel {
                            pr[m * kernel + k] = xr[m * steps + p * stride + k];
                        }
                    }
                }
            }
            let mut z = patches.dot(&params[0].matrix().t());
            add_bias_rows(&mut z, &params[1].values);
            activate(&mut z, activation);
            let mut out = Array2::<f64>::zeros((batch, filters * positions));
            for b in 0..batch {
                for p in 0..positions {
                    for f in 0..filters {
                        out[[b, f * positions + p]] = z[[b * positions + p, f]];
                    }
                }
            }
            (out, Cache::Patches(patches))
        }
        LayerSpec::SimpleRnn {
            hidden, activation, ..
        } => {
            let (features, steps) = seq_dims(in_shape);
            let batch = x.nrows();
            let xtm = time_major(x, features, steps);
            let mut z = xtm.dot(&params[0].matrix());
            add_bias_rows(&mut z, &params[2].values);
            let mut gates = z
                .into_shape_with_order((steps, batch, hidden))
                .expect("time-major layout");
            let u = params[1].matrix();
            let mut ys = Array3::<f64>::zeros((steps + 1, batch, hidden));
            for t in 0..steps {
                let mut g = gates.index_axis_mut(Axis(0), t);
                general_mat_mul(1.0, &ys.index_axis(Axis(0), t), &u, 1.0, &mut g);
                g.mapv_inplace(|v| activation.apply(v));
                ys.index_axis_mut(Axis(0), t + 1).assign(&g);
            }
            let out = ys.index_axis(Axis(0), steps).to_owned();
            (
                out,
                Cache::Recurrent(RecurrentCache {
                    x_time_major: xtm,
                    gates,
                    ys,
                    cells: Array3::zeros((0, 0, 0)),
                    tanh_cells: Array3::zeros((0, 0, 0)),
                }),
            )
        }
        LayerSpec::Lstm { hidden: h, .. } => {
            let (features, steps) = seq_dims(in_shape);
            let batch = x.nrows();
            let xtm = time_major(x, features, steps);
            let mut z = xtm.dot(&params[0].matrix());
            add_bias_rows(&mut z, &params[2].values);
            let mut gates = z
                .into_shape_with_order((steps, batch, 4 * h))
                .expect("time-major layout");
            let u = params[1].matrix();
            let mut ys = Array3::<f64>::zeros((steps + 1, batch, h));
            let mut cells = Array3::<f64>::zeros((steps + 1, batch, h));
            let mut tanh_cells = Array3::<f64>::zeros((steps, batch, h));
            let bh = batch * h;
            for t in 0..steps {
                let mut g = gates.index_axis_mut(Axis(0), t);
                general_mat_mul(1.0, &ys.index_axis(Axis(0), t), &u, 1.0, &mut g);
                let gs = g.as_slice_mut().expect("contiguous gates");
                let (c_done, c_rest) = cells
                    .as_slice_mut()
                    .expect("contiguous cells")
                    .split_at_mut((t + 1) * bh);
                let c_prev = &c_done[t * bh..];
                let c_next = &mut c_rest[..bh];
                let y_next = &mut ys.as_slice_mut().expect("contiguous ys")[(t + 1) * bh..(t + 2) * bh];
                let tc_out = &mut tanh_cells.as_slice_mut().expect("contiguous")[t * bh..(t + 1) * bh];
                for bi in 0..batch {
                    let row = &mut gs[bi * 4 * h..(bi + 1) * 4 * h];
                    let (ig, rest) = row.split_at_mut(h);
                    let (fg, rest) = rest.split_at_mut(h);
                    let (cg, og) = rest.split_at_mut(h);
                    let off = bi * h;
                    for j in 0..h {
                        ig[j] = sigmoid(ig[j]);
                        fg[j] = sigmoid(fg[j]);
                        cg[j] = fast_tanh(cg[j]);
                        og[j] = sigmoid(og[j]);
                        let c = fg[j] * c_prev[off + j] + ig[j] * cg[j];
                        let tc = fast_tanh(c);
                        c_next[off + j] = c;
                        tc_out[off + j] = tc;
                        y_next[off + j] = og[j] * tc;
                    }
                }
            }
            let out = ys.index_axis(Axis(0), steps).to_owned();
            (
                out,
                Cache::Recurrent(RecurrentCache {
                    x_time_major: xtm,
                    gates,
                    ys,
                    cells,
                    tanh_cells,
                }),
            )
        }
    }
}

/// Accumulates parameter gradients and returns the input gradient when asked.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward(
    spec: &LayerSpec,
    in_shape: Shape,
    params: &mut [ParamTensor],
    input: ArrayView2<f64>,
    output: ArrayView2<f64>,
    cache: &Cache,
    upstream: Upstream,
    need_input_grad: bool,
) -> Option<Array2<f64>> {
    match *spec {
        LayerSpec::FullyConnected { activation, .. } => {
            let dz = to_preactivation(upstream, output, activation);
            dense_backward(params, input, &dz, need_input_grad)
        }
        LayerSpec::SigmoidUnit { .. } => {
            let dz = to_preactivation(upstream, output, Activation::Sigmoid);
            dense_backward(params, input, &dz, need_input_grad)
        }
        LayerSpec::SpatialConv {
            channels,
            maps,
            activation,
        } => {
            let (_, steps) = seq_dims(in_shape);
            let dz = to_preactivation(upstream, output, activation);
            let batch = input.nrows();
            let mut dx = need_input_grad.then(|| Array2::<f64>::zeros((batch, channels * steps)));
            let (w_param, b_param) = params.split_at_mut(1);
            let ParamTensor { values, grad, .. } = &mut w_param[0];
            let w = ArrayView2::from_shape((maps, channels), values.as_slice()).expect("shape");
            let mut dw = ArrayViewMut2::from_shape((maps, channels), grad.as_mut_slice()).expect("shape");
            for b in 0..batch {
                let xm = input
                    .row(b)
                    .into_shape_with_order((channels, steps))
                    .expect("row layout");
                let dzm = dz
                    .row(b)
                    .into_shape_with_order((maps, steps))
                    .expect("row layout");
                general_mat_mul(1.0, &dzm, &xm.t(), 1.0, &mut dw);
                for m in 0..maps {
                    b_param[0].grad[m] += dzm.row(m).sum();
                }
                if let Some(dx) = dx.as_mut() {
                    let mut dxm = dx
                        .row_mut(b)
                        .into_shape_with_order((channels, steps))
                        .expect("row layout");
                    general_mat_mul(1.0, &w.t(), &dzm, 0.0, &mut dxm);
                }
            }
            dx
        }
        LayerSpec::TemporalConv {
            maps_in,
            filters,
            kernel,
            stride,
            activation,
        } => {
            let (_, steps) = seq_dims(in_shape);
            let positions = (steps - kernel) / stride + 1;
            let batch = input.nrows();
            let dout = to_preactivation(upstream, output, activation);
            let mut dz = Array2::<f64>::zeros((batch * positions, filters));
            for b in 0..batch {
                for p in 0..positions {
                    for f in 0..filters {
                        dz[[b * positions + p, f]] = dout[[b, f * positions + p]];
                    }
                }
            }
            let patches = match cache {
                Cache::Patches(p) => p,
                _ => unreachable!("temporal conv cache"),
            };
            general_mat_mul(1.0, &dz.t(), patches, 1.0, &mut params[0].grad_matrix_mut());
            accumulate_bias(&mut params[1], &dz);
            need_input_grad.then(|| {
                let dpatches = dz.dot(&params[0].matrix());
                let mut dx = Array2::<f64>::zeros((batch, maps_in * steps));
                for b in 0..batch {
                    for p in 0..positions {
                        let pr = dpatches.row(b * positions + p);
                        for m in 0..maps_in {
                            for k in 0..kernel {
                                dx[[b, m * steps + p * stride + k]] += pr[m * kernel + k];
                            }
                        }
                    }
                }
                dx
            })
        }
        LayerSpec::SimpleRnn {
            hidden, activation, ..
        } => {
            let (features, steps) = seq_dims(in_shape);
            let rc = match cache {
                Cache::Recurrent(rc) => rc,
                _ => unreachable!("recurrent cache"),
            };
            let batch = input.nrows();
            let mut dzs = Array3::<f64>::zeros((steps, batch, hidden));
            let mut dy = match upstream {
                Upstream::Output(d) => d,
                Upstream::PreActivation(_) => unreachable!("recurrent layers are never the output"),
            };
            {
                let u = params[1].matrix();
                for t in (0..steps).rev() {
                    let mut dz = dzs.index_axis_mut(Axis(0), t);
                    let y = rc.gates.index_axis(Axis(0), t);
                    ndarray::Zip::from(&mut dz)
                        .and(&dy)
                        .and(&y)
                        .for_each(|d, &g, &yv| *d = g * activation.derivative_from_output(yv));
                    if t > 0 {
                        dy = dz.dot(&u.t());
                    }
                }
            }
            recurrent_param_grads(params, rc, dzs, features, steps, need_input_grad)
        }
        LayerSpec::Lstm { hidden: h, .. } => {
            let (features, steps) = seq_dims(in_shape);
            let rc = match cache {
                Cache::Recurrent(rc) => rc,
                _ => unreachable!("recurrent cache"),
            };
            let batch = input.nrows();
            let mut dzs = Array3::<f64>::zeros((steps, batch, 4 * h));
            let mut dy = match upstream {
                Upstream::Output(d) => d,
                Upstream::PreActivation(_) => unreachable!("recurrent layers are never the output"),
            };
            let mut dc = Array2::<f64>::zeros((batch, h));
            {
                let u = params[1].matrix();
                let bh = batch * h;
                let gates_all = rc.gates.as_slice().expect("contiguous gates");
                let cells_all = rc.cells.as_slice().expect("contiguous cells");
                let tanh_all = rc.tanh_cells.as_slice().expect("contiguous");
                let dc = dc.as_slice_mut().expect("contiguous");
                for t in (0..steps).rev() {
                    let mut dz = dzs.index_axis_mut(Axis(0), t);
                    let dzs_t = dz.as_slice_mut().expect("contiguous");
                    let g_t = &gates_all[t * 4 * bh..(t + 1) * 4 * bh];
                    let c_prev = &cells_all[t * bh..(t + 1) * bh];
                    let tc_t = &tanh_all[t * bh..(t + 1) * bh];
                    if !dy.is_standard_layout() {
                        dy = dy.as_standard_layout().into_owned();
                    }
                    let dy_s = dy.as_slice().expect("contiguous");
                    for bi in 0..batch {
                        let g = &g_t[bi * 4 * h..(bi + 1) * 4 * h];
                        let d = &mut dzs_t[bi * 4 * h..(bi + 1) * 4 * h];
                        let off = bi * h;
                        for j in 0..h {
                            let ig = g[j];
                            let fg = g[h + j];
                            let cg = g[2 * h + j];
                            let og = g[3 * h + j];
                            let tc = tc_t[off + j];
                            let dyv = dy_s[off + j];
                            let dcv = dc[off + j] + dyv * og * (1.0 - tc * tc);
                            dc[off + j] = dcv * fg;
                            d[j] = dcv * cg * ig * (1.0 - ig);
                            d[h + j] = dcv * c_prev[off + j] * fg * (1.0 - fg);
                            d[2 * h + j] = dcv * ig * (1.0 - cg * cg);
                            d[3 * h + j] = dyv * tc * og * (1.0 - og);
                        }
                    }
                    if t > 0 {
                        dy = dz.dot(&u.t());
                    }
                }
            }
            recurrent_param_grads(params, rc, dzs, features, steps, need_input_grad)
        }
    }
}

fn dense_backward(
    params: &mut [ParamTensor],
    input: ArrayView2<f64>,
    dz: &Array2<f64>,
    need_input_grad: bool,
) -> Option<Array2<f64>> {
    general_mat_mul(1.0, &input.t(), dz, 1.0, &mut params[0].grad_matrix_mut());
    accumulate_bias(&mut params[1], dz);
    need_input_grad.then(|| dz.dot(&params[0].matrix().t()))
}

fn recurrent_param_grads(
    params: &mut [ParamTensor],
    rc: &RecurrentCache,
    dzs: Array3<f64>,
    features: usize,
    steps: usize,
    need_input_grad: bool,
) -> Option<Array2<f64>> {
    let (_, batch, width) = dzs.dim();
    let hidden = rc.ys.dim().2;
    let dz = dzs
        .into_shape_with_order((steps * batch, width))
        .expect("time-major layout");
    let y_prev = rc.ys.slice(s![0..steps, .., ..]);
    let y_prev = y_prev
        .to_shape((steps * batch, hidden))
        .expect("time-major layout");
    general_mat_mul(
        1.0,
        &rc.x_time_major.t(),
        &dz,
        1.0,
        &mut params[0].grad_matrix_mut(),
    );
    general_mat_mul(1.0, &y_prev.t(), &dz, 1.0, &mut params[1].grad_matrix_mut());
    accumulate_bias(&mut params[2], &dz);
    need_input_grad.then(|| {
        let dxtm = dz.dot(&params[0].matrix().t());
        from_time_major(dxtm.view(), batch, features, steps)
    })
}

/// `[batch, features * steps]` → `[steps * batch, features]`.
fn time_major(x: ArrayView2<f64>, features: usize, steps: usize) -> Array2<f64> {
    let batch = x.nrows();
    let mut out = Array2::<f64>::zeros((steps * batch, features));
    for b in 0..batch {
        let xr = x.row(b);
        for f in 0..features {
            for t in 0..steps {
                out[[t * batch + b, f]] = xr[f * steps + t];
            }
        }
    }
    out
}

fn from_time_major(x: ArrayView2<f64>, batch: usize, features: usize, steps: usize) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((batch, features * steps));
    for t in 0..steps {
        for b in 0..batch {
            let xr = x.row(t * batch + b);
            for f in 0..features {
                out[[b, f * steps + t]] = xr[f];
            }
        }
    }
    out
}
