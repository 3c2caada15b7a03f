use ndarray::Array2;
use p300::models::{ModelDims, ModelKind};
use p300::nn::{
    grad_check, input_grad_check, sigmoid, Activation, LayerSpec, Network, Shape,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn batch(rows: usize, cols: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.5..1.5));
    let y = (0..rows).map(|i| (i % 3 == 0) as u8 as f64).collect();
    (x, y)
}

/// Moves every parameter off zero so that no relu sits exactly on its kink.
fn perturbed(mut net: Network, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let v: Vec<f64> = net
        .flat_values()
        .iter()
        .map(|v| v + rng.random_range(-0.1..0.1))
        .collect();
    net.set_flat_values(&v).unwrap();
    net
}

fn check(net: &Network, seed: u64) {
    let net = &perturbed(net.clone(), seed);
    let n = net.input_shape().len();
    let (x, y) = batch(4, n, seed);
    let report = grad_check(net, x.view(), &y, H, TOL).unwrap();
    assert!(
        report.passed,
        "{:?} seed {seed}: param rel err {} at {:?}",
        net.layers(),
        report.max_rel_error,
        report.worst
    );
    let input_err = input_grad_check(net, x.view(), H).unwrap();
    assert!(input_err < TOL, "{:?} seed {seed}: input rel err {input_err}", net.layers());
}

fn layer_cases() -> Vec<(Shape, Vec<LayerSpec>)> {
    let seq = Shape::Seq { features: 3, steps: 6 };
    let mut cases = Vec::new();
    for activation in [Activation::Sigmoid, Activation::Tanh, Activation::Identity, Activation::Relu] {
        cases.push((
            Shape::Flat(5),
            vec![
                LayerSpec::FullyConnected { inputs: 5, outputs: 4, activation },
                LayerSpec::SigmoidUnit { inputs: 4 },
            ],
        ));
        cases.push((
            seq,
            vec![
                LayerSpec::SpatialConv { channels: 3, maps: 2, activation },
                LayerSpec::SigmoidUnit { inputs: 12 },
            ],
        ));
        cases.push((
            seq,
            vec![
                LayerSpec::TemporalConv { maps_in: 3, filters: 2, kernel: 2, stride: 2, activation },
                LayerSpec::SigmoidUnit { inputs: 6 },
            ],
        ));
        cases.push((
            seq,
            vec![
                LayerSpec::SimpleRnn { inputs: 3, hidden: 4, activation },
                LayerSpec::SigmoidUnit { inputs: 4 },
            ],
        ));
    }
    cases.push((
        seq,
        vec![
            LayerSpec::TemporalConv { maps_in: 3, filters: 2, kernel: 3, stride: 1, activation: Activation::Tanh },
            LayerSpec::SigmoidUnit { inputs: 8 },
        ],
    ));
    cases.push((
        seq,
        vec![LayerSpec::Lstm { inputs: 3, hidden: 4 }, LayerSpec::SigmoidUnit { inputs: 4 }],
    ));
    cases.push((seq, vec![LayerSpec::SigmoidUnit { inputs: 18 }]));
    cases
}

#[test]
fn every_layer_kind_matches_finite_differences() {
    for (input, layers) in layer_cases() {
        for seed in 0..10 {
            let net = Network::new(input, layers.clone(), seed).unwrap();
            check(&net, 100 + seed);
        }
    }
}

fn reduced_dims() -> ModelDims {
    ModelDims {
        channels: 4,
        samples: 10,
        spatial_maps: 3,
        temporal_filters: 2,
        kernel: 5,
        stride: 5,
        fc_widths: [4, 3],
        lstm_small: 3,
        lstm_large: 5,
    }
}

#[test]
fn full_models_match_finite_differences() {
    let dims = reduced_dims();
    for kind in ModelKind::ALL.into_iter().filter(|k| k.is_network()) {
        let (input, layers) = kind.architecture(&dims).unwrap();
        for seed in 0..10 {
            let net = Network::new(input, layers.clone(), seed).unwrap();
            check(&net, 200 + seed);
        }
    }
}

#[test]
fn zero_tolerance_fails() {
    let (input, layers) = layer_cases().remove(0);
    let net = Network::new(input, layers, 3).unwrap();
    let (x, y) = batch(4, 5, 9);
    let report = grad_check(&net, x.view(), &y, H, 0.0).unwrap();
    assert!(!report.passed);
    assert!(report.max_rel_error > 0.0);
    assert_eq!(report.checked, net.param_count());
}

fn zeroed(input: Shape, layers: Vec<LayerSpec>) -> Network {
    let mut net = Network::new(input, layers, 0).unwrap();
    let n = net.param_count();
    net.set_flat_values(&vec![0.0; n]).unwrap();
    net
}

#[test]
fn zero_lstm_outputs_one_half_and_output_bias_gradient_is_p_minus_y() {
    let mut net = zeroed(
        Shape::Seq { features: 3, steps: 5 },
        vec![LayerSpec::Lstm { inputs: 3, hidden: 2 }, LayerSpec::SigmoidUnit { inputs: 2 }],
    );
    let (x, _) = batch(3, 15, 1);
    assert!(net.forward(x.view()).unwrap().iter().all(|&p| p == 0.5));
    net.zero_grad();
    net.backward(x.view(), &[1.0, 1.0, 1.0]).unwrap();
    let g = net.flat_grads();
    assert_eq!(*g.last().unwrap(), -0.5);
    // the hidden state is identically zero, so nothing upstream of the unit bias moves
    assert!(g[..g.len() - 1].iter().all(|&v| v == 0.0));
}

#[test]
fn single_step_lstm_by_hand() {
    let mut net = zeroed(
        Shape::Seq { features: 1, steps: 1 },
        vec![LayerSpec::Lstm { inputs: 1, hidden: 1 }, LayerSpec::SigmoidUnit { inputs: 1 }],
    );
    // W (i, f, c, o), U (i, f, c, o), b (i, f, c, o), unit weight, unit bias
    let (wi, wf, wc, wo) = (0.3, -0.2, 0.8, 0.5);
    let (bi, bf, bc, bo) = (0.1, 0.4, -0.3, 0.2);
    let (v, a) = (1.7, -0.4);
    net.set_flat_values(&[wi, wf, wc, wo, 0.9, 0.9, 0.9, 0.9, bi, bf, bc, bo, v, a])
        .unwrap();
    let x = 0.6;
    let c = sigmoid(wi * x + bi) * (wc * x + bc).tanh();
    let y = sigmoid(wo * x + bo) * c.tanh();
    let p = sigmoid(v * y + a);
    let got = net.forward(Array2::from_elem((1, 1), x).view()).unwrap()[0];
    assert!((got - p).abs() < 1e-15, "{got} vs {p}");
}

/// Plain scalar-loop LSTM with the same parameter layout.
fn reference_lstm(x: &[f64], features: usize, steps: usize, hidden: usize, p: &[f64]) -> Vec<f64> {
    let g4 = 4 * hidden;
    let w = &p[..features * g4];
    let u = &p[features * g4..(features + hidden) * g4];
    let b = &p[(features + hidden) * g4..(features + hidden + 1) * g4];
    let mut y = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    for t in 0..steps {
        let mut z = b.to_vec();
        for (j, zj) in z.iter_mut().enumerate() {
            for f in 0..features {
                *zj += x[f * steps + t] * w[f * g4 + j];
            }
            for k in 0..hidden {
                *zj += y[k] * u[k * g4 + j];
            }
        }
        for k in 0..hidden {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[hidden + k]);
            let g = z[2 * hidden + k].tanh();
            let o = sigmoid(z[3 * hidden + k]);
            c[k] = f * c[k] + i * g;
            y[k] = o * c[k].tanh();
        }
    }
    y
}

#[test]
fn multi_step_lstm_matches_scalar_recurrence() {
    let (features, steps, hidden) = (3, 7, 4);
    for seed in 0..10 {
        let net = Network::new(
            Shape::Seq { features, steps },
            vec![
                LayerSpec::Lstm { inputs: features, hidden },
                LayerSpec::SigmoidUnit { inputs: hidden },
            ],
            seed,
        )
        .unwrap();
        let p = net.flat_values();
        let (v, a) = (&p[p.len() - 1 - hidden..p.len() - 1], p[p.len() - 1]);
        let (x, _) = batch(5, features * steps, 50 + seed);
        let got = net.forward(x.view()).unwrap();
        for (row, &g) in x.outer_iter().zip(&got) {
            let y = reference_lstm(row.as_slice().unwrap(), features, steps, hidden, &p);
            let z: f64 = y.iter().zip(v).map(|(y, v)| y * v).sum::<f64>() + a;
            assert!((g - sigmoid(z)).abs() < 1e-12, "seed {seed}");
        }
    }
}

#[test]
fn duplicating_the_batch_leaves_gradients_unchanged() {
    let dims = reduced_dims();
    let (input, layers) = ModelKind::LstmCnnSmall.architecture(&dims).unwrap();
    let mut net = Network::new(input, layers, 4).unwrap();
    let (x, y) = batch(5, dims.n_features(), 11);
    net.zero_grad();
    let l1 = net.backward(x.view(), &y).unwrap();
    let g1 = net.flat_grads();
    let x2 = ndarray::concatenate![ndarray::Axis(0), x, x];
    let y2: Vec<f64> = y.iter().chain(&y).copied().collect();
    net.zero_grad();
    let l2 = net.backward(x2.view(), &y2).unwrap();
    let g2 = net.flat_grads();
    assert!((l1 - l2).abs() < 1e-14);
    for (a, b) in g1.iter().zip(&g2) {
        assert!((a - b).abs() <= 1e-13 * a.abs().max(1e-3), "{a} vs {b}");
    }
}

#[test]
fn repeated_backward_accumulates() {
    let (input, layers) = layer_cases().remove(0);
    let mut net = Network::new(input, layers, 2).unwrap();
    let (x, y) = batch(4, 5, 3);
    net.zero_grad();
    net.backward(x.view(), &y).unwrap();
    let once = net.flat_grads();
    net.backward(x.view(), &y).unwrap();
    for (a, b) in once.iter().zip(net.flat_grads()) {
        assert!((2.0 * a - b).abs() < 1e-15);
    }
}
