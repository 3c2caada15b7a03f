use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;

use super::layers::{self, Cache, Upstream};
use super::loss;
use super::param::{ParamKey, ParamTensor};
use super::spec::{LayerSpec, Shape};
use crate::error::{Error, Result};
use crate::seed;

/// An ordered layer stack ending in a [`LayerSpec::SigmoidUnit`], with a flat
/// parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input: Shape,
    layers: Vec<LayerSpec>,
    /// Input shape of every layer (and the final output shape last).
    shapes: Vec<Shape>,
    params: Vec<ParamTensor>,
    keys: Vec<ParamKey>,
    /// `params[ranges[i].0..ranges[i].1]` belong to layer `i`.
    ranges: Vec<(usize, usize)>,
    seed: u64,
}

struct Trace {
    acts: Vec<Array2<f64>>,
    caches: Vec<Cache>,
}

impl Network {
    /// Validates the shape chain and allocates Glorot-uniform weights (zero biases).
    pub fn new(input: Shape, layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        if !matches!(layers.last(), Some(LayerSpec::SigmoidUnit { .. })) {
            return Err(Error::Config(
                "the final layer must be a sigmoid unit".into(),
            ));
        }
        if let Some(pos) = layers[..layers.len() - 1]
            .iter()
            .position(|l| matches!(l, LayerSpec::SigmoidUnit { .. }))
        {
            return Err(Error::Shape {
                layer: pos,
                detail: "sigmoid unit is only allowed as the final layer".into(),
            });
        }
        let mut shapes = vec![input];
        for (i, layer) in layers.iter().enumerate() {
            let next = layer.output_shape(*shapes.last().expect("non-empty"), i)?;
            shapes.push(next);
        }

        let mut rng = seed::rng(seed);
        let mut params = Vec::new();
        let mut keys = Vec::new();
        let mut ranges = Vec::new();
        for (i, layer) in layers.iter().enumerate() {
            let start = params.len();
            for (role, shape, fans) in layers::param_layout(layer) {
                let mut p = ParamTensor::zeros(shape);
                if let Some((fan_in, fan_out)) = fans {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    p.values
                        .iter_mut()
                        .for_each(|v| *v = rng.random_range(-limit..limit));
                }
                params.push(p);
                keys.push(ParamKey { layer: i, role });
            }
            ranges.push((start, params.len()));
        }

        Ok(Self {
            input,
            layers,
            shapes,
            params,
            keys,
            ranges,
            seed,
        })
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[ParamTensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [ParamTensor] {
        &mut self.params
    }

    pub fn param_keys(&self) -> &[ParamKey] {
        &self.keys
    }

    pub fn param(&self, key: ParamKey) -> Option<&ParamTensor> {
        self.keys.iter().position(|k| *k == key).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, key: ParamKey) -> Option<&mut ParamTensor> {
        self.keys
            .iter()
            .position(|k| *k == key)
            .map(move |i| &mut self.params[i])
    }

    /// Sum of the closed-form per-layer counts.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(ParamTensor::zero_grad);
    }

    /// All parameter values concatenated in store order.
    pub fn flat_values(&self) -> Vec<f64> {
        self.params.iter().flat_map(|p| p.values.iter().copied()).collect()
    }

    pub fn set_flat_values(&mut self, values: &[f64]) -> Result<()> {
        let total: usize = self.params.iter().map(ParamTensor::len).sum();
        if values.len() != total {
            return Err(Error::InvalidData(format!(
                "expected {total} parameter values, got {}",
                values.len()
            )));
        }
        let mut offset = 0;
        for p in &mut self.params {
            let n = p.len();
            p.values.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.params.iter().flat_map(|p| p.grad.iter().copied()).collect()
    }

    fn check_batch(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.input.len() {
            return Err(Error::Shape {
                layer: 0,
                detail: format!(
                    "batch rows have {} values, network expects {:?} ({} values)",
                    batch.ncols(),
                    self.input,
                    self.input.len()
                ),
            });
        }
        Ok(())
    }

    fn run(&self, batch: ArrayView2<f64>) -> Trace {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut caches = Vec::with_capacity(self.layers.len());
        acts.push(batch.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let (lo, hi) = self.ranges[i];
            let (out, cache) = layers::forward(
                layer,
                self.shapes[i],
                &self.params[lo..hi],
                acts[i].view(),
            );
            acts.push(out);
            caches.push(cache);
        }
        Trace { acts, caches }
    }

    /// Probabilities for a `[batch, features * steps]` matrix of flattened epochs.
    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.check_batch(&batch)?;
        if batch.nrows() == 0 {
            return Ok(Vec::new());
        }
        let mut x = batch.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let (lo, hi) = self.ranges[i];
            x = layers::forward(layer, self.shapes[i], &self.params[lo..hi], x.view()).0;
        }
        Ok(x.column(0).to_vec())
    }

    /// Back-propagates `seed` (gradient w.r.t. the final pre-activation, one
    /// value per sample) and returns the input gradient if requested.
    fn propagate(
        &mut self,
        trace: &Trace,
        seed: Array1<f64>,
        need_input_grad: bool,
    ) -> Option<Array2<f64>> {
        let n = self.layers.len();
        let batch = seed.len();
        let mut up = Upstream::PreActivation(
            seed.into_shape_with_order((batch, 1))
                .expect("column seed"),
        );
        let mut dx = None;
        for i in (0..n).rev() {
            let (lo, hi) = self.ranges[i];
            let want = i > 0 || need_input_grad;
            let g = layers::backward(
                &self.layers[i],
                self.shapes[i],
                &mut self.params[lo..hi],
                trace.acts[i].view(),
                trace.acts[i + 1].view(),
                &trace.caches[i],
                up,
                want,
            );
            if i == 0 {
                dx = g;
                break;
            }
            up = Upstream::Output(g.expect("hidden layers always return input gradients"));
        }
        dx
    }

    /// Mean binary log loss over the batch; accumulates `∂loss/∂θ` into the grads.
    pub fn backward(&mut self, batch: ArrayView2<f64>, labels: &[f64]) -> Result<f64> {
        self.backward_weighted(batch, labels, None)
    }

    /// As [`Network::backward`], with optional per-sample weights inside the mean.
    pub fn backward_weighted(
        &mut self,
        batch: ArrayView2<f64>,
        labels: &[f64],
        weights: Option<&[f64]>,
    ) -> Result<f64> {
        self.check_batch(&batch)?;
        let m = batch.nrows();
        if m == 0 {
            return Err(Error::Empty("batch"));
        }
        if labels.len() != m || weights.is_some_and(|w| w.len() != m) {
            return Err(Error::InvalidData(format!(
                "batch of {m} samples with {} labels",
                labels.len()
            )));
        }
        let trace = self.run(batch);
        let probs = trace.acts[self.layers.len()].column(0).to_owned();
        let mut total = 0.0;
        let mut seed = Array1::<f64>::zeros(m);
        for i in 0..m {
            let w = weights.map_or(1.0, |w| w[i]);
            total += w * loss::bce_loss(probs[i], labels[i]);
            seed[i] = w * (probs[i] - labels[i]) / m as f64;
        }
        let mean = total / m as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite("training loss".into()));
        }
        self.propagate(&trace, seed, false);
        Ok(mean)
    }

    /// `∂f(x)/∂x` for every sample in the batch, with parameters held fixed.
    /// Parameter gradients are left untouched.
    pub fn input_gradients(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(&batch)?;
        let m = batch.nrows();
        if m == 0 {
            return Ok(Array2::zeros((0, self.input.len())));
        }
        let mut scratch = self.clone();
        scratch.zero_grad();
        let trace = scratch.run(batch);
        let probs = trace.acts[self.layers.len()].column(0).to_owned();
        let seed = probs.mapv(|p| p * (1.0 - p));
        Ok(scratch
            .propagate(&trace, seed, true)
            .expect("input gradient requested"))
    }

    /// Input gradient for one flattened epoch, reshaped to the input matrix
    /// (`[features × steps]`, or `[1 × n]` for flat inputs).
    pub fn input_gradient(&self, epoch: &[f64]) -> Result<Array2<f64>> {
        let row = ArrayView2::from_shape((1, epoch.len()), epoch)
            .map_err(|e| Error::InvalidData(e.to_string()))?;
        let g = self.input_gradients(row)?;
        let (rows, cols) = match self.input {
            Shape::Seq { features, steps } => (features, steps),
            Shape::Flat(n) => (1, n),
        };
        Ok(g.into_shape_with_order((rows, cols)).expect("input layout"))
    }

    /// Mean loss without touching gradients.
    pub fn loss(&self, batch: ArrayView2<f64>, labels: &[f64]) -> Result<f64> {
        let p = self.forward(batch)?;
        loss::batch_loss(&p, labels)
    }
}
