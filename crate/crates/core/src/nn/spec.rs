use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => fast_tanh(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `y = apply(z)`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Tanh => 2,
            Activation::Identity => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::Relu,
            1 => Activation::Sigmoid,
            2 => Activation::Tanh,
            3 => Activation::Identity,
            _ => return None,
        })
    }
}

/// `tanh` through a single `exp`; measurably faster than libm in the LSTM loops.
#[inline]
pub fn fast_tanh(z: f64) -> f64 {
    if z.abs() < 0.0625 {
        return z.tanh();
    }
    let e = (-2.0 * z.abs()).exp();
    ((1.0 - e) / (1.0 + e)).copysign(z)
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Shape of one sample flowing between layers.
///
/// `Seq` is a `[features × steps]` matrix stored feature-major (the raw epoch
/// layout: channel-major, then time). `Flat` is a plain vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    Seq { features: usize, steps: usize },
    Flat(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Seq { features, steps } => features * steps,
            Shape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Declarative description of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// `y = σ(xW + b)` on the flattened input.
    FullyConnected {
        inputs: usize,
        outputs: usize,
        activation: Activation,
    },
    /// A `channels × 1` filter per map, swept over time.
    SpatialConv {
        channels: usize,
        maps: usize,
        activation: Activation,
    },
    /// Filters spanning every input map over `kernel` consecutive steps.
    TemporalConv {
        maps_in: usize,
        filters: usize,
        kernel: usize,
        stride: usize,
        activation: Activation,
    },
    /// `y(t) = σ(x(t)W + y(t−1)U + b)`; emits the final step.
    SimpleRnn {
        inputs: usize,
        hidden: usize,
        activation: Activation,
    },
    /// Standard LSTM cell; emits the final step's output.
    Lstm { inputs: usize, hidden: usize },
    /// Single sigmoid output cell.
    SigmoidUnit { inputs: usize },
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::FullyConnected {
                inputs, outputs, ..
            } => (inputs + 1) * outputs,
            LayerSpec::SpatialConv { channels, maps, .. } => maps * (channels + 1),
            LayerSpec::TemporalConv {
                maps_in,
                filters,
                kernel,
                ..
            } => filters * (maps_in * kernel + 1),
            LayerSpec::SimpleRnn { inputs, hidden, .. } => (inputs + hidden + 1) * hidden,
            LayerSpec::Lstm { inputs, hidden } => 4 * ((inputs + hidden + 1) * hidden),
            LayerSpec::SigmoidUnit { inputs } => inputs + 1,
        }
    }

    /// Output shape for a given input shape, or a structural error tagged with `layer`.
    pub fn output_shape(&self, input: Shape, layer: usize) -> Result<Shape> {
        let mismatch = |detail: String| Error::Shape { layer, detail };
        match *self {
            LayerSpec::FullyConnected {
                inputs, outputs, ..
            } => {
                if input.len() != inputs {
                    return Err(mismatch(format!(
                        "fully connected expects {inputs} inputs, got {}",
                        input.len()
                    )));
                }
                Ok(Shape::Flat(outputs))
            }
            LayerSpec::SigmoidUnit { inputs } => {
                if input.len() != inputs {
                    return Err(mismatch(format!(
                        "sigmoid unit expects {inputs} inputs, got {}",
                        input.len()
                    )));
                }
                Ok(Shape::Flat(1))
            }
            LayerSpec::SpatialConv { channels, maps, .. } => match input {
                Shape::Seq { features, steps } if features == channels => Ok(Shape::Seq {
                    features: maps,
                    steps,
                }),
                other => Err(mismatch(format!(
                    "spatial conv expects a sequence with {channels} channels, got {other:?}"
                ))),
            },
            LayerSpec::TemporalConv {
                maps_in,
                filters,
                kernel,
                stride,
                ..
            } => {
                if kernel == 0 || stride == 0 {
                    return Err(mismatch("kernel and stride must be positive".into()));
                }
                match input {
                    Shape::Seq { features, steps } if features == maps_in && steps >= kernel => {
                        Ok(Shape::Seq {
                            features: filters,
                            steps: (steps - kernel) / stride + 1,
                        })
                    }
                    other => Err(mismatch(format!(
                        "temporal conv expects {maps_in} maps with at least {kernel} steps, got {other:?}"
                    ))),
                }
            }
            LayerSpec::SimpleRnn { inputs, hidden, .. } | LayerSpec::Lstm { inputs, hidden } => {
                match input {
                    Shape::Seq { features, steps } if features == inputs && steps > 0 => {
                        Ok(Shape::Flat(hidden))
                    }
                    other => Err(mismatch(format!(
                        "recurrent layer expects a sequence with {inputs} features per step, got {other:?}"
                    ))),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_counts() {
        let fc = LayerSpec::FullyConnected {
            inputs: 3,
            outputs: 2,
            activation: Activation::Identity,
        };
        assert_eq!(fc.param_count(), 8);
        assert_eq!(LayerSpec::Lstm { inputs: 55, hidden: 30 }.param_count(), 10_320);
        assert_eq!(LayerSpec::SigmoidUnit { inputs: 30 }.param_count(), 31);
        let sc = LayerSpec::SpatialConv {
            channels: 55,
            maps: 10,
            activation: Activation::Relu,
        };
        assert_eq!(sc.param_count(), 560);
        let tc = LayerSpec::TemporalConv {
            maps_in: 10,
            filters: 13,
            kernel: 5,
            stride: 5,
            activation: Activation::Relu,
        };
        assert_eq!(tc.param_count(), 663);
        let rnn = LayerSpec::SimpleRnn {
            inputs: 4,
            hidden: 3,
            activation: Activation::Tanh,
        };
        assert_eq!(rnn.param_count(), 24);
    }

    #[test]
    fn temporal_conv_positions() {
        let tc = LayerSpec::TemporalConv {
            maps_in: 10,
            filters: 13,
            kernel: 5,
            stride: 5,
            activation: Activation::Relu,
        };
        let out = tc
            .output_shape(Shape::Seq { features: 10, steps: 25 }, 1)
            .unwrap();
        assert_eq!(out, Shape::Seq { features: 13, steps: 5 });
        assert_eq!(out.len(), 65);
    }

    #[test]
    fn mismatch_reports_layer_index() {
        let fc = LayerSpec::FullyConnected {
            inputs: 10,
            outputs: 2,
            activation: Activation::Relu,
        };
        match fc.output_shape(Shape::Flat(9), 3) {
            Err(Error::Shape { layer, .. }) => assert_eq!(layer, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn fast_tanh_matches_libm() {
        for i in -4000..=4000 {
            let z = i as f64 * 0.005;
            assert!((fast_tanh(z) - z.tanh()).abs() < 1e-15, "z={z}");
        }
        assert_eq!(fast_tanh(0.0), 0.0);
        assert_eq!(fast_tanh(1e3), 1.0);
    }
}
