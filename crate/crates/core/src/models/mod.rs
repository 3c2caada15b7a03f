//! The six classifiers and a uniform scoring interface.

mod lda;

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

pub use lda::{lda_fit, LdaModel, PINV_CUTOFF};

use crate::data::EpochSet;
use crate::error::{Error, Result};
use crate::nn::{self, checkpoint, Activation, LayerSpec, Network, Shape, TrainSchedule, TrainingLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lda,
    Cnn,
    LstmLarge,
    LstmSmall,
    LstmCnnLarge,
    LstmCnnSmall,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Lda,
        ModelKind::Cnn,
        ModelKind::LstmLarge,
        ModelKind::LstmSmall,
        ModelKind::LstmCnnLarge,
        ModelKind::LstmCnnSmall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lda => "lda",
            ModelKind::Cnn => "cnn",
            ModelKind::LstmLarge => "lstm_large",
            ModelKind::LstmSmall => "lstm_small",
            ModelKind::LstmCnnLarge => "lstm_cnn_large",
            ModelKind::LstmCnnSmall => "lstm_cnn_small",
        }
    }

    pub fn is_network(self) -> bool {
        self != ModelKind::Lda
    }

    /// Parameter count published for this architecture.
    pub fn published_param_count(self) -> usize {
        match self {
            ModelKind::Lda => 1375,
            ModelKind::Cnn => 7924,
            ModelKind::LstmLarge => 62_501,
            ModelKind::LstmSmall => 10_351,
            ModelKind::LstmCnnLarge => 49_041,
            ModelKind::LstmCnnSmall => 5511,
        }
    }

    /// Input shape and layer stack of a network kind; `None` for LDA.
    pub fn architecture(self, dims: &ModelDims) -> Option<(Shape, Vec<LayerSpec>)> {
        let input = Shape::Seq {
            features: dims.channels,
            steps: dims.samples,
        };
        let spatial = LayerSpec::SpatialConv {
            channels: dims.channels,
            maps: dims.spatial_maps,
            activation: Activation::Relu,
        };
        let lstm = |inputs, hidden| LayerSpec::Lstm { inputs, hidden };
        let layers = match self {
            ModelKind::Lda => return None,
            ModelKind::LstmSmall => vec![
                lstm(dims.channels, dims.lstm_small),
                LayerSpec::SigmoidUnit { inputs: dims.lstm_small },
            ],
            ModelKind::LstmLarge => vec![
                lstm(dims.channels, dims.lstm_large),
                LayerSpec::SigmoidUnit { inputs: dims.lstm_large },
            ],
            ModelKind::LstmCnnSmall => vec![
                spatial,
                lstm(dims.spatial_maps, dims.lstm_small),
                LayerSpec::SigmoidUnit { inputs: dims.lstm_small },
            ],
            ModelKind::LstmCnnLarge => vec![
                spatial,
                lstm(dims.spatial_maps, dims.lstm_large),
                LayerSpec::SigmoidUnit { inputs: dims.lstm_large },
            ],
            ModelKind::Cnn => {
                let positions = dims.samples.saturating_sub(dims.kernel) / dims.stride.max(1) + 1;
                let [fc1, fc2] = dims.fc_widths;
                vec![
                    spatial,
                    LayerSpec::TemporalConv {
                        maps_in: dims.spatial_maps,
                        filters: dims.temporal_filters,
                        kernel: dims.kernel,
                        stride: dims.stride,
                        activation: Activation::Relu,
                    },
                    LayerSpec::FullyConnected {
                        inputs: dims.temporal_filters * positions,
                        outputs: fc1,
                        activation: Activation::Relu,
                    },
                    LayerSpec::FullyConnected {
                        inputs: fc1,
                        outputs: fc2,
                        activation: Activation::Relu,
                    },
                    LayerSpec::SigmoidUnit { inputs: fc2 },
                ]
            }
        };
        Some((input, layers))
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown model {s:?}; expected one of {}",
                    ModelKind::ALL.map(|k| k.name()).join(", ")
                ))
            })
    }
}

/// Layer sizes shared by the network kinds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelDims {
    pub channels: usize,
    pub samples: usize,
    pub spatial_maps: usize,
    pub temporal_filters: usize,
    pub kernel: usize,
    pub stride: usize,
    /// Hidden widths of the two fully connected CNN layers.
    pub fc_widths: [usize; 2],
    pub lstm_small: usize,
    pub lstm_large: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            channels: 55,
            samples: 25,
            spatial_maps: 10,
            temporal_filters: 13,
            kernel: 5,
            stride: 5,
            fc_widths: [50, 20],
            lstm_small: 30,
            lstm_large: 100,
        }
    }
}

impl ModelDims {
    pub fn n_features(&self) -> usize {
        self.channels * self.samples
    }
}

/// A trained or trainable classifier `f(x)`; higher means more target-like.
#[derive(Debug, Clone, PartialEq)]
pub enum Scorer {
    Lda(LdaModel),
    Net(Network),
}

impl Scorer {
    pub fn build(kind: ModelKind, dims: &ModelDims, seed: u64) -> Result<Scorer> {
        match kind.architecture(dims) {
            None => Ok(Scorer::Lda(LdaModel::new(dims.n_features()))),
            Some((input, layers)) => Ok(Scorer::Net(Network::new(input, layers, seed)?)),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Scorer::Lda(m) => m.n_features(),
            Scorer::Net(n) => n.param_count(),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Scorer::Lda(m) => m.n_features(),
            Scorer::Net(n) => n.input_shape().len(),
        }
    }

    pub fn score(&self, epoch: &[f64]) -> Result<f64> {
        match self {
            Scorer::Lda(m) => m.score(epoch),
            Scorer::Net(n) => {
                let row = ArrayView2::from_shape((1, epoch.len()), epoch)
                    .map_err(|e| Error::InvalidData(e.to_string()))?;
                Ok(n.forward(row)?[0])
            }
        }
    }

    /// Scores every row of `[epochs, features]`.
    pub fn score_batch(&self, rows: ArrayView2<f64>) -> Result<Vec<f64>> {
        match self {
            Scorer::Lda(m) => m.score_batch(rows),
            Scorer::Net(n) => {
                let mut out = Vec::with_capacity(rows.nrows());
                for start in (0..rows.nrows()).step_by(256) {
                    let end = (start + 256).min(rows.nrows());
                    out.extend(n.forward(rows.slice(ndarray::s![start..end, ..]))?);
                }
                Ok(out)
            }
        }
    }

    pub fn score_epochs(&self, epochs: &EpochSet) -> Result<Vec<f64>> {
        self.score_batch(epochs.features())
    }

    /// Fits LDA in closed form (empty log) or runs `schedule` on a network.
    pub fn train(&mut self, epochs: &EpochSet, schedule: &TrainSchedule) -> Result<TrainingLog> {
        if epochs.is_empty() {
            return Err(Error::Empty("training set"));
        }
        match self {
            Scorer::Lda(m) => {
                *m = lda_fit(epochs.features(), &epochs.labels)?;
                Ok(TrainingLog::default())
            }
            Scorer::Net(n) => nn::fit(n, epochs.features(), &epochs.labels_f64(), schedule),
        }
    }

    /// Continues training a network on calibration data (default: 30 epochs at 1e-4).
    pub fn fine_tune(&mut self, calibration: &EpochSet, schedule: &TrainSchedule) -> Result<TrainingLog> {
        match self {
            Scorer::Lda(_) => Err(Error::Config("LDA cannot be fine-tuned".into())),
            Scorer::Net(_) => self.train(calibration, schedule),
        }
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        match self {
            Scorer::Lda(m) => m.write(w),
            Scorer::Net(n) => checkpoint::write_network(n, w),
        }
    }

    /// Reads either checkpoint kind, dispatching on the magic bytes.
    pub fn read<R: Read>(r: &mut R, n_features: usize) -> Result<Scorer> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        let mut chained = magic.as_slice().chain(r);
        if magic == lda::MAGIC {
            Ok(Scorer::Lda(LdaModel::read(&mut chained, n_features)?))
        } else {
            Ok(Scorer::Net(checkpoint::read_network(&mut chained)?))
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path, n_features: usize) -> Result<Scorer> {
        Scorer::read(&mut BufReader::new(File::open(path)?), n_features)
    }
}
