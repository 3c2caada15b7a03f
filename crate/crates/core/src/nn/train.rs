//! Mini-batch training loop.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::Network;
use super::optim::RmsProp;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub epochs: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub phases: Vec<Phase>,
    pub batch_size: usize,
    pub rmsprop: RmsProp,
    pub shuffle_seed: u64,
    /// Weight of positive (target) samples inside the batch mean; 1.0 = unweighted.
    pub pos_weight: f64,
}

impl TrainSchedule {
    pub fn new(phases: &[(usize, f64)], shuffle_seed: u64) -> Self {
        Self {
            phases: phases
                .iter()
                .map(|&(epochs, learning_rate)| Phase {
                    epochs,
                    learning_rate,
                })
                .collect(),
            batch_size: 64,
            rmsprop: RmsProp::default(),
            shuffle_seed,
            pos_weight: 1.0,
        }
    }

    /// 30 epochs at 1e-3 followed by 30 epochs at 1e-5.
    pub fn standard(shuffle_seed: u64) -> Self {
        Self::new(&[(30, 1e-3), (30, 1e-5)], shuffle_seed)
    }

    /// 30 epochs at 1e-4, used to calibrate a pretrained network on a new subject.
    pub fn fine_tune(shuffle_seed: u64) -> Self {
        Self::new(&[(30, 1e-4)], shuffle_seed)
    }

    pub fn total_epochs(&self) -> usize {
        self.phases.iter().map(|p| p.epochs).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if let Some(p) = self.phases.iter().find(|p| !(p.learning_rate > 0.0)) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                p.learning_rate
            )));
        }
        let r = &self.rmsprop;
        if !(r.rho > 0.0 && r.rho < 1.0) || !(r.eps > 0.0) {
            return Err(Error::Config(format!(
                "rmsprop needs 0 < rho < 1 and eps > 0, got rho={} eps={}",
                r.rho, r.eps
            )));
        }
        if !(self.pos_weight > 0.0) {
            return Err(Error::Config("pos_weight must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Sample-weighted mean batch loss of every epoch, in order.
    pub epoch_losses: Vec<f64>,
}

/// Trains `net` on the rows of `inputs` (one flattened epoch per row).
pub fn fit(
    net: &mut Network,
    inputs: ArrayView2<f64>,
    labels: &[f64],
    schedule: &TrainSchedule,
) -> Result<TrainingLog> {
    schedule.validate()?;
    let n = inputs.nrows();
    if n == 0 {
        return Err(Error::Empty("training set"));
    }
    if labels.len() != n {
        return Err(Error::InvalidData(format!(
            "{n} training rows with {} labels",
            labels.len()
        )));
    }
    let width = inputs.ncols();
    let mut rng = seed::rng(schedule.shuffle_seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = TrainingLog::default();
    let mut xb = Array2::<f64>::zeros((schedule.batch_size, width));
    let mut yb = Vec::with_capacity(schedule.batch_size);
    let mut wb = Vec::with_capacity(schedule.batch_size);
    net.zero_grad();

    for phase in &schedule.phases {
        for _ in 0..phase.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for chunk in order.chunks(schedule.batch_size) {
                let m = chunk.len();
                yb.clear();
                wb.clear();
                for (r, &i) in chunk.iter().enumerate() {
                    xb.row_mut(r).assign(&inputs.row(i));
                    yb.push(labels[i]);
                    wb.push(if labels[i] > 0.5 { schedule.pos_weight } else { 1.0 });
                }
                let batch = xb.slice(ndarray::s![0..m, ..]);
                let weights = (schedule.pos_weight != 1.0).then_some(wb.as_slice());
                let loss = net.backward_weighted(batch, &yb, weights)?;
                schedule.rmsprop.step(net.params_mut(), phase.learning_rate);
                total += loss * m as f64;
            }
            log.epoch_losses.push(total / n as f64);
        }
    }
    Ok(log)
}
