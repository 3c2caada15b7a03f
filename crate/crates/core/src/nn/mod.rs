//! Differentiable layer primitives, loss, optimizer and gradient verification.

pub mod checkpoint;
pub mod gradcheck;
mod layers;
pub mod loss;
mod network;
pub mod optim;
mod param;
mod spec;
pub mod train;

pub use gradcheck::{grad_check, input_grad_check, GradCheckReport};
pub use loss::{batch_loss, bce_loss};
pub use network::Network;
pub use optim::{rmsprop_step, RmsProp};
pub use param::{ParamKey, ParamTensor, Role};
pub use spec::{sigmoid, Activation, LayerSpec, Shape};
pub use train::{fit, Phase, TrainSchedule, TrainingLog};
