//! Small dense-network engine with manual backpropagation.

pub mod checkpoint;
pub mod gradcheck;
pub mod ops;
pub mod optim;
pub mod params;

pub use gradcheck::{grad_check_at, GradCheckReport};
pub use ops::{
    dense_backward, dense_forward, relu_backward, relu_forward, soft_cross_entropy, softce_loss_and_grad,
    softmax_forward, DenseLayer, Init, Mlp, MlpCache,
};
pub use optim::{adam_step, l1_penalty, l1_penalty_and_grad, Adam, AdamConfig, AdamMoments};
pub use params::{Param, ParamEntry, ParamId, ParamKind, ParamStore};
