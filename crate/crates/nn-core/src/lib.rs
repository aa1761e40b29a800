//! Minimal deterministic neural-network engine.
//!
//! Everything a searched CNN architecture can express — valid convolution
//! with optional batch normalization and dropout, ReLU, max/avg pooling,
//! softmax — plus an LSTM with backpropagation through time, softmax
//! cross-entropy, momentum SGD, and a finite-difference gradient checker.
//! All randomness flows through explicitly passed seeded generators; there
//! is no global state.

mod checkpoint;
mod conv;
mod error;
mod gradcheck;
mod init;
mod layer;
mod loss;
mod lstm;
mod norm;
mod optim;
mod pool;
mod real;
mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint, MAGIC};
pub use conv::conv_out_dim;
pub use error::{NnError, Result};
pub use gradcheck::{
    gradient_check, GradCheckReport, GradCheckTarget, LayerCheck, LstmCheck, SoftmaxCeCheck,
    FD_STEP,
};
pub use init::fan_in_uniform;
pub use layer::{
    commit_batchnorm, layer_backward, layer_forward, softmax_channels, ConvSpec, ForwardCache,
    LayerGrads, LayerKind, LayerParams, Mode,
};
pub use loss::{softmax_cross_entropy, LossOutput};
pub use lstm::{
    lstm_backward, lstm_forward, Gate, GateParams, LstmCache, LstmGrads, LstmParams, GATE_COUNT,
};
pub use norm::{BatchNormParams, BN_EPS, BN_MOMENTUM};
pub use optim::{sgd_update, SgdConfig};
pub use pool::PoolSpec;
pub use real::Real;
pub use tensor::{Dims4, Tensor4};
