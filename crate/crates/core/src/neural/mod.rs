//! Small dense-network engine with hand-written backward passes.
//!
//! Layers operate on row-major batches (`n x features`). Parameters live in
//! flat [`ParamArray`]s so the optimizer, the gradient checker and the
//! checkpoint format can treat them uniformly.

mod gradcheck;
mod layers;
mod optim;
mod param;

pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport, Probe};
pub use layers::{
    dense, dense_backward, dense_param_grads, dropout, dropout_backward, l2_penalty, layer_norm, layer_norm_backward, relu,
    relu_backward, softmax, softmax_xent, softmax_xent_batch, LayerNormCache, LN_EPS,
};
pub use optim::{lr_at, AdamState, LrSchedule};
pub use param::{ParamArray, ParamKind};
