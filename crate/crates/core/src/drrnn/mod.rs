//! Deeply regularized residual MLP and its cross-validation ensemble.
//!
//! Architecture: input dropout, a dense projection to the block width, a
//! stack of residual blocks (dense, ReLU, residual add, layer norm,
//! dropout) and a dense output layer producing three logits. The default
//! [`HyperParams`] allocate 147,990 learnable scalars.
//!
//! Training is full batch, one Adam step per epoch, keeping the parameter
//! snapshot with the best validation accuracy. Twenty such runs, one per
//! (seed, fold) pair of four stratified 5-fold partitions, form the
//! ensemble; prediction is the argmax of the summed softmax outputs.

mod checkpoint;
mod hyper;
mod model;
mod predict;
mod search;
mod splits;
mod train;

pub use checkpoint::{load_checkpoint, read_manifest, save_checkpoint, write_manifest, CHECKPOINT_KIND};
pub use hyper::HyperParams;
pub use model::{build_model, eval_probe, DrrNet, ModelCheckpoint};
pub use predict::{ensemble_predict, ensemble_predict_batch};
pub use search::{random_search, SearchResult, SearchSpace};
pub use splits::{make_splits, stratified_folds, SplitPair, SplitPlan};
pub use train::{train_ensemble, train_single, LabeledData, TrainOutcome};
