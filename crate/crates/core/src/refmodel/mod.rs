//! Dense softmax head trained with AdaMax on frozen-backbone features.

pub mod adamax;
pub mod head;
pub mod train;

pub use adamax::{adamax_step, AdaMaxState};
pub use head::{argmax, loss_and_grad, predict, softmax, LinearHead};
pub use train::{
    cross_validate, train_fold, train_head, CrossValidation, FoldOutcome, HeadTrainConfig,
    HeadTrainer, TrainFeatures,
};
