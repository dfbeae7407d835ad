//! Table encoder: column descriptors, a cascaded set-attention network that
//! maps a table to one vector, and masked table modeling pretraining.

pub mod attention;
pub mod error;
pub mod features;
pub mod gradcheck;
pub mod model;
pub mod params;
pub mod synth;
pub mod train;

pub use attention::attention_block;
pub use error::EncoderError;
pub use features::{featurize, ColumnFeatures, META_DIM, NUM_FEATURES};
pub use gradcheck::{grad_check, grad_check_with, GradCheckReport};
pub use model::{encode, loss_and_grad, masked_loss, mtm_loss, MtmLoss, TableEmbedding};
pub use params::EncoderParams;
pub use synth::synthetic_corpus;
pub use train::{corpus_loss, train_from, train_mtm, TrainConfig, TrainReport};
