//! Conditional WGAN-GP tabular generators: the `ctgan` baseline and the two
//! moment-matching variants (`margctgan` in PCA space, `ctgan-raw` in the
//! encoded space).

mod cond;
mod io;
mod loss;
mod model;
mod pca;

pub use cond::{CondBatch, CondSampler, RowIndex};
pub use io::{from_bytes, load, save, to_bytes, FORMAT_VERSION};
pub use loss::{batch_moments, cond_loss, cond_loss_logit_grad, marg_loss, marg_loss_with_grad, MargLoss, MomentTarget, Projection};
pub use model::{train, train_with, EpochStats, SynthModel, TrainConfig, TrainOptions, Variant};
pub use pca::{fit_pca, PcaTransform, RANK_TOL};
