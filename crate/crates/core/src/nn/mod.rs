//! A small dense-network engine: affine + pointwise layers with exact
//! reverse-mode gradients, input gradients and the second-order pass needed
//! by the WGAN gradient penalty.

mod adam;
mod blob;
mod gumbel;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use blob::{decode_params, encode_params, BLOB_VERSION};
pub use gumbel::{gumbel_softmax, gumbel_softmax_with_noise, sample_gumbel, softmax_backward, softmax_rows, GumbelSample};
pub use mlp::{Activation, Dense, ForwardCache, Grads, Mlp, NetSpec, PenaltyOutput, LEAKY_SLOPE};
