//! Reversible row encoding for the generator and critic, plus the simple
//! scalers used by the evaluation metrics.

mod encoder;
mod gmm;
mod scaling;

pub use encoder::{
    decode_numerical, encode_numerical, ColumnSpan, ColumnTransform, DataTransformer, EncodedLayout, SpanKind,
};
pub use gmm::{fit_gmm, GmmConfig, GmmFit, GmmModel, DEGENERATE_STD};
pub use scaling::{label_decode, label_encode, minmax_fit_apply, MinMax};
