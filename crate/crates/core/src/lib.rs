//! Tabular synthetic data: a conditional WGAN-GP generator with mode-specific
//! normalization and optional PCA-space moment matching, an evaluation suite
//! covering utility, joint, column-pair and marginal fidelity, and a
//! resumable sample-size sweep harness.

pub mod data;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod synth;
pub mod transform;
mod util;

pub use data::{ColumnData, ColumnKind, ColumnSpec, Schema, SubsetSize, Table, Task};
pub use error::{Error, Result};
pub use metrics::{EvalConfig, Metric, MetricReport};

pub use synth::{SynthModel, TrainConfig, Variant};
