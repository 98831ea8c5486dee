//! Synthetic benchmarks with planted supports, and the on-disk formats for
//! matrices, labels and image manifests.

pub mod io;
pub mod manifest;
mod rng;
mod synth;

pub use rng::{seeded_rng, SeededRng};
pub use synth::{
    synth_classification, synth_regression, RegressionData, SplitCounts, SynthSpec,
    VerificationSplit,
};
