//! Sample pruning for polynomial NARX identification.
//!
//! A reduced NARX model is fitted on all samples, a small dictionary of
//! representative points is learned from its term columns, and mini-batch
//! FastCan keeps the samples most correlated with those atoms. Refitting on
//! the retained samples should reproduce the full-data coefficients.

pub mod datasets;
pub mod dictionary;
pub mod error;
pub mod eval;
pub mod fastcan;
pub mod narx;
pub mod presets;
pub mod pruning;
pub mod samples;
pub mod termlib;

pub use dictionary::{learn_dictionary, Dictionary, KMeansOptions};
pub use error::{Error, Result};
pub use eval::{coefficient_r2, run_trials, sweep, Baseline, TrialSet, TrialSpec};
pub use fastcan::{select_greedy, Selection, SelectionProblem};
pub use narx::{fit, select_terms, ReducedNarxModel};
pub use presets::Preset;
pub use pruning::{minibatch_fastcan, prune_random, PruneMethod, PruneResult};
pub use samples::SampleMatrix;
pub use termlib::{LibraryConfig, TermDescriptor, TermLibrary, TimeSeries};
