//! Spectral community detection in sparse dynamical graphs.
//!
//! The detector builds the dynamical Bethe-Hessian of a temporal graph at the
//! detectability-threshold coupling, embeds nodes with its negative
//! eigenvectors (or a Chebyshev-filtered random sketch of that eigenspace),
//! and runs k-means per snapshot. A degree-corrected dynamical SBM generator,
//! threshold computations and a non-backtracking spectrum toolkit come along
//! for experiments.

pub mod error;
pub mod graph;
pub mod threshold;
pub mod bethe_hessian;
pub mod ddcsbm;
pub mod eigen;
pub mod fast_embed;
pub mod cluster;
pub mod metrics;
pub mod spectrum;
pub mod pipeline;

pub use error::{Error, Result};
pub use graph::{LabelMatrix, Snapshot, TemporalGraph};
pub use pipeline::{detect, DetectConfig, Detection};
