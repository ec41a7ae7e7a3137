//! Geometry and evaluation toolkit for personality steering directions.
//!
//! The crate covers the whole desk-scale pipeline:
//!
//! - [`directions`]: trait direction sets and their JSON / raw file formats.
//! - [`conditioning`]: the six conditioning schemes `C0`..`C5` (identity, soft
//!   whitening, Gram–Schmidt, thresholded and soft projection, Löwdin).
//! - [`diagnostics`]: overlap and signal-retention diagnostics.
//! - [`contrast`]: High−Low judge-score contrast matrices, `T` / `B_max`
//!   summaries and fluency profiles.
//! - [`steersim`]: a synthetic layered world with planted trait correlation
//!   used to run extract → condition → steer → measure without a model.
//! - [`judge`]: scoring client for a chat-completions judge plus an offline mock.

pub mod conditioning;
pub mod contrast;
pub mod diagnostics;
pub mod directions;
mod error;
pub mod fsutil;
pub mod judge;
pub mod linalg;
mod rng;
pub mod steersim;

pub use conditioning::{apply_condition, ConditionedSet, ConditioningSpec, GramMatrix, Scheme};
pub use contrast::{
    ContrastMatrix, JudgeScoreRecord, Polarity, TraitContrastSummary, TraitSummaryRow,
};
pub use diagnostics::GeometryDiagnostics;
pub use directions::{DirectionSet, FileFormat, OCEAN};
pub use error::{Error, Result};
pub use steersim::{SyntheticWorld, WorldConfig};
