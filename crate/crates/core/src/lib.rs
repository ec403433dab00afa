//! Koopman spectral equivalence under delay-coordinate embedding.
//!
//! Measure-preserving torus maps, observables, delay maps `Φ`, finite-section
//! Koopman approximations (EDMD) on both sides of the embedding, and a
//! certificate comparing the two spectra.
//!
//! ```
//! use koopman_delay::prelude::*;
//!
//! let rot = MapSystem::circle_rotation(0.25);
//! let f = Observable::cosine(Domain::Original, 1, 1.0);
//! let phi = EmbeddingMap::new(rot, f, 1).unwrap();
//! let y = phi.embed(&[0.0]).unwrap();
//! assert!((y[0] - 1.0).abs() < 1e-15 && (y[2] + 1.0).abs() < 1e-15);
//! ```

// `!(a <= b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csv_io;
pub mod dynamics;
pub mod edmd;
pub mod embedding;
pub mod equivalence;
pub mod error;
pub mod experiment;
pub mod observables;
pub mod report;
pub mod torus;

mod histogram;
mod linalg;
mod parallel;

pub use error::{Error, Result};
pub use linalg::CMatrix;
pub use num_complex::Complex64;

pub mod prelude {
    pub use crate::dynamics::{sample_invariant, MapSystem, SampleMode, Samples, SystemSpec};
    pub use crate::edmd::{eval_dictionary, fit_koopman, Dictionary, DictionarySpec, KoopmanApproximation};
    pub use crate::embedding::{embedded_snapshots, original_snapshots, EmbeddingMap, SnapshotPairs};
    pub use crate::equivalence::{certify_equivalence, match_spectra, SpectralComparison, Verdict};
    pub use crate::experiment::{parse_config, run_experiment, ExperimentConfig};
    pub use crate::observables::{pullback, Domain, Observable};
    pub use crate::{Complex64, Error, Result};
}
