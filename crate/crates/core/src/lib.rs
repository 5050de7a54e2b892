//! Time-harmonic waves on the uniform lattice `Z^d` with point defects.
//!
//! * [`brillouin`]: Green coefficients by Brillouin-zone quadrature.
//! * [`scene`]: problem documents and validation.
//! * [`forward`]: interaction matrices, admissibility, forward solves and a
//!   truncated-lattice oracle.
//! * [`inverse`]: all defects consistent with receiver data.
//! * [`cloak`]: defects invisible at the receivers.

pub mod brillouin;
pub mod cloak;
pub mod doc;
pub mod error;
pub mod forward;
pub mod inverse;
pub mod linalg;
pub mod scene;

pub use brillouin::{FrequencySpec, GreenConfig, GreenTable, Site};
pub use error::{Error, Result};
pub use forward::{ForwardSolution, FrequencySystem, Model};
pub use inverse::{InverseOptions, RecoveryResult, RecoveryStatus};
pub use linalg::{CMat, CVec};
pub use num_complex::Complex64;
pub use scene::{DefectVector, Measurement, Scene, Source};
