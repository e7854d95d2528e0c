//! Local-hidden-state certificates for locally filtered two-qubit Werner
//! states.
//!
//! The crate builds three kinds of certificate (a closed-form mixture near the
//! Werner point, a semidefinite-programming certificate for intermediate
//! entanglement, and a closed-form construction for weakly entangled states)
//! and glues them into a sweep over the filter parameter. Every certificate can
//! be re-checked without the code path that produced it.

pub mod certs;
pub mod conic;
pub mod error;
pub mod lhs_sdp;
pub mod linalg;
pub mod lp;
pub mod measurements;
pub mod report;
pub mod states;
pub mod sweep;

pub use certs::{DecompositionCertificate, Technique};
pub use error::{Error, Result};
pub use lhs_sdp::{EtaSource, LhsSdpCertificate, ShrinkSpec};
pub use linalg::{ComplexMatrix, DensityMatrix, HermitianMatrix, Subsystem, C64};
pub use measurements::{MeasurementSet, Povm};
pub use report::Check;
pub use states::{CanonicalParams, WernerParams};
pub use sweep::{SweepConfig, SweepResult, Verdict, VerdictKind};
