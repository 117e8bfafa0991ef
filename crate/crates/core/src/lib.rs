//! Moment-method boundary control of the one-dimensional heat equation with
//! an inverse-square potential `μ/x²` on `(0, 1)`.
//!
//! The numerical core is generic over [`Real`]; `f64` is the fast path and
//! [`Mpf`] (MPFR) carries the extended precision that the exponentially
//! ill-conditioned Gram systems need. Concrete aliases for both are exported
//! below.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod biortho;
pub mod cache;
pub mod control;
pub mod error;
pub mod linalg;
pub mod quadrature;
pub mod report;
pub mod scalar;
pub mod simulate;
pub mod specfun;
pub mod spectrum;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::{with_precision, Mpf, Real};
pub use specfun::Precision;

pub type ZeroTable64 = specfun::ZeroTable<f64>;
pub type ZeroTableMp = specfun::ZeroTable<Mpf>;
pub type Spectrum64 = spectrum::Spectrum<f64>;
pub type SpectrumMp = spectrum::Spectrum<Mpf>;
pub type FamilyMp = biortho::BiorthogonalFamily<Mpf>;
pub type ControlMp = control::SynthesizedControl<Mpf>;
