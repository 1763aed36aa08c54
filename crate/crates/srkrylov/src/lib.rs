//! Short-recurrence Krylov subspace recycling.
//!
//! Sequences `A·x⁽ⁱ⁾ = b⁽ⁱ⁾` with a fixed operator are solved one after another.
//! The first solve produces a compact payload: Sonneveld-space data for
//! [`sridr`], or a compressed Krylov basis ([`shortrep::ShortRepresentation`])
//! for the bi-Lanczos family. Later right-hand sides are projected with the
//! payload and optionally improved by orthogonality-preserving IDR cycles
//! ([`apost`]).
//!
//! All kernels are generic over [`Scalar`]; the aliases below fix `f64`.

pub mod apost;
pub mod blocking;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod payload;
pub mod precond;
pub mod problems;
pub mod scalar;
pub mod shortrep;
pub mod solvers;
pub mod sridr;

pub use error::{Error, LinalgError, Result};
pub use scalar::{RealScalar, Scalar, ScalarKind};

pub type CsrMatrixF64 = linalg::CsrMatrix<f64>;
pub type MatF64 = linalg::Mat<f64>;
pub type SolveReportF64 = solvers::SolveReport<f64>;
pub type BiLanczosDataF64 = solvers::BiLanczosData<f64>;
pub type ShortRepresentationF64 = shortrep::ShortRepresentation<f64>;
pub type SonneveldRecycleDataF64 = sridr::SonneveldRecycleData<f64>;
pub type BlockedRecycleDataF64 = blocking::BlockedRecycleData<f64>;

pub type C64 = num_complex::Complex64;
pub type CsrMatrixC64 = linalg::CsrMatrix<C64>;
