//! Test matrices, right-hand-side sequences and Matrix Market I/O.

mod direct;
mod gen;
mod mtx;
mod rhs;

pub use direct::{cond1_estimate, BandLu};
pub use gen::{gen_cdr3d, gen_poisson2d, gen_tridiag, CdrParams};
pub use mtx::{parse_matrix_market, read_matrix_market, write_matrix_market, write_matrix_market_to};
pub use rhs::{gen_rhs_sequence, ProblemInstance};
