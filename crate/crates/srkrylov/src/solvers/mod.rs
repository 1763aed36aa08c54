//! First-system solvers that also emit recycling payloads.

mod idr;
mod lanczos;
mod report;
mod rgcr;

pub use idr::{idr_s_solve, mi09_solve, random_shadow, Capture, IdrOptions, RelaxPolicy};
pub(crate) use idr::{run_engine, EngineSetup};
pub(crate) use lanczos::check_hermitian;
pub use lanczos::{bicg_bilanczos, biortho_defect, sym_lanczos_solve, Approach, BiLanczosData, BiLanczosOptions, LanczosData, LanczosMode};
pub use report::{Marker, Recorder, SolveReport};
pub use rgcr::rgcr_solve;
