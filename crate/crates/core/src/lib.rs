//! PSD-relaxed lifted MPC.
//!
//! The state and input are lifted into second-moment coordinates so that disk
//! keep-out constraints become linear. A per-stage moment matrix is kept
//! positive semidefinite by ADMM consensus, and every primal step is a lifted
//! LQR problem solved with cached steady-state Riccati quantities. After each
//! solve a trace-gap test certifies whether the planned position is provably
//! outside every obstacle.

pub mod certificate;
pub mod cones;
pub mod eig;
pub mod error;
pub mod lifting;
pub mod linalg;
pub mod riccati;
pub mod solver;

pub use certificate::{certify, safe_step, CertificateReport};
pub use error::{Error, Result};
pub use lifting::{CostForm, LiftedCost, LiftedSystem, LinearSystem, PsdBlock};
pub use riccati::RiccatiCache;
pub use solver::{Disk, Solution, Solver, SolverConfig};
