//! Numerical laboratory for the extended multi-component Toda hierarchy.
//!
//! Matrix fields live on a [`Lattice`] of `M` coarse cells refined `r` times.
//! [`ShiftOperator`] holds difference operators `Σ X_j(x) Λ^j`, from which the
//! dressing pair, Lax flows, Darboux transformations and the two Poisson
//! structures are built.

pub mod darboux;
pub mod diffop;
pub mod dressing;
pub mod error;
pub mod flows;
pub mod hamiltonian;
pub mod lattice;
pub mod random;
pub mod verify;

pub use darboux::{darboux_chain, darboux_nfold, DarbouxResult, Jet, TimeValue, VacuumWave};
pub use diffop::{BandOperator, Direction, SeriesOperator, ShiftOperator};
pub use dressing::{DressingPair, LaxState};
pub use error::{EmthError, Result};
pub use flows::{integrate, lax_rhs, rk4_step, Family, FlowOptions, FlowSpec, Trajectory};
pub use hamiltonian::{Density, GradientField, Structure, FLOW_HAMILTONIAN_OFFSET};
pub use lattice::{Boundary, Lattice, Mat, MatrixField, MeanPolicy, SumVariant};
pub use verify::{catalog, run_suite, ClaimResult, Suite, SuiteConfig, SuiteReport};
