//! Multirate generalized additive Runge–Kutta (MrGARK) schemes.
//!
//! - [`tableau`]: base methods, multirate schemes and the flattened
//!   two-partition tableau.
//! - [`couplings`]: coupling constructors (stability-decoupled, mRK,
//!   dense output, additive, MIS).
//! - [`order`]: order-condition residuals and convergence studies.
//! - [`stability`]: algebraic stability and stability decoupling.
//! - [`monotonicity`]: absolute monotonicity radius and incidence checks.
//! - [`integrator`]: macro-steps, Newton stage solves, fixed-step driver.
//! - [`schemes`]: the named catalog.

pub mod analysis;
pub mod couplings;
pub mod error;
pub mod exec;
pub mod integrator;
pub mod io;
pub mod monotonicity;
pub mod order;
pub mod problems;
pub mod schemes;
pub mod stability;
pub mod tableau;

pub use error::{Error, Result};
pub use exec::Execution;
pub use integrator::{integrate, PartitionedIvp, SolverConfig, Stepper, Trajectory};
pub use schemes::{make, Scheme, SchemeId};
pub use tableau::{FlatGarkTableau, Mat, MrGarkScheme, RkTableau, Vector};
