//! Heavy-tailed compound densities on uniform grids.

// `!(x > 0.0)` is the NaN-rejecting form used for parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod asymptotics;
pub mod checks;
pub mod compound;
pub mod families;
pub mod grid;
pub mod kernel;
pub mod randomwalk;
pub mod registry;

pub use error::{Error, Result};
pub use families::{FamilySpec, MixtureComponent};
pub use grid::{AtomPlusDensity, GridDensity, GridSpec};
pub use kernel::{discretize, CellIntegral, Kernel};
