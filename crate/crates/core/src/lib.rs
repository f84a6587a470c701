//! Tagged particle in the simple exclusion process on augmented
//! Galton–Watson trees.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! threads or the command line lives in the `gwex` companion crate.
//!
//! Layout:
//!
//! * [`offspring`]: finite-support offspring laws and the closed-form speeds.
//! * [`tree`]: lazily grown GW/AGW trees, rays, horodistance, ball codes.
//! * [`measures`]: product measures, Palm versions and the tilted samplers.
//! * [`dynamics`]: the exact dual engine, the windowed forward engine,
//!   local drifts and the environment seen from the tagged particle.
//! * [`oracle`]: exact finite-state computations on tiny trees.
//! * [`estimators`]: speed estimates, regenerations, martingale residuals,
//!   stationarity tests.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod measures;
pub mod offspring;
pub mod oracle;
pub mod stats;
pub mod stream;
pub mod tree;

pub use error::{Error, Result};
pub use offspring::OffspringDistribution;
