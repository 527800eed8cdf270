//! Canonical-ensemble sampling of compliance-minimization designs.
//!
//! Densities are lifted to particles with momenta and coupled to a
//! Nosé-Hoover chain at a fixed temperature, with the total-volume
//! constraint held by a per-step Lagrange multiplier. Ensemble statistics
//! across a temperature sweep feed the site-entropy, condensation and
//! regime analyses.

// `!(a > b)` rejects NaN along with the failing range; index loops mirror
// the textbook kernels they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod optimizer;
pub mod problem;
pub mod raster;

pub use error::{Error, Result};
