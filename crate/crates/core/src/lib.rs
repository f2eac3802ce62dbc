//! Chart-level computations for connections over an anchored vector bundle.
//!
//! A vector bundle `V -> M` with an anchor `rho: V -> TM` and a second
//! bundle `E -> M` (vector or affine) are described in a single chart by
//! expression matrices (see [`geometry::BundleSpec`]). On top of that this
//! crate builds:
//!
//! - the rho-prolongation of `E` with its projection, vertical lift and
//!   anchor-like map ([`prolong`]);
//! - rho-connections as a map `h` and as a splitting of the prolongation,
//!   with projectors, the connection map `K` and linearity/affineness
//!   classifiers ([`connection`]);
//! - the bidual picture of an affine connection: extension, restriction,
//!   covariant derivatives and their identities ([`affine`]);
//! - admissible curves and parallel transport by fixed-step RK4
//!   ([`transport`]);
//! - the connection induced by a second-order equation field ([`sode`]).
//!
//! Everything is pure and deterministic; randomized checks take an explicit
//! seed.

pub mod affine;
pub mod connection;
mod error;
pub mod exprlang;
pub mod fixtures;
pub mod geometry;
pub mod linalg;
pub mod prolong;
pub mod sampling;
pub mod sode;
pub mod transport;

pub use error::{Error, Result};
pub use exprlang::{Env, Expr, Var};
pub use geometry::{BasePoint, BundleSpec, EPoint, ETangent, SectionE, SectionV, VVector};
pub use prolong::ProlongedVector;
