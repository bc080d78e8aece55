//! Chain-function lower-bound constructions for finite-sum optimization.
//!
//! Hard instances are built from tridiagonal chain functions embedded into
//! orthogonal coordinate blocks. An instrumented incremental first-order
//! oracle tracks, per block, how far along the chain any algorithm has
//! progressed, and turns that into a certified floor on the attainable
//! optimality gap or gradient norm.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod math;

pub mod chainfun;
pub mod instance;
pub mod oracle;
pub mod solvers;
pub mod tridiag;
pub mod verify;

pub use chainfun::ChainFunctionSpec;
pub use instance::{Family, FiniteSumInstance};
