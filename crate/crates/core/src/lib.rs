//! Numerics for grazing-sliding bifurcations of planar Z2-symmetric Filippov systems.
//!
//! The boundary is always the line `y = 0`. The upper field `Z⁺` acts on `y > 0`, the lower
//! field `Z⁻` on `y < 0`. Everything here is `no_std` with `alloc`.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod atlas;
pub mod boundary;
pub mod checks;
pub mod cycles;
pub mod error;
pub mod field;
pub mod integrate;
pub mod models;
pub mod roots;
pub mod variational;

pub use error::{Error, Result};
pub use field::{FilippovSystem, Params, Point, Side, SmoothField};
