//! Wigner functions on the discrete cylinder: angle × orbital angular momentum.
//!
//! States live on a finite OAM window; Wigner grids add padding rows in ℓ
//! and sample φ on a uniform grid.

pub mod analysis;
pub mod error;
pub mod io;
pub mod numerics;
pub mod phase_space;
pub mod states;

pub use error::{Error, Result};
