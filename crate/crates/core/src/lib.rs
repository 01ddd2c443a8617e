//! Phase-space solver for the nonlinear Vlasov–Fokker–Planck equation
//!
//! ```text
//! ∂_t f + v·∇_x f = ∇_v·(T_f ∇_v f + (v − u_f) f)
//! ```
//!
//! on the periodic torus in `x` and a truncated velocity box, together with
//! the (ε, δ)-regularized coefficients, the frozen-coefficient Picard
//! iteration, a McKean–Vlasov particle oracle and a set of audits that turn
//! the structural properties of the equation (conservation, H-theorem,
//! moment and temperature bounds) into machine checks.
//!
//! The crate is `no_std` + `alloc`. The `std` feature adds `std::error::Error`
//! integration, `parallel` spreads per-cell work over a rayon pool. Results
//! are bitwise identical with and without `parallel`, for any pool size.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
mod math;
mod par;

pub mod diagnostics;
pub mod grid;
pub mod kinetics;
pub mod moments;
pub mod particles;
pub mod regularize;
pub mod solver;

pub use error::{Result, VfpError};
pub use grid::{DistField, PhaseGrid, SpatialField, VectorField};
pub use moments::MomentSet;
pub use regularize::{MollifierKernel, RegFields, RegParams};
