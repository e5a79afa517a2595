//! Prewhitening-free linear ICA by Newton steps on the coset of GL(N, R)
//! modulo positive componentwise scalings.
//!
//! Each iteration estimates fourth-order statistics of `Y = C X`, builds the
//! second-order model of a scale-invariant kurtosis cost in vectorized form,
//! solves in closed form for a zero-diagonal Δ and updates `C ← e^Δ C`.
//!
//! Two costs are provided: the sum of kurtoses ([`kurtosis`]) and the sum of
//! squared excess kurtoses ([`squared_kurtosis`]). Both plug into the
//! [`model::CostModel`] contract that [`engine::run`] drives.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(x > 0.0)` is deliberate where NaN must take the rejecting branch;
// triangular solves read best with explicit indices.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod engine;
pub mod error;
pub mod eval;
pub mod expm;
pub mod kurtosis;
pub mod mat;
pub mod model;
pub mod moments;
pub mod safeguard;
pub mod squared_kurtosis;
pub mod tensor;

pub use engine::{run, step, SeparationResult, SolverConfig};
pub use error::{Error, Result};
pub use mat::Mat;
pub use model::{CostCase, CostModel, UpdateStep};
pub use moments::{center, estimate_moments, MomentSet, SignalMatrix};
