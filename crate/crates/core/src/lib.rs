//! Coded caching with a priced placement phase.
//!
//! A service provider with `N` files and `K` users pre-loads user caches
//! off-peak, paying `ρ·r^α` per unit multicast to `r` users, then serves
//! `K` distinct requests at peak time with XOR-coded multicasts. This crate
//! finds the placement minimizing the peak rate subject to the off-peak
//! rate not exceeding it:
//!
//! * [`model`]: instance, cost model, rates, γ/σ/q thresholds.
//! * [`closed_form`]: regime classification and the optimal allocation.
//! * [`oracle`]: exhaustive vertex enumeration of the same LP.
//! * [`sim`]: byte-level placement, delivery and decoding.
//! * [`verify`] and [`sweep`]: grid cross-checks and figure datasets.
//!
//! The optimization core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the simulator and sweeps use.

pub mod closed_form;
pub mod error;
pub mod model;
pub mod oracle;
pub mod scalar;
pub mod sim;
pub mod sweep;
pub mod verify;

pub use closed_form::{
    classify_regime, optimal_type_single, solve, uncoded_baseline, uncoded_is_optimal,
    OptimalSolution, Regime,
};
pub use error::{Error, Result};
pub use model::{binom, objective, SystemConfig, Thresholds, TypeAllocation};
pub use oracle::{check_claims, enumerate_vertices, oracle_solve, ClaimsReport, Vertex, VertexKind};
pub use scalar::Scalar;

/// Double-precision instance.
pub type Config = SystemConfig<f64>;
/// Double-precision allocation.
pub type Allocation = TypeAllocation<f64>;
/// Double-precision solution.
pub type Solution = OptimalSolution<f64>;
/// Single-precision instance.
pub type Config32 = SystemConfig<f32>;
/// Single-precision solution.
pub type Solution32 = OptimalSolution<f32>;
