//! Simulated "calculators" with partitioned degrees of freedom, a passive
//! observer that decides from output samples alone whether what it sees is a
//! real physical system, and an active prober that falsifies declared models.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calculators;
pub mod dynamics;
pub mod observer;
pub mod prober;
pub mod scalar;
pub mod vec2;

pub use scalar::Real;
pub use vec2::Vec2;

/// Double-precision instantiations used by the observer, prober and CLI.
pub type Vec2d = Vec2<f64>;
pub type World64 = dynamics::World<f64>;
pub type Calculator64 = calculators::Calculator<f64>;
/// Single-precision instantiations.
pub type Vec2f = Vec2<f32>;
pub type World32 = dynamics::World<f32>;
pub type Calculator32 = calculators::Calculator<f32>;
