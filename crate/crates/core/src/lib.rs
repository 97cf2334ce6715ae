//! Zero range process on a quenched, randomly oriented ladder graph.

// `!(x >= 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod environment;
mod error;
pub mod measures;
pub mod pde;
pub mod pipeline;
mod scalar;

pub use error::{Result, ZrpError};
pub use scalar::Scalar;

/// Double precision instantiations used by the simulation and pipeline layers.
pub type FugacityTable64 = measures::FugacityTable<f64>;
pub type DensityProfile64 = pde::DensityProfile<f64>;
pub type PDEConfig64 = pde::PDEConfig<f64>;
pub type ExactModel64 = dynamics::ExactModel<f64>;

/// Single precision instantiations of the scalar-generic core.
pub type FugacityTable32 = measures::FugacityTable<f32>;
pub type DensityProfile32 = pde::DensityProfile<f32>;
pub type PDEConfig32 = pde::PDEConfig<f32>;
pub type ExactModel32 = dynamics::ExactModel<f32>;
