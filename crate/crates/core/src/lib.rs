//! Reducibility of quasi-periodically forced linear Schrödinger operators on
//! spheres: truncated block-operator algebra, regularization, KAM iteration,
//! measure estimates and time evolution.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::manual_is_multiple_of)]

pub mod block;
pub mod error;
pub mod evolution;
pub mod kam;
pub mod linalg;
pub mod measure;
pub mod pipeline;
pub mod regularization;
pub mod spectral;
pub mod suites;

pub use block::{BlockLayout, BlockOperator, NormParams, OmegaGrid, StateVector};
pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
pub use spectral::{HarmonicIndex, PotentialSpec, SphereSpec};
