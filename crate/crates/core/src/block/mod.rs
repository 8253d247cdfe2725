//! Truncated φ-dependent block operators, their norms and algebra.

pub mod dense;
mod dump;
mod layout;
mod lie;
mod norms;
mod omega;
mod operator;
mod product;
mod state;
mod structure;

pub use dump::{read_dump, write_dump};
pub use layout::BlockLayout;
pub(crate) use lie::series_from;
pub use lie::{
    adjoint_series, commutator_with_laplacian, conjugate_operator, lie_exponential, Series,
};
pub use norms::{
    beta_norm, bracket, bracket_k, decay_norm, hs_norm, sobolev_norm, BlockNorms, NormParams,
};
pub use omega::{lipschitz_norm, LipschitzNorm, NormKind, OmegaGrid};
pub use operator::{
    for_each_in_ball, mode_norm, mode_norm_sq, modes_in_ball, neg_mode, BlockOperator, Mode, Side,
};
pub use product::{commutator, compose, compose_tracked, product, ProductPath, TrackedProduct};
pub use state::{apply, StateVector};
pub use structure::{adjoint_defect, off_block_defect, structure_check, symmetrize, StructureKind};
