//! Local L²-bounded commuting projections onto trimmed finite element spaces.
//!
//! The crate is organized bottom-up: [`simplicial`] complexes and cochains,
//! symbolic polynomial forms in [`polyform`], [`quadrature`] and [`densela`]
//! for the numerics, the finite element spaces and extension operators in
//! [`fespace`], the dual weight families in [`weights`] and the projections
//! themselves in [`projection`]. [`suite`] runs the verification checks.

pub mod densela;
pub mod error;
pub mod fespace;
pub mod polyform;
pub mod projection;
pub mod quadrature;
pub mod scalar;
pub mod simplicial;
pub mod suite;
pub mod weights;

pub use error::{FeecError, Result};
