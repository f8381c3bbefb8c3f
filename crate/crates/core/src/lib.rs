//! Cone-calculus machinery for the Laplacian on a warped wedge: indicial
//! roots, conormal-symbol recursion and residue operators in a truncated
//! eigenbasis, extension choices with their adjoint pairings, a model-cone
//! sectoriality probe, and a porous-medium solver on the truncated wedge.

pub mod banded;
pub mod cross_section;
pub mod domains;
pub mod error;
pub mod indicial;
pub mod mellin;
pub mod model_cone;
pub mod pme;
pub mod poly;
pub mod rational;
mod tridiag;

pub use error::{Error, Result};
pub use tridiag::SymTridiag;
