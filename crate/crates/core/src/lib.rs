//! Reconstruction of small inhomogeneities in a 2D Maxwell medium from
//! partial boundary data: mesh generation, edge finite elements, the
//! forward problem, data completion by quasi-reversibility, Taylor
//! sensitivities and the derivative-free inversion.

pub mod completion;
pub mod error;
pub mod fem;
pub mod forward;
pub mod inversion;
pub mod mesh;
pub mod sensitivity;
pub mod support;

pub use error::{Error, Result};
