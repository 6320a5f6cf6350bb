//! Localization of perturbations on the interior curve and minimization
//! of the linearized misfit over support parameters and amplitude.

mod cost;
mod optimize;
mod peaks;
mod reconstruct;

pub use cost::*;
pub use optimize::*;
pub use peaks::*;
pub use reconstruct::*;
