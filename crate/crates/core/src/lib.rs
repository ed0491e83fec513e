//! Mimetic spectral element discretization of steady anisotropic diffusion
//! (Darcy flow) on structured quadrilateral meshes, in direct (nodal
//! potential) and mixed (flux plus cell potential) form.
//!
//! The incidence operators in [`topology`] are integer and metric-free; all
//! geometry and material data enter through the mass matrices in
//! [`assembly`].

pub mod assembly;
pub mod basis1d;
pub mod cases;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod output;
pub mod postproc;
pub mod quadrature;
pub mod solvers;
pub mod topology;

pub use error::{Error, Result};
