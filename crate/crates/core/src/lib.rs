//! Numerical laboratory for free boundary minimal surfaces in Euclidean space.
//!
//! Surfaces are triangle meshes whose constrained boundary slides on an
//! analytic level-set hypersurface. The crate provides the discrete
//! operators, a constrained area-descent solver, the stability eigenproblem,
//! boundary monotonicity profiles, blow-up and reflection tools, Fermi
//! coordinate charts, and a scenario runner that writes deterministic reports.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blowup;
pub mod constraint;
pub mod error;
pub mod fermi;
pub mod harness;
pub mod mesh;
pub mod monotonicity;
pub mod stability;
pub mod variational;

pub use error::{Error, Result};
pub use mesh::{TriangleMesh, Vec3, VertexField};
