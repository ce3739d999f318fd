//! Numerical verification toolkit for isoperimetric-type inequalities of
//! compact spacelike submanifolds in the Minkowski space R^{n+m,k}.
//!
//! The crate is organized along the pipeline that the verification runs:
//!
//! * [`mink`] — signature-aware vectors and the indefinite inner product;
//! * [`linalg`] — slopes, adapted frames and the N+ / N- normal splitting
//!   of a single spacelike subspace;
//! * [`surface`] — parametric immersions and triangle meshes with their
//!   induced metric, second fundamental form, mean curvature and measures;
//! * [`corpus`] — the built-in benchmark surfaces;
//! * [`fem`] — piecewise-linear solver for the Neumann problem
//!   `lap u = c0 (c_f - f)`, `<grad u, eta> = c0`;
//! * [`abp`] — the comparison map `phi(x,y) = grad u(x) + y`, its regions,
//!   Jacobian identities and the finite-eps measure estimate;
//! * [`report`] — the inequality constants, both global checks and the
//!   curvature-defect comparisons.

pub mod abp;
pub mod corpus;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod mink;
pub mod report;
pub mod surface;

pub use error::{Error, Result};
