//! Numerical machinery for the capillary Christoffel-Minkowski problem.
//!
//! Given a positive function `phi` on the spherical cap `C_theta`, the solver
//! finds the capillary support function `s` with
//!
//! ```text
//! sigma_k(tau[s]) = phi,      tau[s] = Hess s + s g,
//! ```
//!
//! subject to the Robin boundary condition `d_mu s = cot(theta) s` on the
//! boundary circle `rho = theta`, and reconstructs the strictly convex
//! capillary hypersurface from `s`. The crate also carries a verification
//! layer: structural identities (divergence-free moments, Minkowski-type
//! integral ratios, Alexandrov-Fenchel-type inequalities), convexity
//! monitors, and manufactured-solution factories used by the test suites.
//!
//! Module map:
//! - [`domain`]: discretization of the cap in geodesic polar coordinates
//!   (staggered radial grid, quadrature, coordinate maps).
//! - [`diffops`]: finite-difference calculus on the cap (gradient, covariant
//!   Hessian, Robin traces, ghost-value machinery).
//! - [`hessian_ops`]: elementary symmetric functions of small symmetric
//!   matrices, Newton tensors, Garding cone membership, eigenvalues.
//! - [`geometry`]: support-function geometry (the reference function `ell`,
//!   the tensor `tau`, hypersurface reconstruction, boundary diagnostics,
//!   capillary area measure).
//! - [`linalg`]: banded LU, bordered (constrained + low-rank corrected)
//!   solves, small dense LU, Jacobi eigenvalues, Gauss-Legendre rules.
//! - [`solver`]: Newton iteration, homotopy drivers, translation-point
//!   finder, problem/configuration types, solve reports.
//! - [`validate`]: property checks and manufactured families.
//! - [`io`]: CSV field formats and sampled-data interpolation.

pub mod diffops;
pub mod domain;
pub mod error;
pub mod geometry;
pub mod hessian_ops;
pub mod io;
pub mod linalg;
pub mod par;
pub mod solver;
pub mod validate;

pub use domain::{CapDomain, GridMode, ScalarField, SymTensorField};
pub use error::CapcmError;
pub use geometry::{ell, tau, CapMesh};
pub use solver::{solve_cm, HomotopyMode, ProblemSpec, SolveReport, SolverConfig, Symmetry};
