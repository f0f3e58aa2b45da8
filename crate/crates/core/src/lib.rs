//! Consistent orientation of eigenvector matrices and the directional
//! statistics built on top of it.
//!
//! * [`matcore`]: dense matrices, Givens rotations, Jacobi eigensolver.
//! * [`orientation`]: `Rᵀ V S = I` factorization with the arcsin and modified
//!   arctan2 angle solvers, reconstruction, reflection untwisting.
//! * [`dirstats`]: participation scores, resultant-vector filtering of
//!   eigenbasis series, static stabilization.
//! * [`rmt`]: Marchenko-Pastur density and informative-mode classification,
//!   rotate-away shrinkage of the noise subspace.
//! * [`correlation`]: correlation reconstruction and dispersion reports.
//! * [`synth`]: seeded generators used as fixtures and test oracles.

pub mod correlation;
pub mod dirstats;
pub mod error;
pub mod matcore;
pub mod orientation;
pub mod par;
pub mod rmt;
pub mod synth;

pub use error::{Error, Result};
pub use matcore::Matrix;
pub use orientation::{
    generate_oriented_eigenvectors, orient_eigenvectors, AngleMatrix, EigenSystem, Method,
    OrientationResult, ReflectionVec,
};
pub use par::Execution;
