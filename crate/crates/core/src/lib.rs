//! Spectral theory of discrete symplectic systems on a finite interval.
//!
//! The crate works with systems
//!
//! ```text
//! z_k = (S_k + λ V_k) z_{k+1},   V_k = -J Ψ_k S_k,   k = 0, …, N,
//! ```
//!
//! with separated boundary conditions `α z_0 = 0`, `β z_{N+1} = 0`, and
//! computes eigenvalues and orthonormal eigenfunctions, the Weyl–Titchmarsh
//! function `M(λ)`, the Green kernel, solutions of the nonhomogeneous
//! boundary value problem, eigenfunction expansions and the spectral step
//! function together with the integral representation of `M(λ)`.
//!
//! ```
//! use symspec::{families, spectrum, BoundaryMatrix};
//!
//! let sys = families::sl_scalar(&[0.0, 1.0, 2.0, 3.0]).unwrap();
//! let alpha = BoundaryMatrix::first_block(1);
//! let spec = spectrum::eigenvalues(&sys, &alpha, &alpha, spectrum::EIG_TOL).unwrap();
//! assert_eq!(spec.eigenvalues.len(), 1);
//! assert!(spec.eigenvalues[0].lambda.norm() < 1e-9);
//! ```

pub mod bvp;
pub mod cli;
pub mod eigenbasis;
pub mod error;
pub mod families;
pub mod linalg;
pub mod measure;
pub mod propagation;
pub mod spectrum;
pub mod system;
pub mod weyl;

pub use error::{Result, SpectralError};
pub use linalg::{c64, CMatrix, CVector};
pub use system::{BoundaryMatrix, SymplecticSystem, VectorSequence};
