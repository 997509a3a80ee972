//! Perturbative nonlinear J-matrix scattering for the two-dimensional
//! nonlinear Schrödinger equation with a short-range potential and a
//! ψ^(2n+1) self-interaction.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`]: orthogonal polynomials and special functions;
//! * [`quadrature`]: Gauss rules from the Laguerre Jacobi matrix;
//! * [`linearize`]: linearization tensors C and D;
//! * [`hamiltonian`]: potentials and the linear Hamiltonian matrix;
//! * [`reference`]: sine-like and cosine-like reference coefficients;
//! * [`solver`]: Green's matrices, phase shifts and the perturbative loop.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod hamiltonian;
pub mod linearize;
pub mod quadrature;
pub mod reference;
pub mod solver;
pub mod specfun;

pub use num_complex::Complex64;
