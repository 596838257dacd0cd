//! Semiclassical (WKB) approximation of the scaled Schrödinger equation
//!
//! ```text
//! i eps d_t psi = -eps^2 / 2 Laplace psi + V(x) psi,   psi(0) = a_in exp(i S_in / eps)
//! ```
//!
//! built from the Hamiltonian flow of `H = |xi|^2 / 2 + V(x)`, together with a
//! split-step Fourier reference solver and a discrete Wigner transform used to
//! validate it.

// `!(v > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod derivatives;
mod error;

pub mod maslov;
pub mod phase_space;
pub mod ray_map;
pub mod reference;
pub mod wigner;
pub mod wkb;

pub use error::{Error, Result};
