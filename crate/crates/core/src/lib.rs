//! Numerical machinery for quasilinear problems with variable exponents.
//!
//! The crate is organised around a 1D uniform grid: nodal functions with
//! zero-Dirichlet traces, cell-centered gradients and midpoint quadrature.
//! On top of that sit the variable-exponent Lebesgue modulars and Luxemburg
//! norms ([`vxspace`]), p(x)-homogeneous operator kernels and their sampling
//! probes ([`opkernel`]), pointwise and integral inequality checks
//! ([`picone`]), energy-minimization solvers for several quasilinear elliptic
//! families ([`elliptic`]) and the implicit Euler scheme for the fast
//! diffusion equation with contraction and comparison verification ([`fde`]).

// Negated comparisons like `!(x > 0.0)` are load-bearing: they reject NaN
// alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elliptic;
pub mod expr;
pub mod fde;
pub mod grid;
pub mod opkernel;
pub mod picone;
pub mod synth;
pub mod vxspace;
