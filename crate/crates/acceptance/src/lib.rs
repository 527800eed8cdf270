//! Reference implementations that share no numerical code with the library
//! they check: a dense Gauss-quadrature finite-element solve, compliance in
//! double-double precision, double-exponential quadrature of the partition
//! integrals, and exhaustive search over discretized designs.

pub mod brute;
pub mod fem;
pub mod quad;
