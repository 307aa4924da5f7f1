//! Dense linear algebra and differentiation services.

mod diff;
mod eig;
mod matrix;
mod solve;

pub use diff::{fd_jacobian, jacobian, relative_frobenius, DifferentiableMap, IdentityMap, LinearMap};
pub use eig::{symmetric_eig, EigenDecomposition};
pub use matrix::{dot, norm2, DenseMatrix};
pub use solve::solve_spd;
