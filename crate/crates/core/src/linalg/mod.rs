//! Small dense linear algebra kernels, generic over [`Real`](crate::Real).

mod eigen;
mod expm;
mod lu;
mod mat;
mod svd;

pub use eigen::{eigenvalues, eigenvectors_for, Eigenvalue};
pub use expm::expm;
pub use lu::{inverse, solve, Lu};
pub use mat::Mat;
pub use svd::{numerical_rank, Svd};
