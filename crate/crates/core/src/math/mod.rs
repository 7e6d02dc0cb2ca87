//! Dense complex linear algebra and quadrature for small dimensions.

mod eigen;
mod expm;
mod lstsq;
mod matrix;
mod quad;

pub use eigen::{eig_values, hermitian_eigen, hermitian_function};
pub use expm::matrix_exp;
pub use lstsq::least_squares;
pub use matrix::{pauli, ComplexMatrix, I, ONE, ZERO};
pub use quad::{integrate, integrate_real, TimeGrid};
