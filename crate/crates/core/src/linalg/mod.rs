//! Small numerics toolkit: fixed-size 3D helpers, dense symmetric
//! eigendecomposition, Cholesky solves, CSR matrices and a thick-restart
//! Lanczos solver for the smallest eigenpairs.

pub mod dense;
pub mod lanczos;
pub mod mat3;
pub mod sparse;
pub mod vec3;
