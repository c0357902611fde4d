//! Dense linear algebra, optimizer, eigensolver, special functions and RNG.

mod adam;
mod eigen;
mod gradcheck;
mod matrix;
mod rng;
mod scalar;
mod special;

pub use adam::{adam_step, AdamConfig, AdamState, ParamSlot};
pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use gradcheck::grad_check;
pub use matrix::{dot, sq_dist, DenseMatrix};
pub use rng::{derive_seed, RngStream};
pub use scalar::Real;
pub use special::{chi_square_sf, erfc, gamma_q, ln_gamma, normal_sf};
