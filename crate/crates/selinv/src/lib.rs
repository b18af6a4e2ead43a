//! Sparse symmetric selected inversion.
//!
//! Computes the entries of `A⁻¹` restricted to the block nonzero pattern of
//! the triangular factors of `A`, for real or complex symmetric `A`. The
//! pipeline is:
//!
//! 1. read / assemble a sparse symmetric matrix ([`sparse`]),
//! 2. find a fill-reducing symmetric permutation ([`ordering`]),
//! 3. build the elimination tree, supernode partition and block nonzero
//!    structure of the factor ([`symbolic`]),
//! 4. run a supernodal left-looking LU factorization without pivoting
//!    ([`factor`]),
//! 5. normalize the factor and run block selected inversion ([`inverse`]),
//!    either sequentially or on an in-process worker grid with 2D
//!    block-cyclic ownership ([`parallel`]).
//!
//! [`verify`] holds independent dense oracles and test-matrix generators;
//! [`pipeline`] ties the stages together with timing and reporting.

pub mod dense;
pub mod error;
pub mod factor;
pub mod inverse;
pub mod ordering;
pub mod parallel;
pub mod pipeline;
pub mod scalar;
pub mod sparse;
pub mod symbolic;
pub mod verify;

pub use error::Error;
pub use scalar::Scalar;
