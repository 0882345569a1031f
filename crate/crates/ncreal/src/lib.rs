//! Bounded non-commutative functions on polynomial polyhedra.
//!
//! The crate works with d-tuples of square complex matrices as points, free
//! polynomials and matrix symbols over them, and contractive functions given
//! by isometric colligations. It provides evaluation through the transfer
//! formula, model extraction and verification, synthesis of a colligation
//! from finite data, trace-functional separation of a matrix from the
//! algebra generated by a tuple, and the similarity scaling that turns a
//! separation into a norm certificate.

pub mod algebra;
pub mod cli;
pub mod error;
pub mod json;
pub mod linalg;
pub mod freepoly;
pub mod mattuple;
pub mod realization;
pub mod sample;
pub mod synthesis;

pub use error::{Error, Result};
pub use freepoly::{DeltaMatrix, FreePoly, Word};
pub use mattuple::{membership, op_norm, MatrixTuple, PolyhedronReport};
pub use realization::{isometry_check, verify_model, Colligation, ModelData};
