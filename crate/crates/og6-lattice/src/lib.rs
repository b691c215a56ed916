//! Even lattices, finite quadratic forms, genera, primitive embeddings and
//! isometries, plus the classification pipeline for symplectic birational
//! transformations of OG6-type manifolds.

#![allow(clippy::needless_range_loop)]

pub mod embed;
pub mod error;
pub mod fqf;
pub mod genus;
pub mod isometry;
pub mod lattice;
pub mod linalg;
pub mod og6;
pub mod parse;
pub mod par;

pub use error::{LatticeError, Result};
pub use fqf::{Fqf, FqfMap};
pub use lattice::Lattice;
