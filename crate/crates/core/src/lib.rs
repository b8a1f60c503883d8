//! Discrete flattening of curved triangle shells into printable flat plates.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fixtures;
pub mod flatten;
pub mod linalg;
pub mod mesh;
pub mod optimizer;
pub mod param;
pub mod plate;
pub mod spatial;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/meshes.md")]
    mod meshes {}
    #[doc = include_str!("../../../book/src/parameterization.md")]
    mod parameterization {}
    #[doc = include_str!("../../../book/src/layout.md")]
    mod layout {}
    #[doc = include_str!("../../../book/src/flattening.md")]
    mod flattening {}
    #[doc = include_str!("../../../book/src/plate.md")]
    mod plate {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
