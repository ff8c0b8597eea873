//! Numerical laboratory for lateral Cauchy problems of linear
//! integro-differential parabolic equations.
pub mod error;
pub mod estimates;
pub mod forward;
pub mod inverse;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod nonlocal;
pub mod presets;
pub mod report;
pub mod weights;

pub use error::{LabError, Result};

// The book's code blocks run as doctests of this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grids.md")]
    mod grids {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/forward.md")]
    mod forward {}
    #[doc = include_str!("../../../book/src/estimates.md")]
    mod estimates {}
    #[doc = include_str!("../../../book/src/completion.md")]
    mod completion {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
