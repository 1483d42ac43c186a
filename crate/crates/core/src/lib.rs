//! Gaussian decay of solutions to magnetic Schrödinger equations
//! `i∂ₜu − Δ_A u + V u = 0`: grids and special functions, a split-step
//! propagator with exact oracles, changes of variables, explicit solutions
//! and decay-rate measurement. The guide in `book/` walks through each part.

// NaN must fail the parameter checks, hence `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod closedform;
pub mod decay;
pub mod engine;
pub mod error;
pub mod fields;
pub mod grid;
pub mod quad;
pub mod specfun;
pub mod spectral;
pub mod transforms;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grids.md")]
    mod grids {}
    #[doc = include_str!("../../../book/src/spectra.md")]
    mod spectra {}
    #[doc = include_str!("../../../book/src/propagation.md")]
    mod propagation {}
    #[doc = include_str!("../../../book/src/transforms.md")]
    mod transforms {}
    #[doc = include_str!("../../../book/src/gauge.md")]
    mod gauge {}
    #[doc = include_str!("../../../book/src/closed_forms.md")]
    mod closed_forms {}
    #[doc = include_str!("../../../book/src/decay.md")]
    mod decay {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
