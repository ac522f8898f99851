//! Averaged port-Hamiltonian modeling, passivity-based controller synthesis
//! and switched simulation of an electric-vehicle charging station.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaged;
pub mod control;
pub mod error;
pub mod evcs;
pub mod numerics;
pub mod ph;
pub mod sim;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/averaged.md")]
    mod averaged {}
    #[doc = include_str!("../../../book/src/station.md")]
    mod station {}
    #[doc = include_str!("../../../book/src/controllers.md")]
    mod controllers {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/numerics.md")]
    mod numerics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
