//! Krein-Feller operators on the circle for finite atomic measures.
//!
//! The pipeline runs `measure` (compile W and V) into `kernels` (iterated
//! integral diagonals), then `gentrig` and `spectrum`. The `dirichlet`, `oracle`
//! and `fields` modules consume spectra. Everything works in `f64` with
//! compensated accumulation, except the exact Fredholm coefficient path.

pub mod dirichlet;
pub mod digest;
pub mod error;
pub mod fields;
pub mod gentrig;
pub mod kernels;
pub mod measure;
pub mod oracle;
pub mod spectrum;
pub mod sum;

pub use error::{Error, Result};
