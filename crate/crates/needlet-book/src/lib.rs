//! Doc-tested chapters of the guide in `book/`.
//!
//! mdBook renders the chapters; including them here as module docs makes
//! `cargo test --doc` compile and run every code block, so the book cannot
//! drift from the library. One module per chapter keeps test failures
//! attributable to their source file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/harmonics.md")]
pub mod harmonics {}

#[doc = include_str!("../../../book/src/kernel.md")]
pub mod kernel {}

#[doc = include_str!("../../../book/src/quadrature.md")]
pub mod quadrature {}

#[doc = include_str!("../../../book/src/regression.md")]
pub mod regression {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}
