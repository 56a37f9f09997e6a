//! The user guide, compiled into the API docs.
//!
//! Each submodule's documentation is one chapter of the rendered guide (the
//! `book/` directory at the repository root), included verbatim. Because the
//! chapters live in this crate's doc tree, `cargo test --doc` runs every
//! code snippet the guide shows: the prose cannot drift from the library
//! without a test failing.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/graphs.md")]
pub mod graphs {}

#[doc = include_str!("../../../book/src/penalties.md")]
pub mod penalties {}

#[doc = include_str!("../../../book/src/problems.md")]
pub mod problems {}

#[doc = include_str!("../../../book/src/algorithm.md")]
pub mod algorithm {}

#[doc = include_str!("../../../book/src/regret.md")]
pub mod regret {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
