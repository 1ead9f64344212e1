// mdbook cannot run snippets that depend on workspace crates, so every
// chapter of the guide is included here as a module doc and run by
// `cargo test --doc`. One module per chapter keeps failures traceable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/quick-start.md")]
pub mod quick_start {}

#[doc = include_str!("../../../book/src/rendering.md")]
pub mod rendering {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/degradation.md")]
pub mod degradation {}

#[doc = include_str!("../../../book/src/cross-validation.md")]
pub mod cross_validation {}

#[doc = include_str!("../../../book/src/error-projection.md")]
pub mod error_projection {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
