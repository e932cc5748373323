//! The book chapters as rustdoc modules, so every snippet runs under
//! `cargo test --doc`.

#[doc = include_str!("../../../book/src/overview.md")]
pub mod overview {}
#[doc = include_str!("../../../book/src/corpus.md")]
pub mod corpus {}
#[doc = include_str!("../../../book/src/retrieval.md")]
pub mod retrieval {}
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("../../../book/src/routing.md")]
pub mod routing {}
#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
#[doc = include_str!("../../../book/src/backends.md")]
pub mod backends {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
