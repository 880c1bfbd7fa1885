//! Code listings of the book, compiled and run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/predicates.md")]
pub mod predicates {}

#[doc = include_str!("../../../book/src/triangulations.md")]
pub mod triangulations {}

#[doc = include_str!("../../../book/src/partitioning.md")]
pub mod partitioning {}

#[doc = include_str!("../../../book/src/border.md")]
pub mod border {}

#[doc = include_str!("../../../book/src/divide-and-conquer.md")]
pub mod divide_and_conquer {}

#[doc = include_str!("../../../book/src/workloads.md")]
pub mod workloads {}

#[doc = include_str!("../../../book/src/benchmarks.md")]
pub mod benchmarks {}
