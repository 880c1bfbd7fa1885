//! Parallel divide-and-conquer Delaunay triangulation of 2D and 3D point
//! sets, with a divide step that partitions the Delaunay graph of a small
//! random sample.
//!
//! The main entry points are [`seq::triangulate_seq`] for the sequential
//! builder and [`dc::delaunay_dc`] for the parallel one.

pub mod bench;
pub mod border;
pub mod dc;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod metrics;
pub mod partition;
pub mod seq;
pub mod triangulation;
pub mod workload;

pub use error::{Error, Result};
