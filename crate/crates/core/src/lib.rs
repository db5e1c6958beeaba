//! Density estimation trees.
//!
//! A density estimation tree partitions an axis-aligned box into leaves and
//! stores a constant density in each: the fraction of the training weight
//! falling in the leaf divided by the leaf volume. Trees are grown greedily
//! ([`train`]), evaluated and integrated exactly ([`integrate`]), combined
//! leafwise ([`algebra`]), sampled conditionally ([`sample`]) and stored as
//! compact text ([`io`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod integrate;
pub mod io;
pub mod sample;
pub mod train;
pub mod tree;

pub use dataset::Dataset;
pub use error::{DetError, Result};
pub use geometry::HyperRect;
pub use tree::{leaf_density, DensityTree, TreeNode};
