//! Crystal property prediction with dual-scale neighbor partitioning.
//!
//! Edges of the periodic crystal graph come from a large edge cutoff, while
//! bond angles are only collected from neighbors inside a much smaller angle
//! cutoff. The graph is expanded into spherical Bessel / Legendre bases and
//! fed to a gated message-passing network trained with Adam.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, timing and the
//! command-line front end live in the `adagnn` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod crystal;
pub mod elements;
mod error;
pub mod featurize;
pub mod graph;
pub(crate) mod math;
pub mod model;
pub mod nn;
pub mod synth;
pub mod tensor;
pub mod train;

pub use crate::crystal::{Crystal, Lattice, PropertyRecord, Vec3};
pub use crate::error::{Error, Result};
pub use crate::featurize::{featurize_graph, AngleAggregation, AtomIndexPair, BasisConfig, FeaturizedGraph};
pub use crate::graph::{build_graph, build_graph_single_scale, CrystalGraph, CutoffConfig, GraphStats};
pub use crate::model::{ModelConfig, ModelState};
pub use crate::train::{BestSnapshot, OptimConfig, TrainReport, Trainer};
