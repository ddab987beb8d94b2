//! Topological mapping and hierarchical Q-learning navigation on a
//! seeded grid world.

// range checks are written negated so NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod bench;
pub mod error;
pub mod landmark;
pub mod reward;
pub mod topo_graph;
pub mod world;

pub use error::{ConfigError, Error, Result};
