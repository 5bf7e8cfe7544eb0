//! Cluster synchronization of coupled dynamical systems on clustered
//! graphs: topology checks, spectral conditions, synchronizability,
//! vector fields, integrators and synchronization metrics.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the linear algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dynamics;
pub mod error;
pub mod fmt;
pub mod graph;
pub mod metrics;
pub mod simulator;
pub mod spectral;
pub mod synchronizability;

pub use error::{Error, Result};
pub use graph::{ClusterClass, ClusteredGraph, GraphSpec};
