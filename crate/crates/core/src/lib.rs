//! Multi-object tracking as dense-structure search on a non-uniform
//! hypergraph whose per-degree weights are learned with a structural SVM.

pub mod affinity;
pub mod assignment;
pub mod builder;
pub mod error;
pub mod io;
pub mod learn;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod postprocess;
pub mod search;
pub mod synth;

pub use error::{Error, Result};
