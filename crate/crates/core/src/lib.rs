//! Static Android malware analysis over API call graphs.
//!
//! The pipeline parses textual method listings into per-app API call graphs,
//! trains two attention-based graph classifiers (a recurrent graph-walking
//! agent and a multi-head graph attention network), and turns the attention
//! each model places on API nodes into method- and class-level verdicts.

pub mod apigraph;
pub mod attention;
pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod evalmetrics;
pub mod gam;
pub mod gat;
pub mod localize;
pub mod numkernel;
pub mod pipeline;
pub mod seeding;
pub mod synthcorpus;

pub use attention::NodeAttention;
pub use error::{Error, Result};
