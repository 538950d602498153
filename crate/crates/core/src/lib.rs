//! Focused reading: reinforcement-learned retrieve-and-read search for
//! multi-hop paths between two entities of an annotated corpus.

pub mod agent;
pub mod corpus;
pub mod dataset;
pub mod embeddings;
pub mod env;
pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod graph;
pub mod policy;
pub mod synth;
pub mod text;
pub mod topics;

pub use error::{Error, Result};
