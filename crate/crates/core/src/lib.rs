pub mod engine;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod strength;
pub mod theory;

pub use error::{Error, Result};
