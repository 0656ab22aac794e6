pub mod agent;
pub mod dialogue;
pub mod error;
pub mod explain;
pub mod harness;
pub mod logic;
pub mod memory;
pub mod rng;
pub mod perception;
pub mod reasoner;
pub mod worldsim;

pub use error::{Error, Result};
