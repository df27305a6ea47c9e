pub mod bridge;
pub mod dist;
pub mod error;
pub mod harness;
pub mod io;
pub mod lastlayer;
pub mod metrics;
pub mod predictive;
pub mod rng;
pub mod specfun;
pub mod topk;

pub use error::{Error, Result};
