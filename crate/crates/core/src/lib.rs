//! Finite-horizon linear-quadratic control of discrete-time Markov jump linear
//! systems with a d-step input delay.

pub mod controller;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod random;
pub mod reproduce;
pub mod riccati;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};

/// Version tag written into every JSON document this crate produces.
pub const SCHEMA_VERSION: u32 = 1;
