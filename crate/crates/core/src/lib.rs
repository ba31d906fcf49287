//! Low-frequency resonance laboratory for grid-forming voltage-source converters.

pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod model;
pub mod operating_point;
pub mod plant;
pub mod poly;
pub mod ringdown;
pub mod sim;
pub mod smallsignal;

pub use error::{Error, Result};
