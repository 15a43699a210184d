//! Configuration, file formats and experiment orchestration on top of
//! [`mcgdm_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
mod error;
pub mod experiment;
pub mod output;
pub mod parallel;

pub use error::{AppError, AppResult};
