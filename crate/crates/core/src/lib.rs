pub mod error;
pub mod featcore;

pub use error::{FormatError, Result, ScpError};
pub mod cli;
pub mod dataset;
pub mod eval;
pub mod keypoints;
pub mod matching;
pub mod selection;
