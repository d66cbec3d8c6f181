pub mod classify;
pub mod data;
pub mod error;
pub mod features;
pub mod labels;
pub mod mesh;
pub mod patch;
pub mod pipeline;
pub mod report;
pub mod spectral;

pub use error::{Error, Result};
