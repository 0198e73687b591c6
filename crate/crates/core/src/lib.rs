//! CT volume standardization, anatomy mask archiving, body composition
//! analysis, voxel-based first-order radiomics and the statistics used to
//! judge feature robustness.

pub mod archive;
pub mod error;
pub mod features;
pub mod image_io;
pub mod registry;
pub mod standardizer;
pub mod stats;
pub mod pipeline;
pub mod viz;

pub use error::{Error, Result};
