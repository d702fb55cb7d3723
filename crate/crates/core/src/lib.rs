pub mod error;
pub mod estimation;
pub mod format;
pub mod materials;
pub mod mesh;
pub mod observation;
pub mod pipeline;
pub mod placement;
pub mod rom;
pub mod solver;

pub use error::{Error, Result};
