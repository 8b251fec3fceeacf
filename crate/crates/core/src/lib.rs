pub mod attention;
pub mod backend;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod render;
pub mod saliency;
pub mod search;
pub mod template;
pub mod tensor;

pub use error::{Error, Result};
