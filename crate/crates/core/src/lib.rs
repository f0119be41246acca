pub mod cli;
pub mod clustering;
pub mod error;
pub mod instance;
pub mod matrix;
pub mod mipexport;
pub mod oracle;
pub mod pipeline;
pub mod rectsp;
pub mod routeeval;
pub mod stochmath;

pub use error::{Error, Result};
