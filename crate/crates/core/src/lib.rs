pub mod channels;
pub mod cli;
pub mod error;
pub mod gallery;
pub mod markov;
pub mod sampling;
pub mod states;
pub mod steering;
pub mod tensor;

pub use error::{Error, Result};
