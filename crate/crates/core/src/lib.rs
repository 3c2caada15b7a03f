pub mod data;
pub mod error;
pub mod harness;
mod io_util;
pub mod models;
pub mod nn;
pub mod seed;
pub mod speller;

pub use error::{Error, ErrorKind, Result};
