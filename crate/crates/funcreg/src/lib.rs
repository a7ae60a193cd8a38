//! File formats, a parallel benchmark runner and the `funcreg` command-line
//! tool on top of [`funcreg_core`].

pub mod bench;
pub mod cli;
pub mod error;
pub mod io;
pub mod model;
pub mod report;
pub mod weather_io;

pub use error::{Error, Result};
