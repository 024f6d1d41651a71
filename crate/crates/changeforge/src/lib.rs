//! File formats, dataset generation and the command-line front end on top of
//! [`changeforge_core`].
//!
//! * [`io`]: PNG images and cutout pools
//! * [`manifest`] / [`dataset`]: the dataset manifest, generation and loading
//! * [`tensor`]: the tensor-exchange format for target and prediction maps
//! * [`detections`]: detections JSON
//! * [`matrix`]: results CSV
//! * [`inspect`]: side-by-side previews
//! * [`cli`]: the `changeforge` binary

pub mod cli;
pub mod dataset;
pub mod detections;
mod error;
pub mod inspect;
pub mod io;
pub mod manifest;
pub mod matrix;
pub mod tensor;

pub use changeforge_core as core;
pub use error::{Error, Result};
