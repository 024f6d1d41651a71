//! Allocation-only building blocks for synthesizing and scoring image-pair
//! change-detection data.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. Everything
//! random takes an explicit generator or seed, so every output is a pure
//! function of its inputs.
//!
//! * [`imageops`]: cropping, rotation, mask feathering, alpha compositing,
//!   noise and color jitter.
//! * [`shapes`]: anchor-box rectangle sampling and irregular polygons.
//! * [`synth`]: assembling one reference/test pair from image pools.
//! * [`codec`]: ground-truth heatmap encoding and prediction decoding.
//! * [`losses`]: focal heatmap loss, L1 size/offset losses and their
//!   gradients.
//! * [`metrics`]: IoU, AP@0.5 and the generalization distance.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod boxes;
pub mod codec;
mod error;
pub mod image;
pub mod imageops;
pub mod losses;
mod math;
pub mod metrics;
pub mod shapes;
pub mod synth;

pub use boxes::ChangeBox;
pub use error::{Error, Result};
pub use image::{Patch, Rect, RgbImage, SoftMask};
