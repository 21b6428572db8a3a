//! Fingerprint preprocessing: local adaptive binarization, 2x2 dilation and
//! table-driven parallel thinning, together with a bit-exact, cycle-level
//! model of a streaming hardware pipeline that performs the same chain.
//!
//! The software path lives in [`binarize`], [`morphology`] and [`chain`];
//! the hardware model in [`bitarith`] (adder datapath) and [`pipeline_sim`].

pub mod binarize;
pub mod bitarith;
pub mod chain;
pub mod error;
pub mod image_io;
pub mod morphology;
pub mod pipeline_sim;
pub mod synth;

pub use error::{Error, Result};
pub use image_io::{BinaryImage, GrayImage, Rect};
