//! The software reference path: adaptive binarization, 2x2 dilation, thinning.

use crate::binarize::{adaptive_binarize, Polarity};
use crate::error::Result;
use crate::image_io::{BinaryImage, GrayImage};
use crate::morphology::{dilate_2x2, thin_with, ThinOptions, ThinningResult, DEFAULT_ITERATIONS};

#[derive(Debug, Clone)]
pub struct ChainOptions {
    pub block_size: usize,
    pub overlap: usize,
    pub polarity: Polarity,
    pub thinning: ThinOptions,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            block_size: 16,
            overlap: 1,
            polarity: Polarity::DarkForeground,
            thinning: ThinOptions::iterations(DEFAULT_ITERATIONS),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainOutput {
    pub binarized: BinaryImage,
    pub dilated: BinaryImage,
    pub thinned: ThinningResult,
}

pub fn run_chain(img: &GrayImage, opts: &ChainOptions) -> Result<ChainOutput> {
    let binarized = adaptive_binarize(img, opts.block_size, opts.overlap, opts.polarity)?;
    let dilated = dilate_2x2(&binarized);
    let thinned = thin_with(&dilated, &opts.thinning);
    Ok(ChainOutput {
        binarized,
        dilated,
        thinned,
    })
}
