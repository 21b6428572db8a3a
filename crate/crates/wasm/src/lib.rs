//! Browser bindings for the demo page in `www/`.
//!
//! Images cross the boundary as row-major byte arrays plus dimensions:
//! gray levels for inputs, 0/1 for binary results. The `ops` module holds
//! the logic and is tested natively; the exported functions only convert
//! errors.

use wasm_bindgen::prelude::*;

pub mod ops {
    use ridgeline::binarize::{
        adaptive_binarize, select_block_size, FactorMode, Polarity, DEFAULT_BLOCK_CANDIDATES,
    };
    use ridgeline::morphology::{dilate_2x2, iteration_profile, thin};
    use ridgeline::synth::{self, FingerprintParams};
    use ridgeline::GrayImage;

    pub type OpResult<T> = Result<T, String>;

    fn gray(pixels: &[u8], width: usize, height: usize) -> OpResult<GrayImage> {
        GrayImage::new(width, height, pixels.to_vec()).map_err(|e| e.to_string())
    }

    fn polarity(light: bool) -> Polarity {
        if light {
            Polarity::LightForeground
        } else {
            Polarity::DarkForeground
        }
    }

    pub fn synth_fingerprint(width: usize, height: usize, seed: u64) -> OpResult<Vec<u8>> {
        if width == 0 || height == 0 {
            return Err("image dimensions must be positive".into());
        }
        Ok(
            synth::fingerprint(&FingerprintParams::random(width, height, seed))
                .pixels()
                .to_vec(),
        )
    }

    pub fn binarize(
        pixels: &[u8],
        width: usize,
        height: usize,
        block: usize,
        overlap: usize,
        light: bool,
    ) -> OpResult<Vec<u8>> {
        let img = gray(pixels, width, height)?;
        adaptive_binarize(&img, block, overlap, polarity(light))
            .map(|b| b.bits().to_vec())
            .map_err(|e| e.to_string())
    }

    /// Binarize, dilate and thin. Returns one byte per pixel: 0 background,
    /// 1 removed by thinning, 2 skeleton.
    pub fn thin_layers(
        pixels: &[u8],
        width: usize,
        height: usize,
        block: usize,
        overlap: usize,
        light: bool,
        iterations: usize,
    ) -> OpResult<Vec<u8>> {
        let img = gray(pixels, width, height)?;
        let b =
            adaptive_binarize(&img, block, overlap, polarity(light)).map_err(|e| e.to_string())?;
        let d = dilate_2x2(&b);
        let t = thin(&d, iterations).image;
        Ok(d.bits()
            .iter()
            .zip(t.bits())
            .map(|(&d, &t)| d + t)
            .collect())
    }

    /// Deletions per iteration relative to the first, for `max_iter` iterations.
    pub fn thinning_profile(
        pixels: &[u8],
        width: usize,
        height: usize,
        block: usize,
        overlap: usize,
        light: bool,
        max_iter: usize,
    ) -> OpResult<Vec<f64>> {
        if max_iter == 0 {
            return Err("at least one iteration is needed".into());
        }
        let img = gray(pixels, width, height)?;
        let b =
            adaptive_binarize(&img, block, overlap, polarity(light)).map_err(|e| e.to_string())?;
        Ok(iteration_profile(&dilate_2x2(&b), max_iter))
    }

    /// Rows of `[N, sigma2, factor_mul, factor_div]` for the default
    /// candidates that fit, flattened, followed by the two selections.
    pub fn block_factor_table(pixels: &[u8], width: usize, height: usize) -> OpResult<Vec<f64>> {
        let img = gray(pixels, width, height)?;
        let fit: Vec<usize> = DEFAULT_BLOCK_CANDIDATES
            .into_iter()
            .filter(|&n| n <= width.min(height))
            .collect();
        if fit.is_empty() {
            return Err("image is smaller than every candidate block".into());
        }
        let mul = select_block_size(&img, &fit, FactorMode::Multiply).map_err(|e| e.to_string())?;
        let div = select_block_size(&img, &fit, FactorMode::Divide).map_err(|e| e.to_string())?;
        let mut out = Vec::with_capacity(4 * fit.len() + 2);
        for (m, d) in mul.candidates.iter().zip(&div.candidates) {
            out.extend([m.block_size as f64, m.sigma2, m.factor, d.factor]);
        }
        out.extend([mul.selected as f64, div.selected as f64]);
        Ok(out)
    }
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen(js_name = synthFingerprint)]
pub fn synth_fingerprint(width: usize, height: usize, seed: u32) -> Result<Vec<u8>, JsError> {
    ops::synth_fingerprint(width, height, seed as u64).map_err(js)
}

#[wasm_bindgen]
pub fn binarize(
    pixels: &[u8],
    width: usize,
    height: usize,
    block: usize,
    overlap: usize,
    light: bool,
) -> Result<Vec<u8>, JsError> {
    ops::binarize(pixels, width, height, block, overlap, light).map_err(js)
}

#[wasm_bindgen(js_name = thinLayers)]
pub fn thin_layers(
    pixels: &[u8],
    width: usize,
    height: usize,
    block: usize,
    overlap: usize,
    light: bool,
    iterations: usize,
) -> Result<Vec<u8>, JsError> {
    ops::thin_layers(pixels, width, height, block, overlap, light, iterations).map_err(js)
}

#[wasm_bindgen(js_name = thinningProfile)]
pub fn thinning_profile(
    pixels: &[u8],
    width: usize,
    height: usize,
    block: usize,
    overlap: usize,
    light: bool,
    max_iter: usize,
) -> Result<Vec<f64>, JsError> {
    ops::thinning_profile(pixels, width, height, block, overlap, light, max_iter).map_err(js)
}

#[wasm_bindgen(js_name = blockFactorTable)]
pub fn block_factor_table(pixels: &[u8], width: usize, height: usize) -> Result<Vec<f64>, JsError> {
    ops::block_factor_table(pixels, width, height).map_err(js)
}
