//! Deterministic synthetic test images: ridge patterns resembling 500 dpi
//! fingerprints, and uniform noise.
//!
//! Ridges are dark. The ridge period stays within 7..12 pixels, so ridges
//! are at most about six pixels thick.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image_io::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    Whorl,
    Loop,
    Arch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintParams {
    pub width: usize,
    pub height: usize,
    pub pattern: Pattern,
    /// Ridge period in pixels.
    pub period: f64,
    pub core: (f64, f64),
    /// Standard deviation of the additive sensor noise, in gray levels.
    pub noise: f64,
    /// Left-to-right brightness drift, in gray levels.
    pub pressure_gradient: f64,
    pub seed: u64,
}

impl FingerprintParams {
    /// Parameters drawn from `seed`.
    pub fn random(width: usize, height: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pattern = match rng.gen_range(0..3) {
            0 => Pattern::Whorl,
            1 => Pattern::Loop,
            _ => Pattern::Arch,
        };
        FingerprintParams {
            width,
            height,
            pattern,
            period: rng.gen_range(8.0..11.0),
            core: (
                width as f64 * rng.gen_range(0.4..0.6),
                height as f64 * rng.gen_range(0.35..0.6),
            ),
            noise: rng.gen_range(6.0..16.0),
            pressure_gradient: rng.gen_range(-40.0..40.0),
            seed,
        }
    }
}

/// Sum of four uniforms, rescaled to unit variance.
fn approx_normal(rng: &mut impl Rng) -> f64 {
    let s: f64 = (0..4).map(|_| rng.gen::<f64>()).sum();
    (s - 2.0) * 3f64.sqrt()
}

pub fn fingerprint(params: &FingerprintParams) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed_f196);
    let warp_a = rng.gen_range(3.0..9.0);
    let warp_fx = rng.gen_range(60.0..140.0);
    let warp_fy = rng.gen_range(60.0..140.0);
    let warp_p: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let ellipse = rng.gen_range(0.7..1.0);
    let arch_height = rng.gen_range(40.0..110.0);
    let arch_spread = rng.gen_range(70.0..140.0);
    let (cx, cy) = params.core;
    let (w, h) = (params.width as f64, params.height as f64);

    GrayImage::from_fn(params.width, params.height, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let warp = warp_a * (xf / warp_fx + warp_p).sin() * (yf / warp_fy - warp_p).cos();
        let (dx, dy) = (xf - cx, yf - cy);
        let distance = match params.pattern {
            Pattern::Whorl => (dx * dx + (dy / ellipse).powi(2)).sqrt(),
            Pattern::Loop => {
                // concentric above the core, opening into parallel ridges below
                if dy < 0.0 {
                    (dx * dx + dy * dy).sqrt()
                } else {
                    dx.abs() + 0.35 * dy * (dx.abs() / (dx.abs() + 30.0))
                }
            }
            Pattern::Arch => {
                yf - arch_height * (-(dx * dx) / (2.0 * arch_spread * arch_spread)).exp()
            }
        };
        let phase = (distance + warp) / params.period;
        let ridge = (std::f64::consts::TAU * phase).cos();
        let mean = 135.0 + params.pressure_gradient * (xf / w - 0.5);
        // contrast fades slightly towards the borders
        let fade = 1.0 - 0.35 * ((xf / w - 0.5).powi(2) + (yf / h - 0.5).powi(2));
        let v = mean + 70.0 * fade * ridge + params.noise * approx_normal(&mut rng);
        v.round().clamp(0.0, 255.0) as u8
    })
    .expect("positive dimensions")
}

/// Independent uniform gray levels.
pub fn noise(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::from_fn(width, height, |_, _| rng.gen()).expect("positive dimensions")
}
