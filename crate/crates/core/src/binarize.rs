//! Local adaptive thresholding over (optionally overlapping) square blocks,
//! block-size selection, a global Otsu baseline and agreement metrics.
//!
//! Blocks are always full `N x N` squares: the last block on each axis is
//! shifted back so it ends at the image edge. Where blocks overlap, a pixel
//! belongs to the block with the smallest `(y0, x0)` that contains it.

use crate::error::{Error, Result};
use crate::image_io::{BinaryImage, GrayImage, Rect};

/// Block origins along one axis: stride `block - overlap`, last one clamped
/// to `len - block`.
pub fn axis_origins(len: usize, block: usize, overlap: usize) -> Result<Vec<usize>> {
    if block < 2 {
        return Err(Error::Config(format!(
            "block size must be at least 2, got {block}"
        )));
    }
    if overlap >= block {
        return Err(Error::Config(format!(
            "overlap {overlap} must be smaller than block size {block}"
        )));
    }
    if len < block {
        return Err(Error::Config(format!(
            "axis length {len} is smaller than block size {block}"
        )));
    }
    let stride = block - overlap;
    let last = len - block;
    let mut origins: Vec<usize> = (0..=last).step_by(stride).collect();
    if *origins.last().unwrap() != last {
        origins.push(last);
    }
    Ok(origins)
}

/// For every coordinate on an axis, the index of the first origin whose
/// block contains it.
fn axis_owners(len: usize, block: usize, origins: &[usize]) -> Vec<usize> {
    let mut owners = Vec::with_capacity(len);
    let mut k = 0;
    for pos in 0..len {
        while origins[k] + block <= pos {
            k += 1;
        }
        owners.push(k);
    }
    owners
}

/// Tiling of an image into square blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGrid {
    width: usize,
    height: usize,
    block_size: usize,
    overlap: usize,
    x_origins: Vec<usize>,
    y_origins: Vec<usize>,
    col_owner: Vec<usize>,
    row_owner: Vec<usize>,
}

impl BlockGrid {
    pub fn new(width: usize, height: usize, block_size: usize, overlap: usize) -> Result<Self> {
        let x_origins = axis_origins(width, block_size, overlap)?;
        let y_origins = axis_origins(height, block_size, overlap)?;
        let col_owner = axis_owners(width, block_size, &x_origins);
        let row_owner = axis_owners(height, block_size, &y_origins);
        Ok(BlockGrid {
            width,
            height,
            block_size,
            overlap,
            x_origins,
            y_origins,
            col_owner,
            row_owner,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }

    pub fn x_origins(&self) -> &[usize] {
        &self.x_origins
    }

    pub fn y_origins(&self) -> &[usize] {
        &self.y_origins
    }

    pub fn blocks_per_row(&self) -> usize {
        self.x_origins.len()
    }

    pub fn len(&self) -> usize {
        self.x_origins.len() * self.y_origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Block `i` in row-major (y0, x0) order.
    pub fn block(&self, i: usize) -> Rect {
        let bx = i % self.x_origins.len();
        let by = i / self.x_origins.len();
        Rect::new(
            self.x_origins[bx],
            self.y_origins[by],
            self.block_size,
            self.block_size,
        )
    }

    pub fn blocks(&self) -> impl Iterator<Item = Rect> + '_ {
        (0..self.len()).map(|i| self.block(i))
    }

    /// Column-block index owning column `x`.
    pub fn col_owner(&self, x: usize) -> usize {
        self.col_owner[x]
    }

    /// Row-block index owning row `y`.
    pub fn row_owner(&self, y: usize) -> usize {
        self.row_owner[y]
    }

    /// Index of the block owning pixel `(x, y)`.
    pub fn owner(&self, x: usize, y: usize) -> usize {
        self.row_owner[y] * self.x_origins.len() + self.col_owner[x]
    }
}

/// One threshold per grid block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdMap {
    grid: BlockGrid,
    thresholds: Vec<u8>,
}

impl ThresholdMap {
    pub fn new(grid: BlockGrid, thresholds: Vec<u8>) -> Result<Self> {
        if thresholds.len() != grid.len() {
            return Err(Error::Config(format!(
                "{} thresholds for {} blocks",
                thresholds.len(),
                grid.len()
            )));
        }
        Ok(ThresholdMap { grid, thresholds })
    }

    pub fn grid(&self) -> &BlockGrid {
        &self.grid
    }

    pub fn thresholds(&self) -> &[u8] {
        &self.thresholds
    }

    /// Threshold applied to pixel `(x, y)`.
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.thresholds[self.grid.owner(x, y)]
    }
}

/// Floor of the block mean; for a 16x16 block this is the sum shifted right by 8.
pub fn block_mean_threshold(img: &GrayImage, block: Rect) -> Result<u8> {
    if block.area() == 0 {
        return Err(Error::Config("empty block".into()));
    }
    if block.x0 + block.w > img.width() || block.y0 + block.h > img.height() {
        return Err(Error::OutOfBounds {
            x0: block.x0,
            y0: block.y0,
            w: block.w,
            h: block.h,
            width: img.width(),
            height: img.height(),
        });
    }
    let sum: u64 = (block.y0..block.y0 + block.h)
        .map(|y| {
            img.row(y)[block.x0..block.x0 + block.w]
                .iter()
                .map(|&p| p as u64)
                .sum::<u64>()
        })
        .sum();
    Ok((sum / block.area() as u64) as u8)
}

pub fn threshold_map(img: &GrayImage, grid: &BlockGrid) -> Result<ThresholdMap> {
    if img.dims() != (grid.width, grid.height) {
        return Err(Error::dims((grid.width, grid.height), img.dims()));
    }
    let thresholds = grid
        .blocks()
        .map(|b| block_mean_threshold(img, b))
        .collect::<Result<Vec<_>>>()?;
    ThresholdMap::new(grid.clone(), thresholds)
}

/// Which side of the threshold is marked 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Polarity {
    /// `g = 1` iff `f > T`.
    LightForeground,
    /// `g = 1` iff `f <= T`; ridges are dark in ordinary scans.
    #[default]
    DarkForeground,
}

impl Polarity {
    #[inline]
    pub fn classify(self, pixel: u8, threshold: u8) -> u8 {
        match self {
            Polarity::LightForeground => (pixel > threshold) as u8,
            Polarity::DarkForeground => (pixel <= threshold) as u8,
        }
    }
}

impl std::str::FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dark" => Ok(Polarity::DarkForeground),
            "light" => Ok(Polarity::LightForeground),
            other => Err(Error::Config(format!("unknown polarity {other:?}"))),
        }
    }
}

impl std::fmt::Display for Polarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Polarity::LightForeground => "light",
            Polarity::DarkForeground => "dark",
        })
    }
}

pub fn binarize(img: &GrayImage, tmap: &ThresholdMap, polarity: Polarity) -> Result<BinaryImage> {
    let grid = tmap.grid();
    if img.dims() != (grid.width, grid.height) {
        return Err(Error::dims((grid.width, grid.height), img.dims()));
    }
    let mut bits = Vec::with_capacity(img.pixels().len());
    for y in 0..img.height() {
        let row_base = grid.row_owner(y) * grid.blocks_per_row();
        for (x, &p) in img.row(y).iter().enumerate() {
            let t = tmap.thresholds[row_base + grid.col_owner(x)];
            bits.push(polarity.classify(p, t));
        }
    }
    BinaryImage::new(img.width(), img.height(), bits)
}

/// Grid, thresholds and binarization in one call.
pub fn adaptive_binarize(
    img: &GrayImage,
    block_size: usize,
    overlap: usize,
    polarity: Polarity,
) -> Result<BinaryImage> {
    let grid = BlockGrid::new(img.width(), img.height(), block_size, overlap)?;
    let tmap = threshold_map(img, &grid)?;
    binarize(img, &tmap, polarity)
}

/// Two-class statistics for the minimum-error threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStats {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma2: f64,
    pub p1: f64,
    pub p2: f64,
}

/// `T = (mu1 + mu2)/2 + sigma2/(mu1 - mu2) * ln(p1/p2)`.
pub fn optimal_threshold(stats: &ClassStats) -> Result<f64> {
    if stats.mu1 == stats.mu2 {
        return Err(Error::Arithmetic("class means are equal".into()));
    }
    if !(stats.p1 > 0.0 && stats.p2 > 0.0) {
        return Err(Error::Arithmetic(format!(
            "class probabilities must be positive, got {} and {}",
            stats.p1, stats.p2
        )));
    }
    let midpoint = 0.5 * (stats.mu1 + stats.mu2);
    if stats.p1 == stats.p2 {
        return Ok(midpoint);
    }
    Ok(midpoint + stats.sigma2 / (stats.mu1 - stats.mu2) * (stats.p1 / stats.p2).ln())
}

/// How the block side enters the block factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FactorMode {
    /// `sigma2 * N^(1/4)`
    #[default]
    Multiply,
    /// `sigma2 / N^(1/4)`
    Divide,
}

impl std::str::FromStr for FactorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mul" => Ok(FactorMode::Multiply),
            "div" => Ok(FactorMode::Divide),
            other => Err(Error::Config(format!("unknown factor mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for FactorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FactorMode::Multiply => "mul",
            FactorMode::Divide => "div",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockFactor {
    pub block_size: usize,
    /// Population variance of the block thresholds.
    pub sigma2: f64,
    pub factor: f64,
}

/// Variance of the non-overlapping block thresholds scaled by the fourth
/// root of the block side.
pub fn block_factor(img: &GrayImage, block_size: usize, mode: FactorMode) -> Result<BlockFactor> {
    let grid = BlockGrid::new(img.width(), img.height(), block_size, 0)?;
    let tmap = threshold_map(img, &grid)?;
    let n = tmap.thresholds.len() as f64;
    let mean = tmap.thresholds.iter().map(|&t| t as f64).sum::<f64>() / n;
    let sigma2 = tmap
        .thresholds
        .iter()
        .map(|&t| (t as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let root = (block_size as f64).powf(0.25);
    let factor = match mode {
        FactorMode::Multiply => sigma2 * root,
        FactorMode::Divide => sigma2 / root,
    };
    Ok(BlockFactor {
        block_size,
        sigma2,
        factor,
    })
}

pub const DEFAULT_BLOCK_CANDIDATES: [usize; 4] = [4, 16, 64, 256];

#[derive(Debug, Clone, PartialEq)]
pub struct BlockFactorReport {
    pub mode: FactorMode,
    pub candidates: Vec<BlockFactor>,
    /// Candidate with the largest factor; ties go to the smaller block.
    pub selected: usize,
}

pub fn select_block_size(
    img: &GrayImage,
    candidates: &[usize],
    mode: FactorMode,
) -> Result<BlockFactorReport> {
    if candidates.is_empty() {
        return Err(Error::Config("no block size candidates".into()));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let factors = sorted
        .iter()
        .map(|&n| block_factor(img, n, mode))
        .collect::<Result<Vec<_>>>()?;
    let mut best = &factors[0];
    for f in &factors[1..] {
        if f.factor > best.factor {
            best = f;
        }
    }
    Ok(BlockFactorReport {
        mode,
        selected: best.block_size,
        candidates: factors,
    })
}

/// Global Otsu threshold: the split `{<= t} / {> t}` with the largest
/// between-class variance; smallest `t` on ties.
pub fn otsu_threshold(hist: &[u64; 256]) -> Result<u8> {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return Err(Error::Undefined("empty histogram".into()));
    }
    let total_sum: u64 = hist.iter().enumerate().map(|(g, &c)| g as u64 * c).sum();
    let mut best_t = 0u8;
    let mut best_var = f64::NEG_INFINITY;
    let (mut count0, mut sum0) = (0u64, 0u64);
    for (t, &c) in hist.iter().enumerate() {
        count0 += c;
        sum0 += t as u64 * c;
        let var = between_class_variance(count0, sum0, total, total_sum);
        if var > best_var {
            best_var = var;
            best_t = t as u8;
        }
    }
    Ok(best_t)
}

/// `w0 * w1 * (mu0 - mu1)^2` from integer class moments; 0 when a class is empty.
pub(crate) fn between_class_variance(count0: u64, sum0: u64, total: u64, total_sum: u64) -> f64 {
    let count1 = total - count0;
    if count0 == 0 || count1 == 0 {
        return 0.0;
    }
    let mu0 = sum0 as f64 / count0 as f64;
    let mu1 = (total_sum - sum0) as f64 / count1 as f64;
    let w0 = count0 as f64 / total as f64;
    let w1 = count1 as f64 / total as f64;
    w0 * w1 * (mu0 - mu1) * (mu0 - mu1)
}

pub fn otsu_binarize(img: &GrayImage, polarity: Polarity) -> Result<BinaryImage> {
    let t = otsu_threshold(&img.histogram())?;
    let bits = img
        .pixels()
        .iter()
        .map(|&p| polarity.classify(p, t))
        .collect();
    BinaryImage::new(img.width(), img.height(), bits)
}

fn check_same(g: &BinaryImage, f: &BinaryImage) -> Result<()> {
    if g.dims() != f.dims() {
        return Err(Error::dims(g.dims(), f.dims()));
    }
    Ok(())
}

/// `sum(G^2) / sum((G - F)^2)`, `+inf` when the images agree.
pub fn snr_ms(g: &BinaryImage, f: &BinaryImage) -> Result<f64> {
    check_same(g, f)?;
    let signal = g.count_ones() as f64;
    let noise = g
        .bits()
        .iter()
        .zip(f.bits())
        .filter(|(a, b)| a != b)
        .count() as f64;
    Ok(if noise == 0.0 {
        f64::INFINITY
    } else {
        signal / noise
    })
}

pub fn e_rms(g: &BinaryImage, f: &BinaryImage) -> Result<f64> {
    check_same(g, f)?;
    let sq: f64 = g
        .bits()
        .iter()
        .zip(f.bits())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok((sq / g.bits().len() as f64).sqrt())
}

/// Pearson correlation of the flattened 0/1 samples.
pub fn correlation(g: &BinaryImage, f: &BinaryImage) -> Result<f64> {
    check_same(g, f)?;
    let n = g.bits().len() as f64;
    let mg = g.count_ones() as f64 / n;
    let mf = f.count_ones() as f64 / n;
    let (mut cov, mut vg, mut vf) = (0.0, 0.0, 0.0);
    for (&a, &b) in g.bits().iter().zip(f.bits()) {
        let da = a as f64 - mg;
        let db = b as f64 - mf;
        cov += da * db;
        vg += da * da;
        vf += db * db;
    }
    if vg == 0.0 || vf == 0.0 {
        return Err(Error::Undefined("correlation of a constant image".into()));
    }
    Ok((cov / (vg * vf).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub snr_ms: f64,
    pub e_rms: f64,
    /// `None` when either image is constant.
    pub correlation: Option<f64>,
}

impl QualityReport {
    /// Compares `f` against the reference binarization `g`.
    pub fn compare(g: &BinaryImage, f: &BinaryImage) -> Result<Self> {
        let correlation = match correlation(g, f) {
            Ok(c) => Some(c),
            Err(Error::Undefined(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(QualityReport {
            snr_ms: snr_ms(g, f)?,
            e_rms: e_rms(g, f)?,
            correlation,
        })
    }
}
