//! Raster containers and the binary Netpbm codecs (PGM `P5`, PBM `P4`).
//!
//! Only the binary variants are accepted. PBM bit 1 is always foreground
//! (ridge), which is also the convention used by thinning.

use crate::error::{Error, Result};

/// 8-bit grayscale raster, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

/// One-bit raster stored as one byte per pixel, each byte 0 or 1.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Rect { x0, y0, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x0 + self.w && y >= self.y0 && y < self.y0 + self.h
    }

    fn check_inside(&self, width: usize, height: usize) -> Result<()> {
        let fits = self.w > 0
            && self.h > 0
            && self.x0.checked_add(self.w).is_some_and(|e| e <= width)
            && self.y0.checked_add(self.h).is_some_and(|e| e <= height);
        if fits {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                x0: self.x0,
                y0: self.y0,
                w: self.w,
                h: self.h,
                width,
                height,
            })
        }
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Config(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::Dimension {
            expected: format!("{} samples", width.saturating_mul(height)),
            actual: format!("{len} samples"),
        });
    }
    Ok(())
}

fn crop_slice(src: &[u8], width: usize, r: &Rect) -> Vec<u8> {
    let mut out = Vec::with_capacity(r.area());
    for y in r.y0..r.y0 + r.h {
        let start = y * width + r.x0;
        out.extend_from_slice(&src[start..start + r.w]);
    }
    out
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn crop(&self, rect: Rect) -> Result<GrayImage> {
        rect.check_inside(self.width, self.height)?;
        GrayImage::new(rect.w, rect.h, crop_slice(&self.pixels, self.width, &rect))
    }

    pub fn histogram(&self) -> [u64; 256] {
        let mut hist = [0u64; 256];
        for &p in &self.pixels {
            hist[p as usize] += 1;
        }
        hist
    }
}

impl BinaryImage {
    /// Builds an image from 0/1 samples; any other value is rejected.
    pub fn new(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        check_dims(width, height, bits.len())?;
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::Config(format!(
                "binary sample at index {pos} is {}, expected 0 or 1",
                bits[pos]
            )));
        }
        Ok(BinaryImage {
            width,
            height,
            bits,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y) as u8);
            }
        }
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value as u8;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.bits[y * self.width..(y + 1) * self.width]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn complement(&self) -> BinaryImage {
        BinaryImage {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|&b| b ^ 1).collect(),
        }
    }

    /// True when every foreground pixel of `self` is also foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| a <= b)
    }

    /// Coordinates where the two images differ, in raster order.
    pub fn diff(&self, other: &BinaryImage) -> Result<Vec<(usize, usize)>> {
        if self.dims() != other.dims() {
            return Err(Error::dims(self.dims(), other.dims()));
        }
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| (i % self.width, i / self.width))
            .collect())
    }

    pub fn crop(&self, rect: Rect) -> Result<BinaryImage> {
        rect.check_inside(self.width, self.height)?;
        BinaryImage::new(rect.w, rect.h, crop_slice(&self.bits, self.width, &rect))
    }
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GrayImage({}x{})", self.width, self.height)
    }
}

impl std::fmt::Debug for BinaryImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "BinaryImage({}x{}, {} set)",
            self.width,
            self.height,
            self.count_ones()
        )
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, field: &'static str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::decode(field, "expected a decimal number"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::decode(field, "number out of range"))
    }

    /// Consumes the single whitespace byte that separates the header from the payload.
    fn end_of_header(&mut self, field: &'static str) -> Result<&'a [u8]> {
        match self.bytes.get(self.pos) {
            Some(c) if c.is_ascii_whitespace() => Ok(&self.bytes[self.pos + 1..]),
            Some(_) => Err(Error::decode(field, "expected whitespace after header")),
            None => Err(Error::decode("payload", "truncated: missing pixel data")),
        }
    }
}

fn read_magic<'a>(bytes: &'a [u8], magic: &[u8; 2]) -> Result<HeaderReader<'a>> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(Error::decode(
            "magic",
            format!(
                "expected {:?}, found {found:?}",
                std::str::from_utf8(magic).unwrap()
            ),
        ));
    }
    Ok(HeaderReader { bytes, pos: 2 })
}

fn read_dims(header: &mut HeaderReader<'_>) -> Result<(usize, usize)> {
    let width = header.number("width")?;
    let height = header.number("height")?;
    if width == 0 {
        return Err(Error::decode("width", "must be positive"));
    }
    if height == 0 {
        return Err(Error::decode("height", "must be positive"));
    }
    Ok((width, height))
}

/// Decodes a binary PGM (`P5`) with maxval at most 255.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut header = read_magic(bytes, b"P5")?;
    let (width, height) = read_dims(&mut header)?;
    let maxval = header.number("maxval")?;
    if maxval == 0 {
        return Err(Error::decode("maxval", "must be positive"));
    }
    if maxval > 255 {
        return Err(Error::decode(
            "maxval",
            format!("unsupported maxval {maxval}"),
        ));
    }
    let payload = header.end_of_header("maxval")?;
    let len = width
        .checked_mul(height)
        .ok_or_else(|| Error::decode("width", "image too large"))?;
    if payload.len() < len {
        return Err(Error::decode(
            "payload",
            format!("truncated: expected {len} bytes, found {}", payload.len()),
        ));
    }
    let pixels = payload[..len].to_vec();
    if let Some(&p) = pixels.iter().find(|&&p| p as usize > maxval) {
        return Err(Error::decode(
            "payload",
            format!("pixel {p} exceeds maxval {maxval}"),
        ));
    }
    GrayImage::new(width, height, pixels)
}

/// Canonical binary PGM: `P5\n<w> <h>\n255\n` followed by the raw rows.
pub fn save_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Decodes a binary PBM (`P4`); rows are padded to whole bytes, MSB first.
pub fn load_pbm(bytes: &[u8]) -> Result<BinaryImage> {
    let mut header = read_magic(bytes, b"P4")?;
    let (width, height) = read_dims(&mut header)?;
    let payload = header.end_of_header("height")?;
    let stride = width.div_ceil(8);
    let len = stride
        .checked_mul(height)
        .ok_or_else(|| Error::decode("width", "image too large"))?;
    if payload.len() < len {
        return Err(Error::decode(
            "payload",
            format!("truncated: expected {len} bytes, found {}", payload.len()),
        ));
    }
    let mut bits = Vec::with_capacity(width * height);
    for row in payload[..len].chunks_exact(stride) {
        bits.extend((0..width).map(|x| (row[x / 8] >> (7 - x % 8)) & 1));
    }
    BinaryImage::new(width, height, bits)
}

pub fn save_pbm(img: &BinaryImage) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", img.width, img.height).into_bytes();
    let stride = img.width.div_ceil(8);
    for y in 0..img.height {
        let mut row = vec![0u8; stride];
        for (x, &b) in img.row(y).iter().enumerate() {
            row[x / 8] |= b << (7 - x % 8);
        }
        out.extend_from_slice(&row);
    }
    out
}
