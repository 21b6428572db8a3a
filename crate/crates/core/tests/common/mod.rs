//! Independent oracles for the integration tests. Nothing here calls into
//! the code under test except for image containers.

#![allow(dead_code)]

use ridgeline::{BinaryImage, GrayImage};

/// (dy, dx) of P2..P9, clockwise from north.
pub const RING: [(isize, isize); 8] = [
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
];

/// P2..P9 as 0/1 values, index 0 = P2.
pub fn ring_from_code(code: u8) -> [u8; 8] {
    std::array::from_fn(|i| (code >> i) & 1)
}

pub fn raw_b(p: &[u8; 8]) -> u32 {
    p.iter().map(|&v| v as u32).sum()
}

/// 01 patterns in P2, P3, ..., P9, P2.
pub fn raw_a(p: &[u8; 8]) -> u32 {
    (0..8).filter(|&i| p[i] == 0 && p[(i + 1) % 8] == 1).count() as u32
}

/// Conditions a, b and the phase pair, on P2..P9 given as p[0]..p[7].
pub fn raw_deletable(p: &[u8; 8], phase_one: bool, min_b: u32) -> bool {
    let (p2, p4, p6, p8) = (p[0], p[2], p[4], p[6]);
    let b = raw_b(p);
    let ab = (min_b..=6).contains(&b) && raw_a(p) == 1;
    if phase_one {
        ab && p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0
    } else {
        ab && p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0
    }
}

fn pixel(img: &BinaryImage, y: isize, x: isize) -> u8 {
    if y < 0 || x < 0 || y >= img.height() as isize || x >= img.width() as isize {
        0
    } else {
        img.get(x as usize, y as usize) as u8
    }
}

/// Two-buffer parallel pass: decisions read only the input image.
pub fn naive_thin_pass(img: &BinaryImage, phase_one: bool) -> (BinaryImage, usize) {
    let mut out = img.clone();
    let mut deleted = 0;
    for y in 0..img.height() {
        for x in 0..img.width() {
            if !img.get(x, y) {
                continue;
            }
            let p: [u8; 8] =
                std::array::from_fn(|i| pixel(img, y as isize + RING[i].0, x as isize + RING[i].1));
            if raw_deletable(&p, phase_one, 3) {
                out.set(x, y, false);
                deleted += 1;
            }
        }
    }
    (out, deleted)
}

pub fn naive_thin(img: &BinaryImage, iterations: usize) -> (BinaryImage, Vec<usize>) {
    let mut cur = img.clone();
    let mut counts = Vec::new();
    for _ in 0..iterations {
        let (a, n1) = naive_thin_pass(&cur, true);
        let (b, n2) = naive_thin_pass(&a, false);
        counts.push(n1 + n2);
        cur = b;
    }
    (cur, counts)
}

pub fn naive_dilate(img: &BinaryImage) -> BinaryImage {
    BinaryImage::from_fn(img.width(), img.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        pixel(img, y, x) | pixel(img, y, x + 1) | pixel(img, y + 1, x) | pixel(img, y + 1, x + 1)
            == 1
    })
    .unwrap()
}

/// Block origins along one axis: step `n - overlap`, last block flush with
/// the far edge.
pub fn origins(len: usize, n: usize, overlap: usize) -> Vec<usize> {
    let mut v = Vec::new();
    let mut o = 0;
    loop {
        if o + n >= len {
            v.push(len - n);
            break;
        }
        v.push(o);
        o += n - overlap;
    }
    v
}

/// Adaptive binarization straight from the definition: every pixel takes
/// the floor mean of the first block (row-major by origin) that covers it.
pub fn naive_adaptive(img: &GrayImage, n: usize, overlap: usize, dark: bool) -> BinaryImage {
    let xs = origins(img.width(), n, overlap);
    let ys = origins(img.height(), n, overlap);
    let mut blocks = Vec::new();
    for &y0 in &ys {
        for &x0 in &xs {
            let mut sum = 0u64;
            for y in y0..y0 + n {
                for x in x0..x0 + n {
                    sum += img.get(x, y) as u64;
                }
            }
            blocks.push((x0, y0, (sum / (n * n) as u64) as u8));
        }
    }
    BinaryImage::from_fn(img.width(), img.height(), |x, y| {
        let &(_, _, t) = blocks
            .iter()
            .find(|&&(x0, y0, _)| x >= x0 && x < x0 + n && y >= y0 && y < y0 + n)
            .unwrap();
        let f = img.get(x, y);
        if dark {
            f <= t
        } else {
            f > t
        }
    })
    .unwrap()
}

/// Between-class variance of {<= t} vs {> t} for every t, by direct
/// class statistics in floating point.
pub fn otsu_variances(hist: &[u64; 256]) -> [f64; 256] {
    let total: f64 = hist.iter().sum::<u64>() as f64;
    std::array::from_fn(|t| {
        let (mut c0, mut s0, mut c1, mut s1) = (0.0, 0.0, 0.0, 0.0);
        for (g, &h) in hist.iter().enumerate() {
            if g <= t {
                c0 += h as f64;
                s0 += h as f64 * g as f64;
            } else {
                c1 += h as f64;
                s1 += h as f64 * g as f64;
            }
        }
        if c0 == 0.0 || c1 == 0.0 {
            return 0.0;
        }
        let (m0, m1) = (s0 / c0, s1 / c1);
        (c0 / total) * (c1 / total) * (m0 - m1) * (m0 - m1)
    })
}
