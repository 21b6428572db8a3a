//! Two-sub-iteration parallel thinning driven by 256-entry deletion tables,
//! and the 2x2 dilation that precedes it.
//!
//! Neighborhood codes pack the eight neighbors of a pixel clockwise from
//! north: bit 0 = P2 (N), bit 1 = P3 (NE), bit 2 = P4 (E), bit 3 = P5 (SE),
//! bit 4 = P6 (S), bit 5 = P7 (SW), bit 6 = P8 (W), bit 7 = P9 (NW).
//! Pixels outside the image read as 0.

use crate::image_io::BinaryImage;

/// Packed neighbors of one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Neighborhood(pub u8);

impl Neighborhood {
    pub const P2: u8 = 1 << 0;
    pub const P3: u8 = 1 << 1;
    pub const P4: u8 = 1 << 2;
    pub const P5: u8 = 1 << 3;
    pub const P6: u8 = 1 << 4;
    pub const P7: u8 = 1 << 5;
    pub const P8: u8 = 1 << 6;
    pub const P9: u8 = 1 << 7;

    /// Builds a code from `[P2, P3, ..., P9]`.
    pub fn from_ring(ring: [bool; 8]) -> Self {
        Neighborhood(
            ring.iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << i)),
        )
    }

    pub fn has(self, mask: u8) -> bool {
        self.0 & mask == mask
    }

    /// The same neighborhood seen after rotating the image by 180 degrees.
    pub fn rotate180(self) -> Self {
        Neighborhood(self.0.rotate_left(4))
    }
}

/// Number of 0 -> 1 transitions walking P2, P3, ..., P9 and back to P2.
pub fn neighbor_transitions(code: u8) -> u32 {
    (code & !code.rotate_left(1)).count_ones()
}

/// Number of foreground neighbors.
pub fn neighbor_sum(code: u8) -> u32 {
    code.count_ones()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Removes south-east boundary points and north-west corners.
    I,
    /// Removes north-west boundary points and south-east corners.
    II,
}

impl Phase {
    pub fn other(self) -> Phase {
        match self {
            Phase::I => Phase::II,
            Phase::II => Phase::I,
        }
    }
}

/// Smallest neighbor count at which a pixel may be deleted.
pub const DEFAULT_MIN_NEIGHBORS: u32 = 3;
/// Lower bound used by the classic formulation, kept for comparison.
pub const CLASSIC_MIN_NEIGHBORS: u32 = 2;
pub const MAX_NEIGHBORS: u32 = 6;

/// Deletion rule with a configurable lower bound on the neighbor count.
pub fn deletable_with(code: u8, phase: Phase, min_neighbors: u32) -> bool {
    let n = Neighborhood(code);
    let b = neighbor_sum(code);
    if !(min_neighbors..=MAX_NEIGHBORS).contains(&b) || neighbor_transitions(code) != 1 {
        return false;
    }
    use Neighborhood as P;
    match phase {
        Phase::I => !n.has(P::P2 | P::P4 | P::P6) && !n.has(P::P4 | P::P6 | P::P8),
        Phase::II => !n.has(P::P2 | P::P4 | P::P8) && !n.has(P::P2 | P::P6 | P::P8),
    }
}

pub fn deletable(code: u8, phase: Phase) -> bool {
    deletable_with(code, phase, DEFAULT_MIN_NEIGHBORS)
}

/// Precomputed deletion decision for every neighborhood, one table per phase.
#[derive(Clone, PartialEq, Eq)]
pub struct ThinningLut {
    phase1: [bool; 256],
    phase2: [bool; 256],
}

impl ThinningLut {
    pub fn with_min_neighbors(min_neighbors: u32) -> Self {
        ThinningLut {
            phase1: std::array::from_fn(|c| deletable_with(c as u8, Phase::I, min_neighbors)),
            phase2: std::array::from_fn(|c| deletable_with(c as u8, Phase::II, min_neighbors)),
        }
    }

    pub fn table(&self, phase: Phase) -> &[bool; 256] {
        match phase {
            Phase::I => &self.phase1,
            Phase::II => &self.phase2,
        }
    }

    #[inline]
    pub fn deletes(&self, phase: Phase, code: u8) -> bool {
        self.table(phase)[code as usize]
    }

    pub fn count(&self, phase: Phase) -> usize {
        self.table(phase).iter().filter(|&&d| d).count()
    }

    /// Flips one entry; used to check that faults show up downstream.
    pub fn flip(&mut self, phase: Phase, code: u8) {
        let t = match phase {
            Phase::I => &mut self.phase1,
            Phase::II => &mut self.phase2,
        };
        t[code as usize] = !t[code as usize];
    }
}

impl Default for ThinningLut {
    fn default() -> Self {
        build_lut()
    }
}

impl std::fmt::Debug for ThinningLut {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ThinningLut {{ phase1: {} codes, phase2: {} codes }}",
            self.count(Phase::I),
            self.count(Phase::II)
        )
    }
}

pub fn build_lut() -> ThinningLut {
    ThinningLut::with_min_neighbors(DEFAULT_MIN_NEIGHBORS)
}

/// Neighborhood code of position `j` in a row, given zero-padded rows
/// (`width + 2` entries, image column `x` at index `x + 1`).
#[inline]
pub(crate) fn padded_code(above: &[u8], cur: &[u8], below: &[u8], x: usize) -> u8 {
    above[x + 1]
        | above[x + 2] << 1
        | cur[x + 2] << 2
        | below[x + 2] << 3
        | below[x + 1] << 4
        | below[x] << 5
        | cur[x] << 6
        | above[x] << 7
}

/// One row of a parallel pass. Rows are zero-padded by one on each side;
/// the output row is not padded. Returns the number of deletions.
pub(crate) fn thin_row(
    lut: &[bool; 256],
    above: &[u8],
    cur: &[u8],
    below: &[u8],
    out: &mut [u8],
) -> usize {
    let mut deleted = 0;
    for (x, o) in out.iter_mut().enumerate() {
        let p = cur[x + 1];
        *o = p;
        if p != 0 && lut[padded_code(above, cur, below, x) as usize] {
            *o = 0;
            deleted += 1;
        }
    }
    deleted
}

fn padded_rows(img: &BinaryImage) -> Vec<u8> {
    let w = img.width() + 2;
    let mut buf = vec![0u8; w * (img.height() + 2)];
    for y in 0..img.height() {
        buf[(y + 1) * w + 1..(y + 1) * w + 1 + img.width()].copy_from_slice(img.row(y));
    }
    buf
}

/// One parallel sub-iteration: every decision reads the input image only.
pub fn thin_pass_with(lut: &ThinningLut, img: &BinaryImage, phase: Phase) -> (BinaryImage, usize) {
    let (width, height) = img.dims();
    let w = width + 2;
    let padded = padded_rows(img);
    let table = lut.table(phase);
    let mut out = vec![0u8; width * height];
    let mut changed = 0;
    for y in 0..height {
        changed += thin_row(
            table,
            &padded[y * w..(y + 1) * w],
            &padded[(y + 1) * w..(y + 2) * w],
            &padded[(y + 2) * w..(y + 3) * w],
            &mut out[y * width..(y + 1) * width],
        );
    }
    let out = BinaryImage::new(width, height, out).expect("pass preserves dimensions");
    (out, changed)
}

pub fn thin_pass(img: &BinaryImage, phase: Phase) -> (BinaryImage, usize) {
    thin_pass_with(&build_lut(), img, phase)
}

pub const DEFAULT_ITERATIONS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThinningResult {
    pub image: BinaryImage,
    /// Deletions of phase I plus phase II, per iteration.
    pub changed_per_iteration: Vec<usize>,
    pub iterations_run: usize,
}

#[derive(Debug, Clone)]
pub struct ThinOptions {
    pub iterations: usize,
    /// Stop after the first iteration that deletes nothing.
    pub early_exit: bool,
    pub lut: ThinningLut,
}

impl Default for ThinOptions {
    fn default() -> Self {
        ThinOptions {
            iterations: DEFAULT_ITERATIONS,
            early_exit: false,
            lut: build_lut(),
        }
    }
}

impl ThinOptions {
    pub fn iterations(iterations: usize) -> Self {
        ThinOptions {
            iterations,
            ..Default::default()
        }
    }
}

pub fn thin_with(img: &BinaryImage, opts: &ThinOptions) -> ThinningResult {
    let mut image = img.clone();
    let mut changed_per_iteration = Vec::with_capacity(opts.iterations);
    for _ in 0..opts.iterations {
        let (after_first, n1) = thin_pass_with(&opts.lut, &image, Phase::I);
        let (after_second, n2) = thin_pass_with(&opts.lut, &after_first, Phase::II);
        image = after_second;
        changed_per_iteration.push(n1 + n2);
        if opts.early_exit && n1 + n2 == 0 {
            break;
        }
    }
    ThinningResult {
        image,
        iterations_run: changed_per_iteration.len(),
        changed_per_iteration,
    }
}

/// Fixed-count thinning with the default tables.
pub fn thin(img: &BinaryImage, iterations: usize) -> ThinningResult {
    thin_with(img, &ThinOptions::iterations(iterations))
}

/// Deletions per iteration divided by the first iteration's deletions.
pub fn iteration_profile(img: &BinaryImage, max_iter: usize) -> Vec<f64> {
    normalize_profile(&thin(img, max_iter.max(1)).changed_per_iteration)
}

pub fn normalize_profile(counts: &[usize]) -> Vec<f64> {
    match counts.first() {
        Some(&first) if first > 0 => counts.iter().map(|&c| c as f64 / first as f64).collect(),
        _ => vec![0.0; counts.len()],
    }
}

/// OR over the 2x2 window anchored at its top-left pixel.
pub fn dilate_2x2(img: &BinaryImage) -> BinaryImage {
    let (width, height) = img.dims();
    let zeros = vec![0u8; width];
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        let below = if y + 1 < height {
            img.row(y + 1)
        } else {
            &zeros[..]
        };
        dilate_row_into(img.row(y), below, &mut out);
    }
    BinaryImage::new(width, height, out).expect("dilation preserves dimensions")
}

pub(crate) fn dilate_row_into(cur: &[u8], below: &[u8], out: &mut Vec<u8>) {
    let w = cur.len();
    for x in 0..w {
        let mut v = cur[x] | below[x];
        if x + 1 < w {
            v |= cur[x + 1] | below[x + 1];
        }
        out.push(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_examples() {
        assert_eq!(neighbor_transitions(0), 0);
        assert_eq!(neighbor_transitions(Neighborhood::P2), 1);
        let alt = Neighborhood::P2 | Neighborhood::P4 | Neighborhood::P6 | Neighborhood::P8;
        assert_eq!(neighbor_transitions(alt), 4);
        assert_eq!(neighbor_transitions(0xff), 0);
    }

    #[test]
    fn sum_examples() {
        assert_eq!(neighbor_sum(0), 0);
        assert_eq!(neighbor_sum(255), 8);
    }

    #[test]
    fn deletable_examples() {
        let run = Neighborhood::from_ring([true, true, true, true, false, false, false, false]);
        assert!(deletable(run.0, Phase::I));
        let omitted = Neighborhood::from_ring([true, true, true, true, true, false, false, false]);
        assert!(!deletable(omitted.0, Phase::I));
        assert!(!deletable(0, Phase::I));
        assert!(!deletable(0, Phase::II));
    }

    #[test]
    fn lut_cardinality() {
        let lut = build_lut();
        assert_eq!(lut.count(Phase::I), 26);
        assert_eq!(lut.count(Phase::II), 26);
        for code in 0..=255u8 {
            assert_eq!(
                lut.deletes(Phase::II, code),
                lut.deletes(Phase::I, Neighborhood(code).rotate180().0)
            );
        }
    }

    #[test]
    fn flip_changes_one_entry() {
        let mut lut = build_lut();
        lut.flip(Phase::II, 0);
        assert_eq!(lut.count(Phase::II), 27);
        assert_eq!(lut.count(Phase::I), 26);
    }

    #[test]
    fn pass_trivial_cases() {
        let z = BinaryImage::zeros(5, 5).unwrap();
        assert_eq!(thin_pass(&z, Phase::I), (z.clone(), 0));
        let mut dot = z.clone();
        dot.set(2, 2, true);
        assert_eq!(thin_pass(&dot, Phase::I), (dot.clone(), 0));
        assert_eq!(thin(&dot, 0).image, dot);
        assert_eq!(thin(&dot, 0).iterations_run, 0);
    }

    #[test]
    fn dilation_single_pixel() {
        let mut img = BinaryImage::zeros(10, 10).unwrap();
        img.set(5, 5, true);
        let d = dilate_2x2(&img);
        let ones: Vec<(usize, usize)> = (0..10)
            .flat_map(|y| (0..10).map(move |x| (x, y)))
            .filter(|&(x, y)| d.get(x, y))
            .collect();
        assert_eq!(ones, vec![(4, 4), (5, 4), (4, 5), (5, 5)]);
        let z = BinaryImage::zeros(3, 2).unwrap();
        assert_eq!(dilate_2x2(&z), z);
    }

    #[test]
    fn profile_guards() {
        let z = BinaryImage::zeros(8, 8).unwrap();
        assert_eq!(iteration_profile(&z, 4), vec![0.0; 4]);
        assert_eq!(normalize_profile(&[4, 2, 0]), vec![1.0, 0.5, 0.0]);
    }

    #[test]
    fn early_exit_stops() {
        let z = BinaryImage::zeros(8, 8).unwrap();
        let r = thin_with(
            &z,
            &ThinOptions {
                early_exit: true,
                ..Default::default()
            },
        );
        assert_eq!(r.iterations_run, 1);
    }
}
