//! Bit-level models of the block-mean datapath.
//!
//! The mean value calculator unit (MVCU) adds one 16-pixel block row per
//! cycle together with an 8-bit feedback word, using a Dadda tree of
//! carry-save adders followed by a carry-lookahead adder. After 16 cycles
//! the accumulated high parts equal the block sum shifted right by 8.

use crate::error::{Error, Result};

/// Unsigned value tagged with the number of wires carrying it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitVector {
    width: u32,
    value: u64,
}

impl BitVector {
    pub const MAX_WIDTH: u32 = 63;

    pub fn new(width: u32, value: u64) -> Result<Self> {
        if width == 0 || width > Self::MAX_WIDTH {
            return Err(Error::Arithmetic(format!("unsupported width {width}")));
        }
        if value >> width != 0 {
            return Err(Error::Arithmetic(format!(
                "value {value} does not fit in {width} bits"
            )));
        }
        Ok(BitVector { width, value })
    }

    pub fn byte(value: u8) -> Self {
        BitVector {
            width: 8,
            value: value as u64,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn bit(&self, i: u32) -> bool {
        i < self.width && (self.value >> i) & 1 == 1
    }

    fn zero_extend(self, width: u32) -> Self {
        debug_assert!(width >= self.width);
        BitVector {
            width,
            value: self.value,
        }
    }
}

fn bits_needed(max: u64) -> u32 {
    (64 - max.leading_zeros()).max(1)
}

/// One carry-save adder layer over equal-width operands: a bank of full
/// adders, one per bit position.
///
/// The sum keeps the operand width; the carry is one bit wider because each
/// majority bit moves up one position.
pub fn csa(a: BitVector, b: BitVector, c: BitVector) -> Result<(BitVector, BitVector)> {
    if a.width != b.width || b.width != c.width {
        return Err(Error::Arithmetic(format!(
            "csa operand widths differ: {}, {}, {}",
            a.width, b.width, c.width
        )));
    }
    let w = a.width;
    if w + 1 > BitVector::MAX_WIDTH {
        return Err(Error::Arithmetic(format!("csa width {w} too large")));
    }
    let sum = a.value ^ b.value ^ c.value;
    let majority = (a.value & b.value) | (a.value & c.value) | (b.value & c.value);
    Ok((
        BitVector {
            width: w,
            value: sum,
        },
        BitVector {
            width: w + 1,
            value: majority << 1,
        },
    ))
}

/// Operand inside the tree together with the largest value its wires can carry.
#[derive(Debug, Clone, Copy)]
struct TreeOperand {
    bits: BitVector,
    bound: u64,
}

impl TreeOperand {
    fn narrowed(value: u64, bound: u64) -> Self {
        TreeOperand {
            bits: BitVector {
                width: bits_needed(bound),
                value,
            },
            bound,
        }
    }
}

/// Result of reducing many operands to a sum/carry pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DaddaReduction {
    pub sum: BitVector,
    pub carry: BitVector,
    /// Operand count entering each layer, ending with the final 2.
    pub layer_counts: Vec<usize>,
    /// CSAs used in each layer.
    pub layer_csas: Vec<usize>,
    /// Integer total of the operands entering each layer, ending with `sum + carry`.
    pub layer_totals: Vec<u64>,
}

/// Largest Dadda height (2, 3, 4, 6, 9, 13, 19, ...) strictly below `n`.
fn dadda_target(n: usize) -> usize {
    let mut prev = 2;
    let mut d = 2;
    while d < n {
        prev = d;
        d = d * 3 / 2;
    }
    prev
}

/// Dadda reduction of any number (≥ 2) of operands down to two.
///
/// Each layer uses exactly enough CSAs to reach the next Dadda height.
/// Operands are grouped greedily: widest first, left to right, and every
/// group is zero-extended to its widest member.
pub fn dadda_reduce(inputs: &[BitVector]) -> Result<DaddaReduction> {
    if inputs.len() < 2 {
        return Err(Error::Arithmetic(format!(
            "need at least 2 operands, got {}",
            inputs.len()
        )));
    }
    let mut ops: Vec<TreeOperand> = inputs
        .iter()
        .map(|&bits| TreeOperand {
            bits,
            bound: (1u64 << bits.width) - 1,
        })
        .collect();
    // no single operand can exceed the largest possible total
    let global_bound: u64 = ops.iter().map(|o| o.bound).sum();
    let mut layer_counts = Vec::new();
    let mut layer_csas = Vec::new();
    let mut layer_totals = Vec::new();

    while ops.len() > 2 {
        layer_counts.push(ops.len());
        layer_totals.push(ops.iter().map(|o| o.bits.value).sum());

        let csas = ops.len() - dadda_target(ops.len());
        layer_csas.push(csas);
        // stable: ties keep their left-to-right order
        ops.sort_by_key(|o| std::cmp::Reverse(o.bits.width));
        let passthrough = ops.split_off(3 * csas);
        let mut next = Vec::with_capacity(passthrough.len() + 2 * csas);
        for group in ops.chunks_exact(3) {
            let w = group.iter().map(|o| o.bits.width).max().unwrap_or(1);
            let (s, c) = csa(
                group[0].bits.zero_extend(w),
                group[1].bits.zero_extend(w),
                group[2].bits.zero_extend(w),
            )?;
            let total_bound = group.iter().map(|o| o.bound).sum::<u64>().min(global_bound);
            let sum_bound = total_bound.min((1u64 << w) - 1);
            let carry_bound = total_bound.min((1u64 << (w + 1)) - 2);
            next.push(TreeOperand::narrowed(s.value, sum_bound));
            next.push(TreeOperand::narrowed(c.value, carry_bound));
        }
        next.extend(passthrough);
        ops = next;
    }

    layer_counts.push(2);
    layer_totals.push(ops[0].bits.value + ops[1].bits.value);
    Ok(DaddaReduction {
        sum: ops[0].bits,
        carry: ops[1].bits,
        layer_counts,
        layer_csas,
        layer_totals,
    })
}

/// The MVCU adder: sixteen pixels plus the 8-bit feedback word.
pub fn dadda_reduce_17(inputs: &[BitVector]) -> Result<DaddaReduction> {
    if inputs.len() != 17 {
        return Err(Error::Arithmetic(format!(
            "expected 17 operands, got {}",
            inputs.len()
        )));
    }
    if let Some(bad) = inputs.iter().find(|b| b.width != 8) {
        return Err(Error::Arithmetic(format!(
            "expected 8-bit operands, got width {}",
            bad.width
        )));
    }
    dadda_reduce(inputs)
}

/// Carry-lookahead addition in 4-bit blocks with explicit generate/propagate
/// terms; the block carry-out ripples into the next block.
pub fn cla_add(a: BitVector, b: BitVector, out_width: u32) -> Result<BitVector> {
    let width = a.width.max(b.width);
    let blocks = width.div_ceil(4);
    let mut carry = false;
    let mut value = 0u64;
    for blk in 0..blocks {
        let base = 4 * blk;
        let g: [bool; 4] = std::array::from_fn(|i| a.bit(base + i as u32) & b.bit(base + i as u32));
        let p: [bool; 4] = std::array::from_fn(|i| a.bit(base + i as u32) ^ b.bit(base + i as u32));
        let c0 = carry;
        let c1 = g[0] | (p[0] & c0);
        let c2 = g[1] | (p[1] & g[0]) | (p[1] & p[0] & c0);
        let c3 = g[2] | (p[2] & g[1]) | (p[2] & p[1] & g[0]) | (p[2] & p[1] & p[0] & c0);
        let c4 = g[3]
            | (p[3] & g[2])
            | (p[3] & p[2] & g[1])
            | (p[3] & p[2] & p[1] & g[0])
            | (p[3] & p[2] & p[1] & p[0] & c0);
        for (i, ci) in [c0, c1, c2, c3].into_iter().enumerate() {
            value |= ((p[i] ^ ci) as u64) << (base + i as u32);
        }
        carry = c4;
    }
    value |= (carry as u64) << (4 * blocks);
    if out_width == 0 || out_width > BitVector::MAX_WIDTH || value >> out_width != 0 {
        return Err(Error::Arithmetic(format!(
            "sum {value} overflows {out_width}-bit output"
        )));
    }
    Ok(BitVector {
        width: out_width,
        value,
    })
}

/// Pixels per MVCU row and rows per block.
pub const MVCU_LANE: usize = 16;
/// Width of the final adder output; 16 * 255 + 255 = 4335 < 2^13.
pub const MVCU_SUM_BITS: u32 = 13;

/// Register state of one MVCU.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct MvcuState {
    /// Low byte of the previous adder output, fed back as the 17th operand.
    pub low_feedback: u8,
    /// Sum of the per-cycle high parts (adder output >> 8).
    pub high_accum: u32,
    pub cycles_done: u8,
}

impl MvcuState {
    /// Running sum represented by the registers.
    pub fn total(&self) -> u64 {
        self.high_accum as u64 * 256 + self.low_feedback as u64
    }
}

/// Adds one 16-pixel block row through the Dadda tree and CLA.
pub fn mvcu_cycle(state: MvcuState, row: &[u8]) -> Result<MvcuState> {
    if state.cycles_done as usize >= MVCU_LANE {
        return Err(Error::Arithmetic("MVCU cycle overrun".into()));
    }
    if row.len() != MVCU_LANE {
        return Err(Error::Arithmetic(format!(
            "MVCU row must have {MVCU_LANE} pixels, got {}",
            row.len()
        )));
    }
    let mut operands = [BitVector::byte(0); 17];
    for (op, &p) in operands.iter_mut().zip(row) {
        *op = BitVector::byte(p);
    }
    operands[16] = BitVector::byte(state.low_feedback);
    let tree = dadda_reduce_17(&operands)?;
    let t = cla_add(tree.sum, tree.carry, MVCU_SUM_BITS)?.value();
    Ok(MvcuState {
        low_feedback: (t & 0xff) as u8,
        high_accum: state.high_accum + (t >> 8) as u32,
        cycles_done: state.cycles_done + 1,
    })
}

/// Floor mean of a 16x16 block given row-major, via 16 MVCU cycles.
pub fn mvcu_mean(block: &[u8]) -> Result<u8> {
    if block.len() != MVCU_LANE * MVCU_LANE {
        return Err(Error::Arithmetic(format!(
            "MVCU block must have 256 pixels, got {}",
            block.len()
        )));
    }
    let mut state = MvcuState::default();
    for row in block.chunks_exact(MVCU_LANE) {
        state = mvcu_cycle(state, row)?;
    }
    Ok(state.high_accum as u8)
}
