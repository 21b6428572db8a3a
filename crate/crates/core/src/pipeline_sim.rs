//! Cycle-level model of the streaming binarize / dilate / thin pipeline.
//!
//! Time advances one main clock per [`Pipeline::step`]. The input
//! distributor latches `bus_width / 8` pixels per main clock, so a row takes
//! `row_width / pixels_per_clock` main clocks to load; a counter of that
//! period wraps to produce the pipeline clock, on which every stage shifts
//! one row forward.
//!
//! Stage chain, in dataflow order:
//!
//! * input distributor: one row of 8-bit registers, loaded from the bus;
//! * binarization section: a 16-row delay line, banks of MVCUs (one lane per
//!   block column) accumulating block sums, and latched threshold register
//!   sets; a row leaving the delay line is compared against the thresholds
//!   latched for its owner block row;
//! * dilation stage: two binary rows, OR over the 2x2 window;
//! * thinning: per super-stage a TPC1 unit and a TPC2 unit, each holding a
//!   three-row window and looking decisions up in a 256-entry table;
//! * output buffer: the binary row leaves on the 32-bit bus, one word per
//!   main clock.
//!
//! Rows carry their frame index, so the end of a frame is seen as a bubble
//! arriving behind the last row; bottom rows are then completed with zeros.

use std::collections::VecDeque;
use std::fmt;

use crate::binarize::{axis_origins, Polarity};
use crate::bitarith::{mvcu_cycle, MvcuState, MVCU_LANE};
use crate::chain::{run_chain, ChainOptions};
use crate::error::{Error, Result};
use crate::image_io::{BinaryImage, GrayImage};
use crate::morphology::{build_lut, Phase, ThinOptions, ThinningLut};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub row_width: usize,
    pub bus_width: usize,
    pub pixel_bits: usize,
    pub block_size: usize,
    pub overlap: usize,
    pub thinning_superstages: usize,
    pub polarity: Polarity,
    /// Main clock frequency for wall-time estimates.
    pub clock_hz: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            row_width: 512,
            bus_width: 32,
            pixel_bits: 8,
            block_size: MVCU_LANE,
            overlap: 1,
            thinning_superstages: 6,
            polarity: Polarity::DarkForeground,
            clock_hz: None,
        }
    }
}

/// Pipeline stages making up one thinning iteration (two windows of three rows).
pub const STAGES_PER_SUPERSTAGE: usize = 6;
/// Gray rows buffered while block thresholds are accumulated.
pub const BINARIZE_DELAY_ROWS: usize = MVCU_LANE;

impl PipelineConfig {
    pub fn pixels_per_clock(&self) -> usize {
        self.bus_width / self.pixel_bits
    }

    /// Main clocks per pipeline clock.
    pub fn row_load_clocks(&self) -> usize {
        self.row_width / self.pixels_per_clock()
    }

    /// Main clocks to push one binary row out on the bus.
    pub fn output_clocks_per_row(&self) -> usize {
        self.row_width / self.bus_width
    }

    pub fn counter_bits(&self) -> u32 {
        self.row_load_clocks().trailing_zeros()
    }

    /// MVCU lanes per bank, one per block column.
    pub fn mvcu_count(&self) -> Result<usize> {
        Ok(axis_origins(self.row_width, self.block_size, self.overlap)?.len())
    }

    pub fn thinning_stage_count(&self) -> usize {
        self.thinning_superstages * STAGES_PER_SUPERSTAGE
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.pixel_bits != 8 {
            return bad(format!("pixel_bits must be 8, got {}", self.pixel_bits));
        }
        if self.bus_width == 0
            || !self.bus_width.is_multiple_of(self.pixel_bits)
            || self.bus_width > 32
        {
            return bad(format!(
                "bus width {} must be a multiple of 8 no larger than 32",
                self.bus_width
            ));
        }
        if self.block_size != MVCU_LANE {
            return bad(format!(
                "the MVCU datapath handles {MVCU_LANE}x{MVCU_LANE} blocks, got {}",
                self.block_size
            ));
        }
        if self.row_width == 0
            || !self.row_width.is_multiple_of(self.pixels_per_clock())
            || !self.row_width.is_multiple_of(self.bus_width)
        {
            return bad(format!(
                "row width {} must be divisible by the bus width in pixels and in bits",
                self.row_width
            ));
        }
        if !self.row_load_clocks().is_power_of_two() {
            return bad(format!(
                "row load of {} clocks is not a power of two; the row counter cannot wrap on it",
                self.row_load_clocks()
            ));
        }
        if self.output_clocks_per_row() > self.row_load_clocks() {
            return bad("output bus cannot drain a row within one pipeline clock".into());
        }
        axis_origins(self.row_width, self.block_size, self.overlap)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StageId {
    Clock,
    Input,
    Mvcu,
    Binarize,
    Dilate,
    Tpc { superstage: usize, phase: Phase },
    Output,
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageId::Clock => f.write_str("clock"),
            StageId::Input => f.write_str("input"),
            StageId::Mvcu => f.write_str("mvcu"),
            StageId::Binarize => f.write_str("binarize"),
            StageId::Dilate => f.write_str("dilate"),
            StageId::Tpc { superstage, phase } => {
                let p = if *phase == Phase::I { 1 } else { 2 };
                write!(f, "tpc{superstage}.{p}")
            }
            StageId::Output => f.write_str("output"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    /// A full row sits in the input registers.
    RowLatched {
        row: usize,
    },
    /// Pipeline clock edge.
    Tick {
        pipeline_clock: u64,
    },
    AccumulateStart {
        block_row: usize,
        bank: usize,
    },
    ThresholdLatch {
        block_row: usize,
        set: usize,
    },
    RowOut {
        row: usize,
    },
    /// Last bus word of a row has left the output buffer.
    RowEmitted {
        row: usize,
    },
    Idle,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::RowLatched { row } => write!(f, "row_latched {row}"),
            EventKind::Tick { pipeline_clock } => write!(f, "tick {pipeline_clock}"),
            EventKind::AccumulateStart { block_row, bank } => {
                write!(f, "accumulate block_row={block_row} bank={bank}")
            }
            EventKind::ThresholdLatch { block_row, set } => {
                write!(f, "latch block_row={block_row} set={set}")
            }
            EventKind::RowOut { row } => write!(f, "row_out {row}"),
            EventKind::RowEmitted { row } => write!(f, "row_emitted {row}"),
            EventKind::Idle => f.write_str("idle"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub main_clock: u64,
    pub stage: StageId,
    pub kind: EventKind,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.main_clock, self.stage, self.kind)
    }
}

/// Main clocks partitioned by what the pipeline was doing.
///
/// While rows are still arriving every clock counts as input; afterwards a
/// clock is charged to the stage holding the frame's last row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct PhaseClocks {
    pub input: u64,
    pub binarize: u64,
    pub dilate: u64,
    pub thin: u64,
    pub output: u64,
}

impl PhaseClocks {
    pub fn total(&self) -> u64 {
        self.input + self.binarize + self.dilate + self.thin + self.output
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CycleCounts {
    pub main_clocks: u64,
    pub pipeline_clocks: u64,
    pub phases: PhaseClocks,
    /// Clocks during which the input bus carried pixels.
    pub input_busy: u64,
    /// Clocks during which the output bus carried a word.
    pub output_busy: u64,
    /// Main clocks spent loading each row.
    pub row_input_clocks: Vec<u64>,
    /// Main clocks spent emitting each row.
    pub row_output_clocks: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimTrace {
    pub cycles: CycleCounts,
    pub binarized: BinaryImage,
    pub dilated: BinaryImage,
    pub thinned: BinaryImage,
    pub mvcu_lanes: usize,
    /// Most MVCU banks accumulating at once.
    pub peak_accumulator_banks: usize,
    /// Most threshold register sets holding live values at once.
    pub peak_latch_sets: usize,
    /// Smallest pipeline-clock gap between two updates of the same register set.
    pub min_latch_gap: Option<u64>,
    pub thinning_stages: usize,
    pub events: Vec<Event>,
}

struct GrayRow {
    index: usize,
    pixels: Vec<u8>,
}

/// Binary row padded with one zero on each side.
#[derive(Clone)]
struct BitRow {
    index: usize,
    bits: Vec<u8>,
}

impl BitRow {
    fn unpadded(&self) -> &[u8] {
        &self.bits[1..self.bits.len() - 1]
    }
}

/// Block-row geometry of the frame being processed.
struct RowSchedule {
    origins: Vec<usize>,
    /// First and last block row containing each image row.
    spans: Vec<(usize, usize)>,
    owner: Vec<usize>,
    /// Last image row owned by each block row.
    last_owned: Vec<usize>,
}

impl RowSchedule {
    fn new(height: usize, block: usize, overlap: usize) -> Result<Self> {
        let origins = axis_origins(height, block, overlap)?;
        let mut spans = Vec::with_capacity(height);
        let mut owner = Vec::with_capacity(height);
        let mut last_owned = vec![0; origins.len()];
        for y in 0..height {
            let containing: Vec<usize> = (0..origins.len())
                .filter(|&k| origins[k] <= y && y < origins[k] + block)
                .collect();
            let first = containing[0];
            spans.push((first, *containing.last().unwrap()));
            owner.push(first);
            last_owned[first] = y;
        }
        Ok(RowSchedule {
            origins,
            spans,
            owner,
            last_owned,
        })
    }
}

struct AccumBank {
    block_row: usize,
    lanes: Vec<MvcuState>,
}

struct LatchSet {
    block_row: usize,
    thresholds: Vec<u8>,
}

fn allocate<T>(pool: &mut Vec<Option<T>>, item: T) -> usize {
    match pool.iter().position(Option::is_none) {
        Some(i) => {
            pool[i] = Some(item);
            i
        }
        None => {
            pool.push(Some(item));
            pool.len() - 1
        }
    }
}

struct BinarizationSection {
    lane_origins: Vec<usize>,
    lane_of_column: Vec<usize>,
    polarity: Polarity,
    delay: VecDeque<Option<GrayRow>>,
    banks: Vec<Option<AccumBank>>,
    latches: Vec<Option<LatchSet>>,
    last_latch: Vec<Option<u64>>,
    min_latch_gap: Option<u64>,
    peak_banks: usize,
    peak_latches: usize,
    out: Option<BitRow>,
}

impl BinarizationSection {
    fn new(cfg: &PipelineConfig) -> Result<Self> {
        let lane_origins = axis_origins(cfg.row_width, cfg.block_size, cfg.overlap)?;
        let lane_of_column = (0..cfg.row_width)
            .map(|x| {
                lane_origins
                    .iter()
                    .position(|&o| o <= x && x < o + cfg.block_size)
                    .expect("lanes cover the row")
            })
            .collect();
        Ok(BinarizationSection {
            lane_origins,
            lane_of_column,
            polarity: cfg.polarity,
            delay: (0..BINARIZE_DELAY_ROWS).map(|_| None).collect(),
            banks: Vec::new(),
            latches: Vec::new(),
            last_latch: Vec::new(),
            min_latch_gap: None,
            peak_banks: 0,
            peak_latches: 0,
            out: None,
        })
    }

    fn holds_row(&self, row: usize) -> bool {
        self.delay.iter().flatten().any(|r| r.index == row)
            || self.out.as_ref().is_some_and(|r| r.index == row)
    }

    fn clock(
        &mut self,
        input: Option<GrayRow>,
        sched: &RowSchedule,
        pclk: u64,
        events: &mut Vec<(StageId, EventKind)>,
    ) -> Result<Option<BitRow>> {
        self.delay.push_front(input);
        let leaving = self.delay.pop_back().flatten();
        let compared = match leaving {
            Some(row) => Some(self.compare(row, sched)?),
            None => None,
        };
        if let Some(row) = self.delay.front().and_then(Option::as_ref) {
            let (y, pixels) = (row.index, row.pixels.as_slice());
            let (first, last) = sched.spans[y];
            for k in first..=last {
                if sched.origins[k] == y {
                    let lanes = vec![MvcuState::default(); self.lane_origins.len()];
                    let bank = allocate(
                        &mut self.banks,
                        AccumBank {
                            block_row: k,
                            lanes,
                        },
                    );
                    self.peak_banks = self.peak_banks.max(self.banks.iter().flatten().count());
                    events.push((
                        StageId::Mvcu,
                        EventKind::AccumulateStart { block_row: k, bank },
                    ));
                }
                let slot = self
                    .banks
                    .iter()
                    .position(|b| b.as_ref().is_some_and(|b| b.block_row == k))
                    .ok_or_else(|| Error::Config(format!("no MVCU bank for block row {k}")))?;
                let bank = self.banks[slot].as_mut().unwrap();
                for (state, &o) in bank.lanes.iter_mut().zip(&self.lane_origins) {
                    *state = mvcu_cycle(*state, &pixels[o..o + MVCU_LANE])?;
                }
                if y == sched.origins[k] + MVCU_LANE - 1 {
                    let bank = self.banks[slot].take().unwrap();
                    let thresholds = bank.lanes.iter().map(|s| s.high_accum as u8).collect();
                    let set = allocate(
                        &mut self.latches,
                        LatchSet {
                            block_row: k,
                            thresholds,
                        },
                    );
                    self.peak_latches =
                        self.peak_latches.max(self.latches.iter().flatten().count());
                    if self.last_latch.len() <= set {
                        self.last_latch.resize(set + 1, None);
                    }
                    if let Some(prev) = self.last_latch[set] {
                        let gap = pclk - prev;
                        self.min_latch_gap = Some(self.min_latch_gap.map_or(gap, |g| g.min(gap)));
                    }
                    self.last_latch[set] = Some(pclk);
                    events.push((
                        StageId::Mvcu,
                        EventKind::ThresholdLatch { block_row: k, set },
                    ));
                }
            }
        }
        if let Some(row) = &compared {
            events.push((StageId::Binarize, EventKind::RowOut { row: row.index }));
        }
        Ok(compared)
    }

    fn compare(&mut self, row: GrayRow, sched: &RowSchedule) -> Result<BitRow> {
        let k = sched.owner[row.index];
        let slot = self
            .latches
            .iter()
            .position(|s| s.as_ref().is_some_and(|s| s.block_row == k))
            .ok_or_else(|| {
                Error::Config(format!(
                    "row {} compared before block row {k} latched",
                    row.index
                ))
            })?;
        let set = self.latches[slot].as_ref().unwrap();
        let mut bits = Vec::with_capacity(row.pixels.len() + 2);
        bits.push(0);
        for (x, &p) in row.pixels.iter().enumerate() {
            bits.push(
                self.polarity
                    .classify(p, set.thresholds[self.lane_of_column[x]]),
            );
        }
        bits.push(0);
        if row.index == sched.last_owned[k] {
            self.latches[slot] = None;
        }
        Ok(BitRow {
            index: row.index,
            bits,
        })
    }
}

/// Emits row `i` once row `i + 1` (or the end-of-frame bubble) is present.
fn row_ready(cur: &Option<BitRow>, input: &Option<BitRow>, height: usize) -> bool {
    match (cur, input) {
        (Some(c), Some(n)) => n.index == c.index + 1,
        (Some(c), None) => c.index + 1 == height,
        (None, _) => false,
    }
}

struct DilationStage {
    held: Option<BitRow>,
    out: Option<BitRow>,
}

impl DilationStage {
    fn clock(&mut self, input: Option<BitRow>, height: usize) -> Option<BitRow> {
        let result = if row_ready(&self.held, &input, height) {
            let cur = self.held.as_ref().unwrap();
            let w = cur.bits.len();
            let mut bits = vec![0u8; w];
            let below = input.as_ref().map(|r| r.bits.as_slice());
            for x in 1..w - 1 {
                let mut v = cur.bits[x] | cur.bits[x + 1];
                if let Some(b) = below {
                    v |= b[x] | b[x + 1];
                }
                bits[x] = v;
            }
            Some(BitRow {
                index: cur.index,
                bits,
            })
        } else {
            None
        };
        self.held = input;
        result
    }
}

/// Three row registers feeding one thinning processor circuit.
struct TpcUnit {
    id: StageId,
    phase: Phase,
    prev: Option<BitRow>,
    cur: Option<BitRow>,
    out: Option<BitRow>,
}

impl TpcUnit {
    fn holds_row(&self, row: usize) -> bool {
        [&self.prev, &self.cur, &self.out]
            .into_iter()
            .flatten()
            .any(|r| r.index == row)
    }

    fn clock(&mut self, input: Option<BitRow>, lut: &ThinningLut, height: usize) -> Option<BitRow> {
        let result = if row_ready(&self.cur, &input, height) {
            let cur = self.cur.as_ref().unwrap();
            let w = cur.bits.len();
            let zeros;
            let above = match &self.prev {
                Some(p) if p.index + 1 == cur.index => p.bits.as_slice(),
                _ => {
                    zeros = vec![0u8; w];
                    zeros.as_slice()
                }
            };
            let below_zeros;
            let below = match &input {
                Some(n) => n.bits.as_slice(),
                None => {
                    below_zeros = vec![0u8; w];
                    below_zeros.as_slice()
                }
            };
            let table = lut.table(self.phase);
            let mut bits = vec![0u8; w];
            // 3x3 window sliding left to right: (north, centre, south) per column
            let mut left = (above[0], cur.bits[0], below[0]);
            let mut mid = (above[1], cur.bits[1], below[1]);
            for x in 1..w - 1 {
                let right = (above[x + 1], cur.bits[x + 1], below[x + 1]);
                if mid.1 != 0 {
                    let code = mid.0
                        | right.0 << 1
                        | right.1 << 2
                        | right.2 << 3
                        | mid.2 << 4
                        | left.2 << 5
                        | left.1 << 6
                        | left.0 << 7;
                    bits[x] = (!table[code as usize]) as u8;
                }
                left = mid;
                mid = right;
            }
            Some(BitRow {
                index: cur.index,
                bits,
            })
        } else {
            None
        };
        self.prev = self.cur.take();
        self.cur = input;
        result
    }
}

struct OutputBuffer {
    row: Option<BitRow>,
    words_sent: usize,
    started_at: u64,
}

struct Frame {
    words: Vec<u32>,
    height: usize,
    schedule: RowSchedule,
    rows_loaded: usize,
    binarized: Vec<u8>,
    dilated: Vec<u8>,
    thinned: Vec<u8>,
    rows_emitted: usize,
}

/// The simulated hardware. Feed one frame, then step or run it to completion.
pub struct Pipeline {
    cfg: PipelineConfig,
    lut: ThinningLut,
    main_clock: u64,
    counter: usize,
    pipeline_clock: u64,
    input_regs: Vec<u8>,
    binarizer: BinarizationSection,
    dilation: DilationStage,
    tpcs: Vec<TpcUnit>,
    output: OutputBuffer,
    frame: Option<Frame>,
    cycles: CycleCounts,
    events: Vec<Event>,
    keep_events: bool,
}

pub fn build_pipeline(cfg: PipelineConfig) -> Result<Pipeline> {
    Pipeline::new(cfg)
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        Self::with_lut(cfg, build_lut())
    }

    /// Pipeline whose TPCs use `lut` instead of the standard tables.
    pub fn with_lut(cfg: PipelineConfig, lut: ThinningLut) -> Result<Self> {
        cfg.validate()?;
        let binarizer = BinarizationSection::new(&cfg)?;
        let tpcs = (0..cfg.thinning_superstages)
            .flat_map(|s| [Phase::I, Phase::II].map(move |phase| (s, phase)))
            .map(|(superstage, phase)| TpcUnit {
                id: StageId::Tpc { superstage, phase },
                phase,
                prev: None,
                cur: None,
                out: None,
            })
            .collect();
        Ok(Pipeline {
            input_regs: vec![0; cfg.row_width],
            binarizer,
            dilation: DilationStage {
                held: None,
                out: None,
            },
            tpcs,
            output: OutputBuffer {
                row: None,
                words_sent: 0,
                started_at: 0,
            },
            frame: None,
            cycles: CycleCounts::default(),
            events: Vec::new(),
            keep_events: false,
            main_clock: 0,
            counter: 0,
            pipeline_clock: 0,
            lut,
            cfg,
        })
    }

    /// Keep every event in the trace (the text log).
    pub fn record_events(mut self, keep: bool) -> Self {
        self.keep_events = keep;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn main_clock(&self) -> u64 {
        self.main_clock
    }

    pub fn pipeline_clock(&self) -> u64 {
        self.pipeline_clock
    }

    /// Current value of the row counter feeding the load decoder.
    pub fn row_counter(&self) -> usize {
        self.counter
    }

    pub fn input_registers(&self) -> &[u8] {
        &self.input_regs
    }

    /// Rows fully latched by the input distributor so far.
    pub fn rows_loaded(&self) -> usize {
        self.frame.as_ref().map_or(0, |f| f.rows_loaded)
    }

    /// Loads a frame; the pipeline must be fresh.
    pub fn feed(&mut self, img: &GrayImage) -> Result<()> {
        if self.frame.is_some() {
            return Err(Error::Config("pipeline already holds a frame".into()));
        }
        if img.width() != self.cfg.row_width {
            return Err(Error::Dimension {
                expected: format!("row width {}", self.cfg.row_width),
                actual: format!("row width {}", img.width()),
            });
        }
        if img.height() < self.cfg.block_size {
            return Err(Error::Dimension {
                expected: format!("at least {} rows", self.cfg.block_size),
                actual: format!("{} rows", img.height()),
            });
        }
        let ppc = self.cfg.pixels_per_clock();
        let words = img
            .pixels()
            .chunks_exact(ppc)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u32, |w, (j, &p)| w | (p as u32) << (8 * j))
            })
            .collect();
        let n = img.pixels().len();
        self.frame = Some(Frame {
            words,
            height: img.height(),
            schedule: RowSchedule::new(img.height(), self.cfg.block_size, self.cfg.overlap)?,
            rows_loaded: 0,
            binarized: vec![0; n],
            dilated: vec![0; n],
            thinned: vec![0; n],
            rows_emitted: 0,
        });
        Ok(())
    }

    pub fn is_drained(&self) -> bool {
        match &self.frame {
            Some(f) => f.rows_emitted == f.height,
            None => true,
        }
    }

    fn last_row_phase(&self, frame: &Frame) -> Option<fn(&mut PhaseClocks) -> &mut u64> {
        let last = frame.height - 1;
        if frame.rows_loaded < frame.height {
            return Some(|p| &mut p.input);
        }
        if self.output.row.as_ref().is_some_and(|r| r.index == last) {
            return Some(|p| &mut p.output);
        }
        if self.tpcs.iter().any(|t| t.holds_row(last)) {
            return Some(|p| &mut p.thin);
        }
        if self.dilation.held.as_ref().is_some_and(|r| r.index == last)
            || self.dilation.out.as_ref().is_some_and(|r| r.index == last)
        {
            return Some(|p| &mut p.dilate);
        }
        if self.binarizer.holds_row(last) {
            return Some(|p| &mut p.binarize);
        }
        None
    }

    /// Advances one main clock. A drained pipeline reports a single idle event.
    pub fn step(&mut self) -> Result<Vec<Event>> {
        if self.is_drained() {
            return Ok(vec![Event {
                main_clock: self.main_clock,
                stage: StageId::Clock,
                kind: EventKind::Idle,
            }]);
        }
        let mut frame = self.frame.take().expect("undrained pipeline has a frame");
        let result = self.step_frame(&mut frame);
        self.frame = Some(frame);
        result
    }

    fn step_frame(&mut self, frame: &mut Frame) -> Result<Vec<Event>> {
        let mut raw: Vec<(StageId, EventKind)> = Vec::new();
        let row_clocks = self.cfg.row_load_clocks();
        let ppc = self.cfg.pixels_per_clock();

        let charge = self
            .last_row_phase(frame)
            .ok_or_else(|| Error::Config("last row lost in the pipeline".into()))?;
        *charge(&mut self.cycles.phases) += 1;

        let loading = frame.rows_loaded < frame.height;
        if loading {
            // decoder output `counter` enables registers counter*ppc .. +ppc
            let word = frame.words[frame.rows_loaded * row_clocks + self.counter];
            for j in 0..ppc {
                self.input_regs[self.counter * ppc + j] = (word >> (8 * j)) as u8;
            }
            self.cycles.input_busy += 1;
        }

        if let Some(row) = self.output.row.take() {
            let bw = self.cfg.bus_width;
            let k = self.output.words_sent;
            let word = row.unpadded()[k * bw..(k + 1) * bw]
                .iter()
                .fold(0u32, |w, &b| (w << 1) | b as u32);
            // the receiver unpacks the bus word MSB first
            let base = row.index * self.cfg.row_width + k * bw;
            for j in 0..bw {
                frame.thinned[base + j] = ((word >> (bw - 1 - j)) & 1) as u8;
            }
            self.output.words_sent += 1;
            self.cycles.output_busy += 1;
            if self.output.words_sent == self.cfg.output_clocks_per_row() {
                self.cycles
                    .row_output_clocks
                    .push(self.main_clock + 1 - self.output.started_at);
                raw.push((StageId::Output, EventKind::RowEmitted { row: row.index }));
                frame.rows_emitted += 1;
            } else {
                self.output.row = Some(row);
            }
        }

        self.counter += 1;
        if self.counter == row_clocks {
            self.counter = 0;
            let latched = if loading {
                let index = frame.rows_loaded;
                frame.rows_loaded += 1;
                self.cycles.row_input_clocks.push(row_clocks as u64);
                raw.push((StageId::Input, EventKind::RowLatched { row: index }));
                Some(GrayRow {
                    index,
                    pixels: self.input_regs.clone(),
                })
            } else {
                None
            };
            self.tick(frame, latched, &mut raw)?;
        }

        let events: Vec<Event> = raw
            .into_iter()
            .map(|(stage, kind)| Event {
                main_clock: self.main_clock,
                stage,
                kind,
            })
            .collect();
        if self.keep_events {
            self.events.extend_from_slice(&events);
        }
        self.main_clock += 1;
        self.cycles.main_clocks = self.main_clock;
        self.cycles.pipeline_clocks = self.pipeline_clock;
        Ok(events)
    }

    /// Pipeline clock edge: every stage consumes its upstream register,
    /// downstream first so each reads the value from before the edge.
    fn tick(
        &mut self,
        frame: &mut Frame,
        latched: Option<GrayRow>,
        raw: &mut Vec<(StageId, EventKind)>,
    ) -> Result<()> {
        let pclk = self.pipeline_clock;
        raw.push((
            StageId::Clock,
            EventKind::Tick {
                pipeline_clock: pclk,
            },
        ));
        let height = frame.height;
        let w = self.cfg.row_width;

        let to_output = match self.tpcs.last_mut() {
            Some(t) => t.out.take(),
            None => self.dilation.out.take(),
        };
        if let Some(row) = to_output {
            if self.output.row.is_some() {
                return Err(Error::Config("output buffer overrun".into()));
            }
            self.output = OutputBuffer {
                row: Some(row),
                words_sent: 0,
                started_at: self.main_clock + 1,
            };
        }

        for i in (0..self.tpcs.len()).rev() {
            let input = if i == 0 {
                self.dilation.out.take()
            } else {
                self.tpcs[i - 1].out.take()
            };
            let out = self.tpcs[i].clock(input, &self.lut, height);
            if let Some(row) = &out {
                raw.push((self.tpcs[i].id, EventKind::RowOut { row: row.index }));
            }
            self.tpcs[i].out = out;
        }

        let input = self.binarizer.out.take();
        let dilated = self.dilation.clock(input, height);
        if let Some(row) = &dilated {
            frame.dilated[row.index * w..(row.index + 1) * w].copy_from_slice(row.unpadded());
            raw.push((StageId::Dilate, EventKind::RowOut { row: row.index }));
        }
        self.dilation.out = dilated;

        let binarized = self.binarizer.clock(latched, &frame.schedule, pclk, raw)?;
        if let Some(row) = &binarized {
            frame.binarized[row.index * w..(row.index + 1) * w].copy_from_slice(row.unpadded());
        }
        self.binarizer.out = binarized;

        self.pipeline_clock += 1;
        Ok(())
    }

    /// Runs `n` main clocks and returns all events.
    pub fn step_n(&mut self, n: u64) -> Result<Vec<Event>> {
        let mut all = Vec::new();
        for _ in 0..n {
            all.extend(self.step()?);
        }
        Ok(all)
    }

    /// Steps until the frame has left the output bus.
    pub fn finish(mut self) -> Result<SimTrace> {
        while !self.is_drained() {
            self.step()?;
        }
        let frame = self
            .frame
            .take()
            .ok_or_else(|| Error::Config("no frame was fed".into()))?;
        let (w, h) = (self.cfg.row_width, frame.height);
        Ok(SimTrace {
            cycles: self.cycles,
            binarized: BinaryImage::new(w, h, frame.binarized)?,
            dilated: BinaryImage::new(w, h, frame.dilated)?,
            thinned: BinaryImage::new(w, h, frame.thinned)?,
            mvcu_lanes: self.binarizer.lane_origins.len(),
            peak_accumulator_banks: self.binarizer.peak_banks,
            peak_latch_sets: self.binarizer.peak_latches,
            min_latch_gap: self.binarizer.min_latch_gap,
            thinning_stages: self.cfg.thinning_stage_count(),
            events: self.events,
        })
    }

    pub fn run(mut self, img: &GrayImage) -> Result<SimTrace> {
        self.feed(img)?;
        self.finish()
    }
}

/// Published reference figures for the FPGA implementation; echoed in
/// reports, never asserted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedFigures {
    pub clock_mhz: f64,
    pub frame_ms: f64,
    pub critical_path_ns: f64,
    pub thinning_ms: f64,
    pub prior_thinning_ms: f64,
    pub slices_xc2vp20_pct: f64,
    pub slices_xc2vp100_pct: f64,
    pub mvcu_count: usize,
}

pub const PUBLISHED: PublishedFigures = PublishedFigures {
    clock_mhz: 79.4,
    frame_ms: 6.84,
    critical_path_ns: 6.29,
    thinning_ms: 10.36,
    prior_thinning_ms: 70.0,
    slices_xc2vp20_pct: 97.8,
    slices_xc2vp100_pct: 20.6,
    mvcu_count: 34,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub cycles: CycleCounts,
    pub clock_hz: f64,
    pub seconds: f64,
    pub published: PublishedFigures,
}

pub fn timing_report(cycles: &CycleCounts, clock_hz: f64) -> Result<TimingReport> {
    if !(clock_hz > 0.0 && clock_hz.is_finite()) {
        return Err(Error::Config(format!(
            "clock frequency must be positive, got {clock_hz}"
        )));
    }
    Ok(TimingReport {
        cycles: cycles.clone(),
        clock_hz,
        seconds: cycles.main_clocks as f64 / clock_hz,
        published: PUBLISHED,
    })
}

impl fmt::Display for TimingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.cycles;
        let p = &self.published;
        writeln!(f, "main clocks        {}", c.main_clocks)?;
        writeln!(f, "pipeline clocks    {}", c.pipeline_clocks)?;
        writeln!(f, "  input            {}", c.phases.input)?;
        writeln!(f, "  binarize         {}", c.phases.binarize)?;
        writeln!(f, "  dilate           {}", c.phases.dilate)?;
        writeln!(f, "  thin             {}", c.phases.thin)?;
        writeln!(f, "  output           {}", c.phases.output)?;
        writeln!(f, "input bus busy     {}", c.input_busy)?;
        writeln!(f, "output bus busy    {}", c.output_busy)?;
        writeln!(f, "clock              {:.3} MHz", self.clock_hz / 1e6)?;
        writeln!(f, "estimated time     {:.4} ms", self.seconds * 1e3)?;
        writeln!(
            f,
            "published (FPGA)   {:.2} ms at {:.1} MHz, {:.2} ns critical path, {} MVCUs",
            p.frame_ms, p.clock_mhz, p.critical_path_ns, p.mvcu_count
        )?;
        write!(
            f,
            "published thinning {:.2} ms vs {:.0} ms prior design; slices {:.1}% / {:.1}%",
            p.thinning_ms, p.prior_thinning_ms, p.slices_xc2vp20_pct, p.slices_xc2vp100_pct
        )
    }
}

/// Pixels where the simulator and the software path disagree, per tap.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub binarize: Vec<(usize, usize)>,
    pub dilate: Vec<(usize, usize)>,
    pub thin: Vec<(usize, usize)>,
}

impl EquivalenceReport {
    pub fn is_pass(&self) -> bool {
        self.binarize.is_empty() && self.dilate.is_empty() && self.thin.is_empty()
    }
}

/// Software-path options matching a pipeline configuration.
pub fn reference_options(cfg: &PipelineConfig) -> ChainOptions {
    ChainOptions {
        block_size: cfg.block_size,
        overlap: cfg.overlap,
        polarity: cfg.polarity,
        thinning: ThinOptions::iterations(cfg.thinning_superstages),
    }
}

/// Diffs a finished trace against the software path run on `img`.
pub fn compare_with_reference(
    trace: &SimTrace,
    img: &GrayImage,
    cfg: &PipelineConfig,
) -> Result<EquivalenceReport> {
    let reference = run_chain(img, &reference_options(cfg))?;
    Ok(EquivalenceReport {
        binarize: trace.binarized.diff(&reference.binarized)?,
        dilate: trace.dilated.diff(&reference.dilated)?,
        thin: trace.thinned.diff(&reference.thinned.image)?,
    })
}

pub fn verify_against_reference(
    img: &GrayImage,
    cfg: &PipelineConfig,
) -> Result<EquivalenceReport> {
    let trace = Pipeline::new(cfg.clone())?.run(img)?;
    compare_with_reference(&trace, img, cfg)
}
