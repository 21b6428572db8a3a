//! Acceptance suite: one line per criterion, non-zero exit if any hard
//! criterion fails. Soft criteria are printed with their measured values
//! and never affect the exit status.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ridgeline::binarize::*;
use ridgeline::bitarith::{cla_add, dadda_reduce_17, mvcu_mean, BitVector, MVCU_SUM_BITS};
use ridgeline::image_io::load_pgm;
use ridgeline::morphology::*;
use ridgeline::pipeline_sim::*;
use ridgeline::{synth, BinaryImage, GrayImage};

const LUT_TIME_LIMIT: Duration = Duration::from_secs(1);
const THRESHOLD_REL_TOL: f64 = 1e-12;
const DATAPATH_TRIALS: usize = 10_000;
const NOISE_IMAGES: u64 = 100;
const SIM_TIME_LIMIT: Duration = Duration::from_secs(60);
const EXHAUSTION_RATIO: f64 = 0.01;
const MAX_BAR_WIDTH: usize = 13;

/// Rows of the table of neighborhoods removed by conditions c and d,
/// written as P2..P9.
const OMITTED: [[u8; 8]; 6] = [
    [1, 1, 1, 1, 1, 0, 0, 0],
    [0, 0, 1, 1, 1, 1, 1, 0],
    [1, 1, 1, 1, 1, 1, 0, 0],
    [0, 1, 1, 1, 1, 1, 1, 0],
    [0, 0, 1, 1, 1, 1, 1, 1],
    [1, 1, 1, 1, 1, 0, 0, 1],
];

#[derive(PartialEq)]
enum Kind {
    Hard,
    Soft,
}

struct Outcome {
    id: &'static str,
    kind: Kind,
    pass: bool,
    detail: String,
}

fn hard(id: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        kind: Kind::Hard,
        pass,
        detail,
    }
}

fn soft(id: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        kind: Kind::Soft,
        pass,
        detail,
    }
}

fn code_of(p: &[u8; 8]) -> u8 {
    p.iter().enumerate().fold(0, |c, (i, &b)| c | (b << i))
}

fn corpus() -> Vec<(String, GrayImage)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/fingerprints");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
        .collect();
    paths.sort();
    assert!(!paths.is_empty(), "no corpus images in {}", dir.display());
    paths
        .into_iter()
        .map(|p| {
            let img = load_pgm(&std::fs::read(&p).unwrap()).unwrap();
            (p.file_name().unwrap().to_string_lossy().into_owned(), img)
        })
        .collect()
}

fn c1_lut_cardinality() -> Outcome {
    let start = Instant::now();
    let lut = build_lut();
    let mut agree = true;
    let mut brute = [0usize; 2];
    for code in 0..=255u8 {
        let p = common::ring_from_code(code);
        for (k, (phase, one)) in [(Phase::I, true), (Phase::II, false)]
            .into_iter()
            .enumerate()
        {
            let want = common::raw_deletable(&p, one, 3);
            brute[k] += want as usize;
            agree &= lut.deletes(phase, code) == want;
        }
    }
    let elapsed = start.elapsed();
    let (n1, n2) = (lut.count(Phase::I), lut.count(Phase::II));
    hard(
        "1 LUT cardinality",
        agree && n1 == 26 && n2 == 26 && brute == [26, 26] && elapsed < LUT_TIME_LIMIT,
        format!("phase I {n1}, phase II {n2}, brute force {brute:?}, tables agree {agree}, {elapsed:.2?}"),
    )
}

fn c2_derivation() -> Outcome {
    let ab: Vec<u8> = (0..=255u8)
        .filter(|&c| {
            let p = common::ring_from_code(c);
            (3..=6).contains(&common::raw_b(&p)) && common::raw_a(&p) == 1
        })
        .collect();
    let mut per_sum = [0usize; 9];
    for &c in &ab {
        per_sum[c.count_ones() as usize] += 1;
    }
    let mut removed: Vec<u8> = ab
        .iter()
        .copied()
        .filter(|&c| {
            let p = common::ring_from_code(c);
            !(p[0] * p[2] * p[4] == 0 && p[2] * p[4] * p[6] == 0)
        })
        .collect();
    removed.sort_unstable();
    let mut table: Vec<u8> = OMITTED.iter().map(code_of).collect();
    table.sort_unstable();
    let pass = ab.len() == 32 && per_sum[3..=6] == [8, 8, 8, 8] && removed == table;
    hard(
        "2 32->26 derivation",
        pass,
        format!(
            "a,b admit {} codes ({:?} for sums 3..6), c,d remove {} codes, matches table {}",
            ab.len(),
            &per_sum[3..=6],
            removed.len(),
            removed == table
        ),
    )
}

fn c3_threshold_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p = rng.gen_range(0.01..0.99);
        let s = ClassStats {
            mu1: rng.gen_range(0.0..255.0),
            mu2: rng.gen_range(0.0..255.0),
            sigma2: rng.gen_range(0.0..5000.0),
            p1: p,
            p2: p,
        };
        let t = optimal_threshold(&s).unwrap();
        let mid = (s.mu1 + s.mu2) / 2.0;
        worst = worst.max((t - mid).abs() / mid.abs().max(f64::MIN_POSITIVE));
    }
    hard(
        "3 equal-prior reduction",
        worst <= THRESHOLD_REL_TOL,
        format!("1000 random class stats, worst relative error {worst:e} (tolerance {THRESHOLD_REL_TOL:e})"),
    )
}

fn c4_datapath() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut adder_bad = 0;
    for _ in 0..DATAPATH_TRIALS {
        let v: Vec<u8> = (0..17).map(|_| rng.gen()).collect();
        let ops: Vec<BitVector> = v.iter().map(|&b| BitVector::byte(b)).collect();
        let r = dadda_reduce_17(&ops).unwrap();
        let got = cla_add(r.sum, r.carry, MVCU_SUM_BITS).unwrap().value();
        if got != v.iter().map(|&b| b as u64).sum::<u64>()
            || r.layer_counts != [17, 13, 9, 6, 4, 3, 2]
        {
            adder_bad += 1;
        }
    }
    let mut mean_bad = 0;
    for _ in 0..DATAPATH_TRIALS {
        let block: Vec<u8> = (0..256).map(|_| rng.gen()).collect();
        let want = block.iter().map(|&b| b as u32).sum::<u32>() / 256;
        if mvcu_mean(&block).unwrap() as u32 != want {
            mean_bad += 1;
        }
    }
    hard(
        "4 datapath equivalence",
        adder_bad == 0 && mean_bad == 0,
        format!(
            "{DATAPATH_TRIALS} adder trials with {adder_bad} mismatches, {DATAPATH_TRIALS} block means with {mean_bad} mismatches"
        ),
    )
}

struct SimRun {
    name: String,
    trace: SimTrace,
    report: EquivalenceReport,
}

fn simulate_all(corpus: &[(String, GrayImage)]) -> (Vec<SimRun>, Duration) {
    let cfg = PipelineConfig::default();
    let start = Instant::now();
    let mut runs = Vec::new();
    let noise = (0..NOISE_IMAGES).map(|s| (format!("noise{s}"), synth::noise(512, 512, 1000 + s)));
    for (name, img) in corpus.iter().cloned().chain(noise) {
        let trace = Pipeline::new(cfg.clone()).unwrap().run(&img).unwrap();
        let report = compare_with_reference(&trace, &img, &cfg).unwrap();
        runs.push(SimRun {
            name,
            trace,
            report,
        });
    }
    (runs, start.elapsed())
}

fn c5_simulator(runs: &[SimRun], elapsed: Duration, corpus_len: usize) -> Outcome {
    let failing: Vec<&str> = runs
        .iter()
        .filter(|r| !r.report.is_pass())
        .map(|r| r.name.as_str())
        .collect();
    hard(
        "5 simulator equivalence",
        failing.is_empty() && elapsed < SIM_TIME_LIMIT,
        format!(
            "{corpus_len} corpus + {NOISE_IMAGES} noise images, {} bit-identical at all three taps, {elapsed:.2?} (limit {SIM_TIME_LIMIT:?}){}",
            runs.len() - failing.len(),
            if failing.is_empty() { String::new() } else { format!(", failing {failing:?}") }
        ),
    )
}

fn c6_bookkeeping(runs: &[SimRun]) -> Outcome {
    let mut bad = Vec::new();
    for r in runs {
        let c = &r.trace.cycles;
        let h = r.trace.binarized.height() as u64;
        let ok = c.phases.input == 128 * h
            && c.row_input_clocks.len() as u64 == h
            && c.row_input_clocks.iter().all(|&n| n == 128)
            && c.row_output_clocks.len() as u64 == h
            && c.row_output_clocks.iter().all(|&n| n == 16)
            && c.output_busy == 16 * h;
        if !ok {
            bad.push(r.name.as_str());
        }
    }
    hard(
        "6 cycle bookkeeping",
        bad.is_empty(),
        format!(
            "{} traces: 128 input clocks and 16 output clocks per row, input phase 65536 per 512-row frame{}",
            runs.len(),
            if bad.is_empty() { String::new() } else { format!(", failing {bad:?}") }
        ),
    )
}

fn late_ratio(profile: &[f64]) -> f64 {
    profile[6..].iter().cloned().fold(0.0, f64::max)
}

fn c7_exhaustion(corpus: &[(String, GrayImage)]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_bar = 0.0f64;
    let mut bars = 0;
    for width in 1..=MAX_BAR_WIDTH {
        for _ in 0..12 {
            let len = rng.gen_range(width + 8..80);
            let (x0, y0) = (rng.gen_range(0..6), rng.gen_range(0..6));
            let horizontal = rng.gen_bool(0.5);
            let (bw, bh) = if horizontal {
                (len, width)
            } else {
                (width, len)
            };
            let img = BinaryImage::from_fn(bw + x0 + 6, bh + y0 + 6, |x, y| {
                (x0..x0 + bw).contains(&x) && (y0..y0 + bh).contains(&y)
            })
            .unwrap();
            worst_bar = worst_bar.max(late_ratio(&iteration_profile(&img, 12)));
            bars += 1;
        }
    }
    let mut worst_corpus = 0.0f64;
    for (_, img) in corpus {
        let b = adaptive_binarize(img, 16, 1, Polarity::DarkForeground).unwrap();
        worst_corpus = worst_corpus
            .max(late_ratio(&iteration_profile(&b, 12)))
            .max(late_ratio(&iteration_profile(&dilate_2x2(&b), 12)));
    }
    hard(
        "7 thinning exhaustion",
        worst_bar < EXHAUSTION_RATIO && worst_corpus < EXHAUSTION_RATIO,
        format!(
            "iterations 7..12 relative to iteration 1: {bars} bars of width <= {MAX_BAR_WIDTH} max {worst_bar:.4}, corpus max {worst_corpus:.4} (limit {EXHAUSTION_RATIO})"
        ),
    )
}

fn c8_monotone_fixed_point() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut passes, mut violations, mut unstable) = (0, 0, 0);
    for _ in 0..300 {
        let (w, h) = (rng.gen_range(1..48), rng.gen_range(1..48));
        let density = rng.gen_range(0.2..0.9);
        let mut img = BinaryImage::from_fn(w, h, |_, _| rng.gen_bool(density)).unwrap();
        let mut phase = Phase::I;
        let mut quiet = 0;
        while quiet < 2 {
            let (out, n) = thin_pass(&img, phase);
            passes += 1;
            if !out.is_subset_of(&img) || img.count_ones() - out.count_ones() != n {
                violations += 1;
            }
            quiet = if n == 0 { quiet + 1 } else { 0 };
            img = out;
            phase = phase.other();
        }
        // both sub-iterations are quiet: any further pass must be too
        for p in [Phase::I, Phase::II] {
            let (out, n) = thin_pass(&img, p);
            if n != 0 || out != img {
                unstable += 1;
            }
        }
    }
    hard(
        "8 monotonicity and fixed point",
        violations == 0 && unstable == 0,
        format!("300 random images, {passes} passes, {violations} non-subset passes, {unstable} unstable fixed points"),
    )
}

fn c9_reference_figures(runs: &[SimRun]) -> Outcome {
    let c = &runs[0].trace.cycles;
    let report = timing_report(c, PUBLISHED.clock_mhz * 1e6).unwrap();
    let text = report.to_string();
    let echoed = [
        "6.84 ms at 79.4 MHz",
        "6.29 ns",
        "10.36 ms vs 70 ms",
        "97.8%",
        "20.6%",
    ]
    .iter()
    .all(|s| text.contains(s));
    hard(
        "9a published figures echoed",
        echoed,
        format!(
            "not reproducible at desk scale; model needs {} main clocks = {:.3} ms at 79.4 MHz vs published 6.84 ms",
            c.main_clocks,
            report.seconds * 1e3
        ),
    )
}

fn c9_overlap_direction(corpus: &[(String, GrayImage)]) -> Outcome {
    let mut wins = 0;
    let mut cells = Vec::new();
    for (name, img) in corpus {
        let g = otsu_binarize(img, Polarity::DarkForeground).unwrap();
        let s0 = snr_ms(
            &g,
            &adaptive_binarize(img, 16, 0, Polarity::DarkForeground).unwrap(),
        )
        .unwrap();
        let s1 = snr_ms(
            &g,
            &adaptive_binarize(img, 16, 1, Polarity::DarkForeground).unwrap(),
        )
        .unwrap();
        wins += (s1 >= s0) as usize;
        cells.push(format!("{name} {s1:.3}/{s0:.3}"));
    }
    soft(
        "9b overlap-1 SNRms >= overlap-0",
        2 * wins > corpus.len(),
        format!(
            "{wins}/{} corpus images (overlap-1/overlap-0: {})",
            corpus.len(),
            cells.join(", ")
        ),
    )
}

fn checkerboard(size: usize, cell: usize) -> GrayImage {
    GrayImage::from_fn(size, size, |x, y| {
        if (x / cell + y / cell).is_multiple_of(2) {
            0
        } else {
            255
        }
    })
    .unwrap()
}

fn c10_block_factor_constructed() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let constant = GrayImage::filled(512, 512, 128).unwrap();
    for mode in [FactorMode::Multiply, FactorMode::Divide] {
        let r = select_block_size(&constant, &DEFAULT_BLOCK_CANDIDATES, mode).unwrap();
        ok &= r.selected == 4 && r.candidates.iter().all(|c| c.factor == 0.0);
        ok &= r == select_block_size(&constant, &[256, 64, 16, 4], mode).unwrap();
    }
    notes.push("constant -> 4 in both modes".to_string());
    // 16-pixel cells: 4x4 and 16x16 blocks see pure cells (sigma2 = 127.5^2),
    // 64 and 256 average to a constant. Multiply favours 16, divide favours 4.
    let board = checkerboard(512, 16);
    let mul = select_block_size(&board, &DEFAULT_BLOCK_CANDIDATES, FactorMode::Multiply).unwrap();
    let div = select_block_size(&board, &DEFAULT_BLOCK_CANDIDATES, FactorMode::Divide).unwrap();
    ok &= mul.selected == 16 && div.selected == 4;
    ok &=
        mul == select_block_size(&board, &DEFAULT_BLOCK_CANDIDATES, FactorMode::Multiply).unwrap();
    notes.push(format!(
        "16-cell checkerboard -> mul {}, div {}",
        mul.selected, div.selected
    ));
    // exact tie: 256-blocks at 100 or 140 (sigma2 400), 16-blocks offset
    // by +-20 in a checkerboard inside each (sigma2 800), so the multiply
    // factors of N = 16 and N = 256 are both 1600
    let tie_img = GrayImage::from_fn(512, 512, |x, y| {
        let base = if (x / 256 + y / 256) % 2 == 0 {
            100
        } else {
            140
        };
        if (x / 16 + y / 16) % 2 == 0 {
            base + 20
        } else {
            base - 20
        }
    })
    .unwrap();
    let tie = select_block_size(&tie_img, &DEFAULT_BLOCK_CANDIDATES, FactorMode::Multiply).unwrap();
    let f = |n: usize| {
        tie.candidates
            .iter()
            .find(|c| c.block_size == n)
            .unwrap()
            .factor
    };
    ok &= f(16) == 1600.0 && f(256) == 1600.0 && tie.selected == 16;
    notes.push(format!(
        "16/256 tie at factor {} -> {}",
        f(16),
        tie.selected
    ));
    let dup = select_block_size(&board, &[16, 16, 4, 4], FactorMode::Divide).unwrap();
    ok &= dup.selected == 4 && dup.candidates.len() == 2;
    hard(
        "10a block factor on constructed images",
        ok,
        notes.join("; "),
    )
}

fn c10_block_factor_corpus(corpus: &[(String, GrayImage)]) -> Outcome {
    let mut hits = 0;
    let mut cells = Vec::new();
    for (name, img) in corpus {
        let r = select_block_size(img, &DEFAULT_BLOCK_CANDIDATES, FactorMode::default()).unwrap();
        let d = select_block_size(img, &DEFAULT_BLOCK_CANDIDATES, FactorMode::Divide).unwrap();
        hits += (r.selected == 16) as usize;
        cells.push(format!("{name} mul {} div {}", r.selected, d.selected));
    }
    soft(
        "10b corpus selects 16",
        2 * hits > corpus.len(),
        format!(
            "{hits}/{} corpus images ({})",
            corpus.len(),
            cells.join(", ")
        ),
    )
}

fn main() {
    // libtest flags such as --nocapture or a name filter are accepted and ignored
    let corpus = corpus();
    let mut outcomes = vec![
        c1_lut_cardinality(),
        c2_derivation(),
        c3_threshold_reduction(),
        c4_datapath(),
    ];
    let (runs, elapsed) = simulate_all(&corpus);
    outcomes.push(c5_simulator(&runs, elapsed, corpus.len()));
    outcomes.push(c6_bookkeeping(&runs));
    outcomes.push(c7_exhaustion(&corpus));
    outcomes.push(c8_monotone_fixed_point());
    outcomes.push(c9_reference_figures(&runs));
    outcomes.push(c9_overlap_direction(&corpus));
    outcomes.push(c10_block_factor_constructed());
    outcomes.push(c10_block_factor_corpus(&corpus));

    println!();
    let mut hard_failures = 0;
    for o in &outcomes {
        let tag = match (&o.kind, o.pass) {
            (Kind::Hard, true) => "PASS",
            (Kind::Hard, false) => {
                hard_failures += 1;
                "FAIL"
            }
            (Kind::Soft, true) => "PASS (soft)",
            (Kind::Soft, false) => "FAIL (soft, reported only)",
        };
        println!("[{tag}] criterion {}: {}", o.id, o.detail);
    }
    println!(
        "acceptance: {} hard criteria passed, {hard_failures} failed",
        outcomes
            .iter()
            .filter(|o| o.kind == Kind::Hard && o.pass)
            .count()
    );
    if hard_failures > 0 {
        std::process::exit(1);
    }
}
