use std::fmt::Write as _;
use std::path::Path;

use ridgeline::binarize::{
    adaptive_binarize, otsu_binarize, otsu_threshold, select_block_size, FactorMode, QualityReport,
    DEFAULT_BLOCK_CANDIDATES,
};
use ridgeline::chain::{run_chain, ChainOptions};
use ridgeline::image_io::{load_pgm, save_pbm, save_pgm};
use ridgeline::morphology::ThinOptions;
use ridgeline::pipeline_sim::{compare_with_reference, timing_report, Pipeline, PipelineConfig};
use ridgeline::synth::{self, FingerprintParams};
use ridgeline::{BinaryImage, GrayImage};

use crate::files::{read_input, CliError, Manifest, PendingFiles};
use crate::{
    Baseline, BlockSizeArg, BlocksizeArgs, MetricsArgs, OutputArgs, ProcessArgs, SimulateArgs,
    SynthArgs, SynthKind, EXIT_MISMATCH,
};

pub struct Outcome {
    pub stdout: String,
    pub code: u8,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { stdout, code: 0 }
    }
}

fn load(path: &Path) -> Result<(Vec<u8>, GrayImage), CliError> {
    let bytes = read_input(path)?;
    let img = load_pgm(&bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok((bytes, img))
}

fn fmt_metric(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.6}")
    }
}

fn fmt_correlation(c: Option<f64>) -> String {
    c.map_or_else(|| "undefined".into(), fmt_metric)
}

fn stage_outputs(
    outputs: &OutputArgs,
    binarized: &BinaryImage,
    dilated: &BinaryImage,
    thinned: &BinaryImage,
) -> PendingFiles {
    let mut pending = PendingFiles::default();
    let taps = [
        ("binarized", &outputs.out_binarized, binarized),
        ("dilated", &outputs.out_dilated, dilated),
        ("thinned", &outputs.out_thinned, thinned),
    ];
    for (label, path, img) in taps {
        if let Some(path) = path {
            pending.add(label, path, save_pbm(img));
        }
    }
    pending
}

/// Candidates that fit in the image; the rest are reported on stderr.
fn fitting_candidates(img: &GrayImage, candidates: &[usize]) -> Vec<usize> {
    let limit = img.width().min(img.height());
    let mut fit = Vec::new();
    for &n in candidates {
        if n > limit {
            eprintln!(
                "warning: block size {n} exceeds the {}x{} image, skipped",
                img.width(),
                img.height()
            );
        } else {
            fit.push(n);
        }
    }
    fit
}

pub fn process(args: &ProcessArgs) -> Result<Outcome, CliError> {
    let (bytes, img) = load(&args.input)?;
    let block_size = match args.block_size {
        BlockSizeArg::Fixed(n) => n,
        BlockSizeArg::Auto => {
            let fit = fitting_candidates(&img, &DEFAULT_BLOCK_CANDIDATES);
            if fit.is_empty() {
                return Err(CliError::Io(
                    "image is smaller than every block size candidate".into(),
                ));
            }
            select_block_size(&img, &fit, args.factor_mode)?.selected
        }
    };
    let opts = ChainOptions {
        block_size,
        overlap: args.overlap,
        polarity: args.polarity,
        thinning: ThinOptions::iterations(args.iterations),
    };
    let out = run_chain(&img, &opts)?;
    let quality = QualityReport::compare(&otsu_binarize(&img, args.polarity)?, &out.binarized)?;

    let mut stdout = String::new();
    let _ = writeln!(stdout, "image {}x{}", img.width(), img.height());
    let _ = writeln!(stdout, "block_size {block_size}");
    let _ = writeln!(stdout, "overlap {}", args.overlap);
    let _ = writeln!(stdout, "polarity {}", args.polarity);
    let _ = writeln!(
        stdout,
        "foreground binarized {}",
        out.binarized.count_ones()
    );
    let _ = writeln!(stdout, "foreground dilated {}", out.dilated.count_ones());
    let _ = writeln!(
        stdout,
        "foreground thinned {}",
        out.thinned.image.count_ones()
    );
    let changed: Vec<String> = out
        .thinned
        .changed_per_iteration
        .iter()
        .map(|c| c.to_string())
        .collect();
    let _ = writeln!(stdout, "deleted_per_iteration {}", changed.join(" "));
    let _ = writeln!(stdout, "snr_ms_vs_otsu {}", fmt_metric(quality.snr_ms));
    let _ = writeln!(stdout, "e_rms_vs_otsu {}", fmt_metric(quality.e_rms));
    let _ = writeln!(
        stdout,
        "correlation_vs_otsu {}",
        fmt_correlation(quality.correlation)
    );

    let mut pending = stage_outputs(
        &args.outputs,
        &out.binarized,
        &out.dilated,
        &out.thinned.image,
    );
    let mut manifest = Manifest::new("process", &args.input, &bytes);
    manifest.field("block_size", block_size);
    manifest.field(
        "block_size_source",
        match args.block_size {
            BlockSizeArg::Fixed(_) => "fixed",
            BlockSizeArg::Auto => "block-factor",
        },
    );
    manifest.field("overlap", args.overlap);
    manifest.field("polarity", args.polarity);
    manifest.field("iterations", args.iterations);
    manifest.field("factor_mode", args.factor_mode);
    manifest.field("metric snr_ms_vs_otsu", fmt_metric(quality.snr_ms));
    manifest.field("metric e_rms_vs_otsu", fmt_metric(quality.e_rms));
    manifest.field(
        "metric correlation_vs_otsu",
        fmt_correlation(quality.correlation),
    );
    manifest.attach(&mut pending, args.outputs.manifest.as_deref());
    pending.commit()?;
    Ok(Outcome::ok(stdout))
}

pub fn simulate(args: &SimulateArgs) -> Result<Outcome, CliError> {
    let (bytes, img) = load(&args.input)?;
    let cfg = PipelineConfig {
        row_width: args.row_width,
        block_size: args.block_size,
        overlap: args.overlap,
        polarity: args.polarity,
        thinning_superstages: args.iterations,
        clock_hz: args.clock_mhz.map(|m| m * 1e6),
        ..Default::default()
    };
    cfg.validate()?;
    let timing_clock = cfg.clock_hz;
    if let Some(hz) = timing_clock {
        // reject a bad clock before spending time on the run
        timing_report(&Default::default(), hz)?;
    }
    let trace = Pipeline::new(cfg.clone())?
        .record_events(args.trace.is_some())
        .run(&img)?;
    let report = compare_with_reference(&trace, &img, &cfg)?;
    let c = &trace.cycles;

    let mut stdout = String::new();
    let _ = writeln!(stdout, "image {}x{}", img.width(), img.height());
    let _ = writeln!(stdout, "mvcu_lanes {}", trace.mvcu_lanes);
    let _ = writeln!(stdout, "thinning_stages {}", trace.thinning_stages);
    let _ = writeln!(
        stdout,
        "peak_accumulator_banks {}",
        trace.peak_accumulator_banks
    );
    let _ = writeln!(stdout, "peak_latch_sets {}", trace.peak_latch_sets);
    match trace.min_latch_gap {
        Some(g) => {
            let _ = writeln!(stdout, "min_latch_gap {g}");
        }
        None => {
            let _ = writeln!(stdout, "min_latch_gap none");
        }
    }
    let per_row = |v: &[u64]| match (v.iter().min(), v.iter().max()) {
        (Some(lo), Some(hi)) if lo == hi => lo.to_string(),
        (Some(lo), Some(hi)) => format!("{lo}..{hi}"),
        _ => "none".into(),
    };
    let _ = writeln!(
        stdout,
        "input_clocks_per_row {}",
        per_row(&c.row_input_clocks)
    );
    let _ = writeln!(
        stdout,
        "output_clocks_per_row {}",
        per_row(&c.row_output_clocks)
    );
    match timing_clock {
        Some(hz) => {
            let _ = writeln!(stdout, "{}", timing_report(c, hz)?);
        }
        None => {
            let _ = writeln!(stdout, "main clocks        {}", c.main_clocks);
            let _ = writeln!(stdout, "pipeline clocks    {}", c.pipeline_clocks);
            let _ = writeln!(stdout, "  input            {}", c.phases.input);
            let _ = writeln!(stdout, "  binarize         {}", c.phases.binarize);
            let _ = writeln!(stdout, "  dilate           {}", c.phases.dilate);
            let _ = writeln!(stdout, "  thin             {}", c.phases.thin);
            let _ = writeln!(stdout, "  output           {}", c.phases.output);
            let _ = writeln!(stdout, "input bus busy     {}", c.input_busy);
            let _ = writeln!(stdout, "output bus busy    {}", c.output_busy);
        }
    }
    let pass = report.is_pass();
    if pass {
        let _ = writeln!(stdout, "equivalence PASS");
    } else {
        let _ = writeln!(
            stdout,
            "equivalence FAIL binarize {} dilate {} thin {}",
            report.binarize.len(),
            report.dilate.len(),
            report.thin.len()
        );
        return Ok(Outcome {
            stdout,
            code: EXIT_MISMATCH,
        });
    }

    let mut pending = stage_outputs(
        &args.outputs,
        &trace.binarized,
        &trace.dilated,
        &trace.thinned,
    );
    if let Some(path) = &args.trace {
        let mut log = String::new();
        for e in &trace.events {
            let _ = writeln!(log, "{e}");
        }
        pending.add("trace", path, log.into_bytes());
    }
    let mut manifest = Manifest::new("simulate", &args.input, &bytes);
    manifest.field("block_size", cfg.block_size);
    manifest.field("overlap", cfg.overlap);
    manifest.field("polarity", cfg.polarity);
    manifest.field("iterations", cfg.thinning_superstages);
    manifest.field("row_width", cfg.row_width);
    manifest.field("cycles main", c.main_clocks);
    manifest.field("cycles pipeline", c.pipeline_clocks);
    manifest.field("cycles input", c.phases.input);
    manifest.field("cycles binarize", c.phases.binarize);
    manifest.field("cycles dilate", c.phases.dilate);
    manifest.field("cycles thin", c.phases.thin);
    manifest.field("cycles output", c.phases.output);
    manifest.field("equivalence", "PASS");
    manifest.attach(&mut pending, args.outputs.manifest.as_deref());
    pending.commit()?;
    Ok(Outcome::ok(stdout))
}

pub fn blocksize(args: &BlocksizeArgs) -> Result<Outcome, CliError> {
    let (_, img) = load(&args.input)?;
    let fit = fitting_candidates(&img, &args.candidates);
    if fit.is_empty() {
        return Err(CliError::Io(
            "image is smaller than every block size candidate".into(),
        ));
    }
    let mul = select_block_size(&img, &fit, FactorMode::Multiply)?;
    let div = select_block_size(&img, &fit, FactorMode::Divide)?;

    let mut stdout = String::new();
    let _ = writeln!(stdout, "image {}x{}", img.width(), img.height());
    let _ = writeln!(
        stdout,
        "{:>6} {:>16} {:>16} {:>16}",
        "N", "sigma2", "factor_mul", "factor_div"
    );
    for (m, d) in mul.candidates.iter().zip(&div.candidates) {
        let _ = writeln!(
            stdout,
            "{:>6} {:>16.6} {:>16.6} {:>16.6}",
            m.block_size, m.sigma2, m.factor, d.factor
        );
    }
    let _ = writeln!(stdout, "selected_mul {}", mul.selected);
    let _ = writeln!(stdout, "selected_div {}", div.selected);
    let chosen = match args.factor_mode {
        FactorMode::Multiply => mul.selected,
        FactorMode::Divide => div.selected,
    };
    let _ = writeln!(
        stdout,
        "selected {chosen} (mode {}, largest factor, ties to smaller N)",
        args.factor_mode
    );
    Ok(Outcome::ok(stdout))
}

pub fn metrics(args: &MetricsArgs) -> Result<Outcome, CliError> {
    let (_, img) = load(&args.input)?;
    let mut stdout = String::new();
    let _ = writeln!(stdout, "image {}x{}", img.width(), img.height());
    let baseline = match args.baseline {
        Baseline::Otsu => {
            let _ = writeln!(
                stdout,
                "baseline otsu threshold {}",
                otsu_threshold(&img.histogram())?
            );
            otsu_binarize(&img, args.polarity)?
        }
        Baseline::Adaptive => {
            let _ = writeln!(stdout, "baseline adaptive 16:1");
            adaptive_binarize(&img, 16, 1, args.polarity)?
        }
    };
    let _ = writeln!(
        stdout,
        "{:>6} {:>8} {:>14} {:>12} {:>12}",
        "block", "overlap", "snr_ms", "e_rms", "correlation"
    );
    for &(n, o) in &args.configs {
        let f = adaptive_binarize(&img, n, o, args.polarity)?;
        let q = QualityReport::compare(&baseline, &f)?;
        let _ = writeln!(
            stdout,
            "{:>6} {:>8} {:>14} {:>12} {:>12}",
            n,
            o,
            fmt_metric(q.snr_ms),
            fmt_metric(q.e_rms),
            fmt_correlation(q.correlation)
        );
    }
    Ok(Outcome::ok(stdout))
}

pub fn synth(args: &SynthArgs) -> Result<Outcome, CliError> {
    if args.width == 0 || args.height == 0 {
        return Err(CliError::Usage("image dimensions must be positive".into()));
    }
    let (img, what) = match args.kind {
        SynthKind::Fingerprint => {
            let p = FingerprintParams::random(args.width, args.height, args.seed);
            let what = format!("fingerprint {:?} period {:.2}", p.pattern, p.period).to_lowercase();
            (synth::fingerprint(&p), what)
        }
        SynthKind::Noise => (
            synth::noise(args.width, args.height, args.seed),
            "noise".to_string(),
        ),
    };
    let mut pending = PendingFiles::default();
    pending.add("image", &args.output, save_pgm(&img));
    pending.commit()?;
    Ok(Outcome::ok(format!(
        "wrote {} {}x{} seed {} {what}\n",
        args.output.display(),
        args.width,
        args.height,
        args.seed
    )))
}
