//! Command-line frontend: encode one sequence, compare controllers on the
//! same input and budget, sweep an axis, or dump region maps. Every run is
//! driven by a `RunConfig`, assembled from an optional flat key=value
//! config file with command-line flags layered on top.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use regionrc_core::report::{run_compare, run_encode, run_regions, run_sweep, SweepAxis};
use regionrc_core::{ControllerMode, RunConfig, RunOutput};

#[derive(Parser)]
#[command(name = "regionrc", version, about = "Region-based rate control over a small block codec")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode with one controller; writes frames.csv and summary.json.
    Encode(JobArgs),
    /// Run several controllers on identical input and budget; writes
    /// compare.csv, per-region.csv, and curves.csv.
    Compare(JobArgs),
    /// One run per value along an axis; the qp axis bypasses rate control
    /// and samples the per-region models.
    Sweep(SweepArgs),
    /// Dump the per-frame region maps as PGM images, nothing else.
    Regions(JobArgs),
}

fn mode_arg(s: &str) -> Result<ControllerMode, String> {
    ControllerMode::parse(s).ok_or_else(|| format!("unknown mode {s:?} (mbl, fl, t1, t2, cqp)"))
}

#[derive(Args)]
struct JobArgs {
    /// Flat key=value config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Raw YUV 4:2:0 input file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Luma width in pixels (multiple of 16).
    #[arg(long)]
    width: Option<usize>,
    /// Luma height in pixels (multiple of 16).
    #[arg(long)]
    height: Option<usize>,
    /// Source frame rate.
    #[arg(long)]
    fps: Option<f64>,
    /// Source frames to read; 0 reads the whole file.
    #[arg(long)]
    frames: Option<usize>,
    /// Source frames dropped between coded frames.
    #[arg(long)]
    frame_skip: Option<usize>,
    /// Controller for encode/regions: mbl, fl, t1, t2, or cqp.
    #[arg(long, value_parser = mode_arg)]
    mode: Option<ControllerMode>,
    /// Comma-separated controllers for compare.
    #[arg(long, value_delimiter = ',', value_parser = mode_arg)]
    modes: Option<Vec<ControllerMode>>,
    /// Target bits per second.
    #[arg(long)]
    bitrate: Option<f64>,
    /// Buffer size as a fraction of the bitrate.
    #[arg(long)]
    buffer_ratio: Option<f64>,
    /// Blend between fair-share and buffer-feedback frame targets.
    #[arg(long)]
    mu: Option<f64>,
    /// Intra period in frames; 0 means a single leading intra frame.
    #[arg(long)]
    gop: Option<usize>,
    /// Multiplier scale for rate-distortion decisions.
    #[arg(long)]
    alpha: Option<f64>,
    /// Keep one unweighted multiplier per region in t2.
    #[arg(long)]
    no_lambda_adjust: bool,
    /// Skip global-motion compensation of the frame difference.
    #[arg(long)]
    no_gmc: bool,
    /// Global-motion search range in pixels.
    #[arg(long, value_name = "PIXELS")]
    gmv_search_range: Option<u32>,
    /// Per-macroblock motion search range in pixels.
    #[arg(long, value_name = "PIXELS")]
    me_search: Option<u32>,
    /// Moving-region threshold on the weighted relative difference.
    #[arg(long)]
    th1: Option<f64>,
    /// Complex-region threshold on the relative residual energy.
    #[arg(long)]
    th2: Option<f64>,
    /// Observations kept per region model.
    #[arg(long)]
    model_window: Option<usize>,
    /// Quantization parameter for cqp mode and the qp sweep.
    #[arg(long)]
    qp: Option<u8>,
    /// Frame the qp sweep samples; picked automatically when absent.
    #[arg(long)]
    probe_frame: Option<usize>,
    /// Write region maps as out_dir/regions/frame_NNNN.pgm.
    #[arg(long)]
    dump_regions: bool,
    /// Write the reconstruction as out_dir/recon.yuv (gray chroma).
    #[arg(long)]
    dump_recon: bool,
    /// Write per-frame model coefficients as out_dir/models.csv.
    #[arg(long)]
    dump_models: bool,
    /// Directory the reports are written into.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    job: JobArgs,
    /// Swept parameter: qp, bitrate, or frame_skip.
    #[arg(long)]
    axis: String,
    /// Comma-separated values, or start:step:end.
    #[arg(long)]
    values: String,
}

impl JobArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.input {
            cfg.input = v.clone();
        }
        if let Some(v) = self.width {
            cfg.width = v;
        }
        if let Some(v) = self.height {
            cfg.height = v;
        }
        if let Some(v) = self.fps {
            cfg.fps = v;
        }
        if let Some(v) = self.frames {
            cfg.frames = v;
        }
        if let Some(v) = self.frame_skip {
            cfg.frame_skip = v;
        }
        if let Some(v) = self.mode {
            cfg.mode = v;
        }
        if let Some(v) = &self.modes {
            cfg.modes = v.clone();
        }
        if let Some(v) = self.bitrate {
            cfg.bitrate = v;
        }
        if let Some(v) = self.buffer_ratio {
            cfg.buffer_ratio = v;
        }
        if let Some(v) = self.mu {
            cfg.mu = v;
        }
        if let Some(v) = self.gop {
            cfg.gop = if v == 0 { None } else { Some(v) };
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if self.no_lambda_adjust {
            cfg.lambda_adjust = false;
        }
        if self.no_gmc {
            cfg.gmc = false;
        }
        if let Some(v) = self.gmv_search_range {
            cfg.gmv_search = v;
        }
        if let Some(v) = self.me_search {
            cfg.me_search = v;
        }
        if let Some(v) = self.th1 {
            cfg.th1 = v;
        }
        if let Some(v) = self.th2 {
            cfg.th2 = v;
        }
        if let Some(v) = self.model_window {
            cfg.model_window = v;
        }
        if let Some(v) = self.qp {
            cfg.qp = v;
        }
        if let Some(v) = self.probe_frame {
            cfg.probe_frame = Some(v);
        }
        if self.dump_regions {
            cfg.dump_regions = true;
        }
        if self.dump_recon {
            cfg.dump_recon = true;
        }
        if self.dump_models {
            cfg.dump_models = true;
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        Ok(cfg)
    }
}

/// Accepts `a,b,c` lists and `start:step:end` ranges (end inclusive).
fn parse_values(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        bail!("--values must not be empty");
    }
    if let Some((start, rest)) = text.split_once(':') {
        let (step, end) = rest
            .split_once(':')
            .context("range syntax is start:step:end")?;
        let (start, step, end): (f64, f64, f64) = (
            start.trim().parse().context("bad range start")?,
            step.trim().parse().context("bad range step")?,
            end.trim().parse().context("bad range end")?,
        );
        if step <= 0.0 {
            bail!("range step must be positive");
        }
        let mut values = Vec::new();
        let mut v = start;
        while v <= end + 1e-9 {
            values.push(v);
            v += step;
        }
        if values.is_empty() {
            bail!("range {text:?} produces no values");
        }
        return Ok(values);
    }
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .with_context(|| format!("bad sweep value {:?}", p.trim()))
        })
        .collect()
}

fn summary_line(mode: ControllerMode, out: &RunOutput, target_bps: f64) -> String {
    format!(
        "{}: {} frames, {:.1} kbps (target {:.1}, {:+.2}%), mean psnr {:.2} dB, \
         forced skips {}, clamps {}",
        mode.name(),
        out.frames.len(),
        out.achieved_bps() / 1000.0,
        target_bps / 1000.0,
        (out.achieved_bps() - target_bps) / target_bps * 100.0,
        out.mean_psnr(),
        out.forced_skips,
        out.clamp_events,
    )
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Encode(job) => {
            let cfg = job.resolve()?;
            let arts = run_encode(&cfg)?;
            println!("{}", summary_line(cfg.mode, &arts.output, cfg.bitrate));
            print_files(&arts.files);
        }
        Command::Compare(job) => {
            let cfg = job.resolve()?;
            let arts = run_compare(&cfg)?;
            for (mode, out) in &arts.outputs {
                println!("{}", summary_line(*mode, out, cfg.bitrate));
            }
            print_files(&arts.files);
        }
        Command::Sweep(args) => {
            let cfg = args.job.resolve()?;
            let axis = SweepAxis::parse(&args.axis)
                .with_context(|| format!("unknown axis {:?} (qp, bitrate, frame_skip)", args.axis))?;
            let values = parse_values(&args.values)?;
            let arts = run_sweep(&cfg, axis, &values)?;
            if let Some(probe) = arts.probe_frame {
                println!("sampled frame {probe} across {} runs", values.len());
            } else {
                println!("ran {} sweep points", values.len());
            }
            print_files(&arts.files);
        }
        Command::Regions(job) => {
            let cfg = job.resolve()?;
            let arts = run_regions(&cfg)?;
            println!(
                "{} region maps from mode {}",
                arts.files.len(),
                cfg.mode.name()
            );
            print_files(&arts.files);
        }
    }
    Ok(())
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
