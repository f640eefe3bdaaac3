//! Report generation: run the controllers over an input file and write the
//! comparison artifacts — per-frame CSV series, per-mode summaries, region
//! maps, sweeps, and a JSON audit record embedding the exact configuration.
//! All CSV output is deterministic; wall-clock timings go only into the
//! JSON summary.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::RunConfig;
use crate::controller::{encode_sequence, ControllerMode, EncoderConfig, FrameType, RunOutput};
use crate::error::{Error, Result};
use crate::model::{refit, r_squared, ModelKind, ModelWindow, RegionModel, RegionObservation};
use crate::qs::QsLadder;
use crate::region::{RegionLabel, RegionMap, REGION_COUNT};
use crate::yuv::{load_sequence, FrameY, VideoSpec, MB_PIXELS};

pub const REGION_NAMES: [&str; REGION_COUNT] = ["moving", "complex", "flat"];

/// Which parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Qp,
    Bitrate,
    FrameSkip,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Qp => "qp",
            SweepAxis::Bitrate => "bitrate",
            SweepAxis::FrameSkip => "frame_skip",
        }
    }

    pub fn parse(s: &str) -> Option<SweepAxis> {
        [SweepAxis::Qp, SweepAxis::Bitrate, SweepAxis::FrameSkip]
            .into_iter()
            .find(|a| a.name() == s)
    }
}

#[derive(Debug)]
pub struct EncodeArtifacts {
    pub output: RunOutput,
    pub files: Vec<PathBuf>,
}

#[derive(Debug)]
pub struct CompareArtifacts {
    pub outputs: Vec<(ControllerMode, RunOutput)>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug)]
pub struct SweepArtifacts {
    pub files: Vec<PathBuf>,
    /// Frame the per-region samples were taken from (QP axis only).
    pub probe_frame: Option<usize>,
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_default()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Read the configured slice of the input file; `frames = 0` takes every
/// frame the file holds.
pub fn load_input(cfg: &RunConfig) -> Result<(Vec<FrameY>, VideoSpec)> {
    let probe = cfg.video_spec(1)?;
    let source_frames = if cfg.frames > 0 {
        cfg.frames
    } else {
        let meta = fs::metadata(&cfg.input).map_err(|e| Error::io(&cfg.input, e))?;
        let available = (meta.len() / probe.frame_bytes() as u64) as usize;
        if available == 0 {
            return Err(Error::Ingest {
                path: cfg.input.clone(),
                expected: probe.frame_bytes() as u64,
                actual: meta.len(),
            });
        }
        available
    };
    let spec = cfg.video_spec(source_frames)?;
    let frames = load_sequence(&cfg.input, &spec, cfg.frame_skip)?;
    Ok((frames, spec))
}

fn encode_with_frame_context(
    frames: &[FrameY],
    spec: &VideoSpec,
    enc: &EncoderConfig,
) -> Result<RunOutput> {
    encode_sequence(frames, spec, enc)
}

/// Run several encoder configurations over the same frames, one thread per
/// run; results come back in input order.
fn run_parallel(frames: &[FrameY], spec: &VideoSpec, encs: &[EncoderConfig]) -> Vec<Result<RunOutput>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = encs
            .iter()
            .map(|enc| scope.spawn(move || encode_with_frame_context(frames, spec, enc)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::domain("encoder worker panicked")))
            })
            .collect()
    })
}

fn frames_csv(out: &RunOutput) -> String {
    let mut s = String::from(
        "frame,type,forced_skip,infeasible,gmv_x,gmv_y,target_bits,actual_bits,psnr,\
         buffer_fullness,qp_mean,mb_moving,mb_complex,mb_flat,qp_moving,qp_complex,qp_flat,\
         qs_moving,qs_complex,qs_flat,mad_moving,mad_complex,mad_flat,rate_moving,rate_complex,\
         rate_flat,mse_moving,mse_complex,mse_flat,skip_moving,skip_complex,skip_flat,\
         n_skip,n_inter,n_intra\n",
    );
    for f in &out.frames {
        let cols: Vec<String> = vec![
            f.index.to_string(),
            f.frame_type.letter().to_string(),
            (f.forced_skip as u8).to_string(),
            (f.infeasible as u8).to_string(),
            f.gmv.x.to_string(),
            f.gmv.y.to_string(),
            fmt6(f.target_bits),
            f.actual_bits.to_string(),
            fmt6(f.psnr),
            fmt6(f.buffer_fullness),
            fmt6(f.qp_mean),
            f.region_counts[0].to_string(),
            f.region_counts[1].to_string(),
            f.region_counts[2].to_string(),
            f.qp[0].to_string(),
            f.qp[1].to_string(),
            f.qp[2].to_string(),
            fmt6(f.qs[0]),
            fmt6(f.qs[1]),
            fmt6(f.qs[2]),
            fmt6(f.mad[0]),
            fmt6(f.mad[1]),
            fmt6(f.mad[2]),
            fmt6(f.region_rate[0]),
            fmt6(f.region_rate[1]),
            fmt6(f.region_rate[2]),
            fmt6(f.region_mse[0]),
            fmt6(f.region_mse[1]),
            fmt6(f.region_mse[2]),
            fmt6(f.region_skip[0]),
            fmt6(f.region_skip[1]),
            fmt6(f.region_skip[2]),
            f.mode_counts[0].to_string(),
            f.mode_counts[1].to_string(),
            f.mode_counts[2].to_string(),
        ];
        s.push_str(&cols.join(","));
        s.push('\n');
    }
    s
}

fn models_csv(out: &RunOutput) -> String {
    let mut s = String::from("frame,region,a,b,c,d\n");
    for f in &out.frames {
        for r in 0..REGION_COUNT {
            let m = f.models[r];
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                f.index,
                REGION_NAMES[r],
                fmt6(m[0]),
                fmt6(m[1]),
                fmt6(m[2]),
                fmt6(m[3])
            ));
        }
    }
    s
}

fn mode_fractions(out: &RunOutput) -> [f64; 3] {
    let mut totals = [0usize; 3];
    let mut mbs = 0usize;
    for f in &out.frames {
        for (t, c) in totals.iter_mut().zip(f.mode_counts) {
            *t += c;
        }
        mbs += f.qp_per_mb.len();
    }
    if mbs == 0 {
        return [0.0; 3];
    }
    totals.map(|t| t as f64 / mbs as f64)
}

fn buffer_extremes(out: &RunOutput) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for f in &out.frames {
        min = min.min(f.buffer_fullness);
        max = max.max(f.buffer_fullness);
    }
    if out.frames.is_empty() {
        (0.0, 0.0)
    } else {
        (min, max)
    }
}

fn rate_error_pct(out: &RunOutput, target_bps: f64) -> f64 {
    (out.achieved_bps() - target_bps) / target_bps * 100.0
}

fn mode_summary_json(mode: ControllerMode, out: &RunOutput, target_bps: f64) -> serde_json::Value {
    let (buf_min, buf_max) = buffer_extremes(out);
    let fractions = mode_fractions(out);
    let ms_per_frame = if out.frames.is_empty() {
        0.0
    } else {
        out.encode_seconds * 1000.0 / out.frames.len() as f64
    };
    let region_psnr: serde_json::Value = RegionLabel::ALL
        .iter()
        .map(|&r| {
            (
                REGION_NAMES[r.index()].to_string(),
                out.region_mean_psnr(r).map_or(serde_json::Value::Null, |p| json!(p)),
            )
        })
        .collect::<serde_json::Map<String, serde_json::Value>>()
        .into();
    json!({
        "mode": mode.name(),
        "frames_coded": out.frames.len(),
        "target_kbps": target_bps / 1000.0,
        "achieved_kbps": out.achieved_bps() / 1000.0,
        "rate_error_pct": rate_error_pct(out, target_bps),
        "mean_psnr": out.mean_psnr(),
        "psnr_regions": region_psnr,
        "buffer": {
            "size": out.buffer_size,
            "min_fullness": buf_min,
            "max_fullness": buf_max,
            "clamp_events": out.clamp_events,
        },
        "forced_skips": out.forced_skips,
        "infeasible_frames": out.infeasible_frames,
        "mode_distribution": {
            "skip": fractions[0],
            "inter": fractions[1],
            "intra": fractions[2],
        },
        // Wall-clock; varies across machines and runs, never in the CSVs.
        "encode_ms_per_frame": ms_per_frame,
    })
}

fn config_json(cfg: &RunConfig) -> serde_json::Value {
    cfg.entries()
        .into_iter()
        .map(|(k, v)| (k.to_string(), serde_json::Value::String(v)))
        .collect::<serde_json::Map<String, serde_json::Value>>()
        .into()
}

fn region_pgm(map: &RegionMap, mbs_x: usize, mbs_y: usize) -> Vec<u8> {
    let mut bytes = format!("P5\n{mbs_x} {mbs_y}\n255\n").into_bytes();
    bytes.extend(map.labels.iter().map(|l| match l {
        RegionLabel::Moving => 255u8,
        RegionLabel::Complex => 128,
        RegionLabel::Flat => 0,
    }));
    bytes
}

fn write_region_maps(dir: &Path, out: &RunOutput, spec: &VideoSpec) -> Result<Vec<PathBuf>> {
    let grid = spec.grid();
    let mut files = Vec::new();
    for (k, map) in out.maps.iter().enumerate() {
        if let Some(map) = map {
            let path = dir.join(format!("frame_{k:04}.pgm"));
            write_file(&path, &region_pgm(map, grid.mbs_x, grid.mbs_y))?;
            files.push(path);
        }
    }
    Ok(files)
}

fn write_recon_yuv(path: &Path, out: &RunOutput, spec: &VideoSpec) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let chroma = vec![128u8; spec.width * spec.height / 4];
    for recon in &out.recons {
        w.write_all(&recon.data).map_err(|e| Error::io(path, e))?;
        w.write_all(&chroma).map_err(|e| Error::io(path, e))?;
        w.write_all(&chroma).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Run the configured mode once and write `frames.csv`, `summary.json`, and
/// any requested dumps into the output directory.
pub fn run_encode(cfg: &RunConfig) -> Result<EncodeArtifacts> {
    cfg.validate()?;
    let (frames, spec) = load_input(cfg)?;
    let enc = cfg.encoder_config(cfg.mode);
    let out = encode_sequence(&frames, &spec, &enc)
        .map_err(|e| Error::domain(format!("{} run failed: {e}", cfg.mode.name())))?;

    let mut files = Vec::new();
    let frames_path = cfg.out_dir.join("frames.csv");
    write_file(&frames_path, frames_csv(&out).as_bytes())?;
    files.push(frames_path);

    let summary = json!({
        "config": config_json(cfg),
        "run": mode_summary_json(cfg.mode, &out, cfg.bitrate),
    });
    let summary_path = cfg.out_dir.join("summary.json");
    write_file(&summary_path, format!("{:#}\n", summary).as_bytes())?;
    files.push(summary_path);

    if cfg.dump_models {
        let path = cfg.out_dir.join("models.csv");
        write_file(&path, models_csv(&out).as_bytes())?;
        files.push(path);
    }
    if cfg.dump_regions {
        files.extend(write_region_maps(&cfg.out_dir.join("regions"), &out, &spec)?);
    }
    if cfg.dump_recon {
        let path = cfg.out_dir.join("recon.yuv");
        write_recon_yuv(&path, &out, &spec)?;
        files.push(path);
    }
    Ok(EncodeArtifacts { output: out, files })
}

/// Run only the analysis needed for region maps and dump them as PGM images.
pub fn run_regions(cfg: &RunConfig) -> Result<EncodeArtifacts> {
    cfg.validate()?;
    let (frames, spec) = load_input(cfg)?;
    let enc = cfg.encoder_config(cfg.mode);
    let out = encode_sequence(&frames, &spec, &enc)?;
    let files = write_region_maps(&cfg.out_dir.join("regions"), &out, &spec)?;
    if files.is_empty() {
        return Err(Error::domain(
            "no inter frames were coded, so there are no region maps to dump",
        ));
    }
    Ok(EncodeArtifacts { output: out, files })
}

fn compare_csv(rows: &[(ControllerMode, RunOutput)], target_bps: f64) -> String {
    let mut s = String::from(
        "mode,target_kbps,achieved_kbps,rate_error_pct,mean_psnr,psnr_moving,psnr_complex,\
         psnr_flat,forced_skips,clamp_events,infeasible_frames,skip_fraction\n",
    );
    for (mode, out) in rows {
        let cols: Vec<String> = vec![
            mode.name().to_string(),
            fmt6(target_bps / 1000.0),
            fmt6(out.achieved_bps() / 1000.0),
            fmt6(rate_error_pct(out, target_bps)),
            fmt6(out.mean_psnr()),
            fmt_opt(out.region_mean_psnr(RegionLabel::Moving)),
            fmt_opt(out.region_mean_psnr(RegionLabel::Complex)),
            fmt_opt(out.region_mean_psnr(RegionLabel::Flat)),
            out.forced_skips.to_string(),
            out.clamp_events.to_string(),
            out.infeasible_frames.to_string(),
            fmt6(mode_fractions(out)[0]),
        ];
        s.push_str(&cols.join(","));
        s.push('\n');
    }
    s
}

fn per_region_csv(rows: &[(ControllerMode, RunOutput)]) -> String {
    let mut s = String::from(
        "mode,region,frames_present,mb_share,mean_qp,mean_rate_bits,mean_mse,mean_psnr\n",
    );
    for (mode, out) in rows {
        let inter: Vec<_> = out
            .frames
            .iter()
            .filter(|f| f.frame_type == FrameType::Inter)
            .collect();
        let total_mbs: usize = inter.iter().map(|f| f.qp_per_mb.len()).sum();
        for r in RegionLabel::ALL {
            let i = r.index();
            let present: Vec<_> = inter.iter().filter(|f| f.region_counts[i] > 0).collect();
            let n = present.len();
            let mb_total: usize = inter.iter().map(|f| f.region_counts[i]).sum();
            let mean = |get: &dyn Fn(&crate::controller::FrameReport) -> f64| {
                if n == 0 {
                    None
                } else {
                    Some(present.iter().map(|f| get(f)).sum::<f64>() / n as f64)
                }
            };
            let cols: Vec<String> = vec![
                mode.name().to_string(),
                REGION_NAMES[i].to_string(),
                n.to_string(),
                fmt6(if total_mbs == 0 { 0.0 } else { mb_total as f64 / total_mbs as f64 }),
                fmt_opt(mean(&|f| f.qp[i] as f64)),
                fmt_opt(mean(&|f| f.region_rate[i])),
                fmt_opt(mean(&|f| f.region_mse[i])),
                fmt_opt(out.region_mean_psnr(r)),
            ];
            s.push_str(&cols.join(","));
            s.push('\n');
        }
    }
    s
}

fn curves_csv(rows: &[(ControllerMode, RunOutput)]) -> String {
    let mut s = String::from(
        "mode,frame,type,psnr,bits,buffer_fullness,qp_moving,qp_complex,qp_flat\n",
    );
    for (mode, out) in rows {
        for f in &out.frames {
            let cols: Vec<String> = vec![
                mode.name().to_string(),
                f.index.to_string(),
                f.frame_type.letter().to_string(),
                fmt6(f.psnr),
                f.actual_bits.to_string(),
                fmt6(f.buffer_fullness),
                f.qp[0].to_string(),
                f.qp[1].to_string(),
                f.qp[2].to_string(),
            ];
            s.push_str(&cols.join(","));
            s.push('\n');
        }
    }
    s
}

fn compare_outputs(cfg: &RunConfig) -> Result<Vec<(ControllerMode, RunOutput)>> {
    let (frames, spec) = load_input(cfg)?;
    let encs: Vec<EncoderConfig> = cfg.modes.iter().map(|&m| cfg.encoder_config(m)).collect();
    let results = run_parallel(&frames, &spec, &encs);
    let mut rows = Vec::new();
    for (mode, result) in cfg.modes.iter().zip(results) {
        let out = result.map_err(|e| Error::domain(format!("{} run failed: {e}", mode.name())))?;
        rows.push((*mode, out));
    }
    Ok(rows)
}

/// Run every configured mode on identical input and budget and write the
/// side-by-side tables plus per-mode frame series.
pub fn run_compare(cfg: &RunConfig) -> Result<CompareArtifacts> {
    cfg.validate()?;
    let rows = compare_outputs(cfg)?;

    let mut files = Vec::new();
    for (name, text) in [
        ("compare.csv", compare_csv(&rows, cfg.bitrate)),
        ("per-region.csv", per_region_csv(&rows)),
        ("curves.csv", curves_csv(&rows)),
    ] {
        let path = cfg.out_dir.join(name);
        write_file(&path, text.as_bytes())?;
        files.push(path);
    }

    let mode_summaries: serde_json::Map<String, serde_json::Value> = rows
        .iter()
        .map(|(mode, out)| (mode.name().to_string(), mode_summary_json(*mode, out, cfg.bitrate)))
        .collect();
    let summary = json!({
        "config": config_json(cfg),
        "modes": mode_summaries,
    });
    let summary_path = cfg.out_dir.join("summary.json");
    write_file(&summary_path, format!("{:#}\n", summary).as_bytes())?;
    files.push(summary_path);

    Ok(CompareArtifacts { outputs: rows, files })
}

/// Minimum per-region macroblock count for a frame to serve as the probe.
const PROBE_REGION_FLOOR: usize = 4;

/// Pick the earliest inter frame where every region holds at least
/// [`PROBE_REGION_FLOOR`] macroblocks in every run, falling back to the frame
/// whose least-populated region is largest. Model-validity sampling wants
/// every region present, and an early probe measures the response before
/// coarse quantization error compounds through the reference chain.
fn pick_probe_frame(runs: &[RunOutput]) -> Option<usize> {
    let n = runs.first()?.frames.len();
    let mut best: Option<(usize, usize)> = None;
    for k in 0..n {
        let mut ok = true;
        let mut score = usize::MAX;
        for run in runs {
            let f = &run.frames[k];
            if f.frame_type != FrameType::Inter || f.forced_skip {
                ok = false;
                break;
            }
            score = score.min(*f.region_counts.iter().min().unwrap_or(&0));
        }
        if !ok {
            continue;
        }
        if score >= PROBE_REGION_FLOOR {
            return Some(k);
        }
        if best.map_or(true, |(s, _)| score > s) {
            best = Some((score, k));
        }
    }
    best.map(|(_, k)| k)
}

fn sweep_qp(cfg: &RunConfig, values: &[f64]) -> Result<(Vec<PathBuf>, Option<usize>)> {
    let mut qps = Vec::with_capacity(values.len());
    for &v in values {
        if v.fract() != 0.0 || !(0.0..=51.0).contains(&v) {
            return Err(Error::config(format!("qp sweep value {v} must be an integer in 0..=51")));
        }
        qps.push(v as u8);
    }

    let (frames, spec) = load_input(cfg)?;
    let encs: Vec<EncoderConfig> = qps
        .iter()
        .map(|&q| {
            let mut enc = cfg.encoder_config(ControllerMode::ConstantQp);
            enc.fixed_qp = q;
            enc
        })
        .collect();
    let mut runs = Vec::new();
    for (q, result) in qps.iter().zip(run_parallel(&frames, &spec, &encs)) {
        runs.push(result.map_err(|e| Error::domain(format!("qp {q} run failed: {e}")))?);
    }

    let probe = match cfg.probe_frame {
        Some(k) => {
            let n = runs[0].frames.len();
            if k >= n || runs.iter().any(|r| r.frames[k].frame_type != FrameType::Inter) {
                return Err(Error::config(format!(
                    "probe_frame {k} is not an inter frame of this {n}-frame run"
                )));
            }
            k
        }
        None => pick_probe_frame(&runs)
            .ok_or_else(|| Error::domain("no usable inter frame to probe; need at least 2 frames"))?,
    };

    // Region membership is frozen to the mid-ladder run's map at the probe
    // frame: labels react to reconstruction quality, so letting each run
    // label itself would change the measured block population along the
    // sweep and blur the response the fit is after.
    let map = runs[runs.len() / 2].maps[probe]
        .as_ref()
        .ok_or_else(|| Error::domain(format!("probe frame {probe} has no region map")))?
        .clone();

    let ladder = QsLadder::new();
    let mut sweep = String::from("axis,value,probe_frame,region,mbs,qs,mad,rate,dist\n");
    let mut windows: Vec<ModelWindow> =
        (0..REGION_COUNT).map(|_| ModelWindow::new(values.len().max(1))).collect();
    for (&q, run) in qps.iter().zip(&runs) {
        let f = &run.frames[probe];
        for r in RegionLabel::ALL {
            let i = r.index();
            let members: Vec<usize> = (0..map.labels.len()).filter(|&p| map.labels[p] == r).collect();
            if members.is_empty() {
                continue;
            }
            let n = members.len() as f64;
            let mad = members.iter().map(|&p| f.mb_diff[p]).sum::<f64>() / n;
            let rate = members.iter().map(|&p| f.mb_bits[p] as f64).sum::<f64>() / n;
            let dist = members.iter().map(|&p| f.mb_sse[p] as f64).sum::<f64>() / (n * MB_PIXELS as f64);
            let qs = ladder.qs(q);
            sweep.push_str(&format!(
                "qp,{},{},{},{},{},{},{},{}\n",
                q,
                probe,
                REGION_NAMES[i],
                members.len(),
                fmt6(qs),
                fmt6(mad),
                fmt6(rate),
                fmt6(dist)
            ));
            windows[i].push(RegionObservation {
                frame: q as usize,
                region: r,
                qs,
                mad,
                rate,
                dist,
            });
        }
    }

    let mut fits = String::from("region,samples,a,b,r2_rate,c,d,r2_dist\n");
    for r in RegionLabel::ALL {
        let i = r.index();
        if windows[i].len() < 2 {
            continue;
        }
        let fitted = refit(&windows[i], &RegionModel::initial(r, 0.1));
        fits.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            REGION_NAMES[i],
            windows[i].len(),
            fmt6(fitted.a),
            fmt6(fitted.b),
            fmt6(r_squared(&windows[i], &fitted, ModelKind::Rate)),
            fmt6(fitted.c),
            fmt6(fitted.d),
            fmt6(r_squared(&windows[i], &fitted, ModelKind::Dist))
        ));
    }

    let mut files = Vec::new();
    for (name, text) in [("sweep.csv", sweep), ("sweep_fits.csv", fits)] {
        let path = cfg.out_dir.join(name);
        write_file(&path, text.as_bytes())?;
        files.push(path);
    }
    Ok((files, Some(probe)))
}

fn sweep_runs(cfg: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<PathBuf>> {
    let mut csv = String::from(
        "axis,value,mode,target_kbps,achieved_kbps,rate_error_pct,mean_psnr,psnr_moving,\
         psnr_complex,psnr_flat\n",
    );
    for &v in values {
        let mut point = cfg.clone();
        match axis {
            SweepAxis::Bitrate => {
                if !(v > 0.0) {
                    return Err(Error::config(format!("bitrate sweep value {v} must be positive")));
                }
                point.bitrate = v;
            }
            SweepAxis::FrameSkip => {
                if v.fract() != 0.0 || v < 0.0 {
                    return Err(Error::config(format!(
                        "frame_skip sweep value {v} must be a non-negative integer"
                    )));
                }
                point.frame_skip = v as usize;
            }
            SweepAxis::Qp => unreachable!("qp axis handled separately"),
        }
        let rows = compare_outputs(&point)?;
        for (mode, out) in &rows {
            let cols: Vec<String> = vec![
                axis.name().to_string(),
                format!("{v}"),
                mode.name().to_string(),
                fmt6(point.bitrate / 1000.0),
                fmt6(out.achieved_bps() / 1000.0),
                fmt6(rate_error_pct(out, point.bitrate)),
                fmt6(out.mean_psnr()),
                fmt_opt(out.region_mean_psnr(RegionLabel::Moving)),
                fmt_opt(out.region_mean_psnr(RegionLabel::Complex)),
                fmt_opt(out.region_mean_psnr(RegionLabel::Flat)),
            ];
            csv.push_str(&cols.join(","));
            csv.push('\n');
        }
    }
    let path = cfg.out_dir.join("sweep.csv");
    write_file(&path, csv.as_bytes())?;
    Ok(vec![path])
}

/// One run per value along the chosen axis. The QP axis bypasses rate
/// control and emits per-region model samples plus their fits; the other
/// axes emit one comparison row per (value, mode).
pub fn run_sweep(cfg: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepArtifacts> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    match axis {
        SweepAxis::Qp => {
            let (files, probe) = sweep_qp(cfg, values)?;
            Ok(SweepArtifacts { files, probe_frame: probe })
        }
        _ => {
            let files = sweep_runs(cfg, axis, values)?;
            Ok(SweepArtifacts { files, probe_frame: None })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(x: i64, y: i64, seed: u64) -> u8 {
        let mut s = seed
            .wrapping_mul(0x9E3779B97F4A7C15)
            .wrapping_add((x as u64).wrapping_mul(0xD6E8FEB86659FD93))
            .wrapping_add((y as u64).wrapping_mul(0xA24BAED4963EE407))
            | 1;
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 24) as u8
    }

    fn temp_dir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    /// Write a small i420 clip with a moving noisy block over a gradient.
    fn write_clip(dir: &Path, w: usize, h: usize, n: usize) -> PathBuf {
        let path = dir.join("clip.yuv");
        let mut bytes = Vec::new();
        for k in 0..n {
            let (px, py) = ((4 + 5 * k) % (w - 20), (6 + 3 * k) % (h - 20));
            for y in 0..h {
                for x in 0..w {
                    let inside = x >= px && x < px + 20 && y >= py && y < py + 20;
                    bytes.push(if inside {
                        noise((x - px) as i64, (y - py) as i64, 7)
                    } else {
                        (80 + (x / 2 + y / 3) % 60) as u8
                    });
                }
            }
            bytes.extend(std::iter::repeat(128u8).take(w * h / 2));
        }
        fs::write(&path, bytes).unwrap();
        path
    }

    fn base_config(dir: &Path, w: usize, h: usize, n: usize) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.input = write_clip(dir, w, h, n);
        cfg.width = w;
        cfg.height = h;
        cfg.frames = 0;
        cfg.bitrate = 40_000.0;
        cfg.me_search = 4;
        cfg.gmv_search = 4;
        cfg.out_dir = dir.join("out");
        cfg
    }

    #[test]
    fn encode_writes_frame_rows_for_every_coded_frame() {
        let dir = temp_dir();
        let mut cfg = base_config(dir.path(), 64, 48, 6);
        cfg.dump_models = true;
        cfg.dump_regions = true;
        cfg.dump_recon = true;
        let arts = run_encode(&cfg).unwrap();
        let csv = fs::read_to_string(cfg.out_dir.join("frames.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + arts.output.frames.len());
        assert!(csv.lines().next().unwrap().starts_with("frame,type,"));

        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(cfg.out_dir.join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(summary["run"]["frames_coded"], 6);
        assert_eq!(summary["config"]["mode"], "t2");

        let recon = fs::metadata(cfg.out_dir.join("recon.yuv")).unwrap().len();
        assert_eq!(recon, 6 * 64 * 48 * 3 / 2);
        // One region map per inter frame.
        let maps = fs::read_dir(cfg.out_dir.join("regions")).unwrap().count();
        assert_eq!(maps, 5);
    }

    #[test]
    fn missing_input_error_names_the_path() {
        let dir = temp_dir();
        let mut cfg = base_config(dir.path(), 64, 48, 4);
        cfg.input = dir.path().join("nope.yuv");
        let err = run_encode(&cfg).unwrap_err();
        assert!(err.to_string().contains("nope.yuv"), "{err}");
    }

    #[test]
    fn reruns_write_byte_identical_csvs() {
        let dir = temp_dir();
        let mut cfg = base_config(dir.path(), 64, 48, 8);
        cfg.modes = vec![ControllerMode::FrameLayer, ControllerMode::RegionOrdered];
        run_compare(&cfg).unwrap();
        let first: Vec<Vec<u8>> = ["compare.csv", "per-region.csv", "curves.csv"]
            .iter()
            .map(|n| fs::read(cfg.out_dir.join(n)).unwrap())
            .collect();
        run_compare(&cfg).unwrap();
        for (i, name) in ["compare.csv", "per-region.csv", "curves.csv"].iter().enumerate() {
            let again = fs::read(cfg.out_dir.join(name)).unwrap();
            assert_eq!(first[i], again, "{name} differs between reruns");
        }
    }

    #[test]
    fn compare_emits_one_row_per_mode_sharing_the_budget() {
        let dir = temp_dir();
        let mut cfg = base_config(dir.path(), 64, 48, 6);
        cfg.modes = vec![
            ControllerMode::MbLayer,
            ControllerMode::FrameLayer,
            ControllerMode::RegionFree,
            ControllerMode::RegionOrdered,
        ];
        let arts = run_compare(&cfg).unwrap();
        assert_eq!(arts.outputs.len(), 4);
        let csv = fs::read_to_string(cfg.out_dir.join("compare.csv")).unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].starts_with("mbl,40.000000"));
        assert!(rows[3].starts_with("t2,40.000000"));
        let per_region = fs::read_to_string(cfg.out_dir.join("per-region.csv")).unwrap();
        assert_eq!(per_region.lines().skip(1).count(), 4 * 3);
        let curves = fs::read_to_string(cfg.out_dir.join("curves.csv")).unwrap();
        assert_eq!(curves.lines().skip(1).count(), 4 * 6);
    }

    #[test]
    fn qp_sweep_emits_samples_per_value_and_fits_per_region() {
        let dir = temp_dir();
        let cfg = base_config(dir.path(), 96, 64, 8);
        let values: Vec<f64> = (0..6).map(|i| 30.0 + 2.0 * i as f64).collect();
        let arts = run_sweep(&cfg, SweepAxis::Qp, &values).unwrap();
        let probe = arts.probe_frame.unwrap();
        assert!(probe >= 1);
        let sweep = fs::read_to_string(cfg.out_dir.join("sweep.csv")).unwrap();
        // Six values, every populated region sampled once each.
        let rows: Vec<&str> = sweep.lines().skip(1).collect();
        assert!(rows.len() >= 6, "got {} rows", rows.len());
        assert!(rows.iter().all(|r| r.starts_with("qp,")));
        let fits = fs::read_to_string(cfg.out_dir.join("sweep_fits.csv")).unwrap();
        assert!(fits.lines().count() >= 2, "no region had enough samples:\n{fits}");
    }

    #[test]
    fn frame_skip_sweep_runs_a_comparison_per_value() {
        let dir = temp_dir();
        let mut cfg = base_config(dir.path(), 64, 48, 9);
        cfg.modes = vec![ControllerMode::FrameLayer, ControllerMode::RegionFree];
        let arts = run_sweep(&cfg, SweepAxis::FrameSkip, &[0.0, 1.0, 2.0]).unwrap();
        assert!(arts.probe_frame.is_none());
        let sweep = fs::read_to_string(cfg.out_dir.join("sweep.csv")).unwrap();
        assert_eq!(sweep.lines().skip(1).count(), 3 * 2);
    }

    #[test]
    fn sweep_rejects_empty_values_and_bad_qp() {
        let dir = temp_dir();
        let cfg = base_config(dir.path(), 64, 48, 4);
        assert!(run_sweep(&cfg, SweepAxis::Qp, &[]).is_err());
        assert!(run_sweep(&cfg, SweepAxis::Qp, &[31.5]).is_err());
        assert!(run_sweep(&cfg, SweepAxis::Bitrate, &[-3.0]).is_err());
    }

    #[test]
    fn region_dump_writes_a_pgm_per_inter_frame() {
        let dir = temp_dir();
        let cfg = base_config(dir.path(), 64, 48, 5);
        let arts = run_regions(&cfg).unwrap();
        assert_eq!(arts.files.len(), 4);
        let bytes = fs::read(&arts.files[0]).unwrap();
        assert!(bytes.starts_with(b"P5\n4 3\n255\n"));
        assert_eq!(bytes.len(), b"P5\n4 3\n255\n".len() + 12);
        assert!(bytes[11..].iter().all(|b| [255u8, 128, 0].contains(b)));
    }
}
