//! Closed-loop sequence controller. Per inter frame it partitions the
//! macroblocks into regions, budgets bits against the leaky buffer, picks
//! quantization (per region, per frame, per macroblock, or fixed), encodes
//! with the matching multipliers, and refits the linear models from the
//! measured rate and distortion. The reference for every frame is the
//! previous reconstruction, so feedback is genuine.

use std::time::Instant;

use crate::codec::{psnr_from_mse, EncodeStats, FrameEncoder, MbMode};
use crate::error::{Error, Result};
use crate::gmv::{estimate_gmv, GlobalMotionVector};
use crate::lagrange::{lambda_org, LagrangeSet, ALPHA_DEFAULT};
use crate::model::{
    refit, region_mad, ModelWindow, RegionModel, RegionObservation, MODEL_WINDOW_DEFAULT,
};
use crate::qs::QsLadder;
use crate::rate::{
    allocate_frame_bits, buffer_feedback, BufferState, BUFFER_RATIO_DEFAULT, MU_DEFAULT,
};
use crate::region::{
    compute_diff, extract_moving, location_weights, subdivide_non_moving, DiffMap,
    LocationWeights, RegionLabel, RegionMap, REGION_COUNT, TH_COMPLEX_DEFAULT, TH_MOVING_DEFAULT,
};
use crate::solver::{clamp_qp, clamp_qp_single, solve_qp_t1, solve_qp_t2, AllocationInput};
use crate::yuv::{FrameY, Plane, VideoSpec};

/// Buffer occupancy above which the next frame is forced to all-skip.
const FORCED_SKIP_THRESHOLD: f64 = 0.95;

/// How a sequence's quantization is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerMode {
    /// Per-region steps from the constrained minimization, unordered.
    RegionFree,
    /// Per-region steps with the monotone step constraint and weighted
    /// multipliers.
    RegionOrdered,
    /// One step per frame from a pooled whole-frame model.
    FrameLayer,
    /// Greedy per-macroblock steps from equal split of the frame budget.
    MbLayer,
    /// Fixed step everywhere; no rate control.
    ConstantQp,
}

impl ControllerMode {
    pub const ALL: [ControllerMode; 5] = [
        ControllerMode::MbLayer,
        ControllerMode::FrameLayer,
        ControllerMode::RegionFree,
        ControllerMode::RegionOrdered,
        ControllerMode::ConstantQp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerMode::RegionFree => "t1",
            ControllerMode::RegionOrdered => "t2",
            ControllerMode::FrameLayer => "fl",
            ControllerMode::MbLayer => "mbl",
            ControllerMode::ConstantQp => "cqp",
        }
    }

    pub fn parse(s: &str) -> Option<ControllerMode> {
        ControllerMode::ALL.into_iter().find(|m| m.name() == s)
    }
}

/// Every knob one run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub mode: ControllerMode,
    /// Target channel rate in bits per second.
    pub bitrate: f64,
    /// Buffer size as a fraction of the bitrate.
    pub buffer_ratio: f64,
    /// Blend between fair-share and buffer-feedback frame targets.
    pub mu: f64,
    /// Multiplier scale for rate-distortion decisions.
    pub alpha: f64,
    /// Weight the ordered mode's multipliers per region.
    pub lambda_adjust: bool,
    /// Compensate the frame difference for global motion.
    pub gmc: bool,
    pub gmv_search: u32,
    pub me_search: u32,
    pub th_moving: f64,
    pub th_complex: f64,
    pub model_window: usize,
    /// Intra period; `None` codes one intra frame for the whole sequence.
    pub gop: Option<usize>,
    /// QP for [`ControllerMode::ConstantQp`].
    pub fixed_qp: u8,
    /// Source frames dropped between coded frames (affects budgeting).
    pub frame_skip: usize,
    /// Force every macroblock into one region; collapses the region modes
    /// onto the frame-layer behavior for equivalence checks.
    pub force_single_region: bool,
}

impl EncoderConfig {
    pub fn new(mode: ControllerMode) -> Self {
        EncoderConfig {
            mode,
            bitrate: 64_000.0,
            buffer_ratio: BUFFER_RATIO_DEFAULT,
            mu: MU_DEFAULT,
            alpha: ALPHA_DEFAULT,
            lambda_adjust: true,
            gmc: true,
            gmv_search: 16,
            me_search: 8,
            th_moving: TH_MOVING_DEFAULT,
            th_complex: TH_COMPLEX_DEFAULT,
            model_window: MODEL_WINDOW_DEFAULT,
            gop: None,
            fixed_qp: 30,
            frame_skip: 0,
            force_single_region: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bitrate > 0.0) || !self.bitrate.is_finite() {
            return Err(Error::config(format!("bitrate {} must be positive", self.bitrate)));
        }
        if !(self.buffer_ratio > 0.0) || !self.buffer_ratio.is_finite() {
            return Err(Error::config("buffer ratio must be positive"));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::config(format!("mu {} must lie in [0, 1]", self.mu)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::config("alpha must be positive"));
        }
        if self.fixed_qp > 51 {
            return Err(Error::config(format!("qp {} out of range", self.fixed_qp)));
        }
        if !(self.th_moving > 0.0) || !(self.th_complex > 0.0) {
            return Err(Error::config("thresholds must be positive"));
        }
        if self.model_window == 0 {
            return Err(Error::config("model window must hold at least one sample"));
        }
        if self.gop == Some(0) {
            return Err(Error::config("intra period must be at least 1"));
        }
        if self.me_search > 32 {
            return Err(Error::config("motion search range above 32 is unsupported"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameType {
    Intra,
    Inter,
}

impl FrameType {
    pub fn letter(self) -> char {
        match self {
            FrameType::Intra => 'I',
            FrameType::Inter => 'P',
        }
    }
}

/// Everything recorded about one coded frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub index: usize,
    pub frame_type: FrameType,
    pub forced_skip: bool,
    pub infeasible: bool,
    pub gmv: GlobalMotionVector,
    pub region_counts: [usize; REGION_COUNT],
    pub qp: [u8; REGION_COUNT],
    pub qs: [f64; REGION_COUNT],
    pub mad: [f64; REGION_COUNT],
    /// Mean coded bits per macroblock of each region.
    pub region_rate: [f64; REGION_COUNT],
    /// Mean reconstruction MSE per macroblock of each region.
    pub region_mse: [f64; REGION_COUNT],
    /// Fraction of each region's macroblocks coded as skip.
    pub region_skip: [f64; REGION_COUNT],
    pub qp_per_mb: Vec<u8>,
    pub qp_mean: f64,
    /// Coded bits per macroblock, frame header excluded.
    pub mb_bits: Vec<u32>,
    /// Reconstruction squared error per macroblock.
    pub mb_sse: Vec<u64>,
    /// Compensated mean absolute difference per macroblock; empty on intra.
    pub mb_diff: Vec<f64>,
    /// Model coefficients `[a, b, c, d]` per region after this frame's refit.
    pub models: [[f64; 4]; REGION_COUNT],
    pub target_bits: f64,
    pub actual_bits: usize,
    /// Skipped, motion-compensated, and intra macroblock counts.
    pub mode_counts: [usize; 3],
    pub psnr: f64,
    pub buffer_fullness: f64,
}

impl FrameReport {
    pub fn region_psnr(&self, r: usize) -> Option<f64> {
        if self.region_counts[r] == 0 {
            None
        } else {
            Some(psnr_from_mse(self.region_mse[r]))
        }
    }
}

/// A full run: per-frame records plus the artifacts reports are built from.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub frames: Vec<FrameReport>,
    /// Region map per frame; `None` for intra frames.
    pub maps: Vec<Option<RegionMap>>,
    pub recons: Vec<Plane>,
    pub buffer_size: f64,
    pub clamp_events: usize,
    pub forced_skips: usize,
    pub infeasible_frames: usize,
    pub fps_effective: f64,
    pub encode_seconds: f64,
}

impl RunOutput {
    pub fn total_bits(&self) -> usize {
        self.frames.iter().map(|f| f.actual_bits).sum()
    }

    pub fn achieved_bps(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        self.total_bits() as f64 * self.fps_effective / self.frames.len() as f64
    }

    pub fn mean_psnr(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        self.frames.iter().map(|f| f.psnr).sum::<f64>() / self.frames.len() as f64
    }

    /// Mean per-frame PSNR of one region over the frames where it exists.
    pub fn region_mean_psnr(&self, region: RegionLabel) -> Option<f64> {
        let r = region.index();
        let vals: Vec<f64> = self.frames.iter().filter_map(|f| f.region_psnr(r)).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

fn bootstrap_qp(bits_per_pixel: f64) -> u8 {
    if bits_per_pixel < 0.1 {
        40
    } else if bits_per_pixel < 0.3 {
        34
    } else if bits_per_pixel < 0.6 {
        28
    } else {
        24
    }
}

struct StreamState {
    ladder: QsLadder,
    weights: LocationWeights,
    buffer: BufferState,
    remaining_bits: f64,
    remaining_frames: u32,
    models: [RegionModel; REGION_COUNT],
    windows: [ModelWindow; REGION_COUNT],
    pooled_model: RegionModel,
    pooled_window: ModelWindow,
    prev_qp: [u8; REGION_COUNT],
    prev_frame_qp: u8,
    prev_mse: Vec<f64>,
    prev_recon: Plane,
    /// False until the current intra period has coded an inter frame.
    have_inter_stats: bool,
    start_qp: u8,
}

struct FrameAnalysis {
    gmv: GlobalMotionVector,
    diff: DiffMap,
    map: RegionMap,
    mads: [f64; REGION_COUNT],
}

/// What one frame encoder pass produced, before the shared bookkeeping.
struct FrameOutcome {
    stats: EncodeStats,
    recon: Plane,
    qp: [u8; REGION_COUNT],
    qp_per_mb: Vec<u8>,
    target_bits: f64,
    forced_skip: bool,
    infeasible: bool,
}

/// Run one controller over a whole sequence.
pub fn encode_sequence(frames: &[FrameY], spec: &VideoSpec, cfg: &EncoderConfig) -> Result<RunOutput> {
    cfg.validate()?;
    if frames.is_empty() {
        return Err(Error::config("no frames to encode"));
    }
    for f in frames {
        if f.luma.width != spec.width || f.luma.height != spec.height {
            return Err(Error::config(format!(
                "frame {} is {}x{}, expected {}x{}",
                f.index, f.luma.width, f.luma.height, spec.width, spec.height
            )));
        }
    }

    let started = Instant::now();
    let fps = spec.frame_rate / (cfg.frame_skip as f64 + 1.0);
    let grid = spec.grid();
    let drain = cfg.bitrate / fps;
    let bits_per_pixel = cfg.bitrate / (fps * (spec.width * spec.height) as f64);
    let start_qp = match cfg.mode {
        ControllerMode::ConstantQp => cfg.fixed_qp,
        _ => bootstrap_qp(bits_per_pixel),
    };
    let gop_len = cfg.gop.unwrap_or(frames.len()).max(1);

    let mut st = StreamState {
        ladder: QsLadder::new(),
        weights: location_weights(&grid),
        buffer: BufferState::new(cfg.buffer_ratio * cfg.bitrate),
        remaining_bits: 0.0,
        remaining_frames: 0,
        models: RegionLabel::ALL.map(|r| RegionModel::initial(r, bits_per_pixel)),
        windows: [(); REGION_COUNT].map(|_| ModelWindow::new(cfg.model_window)),
        pooled_model: RegionModel::initial(RegionLabel::Complex, bits_per_pixel),
        pooled_window: ModelWindow::new(cfg.model_window),
        prev_qp: [start_qp; REGION_COUNT],
        prev_frame_qp: start_qp,
        prev_mse: vec![0.0; grid.mb_count],
        prev_recon: Plane::new(spec.width, spec.height),
        have_inter_stats: false,
        start_qp,
    };

    let mut out = RunOutput {
        frames: Vec::with_capacity(frames.len()),
        maps: Vec::with_capacity(frames.len()),
        recons: Vec::with_capacity(frames.len()),
        buffer_size: st.buffer.size,
        clamp_events: 0,
        forced_skips: 0,
        infeasible_frames: 0,
        fps_effective: fps,
        encode_seconds: 0.0,
    };

    for (k, frame) in frames.iter().enumerate() {
        let intra = k % gop_len == 0;
        if intra {
            let chunk = gop_len.min(frames.len() - k);
            st.remaining_bits += chunk as f64 * drain;
            st.remaining_frames = chunk as u32;
            st.have_inter_stats = false;
        }

        let (outcome, analysis) = if intra {
            (encode_intra_frame(frame, cfg, &st)?, None)
        } else {
            let analysis = analyze_frame(frame, &frames[k - 1], cfg, &st)?;
            let outcome = match cfg.mode {
                ControllerMode::RegionFree | ControllerMode::RegionOrdered => {
                    encode_region_frame(frame, cfg, &mut st, &analysis, fps)?
                }
                ControllerMode::FrameLayer => encode_frame_layer(frame, cfg, &mut st, &analysis, fps)?,
                ControllerMode::MbLayer => encode_mb_layer(frame, cfg, &mut st, &analysis, fps)?,
                ControllerMode::ConstantQp => encode_constant_qp(frame, cfg, &st)?,
            };
            (outcome, Some(analysis))
        };

        let bits = outcome.stats.frame_bits();
        if st.buffer.update(bits as f64, drain) {
            out.clamp_events += 1;
        }
        st.remaining_bits -= bits as f64;
        st.remaining_frames = st.remaining_frames.saturating_sub(1);

        // Model refits use measured per-region outcomes; intra and forced
        // all-skip frames are not representative and are left out.
        if let Some(a) = &analysis {
            if !outcome.forced_skip {
                match cfg.mode {
                    ControllerMode::RegionFree | ControllerMode::RegionOrdered => {
                        update_region_models(&mut st, k, a, &outcome, cfg);
                    }
                    ControllerMode::FrameLayer | ControllerMode::MbLayer => {
                        update_pooled_model(&mut st, k, a, &outcome, grid.mb_count);
                    }
                    ControllerMode::ConstantQp => {}
                }
            }
            st.have_inter_stats = true;
        }

        st.prev_qp = outcome.qp;
        st.prev_frame_qp = mean_qp(&outcome.qp_per_mb);
        st.prev_mse = outcome.stats.per_mb_mse();
        st.prev_recon = outcome.recon.clone();

        if outcome.forced_skip {
            out.forced_skips += 1;
        }
        if outcome.infeasible {
            out.infeasible_frames += 1;
        }
        out.frames.push(build_report(k, intra, cfg, &analysis, &outcome, &st));
        out.maps.push(analysis.map(|a| a.map));
        out.recons.push(outcome.recon);
    }

    out.encode_seconds = started.elapsed().as_secs_f64();
    Ok(out)
}

fn mean_qp(qp_per_mb: &[u8]) -> u8 {
    if qp_per_mb.is_empty() {
        return 0;
    }
    let sum: u32 = qp_per_mb.iter().map(|&q| q as u32).sum();
    ((sum as f64 / qp_per_mb.len() as f64).round() as u8).clamp(1, 51)
}

fn build_report(
    k: usize,
    intra: bool,
    cfg: &EncoderConfig,
    analysis: &Option<FrameAnalysis>,
    outcome: &FrameOutcome,
    st: &StreamState,
) -> FrameReport {
    let stats = &outcome.stats;
    let models = match cfg.mode {
        ControllerMode::FrameLayer | ControllerMode::MbLayer => {
            let m = &st.pooled_model;
            [[m.a, m.b, m.c, m.d]; REGION_COUNT]
        }
        _ => RegionLabel::ALL.map(|r| {
            let m = &st.models[r.index()];
            [m.a, m.b, m.c, m.d]
        }),
    };
    let mut region_counts = [0usize; REGION_COUNT];
    let mut mad = [0.0; REGION_COUNT];
    let mut region_rate = [0.0; REGION_COUNT];
    let mut region_mse = [0.0; REGION_COUNT];
    let mut region_skip = [0.0; REGION_COUNT];
    let mut gmv = GlobalMotionVector::ZERO;
    if let Some(a) = analysis {
        gmv = a.gmv;
        region_counts = a.map.counts;
        mad = a.mads;
        for r in RegionLabel::ALL {
            region_rate[r.index()] = stats.region_mean_bits(&a.map, r);
            region_mse[r.index()] = stats.region_mean_mse(&a.map, r);
            region_skip[r.index()] = stats.region_skip_fraction(&a.map, r);
        }
    }
    let qp_mean = if outcome.qp_per_mb.is_empty() {
        0.0
    } else {
        outcome.qp_per_mb.iter().map(|&q| q as f64).sum::<f64>() / outcome.qp_per_mb.len() as f64
    };
    FrameReport {
        index: k,
        frame_type: if intra { FrameType::Intra } else { FrameType::Inter },
        forced_skip: outcome.forced_skip,
        infeasible: outcome.infeasible,
        gmv,
        region_counts,
        qp: outcome.qp,
        qs: outcome.qp.map(|q| st.ladder.qs(q)),
        mad,
        region_rate,
        region_mse,
        region_skip,
        qp_per_mb: outcome.qp_per_mb.clone(),
        qp_mean,
        mb_bits: stats.mb.iter().map(|m| m.bits as u32).collect(),
        mb_sse: stats.mb.iter().map(|m| m.sse).collect(),
        mb_diff: analysis.as_ref().map_or_else(Vec::new, |a| a.diff.diff.clone()),
        models,
        target_bits: outcome.target_bits,
        actual_bits: stats.frame_bits(),
        mode_counts: [
            stats.mode_count(MbMode::Skip),
            stats.mode_count(MbMode::Inter),
            stats.mode_count(MbMode::Intra),
        ],
        psnr: psnr_from_mse(stats.frame_mse()),
        buffer_fullness: st.buffer.fullness,
    }
}

fn analyze_frame(
    frame: &FrameY,
    prev: &FrameY,
    cfg: &EncoderConfig,
    st: &StreamState,
) -> Result<FrameAnalysis> {
    let gmv = if cfg.gmc {
        estimate_gmv(frame, prev, cfg.gmv_search)
    } else {
        GlobalMotionVector::ZERO
    };
    let diff = compute_diff(frame, prev, gmv);
    let map = if cfg.force_single_region {
        RegionMap::from_labels(vec![RegionLabel::Complex; diff.diff.len()])
    } else {
        let moving = extract_moving(&diff, &st.weights, cfg.th_moving);
        if st.have_inter_stats {
            subdivide_non_moving(&st.prev_mse, &moving, cfg.th_complex)?
        } else {
            RegionMap::moving_rest_complex(&moving)
        }
    };
    let mads = RegionLabel::ALL.map(|r| region_mad(&diff, &map, r));
    Ok(FrameAnalysis {
        gmv,
        diff,
        map,
        mads,
    })
}

fn encode_intra_frame(frame: &FrameY, cfg: &EncoderConfig, st: &StreamState) -> Result<FrameOutcome> {
    let qp = st.start_qp;
    let lm = lambda_org(cfg.alpha, qp);
    let mut enc = FrameEncoder::new(&frame.luma, None, qp, cfg.me_search)?;
    let mb_count = enc.grid().mb_count;
    for p in 0..mb_count {
        enc.encode_mb(p, qp, lm, lm.sqrt())?;
    }
    let (stats, recon, _, _) = enc.finish()?;
    Ok(FrameOutcome {
        stats,
        recon,
        qp: [qp; REGION_COUNT],
        qp_per_mb: vec![qp; mb_count],
        target_bits: 0.0,
        forced_skip: false,
        infeasible: false,
    })
}

fn frame_target(cfg: &EncoderConfig, st: &StreamState, fps: f64) -> f64 {
    let feedback = buffer_feedback(&st.buffer, fps, cfg.bitrate);
    let floor = cfg.bitrate / fps / 8.0;
    allocate_frame_bits(st.remaining_bits, st.remaining_frames, feedback, cfg.mu, floor)
}

fn encode_all_skip(
    frame: &FrameY,
    cfg: &EncoderConfig,
    st: &StreamState,
    target: f64,
) -> Result<FrameOutcome> {
    let qp = st.prev_qp;
    let mut enc = FrameEncoder::new(&frame.luma, Some(&st.prev_recon), st.prev_frame_qp, cfg.me_search)?;
    let mb_count = enc.grid().mb_count;
    for p in 0..mb_count {
        enc.encode_mb_skip(p, st.prev_frame_qp)?;
    }
    let (stats, recon, _, _) = enc.finish()?;
    Ok(FrameOutcome {
        stats,
        recon,
        qp,
        qp_per_mb: vec![st.prev_frame_qp; mb_count],
        target_bits: target,
        forced_skip: true,
        infeasible: false,
    })
}

fn encode_with_region_qps(
    frame: &FrameY,
    cfg: &EncoderConfig,
    st: &StreamState,
    map: &RegionMap,
    qp: [u8; REGION_COUNT],
    lambda: &LagrangeSet,
    target: f64,
    infeasible: bool,
) -> Result<FrameOutcome> {
    let first_region = map.labels[0].index();
    let mut enc = FrameEncoder::new(&frame.luma, Some(&st.prev_recon), qp[first_region], cfg.me_search)?;
    let mb_count = enc.grid().mb_count;
    let mut qp_per_mb = Vec::with_capacity(mb_count);
    for p in 0..mb_count {
        let r = map.labels[p].index();
        enc.encode_mb(p, qp[r], lambda.mode[r], lambda.me[r])?;
        qp_per_mb.push(qp[r]);
    }
    let (stats, recon, _, _) = enc.finish()?;
    Ok(FrameOutcome {
        stats,
        recon,
        qp,
        qp_per_mb,
        target_bits: target,
        forced_skip: false,
        infeasible,
    })
}

fn encode_region_frame(
    frame: &FrameY,
    cfg: &EncoderConfig,
    st: &mut StreamState,
    analysis: &FrameAnalysis,
    fps: f64,
) -> Result<FrameOutcome> {
    let target = frame_target(cfg, st, fps);
    let drain = cfg.bitrate / fps;
    if st.buffer.would_exceed(target, drain, FORCED_SKIP_THRESHOLD) {
        return encode_all_skip(frame, cfg, st, target);
    }

    let ordered = cfg.mode == ControllerMode::RegionOrdered;
    let input = AllocationInput {
        models: &st.models,
        mads: analysis.mads,
        counts: analysis.map.counts,
        budget: target,
        ladder: &st.ladder,
    };
    let decision = if ordered {
        solve_qp_t2(&input)?
    } else {
        solve_qp_t1(&input)?
    };
    // The smoothing clamp shapes feasible solutions only; when even the
    // coarsest step cannot meet the target, holding the step fine would
    // just pour bits into an already blown budget.
    let (qp, infeasible) = if decision.infeasible {
        (decision.qp, true)
    } else {
        (clamp_qp(decision.qp, st.prev_qp), false)
    };

    let lambda = if ordered && cfg.lambda_adjust {
        LagrangeSet::adjusted(&st.models, &analysis.map.counts, &qp, cfg.alpha)
    } else {
        LagrangeSet::unadjusted(&qp, cfg.alpha)
    };
    encode_with_region_qps(frame, cfg, st, &analysis.map, qp, &lambda, target, infeasible)
}

fn update_region_models(
    st: &mut StreamState,
    k: usize,
    analysis: &FrameAnalysis,
    outcome: &FrameOutcome,
    cfg: &EncoderConfig,
) {
    let _ = cfg;
    for r in RegionLabel::ALL {
        let i = r.index();
        if analysis.map.counts[i] == 0 {
            continue;
        }
        st.windows[i].push(RegionObservation {
            frame: k,
            region: r,
            qs: st.ladder.qs(outcome.qp[i]),
            mad: analysis.mads[i],
            rate: outcome.stats.region_mean_bits(&analysis.map, r),
            dist: outcome.stats.region_mean_mse(&analysis.map, r),
        });
        st.models[i] = refit(&st.windows[i], &st.models[i]);
    }
}

fn encode_frame_layer(
    frame: &FrameY,
    cfg: &EncoderConfig,
    st: &mut StreamState,
    analysis: &FrameAnalysis,
    fps: f64,
) -> Result<FrameOutcome> {
    let target = frame_target(cfg, st, fps);
    let drain = cfg.bitrate / fps;
    if st.buffer.would_exceed(target, drain, FORCED_SKIP_THRESHOLD) {
        return encode_all_skip(frame, cfg, st, target);
    }

    let mb_count = analysis.map.labels.len();
    let models = [st.pooled_model.clone(), st.pooled_model.clone(), st.pooled_model.clone()];
    let input = AllocationInput {
        models: &models,
        mads: [0.0, analysis.diff.diff_avg, 0.0],
        counts: [0, mb_count, 0],
        budget: target,
        ladder: &st.ladder,
    };
    let decision = solve_qp_t1(&input)?;
    let (qp, infeasible) = if decision.infeasible {
        (decision.qp[1], true)
    } else {
        (
            clamp_qp_single(decision.qp[1], st.prev_frame_qp, 3, 3),
            false,
        )
    };

    let lambda = LagrangeSet::unadjusted(&[qp; REGION_COUNT], cfg.alpha);
    encode_with_region_qps(
        frame,
        cfg,
        st,
        &analysis.map,
        [qp; REGION_COUNT],
        &lambda,
        target,
        infeasible,
    )
}

fn update_pooled_model(
    st: &mut StreamState,
    k: usize,
    analysis: &FrameAnalysis,
    outcome: &FrameOutcome,
    mb_count: usize,
) {
    let stats = &outcome.stats;
    let texture_and_mode_bits = stats.frame_bits() - stats.header_bits;
    let mean_qs = outcome
        .qp_per_mb
        .iter()
        .map(|&q| st.ladder.qs(q))
        .sum::<f64>()
        / outcome.qp_per_mb.len().max(1) as f64;
    st.pooled_window.push(RegionObservation {
        frame: k,
        region: RegionLabel::Complex,
        qs: mean_qs,
        mad: analysis.diff.diff_avg,
        rate: texture_and_mode_bits as f64 / mb_count as f64,
        dist: stats.frame_mse(),
    });
    st.pooled_model = refit(&st.pooled_window, &st.pooled_model);
}

fn encode_mb_layer(
    frame: &FrameY,
    cfg: &EncoderConfig,
    st: &mut StreamState,
    analysis: &FrameAnalysis,
    fps: f64,
) -> Result<FrameOutcome> {
    let target = frame_target(cfg, st, fps);
    let drain = cfg.bitrate / fps;
    if st.buffer.would_exceed(target, drain, FORCED_SKIP_THRESHOLD) {
        return encode_all_skip(frame, cfg, st, target);
    }

    let mut enc = FrameEncoder::new(&frame.luma, Some(&st.prev_recon), st.prev_frame_qp, cfg.me_search)?;
    let mb_count = enc.grid().mb_count;
    let mut qp_per_mb = Vec::with_capacity(mb_count);
    let mut remaining = target;
    let mut prev_mb_qp = st.prev_frame_qp;

    for p in 0..mb_count {
        let share = remaining / (mb_count - p) as f64;
        let needed = share - st.pooled_model.b;
        let activity = st.pooled_model.a * analysis.diff.diff[p];
        // A spent frame budget overrides the smoothing clamps: finish the
        // frame at the coarsest step instead of rippling the overdraft on.
        let qp = if needed <= 0.0 {
            51
        } else {
            let raw = if activity <= 0.0 {
                prev_mb_qp
            } else {
                st.ladder.ceil_qp(activity / needed)
            };
            clamp_qp_single(clamp_qp_single(raw, prev_mb_qp, 2, 2), st.prev_frame_qp, 3, 3)
        };
        let lm = lambda_org(cfg.alpha, qp);
        let stats = enc.encode_mb(p, qp, lm, lm.sqrt())?;
        remaining -= stats.bits as f64;
        prev_mb_qp = qp;
        qp_per_mb.push(qp);
    }

    let (stats, recon, _, _) = enc.finish()?;
    let qp_regions = region_rounded_qp(&qp_per_mb, &analysis.map, st.prev_frame_qp);
    Ok(FrameOutcome {
        stats,
        recon,
        qp: qp_regions,
        qp_per_mb,
        target_bits: target,
        forced_skip: false,
        infeasible: false,
    })
}

/// Representative per-region QP for reporting: the rounded mean over the
/// region's macroblocks, or the fallback where a region is empty.
fn region_rounded_qp(qp_per_mb: &[u8], map: &RegionMap, fallback: u8) -> [u8; REGION_COUNT] {
    let mut sums = [0u32; REGION_COUNT];
    for (&q, &l) in qp_per_mb.iter().zip(&map.labels) {
        sums[l.index()] += q as u32;
    }
    let mut out = [fallback; REGION_COUNT];
    for r in 0..REGION_COUNT {
        if map.counts[r] > 0 {
            out[r] = ((sums[r] as f64 / map.counts[r] as f64).round() as u8).clamp(1, 51);
        }
    }
    out
}

fn encode_constant_qp(frame: &FrameY, cfg: &EncoderConfig, st: &StreamState) -> Result<FrameOutcome> {
    let qp = cfg.fixed_qp;
    let lm = lambda_org(cfg.alpha, qp);
    let mut enc = FrameEncoder::new(&frame.luma, Some(&st.prev_recon), qp, cfg.me_search)?;
    let mb_count = enc.grid().mb_count;
    for p in 0..mb_count {
        enc.encode_mb(p, qp, lm, lm.sqrt())?;
    }
    let (stats, recon, _, _) = enc.finish()?;
    Ok(FrameOutcome {
        stats,
        recon,
        qp: [qp; REGION_COUNT],
        qp_per_mb: vec![qp; mb_count],
        target_bits: 0.0,
        forced_skip: false,
        infeasible: false,
    })
}
