//! Minimal closed-loop block encoder: motion-compensated or DC-predicted
//! macroblocks, Hadamard residual coding, exact Exp-Golomb bit accounting,
//! and λ-driven mode decision. Not a standards codec — it exists to give
//! the rate controller genuine rate/distortion feedback, and every counted
//! bit is also serialized so a decoder can reproduce the reconstruction.

pub mod bits;
pub mod transform;

use crate::error::{Error, Result};
use crate::qs::QsLadder;
use crate::region::{RegionLabel, RegionMap};
use crate::yuv::{MbGrid, Plane, MB_PIXELS, MB_SIZE};
use bits::{len_se, len_ue, BitReader, BitWriter};
use transform::{dequantize, forward, inverse, quantize, BLOCK, BLOCK_PIXELS, ZIGZAG};

/// Cost of signalling a skipped macroblock.
pub const SKIP_BITS: usize = 1;

const BLOCKS_PER_ROW: usize = MB_SIZE / BLOCK;
const BLOCKS_PER_MB: usize = BLOCKS_PER_ROW * BLOCKS_PER_ROW;

const MODE_SKIP: u32 = 0;
const MODE_INTER: u32 = 1;
const MODE_INTRA: u32 = 2;

const FRAME_INTRA: u32 = 0;
const FRAME_INTER: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbMode {
    Skip,
    Inter,
    Intra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Mv {
    pub x: i32,
    pub y: i32,
}

impl Mv {
    pub const ZERO: Mv = Mv { x: 0, y: 0 };
}

#[derive(Debug, Clone)]
pub struct MbStats {
    pub mode: MbMode,
    pub mv: Mv,
    pub qp: u8,
    pub bits: usize,
    pub texture_bits: usize,
    pub sse: u64,
}

impl MbStats {
    pub fn mse(&self) -> f64 {
        self.sse as f64 / MB_PIXELS as f64
    }
}

/// Per-macroblock outcomes plus the frame header cost.
#[derive(Debug, Clone)]
pub struct EncodeStats {
    pub header_bits: usize,
    pub mb: Vec<MbStats>,
}

impl EncodeStats {
    pub fn frame_bits(&self) -> usize {
        self.header_bits + self.mb.iter().map(|m| m.bits).sum::<usize>()
    }

    pub fn frame_sse(&self) -> u64 {
        self.mb.iter().map(|m| m.sse).sum()
    }

    pub fn frame_mse(&self) -> f64 {
        if self.mb.is_empty() {
            return 0.0;
        }
        self.frame_sse() as f64 / (self.mb.len() * MB_PIXELS) as f64
    }

    pub fn mode_count(&self, mode: MbMode) -> usize {
        self.mb.iter().filter(|m| m.mode == mode).count()
    }

    pub fn per_mb_mse(&self) -> Vec<f64> {
        self.mb.iter().map(|m| m.mse()).collect()
    }

    /// Mean coded bits per macroblock of one region; 0 when empty. Header
    /// bits are frame-level and excluded.
    pub fn region_mean_bits(&self, map: &RegionMap, region: RegionLabel) -> f64 {
        self.region_mean(map, region, |m| m.bits as f64)
    }

    /// Mean reconstruction MSE per macroblock of one region; 0 when empty.
    pub fn region_mean_mse(&self, map: &RegionMap, region: RegionLabel) -> f64 {
        self.region_mean(map, region, |m| m.mse())
    }

    pub fn region_skip_fraction(&self, map: &RegionMap, region: RegionLabel) -> f64 {
        let members = map.counts[region.index()];
        if members == 0 {
            return 0.0;
        }
        let skips = self
            .mb
            .iter()
            .zip(&map.labels)
            .filter(|(m, &l)| l == region && m.mode == MbMode::Skip)
            .count();
        skips as f64 / members as f64
    }

    fn region_mean(&self, map: &RegionMap, region: RegionLabel, f: impl Fn(&MbStats) -> f64) -> f64 {
        let members = map.counts[region.index()];
        if members == 0 {
            return 0.0;
        }
        let sum: f64 = self
            .mb
            .iter()
            .zip(&map.labels)
            .filter(|(_, &l)| l == region)
            .map(|(m, _)| f(m))
            .sum();
        sum / members as f64
    }
}

pub fn sse_planes(a: &Plane, b: &Plane) -> u64 {
    a.data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum()
}

pub fn mse_planes(a: &Plane, b: &Plane) -> f64 {
    sse_planes(a, b) as f64 / a.data.len() as f64
}

/// Luma PSNR in dB, with lossless reported as the 99.99 sentinel.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        99.99
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}

pub fn psnr(a: &Plane, b: &Plane) -> f64 {
    psnr_from_mse(mse_planes(a, b))
}

fn quant_step(ladder: &QsLadder, qp: u8) -> f64 {
    4.0 * ladder.qs(qp)
}

fn gather_mb(plane: &Plane, ox: usize, oy: usize) -> [i32; MB_PIXELS] {
    let mut out = [0i32; MB_PIXELS];
    for j in 0..MB_SIZE {
        let row = plane.row(oy + j);
        for i in 0..MB_SIZE {
            out[j * MB_SIZE + i] = row[ox + i] as i32;
        }
    }
    out
}

fn predict_motion(reference: &Plane, ox: usize, oy: usize, mv: Mv) -> [i32; MB_PIXELS] {
    let mut out = [0i32; MB_PIXELS];
    for j in 0..MB_SIZE {
        for i in 0..MB_SIZE {
            out[j * MB_SIZE + i] = reference
                .get_clamped(ox as i64 + i as i64 + mv.x as i64, oy as i64 + j as i64 + mv.y as i64)
                as i32;
        }
    }
    out
}

fn block_sse(src: &[i32; MB_PIXELS], recon: &[u8; MB_PIXELS]) -> u64 {
    src.iter()
        .zip(recon)
        .map(|(&s, &r)| {
            let d = s as i64 - r as i64;
            (d * d) as u64
        })
        .sum()
}

/// Quantized residual of a whole macroblock plus its exact texture cost
/// and the reconstruction it implies.
struct Texture {
    levels: [[i32; BLOCK_PIXELS]; BLOCKS_PER_MB],
    bits: usize,
    recon: [u8; MB_PIXELS],
}

fn code_texture(src: &[i32; MB_PIXELS], pred: &[i32; MB_PIXELS], step: f64) -> Texture {
    let mut levels = [[0i32; BLOCK_PIXELS]; BLOCKS_PER_MB];
    let mut recon = [0u8; MB_PIXELS];
    let mut bits = 0;
    for b in 0..BLOCKS_PER_MB {
        let (bx, by) = (b % BLOCKS_PER_ROW * BLOCK, b / BLOCKS_PER_ROW * BLOCK);
        let mut resid = [0i32; BLOCK_PIXELS];
        for j in 0..BLOCK {
            for i in 0..BLOCK {
                let p = (by + j) * MB_SIZE + bx + i;
                resid[j * BLOCK + i] = src[p] - pred[p];
            }
        }
        levels[b] = quantize(&forward(&resid), step);
        bits += texture_block_bits(&levels[b]);
        let rec = inverse(&dequantize(&levels[b], step));
        for j in 0..BLOCK {
            for i in 0..BLOCK {
                let p = (by + j) * MB_SIZE + bx + i;
                recon[p] = (pred[p] + rec[j * BLOCK + i].round() as i32).clamp(0, 255) as u8;
            }
        }
    }
    Texture {
        levels,
        bits,
        recon,
    }
}

fn texture_block_bits(levels: &[i32; BLOCK_PIXELS]) -> usize {
    let nonzero = ZIGZAG.iter().filter(|&&i| levels[i] != 0).count() as u32;
    let mut bits = len_ue(nonzero);
    let mut run = 0u32;
    for &i in &ZIGZAG {
        if levels[i] == 0 {
            run += 1;
        } else {
            bits += len_ue(run) + len_se(levels[i]);
            run = 0;
        }
    }
    bits
}

fn write_texture_block(w: &mut BitWriter, levels: &[i32; BLOCK_PIXELS]) {
    let nonzero = ZIGZAG.iter().filter(|&&i| levels[i] != 0).count() as u32;
    w.put_ue(nonzero);
    let mut run = 0u32;
    for &i in &ZIGZAG {
        if levels[i] == 0 {
            run += 1;
        } else {
            w.put_ue(run);
            w.put_se(levels[i]);
            run = 0;
        }
    }
}

fn read_texture_block(r: &mut BitReader) -> Result<[i32; BLOCK_PIXELS]> {
    let nonzero = r.get_ue()?;
    if nonzero as usize > BLOCK_PIXELS {
        return Err(Error::domain("texture block overflows"));
    }
    let mut levels = [0i32; BLOCK_PIXELS];
    let mut pos = 0usize;
    for _ in 0..nonzero {
        pos += r.get_ue()? as usize;
        if pos >= BLOCK_PIXELS {
            return Err(Error::domain("texture run leaves the block"));
        }
        levels[ZIGZAG[pos]] = r.get_se()?;
        pos += 1;
    }
    Ok(levels)
}

fn dc_predict(recon: &Plane, ox: usize, oy: usize) -> i32 {
    let mut sum = 0i64;
    let mut n = 0i64;
    if oy > 0 {
        for i in 0..MB_SIZE {
            sum += recon.get(ox + i, oy - 1) as i64;
            n += 1;
        }
    }
    if ox > 0 {
        for j in 0..MB_SIZE {
            sum += recon.get(ox - 1, oy + j) as i64;
            n += 1;
        }
    }
    if n == 0 {
        128
    } else {
        ((sum + n / 2) / n) as i32
    }
}

struct Candidate {
    mode: MbMode,
    mv: Mv,
    bits: usize,
    texture_bits: usize,
    sse: u64,
    recon: [u8; MB_PIXELS],
    texture: Option<Texture>,
}

/// Encodes one frame macroblock by macroblock in raster order, keeping the
/// reconstruction, exact bit counts, and the serialized symbol stream in
/// lockstep. The reference, when present, is the previous frame's
/// reconstruction (closed loop).
pub struct FrameEncoder<'a> {
    src: &'a Plane,
    reference: Option<&'a Plane>,
    grid: MbGrid,
    ladder: QsLadder,
    search: i32,
    recon: Plane,
    writer: BitWriter,
    header_bits: usize,
    qp_chain: u8,
    chain_mv: Mv,
    stats: Vec<MbStats>,
    next_mb: usize,
}

impl<'a> FrameEncoder<'a> {
    /// `reference: None` starts an intra frame; `init_qp` seeds the QP
    /// prediction chain and is carried in the frame header.
    pub fn new(src: &'a Plane, reference: Option<&'a Plane>, init_qp: u8, search: u32) -> Result<Self> {
        if init_qp > 51 {
            return Err(Error::domain(format!("init qp {init_qp} out of range")));
        }
        if let Some(r) = reference {
            if r.width != src.width || r.height != src.height {
                return Err(Error::domain("reference dimensions differ from source"));
            }
        }
        let mut writer = BitWriter::new();
        writer.put_ue(if reference.is_some() { FRAME_INTER } else { FRAME_INTRA });
        writer.put_ue(init_qp as u32);
        let header_bits = writer.len_bits();
        Ok(FrameEncoder {
            src,
            reference,
            grid: MbGrid::new(src.width, src.height),
            ladder: QsLadder::new(),
            search: search as i32,
            recon: Plane::new(src.width, src.height),
            writer,
            header_bits,
            qp_chain: init_qp,
            chain_mv: Mv::ZERO,
            stats: Vec::new(),
            next_mb: 0,
        })
    }

    pub fn grid(&self) -> MbGrid {
        self.grid
    }

    fn check_mb(&self, p: usize, qp: u8) -> Result<()> {
        if p != self.next_mb {
            return Err(Error::index(format!(
                "macroblock {p} out of order; expected {}",
                self.next_mb
            )));
        }
        if p >= self.grid.mb_count {
            return Err(Error::index(format!("macroblock {p} outside frame")));
        }
        if qp > 51 {
            return Err(Error::domain(format!("qp {qp} out of range")));
        }
        Ok(())
    }

    fn mv_predictor(&self, p: usize) -> Mv {
        if p % self.grid.mbs_x == 0 {
            Mv::ZERO
        } else {
            self.chain_mv
        }
    }

    /// Full-search motion estimation minimizing SAD plus weighted vector
    /// cost; raster scan with strict improvement, so ties keep the first
    /// (smallest) candidate.
    fn motion_search(
        &self,
        reference: &Plane,
        src: &[i32; MB_PIXELS],
        ox: usize,
        oy: usize,
        pred_mv: Mv,
        lambda_me: f64,
    ) -> Mv {
        let mut best = Mv::ZERO;
        let mut best_cost = f64::INFINITY;
        for dy in -self.search..=self.search {
            for dx in -self.search..=self.search {
                let mv_bits = len_se(dx - pred_mv.x) + len_se(dy - pred_mv.y);
                let mv_cost = lambda_me * mv_bits as f64;
                let bound = best_cost - mv_cost;
                if bound <= 0.0 {
                    continue;
                }
                let mut sad = 0i64;
                'rows: for j in 0..MB_SIZE {
                    for i in 0..MB_SIZE {
                        let r = reference.get_clamped(
                            ox as i64 + i as i64 + dx as i64,
                            oy as i64 + j as i64 + dy as i64,
                        ) as i64;
                        sad += (src[j * MB_SIZE + i] as i64 - r).abs();
                    }
                    if sad as f64 >= bound {
                        break 'rows;
                    }
                }
                let cost = sad as f64 + mv_cost;
                if cost < best_cost {
                    best_cost = cost;
                    best = Mv { x: dx, y: dy };
                }
            }
        }
        best
    }

    fn intra_candidate(&self, src: &[i32; MB_PIXELS], ox: usize, oy: usize, qp: u8, in_inter_frame: bool) -> Candidate {
        let dc = dc_predict(&self.recon, ox, oy);
        let pred = [dc; MB_PIXELS];
        let texture = code_texture(src, &pred, quant_step(&self.ladder, qp));
        let qp_delta = qp as i32 - self.qp_chain as i32;
        let mode_bits = if in_inter_frame { len_ue(MODE_INTRA) } else { 0 };
        let bits = mode_bits + len_se(qp_delta) + texture.bits;
        Candidate {
            mode: MbMode::Intra,
            mv: Mv::ZERO,
            bits,
            texture_bits: texture.bits,
            sse: block_sse(src, &texture.recon),
            recon: texture.recon,
            texture: Some(texture),
        }
    }

    /// Encode macroblock `p` (raster order only) at the given QP and
    /// multipliers, choosing among skip, motion-compensated, and intra
    /// coding by minimum distortion-plus-weighted-bits.
    pub fn encode_mb(&mut self, p: usize, qp: u8, lambda_mode: f64, lambda_me: f64) -> Result<MbStats> {
        self.check_mb(p, qp)?;
        let (ox, oy) = self.grid.mb_origin(p);
        let src = gather_mb(self.src, ox, oy);

        let chosen = match self.reference {
            None => self.intra_candidate(&src, ox, oy, qp, false),
            Some(reference) => {
                let pred_mv = self.mv_predictor(p);

                let skip_pred = predict_motion(reference, ox, oy, pred_mv);
                let mut skip_recon = [0u8; MB_PIXELS];
                for (r, &v) in skip_recon.iter_mut().zip(&skip_pred) {
                    *r = v as u8;
                }
                let skip = Candidate {
                    mode: MbMode::Skip,
                    mv: pred_mv,
                    bits: SKIP_BITS,
                    texture_bits: 0,
                    sse: block_sse(&src, &skip_recon),
                    recon: skip_recon,
                    texture: None,
                };

                let mv = self.motion_search(reference, &src, ox, oy, pred_mv, lambda_me);
                let inter_pred = predict_motion(reference, ox, oy, mv);
                let texture = code_texture(&src, &inter_pred, quant_step(&self.ladder, qp));
                let qp_delta = qp as i32 - self.qp_chain as i32;
                let inter_bits = len_ue(MODE_INTER)
                    + len_se(mv.x - pred_mv.x)
                    + len_se(mv.y - pred_mv.y)
                    + len_se(qp_delta)
                    + texture.bits;
                let inter = Candidate {
                    mode: MbMode::Inter,
                    mv,
                    bits: inter_bits,
                    texture_bits: texture.bits,
                    sse: block_sse(&src, &texture.recon),
                    recon: texture.recon,
                    texture: Some(texture),
                };

                let intra = self.intra_candidate(&src, ox, oy, qp, true);

                // Strict improvement keeps the earliest candidate on ties,
                // so skip wins whenever it matches a coded mode.
                let mut best = skip;
                for cand in [inter, intra] {
                    let j_best = best.sse as f64 + lambda_mode * best.bits as f64;
                    let j_cand = cand.sse as f64 + lambda_mode * cand.bits as f64;
                    if j_cand < j_best {
                        best = cand;
                    }
                }
                best
            }
        };

        self.commit(p, qp, chosen)
    }

    /// Code macroblock `p` as skip regardless of cost; used when the next
    /// frame must spend as close to nothing as possible.
    pub fn encode_mb_skip(&mut self, p: usize, qp: u8) -> Result<MbStats> {
        self.check_mb(p, qp)?;
        let reference = self
            .reference
            .ok_or_else(|| Error::domain("cannot skip macroblocks in an intra frame"))?;
        let (ox, oy) = self.grid.mb_origin(p);
        let src = gather_mb(self.src, ox, oy);
        let pred_mv = self.mv_predictor(p);
        let pred = predict_motion(reference, ox, oy, pred_mv);
        let mut recon = [0u8; MB_PIXELS];
        for (r, &v) in recon.iter_mut().zip(&pred) {
            *r = v as u8;
        }
        let cand = Candidate {
            mode: MbMode::Skip,
            mv: pred_mv,
            bits: SKIP_BITS,
            texture_bits: 0,
            sse: block_sse(&src, &recon),
            recon,
            texture: None,
        };
        self.commit(p, qp, cand)
    }

    fn commit(&mut self, p: usize, qp: u8, cand: Candidate) -> Result<MbStats> {
        let before = self.writer.len_bits();
        let in_inter_frame = self.reference.is_some();
        match cand.mode {
            MbMode::Skip => {
                self.writer.put_ue(MODE_SKIP);
                self.chain_mv = cand.mv;
            }
            MbMode::Inter => {
                let pred_mv = self.mv_predictor(p);
                self.writer.put_ue(MODE_INTER);
                self.writer.put_se(cand.mv.x - pred_mv.x);
                self.writer.put_se(cand.mv.y - pred_mv.y);
                self.writer.put_se(qp as i32 - self.qp_chain as i32);
                for block in &cand.texture.as_ref().unwrap().levels {
                    write_texture_block(&mut self.writer, block);
                }
                self.chain_mv = cand.mv;
                self.qp_chain = qp;
            }
            MbMode::Intra => {
                if in_inter_frame {
                    self.writer.put_ue(MODE_INTRA);
                }
                self.writer.put_se(qp as i32 - self.qp_chain as i32);
                for block in &cand.texture.as_ref().unwrap().levels {
                    write_texture_block(&mut self.writer, block);
                }
                self.chain_mv = Mv::ZERO;
                self.qp_chain = qp;
            }
        }
        debug_assert_eq!(self.writer.len_bits() - before, cand.bits);

        let (ox, oy) = self.grid.mb_origin(p);
        for j in 0..MB_SIZE {
            for i in 0..MB_SIZE {
                self.recon.data[(oy + j) * self.recon.width + ox + i] =
                    cand.recon[j * MB_SIZE + i];
            }
        }
        let stats = MbStats {
            mode: cand.mode,
            mv: cand.mv,
            qp,
            bits: cand.bits,
            texture_bits: cand.texture_bits,
            sse: cand.sse,
        };
        self.stats.push(stats.clone());
        self.next_mb += 1;
        Ok(stats)
    }

    /// Seal the frame: per-MB stats, the reconstruction, and the serialized
    /// stream with its exact bit length.
    pub fn finish(self) -> Result<(EncodeStats, Plane, Vec<u8>, usize)> {
        if self.next_mb != self.grid.mb_count {
            return Err(Error::domain(format!(
                "frame incomplete: {} of {} macroblocks coded",
                self.next_mb, self.grid.mb_count
            )));
        }
        let stats = EncodeStats {
            header_bits: self.header_bits,
            mb: self.stats,
        };
        let (bytes, nbits) = self.writer.finish();
        debug_assert_eq!(nbits, stats.frame_bits());
        Ok((stats, self.recon, bytes, nbits))
    }
}

/// Rebuild a frame from its serialized stream; returns the reconstruction
/// and the number of bits consumed. Mirrors the encoder's prediction
/// chains exactly.
pub fn decode_frame(bytes: &[u8], width: usize, height: usize, reference: Option<&Plane>) -> Result<(Plane, usize)> {
    let ladder = QsLadder::new();
    let grid = MbGrid::new(width, height);
    let mut r = BitReader::new(bytes);
    let frame_type = r.get_ue()?;
    match frame_type {
        FRAME_INTRA => {
            if reference.is_some() {
                return Err(Error::domain("intra frame decoded with a reference"));
            }
        }
        FRAME_INTER => {
            if reference.is_none() {
                return Err(Error::domain("inter frame needs a reference"));
            }
        }
        other => return Err(Error::domain(format!("unknown frame type {other}"))),
    }
    let init_qp = r.get_ue()?;
    if init_qp > 51 {
        return Err(Error::domain(format!("header qp {init_qp} out of range")));
    }

    let mut recon = Plane::new(width, height);
    let mut qp_chain = init_qp as i32;
    let mut chain_mv = Mv::ZERO;

    for p in 0..grid.mb_count {
        let (ox, oy) = grid.mb_origin(p);
        let pred_mv = if p % grid.mbs_x == 0 { Mv::ZERO } else { chain_mv };
        let mode = match frame_type {
            FRAME_INTRA => MODE_INTRA,
            _ => r.get_ue()?,
        };
        match mode {
            MODE_SKIP => {
                let pred = predict_motion(reference.unwrap(), ox, oy, pred_mv);
                store_mb(&mut recon, ox, oy, |p| pred[p] as u8);
                chain_mv = pred_mv;
            }
            MODE_INTER => {
                let mvd_x = r.get_se()?;
                let mvd_y = r.get_se()?;
                let mv = Mv {
                    x: pred_mv.x + mvd_x,
                    y: pred_mv.y + mvd_y,
                };
                let qp = next_qp(&mut qp_chain, r.get_se()?)?;
                let pred = predict_motion(reference.unwrap(), ox, oy, mv);
                decode_texture_into(&mut r, &mut recon, ox, oy, &pred, quant_step(&ladder, qp))?;
                chain_mv = mv;
            }
            MODE_INTRA => {
                let qp = next_qp(&mut qp_chain, r.get_se()?)?;
                let dc = dc_predict(&recon, ox, oy);
                let pred = [dc; MB_PIXELS];
                decode_texture_into(&mut r, &mut recon, ox, oy, &pred, quant_step(&ladder, qp))?;
                chain_mv = Mv::ZERO;
            }
            other => return Err(Error::domain(format!("unknown macroblock mode {other}"))),
        }
    }
    let consumed = r.bits_read();
    Ok((recon, consumed))
}

fn next_qp(chain: &mut i32, delta: i32) -> Result<u8> {
    let qp = *chain + delta;
    if !(0..=51).contains(&qp) {
        return Err(Error::domain(format!("decoded qp {qp} out of range")));
    }
    *chain = qp;
    Ok(qp as u8)
}

fn store_mb(recon: &mut Plane, ox: usize, oy: usize, f: impl Fn(usize) -> u8) {
    for j in 0..MB_SIZE {
        for i in 0..MB_SIZE {
            recon.data[(oy + j) * recon.width + ox + i] = f(j * MB_SIZE + i);
        }
    }
}

fn decode_texture_into(
    r: &mut BitReader,
    recon: &mut Plane,
    ox: usize,
    oy: usize,
    pred: &[i32; MB_PIXELS],
    step: f64,
) -> Result<()> {
    let mut out = [0u8; MB_PIXELS];
    for b in 0..BLOCKS_PER_MB {
        let (bx, by) = (b % BLOCKS_PER_ROW * BLOCK, b / BLOCKS_PER_ROW * BLOCK);
        let levels = read_texture_block(r)?;
        let rec = inverse(&dequantize(&levels, step));
        for j in 0..BLOCK {
            for i in 0..BLOCK {
                let p = (by + j) * MB_SIZE + bx + i;
                out[p] = (pred[p] + rec[j * BLOCK + i].round() as i32).clamp(0, 255) as u8;
            }
        }
    }
    store_mb(recon, ox, oy, |p| out[p]);
    Ok(())
}
