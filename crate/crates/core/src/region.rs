//! Frame partitioning into three regions: moving (global-motion-compensated
//! frame difference, weighted by macroblock location), and the remainder
//! split into complex and flat by the previous frame's reconstruction error.
//! Each region, contiguous or not, is later treated as one allocation unit.

use crate::error::{Error, Result};
use crate::gmv::GlobalMotionVector;
use crate::yuv::{FrameY, MbGrid, MB_PIXELS, MB_SIZE};

pub const REGION_COUNT: usize = 3;

pub const TH_MOVING_DEFAULT: f64 = 0.75;
pub const TH_COMPLEX_DEFAULT: f64 = 0.5;

const WEIGHT_CENTRAL: f64 = 1.0;
const WEIGHT_TRANSITION: f64 = 0.55;
const WEIGHT_BORDER: f64 = 0.1;

/// Region labels in allocation order: moving first, flat last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionLabel {
    Moving,
    Complex,
    Flat,
}

impl RegionLabel {
    /// Slot in `[..; REGION_COUNT]` arrays.
    #[inline]
    pub fn index(self) -> usize {
        match self {
            RegionLabel::Moving => 0,
            RegionLabel::Complex => 1,
            RegionLabel::Flat => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<RegionLabel> {
        match i {
            0 => Some(RegionLabel::Moving),
            1 => Some(RegionLabel::Complex),
            2 => Some(RegionLabel::Flat),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegionLabel::Moving => "moving",
            RegionLabel::Complex => "complex",
            RegionLabel::Flat => "flat",
        }
    }

    pub const ALL: [RegionLabel; REGION_COUNT] =
        [RegionLabel::Moving, RegionLabel::Complex, RegionLabel::Flat];
}

/// Per-macroblock mean absolute luma difference against the motion-shifted
/// previous frame, plus the frame average used for normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffMap {
    pub diff: Vec<f64>,
    pub diff_avg: f64,
}

/// Per-macroblock attention weight derived from position in the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationWeights {
    pub weights: Vec<f64>,
}

/// The per-macroblock labeling and the population of each region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMap {
    pub labels: Vec<RegionLabel>,
    pub counts: [usize; REGION_COUNT],
}

impl RegionMap {
    pub fn from_labels(labels: Vec<RegionLabel>) -> Self {
        let mut counts = [0; REGION_COUNT];
        for l in &labels {
            counts[l.index()] += 1;
        }
        RegionMap { labels, counts }
    }

    /// All non-moving macroblocks labeled complex; used for the first coded
    /// difference frame, before any reconstruction error exists.
    pub fn moving_rest_complex(moving: &[bool]) -> Self {
        Self::from_labels(
            moving
                .iter()
                .map(|&m| if m { RegionLabel::Moving } else { RegionLabel::Complex })
                .collect(),
        )
    }
}

/// Mean absolute difference per macroblock between `cur` and `prev` shifted
/// by `gmv`. Reference samples falling outside the frame replicate the edge.
pub fn compute_diff(cur: &FrameY, prev: &FrameY, gmv: GlobalMotionVector) -> DiffMap {
    let grid = cur.grid();
    let mut diff = Vec::with_capacity(grid.mb_count);
    let mut total = 0.0;
    for p in 0..grid.mb_count {
        let (ox, oy) = grid.mb_origin(p);
        let mut sum = 0u32;
        for j in 0..MB_SIZE {
            for i in 0..MB_SIZE {
                let c = cur.luma.get(ox + i, oy + j) as i32;
                let r = prev.luma.get_clamped(
                    (ox + i) as i64 + gmv.x as i64,
                    (oy + j) as i64 + gmv.y as i64,
                ) as i32;
                sum += (c - r).unsigned_abs();
            }
        }
        let d = sum as f64 / MB_PIXELS as f64;
        total += d;
        diff.push(d);
    }
    DiffMap {
        diff_avg: total / grid.mb_count as f64,
        diff,
    }
}

/// Attention weights by distance from the frame edge, in macroblocks: a
/// border strip, a transition band, and a central area. Strip widths grow
/// with the grid (one border / two transition macroblocks on a 9-high grid,
/// doubled on an 18-high grid). Grids where everything would land in the
/// border strip degenerate to the transition weight throughout.
pub fn location_weights(grid: &MbGrid) -> LocationWeights {
    let m = grid.mbs_x.min(grid.mbs_y);
    let border = ((m as f64 / 9.0).round() as usize).max(1);
    let transition = (2 * (m as f64 / 9.0).round() as usize).max(2);

    let mut weights = Vec::with_capacity(grid.mb_count);
    let mut any_inner = false;
    for my in 0..grid.mbs_y {
        for mx in 0..grid.mbs_x {
            let edge_dist = mx
                .min(my)
                .min(grid.mbs_x - 1 - mx)
                .min(grid.mbs_y - 1 - my);
            let w = if edge_dist < border {
                WEIGHT_BORDER
            } else if edge_dist < border + transition {
                WEIGHT_TRANSITION
            } else {
                WEIGHT_CENTRAL
            };
            if w > WEIGHT_BORDER {
                any_inner = true;
            }
            weights.push(w);
        }
    }
    if !any_inner {
        weights.iter_mut().for_each(|w| *w = WEIGHT_TRANSITION);
    }
    LocationWeights { weights }
}

/// Mark moving macroblocks: weighted, average-normalized difference above
/// `th_moving`. A frame with zero average difference has no moving region.
pub fn extract_moving(diff: &DiffMap, weights: &LocationWeights, th_moving: f64) -> Vec<bool> {
    debug_assert_eq!(diff.diff.len(), weights.weights.len());
    if diff.diff_avg == 0.0 {
        return vec![false; diff.diff.len()];
    }
    diff.diff
        .iter()
        .zip(&weights.weights)
        .map(|(&d, &w)| w * d / diff.diff_avg > th_moving)
        .collect()
}

/// Split non-moving macroblocks into complex and flat by the previous
/// frame's per-macroblock reconstruction error: above `th_complex` times the
/// average is complex. A frame whose previous reconstruction was lossless
/// (zero average error) has no complex region.
pub fn subdivide_non_moving(
    prev_mse: &[f64],
    moving: &[bool],
    th_complex: f64,
) -> Result<RegionMap> {
    if prev_mse.len() != moving.len() {
        return Err(Error::index(format!(
            "mse map has {} entries, moving mask has {}",
            prev_mse.len(),
            moving.len()
        )));
    }
    let mse_avg = prev_mse.iter().sum::<f64>() / prev_mse.len().max(1) as f64;
    let labels = moving
        .iter()
        .zip(prev_mse)
        .map(|(&m, &e)| {
            if m {
                RegionLabel::Moving
            } else if mse_avg > 0.0 && e / mse_avg > th_complex {
                RegionLabel::Complex
            } else {
                RegionLabel::Flat
            }
        })
        .collect();
    Ok(RegionMap::from_labels(labels))
}
