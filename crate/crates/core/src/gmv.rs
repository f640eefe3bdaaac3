//! Global (camera) motion estimation from gray-level projections.
//!
//! A 2-D frame is collapsed into a row curve and a column curve of mean
//! luma; matching each curve of the current frame against a shifted curve
//! of the previous frame yields the two components of one global motion
//! vector per frame at a tiny fraction of the cost of 2-D search.

use crate::yuv::FrameY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GlobalMotionVector {
    pub x: i32,
    pub y: i32,
}

impl GlobalMotionVector {
    pub const ZERO: GlobalMotionVector = GlobalMotionVector { x: 0, y: 0 };

    pub fn new(x: i32, y: i32) -> Self {
        GlobalMotionVector { x, y }
    }
}

/// Mean-luma projections: `row[y]` averages row `y`, `col[x]` averages
/// column `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionCurves {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
}

pub fn project(frame: &FrameY) -> ProjectionCurves {
    let (w, h) = (frame.luma.width, frame.luma.height);
    let mut row = vec![0.0; h];
    let mut col = vec![0.0; w];
    for y in 0..h {
        let line = frame.luma.row(y);
        let mut sum = 0u64;
        for (x, &v) in line.iter().enumerate() {
            sum += v as u64;
            col[x] += v as f64;
        }
        row[y] = sum as f64 / w as f64;
    }
    for v in col.iter_mut() {
        *v /= h as f64;
    }
    ProjectionCurves { row, col }
}

/// Mean absolute curve difference at shift `g`, over the overlapping support
/// only. `None` when the curves do not overlap at this shift.
fn curve_score(cur: &[f64], prev: &[f64], g: i32) -> Option<f64> {
    let n = cur.len() as i32;
    let start = 0.max(-g);
    let end = n.min(n - g);
    if start >= end {
        return None;
    }
    let mut sum = 0.0;
    for i in start..end {
        sum += (cur[i as usize] - prev[(i + g) as usize]).abs();
    }
    Some(sum / (end - start) as f64)
}

/// Best shift of one axis within `±range`. Candidates are visited in order
/// of growing magnitude with the negative sign first, and only a strictly
/// better score replaces the incumbent, so ties resolve toward the smaller
/// magnitude and then toward the negative shift.
fn best_shift(cur: &[f64], prev: &[f64], range: u32) -> i32 {
    let mut best_g = 0;
    let mut best_score = f64::INFINITY;
    for mag in 0..=range as i32 {
        let candidates = if mag == 0 { vec![0] } else { vec![-mag, mag] };
        for g in candidates {
            if let Some(score) = curve_score(cur, prev, g) {
                if score < best_score {
                    best_score = score;
                    best_g = g;
                }
            }
        }
    }
    best_g
}

/// Estimate the global motion vector between consecutive frames: the shifts
/// minimizing the normalized projection-curve differences, one axis at a
/// time. `search_range = 0` pins the result to zero motion.
pub fn estimate_gmv(cur: &FrameY, prev: &FrameY, search_range: u32) -> GlobalMotionVector {
    debug_assert_eq!(cur.luma.width, prev.luma.width);
    debug_assert_eq!(cur.luma.height, prev.luma.height);
    if search_range == 0 {
        return GlobalMotionVector::ZERO;
    }
    let pc = project(cur);
    let pp = project(prev);
    GlobalMotionVector {
        x: best_shift(&pc.col, &pp.col, search_range),
        y: best_shift(&pc.row, &pp.row, search_range),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::yuv::Plane;

    fn frame_from_fn(w: usize, h: usize, f: impl Fn(usize, usize) -> u8) -> FrameY {
        let mut data = vec![0u8; w * h];
        for y in 0..h {
            for x in 0..w {
                data[y * w + x] = f(x, y);
            }
        }
        FrameY::new(0, Plane::from_data(w, h, data))
    }

    #[test]
    fn constant_frame_projects_to_constant_curves() {
        let frame = frame_from_fn(32, 16, |_, _| 77);
        let p = project(&frame);
        assert!(p.row.iter().all(|&v| v == 77.0));
        assert!(p.col.iter().all(|&v| v == 77.0));
    }

    #[test]
    fn single_white_row_shows_up_in_both_curves() {
        let h = 144;
        let frame = frame_from_fn(16, h, |_, y| if y == 7 { 255 } else { 0 });
        let p = project(&frame);
        assert_eq!(p.row[7], 255.0);
        assert!(p.row.iter().enumerate().all(|(y, &v)| y == 7 || v == 0.0));
        assert!(p.col.iter().all(|&v| v == 255.0 / h as f64));
    }

    #[test]
    fn horizontal_gradient_projects_linearly() {
        let frame = frame_from_fn(64, 32, |x, _| x as u8);
        let p = project(&frame);
        for (x, &v) in p.col.iter().enumerate() {
            assert_eq!(v, x as f64);
        }
        let mean = (0..64).sum::<usize>() as f64 / 64.0;
        assert!(p.row.iter().all(|&v| (v - mean).abs() < 1e-12));
    }

    #[test]
    fn identical_frames_give_zero_motion() {
        let frame = frame_from_fn(48, 48, |x, y| ((x * 31 + y * 17) % 256) as u8);
        let gmv = estimate_gmv(&frame, &frame, 16);
        assert_eq!(gmv, GlobalMotionVector::ZERO);
    }

    #[test]
    fn flat_frames_resolve_ties_to_zero() {
        let a = frame_from_fn(32, 32, |_, _| 128);
        let b = frame_from_fn(32, 32, |_, _| 128);
        assert_eq!(estimate_gmv(&a, &b, 8), GlobalMotionVector::ZERO);
    }

    #[test]
    fn zero_search_range_pins_motion_to_zero() {
        let a = frame_from_fn(32, 32, |x, y| ((x * 7 + y) % 256) as u8);
        let b = frame_from_fn(32, 32, |x, y| ((x * 3 + 5 * y) % 256) as u8);
        assert_eq!(estimate_gmv(&a, &b, 0), GlobalMotionVector::ZERO);
    }

    #[test]
    fn recovers_a_known_translation() {
        // Both frames crop the same larger pattern, so the shift is exact.
        let world = |x: usize, y: usize| ((x * 53 + y * 29 + (x * y) % 41) % 256) as u8;
        let (w, h) = (64, 48);
        let prev = frame_from_fn(w, h, |x, y| world(x + 20, y + 20));
        let cur = frame_from_fn(w, h, |x, y| world(x + 20 + 2, y + 20 + 3));
        // cur(x, y) == prev(x + 2, y + 3) wherever both crops see the world.
        let gmv = estimate_gmv(&cur, &prev, 16);
        assert_eq!(gmv, GlobalMotionVector::new(2, 3));
    }

    #[test]
    fn estimate_is_antisymmetric_on_translations() {
        let world = |x: usize, y: usize| ((x * 151 + y * 37 + (x ^ y)) % 256) as u8;
        let (w, h) = (64, 64);
        let a = frame_from_fn(w, h, |x, y| world(x + 24, y + 24));
        let b = frame_from_fn(w, h, |x, y| world(x + 24 + 5, y + 24 - 4));
        // a(x, y) == b(x - 5, y + 4), so matching a against b yields (-5, 4).
        let ab = estimate_gmv(&a, &b, 16);
        let ba = estimate_gmv(&b, &a, 16);
        assert_eq!(ab, GlobalMotionVector::new(-5, 4));
        assert_eq!(ba, GlobalMotionVector::new(5, -4));
    }
}
