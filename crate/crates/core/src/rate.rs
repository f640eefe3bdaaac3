//! Frame-level bit budgeting: remaining-budget smoothing blended with a
//! leaky-bucket buffer feedback term.

pub const MU_DEFAULT: f64 = 0.5;
pub const BUFFER_RATIO_DEFAULT: f64 = 0.5;
const BUFFER_FEEDBACK_GAIN: f64 = 0.5;

/// Leaky-bucket state in bits. Fullness is clamped to `[0, size]` and every
/// clamp is counted; sustained clamping means the operating point is wrong.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferState {
    pub size: f64,
    pub fullness: f64,
    pub target_level: f64,
    pub clamp_events: usize,
}

impl BufferState {
    pub fn new(size: f64) -> Self {
        BufferState {
            size,
            fullness: 0.0,
            target_level: size / 2.0,
            clamp_events: 0,
        }
    }

    /// Apply one coded frame: add its bits, drain one frame interval.
    /// Returns true when the update had to clamp.
    pub fn update(&mut self, coded_bits: f64, drain_bits: f64) -> bool {
        self.fullness += coded_bits - drain_bits;
        if self.fullness < 0.0 {
            self.fullness = 0.0;
            self.clamp_events += 1;
            true
        } else if self.fullness > self.size {
            self.fullness = self.size;
            self.clamp_events += 1;
            true
        } else {
            false
        }
    }

    /// Would coding `bits` push fullness past `threshold * size`?
    pub fn would_exceed(&self, bits: f64, drain_bits: f64, threshold: f64) -> bool {
        self.fullness + bits - drain_bits > threshold * self.size
    }
}

/// Buffer-driven share of the frame budget: the nominal per-frame bits
/// corrected half-way toward the target occupancy, floored at zero.
pub fn buffer_feedback(buf: &BufferState, frame_rate: f64, bitrate: f64) -> f64 {
    let nominal = bitrate / frame_rate;
    (nominal + BUFFER_FEEDBACK_GAIN * (buf.target_level - buf.fullness)).max(0.0)
}

/// Blend the straight division of the remaining budget with the buffer term,
/// never dropping below `r_min`.
pub fn allocate_frame_bits(
    remaining_bits: f64,
    remaining_frames: u32,
    buffer_term: f64,
    mu: f64,
    r_min: f64,
) -> f64 {
    let fair_share = if remaining_frames > 0 {
        remaining_bits / remaining_frames as f64
    } else {
        remaining_bits
    };
    (mu * fair_share + (1.0 - mu) * buffer_term).max(r_min)
}
