//! Quantization-parameter / step-size ladder. Steps double every six QP
//! values, so the whole table follows from the first six entries.

pub const QP_MIN: u8 = 0;
pub const QP_MAX: u8 = 51;
pub const QP_LEVELS: usize = 52;

/// First period of the ladder; entry `qp + 6` is twice entry `qp`.
const QS_BASE: [f64; 6] = [0.625, 0.6875, 0.8125, 0.875, 1.0, 1.125];

/// Full 52-entry quantization-step table, strictly increasing in QP.
#[derive(Debug, Clone, PartialEq)]
pub struct QsLadder {
    table: [f64; QP_LEVELS],
}

impl Default for QsLadder {
    fn default() -> Self {
        Self::new()
    }
}

impl QsLadder {
    pub fn new() -> Self {
        let mut table = [0.0; QP_LEVELS];
        table[..6].copy_from_slice(&QS_BASE);
        for qp in 6..QP_LEVELS {
            table[qp] = 2.0 * table[qp - 6];
        }
        QsLadder { table }
    }

    #[inline]
    pub fn qs(&self, qp: u8) -> f64 {
        self.table[qp as usize]
    }

    pub fn entries(&self) -> &[f64; QP_LEVELS] {
        &self.table
    }

    /// QP whose step is nearest to `qs`; on an exact midpoint the smaller QP
    /// wins. Values beyond either end clamp to that end.
    pub fn nearest_qp(&self, qs: f64) -> u8 {
        let mut best = 0u8;
        let mut best_err = f64::INFINITY;
        for (qp, &step) in self.table.iter().enumerate() {
            let err = (qs - step).abs();
            if err < best_err {
                best_err = err;
                best = qp as u8;
            }
        }
        best
    }

    /// Smallest QP whose step is >= `qs` (QP_MAX if none is).
    pub fn ceil_qp(&self, qs: f64) -> u8 {
        for (qp, &step) in self.table.iter().enumerate() {
            if step >= qs {
                return qp as u8;
            }
        }
        QP_MAX
    }
}
