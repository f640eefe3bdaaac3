//! Reference answers computed the slow, obvious way.
//!
//! These functions intentionally take plain numbers rather than library
//! types so they share no code (and no bugs) with the implementations they
//! check.

/// Winner of an exhaustive scan over all ladder assignments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceBest {
    /// Ladder index per region; entries of empty regions stay 0 and carry
    /// no meaning.
    pub qs_idx: [usize; 3],
    pub rate: f64,
    pub dist: f64,
}

/// Enumerate every ladder assignment for the populated regions, in
/// lexicographic index order, and keep the feasible one with the smallest
/// total distortion (first hit wins, so ties resolve lexicographically).
/// `ordered` restricts assignments to non-decreasing indices across the
/// populated regions. `None` means no assignment fits the budget.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_qs(
    a: [f64; 3],
    b: [f64; 3],
    c: [f64; 3],
    d: [f64; 3],
    mads: [f64; 3],
    counts: [usize; 3],
    budget: f64,
    ladder: &[f64],
    ordered: bool,
) -> Option<BruteForceBest> {
    let levels = ladder.len();
    let span = |r: usize| if counts[r] > 0 { levels } else { 1 };
    let mut best: Option<BruteForceBest> = None;
    for q0 in 0..span(0) {
        for q1 in 0..span(1) {
            for q2 in 0..span(2) {
                let idx = [q0, q1, q2];
                if ordered {
                    let mut last = None;
                    let mut ok = true;
                    for r in 0..3 {
                        if counts[r] == 0 {
                            continue;
                        }
                        if let Some(p) = last {
                            if idx[r] < p {
                                ok = false;
                                break;
                            }
                        }
                        last = Some(idx[r]);
                    }
                    if !ok {
                        continue;
                    }
                }
                let mut rate = 0.0;
                let mut dist = 0.0;
                for r in 0..3 {
                    if counts[r] == 0 {
                        continue;
                    }
                    let qs = ladder[idx[r]];
                    rate += counts[r] as f64 * (a[r] * mads[r] / qs + b[r]);
                    dist += counts[r] as f64 * (c[r] * qs + d[r]);
                }
                if rate <= budget && best.map_or(true, |bst| dist < bst.dist) {
                    best = Some(BruteForceBest {
                        qs_idx: idx,
                        rate,
                        dist,
                    });
                }
            }
        }
    }
    best
}

/// Least-squares line through (x, y) points by solving the 2x2 normal
/// equations with Cramer's rule. Returns (slope, intercept); `None` when
/// the system is singular (all x equal).
pub fn ols_normal_equations(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    if det == 0.0 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    Some((slope, intercept))
}

/// Coefficient of determination straight from its definition.
pub fn r_squared_direct(xs: &[f64], ys: &[f64], slope: f64, intercept: f64) -> f64 {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return 1.0;
    }
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    1.0 - ss_res / ss_tot
}

const LADDER_BASE: [f64; 6] = [0.625, 0.6875, 0.8125, 0.875, 1.0, 1.125];

/// Quantization step from the closed form (base entry times a power of
/// two) rather than the recurrence the library builds its table with.
pub fn qs_closed_form(qp: u8) -> f64 {
    LADDER_BASE[qp as usize % 6] * (1u64 << (qp as usize / 6)) as f64
}
