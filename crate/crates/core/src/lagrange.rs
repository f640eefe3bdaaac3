//! Per-region Lagrange multipliers for rate-distortion decisions. The
//! baseline multiplier grows exponentially with QP; the adjusted variant
//! reweights it per region by population and by the fitted
//! distortion-per-bit trade-off, so busy regions coded at fine steps also
//! get a multiplier that favors quality.

use crate::model::RegionModel;
use crate::region::REGION_COUNT;

pub const ALPHA_DEFAULT: f64 = 0.85;

/// Divisor guard when a rate model has a zero first-order coefficient.
const SLOPE_EPSILON: f64 = 1e-6;

/// Mode-decision and motion-search multipliers for each region, together
/// with the weights that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeSet {
    pub mode: [f64; REGION_COUNT],
    pub me: [f64; REGION_COUNT],
    pub beta: [f64; REGION_COUNT],
    pub delta: [f64; REGION_COUNT],
}

/// Baseline mode-decision multiplier at one QP: doubles every three steps.
pub fn lambda_org(alpha: f64, qp: u8) -> f64 {
    alpha * ((qp as f64 - 12.0) / 3.0).exp2()
}

/// Bounds on the per-region multiplier factor after normalization. The
/// adjustment is meant as a mild tilt on top of the step-size allocation;
/// left unbounded, a lopsided trade-off ratio reverses the allocation by
/// skipping one region flat, so the factor stays within a third of baseline.
const FACTOR_MIN: f64 = 0.75;
const FACTOR_MAX: f64 = 4.0 / 3.0;

/// Distortion-slope to rate-slope ratio |c/a| of one region's fitted
/// models, guarded against a degenerate rate slope.
pub fn tradeoff(model: &RegionModel) -> f64 {
    model.c.abs() / model.a.abs().max(SLOPE_EPSILON)
}

/// Region weights proportional to population times trade-off ratio,
/// normalized to sum to one. A zero denominator falls back to plain count
/// fractions so weights stay usable.
pub fn region_weights(
    counts: &[usize; REGION_COUNT],
    deltas: &[f64; REGION_COUNT],
) -> [f64; REGION_COUNT] {
    let total: f64 = counts
        .iter()
        .zip(deltas)
        .map(|(&n, &d)| n as f64 * d)
        .sum();
    if total > 0.0 {
        let mut out = [0.0; REGION_COUNT];
        for r in 0..REGION_COUNT {
            out[r] = counts[r] as f64 * deltas[r] / total;
        }
        return out;
    }
    let mbs: usize = counts.iter().sum();
    if mbs == 0 {
        [0.0; REGION_COUNT]
    } else {
        let mut out = [0.0; REGION_COUNT];
        for r in 0..REGION_COUNT {
            out[r] = counts[r] as f64 / mbs as f64;
        }
        out
    }
}

impl LagrangeSet {
    /// Unweighted multipliers at each region's QP; what every mode except
    /// the ordered allocator with adjustment enabled uses.
    pub fn unadjusted(qps: &[u8; REGION_COUNT], alpha: f64) -> Self {
        let mut mode = [0.0; REGION_COUNT];
        let mut me = [0.0; REGION_COUNT];
        for r in 0..REGION_COUNT {
            mode[r] = lambda_org(alpha, qps[r]);
            me[r] = mode[r].sqrt();
        }
        LagrangeSet {
            mode,
            me,
            beta: [1.0; REGION_COUNT],
            delta: [0.0; REGION_COUNT],
        }
    }

    /// Region-weighted multipliers. The raw weights only set the balance
    /// between regions; they are rescaled so the population-weighted mean
    /// factor is one, leaving the frame's overall rate-distortion operating
    /// point where the unadjusted multiplier would put it. Regions whose
    /// weight comes out zero (empty, or a degenerate trade-off) keep the
    /// unweighted multiplier so any macroblock still has a usable trade-off.
    pub fn adjusted(
        models: &[RegionModel; REGION_COUNT],
        counts: &[usize; REGION_COUNT],
        qps: &[u8; REGION_COUNT],
        alpha: f64,
    ) -> Self {
        let mut delta = [0.0; REGION_COUNT];
        for r in 0..REGION_COUNT {
            delta[r] = tradeoff(&models[r]);
        }
        let weights = region_weights(counts, &delta);
        let mbs: f64 = counts.iter().sum::<usize>() as f64;
        let weighted: f64 = counts
            .iter()
            .zip(&weights)
            .map(|(&n, &w)| n as f64 * w)
            .sum();
        let scale = if weighted > 0.0 { mbs / weighted } else { 0.0 };
        let mut beta = [0.0; REGION_COUNT];
        let mut mode = [0.0; REGION_COUNT];
        let mut me = [0.0; REGION_COUNT];
        for r in 0..REGION_COUNT {
            beta[r] = if weights[r] > 0.0 {
                (scale * weights[r]).clamp(FACTOR_MIN, FACTOR_MAX)
            } else {
                0.0
            };
            let org = lambda_org(alpha, qps[r]);
            mode[r] = if beta[r] > 0.0 { beta[r] * org } else { org };
            me[r] = mode[r].sqrt();
        }
        LagrangeSet {
            mode,
            me,
            beta,
            delta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::RegionLabel;

    fn model(a: f64, c: f64) -> RegionModel {
        RegionModel {
            region: RegionLabel::Flat,
            a,
            b: 0.0,
            c,
            d: 0.0,
        }
    }

    #[test]
    fn baseline_multiplier_matches_known_points() {
        assert!((lambda_org(0.85, 12) - 0.85).abs() < 1e-12);
        assert!((lambda_org(0.85, 15) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn baseline_multiplier_doubles_every_three_steps() {
        for qp in 1..=48u8 {
            let lo = lambda_org(0.85, qp);
            let hi = lambda_org(0.85, qp + 3);
            assert!((hi - 2.0 * lo).abs() < 1e-9 * hi, "qp {qp}");
        }
    }

    #[test]
    fn tradeoff_is_the_absolute_slope_ratio() {
        assert_eq!(tradeoff(&model(4.0, 2.0)), 0.5);
        assert_eq!(tradeoff(&model(4.0, 0.0)), 0.0);
        assert_eq!(tradeoff(&model(0.0, 1.0)), 1e6);
        assert_eq!(tradeoff(&model(-4.0, 2.0)), 0.5);
    }

    #[test]
    fn weights_reduce_to_count_fractions_for_equal_tradeoffs() {
        let beta = region_weights(&[10, 20, 70], &[1.0, 1.0, 1.0]);
        assert_eq!(beta, [0.1, 0.2, 0.7]);
    }

    #[test]
    fn weights_follow_the_tradeoff_ratios() {
        let beta = region_weights(&[1, 1, 1], &[2.0, 1.0, 1.0]);
        assert_eq!(beta, [0.5, 0.25, 0.25]);
    }

    #[test]
    fn empty_region_gets_zero_weight() {
        let beta = region_weights(&[5, 0, 5], &[1.0, 3.0, 1.0]);
        assert_eq!(beta, [0.5, 0.0, 0.5]);
    }

    #[test]
    fn zero_tradeoffs_fall_back_to_count_fractions() {
        let beta = region_weights(&[2, 2, 4], &[0.0, 0.0, 0.0]);
        assert_eq!(beta, [0.25, 0.25, 0.5]);
        assert_eq!(region_weights(&[0, 0, 0], &[0.0, 0.0, 0.0]), [0.0; 3]);
    }

    #[test]
    fn weights_ignore_common_scaling_of_tradeoffs() {
        let base = region_weights(&[3, 5, 9], &[0.4, 1.1, 0.7]);
        let scaled = region_weights(&[3, 5, 9], &[0.4 * 64.0, 1.1 * 64.0, 0.7 * 64.0]);
        for r in 0..REGION_COUNT {
            assert!((base[r] - scaled[r]).abs() < 1e-12);
        }
        assert!((base.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adjusted_multiplier_scales_the_baseline_by_beta() {
        let models = [model(1.0, 0.8), model(1.0, 1.0), model(1.0, 1.2)];
        // raw weights scale to a population-weighted mean factor of one
        // over equal counts: factors (0.8, 1.0, 1.2), all within the clamp.
        let set = LagrangeSet::adjusted(&models, &[10, 10, 10], &[12, 12, 12], 0.85);
        assert!((set.beta[0] - 0.8).abs() < 1e-12);
        assert!((set.beta[2] - 1.2).abs() < 1e-12);
        assert!((set.mode[2] - 1.2 * 0.85).abs() < 1e-12);
        assert!((set.me[2] - set.mode[2].sqrt()).abs() < 1e-12);
    }

    #[test]
    fn population_weighted_mean_factor_is_one() {
        // population times trade-off is equal across regions, the balance
        // point of the normalization: every factor is exactly one.
        let counts = [20usize, 30, 50];
        let set = LagrangeSet::adjusted(
            &[model(2.0, 0.3), model(2.0, 0.2), model(2.0, 0.12)],
            &counts,
            &[12, 12, 12],
            0.85,
        );
        let mbs: f64 = counts.iter().map(|&n| n as f64).sum();
        let mean: f64 = counts
            .iter()
            .zip(&set.beta)
            .map(|(&n, &b)| n as f64 * b)
            .sum::<f64>()
            / mbs;
        assert!((mean - 1.0).abs() < 1e-12);
        for r in 0..REGION_COUNT {
            assert!((set.beta[r] - 1.0).abs() < 1e-12);
            assert!((set.mode[r] - 0.85).abs() < 1e-12);
            assert!((set.me[r] - set.mode[r].sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn one_degenerate_fit_cannot_zero_the_other_multipliers() {
        // A near-zero rate slope makes one trade-off astronomical; the
        // factor clamp keeps every region's multiplier a mild tilt.
        let models = [model(1.0, 1.0), model(1.0, 1.0), model(0.0, 5.0)];
        let set = LagrangeSet::adjusted(&models, &[10, 10, 10], &[30, 30, 30], 0.85);
        assert_eq!(set.beta[0], 0.75);
        assert_eq!(set.beta[1], 0.75);
        assert!(set.beta[2] <= 4.0 / 3.0);
        assert!(set.mode[0] > 0.0);
    }

    #[test]
    fn zero_weight_region_keeps_the_baseline_multiplier() {
        let models = [model(1.0, 1.0), model(1.0, 1.0), model(1.0, 1.0)];
        let set = LagrangeSet::adjusted(&models, &[5, 0, 5], &[20, 26, 30], 0.85);
        assert_eq!(set.beta[1], 0.0);
        assert!((set.mode[1] - lambda_org(0.85, 26)).abs() < 1e-12);
    }

    #[test]
    fn unadjusted_set_uses_the_baseline_at_each_qp() {
        let set = LagrangeSet::unadjusted(&[12, 15, 18], 0.85);
        assert!((set.mode[0] - 0.85).abs() < 1e-12);
        assert!((set.mode[1] - 1.7).abs() < 1e-12);
        assert!((set.mode[2] - 3.4).abs() < 1e-12);
        for r in 0..REGION_COUNT {
            assert!((set.me[r] - set.mode[r].sqrt()).abs() < 1e-12);
        }
    }
}
