//! Constrained QP selection across regions.
//!
//! Both solvers are exact: they minimize the modeled frame distortion
//! subject to the modeled rate fitting the frame budget, with every region
//! assigned one step from the quantization ladder. The search runs as a
//! dynamic program over regions whose state is a Pareto frontier of
//! (cumulative rate, cumulative distortion) pairs — dominated prefixes can
//! never become optimal because later terms only add per-region constants.
//! The ordered variant additionally threads the ladder index through the
//! state so steps never decrease from the moving to the flat region.

use crate::error::{Error, Result};
use crate::model::RegionModel;
use crate::qs::{QsLadder, QP_LEVELS, QP_MAX};
use crate::region::REGION_COUNT;

/// Per-region limits on how far QP may fall ...
pub const QP_STEP_DOWN: [u8; REGION_COUNT] = [3, 3, 2];
/// ... or rise between consecutive frames. The moving region may drop
/// fastest and rise slowest; the flat region is the mirror image.
pub const QP_STEP_UP: [u8; REGION_COUNT] = [2, 3, 3];

/// Chosen QP/steps for one frame plus the objective values they achieve
/// under the current models. `infeasible` marks frames where even the
/// coarsest steps overshoot the budget; QP is then pinned to the maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateControlDecision {
    pub qp: [u8; REGION_COUNT],
    pub qs: [f64; REGION_COUNT],
    pub predicted_rate: f64,
    pub predicted_dist: f64,
    pub infeasible: bool,
}

/// Everything one frame's allocation depends on.
#[derive(Debug, Clone, Copy)]
pub struct AllocationInput<'a> {
    pub models: &'a [RegionModel; REGION_COUNT],
    pub mads: [f64; REGION_COUNT],
    pub counts: [usize; REGION_COUNT],
    pub budget: f64,
    pub ladder: &'a QsLadder,
}

#[derive(Debug, Clone, Copy)]
struct Cand {
    rate: f64,
    dist: f64,
    qp: [u8; REGION_COUNT],
}

/// Rate/distortion contribution of region `r` at every ladder step.
fn region_terms(input: &AllocationInput, r: usize) -> Vec<(f64, f64)> {
    let m = &input.models[r];
    let n = input.counts[r] as f64;
    let mad = input.mads[r];
    input
        .ladder
        .entries()
        .iter()
        .map(|&qs| (n * (m.a * mad / qs + m.b), n * (m.c * qs + m.d)))
        .collect()
}

fn active_regions(counts: &[usize; REGION_COUNT]) -> Vec<usize> {
    (0..REGION_COUNT).filter(|&r| counts[r] > 0).collect()
}

/// Sort by rate and keep only candidates that strictly improve distortion;
/// exact (rate, dist) duplicates collapse to one representative.
fn pareto_prune(mut cands: Vec<Cand>) -> Vec<Cand> {
    cands.sort_by(|a, b| {
        a.rate
            .total_cmp(&b.rate)
            .then(a.dist.total_cmp(&b.dist))
            .then(a.qp.cmp(&b.qp))
    });
    let mut front: Vec<Cand> = Vec::with_capacity(cands.len().min(64));
    let mut best_dist = f64::INFINITY;
    for c in cands {
        if c.dist < best_dist {
            best_dist = c.dist;
            front.push(c);
        }
    }
    front
}

/// Fill QP of empty regions from the nearest populated region index,
/// preferring the lower index on ties.
fn fill_empty(qp: &mut [u8; REGION_COUNT], counts: &[usize; REGION_COUNT]) {
    for r in 0..REGION_COUNT {
        if counts[r] > 0 {
            continue;
        }
        let mut source = None;
        for r2 in 0..REGION_COUNT {
            if counts[r2] == 0 {
                continue;
            }
            match source {
                None => source = Some(r2),
                Some(s) => {
                    if r.abs_diff(r2) < r.abs_diff(s) {
                        source = Some(r2);
                    }
                }
            }
        }
        qp[r] = qp[source.expect("at least one populated region")];
    }
}

fn decision_from(
    input: &AllocationInput,
    mut qp: [u8; REGION_COUNT],
    rate: f64,
    dist: f64,
    infeasible: bool,
) -> RateControlDecision {
    fill_empty(&mut qp, &input.counts);
    let mut qs = [0.0; REGION_COUNT];
    for r in 0..REGION_COUNT {
        qs[r] = input.ladder.qs(qp[r]);
    }
    RateControlDecision {
        qp,
        qs,
        predicted_rate: rate,
        predicted_dist: dist,
        infeasible,
    }
}

/// Objective at every region pinned to the coarsest step — the fallback
/// when no assignment fits the budget.
fn coarsest(input: &AllocationInput, active: &[usize]) -> RateControlDecision {
    let mut rate = 0.0;
    let mut dist = 0.0;
    for &r in active {
        let t = region_terms(input, r);
        rate += t[QP_MAX as usize].0;
        dist += t[QP_MAX as usize].1;
    }
    decision_from(input, [QP_MAX; REGION_COUNT], rate, dist, true)
}

fn validate(input: &AllocationInput) -> Result<Vec<usize>> {
    let active = active_regions(&input.counts);
    if active.is_empty() {
        return Err(Error::domain("no populated region to allocate"));
    }
    if !input.budget.is_finite() {
        return Err(Error::domain(format!("budget {} must be finite", input.budget)));
    }
    Ok(active)
}

/// Independent per-region steps: minimize total predicted distortion subject
/// to the total predicted rate staying within the budget.
pub fn solve_qp_t1(input: &AllocationInput) -> Result<RateControlDecision> {
    let active = validate(input)?;
    let mut frontier = vec![Cand {
        rate: 0.0,
        dist: 0.0,
        qp: [0; REGION_COUNT],
    }];
    for (pos, &r) in active.iter().enumerate() {
        let terms = region_terms(input, r);
        if pos + 1 == active.len() {
            let mut best: Option<Cand> = None;
            for c in &frontier {
                for (q, &(tr, td)) in terms.iter().enumerate() {
                    let rate = c.rate + tr;
                    if rate > input.budget {
                        continue;
                    }
                    let dist = c.dist + td;
                    if best.map_or(true, |b| dist < b.dist) {
                        let mut qp = c.qp;
                        qp[r] = q as u8;
                        best = Some(Cand { rate, dist, qp });
                    }
                }
            }
            return Ok(match best {
                Some(b) => decision_from(input, b.qp, b.rate, b.dist, false),
                None => coarsest(input, &active),
            });
        }
        let mut next = Vec::with_capacity(frontier.len() * QP_LEVELS);
        for c in &frontier {
            for (q, &(tr, td)) in terms.iter().enumerate() {
                let mut qp = c.qp;
                qp[r] = q as u8;
                next.push(Cand {
                    rate: c.rate + tr,
                    dist: c.dist + td,
                    qp,
                });
            }
        }
        frontier = pareto_prune(next);
    }
    unreachable!("active region list is never empty");
}

/// Like [`solve_qp_t1`] but the chosen steps must not decrease across the
/// populated regions in moving -> complex -> flat order.
pub fn solve_qp_t2(input: &AllocationInput) -> Result<RateControlDecision> {
    let active = validate(input)?;

    // cum[q] = Pareto frontier over prefixes whose last assigned ladder
    // index is <= q; extending with index q may therefore use cum[q] itself.
    let first_terms = region_terms(input, active[0]);
    let mut cum: Vec<Vec<Cand>> = Vec::with_capacity(QP_LEVELS);
    for q in 0..QP_LEVELS {
        let mut qp = [0u8; REGION_COUNT];
        qp[active[0]] = q as u8;
        let mut cands: Vec<Cand> = cum.last().cloned().unwrap_or_default();
        cands.push(Cand {
            rate: first_terms[q].0,
            dist: first_terms[q].1,
            qp,
        });
        cum.push(pareto_prune(cands));
    }

    for &r in &active[1..] {
        let terms = region_terms(input, r);
        let mut next: Vec<Vec<Cand>> = Vec::with_capacity(QP_LEVELS);
        for q in 0..QP_LEVELS {
            let mut cands: Vec<Cand> = cum[q]
                .iter()
                .map(|c| {
                    let mut qp = c.qp;
                    qp[r] = q as u8;
                    Cand {
                        rate: c.rate + terms[q].0,
                        dist: c.dist + terms[q].1,
                        qp,
                    }
                })
                .collect();
            if let Some(prev) = next.last() {
                cands.extend(prev.iter().copied());
            }
            next.push(pareto_prune(cands));
        }
        cum = next;
    }

    let mut best: Option<Cand> = None;
    for c in &cum[QP_LEVELS - 1] {
        if c.rate <= input.budget && best.map_or(true, |b| c.dist < b.dist) {
            best = Some(*c);
        }
    }
    Ok(match best {
        Some(b) => decision_from(input, b.qp, b.rate, b.dist, false),
        None => coarsest(input, &active),
    })
}

/// Limit each region's QP to its allowed per-frame excursion around the
/// previous frame's value, then to the legal range. The floor applies
/// before the ceiling.
pub fn clamp_qp(raw: [u8; REGION_COUNT], prev: [u8; REGION_COUNT]) -> [u8; REGION_COUNT] {
    let mut out = [0u8; REGION_COUNT];
    for r in 0..REGION_COUNT {
        out[r] = clamp_qp_single(raw[r], prev[r], QP_STEP_DOWN[r], QP_STEP_UP[r]);
    }
    out
}

/// One-region clamp with explicit excursion limits (the frame-level
/// controller runs with symmetric limits of three).
pub fn clamp_qp_single(raw: u8, prev: u8, down: u8, up: u8) -> u8 {
    let floor = (prev as i32 - down as i32).max(1);
    let x = (raw as i32).max(floor);
    x.min(prev as i32 + up as i32).min(QP_MAX as i32) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::RegionLabel;
    use regionrc_testkit::oracle;

    fn models(params: [(f64, f64, f64, f64); 3]) -> [RegionModel; 3] {
        [0, 1, 2].map(|r| {
            let (a, b, c, d) = params[r];
            RegionModel {
                region: RegionLabel::from_index(r).unwrap(),
                a,
                b,
                c,
                d,
            }
        })
    }

    fn check_against_oracle(input: &AllocationInput, ordered: bool) {
        let m = input.models;
        let got = if ordered {
            solve_qp_t2(input).unwrap()
        } else {
            solve_qp_t1(input).unwrap()
        };
        let want = oracle::brute_force_qs(
            [m[0].a, m[1].a, m[2].a],
            [m[0].b, m[1].b, m[2].b],
            [m[0].c, m[1].c, m[2].c],
            [m[0].d, m[1].d, m[2].d],
            input.mads,
            input.counts,
            input.budget,
            input.ladder.entries(),
            ordered,
        );
        match want {
            Some(w) => {
                assert!(!got.infeasible);
                assert_eq!(got.predicted_dist, w.dist, "distortion objective must match");
                assert_eq!(got.predicted_rate <= input.budget, true);
            }
            None => assert!(got.infeasible),
        }
    }

    #[test]
    fn single_region_picks_smallest_feasible_step() {
        let ladder = QsLadder::new();
        let m = models([(160.0, 0.0, 1.0, 0.0); 3]);
        let input = AllocationInput {
            models: &m,
            mads: [1.0, 0.0, 0.0],
            counts: [100, 0, 0],
            budget: 1000.0,
            ladder: &ladder,
        };
        let got = solve_qp_t1(&input).unwrap();
        // 1-D scan: smallest qs with 100 * 160 / qs <= 1000, i.e. qs >= 16.
        let mut expect = None;
        for qp in 0..52u8 {
            if 100.0 * (160.0 * 1.0 / ladder.qs(qp) + 0.0) <= 1000.0 {
                expect = Some(qp);
                break;
            }
        }
        assert_eq!(got.qp[0], expect.unwrap());
        assert_eq!(got.qs[0], 16.0);
        assert!(!got.infeasible);
        // empty regions inherit the populated region's choice
        assert_eq!(got.qp, [got.qp[0]; 3]);
    }

    #[test]
    fn generous_budget_buys_the_finest_steps() {
        let ladder = QsLadder::new();
        let m = models([(100.0, 0.0, 2.0, 0.0), (80.0, 0.0, 1.0, 0.0), (50.0, 0.0, 0.5, 0.0)]);
        let input = AllocationInput {
            models: &m,
            mads: [3.0, 2.0, 1.0],
            counts: [10, 20, 30],
            budget: 1e12,
            ladder: &ladder,
        };
        assert_eq!(solve_qp_t1(&input).unwrap().qp, [0, 0, 0]);
        assert_eq!(solve_qp_t2(&input).unwrap().qp, [0, 0, 0]);
    }

    #[test]
    fn impossible_budget_pins_the_coarsest_steps() {
        let ladder = QsLadder::new();
        let m = models([(100.0, 50.0, 1.0, 0.0); 3]);
        let input = AllocationInput {
            models: &m,
            mads: [5.0, 5.0, 5.0],
            counts: [30, 30, 39],
            budget: 10.0,
            ladder: &ladder,
        };
        let got = solve_qp_t1(&input).unwrap();
        assert!(got.infeasible);
        assert_eq!(got.qp, [51, 51, 51]);
    }

    #[test]
    fn no_populated_region_is_a_domain_error() {
        let ladder = QsLadder::new();
        let m = models([(1.0, 0.0, 1.0, 0.0); 3]);
        let input = AllocationInput {
            models: &m,
            mads: [0.0; 3],
            counts: [0, 0, 0],
            budget: 100.0,
            ladder: &ladder,
        };
        assert!(solve_qp_t1(&input).is_err());
        assert!(solve_qp_t2(&input).is_err());
    }

    #[test]
    fn empty_middle_region_inherits_from_the_lower_neighbor() {
        let ladder = QsLadder::new();
        let m = models([
            (500.0, 0.0, 4.0, 0.0),
            (1.0, 0.0, 1.0, 0.0),
            (50.0, 0.0, 0.25, 0.0),
        ]);
        let input = AllocationInput {
            models: &m,
            mads: [4.0, 0.0, 1.0],
            counts: [10, 0, 10],
            budget: 800.0,
            ladder: &ladder,
        };
        let got = solve_qp_t1(&input).unwrap();
        assert_eq!(got.qp[1], got.qp[0], "equidistant fill prefers the lower index");
    }

    #[test]
    fn identical_regions_share_one_step_under_ordering() {
        let ladder = QsLadder::new();
        let m = models([(100.0, 0.0, 1.0, 0.0); 3]);
        let input = AllocationInput {
            models: &m,
            mads: [1.0; 3],
            counts: [100; 3],
            budget: 1880.0,
            ladder: &ladder,
        };
        let got = solve_qp_t2(&input).unwrap();
        assert_eq!(got.qp, [28, 28, 28]);
        check_against_oracle(&input, true);
    }

    #[test]
    fn ordered_steps_never_decrease() {
        let ladder = QsLadder::new();
        let m = models([
            (900.0, 2.0, 9.0, 1.0),
            (300.0, 1.0, 3.0, 0.0),
            (60.0, 0.5, 0.4, 0.0),
        ]);
        for budget in [500.0, 2000.0, 8000.0, 40000.0] {
            let input = AllocationInput {
                models: &m,
                mads: [8.0, 3.0, 0.5],
                counts: [12, 40, 47],
                budget,
                ladder: &ladder,
            };
            let got = solve_qp_t2(&input).unwrap();
            assert!(got.qs[0] <= got.qs[1] && got.qs[1] <= got.qs[2], "{:?}", got.qs);
            check_against_oracle(&input, true);
        }
    }

    #[test]
    fn ordering_never_beats_the_free_optimum() {
        let ladder = QsLadder::new();
        let m = models([
            (100.0, 0.0, 0.2, 0.0),
            (400.0, 1.0, 5.0, 0.0),
            (250.0, 0.0, 2.0, 1.0),
        ]);
        for budget in [800.0, 3000.0, 12000.0] {
            let input = AllocationInput {
                models: &m,
                mads: [2.0, 6.0, 3.0],
                counts: [20, 30, 49],
                budget,
                ladder: &ladder,
            };
            let free = solve_qp_t1(&input).unwrap();
            let ordered = solve_qp_t2(&input).unwrap();
            assert!(ordered.predicted_dist >= free.predicted_dist);
            check_against_oracle(&input, false);
        }
    }

    #[test]
    fn matches_brute_force_on_mixed_instances() {
        let ladder = QsLadder::new();
        // Deterministic parameter mill covering empty regions, flat models,
        // tight and loose budgets.
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for case in 0..60 {
            let m = models([0, 1, 2].map(|_| {
                (
                    (next() * 3000.0).round(),
                    (next() * 300.0 - 50.0).round(),
                    (next() * 30.0).round() / 2.0,
                    (next() * 200.0 - 20.0).round(),
                )
            }));
            let mads = [0, 1, 2].map(|_| (next() * 40.0).round() / 4.0);
            let counts = [0, 1, 2].map(|_| {
                let n = (next() * 120.0) as usize;
                if n < 15 {
                    0
                } else {
                    n
                }
            });
            if counts.iter().all(|&n| n == 0) {
                continue;
            }
            let budget = (next() * 2.0 - 0.2)
                * counts.iter().sum::<usize>() as f64
                * (next() * 400.0 + 20.0);
            let input = AllocationInput {
                models: &m,
                mads,
                counts,
                budget,
                ladder: &ladder,
            };
            check_against_oracle(&input, case % 2 == 0);
        }
    }

    #[test]
    fn larger_budgets_never_hurt() {
        let ladder = QsLadder::new();
        let m = models([
            (1200.0, 10.0, 6.0, 2.0),
            (700.0, 5.0, 2.5, 0.0),
            (90.0, 1.0, 0.75, 0.0),
        ]);
        let mut last = f64::INFINITY;
        for step in 0..40 {
            let input = AllocationInput {
                models: &m,
                mads: [9.0, 4.0, 1.0],
                counts: [15, 35, 49],
                budget: 200.0 + 600.0 * step as f64,
                ladder: &ladder,
            };
            let got = solve_qp_t1(&input).unwrap();
            assert!(got.predicted_dist <= last + 1e-9);
            last = got.predicted_dist;
        }
    }

    #[test]
    fn clamp_follows_the_excursion_rules() {
        assert_eq!(clamp_qp([40, 30, 20], [30, 30, 30]), [32, 30, 28]);
        assert_eq!(clamp_qp_single(40, 30, 3, 2), 32);
        assert_eq!(clamp_qp_single(20, 30, 2, 3), 28);
        assert_eq!(clamp_qp_single(0, 2, 3, 2), 1, "floor stays at the legal minimum");
        assert_eq!(clamp_qp_single(51, 50, 3, 3), 51);
        assert_eq!(clamp_qp_single(51, 49, 3, 2), 51);
        assert_eq!(clamp_qp_single(30, 30, 3, 3), 30);
    }

    #[test]
    fn clamp_preserves_ordering_for_ordered_inputs() {
        // Ordered raw triple + ordered previous triple stays ordered, which
        // keeps the chain invariant across frames.
        for prev1 in (1..=49).step_by(4) {
            for d in 0..3u8 {
                let prev = [prev1, prev1 + d, prev1 + 2 * d];
                for raw1 in (1..=45).step_by(3) {
                    for e in 0..4u8 {
                        let raw = [raw1, raw1 + e, raw1 + 2 * e];
                        let out = clamp_qp(raw, prev);
                        assert!(out[0] <= out[1] && out[1] <= out[2], "{raw:?} {prev:?} {out:?}");
                    }
                }
            }
        }
    }
}
