//! Randomized invariants: partition totality, scale invariance of the
//! region split, ladder structure, solver-vs-oracle agreement, multiplier
//! weight normalization, and config round-trips.

use proptest::prelude::*;
use regionrc_core::config::RunConfig;
use regionrc_core::lagrange::{lambda_org, region_weights};
use regionrc_core::model::RegionModel;
use regionrc_core::qs::QsLadder;
use regionrc_core::region::{
    extract_moving, subdivide_non_moving, DiffMap, LocationWeights, RegionLabel,
};
use regionrc_core::solver::{solve_qp_t1, solve_qp_t2, AllocationInput};
use regionrc_testkit::oracle;

fn diff_map(diff: Vec<f64>) -> DiffMap {
    let diff_avg = diff.iter().sum::<f64>() / diff.len() as f64;
    DiffMap { diff, diff_avg }
}

fn models_from(a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]) -> [RegionModel; 3] {
    let mut models = RegionLabel::ALL.map(|r| RegionModel::initial(r, 0.1));
    for i in 0..3 {
        models[i].a = a[i];
        models[i].b = b[i];
        models[i].c = c[i];
        models[i].d = d[i];
    }
    models
}

proptest! {
    #[test]
    fn every_macroblock_lands_in_exactly_one_region(
        diff in prop::collection::vec(0.0..50.0f64, 4..96),
        mse_seed in prop::collection::vec(0.0..400.0f64, 96),
        th1 in 0.2..2.0f64,
        th2 in 0.1..1.5f64,
    ) {
        let n = diff.len();
        let map = diff_map(diff);
        let weights = LocationWeights { weights: vec![1.0; n] };
        let moving = extract_moving(&map, &weights, th1);
        let regions = subdivide_non_moving(&mse_seed[..n], &moving, th2).unwrap();
        prop_assert_eq!(regions.counts.iter().sum::<usize>(), n);
        for (p, label) in regions.labels.iter().enumerate() {
            prop_assert_eq!(moving[p], *label == RegionLabel::Moving);
        }
    }

    #[test]
    fn moving_extraction_ignores_the_scale_of_the_difference(
        diff in prop::collection::vec(0.0..50.0f64, 4..96),
        scale in 0.01..100.0f64,
        th1 in 0.2..2.0f64,
    ) {
        let n = diff.len();
        let weights = LocationWeights { weights: vec![1.0; n] };
        let plain = extract_moving(&diff_map(diff.clone()), &weights, th1);
        let scaled_diff: Vec<f64> = diff.iter().map(|d| d * scale).collect();
        let scaled = extract_moving(&diff_map(scaled_diff), &weights, th1);
        prop_assert_eq!(plain, scaled);
    }

    #[test]
    fn ladder_doubles_every_six_steps_and_inverts(qp in 0u8..=45) {
        let ladder = QsLadder::new();
        prop_assert!((ladder.qs(qp + 6) - 2.0 * ladder.qs(qp)).abs() < 1e-12);
        prop_assert_eq!(ladder.nearest_qp(ladder.qs(qp)), qp);
    }

    #[test]
    fn ceil_qp_returns_the_smallest_step_at_least_as_coarse(x in 0.01..300.0f64) {
        let ladder = QsLadder::new();
        let q = ladder.ceil_qp(x);
        if x <= ladder.qs(51) {
            prop_assert!(ladder.qs(q) >= x - 1e-12);
            if q > 0 {
                prop_assert!(ladder.qs(q - 1) < x);
            }
        } else {
            prop_assert_eq!(q, 51);
        }
    }

    #[test]
    fn solvers_agree_with_exhaustive_search(
        a in prop::array::uniform3(0.0..400.0f64),
        b in prop::array::uniform3(0.0..40.0f64),
        c in prop::array::uniform3(0.01..8.0f64),
        d in prop::array::uniform3(0.0..30.0f64),
        mads in prop::array::uniform3(0.0..20.0f64),
        counts in prop::array::uniform3(0usize..60),
        budget in 50.0..20_000.0f64,
    ) {
        prop_assume!(counts.iter().any(|&n| n > 0));
        let ladder = QsLadder::new();
        let models = models_from(a, b, c, d);
        let input = AllocationInput { models: &models, mads, counts, budget, ladder: &ladder };

        for ordered in [false, true] {
            let decision = if ordered { solve_qp_t2(&input) } else { solve_qp_t1(&input) }.unwrap();
            let oracle_best = oracle::brute_force_qs(
                a, b, c, d, mads, counts, budget, ladder.entries(), ordered,
            );
            match oracle_best {
                Some(best) => {
                    prop_assert!(!decision.infeasible);
                    prop_assert_eq!(decision.predicted_dist, best.dist, "ordered={}", ordered);
                    prop_assert!(decision.predicted_rate <= budget);
                }
                None => prop_assert!(decision.infeasible, "ordered={}", ordered),
            }
            if ordered {
                let populated: Vec<f64> = (0..3)
                    .filter(|&r| counts[r] > 0)
                    .map(|r| decision.qs[r])
                    .collect();
                for pair in populated.windows(2) {
                    prop_assert!(pair[0] <= pair[1] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn region_weights_are_a_scale_free_partition_of_unity(
        counts in prop::array::uniform3(0usize..500),
        deltas in prop::array::uniform3(0.0..50.0f64),
        scale in 0.01..100.0f64,
    ) {
        prop_assume!(counts.iter().any(|&n| n > 0));
        let beta = region_weights(&counts, &deltas);
        let total: f64 = beta.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "sum {}", total);
        for r in 0..3 {
            if counts[r] == 0 {
                prop_assert_eq!(beta[r], 0.0);
            }
        }
        let scaled = region_weights(&counts, &deltas.map(|d| d * scale));
        for r in 0..3 {
            prop_assert!((beta[r] - scaled[r]).abs() < 1e-9);
        }
    }

    #[test]
    fn multiplier_doubles_every_three_qp(qp in 1u8..=48, alpha in 0.2..3.0f64) {
        let low = lambda_org(alpha, qp);
        let high = lambda_org(alpha, qp + 3);
        prop_assert!((high - 2.0 * low).abs() <= 1e-12 * high.abs());
    }

    #[test]
    fn config_text_round_trips(
        width in 1usize..40,
        height in 1usize..40,
        fps in 1.0..120.0f64,
        bitrate in 1000.0..1_000_000.0f64,
        mu in 0.0..1.0f64,
        gop in prop::option::of(1usize..300),
        qp in 0u8..=51,
        lambda_adjust in any::<bool>(),
        name in "[a-z]{1,12}",
    ) {
        let mut cfg = RunConfig::default();
        cfg.input = format!("{name}.yuv").into();
        cfg.width = width * 16;
        cfg.height = height * 16;
        cfg.fps = fps;
        cfg.bitrate = bitrate;
        cfg.mu = mu;
        cfg.gop = gop;
        cfg.qp = qp;
        cfg.lambda_adjust = lambda_adjust;
        cfg.out_dir = format!("out_{name}").into();
        let back = RunConfig::from_str_cfg(&cfg.to_config_string()).unwrap();
        prop_assert_eq!(cfg, back);
    }
}
