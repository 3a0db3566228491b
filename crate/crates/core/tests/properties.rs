mod common;

use common::non_decreasing;
use etuk::inference::{linear_gain_weights, topk_infer};
use etuk::metrics::task_utility;
use etuk::oracle::combinations;
use etuk::*;
use proptest::prelude::*;

/// `(probs, k, seed)` with `n` in 1..=7, `m` in 2..=7, `k < m`.
fn instance() -> impl Strategy<Value = (SparseRowMatrix, usize, u64)> {
    (1usize..=7, 2usize..=7)
        .prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(prop::collection::vec(0.0f64..0.99, m), n),
                1..m,
                any::<u64>(),
            )
        })
        .prop_map(|(rows, k, seed)| {
            // Snap a third of the entries to zero to exercise sparsity.
            let rows: Vec<Vec<f64>> = rows
                .into_iter()
                .map(|r| r.into_iter().map(|v| if v < 0.33 { 0.0 } else { v }).collect())
                .collect();
            (SparseRowMatrix::from_dense(&rows), k, seed)
        })
}

fn bca_metric() -> impl Strategy<Value = MetricSpec> {
    prop_oneof![
        Just(MetricSpec::MacroPrecision),
        Just(MetricSpec::MacroRecall),
        (0.25f64..4.0).prop_map(|b| MetricSpec::macro_f(b).unwrap()),
        Just(MetricSpec::InstancePrecisionAtK),
        Just(MetricSpec::Hamming),
        (0.0f64..=1.0).prop_map(|a| {
            MetricSpec::mixed(a, MetricSpec::InstancePrecisionAtK, MetricSpec::macro_f(1.0).unwrap()).unwrap()
        }),
    ]
}

fn cfg(k: usize, seed: u64) -> InferenceConfig {
    let mut c = InferenceConfig::new(k);
    c.seed = seed;
    c
}

fn deterministic_part(r: &InferenceReport) -> (Vec<PredictionRow>, Vec<f64>, usize) {
    (r.predictions.clone(), r.objective_trace.clone(), r.passes)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn top_k_dominates(gains in prop::collection::vec(-5.0f64..5.0, 1..20), k in 1usize..20) {
        prop_assume!(k <= gains.len());
        let row = select_top_k(&gains, k).unwrap();
        prop_assert_eq!(row.k(), k);
        let worst_in = row.labels().iter().map(|&j| gains[j as usize]).fold(f64::INFINITY, f64::min);
        for j in 0..gains.len() as u32 {
            if !row.contains(j) {
                prop_assert!(gains[j as usize] <= worst_in);
            }
        }
    }

    #[test]
    fn incremental_stats_match_recomputation((probs, k, seed) in instance()) {
        let m = probs.n_cols();
        let start = topk_infer(&probs, &cfg(k, seed)).unwrap().predictions;
        let mut stats = RunningStats::from_scratch(&probs, &start).unwrap();
        let mut preds = start.clone();
        for i in 0..probs.n_rows() {
            let new = PredictionRow::new((0..k as u32).map(|j| (j + i as u32 + seed as u32 % 3) % m as u32).collect(), m).unwrap();
            stats.swap_row(probs.row(i), &preds[i], &new);
            preds[i] = new;
        }
        let fresh = RunningStats::from_scratch(&probs, &preds).unwrap();
        for j in 0..m {
            prop_assert!((stats.t_hat(j) - fresh.t_hat(j)).abs() < 1e-12);
            prop_assert_eq!(stats.count(j), fresh.count(j));
        }
    }

    #[test]
    fn bca_ascends_and_is_deterministic((probs, k, seed) in instance(), metric in bca_metric()) {
        let a = bca_infer(&probs, &metric, &cfg(k, seed)).unwrap();
        let b = bca_infer(&probs, &metric, &cfg(k, seed)).unwrap();
        prop_assert_eq!(deterministic_part(&a), deterministic_part(&b));
        prop_assert!(non_decreasing(&a.objective_trace, a.initial_objective));
        prop_assert_eq!(a.predictions.len(), probs.n_rows());
        prop_assert!(a.predictions.iter().all(|p| p.k() == k));
        prop_assert!(a.passes >= 1 && a.passes <= InferenceConfig::DEFAULT_MAX_PASSES);
    }

    #[test]
    fn bca_reaches_a_local_optimum((probs, k, seed) in instance(), metric in bca_metric()) {
        prop_assume!(probs.n_cols() <= 6 && k <= 2 && probs.n_rows() <= 6);
        let mut c = cfg(k, seed);
        c.epsilon = 0.0;
        let r = bca_infer(&probs, &metric, &c).unwrap();
        prop_assert!(local_opt_check(&probs, &r.predictions, &metric, k).unwrap());
    }

    #[test]
    fn bca_never_beats_the_oracle((probs, k, seed) in instance(), metric in bca_metric()) {
        prop_assume!(probs.n_rows() <= 4);
        let best = brute_force_semi_etu(&probs, &metric, k).unwrap();
        let r = bca_infer(&probs, &metric, &cfg(k, seed)).unwrap();
        let v = semi_etu_objective(&probs, &r.predictions, &metric).unwrap();
        prop_assert!(v <= best.best_value + 1e-12);
        prop_assert!(local_opt_check(&probs, &best.best_preds, &metric, k).unwrap());
    }

    #[test]
    fn greedy_equals_weighted_top_k_for_fixed_linear_metrics((probs, k, seed) in instance()) {
        let m = probs.n_cols();
        for metric in [MetricSpec::InstancePrecisionAtK, MetricSpec::Hamming] {
            let q = RunningStats::q_hat_of(&probs);
            let (w11, w01) = linear_gain_weights(&metric, &q, k).unwrap();
            let direct = weighted_topk_infer(&probs, &w11, &w01, &cfg(k, seed)).unwrap();
            let greedy = greedy_infer(&probs, &metric, &cfg(k, seed)).unwrap();
            prop_assert_eq!(&greedy.predictions, &direct.predictions, "m = {}", m);
        }
    }

    #[test]
    fn bca_from_greedy_does_not_decrease((probs, k, seed) in instance(), metric in bca_metric()) {
        let greedy = greedy_infer(&probs, &metric, &cfg(k, seed)).unwrap();
        let mut c = cfg(k, seed);
        c.epsilon = 0.0;
        let refined = bca_infer_from(&probs, &metric, &c, greedy.predictions.clone()).unwrap();
        let before = semi_etu_objective(&probs, &greedy.predictions, &metric).unwrap();
        let after = semi_etu_objective(&probs, &refined.predictions, &metric).unwrap();
        prop_assert!(after >= before - 1e-12);
    }

    #[test]
    fn uniform_weights_are_top_k((probs, k, seed) in instance()) {
        let m = probs.n_cols();
        let weighted = weighted_topk_infer(&probs, &vec![1.0; m], &vec![0.0; m], &cfg(k, seed)).unwrap();
        for (i, row) in weighted.predictions.iter().enumerate() {
            let dense: Vec<f64> = (0..m as u32).map(|j| probs.get(i, j)).collect();
            prop_assert_eq!(row, &select_top_k(&dense, k).unwrap());
        }
    }

    #[test]
    fn coverage_strategies_keep_failure_probabilities_in_range((probs, k, seed) in instance()) {
        for r in [
            bca_coverage_infer(&probs, &cfg(k, seed)).unwrap(),
            greedy_coverage_infer(&probs, &cfg(k, seed)).unwrap(),
        ] {
            let f = FailureProbVector::from_scratch(&probs, &r.predictions).unwrap();
            prop_assert!(f.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x)));
            prop_assert!((r.final_objective() - f.expected_coverage()).abs() < 1e-9);
            prop_assert!(non_decreasing(&r.objective_trace, r.initial_objective));
        }
    }

    #[test]
    fn single_row_coverage_strategies_agree((probs, k, seed) in instance()) {
        let one = probs.select_rows(&[0]);
        let bca = bca_coverage_infer(&one, &cfg(k, seed)).unwrap();
        let greedy = greedy_coverage_infer(&one, &cfg(k, seed)).unwrap();
        prop_assert_eq!(&bca.predictions, &greedy.predictions);
    }

    #[test]
    fn deterministic_probabilities_give_realized_utility((probs, k, seed) in instance(), metric in bca_metric()) {
        let rows: Vec<Vec<f64>> = probs
            .to_dense()
            .into_iter()
            .map(|r| r.into_iter().map(|v| if v > 0.6 { 1.0 } else { 0.0 }).collect())
            .collect();
        let labels = SparseRowMatrix::from_dense(&rows);
        let preds = bca_infer(&labels, &metric, &cfg(k, seed)).unwrap().predictions;
        let exact = etu_objective_exact(&labels, &preds, &metric).unwrap();
        let realized = task_utility(&metric, &labels, &preds).unwrap();
        prop_assert!((exact - realized).abs() < 1e-12);
    }

    #[test]
    fn exact_and_semi_oracles_agree_for_precision((probs, k, _seed) in instance()) {
        prop_assume!(probs.n_rows() <= 3 && probs.n_cols() <= 5);
        let semi = brute_force_semi_etu(&probs, &MetricSpec::MacroPrecision, k).unwrap();
        let exact = brute_force_etu(&probs, &MetricSpec::MacroPrecision, k).unwrap();
        prop_assert!((semi.best_value - exact.best_value).abs() < 1e-9);
    }

    #[test]
    fn evaluation_matches_task_utility((probs, k, seed) in instance()) {
        let rows: Vec<Vec<f64>> = probs
            .to_dense()
            .into_iter()
            .map(|r| r.into_iter().map(|v| if v > 0.5 { 1.0 } else { 0.0 }).collect())
            .collect();
        let labels = SparseRowMatrix::from_dense(&rows);
        let preds = topk_infer(&probs, &cfg(k, seed)).unwrap().predictions;
        let report = evaluate(&preds, &labels, k, None).unwrap();
        let pairs = [
            (report.instance_precision, MetricSpec::InstancePrecisionAtK),
            (report.macro_precision, MetricSpec::MacroPrecision),
            (report.macro_recall, MetricSpec::MacroRecall),
            (report.macro_f1, MetricSpec::macro_f(1.0).unwrap()),
            (report.coverage, MetricSpec::Coverage),
        ];
        for (value, metric) in pairs {
            prop_assert!((value - task_utility(&metric, &labels, &preds).unwrap()).abs() < 1e-12, "{}", metric.name());
        }

        // Instance order does not matter.
        let order: Vec<usize> = (0..labels.n_rows()).rev().collect();
        let shuffled: Vec<PredictionRow> = order.iter().map(|&i| preds[i].clone()).collect();
        let again = evaluate(&shuffled, &labels.select_rows(&order), k, None).unwrap();
        prop_assert!((again.macro_f1 - report.macro_f1).abs() < 1e-12);
        prop_assert!((again.instance_precision - report.instance_precision).abs() < 1e-12);
        prop_assert_eq!(again.coverage, report.coverage);
    }

    #[test]
    fn text_format_round_trips((probs, _k, _seed) in instance()) {
        let text = probs.to_text(false);
        let back = SparseRowMatrix::parse(&text, MatrixKind::Probabilities).unwrap();
        prop_assert_eq!(back.to_text(false), text);
        for i in 0..probs.n_rows() {
            for j in 0..probs.n_cols() as u32 {
                prop_assert!((back.get(i, j) - probs.get(i, j)).abs() <= 1e-8 * probs.get(i, j));
            }
        }
    }

    #[test]
    fn combinations_are_exhaustive(m in 1usize..8, k in 1usize..8) {
        prop_assume!(k <= m);
        let all = combinations(m, k);
        let expected = (0..k).fold(1usize, |acc, i| acc * (m - i) / (i + 1));
        prop_assert_eq!(all.len(), expected);
        prop_assert!(all.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let probs = common::sparse_probs(&mut rng, 300, 40, 0.3);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let c = cfg(3, 5);
            (
                deterministic_part(&topk_infer(&probs, &c).unwrap()),
                deterministic_part(&bca_infer(&probs, &MetricSpec::macro_f(1.0).unwrap(), &c).unwrap()),
            )
        })
    };
    assert_eq!(run(1), run(4));
}
