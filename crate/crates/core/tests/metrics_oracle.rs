mod common;

use common::metrics_oracle;
use lesionkit::metrics::{aggregate_folds, compute_metrics, confusion_from_log, ConfusionMatrix};
use lesionkit::tables::{PredictionLog, PredictionRow};
use proptest::prelude::*;

fn classes(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("k{i}")).collect()
}

fn log_from(pairs: &[(usize, usize)], n: usize) -> PredictionLog {
    PredictionLog {
        classes: classes(n),
        rows: pairs
            .iter()
            .enumerate()
            .map(|(i, &(t, p))| PredictionRow {
                id: format!("r{i}"),
                truth: t,
                predicted: p,
                probs: (0..n).map(|k| if k == p { 1.0 } else { 0.0 }).collect(),
            })
            .collect(),
    }
}

fn pairs_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=6).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 1..=200)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_brute_force_tallies((n, pairs) in pairs_strategy()) {
        let log = log_from(&pairs, n);
        let r = compute_metrics(&confusion_from_log(&log, &classes(n)).unwrap()).unwrap();
        let o = metrics_oracle(&pairs, n);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        prop_assert!(close(r.accuracy_std, o.accuracy_std));
        prop_assert!(close(r.accuracy_eq1, o.accuracy_eq1));
        prop_assert!(close(r.weighted.precision, o.weighted_p));
        prop_assert!(close(r.weighted.recall, o.weighted_r));
        prop_assert!(close(r.weighted.f1, o.weighted_f1));
        prop_assert!(close(r.macro_avg.precision, o.macro_p));
        prop_assert!(close(r.macro_avg.recall, o.macro_r));
        prop_assert!(close(r.macro_avg.f1, o.macro_f1));
        for c in 0..n {
            prop_assert!(close(r.per_class[c].precision, o.precision[c]));
            prop_assert!(close(r.per_class[c].recall, o.recall[c]));
            prop_assert!(close(r.per_class[c].f1, o.f1[c]));
            prop_assert_eq!(r.per_class[c].support, o.support[c]);
            let t = r.per_class[c].tally;
            prop_assert_eq!(t.tp + t.fp + t.fn_ + t.tn, pairs.len() as u64);
        }
        // weighted recall is trace / total
        prop_assert!(close(r.weighted.recall, r.accuracy_std));
    }

    #[test]
    fn relabeling_permutes_per_class_metrics((n, pairs) in pairs_strategy(), shift in 0usize..6) {
        let perm = |c: usize| (c + shift) % n;
        let moved: Vec<(usize, usize)> = pairs.iter().map(|&(t, p)| (perm(t), perm(p))).collect();
        let a = compute_metrics(&confusion_from_log(&log_from(&pairs, n), &classes(n)).unwrap()).unwrap();
        let b = compute_metrics(&confusion_from_log(&log_from(&moved, n), &classes(n)).unwrap()).unwrap();
        prop_assert!((a.weighted.f1 - b.weighted.f1).abs() <= 1e-12);
        prop_assert!((a.macro_avg.f1 - b.macro_avg.f1).abs() <= 1e-12);
        for c in 0..n {
            prop_assert!((a.per_class[c].f1 - b.per_class[perm(c)].f1).abs() <= 1e-12);
        }
    }

    #[test]
    fn equal_supports_make_macro_equal_weighted(n in 2usize..6, per in 1usize..20, seed in any::<u64>()) {
        let mut s = seed | 1;
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|t| (0..per).map(move |i| (t, i)))
            .map(|(t, _)| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (t, (s >> 33) as usize % n)
            })
            .collect();
        let r = compute_metrics(&confusion_from_log(&log_from(&pairs, n), &classes(n)).unwrap()).unwrap();
        prop_assert!((r.macro_avg.precision - r.weighted.precision).abs() <= 1e-12);
        prop_assert!((r.macro_avg.recall - r.weighted.recall).abs() <= 1e-12);
        prop_assert!((r.macro_avg.f1 - r.weighted.f1).abs() <= 1e-12);
    }
}

#[test]
fn worked_three_class_matrix() {
    let cm = ConfusionMatrix::from_counts(
        classes(3),
        vec![vec![5, 1, 0], vec![1, 3, 1], vec![0, 0, 4]],
    )
    .unwrap();
    let r = compute_metrics(&cm).unwrap();
    assert!((r.weighted.precision - 0.79667).abs() < 1e-5);
    assert!((r.weighted.recall - 0.8).abs() < 1e-12);
    assert!((r.weighted.f1 - 0.79259).abs() < 1e-5);
    assert!((r.accuracy_std - 0.8).abs() < 1e-12);
    assert!((r.accuracy_eq1 - 0.86667).abs() < 1e-5);
}

#[test]
fn fold_aggregation_matches_weighted_mean_oracle() {
    let mut state = 99u64;
    let mut next = |m: u64| {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 33) % m
    };
    let mut reports = Vec::new();
    for _ in 0..5 {
        let counts: Vec<Vec<u64>> = (0..4)
            .map(|_| (0..4).map(|_| next(9) + 1).collect())
            .collect();
        let r =
            compute_metrics(&ConfusionMatrix::from_counts(classes(4), counts).unwrap()).unwrap();
        let size = r.total as usize;
        reports.push((r, size));
    }
    let agg = aggregate_folds(&reports).unwrap();
    let total: f64 = reports.iter().map(|(_, s)| *s as f64).sum();
    let oracle = |f: fn(&lesionkit::metrics::MetricReport) -> f64| {
        reports.iter().map(|(r, s)| f(r) * *s as f64).sum::<f64>() / total
    };
    assert!((agg.weighted.f1 - oracle(|r| r.weighted.f1)).abs() <= 1e-12);
    assert!((agg.weighted.precision - oracle(|r| r.weighted.precision)).abs() <= 1e-12);
    assert!((agg.accuracy_std - oracle(|r| r.accuracy_std)).abs() <= 1e-12);
    assert!((agg.macro_avg.recall - oracle(|r| r.macro_avg.recall)).abs() <= 1e-12);
}

#[test]
fn log_file_round_trip_feeds_metrics() {
    let pairs = [(0, 0), (1, 2), (2, 2), (1, 1)];
    let log = log_from(&pairs, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    log.save(&path).unwrap();
    let back = PredictionLog::load(&path, &classes(3)).unwrap();
    assert_eq!(back, log);
    let r = compute_metrics(&confusion_from_log(&back, &classes(3)).unwrap()).unwrap();
    assert_eq!(r.confusion[1][2], 1);
}
