use navtune::bench::stats::{mean, variance};
use navtune::bench::{
    derive_seed, generate_suite, load_suite, prepare_variants, run_matrix, save_suite, significance_matrix,
    standard_variants, to_csv, to_markdown, welch_t, MatrixConfig, SuiteConfig, Trial, TrialTable,
};
use navtune::pipeline::{Outcome, TrainSettings};
use navtune::registry::SelectorRegistry;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn table(scores: &[Vec<Vec<f64>>], variants: &[&str]) -> TrialTable {
    TrialTable {
        envs: (0..scores.len()).map(|e| format!("env_{e:03}")).collect(),
        variants: variants.iter().map(|v| v.to_string()).collect(),
        penalty: 50.0,
        cells: scores
            .iter()
            .map(|env| {
                env.iter()
                    .map(|runs| {
                        runs.iter()
                            .enumerate()
                            .map(|(run, s)| Trial {
                                run,
                                seed: 0,
                                outcome: Outcome::Reached,
                                time: *s,
                                score: *s,
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect(),
    }
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..60.0, 2..8)
}

#[test]
fn welch_matches_textbook_example() {
    let a = [27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4];
    let b = [27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1, 22.9, 20.5, 24.4];
    let w = welch_t(&a, &b).unwrap();
    let (va, vb) = (variance(&a) / 15.0, variance(&b) / 15.0);
    let t = (mean(&a) - mean(&b)) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / 14.0 + vb * vb / 14.0);
    assert!((w.t - t).abs() < 1e-12 && (w.df - df).abs() < 1e-9);
    assert!((w.t - -2.46).abs() < 0.01, "{}", w.t);
    let p = 2.0 * StudentsT::new(0.0, 1.0, df).unwrap().cdf(-t.abs());
    assert!((w.p - p).abs() < 1e-9, "{} vs {p}", w.p);
    assert!((w.p - 0.021).abs() < 1e-3);
}

#[test]
fn welch_rejects_degenerate_samples() {
    assert!(welch_t(&[1.0], &[1.0, 2.0]).is_err());
    assert!(welch_t(&[3.0, 3.0], &[5.0, 5.0]).is_err());
    assert!(welch_t(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
}

#[test]
fn matrix_and_report_shape() {
    let t = table(
        &[
            vec![vec![10.0, 11.0, 10.5, 10.2], vec![20.0, 21.0, 20.5, 19.8], vec![10.1, 10.9, 10.4, 10.3]],
            vec![vec![12.0, 12.5, 11.8, 12.1], vec![20.0, 20.1, 19.9, 20.3], vec![12.2, 11.9, 12.0, 12.4]],
        ],
        &["x", "slow", "y"],
    );
    let m = significance_matrix(&t, 0.05);
    assert_eq!(m.order[0], "slow");
    assert_eq!(m.get("slow", "x"), Some(100.0));
    assert_eq!(m.get("x", "slow"), Some(0.0));
    assert_eq!(m.get("x", "y"), Some(0.0));
    assert_eq!(m.get("nope", "x"), None);
    assert_eq!(m.tests.len(), 2 * 3 * 2);
    let md = to_markdown(&m);
    assert!(md.contains("| slow | 100% | 0% | 0% |") || md.contains("| slow | 0% | 100% | 100% |"), "{md}");
    assert_eq!(to_csv(&m).lines().count(), 4);
}

#[test]
fn suite_is_deterministic_and_round_trips() {
    let cfg = SuiteConfig {
        n_envs: 7,
        ..SuiteConfig::desk(3)
    };
    let a = generate_suite(&cfg).unwrap();
    assert_eq!(a, generate_suite(&cfg).unwrap());
    assert_eq!(a.iter().map(|e| e.meta.band).collect::<Vec<_>>(), vec![0, 0, 0, 1, 1, 2, 2]);
    for e in &a {
        let b = cfg.bands[e.meta.band];
        assert!(e.meta.fill_prob >= b[0] && e.meta.fill_prob <= b[1]);
    }
    assert_eq!(a[0].meta.fill_prob, 0.38);
    assert_eq!(a[2].meta.fill_prob, 0.42);
    let dir = tempfile::tempdir().unwrap();
    save_suite(dir.path(), &a).unwrap();
    assert_eq!(load_suite(dir.path()).unwrap(), a);
    assert_ne!(a, generate_suite(&SuiteConfig { seed: 4, ..cfg.clone() }).unwrap());
    assert!(generate_suite(&SuiteConfig { n_envs: 0, ..cfg }).is_err());
}

#[test]
fn seeds_are_stable() {
    assert_eq!(derive_seed(&["a", "b"]), derive_seed(&["a", "b"]));
    assert_ne!(derive_seed(&["ab", ""]), derive_seed(&["a", "b"]));
}

#[test]
fn cached_matrix_is_idempotent() {
    let envs = generate_suite(&SuiteConfig {
        n_envs: 2,
        ..SuiteConfig::desk(8)
    })
    .unwrap();
    let specs: Vec<_> = standard_variants().into_iter().filter(|s| s.is_default()).collect();
    let settings = TrainSettings::default();
    let prepared = prepare_variants(&specs, &[], &[], &[], &settings, &SelectorRegistry::default()).unwrap();
    let mut cfg = MatrixConfig {
        runs: 2,
        workers: 1,
        ..MatrixConfig::default()
    };
    cfg.episode.timeout = 10.0;
    cfg.penalty = 10.0;
    let dir = tempfile::tempdir().unwrap();
    let first = run_matrix(&envs, &prepared, &cfg, Some(dir.path())).unwrap();
    let files = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(files, 2);
    let second = run_matrix(&envs, &prepared, &cfg, Some(dir.path())).unwrap();
    assert_eq!(first, second);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), files);
    let uncached = run_matrix(&envs, &prepared, &MatrixConfig { workers: 2, ..cfg.clone() }, None).unwrap();
    assert_eq!(first, uncached);
    for cell in first.cells.iter().flatten() {
        assert_eq!(cell.len(), 2);
        for t in cell {
            assert!(t.score <= 10.0 + 1e-9);
            assert_eq!(t.score, if t.outcome == Outcome::Reached { t.time } else { 10.0 });
        }
    }
    assert!(run_matrix(&envs, &prepared, &MatrixConfig { runs: 0, ..cfg }, None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn welch_is_antisymmetric_and_shift_invariant(a in sample(), b in sample(), c in -100.0f64..100.0) {
        let (Ok(ab), Ok(ba)) = (welch_t(&a, &b), welch_t(&b, &a)) else {
            return Ok(());
        };
        prop_assert!((ab.t + ba.t).abs() < 1e-9 * (1.0 + ab.t.abs()));
        prop_assert!((ab.p - ba.p).abs() < 1e-12);
        prop_assert!((ab.df - ba.df).abs() < 1e-9 * ab.df);
        prop_assert!((0.0..=1.0).contains(&ab.p));
        let sa: Vec<f64> = a.iter().map(|x| x + c).collect();
        let sb: Vec<f64> = b.iter().map(|x| x + c).collect();
        let s = welch_t(&sa, &sb).unwrap();
        prop_assert!((s.t - ab.t).abs() < 1e-6 * (1.0 + ab.t.abs()), "{} vs {}", s.t, ab.t);
        prop_assert!((s.p - ab.p).abs() < 1e-6);
    }

    #[test]
    fn p_value_matches_reference_cdf(a in sample(), b in sample()) {
        if let Ok(w) = welch_t(&a, &b) {
            let p = 2.0 * StudentsT::new(0.0, 1.0, w.df).unwrap().cdf(-w.t.abs());
            prop_assert!((w.p - p).abs() < 1e-7, "{} vs {}", w.p, p);
        }
    }

    #[test]
    fn significance_is_antisymmetric(
        scores in prop::collection::vec(prop::collection::vec(prop::collection::vec(0.0f64..60.0, 3), 3), 1..6),
        alpha in 0.01f64..0.2,
    ) {
        let t = table(&scores, &["a", "b", "c"]);
        let m = significance_matrix(&t, alpha);
        let n = m.order.len();
        for i in 0..n {
            prop_assert_eq!(m.pct[i][i], 0.0);
            for j in 0..n {
                prop_assert!(m.pct[i][j] + m.pct[j][i] <= 100.0 + 1e-9);
            }
        }
        for w in m.mean_times.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        for pt in &m.tests {
            let mirror = m.tests.iter().find(|q| q.env == pt.env && q.a == pt.b && q.b == pt.a).unwrap();
            prop_assert!(!(pt.a_worse && mirror.a_worse));
            prop_assert_eq!(pt.p, mirror.p);
        }
        let swapped = TrialTable {
            variants: vec!["c".into(), "b".into(), "a".into()],
            cells: t.cells.iter().map(|row| row.iter().rev().cloned().collect()).collect(),
            ..t.clone()
        };
        let ms = significance_matrix(&swapped, alpha);
        for x in ["a", "b", "c"] {
            for y in ["a", "b", "c"] {
                prop_assert_eq!(m.get(x, y), ms.get(x, y));
            }
        }
    }
}
