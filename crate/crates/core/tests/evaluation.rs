use mvfs::evaluation::{evaluate_scores, MetricReport, MlknnModel};
use mvfs::oracle;
use ndarray::{array, Array2, Axis};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, n: usize, c: usize, quantize: bool) -> (Array2<f64>, Array2<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores = Array2::from_shape_fn((n, c), |_| {
        let s: f64 = rng.random_range(-1.0..1.0);
        if quantize { (s * 3.0).round() / 3.0 } else { s }
    });
    let mut truth = Array2::from_shape_fn((n, c), |_| u8::from(rng.random_bool(0.4)));
    // keep every label and sample non-degenerate
    for l in 0..c {
        truth[[l % n, l]] = 1;
        truth[[(l + 1) % n, l]] = 0;
    }
    for i in 0..n {
        truth[[i, i % c]] = 1;
    }
    (scores, truth)
}

fn same(a: &MetricReport, b: &MetricReport) -> bool {
    [(a.ap, b.ap), (a.auc, b.auc), (a.coverage, b.coverage), (a.ranking_loss, b.ranking_loss)]
        .iter()
        .all(|(x, y)| (x - y).abs() <= 1e-12)
}

#[test]
fn hand_ranked_examples() {
    let s = array![[0.9], [0.8], [0.7], [0.1]];
    let y = array![[1u8], [0], [1], [0]];
    let ap = oracle::average_precision(s.view(), y.view()).unwrap();
    assert!((ap - 5.0 / 6.0).abs() < 1e-12);
    let (ap, _) = mvfs::evaluation::average_precision(s.view(), y.view()).unwrap();
    assert!((ap - 5.0 / 6.0).abs() < 1e-12);
    let (auc, _) = mvfs::evaluation::macro_auc(s.view(), y.view()).unwrap();
    assert!((auc - 0.75).abs() < 1e-12);

    let s = array![[0.9, 0.3, 0.8, 0.1, 0.7]];
    let y = array![[0u8, 0, 1, 0, 1]];
    let (cov, _) = mvfs::evaluation::coverage_error(s.view(), y.view()).unwrap();
    assert_eq!(cov, 3.0);

    let s = array![[0.5, 0.7, 0.5]];
    let y = array![[1u8, 0, 0]];
    let (rl, _) = mvfs::evaluation::ranking_loss(s.view(), y.view()).unwrap();
    assert!((rl - 0.75).abs() < 1e-12);
}

#[test]
fn all_equal_scores_give_half_auc() {
    let (_, y) = instance(1, 20, 4, false);
    let s = Array2::from_elem((20, 4), 0.3);
    let (auc, _) = mvfs::evaluation::macro_auc(s.view(), y.view()).unwrap();
    assert_eq!(auc, 0.5);
}

#[test]
fn degenerate_labels_are_skipped_and_counted() {
    let s = array![[0.9, 0.2], [0.1, 0.4], [0.5, 0.6]];
    let y = array![[1u8, 1], [0, 1], [1, 1]];
    let r = evaluate_scores(s.view(), y.view()).unwrap();
    assert_eq!(r.skipped_labels, 1);
    assert_eq!(r.auc, 1.0);
    let all_pos = Array2::from_elem((3, 2), 1u8);
    assert!(evaluate_scores(s.view(), all_pos.view()).is_err());
}

#[test]
fn smoothed_priors() {
    let x = Array2::from_shape_fn((10, 2), |(i, j)| (i * 2 + j) as f64);
    let y = Array2::from_elem((10, 1), 1u8);
    let m = MlknnModel::fit(x.view(), y.view(), 3, 1.0).unwrap();
    assert!((m.priors[0] - 11.0 / 12.0).abs() < 1e-12);

    let x = array![[0.0], [1.0]];
    let y = array![[1u8], [0]];
    let m = MlknnModel::fit(x.view(), y.view(), 1, 1.0).unwrap();
    assert!((m.priors[0] - 0.5).abs() < 1e-12);
    assert!(MlknnModel::fit(x.view(), y.view(), 2, 1.0).is_err());
}

#[test]
fn leave_one_out_ignores_own_label() {
    // two identical points with opposite labels: each sees only the other
    let x = array![[0.0], [0.0], [10.0], [10.0]];
    let y = array![[1u8], [0], [1], [0]];
    let m = MlknnModel::fit(x.view(), y.view(), 1, 1e-9).unwrap();
    // positives always see a negative neighbour and vice versa
    assert!(m.likelihood_pos[0][0] > 0.99);
    assert!(m.likelihood_neg[0][1] > 0.99);
}

#[test]
fn unanimous_cluster_pulls_score_to_its_side() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 60;
    let x = Array2::from_shape_fn((n, 2), |(i, _)| if i < n / 2 { -5.0 } else { 5.0 } + rng.random_range(-0.1..0.1));
    let y = Array2::from_shape_fn((n, 1), |(i, _)| u8::from(i >= n / 2));
    let m = MlknnModel::fit(x.view(), y.view(), 5, 1.0).unwrap();
    let p = m.predict(array![[5.0, 5.0], [-5.0, -5.0]].view()).unwrap();
    assert!(p[[0, 0]] > 0.5 && p[[1, 0]] < 0.5, "{p:?}");
    assert!(m.predict(array![[1.0, 2.0, 3.0]].view()).is_err());
}

#[test]
fn likelihoods_are_distributions_and_priors_interior() {
    let (x, y) = instance(9, 40, 3, false);
    let m = MlknnModel::fit(x.view(), y.view(), 4, 1.0).unwrap();
    for l in 0..3 {
        assert!(m.priors[l] > 0.0 && m.priors[l] < 1.0);
        for h in [&m.likelihood_pos[l], &m.likelihood_neg[l]] {
            assert_eq!(h.len(), 5);
            assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn predictions_identical_across_thread_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    // coarse grid forces equidistant neighbours
    let x = Array2::from_shape_fn((120, 3), |_| f64::from(rng.random_range(0..3u8)));
    let y = Array2::from_shape_fn((120, 4), |_| u8::from(rng.random_bool(0.5)));
    let q = Array2::from_shape_fn((30, 3), |_| f64::from(rng.random_range(0..3u8)));
    let run = |t: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap().install(|| {
            MlknnModel::fit(x.view(), y.view(), 7, 1.0).unwrap().predict(q.view()).unwrap()
        })
    };
    let a = run(1);
    for t in [2, 4, 8] {
        let b = run(t);
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

proptest! {
    #[test]
    fn metrics_match_brute_force(seed in any::<u64>(), n in 2usize..50, c in 2usize..10, q in any::<bool>()) {
        let (s, y) = instance(seed, n, c, q);
        let r = evaluate_scores(s.view(), y.view()).unwrap();
        if let Some(ap) = oracle::average_precision(s.view(), y.view()) { prop_assert!((r.ap - ap).abs() <= 1e-12); }
        if let Some(auc) = oracle::macro_auc(s.view(), y.view()) { prop_assert!((r.auc - auc).abs() <= 1e-12); }
        prop_assert!((r.coverage - oracle::coverage_error(s.view(), y.view()).unwrap()).abs() <= 1e-12);
        if let Some(rl) = oracle::ranking_loss(s.view(), y.view()) { prop_assert!((r.ranking_loss - rl).abs() <= 1e-12); }
    }

    #[test]
    fn monotone_transforms_leave_metrics_unchanged(seed in any::<u64>(), n in 2usize..40, c in 2usize..8, q in any::<bool>()) {
        let (s, y) = instance(seed, n, c, q);
        let base = evaluate_scores(s.view(), y.view()).unwrap();
        for f in [|v: f64| v * v * v + v, |v: f64| (3.0 * v).exp(), |v: f64| 2.0 * v - 7.0] {
            let t = s.mapv(f);
            prop_assert!(same(&base, &evaluate_scores(t.view(), y.view()).unwrap()));
        }
    }

    #[test]
    fn label_permutation_is_equivariant(seed in any::<u64>(), n in 2usize..40, c in 2usize..8) {
        let (s, y) = instance(seed, n, c, false);
        let mut perm: Vec<usize> = (0..c).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(!seed));
        let a = evaluate_scores(s.view(), y.view()).unwrap();
        let b = evaluate_scores(s.select(Axis(1), &perm).view(), y.select(Axis(1), &perm).view()).unwrap();
        // continuous scores, so coverage has no index tie-breaks to disturb
        prop_assert!((a.ap - b.ap).abs() <= 1e-12 && (a.auc - b.auc).abs() <= 1e-12);
        prop_assert!((a.coverage - b.coverage).abs() <= 1e-12);
        prop_assert!((a.ranking_loss - b.ranking_loss).abs() <= 1e-12);
    }

    #[test]
    fn metric_bounds(seed in any::<u64>(), n in 2usize..40, c in 2usize..8, q in any::<bool>()) {
        let (s, y) = instance(seed, n, c, q);
        let r = evaluate_scores(s.view(), y.view()).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.ap));
        prop_assert!((0.0..=1.0).contains(&r.auc));
        prop_assert!((0.0..=1.0).contains(&r.ranking_loss));
        prop_assert!(r.coverage >= 1.0 && r.coverage <= c as f64);
    }

    #[test]
    fn scores_stay_in_unit_interval(seed in any::<u64>(), n in 3usize..40, c in 1usize..5, k in 1usize..6, s in 0.01f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((n, c), |_| u8::from(rng.random_bool(0.5)));
        let k = k.min(n - 1);
        let m = MlknnModel::fit(x.view(), y.view(), k, s).unwrap();
        let p = m.predict(x.view()).unwrap();
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
