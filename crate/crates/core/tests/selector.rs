use mvfs::dataset::{synth_generate, FeatureId, FeatureView, MultiViewDataset, SynthSpec};
use mvfs::redundancy::{RedundancyMetric, SelectedSet};
use mvfs::selector::{rank_descending, select, SelectionMode, SelectorConfig};
use mvfs::Error;
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn small(seed: u64) -> MultiViewDataset {
    synth_generate(&SynthSpec {
        n_samples: 120,
        view_dims: vec![8, 12, 6],
        n_labels: 3,
        n_planted: 4,
        n_duplicates: 3,
        noise_std: 0.05,
        seed,
    })
    .unwrap()
    .dataset
    .normalized()
    .unwrap()
}

#[test]
fn k_equal_to_total_selects_everything() {
    let ds = small(1);
    let total = ds.total_features();
    for mode in [SelectionMode::BlockPerView, SelectionMode::GreedyPerFeature] {
        for (lambda, beta) in [(0.0, 0.0), (1.0, 1.0), (1000.0, 0.001)] {
            let cfg = SelectorConfig { lambda, beta, selection_mode: mode, ..SelectorConfig::default() }.with_k(total);
            let mut got = select(&ds, &cfg).unwrap().selected;
            got.sort();
            assert_eq!(got, ds.feature_ids().collect::<Vec<_>>());
        }
    }
}

/// View 0: the label-driving column and five copies of it, plus noise; view 1: noise.
fn duplicated_planted(seed: u64) -> (MultiViewDataset, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 300;
    let signal: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let d0 = 12;
    let copies = [0, 3, 5, 7, 9, 10];
    let v0 = Array2::from_shape_fn((n, d0), |(i, j)| if copies.contains(&j) { signal[i] } else { rng.sample(StandardNormal) });
    let v1 = Array2::from_shape_fn((n, 18), |_| rng.sample::<f64, _>(StandardNormal));
    let labels = Array2::from_shape_fn((n, 1), |(i, _)| u8::from(signal[i] > 0.0));
    let ds = MultiViewDataset::new(
        vec![FeatureView::new("a", v0).unwrap(), FeatureView::new("b", v1).unwrap()],
        labels,
    )
    .unwrap()
    .normalized()
    .unwrap();
    (ds, copies.to_vec())
}

fn copies_in_view0(ds_sel: &[FeatureId], copies: &[usize]) -> usize {
    ds_sel.iter().filter(|f| f.view == 0 && copies.contains(&f.column)).count()
}

#[test]
fn large_static_penalty_reduces_duplicate_picks_in_signed_mode() {
    let (ds, copies) = duplicated_planted(4);
    let base = SelectorConfig { enable_cross: false, enable_dynamic: false, signed_importance: true, ..SelectorConfig::default() }.with_k(5);
    let none = select(&ds, &SelectorConfig { lambda: 0.0, ..base }).unwrap();
    assert_eq!(none.quotas, vec![2, 3]);
    assert_eq!(copies_in_view0(&none.selected, &copies), 2);
    let heavy = select(&ds, &SelectorConfig { lambda: 10.0, ..base }).unwrap();
    assert!(copies_in_view0(&heavy.selected, &copies) < 2);
}

#[test]
fn magnitude_mode_ranks_heavily_penalized_copies_by_size() {
    let (ds, copies) = duplicated_planted(4);
    let cfg = SelectorConfig { lambda: 10.0, enable_cross: false, enable_dynamic: false, ..SelectorConfig::default() }.with_k(5);
    let res = select(&ds, &cfg).unwrap();
    let v0 = &res.scores.views[0];
    for &c in &copies {
        let raw = v0.intra[c] - 10.0 * v0.static_red[c];
        assert!(raw < 0.0);
        assert_eq!(v0.importance[c], raw.abs());
    }
    assert_eq!(copies_in_view0(&res.selected, &copies), 2);
}

/// View 0 holds `f`; view 1 holds an exact copy of `f` and an independent `g`
/// with the same label dot product.
fn copy_instance() -> MultiViewDataset {
    let f = [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
    let g = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
    let y = Array2::from_shape_vec((8, 1), vec![1, 1, 1, 1, 0, 0, 0, 0]).unwrap();
    let v0 = Array2::from_shape_fn((8, 1), |(i, _)| f[i]);
    let v1 = Array2::from_shape_fn((8, 2), |(i, j)| if j == 0 { f[i] } else { g[i] });
    MultiViewDataset::new(vec![FeatureView::new("a", v0).unwrap(), FeatureView::new("b", v1).unwrap()], y)
        .unwrap()
        .normalized()
        .unwrap()
}

#[test]
fn large_dynamic_penalty_drops_cross_view_copy() {
    let ds = copy_instance();
    let cfg = SelectorConfig {
        beta: 100.0,
        selection_mode: SelectionMode::GreedyPerFeature,
        signed_importance: true,
        ..SelectorConfig::default()
    }
    .with_k(2);
    let res = select(&ds, &cfg).unwrap();
    assert_eq!(res.quotas, vec![1, 1]);
    assert_eq!(res.selected, vec![FeatureId::new(0, 0), FeatureId::new(1, 1)]);
    let v1 = &res.scores.views[1];
    assert_eq!(v1.intra[0], v1.intra[1]);
    let ln2 = 2f64.ln();
    assert!((v1.dynamic_red[0] - ln2).abs() < 1e-12);
    assert_eq!(v1.dynamic_red[1], 0.0);
    // raw(copy) = 0.5 + 1 - 100 ln 2, raw(g) = 0.5
    assert!((v1.importance[0] - (1.5 - 100.0 * ln2)).abs() < 1e-9);
    assert!((v1.importance[1] - 0.5).abs() < 1e-12);

    let free = select(&ds, &SelectorConfig { beta: 0.0, ..cfg }).unwrap();
    assert_eq!(free.selected[1], FeatureId::new(1, 0));
}

#[test]
fn magnitude_mode_keeps_the_copy_under_large_dynamic_penalty() {
    let ds = copy_instance();
    let cfg = SelectorConfig { beta: 100.0, selection_mode: SelectionMode::GreedyPerFeature, ..SelectorConfig::default() }.with_k(2);
    assert_eq!(select(&ds, &cfg).unwrap().selected[1], FeatureId::new(1, 0));
}

#[test]
fn ablation_flags_zero_their_term() {
    let ds = small(3);
    let cfg = SelectorConfig::default().with_k(6);
    let full = select(&ds, &cfg).unwrap();
    let no_cross = select(&ds, &SelectorConfig { enable_cross: false, ..cfg }).unwrap();
    let no_dyn = select(&ds, &SelectorConfig { enable_dynamic: false, ..cfg }).unwrap();
    for v in 0..3 {
        assert!(no_cross.scores.views[v].cross.iter().all(|&c| c == 0.0));
        assert!(no_dyn.scores.views[v].dynamic_red.iter().all(|&c| c == 0.0));
        assert_eq!(full.scores.views[v].intra, no_cross.scores.views[v].intra);
    }
    assert!(full.scores.views[1].cross.iter().any(|&c| c != 0.0));
}

#[test]
fn zero_lambda_matches_disabled_static() {
    for seed in 0..5 {
        let ds = small(seed);
        let on = SelectorConfig { lambda: 0.0, ..SelectorConfig::default() }.with_k(7);
        let off = SelectorConfig { enable_static: false, ..on };
        let (a, b) = (select(&ds, &on).unwrap(), select(&ds, &off).unwrap());
        assert_eq!(a.selected, b.selected);
        for (x, y) in a.scores.views.iter().zip(&b.scores.views) {
            assert_eq!(x.importance, y.importance);
        }
    }
}

#[test]
fn selection_is_deterministic_across_thread_counts() {
    let ds = small(9);
    let cfg = SelectorConfig { selection_mode: SelectionMode::GreedyPerFeature, ..SelectorConfig::default() }.with_k(9);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| select(&ds, &cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, select(&ds, &cfg).unwrap());
}

#[test]
fn equal_importance_breaks_ties_by_index() {
    assert_eq!(rank_descending(&[0.5, 0.9, 0.5, 0.9, 0.1]), vec![1, 3, 0, 2, 4]);
    let x = [2.0, 1.0, -1.0, -2.0, 1.5, -1.5];
    let noise = [0.3, -0.2, 0.1, 0.4, -0.5, -0.1];
    let data = Array2::from_shape_fn((6, 4), |(i, j)| if j == 0 { noise[i] } else { x[i] });
    let y = array![[1u8], [1], [0], [0], [1], [0]];
    let ds = MultiViewDataset::new(vec![FeatureView::new("v", data).unwrap()], y).unwrap().normalized().unwrap();
    for signed in [false, true] {
        let cfg = SelectorConfig { lambda: 0.0, beta: 0.0, signed_importance: signed, ..SelectorConfig::default() }.with_k(2);
        let res = select(&ds, &cfg).unwrap();
        let imp = &res.scores.views[0].importance;
        assert_eq!(imp[1], imp[2]);
        assert_eq!(imp[2], imp[3]);
        assert_eq!(res.selected, vec![FeatureId::new(0, 1), FeatureId::new(0, 2)]);
    }
}

#[test]
fn precondition_errors() {
    let ds = small(2);
    assert!(matches!(
        select(&ds, &SelectorConfig::default().with_k(27)),
        Err(Error::InfeasibleK { k: 27, available: 26 })
    ));
    assert!(select(&ds, &SelectorConfig::default().with_k(0)).is_err());
    let raw = synth_generate(&SynthSpec {
        n_samples: 50,
        view_dims: vec![4, 4],
        n_labels: 2,
        n_planted: 2,
        n_duplicates: 1,
        noise_std: 0.1,
        seed: 0,
    })
    .unwrap()
    .dataset;
    assert!(select(&raw, &SelectorConfig::default().with_k(2)).is_err());
    let bad_bins = SelectorConfig { redundancy: mvfs::redundancy::RedundancyConfig { mi_bins: 1, ..Default::default() }, ..SelectorConfig::default() };
    assert!(select(&ds, &bad_bins.with_k(3)).is_err());
}

#[test]
fn single_view_warns_and_drops_cross() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let data = Array2::from_shape_fn((40, 5), |_| rng.random_range(-1.0..1.0));
    let y = Array2::from_shape_fn((40, 2), |_| u8::from(rng.random_bool(0.5)));
    let ds = MultiViewDataset::new(vec![FeatureView::new("v", data).unwrap()], y).unwrap().normalized().unwrap();
    let res = select(&ds, &SelectorConfig::default().with_k(3)).unwrap();
    assert_eq!(res.warnings.len(), 1);
    assert!(res.scores.views[0].cross.iter().all(|&c| c == 0.0));
    let quiet = select(&ds, &SelectorConfig { enable_cross: false, ..SelectorConfig::default() }.with_k(3)).unwrap();
    assert!(quiet.warnings.is_empty());
    assert_eq!(quiet.selected, res.selected);
}

#[test]
fn selected_set_rejects_duplicates() {
    let mut s = SelectedSet::new();
    s.insert(FeatureId::new(0, 1)).unwrap();
    assert!(s.insert(FeatureId::new(0, 1)).is_err());
    assert!(SelectedSet::from_ids([FeatureId::new(1, 0), FeatureId::new(1, 0)]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn block_and_greedy_coincide_without_dynamic_penalty(seed in any::<u64>(), k in 1usize..26, lambda in 0.0f64..5.0, mi_static in any::<bool>()) {
        let ds = small(seed);
        let mut cfg = SelectorConfig { lambda, beta: 0.0, ..SelectorConfig::default() }.with_k(k);
        if mi_static {
            cfg.redundancy.static_metric = RedundancyMetric::MutualInformation;
        }
        let block = select(&ds, &cfg).unwrap();
        let greedy = select(&ds, &SelectorConfig { selection_mode: SelectionMode::GreedyPerFeature, ..cfg }).unwrap();
        prop_assert_eq!(block.selected, greedy.selected);
    }

    #[test]
    fn result_has_k_distinct_features_and_conserved_quotas(seed in any::<u64>(), k in 1usize..26, greedy in any::<bool>()) {
        let ds = small(seed);
        let mode = if greedy { SelectionMode::GreedyPerFeature } else { SelectionMode::BlockPerView };
        let res = select(&ds, &SelectorConfig { selection_mode: mode, ..SelectorConfig::default() }.with_k(k)).unwrap();
        prop_assert_eq!(res.selected.len(), k);
        prop_assert_eq!(res.quotas.iter().sum::<usize>(), k);
        let mut uniq = res.selected.clone();
        uniq.sort();
        uniq.dedup();
        prop_assert_eq!(uniq.len(), k);
        for v in 0..3 {
            prop_assert_eq!(res.selected.iter().filter(|f| f.view == v).count(), res.quotas[v]);
            prop_assert!(res.scores.views[v].importance.iter().all(|&x| x >= 0.0 && x.is_finite()));
        }
    }
}
