//! Built-in verification suite run by `mvfs selftest`.

use std::fmt;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::{cross_scores, intra_scores, self_attention_weights, softmax_rows, CrossProjection};
use crate::dataset::{synth_generate, FeatureId, FeatureView, MultiViewDataset, SynthSpec};
use crate::error::Result;
use crate::evaluation::{average_precision, coverage_error, macro_auc, ranking_loss};
use crate::oracle;
use crate::redundancy::{
    dynamic_redundancy, mutual_information, static_redundancy, RedundancyConfig, RedundancyMetric,
    SelectedSet,
};
use crate::selector::{per_view_quota, select, SelectorConfig};

pub type MiFn = fn(&[f64], &[f64], usize) -> Result<f64>;

/// Swappable pieces, so negative controls can inject a broken estimator.
#[derive(Clone, Copy)]
pub struct SelftestHooks {
    pub mutual_information: MiFn,
}

impl Default for SelftestHooks {
    fn default() -> Self {
        Self {
            mutual_information,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<CheckOutcome>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

const ORACLE_TOL: f64 = 1e-12;

/// Planted-recovery threshold on the median recall.
pub const PLANTED_RECALL_THRESHOLD: f64 = 0.8;

pub fn selftest() -> SelftestReport {
    selftest_with(&SelftestHooks::default())
}

pub fn selftest_with(hooks: &SelftestHooks) -> SelftestReport {
    let checks = vec![
        check("metric_oracles", metric_oracles),
        check("redundancy_oracles", redundancy_oracles),
        check("mi_symmetry", || mi_symmetry(hooks.mutual_information)),
        check("attention_invariants", attention_invariants),
        check("cross_oracle", cross_oracle),
        check("quota_conservation", quota_conservation),
        check("planted_recovery", planted_recovery),
    ];
    SelftestReport { checks }
}

fn check(name: &'static str, f: impl FnOnce() -> std::result::Result<String, String>) -> CheckOutcome {
    match f() {
        Ok(detail) => CheckOutcome {
            name,
            passed: true,
            detail,
        },
        Err(detail) => CheckOutcome {
            name,
            passed: false,
            detail,
        },
    }
}

/// Random scores (sometimes coarsely quantized to force ties) and labels.
pub fn random_metric_instance(rng: &mut impl Rng) -> (Array2<f64>, Array2<u8>) {
    let n = rng.random_range(2..=50);
    let c = rng.random_range(2..=10);
    let coarse = rng.random_bool(0.5);
    let scores = Array2::from_shape_fn((n, c), |_| {
        let s: f64 = rng.random();
        if coarse {
            (s * 5.0).floor() / 5.0
        } else {
            s
        }
    });
    let p = rng.random_range(0.1..0.9);
    let labels = Array2::from_shape_fn((n, c), |_| u8::from(rng.random_bool(p)));
    (scores, labels)
}

fn compare(name: &str, got: Result<(f64, usize)>, want: Option<f64>) -> std::result::Result<f64, String> {
    match (got, want) {
        (Ok((g, _)), Some(w)) => {
            let diff = (g - w).abs();
            if diff > ORACLE_TOL {
                Err(format!("{name}: {g} vs oracle {w}"))
            } else {
                Ok(diff)
            }
        }
        (Err(_), None) => Ok(0.0),
        (g, w) => Err(format!("{name}: defined-ness differs ({g:?} vs {w:?})")),
    }
}

fn metric_oracles() -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (s, y) = random_metric_instance(&mut rng);
        let (s, y) = (s.view(), y.view());
        worst = worst.max(compare("ap", average_precision(s, y), oracle::average_precision(s, y))?);
        worst = worst.max(compare("auc", macro_auc(s, y), oracle::macro_auc(s, y))?);
        worst = worst.max(compare("coverage", coverage_error(s, y), oracle::coverage_error(s, y))?);
        worst = worst.max(compare("ranking_loss", ranking_loss(s, y), oracle::ranking_loss(s, y))?);
    }
    Ok(format!("200 instances, max |diff| = {worst:.3e}"))
}

/// Random single-view dataset with some exact and near duplicates.
pub fn random_redundancy_instance(rng: &mut impl Rng) -> MultiViewDataset {
    let n = rng.random_range(2..=200);
    let d = rng.random_range(1..=10);
    let mut data = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
    if d > 2 {
        let src = data.column(0).to_owned();
        data.column_mut(d - 1).assign(&src);
    }
    let view = FeatureView::new("r", data).expect("finite");
    let labels = Array2::from_shape_fn((n, 1), |_| u8::from(rng.random_bool(0.5)));
    MultiViewDataset::new(vec![view], labels).expect("consistent shapes")
}

fn redundancy_oracles() -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut worst: f64 = 0.0;
    for t in 0..100 {
        let ds = random_redundancy_instance(&mut rng);
        let view = ds.view(0);
        let d = view.n_features();
        let cols: Vec<Vec<f64>> = (0..d).map(|j| view.column(j).to_vec()).collect();
        let use_mi = t % 2 == 1;
        let metric = if use_mi {
            RedundancyMetric::MutualInformation
        } else {
            RedundancyMetric::Correlation
        };
        let bins = rng.random_range(2..=12);
        let cfg = RedundancyConfig {
            static_metric: metric,
            dynamic_metric: metric,
            mi_bins: bins,
        };
        let got = static_redundancy(view, &cfg).map_err(|e| e.to_string())?;
        let want = oracle::static_redundancy(&cols, use_mi, bins);
        for (g, w) in got.iter().zip(&want) {
            let diff = (g - w).abs();
            if diff > ORACLE_TOL {
                return Err(format!("static: {g} vs oracle {w}"));
            }
            worst = worst.max(diff);
        }

        let n_sel = rng.random_range(0..=d.saturating_sub(1));
        let selected: Vec<usize> = (0..n_sel).collect();
        let set = SelectedSet::from_ids(selected.iter().map(|&j| FeatureId::new(0, j)))
            .map_err(|e| e.to_string())?;
        let candidates: Vec<FeatureId> = (0..d).map(|j| FeatureId::new(0, j)).collect();
        let got = dynamic_redundancy(&candidates, &set, &ds, &cfg).map_err(|e| e.to_string())?;
        let sel_cols: Vec<Vec<f64>> = selected.iter().map(|&j| cols[j].clone()).collect();
        let want = oracle::dynamic_redundancy(&cols, &sel_cols, use_mi, bins);
        for (g, w) in got.iter().zip(&want) {
            let diff = (g - w).abs();
            if diff > ORACLE_TOL {
                return Err(format!("dynamic: {g} vs oracle {w}"));
            }
            worst = worst.max(diff);
        }
    }
    Ok(format!("100 instances, max |diff| = {worst:.3e}"))
}

fn mi_symmetry(mi: MiFn) -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    for _ in 0..100 {
        let n = rng.random_range(2..=300);
        let bins = rng.random_range(2..=16);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v + rng.random_range(-1.0..1.0)).collect();
        let a = mi(&x, &y, bins).map_err(|e| e.to_string())?;
        let b = mi(&y, &x, bins).map_err(|e| e.to_string())?;
        if a.to_bits() != b.to_bits() {
            return Err(format!("MI(x,y) = {a} but MI(y,x) = {b}"));
        }
        if a < 0.0 {
            return Err(format!("negative MI {a}"));
        }
    }
    Ok("100 pairs symmetric and non-negative".into())
}

fn attention_invariants() -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    for _ in 0..200 {
        let n = rng.random_range(2..=30);
        let c = rng.random_range(1..=6);
        let d = rng.random_range(1..=12);
        let y = Array2::from_shape_fn((n, c), |_| f64::from(u8::from(rng.random_bool(0.5))));
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-3.0..3.0));
        let w = self_attention_weights(y.view(), x.view(), d).map_err(|e| e.to_string())?;
        for row in w.matrix.rows() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() >= 1e-9 || row.iter().any(|&v| v <= 0.0) {
                return Err(format!("row sum {sum}"));
            }
        }
        let mut logits = Array2::from_shape_fn((c, d), |_| rng.random_range(-5.0..5.0));
        let mut shifted = logits.clone();
        let shift = rng.random_range(-50.0..50.0);
        shifted.row_mut(0).mapv_inplace(|v| v + shift);
        softmax_rows(&mut logits);
        softmax_rows(&mut shifted);
        if logits.iter().zip(shifted.iter()).any(|(a, b)| (a - b).abs() >= 1e-9) {
            return Err("softmax not shift invariant".into());
        }
        let perm: Vec<usize> = (0..d).rev().collect();
        let xp = x.select(ndarray::Axis(1), &perm);
        let base = intra_scores(&w, x.view()).map_err(|e| e.to_string())?;
        let wp = self_attention_weights(y.view(), xp.view(), d).map_err(|e| e.to_string())?;
        let permuted = intra_scores(&wp, xp.view()).map_err(|e| e.to_string())?;
        for (k, &p) in perm.iter().enumerate() {
            if (permuted[k] - base[p]).abs() >= 1e-9 {
                return Err("intra scores not permutation equivariant".into());
            }
        }
    }
    Ok("200 random instances".into())
}

fn cross_oracle() -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(2..=40);
        let c = rng.random_range(1..=5);
        let dc = rng.random_range(1..=10);
        let dv = rng.random_range(1..=8);
        let y = Array2::from_shape_fn((n, c), |_| f64::from(u8::from(rng.random_bool(0.5))));
        let k = Array2::from_shape_fn((n, dc), |_| rng.random_range(-2.0..2.0));
        let x = Array2::from_shape_fn((n, dv), |_| rng.random_range(-2.0..2.0));
        let got = cross_scores(y.view(), k.view(), x.view(), dv, CrossProjection::Signed)
            .map_err(|e| e.to_string())?;
        let cols = |m: &Array2<f64>| (0..m.ncols()).map(|j| m.column(j).to_vec()).collect::<Vec<_>>();
        let want = oracle::cross_scores(&cols(&y), &cols(&k), &cols(&x), dv);
        for (g, w) in got.iter().zip(&want) {
            let diff = (g - w).abs();
            if diff > 1e-10 * (1.0 + w.abs()) {
                return Err(format!("cross {g} vs oracle {w}"));
            }
            worst = worst.max(diff);
        }
    }
    Ok(format!("50 instances, max |diff| = {worst:.3e}"))
}

fn quota_conservation() -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    for _ in 0..500 {
        let h = rng.random_range(1..=6);
        let dims: Vec<usize> = (0..h).map(|_| rng.random_range(1..=50)).collect();
        let total: usize = dims.iter().sum();
        let k = rng.random_range(1..=total);
        let q = per_view_quota(k, &dims).map_err(|e| e.to_string())?;
        if q.iter().sum::<usize>() != k || q.iter().zip(&dims).any(|(a, b)| a > b) {
            return Err(format!("quota {q:?} for k = {k}, dims {dims:?}"));
        }
    }
    Ok("500 random apportionments".into())
}

/// The planted-recovery family: 3 views (60/80/60), 600 samples, 10 planted
/// features, 10 exact duplicates with 0.05 noise.
pub fn planted_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        n_samples: 600,
        view_dims: vec![60, 80, 60],
        n_labels: 5,
        n_planted: 10,
        n_duplicates: 10,
        noise_std: 0.05,
        seed,
    }
}

/// Fraction of planted features present in `selected`.
pub fn planted_recall(planted: &[FeatureId], selected: &[FeatureId]) -> f64 {
    let hit = planted.iter().filter(|p| selected.contains(p)).count();
    hit as f64 / planted.len() as f64
}

fn planted_recovery() -> std::result::Result<String, String> {
    let mut recalls = Vec::new();
    for seed in 0..5 {
        let syn = synth_generate(&planted_spec(seed)).map_err(|e| e.to_string())?;
        let ds = syn.dataset.normalized().map_err(|e| e.to_string())?;
        let res = select(&ds, &SelectorConfig::default().with_k(20)).map_err(|e| e.to_string())?;
        recalls.push(planted_recall(&syn.planted, &res.selected));
    }
    recalls.sort_by(f64::total_cmp);
    let median = recalls[recalls.len() / 2];
    let detail = format!(
        "median recall {median:.2} over 5 seeds (threshold {PLANTED_RECALL_THRESHOLD:.2})"
    );
    if median >= PLANTED_RECALL_THRESHOLD {
        Ok(detail)
    } else {
        Err(detail)
    }
}
