//! Redundancy terms.
//!
//! Static redundancy is a feature's mean absolute Pearson correlation with the
//! other features of its own view. Dynamic redundancy is a candidate's mean
//! dependence (histogram mutual information by default) on the features
//! already selected. Either metric can be swapped for the other.

use std::collections::HashSet;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureId, FeatureView, MultiViewDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RedundancyMetric {
    Correlation,
    MutualInformation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedundancyConfig {
    pub static_metric: RedundancyMetric,
    pub dynamic_metric: RedundancyMetric,
    /// Equal-width bins per variable for the MI estimator.
    pub mi_bins: usize,
}

impl Default for RedundancyConfig {
    fn default() -> Self {
        Self {
            static_metric: RedundancyMetric::Correlation,
            dynamic_metric: RedundancyMetric::MutualInformation,
            mi_bins: 10,
        }
    }
}

impl RedundancyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mi_bins < 2 {
            return Err(Error::InvalidArgument(format!(
                "mi_bins must be >= 2, got {}",
                self.mi_bins
            )));
        }
        Ok(())
    }
}

/// Ordered set of selected features without duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SelectedSet {
    ids: Vec<FeatureId>,
    members: HashSet<FeatureId>,
}

impl SelectedSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ids(ids: impl IntoIterator<Item = FeatureId>) -> Result<Self> {
        let mut set = Self::new();
        for id in ids {
            set.insert(id)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, id: FeatureId) -> Result<()> {
        if !self.members.insert(id) {
            return Err(Error::InvalidArgument(format!("{id} is already selected")));
        }
        self.ids.push(id);
        Ok(())
    }

    pub fn contains(&self, id: FeatureId) -> bool {
        self.members.contains(&id)
    }

    pub fn ids(&self) -> &[FeatureId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

fn check_lengths(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// Pearson correlation. Returns 0 when either vector is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y)?;
    if x.len() < 2 {
        return Err(Error::Shape("pearson needs at least two samples".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Equal-width bin codes over the variable's own `[min, max]`. A constant
/// variable lands entirely in bin 0.
pub fn discretize(x: &[f64], bins: usize) -> Vec<u32> {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let width = hi - lo;
    if !(width > 0.0) {
        return vec![0; x.len()];
    }
    let last = (bins - 1) as u32;
    x.iter()
        .map(|&v| (((v - lo) / width * bins as f64).floor() as u32).min(last))
        .collect()
}

/// `sum c ln c` over non-zero counts, in ascending count order so the result
/// does not depend on cell traversal order.
fn count_entropy_term(counts: &mut Vec<u32>) -> f64 {
    counts.retain(|&c| c > 0);
    counts.sort_unstable();
    counts
        .iter()
        .map(|&c| {
            let c = f64::from(c);
            c * c.ln()
        })
        .sum()
}

/// Plug-in MI (nats) of two discretized variables.
pub fn mi_from_codes(a: &[u32], b: &[u32], bins: usize) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let mut joint = vec![0u32; bins * bins];
    let mut ma = vec![0u32; bins];
    let mut mb = vec![0u32; bins];
    for (&i, &j) in a.iter().zip(b) {
        let (i, j) = (i as usize, j as usize);
        joint[i * bins + j] += 1;
        ma[i] += 1;
        mb[j] += 1;
    }
    let nf = n as f64;
    let ln_n = nf.ln();
    let h_a = ln_n - count_entropy_term(&mut ma) / nf;
    let h_b = ln_n - count_entropy_term(&mut mb) / nf;
    let h_ab = ln_n - count_entropy_term(&mut joint) / nf;
    let mi = h_a + h_b - h_ab;
    if mi < 0.0 {
        0.0
    } else {
        mi
    }
}

/// Histogram mutual information in nats with `bins` equal-width cells per axis.
pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> Result<f64> {
    check_lengths(x, y)?;
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("bins must be >= 2, got {bins}")));
    }
    Ok(mi_from_codes(&discretize(x, bins), &discretize(y, bins), bins))
}

/// Centered, unit-norm copy of each column (zero for constant columns) so that
/// dot products are Pearson correlations.
fn unit_columns(view: &FeatureView) -> Array2<f64> {
    let (n, d) = view.data().dim();
    let mut out = Array2::zeros((n, d));
    for j in 0..d {
        let col = view.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let ss: f64 = col.iter().map(|&x| (x - mean) * (x - mean)).sum();
        if ss == 0.0 || col.iter().all(|&x| x == col[0]) {
            continue;
        }
        let norm = ss.sqrt();
        for (i, &x) in col.iter().enumerate() {
            out[[i, j]] = (x - mean) / norm;
        }
    }
    out
}

/// Per-feature mean dependence on the other features of `view`:
/// `R(i) = sum_{j != i} dep(i, j) / (d - 1)`, with `R = [0]` for a lone feature.
pub fn static_redundancy(view: &FeatureView, config: &RedundancyConfig) -> Result<Array1<f64>> {
    config.validate()?;
    let d = view.n_features();
    if d == 1 {
        return Ok(Array1::zeros(1));
    }
    let denom = (d - 1) as f64;
    let r: Vec<f64> = match config.static_metric {
        RedundancyMetric::Correlation => {
            let u = unit_columns(view);
            let gram = u.t().dot(&u);
            (0..d)
                .map(|i| {
                    let row = gram.row(i);
                    let s: f64 = (0..d)
                        .filter(|&j| j != i)
                        .map(|j| row[j].abs().min(1.0))
                        .sum();
                    s / denom
                })
                .collect()
        }
        RedundancyMetric::MutualInformation => {
            let bins = config.mi_bins;
            let codes: Vec<Vec<u32>> = (0..d).map(|j| discretize(view.column(j), bins)).collect();
            (0..d)
                .into_par_iter()
                .map(|i| {
                    let s: f64 = (0..d)
                        .filter(|&j| j != i)
                        .map(|j| mi_from_codes(&codes[i], &codes[j], bins))
                        .sum();
                    s / denom
                })
                .collect()
        }
    };
    Ok(Array1::from(r))
}

/// Pairwise dependence between dataset features, with bin codes cached for the
/// MI metric.
pub struct DependenceCache<'a> {
    dataset: &'a MultiViewDataset,
    metric: RedundancyMetric,
    bins: usize,
    codes: Vec<Vec<Vec<u32>>>,
}

impl<'a> DependenceCache<'a> {
    pub fn new(dataset: &'a MultiViewDataset, metric: RedundancyMetric, bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidArgument(format!("bins must be >= 2, got {bins}")));
        }
        let codes = match metric {
            RedundancyMetric::MutualInformation => dataset
                .views()
                .iter()
                .map(|v| {
                    (0..v.n_features())
                        .into_par_iter()
                        .map(|j| discretize(v.column(j), bins))
                        .collect()
                })
                .collect(),
            RedundancyMetric::Correlation => Vec::new(),
        };
        Ok(Self {
            dataset,
            metric,
            bins,
            codes,
        })
    }

    /// `MI(a, b)` or `|pearson(a, b)|`. Ids must be valid.
    pub fn dependence(&self, a: FeatureId, b: FeatureId) -> f64 {
        match self.metric {
            RedundancyMetric::MutualInformation => mi_from_codes(
                &self.codes[a.view][a.column],
                &self.codes[b.view][b.column],
                self.bins,
            ),
            RedundancyMetric::Correlation => {
                let x = self.dataset.feature(a);
                // both columns come from one dataset, lengths always match
                pearson(x, self.dataset.feature(b)).map_or(0.0, f64::abs)
            }
        }
    }

    /// Summed dependence of each candidate on `selected`, accumulated in
    /// `selected` order.
    pub fn sum_dependence(&self, candidates: &[FeatureId], selected: &[FeatureId]) -> Vec<f64> {
        candidates
            .par_iter()
            .map(|&c| selected.iter().fold(0.0, |acc, &f| acc + self.dependence(c, f)))
            .collect()
    }

    /// Mean dependence of each candidate on `selected`; zeros when it is empty.
    pub fn mean_dependence(&self, candidates: &[FeatureId], selected: &[FeatureId]) -> Vec<f64> {
        if selected.is_empty() {
            return vec![0.0; candidates.len()];
        }
        let m = selected.len() as f64;
        self.sum_dependence(candidates, selected)
            .into_iter()
            .map(|s| s / m)
            .collect()
    }
}

/// `R_dynamic(i) = (1/|S|) sum_{f in S} dep(i, f)` for every candidate `i`.
pub fn dynamic_redundancy(
    candidates: &[FeatureId],
    selected: &SelectedSet,
    dataset: &MultiViewDataset,
    config: &RedundancyConfig,
) -> Result<Array1<f64>> {
    config.validate()?;
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate features".into()));
    }
    for &id in candidates.iter().chain(selected.ids()) {
        dataset.check_feature(id)?;
    }
    let cache = DependenceCache::new(dataset, config.dynamic_metric, config.mi_bins)?;
    Ok(Array1::from(cache.mean_dependence(candidates, selected.ids())))
}
