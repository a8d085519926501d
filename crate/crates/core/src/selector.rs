//! Importance scoring and the per-view selection loop.
//!
//! Views are visited in dataset order. Each view's features are scored as
//! `((intra - lambda * static) + cross) - beta * dynamic`, where the dynamic term
//! is measured against everything selected so far, and the view's quota of
//! top-scoring features is appended to the selection.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::attention::{view_scores, CrossProjection, ViewScores};
use crate::dataset::{FeatureId, MultiViewDataset};
use crate::error::{Error, Result};
use crate::redundancy::{static_redundancy, DependenceCache, RedundancyConfig, SelectedSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Dynamic redundancy computed once per view, then the view's top quota taken.
    #[default]
    BlockPerView,
    /// Dynamic redundancy refreshed after every single pick.
    GreedyPerFeature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub lambda: f64,
    pub beta: f64,
    pub enable_cross: bool,
    pub enable_static: bool,
    pub enable_dynamic: bool,
    pub redundancy: RedundancyConfig,
    pub selection_mode: SelectionMode,
    /// Rank by the raw signed score instead of its magnitude.
    pub signed_importance: bool,
    pub cross_projection: CrossProjection,
    /// Total number of features to select.
    pub k: usize,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            beta: 1.0,
            enable_cross: true,
            enable_static: true,
            enable_dynamic: true,
            redundancy: RedundancyConfig::default(),
            selection_mode: SelectionMode::BlockPerView,
            signed_importance: false,
            cross_projection: CrossProjection::Signed,
            k: 10,
        }
    }
}

impl SelectorConfig {
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn validate(&self, total_features: usize) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        self.redundancy.validate()?;
        if self.k == 0 || self.k > total_features {
            return Err(Error::InfeasibleK {
                k: self.k,
                available: total_features,
            });
        }
        Ok(())
    }

    /// Raw combined score of one feature; disabled terms contribute 0.
    fn raw_score(&self, intra: f64, cross: f64, static_red: f64, dynamic_red: f64) -> f64 {
        let s = if self.enable_static { self.lambda * static_red } else { 0.0 };
        let c = if self.enable_cross { cross } else { 0.0 };
        let d = if self.enable_dynamic { self.beta * dynamic_red } else { 0.0 };
        ((intra - s) + c) - d
    }

    fn score(&self, intra: f64, cross: f64, static_red: f64, dynamic_red: f64) -> f64 {
        let raw = self.raw_score(intra, cross, static_red, dynamic_red);
        if self.signed_importance {
            raw
        } else {
            raw.abs()
        }
    }
}

/// Score terms and final importance of one view's features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewImportance {
    pub intra: Vec<f64>,
    pub cross: Vec<f64>,
    pub static_red: Vec<f64>,
    pub dynamic_red: Vec<f64>,
    pub importance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceScores {
    pub views: Vec<ViewImportance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected features in selection order.
    pub selected: Vec<FeatureId>,
    /// Per-view scores as computed when the view was visited.
    pub scores: ImportanceScores,
    pub config: SelectorConfig,
    pub quotas: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Combines per-feature terms into importance scores.
pub fn importance(
    view_scores: &ViewScores,
    static_red: &[f64],
    dynamic_red: &[f64],
    config: &SelectorConfig,
) -> Result<Vec<f64>> {
    let d = view_scores.intra.len();
    if view_scores.cross.len() != d || static_red.len() != d || dynamic_red.len() != d {
        return Err(Error::Shape(format!(
            "importance terms of lengths {}, {}, {}, {}",
            d,
            view_scores.cross.len(),
            static_red.len(),
            dynamic_red.len()
        )));
    }
    Ok((0..d)
        .map(|i| {
            config.score(
                view_scores.intra[i],
                view_scores.cross[i],
                static_red[i],
                dynamic_red[i],
            )
        })
        .collect())
}

/// Largest-remainder apportionment of `k` seats proportional to `view_dims`.
///
/// Remainder seats go by descending fractional remainder, ties to the lower
/// view index; no view receives more seats than it has features.
pub fn per_view_quota(k: usize, view_dims: &[usize]) -> Result<Vec<usize>> {
    let total: usize = view_dims.iter().sum();
    if k == 0 || k > total {
        return Err(Error::InfeasibleK { k, available: total });
    }
    // exact arithmetic: ideal_v = k * d_v / total
    let mut quota: Vec<usize> = view_dims.iter().map(|&d| k * d / total).collect();
    let mut order: Vec<usize> = (0..view_dims.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = (k * view_dims[a]) % total;
        let rb = (k * view_dims[b]) % total;
        rb.cmp(&ra).then(a.cmp(&b))
    });
    let mut left = k - quota.iter().sum::<usize>();
    while left > 0 {
        let before = left;
        for &v in &order {
            if left == 0 {
                break;
            }
            if quota[v] < view_dims[v] {
                quota[v] += 1;
                left -= 1;
            }
        }
        debug_assert!(left < before, "k <= total guarantees progress");
    }
    Ok(quota)
}

/// Column indices of `scores` in descending order, ties by ascending index.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // `+ 0.0` folds -0.0 into +0.0 so signed zeros tie
    order.sort_by(|&a, &b| (scores[b] + 0.0).total_cmp(&(scores[a] + 0.0)).then(a.cmp(&b)));
    order
}

/// Runs the selection loop over a z-scored dataset.
pub fn select(dataset: &MultiViewDataset, config: &SelectorConfig) -> Result<SelectionResult> {
    config.validate(dataset.total_features())?;
    if !dataset.is_normalized() {
        return Err(Error::InvalidArgument(
            "selection expects a z-scored dataset".into(),
        ));
    }
    let quotas = per_view_quota(config.k, &dataset.view_dims())?;
    let mut warnings = Vec::new();
    if config.enable_cross && dataset.n_views() < 2 {
        let msg = "single-view dataset: cross-view term is zero".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let dependence = if config.enable_dynamic {
        Some(DependenceCache::new(
            dataset,
            config.redundancy.dynamic_metric,
            config.redundancy.mi_bins,
        )?)
    } else {
        None
    };

    let mut selected = SelectedSet::new();
    let mut views = Vec::with_capacity(dataset.n_views());
    for (v, &quota) in quotas.iter().enumerate() {
        let view = dataset.view(v);
        let d = view.n_features();
        let (scores, static_red) = rayon::join(
            || view_scores(dataset, v, config.enable_cross, config.cross_projection),
            || {
                if config.enable_static {
                    static_redundancy(view, &config.redundancy)
                } else {
                    Ok(Array1::zeros(d))
                }
            },
        );
        let scores = scores?;
        let static_red = static_red?.to_vec();
        let candidates: Vec<FeatureId> = (0..d).map(|j| FeatureId::new(v, j)).collect();

        let mut dyn_sums = match &dependence {
            Some(cache) if !selected.is_empty() => cache.sum_dependence(&candidates, selected.ids()),
            _ => vec![0.0; d],
        };
        let mean = |sums: &[f64], m: usize| -> Vec<f64> {
            if m == 0 {
                vec![0.0; sums.len()]
            } else {
                sums.iter().map(|s| s / m as f64).collect()
            }
        };
        let dynamic_red = mean(&dyn_sums, selected.len());
        let imp = importance(&scores, &static_red, &dynamic_red, config)?;

        match config.selection_mode {
            SelectionMode::BlockPerView => {
                for j in rank_descending(&imp).into_iter().take(quota) {
                    selected.insert(FeatureId::new(v, j))?;
                }
            }
            SelectionMode::GreedyPerFeature => {
                let mut remaining: Vec<usize> = (0..d).collect();
                for _ in 0..quota {
                    let m = selected.len();
                    let pick_pos = remaining
                        .iter()
                        .enumerate()
                        .map(|(pos, &j)| {
                            let dyn_j = if m == 0 { 0.0 } else { dyn_sums[j] / m as f64 };
                            let s = config.score(scores.intra[j], scores.cross[j], static_red[j], dyn_j);
                            (pos, j, s)
                        })
                        .fold(None, |best: Option<(usize, usize, f64)>, cur| match best {
                            Some(b) if b.2 > cur.2 || (b.2 == cur.2 && b.1 < cur.1) => Some(b),
                            _ => Some(cur),
                        })
                        .map(|(pos, _, _)| pos)
                        .expect("quota never exceeds the view's features");
                    let j = remaining.remove(pick_pos);
                    let picked = FeatureId::new(v, j);
                    selected.insert(picked)?;
                    if let Some(cache) = &dependence {
                        let rest: Vec<FeatureId> =
                            remaining.iter().map(|&r| FeatureId::new(v, r)).collect();
                        let add = cache.sum_dependence(&rest, &[picked]);
                        for (&r, a) in remaining.iter().zip(add) {
                            dyn_sums[r] += a;
                        }
                    }
                }
            }
        }

        views.push(ViewImportance {
            intra: scores.intra,
            cross: scores.cross,
            static_red,
            dynamic_red,
            importance: imp,
        });
    }

    Ok(SelectionResult {
        selected: selected.ids().to_vec(),
        scores: ImportanceScores { views },
        config: *config,
        quotas,
        warnings,
    })
}
