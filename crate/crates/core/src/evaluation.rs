//! MLKNN classifier and multi-label ranking metrics.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fitted multi-label k-nearest-neighbour model.
#[derive(Debug, Clone, PartialEq)]
pub struct MlknnModel {
    pub k: usize,
    pub smoothing: f64,
    /// `P(H_l = 1)` per label.
    pub priors: Vec<f64>,
    /// `likelihood_pos[l][j] = P(j positive neighbours | H_l = 1)`, `j in 0..=k`.
    pub likelihood_pos: Vec<Vec<f64>>,
    /// Same for `H_l = 0`.
    pub likelihood_neg: Vec<Vec<f64>>,
    train_x: Array2<f64>,
    train_y: Array2<u8>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` training rows nearest to `query` (Euclidean), ties by
/// ascending index, optionally excluding row `skip`.
fn nearest(train: &[Vec<f64>], query: &[f64], k: usize, skip: Option<usize>) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, row)| (sq_dist(row, query), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if cand.len() > k {
        cand.select_nth_unstable_by(k, cmp);
        cand.truncate(k);
    }
    cand.sort_by(cmp);
    cand.into_iter().map(|(_, i)| i).collect()
}

fn rows_of(x: ArrayView2<f64>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

impl MlknnModel {
    /// Fits MLKNN with leave-one-out neighbour counts on the training set.
    pub fn fit(x: ArrayView2<f64>, y: ArrayView2<u8>, k: usize, smoothing: f64) -> Result<Self> {
        let (n, c) = y.dim();
        if x.nrows() != n {
            return Err(Error::Shape(format!(
                "{} feature rows, {n} label rows",
                x.nrows()
            )));
        }
        if k == 0 || k >= n {
            return Err(Error::InvalidArgument(format!(
                "MLKNN needs 0 < k < n_train, got k = {k}, n_train = {n}"
            )));
        }
        if !(smoothing > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "smoothing must be positive, got {smoothing}"
            )));
        }
        let rows = rows_of(x);
        let neighbours: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|i| nearest(&rows, &rows[i], k, Some(i)))
            .collect();

        let mut priors = Vec::with_capacity(c);
        let mut likelihood_pos = Vec::with_capacity(c);
        let mut likelihood_neg = Vec::with_capacity(c);
        for l in 0..c {
            let positives: usize = y.column(l).iter().map(|&v| v as usize).sum();
            priors.push((smoothing + positives as f64) / (2.0 * smoothing + n as f64));
            let mut hist_pos = vec![0usize; k + 1];
            let mut hist_neg = vec![0usize; k + 1];
            for (i, nb) in neighbours.iter().enumerate() {
                let count = nb.iter().filter(|&&j| y[[j, l]] == 1).count();
                if y[[i, l]] == 1 {
                    hist_pos[count] += 1;
                } else {
                    hist_neg[count] += 1;
                }
            }
            let smooth = |hist: &[usize]| {
                let total: usize = hist.iter().sum();
                let denom = smoothing * (k + 1) as f64 + total as f64;
                hist.iter()
                    .map(|&h| (smoothing + h as f64) / denom)
                    .collect::<Vec<_>>()
            };
            likelihood_pos.push(smooth(&hist_pos));
            likelihood_neg.push(smooth(&hist_neg));
        }
        Ok(Self {
            k,
            smoothing,
            priors,
            likelihood_pos,
            likelihood_neg,
            train_x: x.to_owned(),
            train_y: y.to_owned(),
        })
    }

    pub fn n_labels(&self) -> usize {
        self.priors.len()
    }

    /// Posterior `P(H_l = 1 | c)` for each test row and label, where `c` counts
    /// positive labels among the `k` nearest training rows.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.train_x.ncols() {
            return Err(Error::Shape(format!(
                "model trained on {} features, test data has {}",
                self.train_x.ncols(),
                x.ncols()
            )));
        }
        let train = rows_of(self.train_x.view());
        let c = self.n_labels();
        let rows: Vec<Vec<f64>> = x
            .rows()
            .into_iter()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|q| {
                let q = q.to_vec();
                let nb = nearest(&train, &q, self.k, None);
                (0..c)
                    .map(|l| {
                        let count = nb.iter().filter(|&&j| self.train_y[[j, l]] == 1).count();
                        let p1 = self.priors[l] * self.likelihood_pos[l][count];
                        let p0 = (1.0 - self.priors[l]) * self.likelihood_neg[l][count];
                        p1 / (p1 + p0)
                    })
                    .collect()
            })
            .collect();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(Array2::from_shape_vec((x.nrows(), c), flat).expect("c scores per row"))
    }
}

/// All four metrics over one prediction matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ap: f64,
    pub auc: f64,
    pub coverage: f64,
    pub ranking_loss: f64,
    /// Labels with a single class in the test fold, excluded from AP and AUC.
    pub skipped_labels: usize,
    /// Samples excluded from ranking loss (no relevant or no irrelevant label).
    pub skipped_samples: usize,
}

fn check_shapes(scores: ArrayView2<f64>, truth: ArrayView2<u8>) -> Result<()> {
    if scores.dim() != truth.dim() {
        return Err(Error::Shape(format!(
            "scores {:?} vs labels {:?}",
            scores.dim(),
            truth.dim()
        )));
    }
    Ok(())
}

fn is_degenerate(col: &[u8]) -> bool {
    let pos = col.iter().filter(|&&y| y == 1).count();
    pos == 0 || pos == col.len()
}

/// Runs `per_label` on every non-degenerate label; returns (mean, skipped).
fn macro_average(
    scores: ArrayView2<f64>,
    truth: ArrayView2<u8>,
    per_label: impl Fn(&[f64], &[u8]) -> f64,
) -> Result<(f64, usize)> {
    check_shapes(scores, truth)?;
    let mut total = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for (s, y) in scores.axis_iter(Axis(1)).zip(truth.axis_iter(Axis(1))) {
        let y = y.to_vec();
        if is_degenerate(&y) {
            skipped += 1;
            continue;
        }
        total += per_label(&s.to_vec(), &y);
        used += 1;
    }
    if used == 0 {
        return Err(Error::AllLabelsDegenerate);
    }
    Ok((total / used as f64, skipped))
}

fn label_average_precision(scores: &[f64], truth: &[u8]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // `+ 0.0` folds -0.0 into +0.0 so signed zeros tie
    order.sort_by(|&a, &b| (scores[b] + 0.0).total_cmp(&(scores[a] + 0.0)).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if truth[i] == 1 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    sum / hits as f64
}

/// Mann-Whitney AUC through mid-ranks.
fn label_auc(scores: &[f64], truth: &[u8]) -> f64 {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = mid;
        }
        i = j + 1;
    }
    let pos = truth.iter().filter(|&&y| y == 1).count() as f64;
    let neg = n as f64 - pos;
    let rank_sum: f64 = (0..n).filter(|&i| truth[i] == 1).map(|i| ranks[i]).sum();
    (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg)
}

/// Label-based average precision, macro-averaged over non-degenerate labels.
pub fn average_precision(scores: ArrayView2<f64>, truth: ArrayView2<u8>) -> Result<(f64, usize)> {
    macro_average(scores, truth, label_average_precision)
}

/// Macro-averaged ROC AUC; ties count one half.
pub fn macro_auc(scores: ArrayView2<f64>, truth: ArrayView2<u8>) -> Result<(f64, usize)> {
    macro_average(scores, truth, label_auc)
}

/// Mean over samples of the deepest 1-indexed rank reached by a true label
/// (labels ranked by descending score, ties by ascending label index).
/// Samples with no true label are skipped; returns (mean, skipped).
pub fn coverage_error(scores: ArrayView2<f64>, truth: ArrayView2<u8>) -> Result<(f64, usize)> {
    check_shapes(scores, truth)?;
    let mut total = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for (s, y) in scores.rows().into_iter().zip(truth.rows()) {
        let deepest = (0..s.len())
            .filter(|&l| y[l] == 1)
            .map(|l| {
                1 + (0..s.len())
                    .filter(|&m| s[m] > s[l] || (s[m] == s[l] && m < l))
                    .count()
            })
            .max();
        match deepest {
            Some(r) => {
                total += r as f64;
                used += 1;
            }
            None => skipped += 1,
        }
    }
    if used == 0 {
        return Err(Error::NoValidSamples("coverage error"));
    }
    Ok((total / used as f64, skipped))
}

/// Mean fraction of (relevant, irrelevant) label pairs ranked in the wrong
/// order, ties counting one half. Samples lacking either side are skipped.
pub fn ranking_loss(scores: ArrayView2<f64>, truth: ArrayView2<u8>) -> Result<(f64, usize)> {
    check_shapes(scores, truth)?;
    let mut total = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for (s, y) in scores.rows().into_iter().zip(truth.rows()) {
        let (rel, irr): (Vec<f64>, Vec<f64>) = {
            let mut rel = Vec::new();
            let mut irr = Vec::new();
            for (l, &v) in s.iter().enumerate() {
                if y[l] == 1 {
                    rel.push(v);
                } else {
                    irr.push(v);
                }
            }
            (rel, irr)
        };
        if rel.is_empty() || irr.is_empty() {
            skipped += 1;
            continue;
        }
        let mut irr_sorted = irr;
        irr_sorted.sort_by(f64::total_cmp);
        // for each relevant score: irrelevant strictly above plus half the ties
        let bad: f64 = rel
            .iter()
            .map(|&r| {
                let below = irr_sorted.partition_point(|&x| x < r);
                let not_above = irr_sorted.partition_point(|&x| x <= r);
                (irr_sorted.len() - not_above) as f64 + 0.5 * (not_above - below) as f64
            })
            .sum();
        total += bad / (rel.len() * irr_sorted.len()) as f64;
        used += 1;
    }
    if used == 0 {
        return Err(Error::NoValidSamples("ranking loss"));
    }
    Ok((total / used as f64, skipped))
}

/// Computes all four metrics.
pub fn evaluate_scores(scores: ArrayView2<f64>, truth: ArrayView2<u8>) -> Result<MetricReport> {
    let (ap, skipped_labels) = average_precision(scores, truth)?;
    let (auc, _) = macro_auc(scores, truth)?;
    let (coverage, _) = coverage_error(scores, truth)?;
    let (ranking_loss, skipped_samples) = ranking_loss(scores, truth)?;
    Ok(MetricReport {
        ap,
        auc,
        coverage,
        ranking_loss,
        skipped_labels,
        skipped_samples,
    })
}
