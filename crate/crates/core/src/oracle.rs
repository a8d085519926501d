//! Brute-force reference implementations.
//!
//! Straight transcriptions of the metric and score definitions by explicit
//! enumeration. They share no code with the production paths and are used by
//! `selftest` and the test suites to cross-check them.

use ndarray::ArrayView2;

use crate::dataset::{FeatureId, MultiViewDataset};

fn rank_among(scores: &[f64], i: usize) -> usize {
    1 + (0..scores.len())
        .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
        .count()
}

fn degenerate(y: &[u8]) -> bool {
    y.iter().all(|&v| v == y[0])
}

fn columns<T: Copy>(m: ArrayView2<T>) -> Vec<Vec<T>> {
    (0..m.ncols()).map(|j| m.column(j).to_vec()).collect()
}

fn rows<T: Copy>(m: ArrayView2<T>) -> Vec<Vec<T>> {
    (0..m.nrows()).map(|i| m.row(i).to_vec()).collect()
}

/// Label-based AP by walking each positive's rank; `None` if all labels degenerate.
pub fn average_precision(scores: ArrayView2<f64>, truth: ArrayView2<u8>) -> Option<f64> {
    let (s, y) = (columns(scores), columns(truth));
    let mut per_label = Vec::new();
    for l in 0..s.len() {
        if degenerate(&y[l]) {
            continue;
        }
        let positives: Vec<usize> = (0..y[l].len()).filter(|&i| y[l][i] == 1).collect();
        let mut ap = 0.0;
        for &p in &positives {
            let r = rank_among(&s[l], p);
            let above = positives
                .iter()
                .filter(|&&q| rank_among(&s[l], q) <= r)
                .count();
            ap += above as f64 / r as f64;
        }
        per_label.push(ap / positives.len() as f64);
    }
    mean(&per_label)
}

/// Macro AUC by enumerating every (positive, negative) pair.
pub fn macro_auc(scores: ArrayView2<f64>, truth: ArrayView2<u8>) -> Option<f64> {
    let (s, y) = (columns(scores), columns(truth));
    let mut per_label = Vec::new();
    for l in 0..s.len() {
        if degenerate(&y[l]) {
            continue;
        }
        let mut wins = 0.0;
        let mut pairs = 0usize;
        for i in 0..y[l].len() {
            for j in 0..y[l].len() {
                if y[l][i] == 1 && y[l][j] == 0 {
                    pairs += 1;
                    if s[l][i] > s[l][j] {
                        wins += 1.0;
                    } else if s[l][i] == s[l][j] {
                        wins += 0.5;
                    }
                }
            }
        }
        per_label.push(wins / pairs as f64);
    }
    mean(&per_label)
}

/// Coverage by sorting labels and walking until every true label is seen.
pub fn coverage_error(scores: ArrayView2<f64>, truth: ArrayView2<u8>) -> Option<f64> {
    let (s, y) = (rows(scores), rows(truth));
    let mut per_sample = Vec::new();
    for i in 0..s.len() {
        let n_true = y[i].iter().filter(|&&v| v == 1).count();
        if n_true == 0 {
            continue;
        }
        let mut order: Vec<usize> = (0..s[i].len()).collect();
        order.sort_by(|&a, &b| s[i][b].partial_cmp(&s[i][a]).unwrap().then(a.cmp(&b)));
        let mut seen = 0;
        for (depth, &l) in order.iter().enumerate() {
            if y[i][l] == 1 {
                seen += 1;
                if seen == n_true {
                    per_sample.push((depth + 1) as f64);
                    break;
                }
            }
        }
    }
    mean(&per_sample)
}

/// Ranking loss by enumerating every (relevant, irrelevant) label pair.
pub fn ranking_loss(scores: ArrayView2<f64>, truth: ArrayView2<u8>) -> Option<f64> {
    let (s, y) = (rows(scores), rows(truth));
    let mut per_sample = Vec::new();
    for i in 0..s.len() {
        let c = s[i].len();
        let mut bad = 0.0;
        let mut pairs = 0usize;
        for a in 0..c {
            for b in 0..c {
                if y[i][a] == 1 && y[i][b] == 0 {
                    pairs += 1;
                    if s[i][a] < s[i][b] {
                        bad += 1.0;
                    } else if s[i][a] == s[i][b] {
                        bad += 0.5;
                    }
                }
            }
        }
        if pairs > 0 {
            per_sample.push(bad / pairs as f64);
        }
    }
    mean(&per_sample)
}

fn mean(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Textbook Pearson correlation, 0 for a constant input.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

fn bin_of(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    let b = ((v - lo) / (hi - lo) * bins as f64).floor() as usize;
    b.min(bins - 1)
}

/// Histogram MI as `sum p(a,b) ln(p(a,b) / (p(a) p(b)))` over occupied cells.
pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> f64 {
    let n = x.len();
    let range = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &t| (l.min(t), h.max(t)))
    };
    let (xl, xh) = range(x);
    let (yl, yh) = range(y);
    let bx: Vec<usize> = x.iter().map(|&v| bin_of(v, xl, xh, bins)).collect();
    let by: Vec<usize> = y.iter().map(|&v| bin_of(v, yl, yh, bins)).collect();
    let mut mi = 0.0;
    for a in 0..bins {
        for b in 0..bins {
            let nab = (0..n).filter(|&i| bx[i] == a && by[i] == b).count();
            if nab == 0 {
                continue;
            }
            let na = bx.iter().filter(|&&v| v == a).count();
            let nb = by.iter().filter(|&&v| v == b).count();
            let p = nab as f64 / n as f64;
            mi += p * (p / ((na as f64 / n as f64) * (nb as f64 / n as f64))).ln();
        }
    }
    mi.max(0.0)
}

/// Static redundancy of each column against the others by nested loops.
pub fn static_redundancy(cols: &[Vec<f64>], use_mi: bool, bins: usize) -> Vec<f64> {
    let d = cols.len();
    if d == 1 {
        return vec![0.0];
    }
    (0..d)
        .map(|i| {
            let mut s = 0.0;
            for j in 0..d {
                if j != i {
                    s += if use_mi {
                        mutual_information(&cols[i], &cols[j], bins)
                    } else {
                        pearson(&cols[i], &cols[j]).abs()
                    };
                }
            }
            s / (d - 1) as f64
        })
        .collect()
}

/// Dynamic redundancy of each candidate column against the selected columns.
pub fn dynamic_redundancy(
    candidates: &[Vec<f64>],
    selected: &[Vec<f64>],
    use_mi: bool,
    bins: usize,
) -> Vec<f64> {
    candidates
        .iter()
        .map(|c| {
            if selected.is_empty() {
                return 0.0;
            }
            let mut s = 0.0;
            for f in selected {
                s += if use_mi {
                    mutual_information(c, f, bins)
                } else {
                    pearson(c, f).abs()
                };
            }
            s / selected.len() as f64
        })
        .collect()
}

/// Softmax over the entries of one row of logits.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

/// Cross scores by explicit double loop: `cross(i) = sum_j a_j * (k_j . x_i) / n`.
pub fn cross_scores(labels: &[Vec<f64>], context: &[Vec<f64>], view: &[Vec<f64>], d_k: usize) -> Vec<f64> {
    let n = view.first().map_or(0, Vec::len) as f64;
    let scale = (d_k as f64).sqrt();
    let mut attention = vec![0.0; context.len()];
    for y in labels {
        let logits: Vec<f64> = context
            .iter()
            .map(|k| y.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() / scale)
            .collect();
        for (a, w) in attention.iter_mut().zip(softmax(&logits)) {
            *a += w;
        }
    }
    view.iter()
        .map(|x| {
            let mut s = 0.0;
            for (j, k) in context.iter().enumerate() {
                let c: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / n;
                s += attention[j] * c;
            }
            s
        })
        .collect()
}

/// Ranks every feature by its largest absolute correlation with any label and
/// returns the top `k`, ties by `(view, column)`.
pub fn top_by_label_correlation(dataset: &MultiViewDataset, k: usize) -> Vec<FeatureId> {
    let labels: Vec<Vec<f64>> = (0..dataset.n_labels())
        .map(|l| dataset.labels().column(l).iter().map(|&v| f64::from(v)).collect())
        .collect();
    let mut scored: Vec<(f64, FeatureId)> = dataset
        .feature_ids()
        .map(|id| {
            let x = dataset.feature(id);
            let best = labels
                .iter()
                .map(|y| pearson(x, y).abs())
                .fold(0.0, f64::max);
            (best, id)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, id)| id).collect()
}
