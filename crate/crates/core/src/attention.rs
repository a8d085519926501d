//! Label-driven attention scores.
//!
//! The label matrix plays the query, a z-scored view the key and value. For a
//! view with `d_v` features the attention logits are `Y^T X / sqrt(d_k)` with
//! `d_k = d_v`, softmaxed over features within each label row. Per-feature
//! scores aggregate that attention over labels:
//!
//! * intra score of feature `i`: `e_i * sum_l W[l, i]`, where `e_i` is the RMS of
//!   column `i` (exactly 1 for a z-scored non-constant column);
//! * cross score: context attention `a` (column sums over the other views'
//!   concatenated features) pushed through the context-to-view correlation
//!   matrix `C = K^T X / n`, i.e. `cross = a^T C`.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureId, MultiViewDataset};
use crate::error::{Error, Result};

/// Row-stochastic label-by-feature attention (`n_labels x d`).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub matrix: Array2<f64>,
    pub d_k: usize,
}

impl AttentionWeights {
    /// Attention mass per feature, summed over labels.
    pub fn column_sums(&self) -> Array1<f64> {
        self.matrix.sum_axis(Axis(0))
    }
}

/// Intra- and cross-view scores for one view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewScores {
    pub intra: Vec<f64>,
    pub cross: Vec<f64>,
}

/// How the context-to-view correlation enters the cross score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossProjection {
    #[default]
    Signed,
    Absolute,
}

/// Numerically stable softmax of each row in place.
pub fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|x| (x - max).exp());
        let total = row.sum();
        row.mapv_inplace(|x| x / total);
    }
}

fn label_attention(labels: ArrayView2<f64>, keys: ArrayView2<f64>, d_k: usize) -> Result<Array2<f64>> {
    if labels.nrows() != keys.nrows() {
        return Err(Error::Shape(format!(
            "label matrix has {} rows, key matrix has {}",
            labels.nrows(),
            keys.nrows()
        )));
    }
    if keys.ncols() == 0 {
        return Err(Error::Shape("attention over an empty key matrix".into()));
    }
    if d_k == 0 {
        return Err(Error::InvalidArgument("d_k must be positive".into()));
    }
    let mut logits = labels.t().dot(&keys);
    logits /= (d_k as f64).sqrt();
    softmax_rows(&mut logits);
    Ok(logits)
}

/// `softmax_rows(Y^T X / sqrt(d_k))` for one normalized view.
pub fn self_attention_weights(
    labels: ArrayView2<f64>,
    x_norm: ArrayView2<f64>,
    d_k: usize,
) -> Result<AttentionWeights> {
    Ok(AttentionWeights {
        matrix: label_attention(labels, x_norm, d_k)?,
        d_k,
    })
}

/// Root mean square of every column.
pub fn column_rms(x: ArrayView2<f64>) -> Array1<f64> {
    let n = x.nrows() as f64;
    x.columns()
        .into_iter()
        .map(|c| (c.iter().map(|v| v * v).sum::<f64>() / n).sqrt())
        .collect()
}

/// Per-feature intra-view score: RMS energy times attention mass over labels.
pub fn intra_scores(weights: &AttentionWeights, x_norm: ArrayView2<f64>) -> Result<Array1<f64>> {
    if weights.matrix.ncols() != x_norm.ncols() {
        return Err(Error::Shape(format!(
            "attention covers {} features, view has {}",
            weights.matrix.ncols(),
            x_norm.ncols()
        )));
    }
    Ok(weights.column_sums() * column_rms(x_norm))
}

/// Concatenation of every other view's normalized columns, with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextKeys {
    pub matrix: Array2<f64>,
    pub provenance: Vec<FeatureId>,
}

/// Builds the context key matrix for view `v`: all other views in ascending
/// order, view `v` skipped.
pub fn context_keys(dataset: &MultiViewDataset, v: usize) -> Result<ContextKeys> {
    if v >= dataset.n_views() {
        return Err(Error::InvalidArgument(format!(
            "view {v} out of range for {} views",
            dataset.n_views()
        )));
    }
    if dataset.n_views() < 2 {
        return Err(Error::InvalidArgument(
            "cross-view attention needs at least two views".into(),
        ));
    }
    let provenance: Vec<FeatureId> = dataset.feature_ids().filter(|id| id.view != v).collect();
    let matrix = dataset.feature_matrix(&provenance)?;
    Ok(ContextKeys { matrix, provenance })
}

/// Cross-view scores of the current view's features.
///
/// `a` = column sums of `softmax_rows(Y^T K / sqrt(d_k))`, `C = K^T X / n`,
/// result `a^T C`. With [`CrossProjection::Absolute`] the entries of `C` enter
/// as magnitudes.
pub fn cross_scores(
    labels: ArrayView2<f64>,
    context: ArrayView2<f64>,
    x_norm: ArrayView2<f64>,
    d_k: usize,
    projection: CrossProjection,
) -> Result<Array1<f64>> {
    if context.nrows() != x_norm.nrows() {
        return Err(Error::Shape(format!(
            "context has {} rows, view has {}",
            context.nrows(),
            x_norm.nrows()
        )));
    }
    let attention = label_attention(labels, context, d_k)?.sum_axis(Axis(0));
    let n = x_norm.nrows() as f64;
    match projection {
        // a^T (K^T X) / n == (K a)^T X / n
        CrossProjection::Signed => {
            let mixed = context.dot(&attention);
            Ok(x_norm.t().dot(&mixed) / n)
        }
        CrossProjection::Absolute => {
            let corr = context.t().dot(&x_norm).mapv(|c| (c / n).abs());
            Ok(corr.t().dot(&attention))
        }
    }
}

/// Intra and (optionally) cross scores of view `v` of a normalized dataset.
/// Returns a zero cross vector when `with_cross` is false or the dataset has a
/// single view.
pub fn view_scores(
    dataset: &MultiViewDataset,
    v: usize,
    with_cross: bool,
    projection: CrossProjection,
) -> Result<ViewScores> {
    let labels = dataset.labels_f64();
    let view = dataset.view(v);
    let x = view.data().view();
    let d_k = view.n_features();
    let weights = self_attention_weights(labels.view(), x, d_k)?;
    let intra = intra_scores(&weights, x)?;
    let cross = if with_cross && dataset.n_views() > 1 {
        let ctx = context_keys(dataset, v)?;
        cross_scores(labels.view(), ctx.matrix.view(), x, d_k, projection)?
    } else {
        Array1::zeros(d_k)
    };
    Ok(ViewScores {
        intra: intra.to_vec(),
        cross: cross.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_generate, zscore_normalize, FeatureView, SynthSpec};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn zero_logits_give_uniform_rows() {
        let y = Array2::<f64>::zeros((4, 3));
        let x = array![[1.0, -1.0], [-1.0, 1.0], [1.0, 1.0], [-1.0, -1.0]];
        let w = self_attention_weights(y.view(), x.view(), 2).unwrap();
        for &v in w.matrix.iter() {
            assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_feature_gives_all_ones() {
        let y = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let x = array![[1.0], [0.0], [-1.0]];
        let w = self_attention_weights(y.view(), x.view(), 1).unwrap();
        assert_eq!(w.matrix, array![[1.0], [1.0]]);
    }

    #[test]
    fn label_aligned_feature_wins() {
        let y = array![[1.0], [1.0], [0.0], [0.0]];
        let f1 = [1.0, 1.0, -1.0, -1.0];
        let f2 = [0.3, -1.1, 0.9, -0.1];
        let view = FeatureView::new(
            "v",
            Array2::from_shape_fn((4, 2), |(i, j)| if j == 0 { f1[i] } else { f2[i] }),
        )
        .unwrap();
        let x = zscore_normalize(&view).unwrap();
        let w = self_attention_weights(y.view(), x.data().view(), 2).unwrap();
        // hand evaluation: logits are column sums over the two positive rows / sqrt(2)
        let l1 = (x.column(0)[0] + x.column(0)[1]) / 2f64.sqrt();
        let l2 = (x.column(1)[0] + x.column(1)[1]) / 2f64.sqrt();
        let p1 = l1.exp() / (l1.exp() + l2.exp());
        assert_abs_diff_eq!(w.matrix[[0, 0]], p1, epsilon = 1e-12);
        assert!(w.matrix[[0, 0]] > w.matrix[[0, 1]]);
    }

    #[test]
    fn uniform_weights_give_three_quarters() {
        let w = AttentionWeights {
            matrix: Array2::from_elem((3, 4), 0.25),
            d_k: 4,
        };
        let x = array![
            [1.0, 1.0, -1.0, 1.0],
            [-1.0, 1.0, 1.0, -1.0],
            [1.0, -1.0, 1.0, -1.0],
            [-1.0, -1.0, -1.0, 1.0]
        ];
        let s = intra_scores(&w, x.view()).unwrap();
        for v in s {
            assert_abs_diff_eq!(v, 0.75, epsilon = 1e-15);
        }
    }

    #[test]
    fn zeroed_column_scores_zero() {
        let w = AttentionWeights {
            matrix: array![[0.9, 0.1]],
            d_k: 2,
        };
        let x = array![[0.0, 1.0], [0.0, -1.0]];
        let s = intra_scores(&w, x.view()).unwrap();
        assert_eq!(s[0], 0.0);
        assert_abs_diff_eq!(s[1], 0.1, epsilon = 1e-15);
    }

    #[test]
    fn single_label_intra_is_the_row() {
        let y = array![[1.0], [0.0], [1.0], [0.0]];
        let x = array![[1.0, -1.0], [-1.0, 1.0], [1.0, 1.0], [-1.0, -1.0]];
        let w = self_attention_weights(y.view(), x.view(), 2).unwrap();
        let s = intra_scores(&w, x.view()).unwrap();
        assert_eq!(s.to_vec(), w.matrix.row(0).to_vec());
    }

    #[test]
    fn context_keys_skip_current_view() {
        let syn = synth_generate(&SynthSpec {
            n_samples: 10,
            view_dims: vec![2, 3, 4],
            n_labels: 1,
            n_planted: 1,
            n_duplicates: 0,
            noise_std: 0.0,
            seed: 0,
        })
        .unwrap();
        let ds = syn.dataset.normalized().unwrap();
        let ctx = context_keys(&ds, 1).unwrap();
        assert_eq!(ctx.matrix.ncols(), 6);
        let views: Vec<usize> = ctx.provenance.iter().map(|f| f.view).collect();
        assert_eq!(views, vec![0, 0, 2, 2, 2, 2]);
        assert_eq!(ctx.matrix.column(2).to_vec(), ds.feature(FeatureId::new(2, 0)));

        let two = synth_generate(&SynthSpec {
            view_dims: vec![2, 3],
            ..syn_spec()
        })
        .unwrap()
        .dataset;
        let ctx = context_keys(&two, 0).unwrap();
        assert_eq!(&ctx.matrix, two.view(1).data());
    }

    fn syn_spec() -> SynthSpec {
        SynthSpec {
            n_samples: 10,
            view_dims: vec![2],
            n_labels: 1,
            n_planted: 1,
            n_duplicates: 0,
            noise_std: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn single_view_has_no_context() {
        let ds = synth_generate(&syn_spec()).unwrap().dataset;
        assert!(context_keys(&ds, 0).is_err());
        let s = view_scores(&ds.normalized().unwrap(), 0, true, CrossProjection::Signed).unwrap();
        assert_eq!(s.cross, vec![0.0, 0.0]);
    }

    #[test]
    fn orthogonal_column_has_zero_cross() {
        // column 0 of x is orthogonal to both context columns
        let y = array![[1.0], [0.0], [1.0], [0.0]];
        let ctx = array![[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
        let x = array![[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]];
        let s = cross_scores(y.view(), ctx.view(), x.view(), 2, CrossProjection::Signed).unwrap();
        assert_abs_diff_eq!(s[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn equal_logits_split_attention_evenly() {
        // label has no positives => both context logits zero => a = (0.5, 0.5)
        let y = array![[0.0], [0.0], [0.0], [0.0]];
        let ctx = array![[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
        let x = array![[1.0, 1.0], [1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0]];
        let s = cross_scores(y.view(), ctx.view(), x.view(), 2, CrossProjection::Signed).unwrap();
        // C = K^T X / 4 = [[1, 0.5], [0, 0.5]] ; cross = 0.5 * column sums
        assert_abs_diff_eq!(s[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn absolute_projection_dominates_signed() {
        let y = array![[1.0], [0.0], [1.0], [0.0]];
        let ctx = array![[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
        let x = array![[-1.0], [-1.0], [1.0], [1.0]];
        let signed = cross_scores(y.view(), ctx.view(), x.view(), 1, CrossProjection::Signed).unwrap();
        let abs = cross_scores(y.view(), ctx.view(), x.view(), 1, CrossProjection::Absolute).unwrap();
        assert!(signed[0] < 0.0);
        assert_abs_diff_eq!(abs[0], -signed[0], epsilon = 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let y = Array2::<f64>::zeros((3, 1));
        let x = Array2::<f64>::zeros((4, 2));
        assert!(self_attention_weights(y.view(), x.view(), 2).is_err());
    }
}
