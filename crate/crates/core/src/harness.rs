//! Experiment protocol: repeated seeded splits, selection at each feature
//! fraction, MLKNN evaluation, aggregation and report output.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_manifest, synth_generate, FeatureId, MultiViewDataset, Partition, SynthSpec};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_scores, MetricReport, MlknnModel};
use crate::redundancy::RedundancyMetric;
use crate::selector::{select, SelectorConfig};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "MVFS_WORKERS";

/// Which score terms are switched off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationPreset {
    #[default]
    Full,
    /// No cross-view term.
    Rman1,
    /// No static redundancy.
    Rman2,
    /// No dynamic redundancy.
    Rman3,
}

impl AblationPreset {
    pub fn apply(self, cfg: &mut SelectorConfig) {
        match self {
            Self::Full => {}
            Self::Rman1 => cfg.enable_cross = false,
            Self::Rman2 => cfg.enable_static = false,
            Self::Rman3 => cfg.enable_dynamic = false,
        }
    }
}

/// Static/dynamic redundancy metric pairings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RedundancyPreset {
    /// correlation / MI
    #[default]
    Rman,
    /// MI / correlation
    Alpha,
    /// MI / MI
    Beta,
    /// correlation / correlation
    Gamma,
}

impl RedundancyPreset {
    pub fn apply(self, cfg: &mut SelectorConfig) {
        use RedundancyMetric::*;
        let (s, d) = match self {
            Self::Rman => (Correlation, MutualInformation),
            Self::Alpha => (MutualInformation, Correlation),
            Self::Beta => (MutualInformation, MutualInformation),
            Self::Gamma => (Correlation, Correlation),
        };
        cfg.redundancy.static_metric = s;
        cfg.redundancy.dynamic_metric = d;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Manifest(PathBuf),
    Synthetic(SynthSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<MultiViewDataset> {
        match self {
            Self::Manifest(p) => load_manifest(p),
            Self::Synthetic(spec) => Ok(synth_generate(spec)?.dataset),
        }
    }
}

/// Default fraction grid: 2% to 20% in 2% steps.
pub fn default_fractions() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 50.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub source: DataSource,
    pub fractions: Vec<f64>,
    pub repeats: usize,
    pub test_fraction: f64,
    pub base_seed: u64,
    /// Base selector settings; `k` is overwritten per fraction.
    pub selector: SelectorConfig,
    pub ablation: AblationPreset,
    /// Overrides the selector's redundancy metrics when set.
    pub redundancy: Option<RedundancyPreset>,
    /// Normalize with full-dataset statistics instead of training-fold ones.
    pub global_normalization: bool,
    pub mlknn_k: usize,
    pub mlknn_smoothing: f64,
}

impl ExperimentSpec {
    pub fn new(source: DataSource) -> Self {
        Self {
            source,
            fractions: default_fractions(),
            repeats: 10,
            test_fraction: 0.3,
            base_seed: 0,
            selector: SelectorConfig::default(),
            ablation: AblationPreset::Full,
            redundancy: None,
            global_normalization: false,
            mlknn_k: 10,
            mlknn_smoothing: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() || self.fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "fractions must be non-empty and lie in (0, 1]: {:?}",
                self.fractions
            )));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be >= 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }

    /// Selector config with both presets applied.
    pub fn effective_selector(&self) -> SelectorConfig {
        let mut cfg = self.selector;
        if let Some(preset) = self.redundancy {
            preset.apply(&mut cfg);
        }
        self.ablation.apply(&mut cfg);
        cfg
    }
}

/// `round(fraction * total)` (half away from zero), clamped to `[1, total]`.
pub fn k_for_fraction(fraction: f64, total: usize) -> usize {
    ((fraction * total as f64).round() as usize).clamp(1, total.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSummary {
    pub ap: f64,
    pub auc: f64,
    pub coverage: f64,
    pub ranking_loss: f64,
}

/// One (fraction, repeat) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub fraction: f64,
    pub repeat: usize,
    pub seed: u64,
    pub k: usize,
    pub lambda: f64,
    pub beta: f64,
    pub partition_hash: String,
    pub metrics: Option<MetricReport>,
    pub error: Option<String>,
    pub selected: Vec<FeatureId>,
    pub seconds_select: f64,
    pub seconds_eval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionAggregate {
    pub fraction: f64,
    pub k: usize,
    pub valid: usize,
    /// `None` when no repeat produced a valid cell.
    pub mean: Option<MetricSummary>,
    /// Population standard deviation over valid repeats.
    pub std: Option<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub spec: ExperimentSpec,
    pub selector: SelectorConfig,
    pub dataset_fingerprint: String,
    pub n_samples: usize,
    pub view_dims: Vec<usize>,
    pub cells: Vec<CellRow>,
    pub aggregates: Vec<FractionAggregate>,
}

impl EvaluationReport {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.metrics.is_none()).count()
    }

    /// Checks that the aggregates equal a recomputation from the cells.
    pub fn verify_aggregates(&self) -> Result<()> {
        let fresh = aggregate(&self.spec.fractions, self.total_features(), &self.cells);
        if fresh.len() != self.aggregates.len() {
            return Err(Error::Report("aggregate row count mismatch".into()));
        }
        for (a, b) in fresh.iter().zip(&self.aggregates) {
            let close = |x: &MetricSummary, y: &MetricSummary| {
                [
                    (x.ap, y.ap),
                    (x.auc, y.auc),
                    (x.coverage, y.coverage),
                    (x.ranking_loss, y.ranking_loss),
                ]
                .iter()
                .all(|&(p, q)| (p - q).abs() <= 1e-12)
            };
            let same = |x: &Option<MetricSummary>, y: &Option<MetricSummary>| match (x, y) {
                (Some(x), Some(y)) => close(x, y),
                (None, None) => true,
                _ => false,
            };
            let ok = a.valid == b.valid && a.k == b.k && same(&a.mean, &b.mean) && same(&a.std, &b.std);
            if !ok {
                return Err(Error::Report(format!(
                    "aggregate for fraction {} disagrees with its cells",
                    b.fraction
                )));
            }
        }
        Ok(())
    }

    pub fn total_features(&self) -> usize {
        self.view_dims.iter().sum()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Report(e.to_string()))
    }

    /// Parses a report and verifies its aggregates.
    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text).map_err(|e| Error::Report(e.to_string()))?;
        report.verify_aggregates()?;
        Ok(report)
    }
}

fn summarize(values: &[MetricReport]) -> Option<(MetricSummary, MetricSummary)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let pick: [fn(&MetricReport) -> f64; 4] = [|m| m.ap, |m| m.auc, |m| m.coverage, |m| m.ranking_loss];
    let mut mean = [0.0; 4];
    let mut std = [0.0; 4];
    for (k, f) in pick.iter().enumerate() {
        let mu = values.iter().map(f).sum::<f64>() / n;
        let var = values.iter().map(|m| (f(m) - mu).powi(2)).sum::<f64>() / n;
        mean[k] = mu;
        std[k] = var.sqrt();
    }
    let to = |a: [f64; 4]| MetricSummary {
        ap: a[0],
        auc: a[1],
        coverage: a[2],
        ranking_loss: a[3],
    };
    Some((to(mean), to(std)))
}

fn aggregate(fractions: &[f64], total: usize, cells: &[CellRow]) -> Vec<FractionAggregate> {
    fractions
        .iter()
        .map(|&f| {
            let valid: Vec<MetricReport> = cells
                .iter()
                .filter(|c| c.fraction == f)
                .filter_map(|c| c.metrics)
                .collect();
            let summary = summarize(&valid);
            FractionAggregate {
                fraction: f,
                k: k_for_fraction(f, total),
                valid: valid.len(),
                mean: summary.map(|s| s.0),
                std: summary.map(|s| s.1),
            }
        })
        .collect()
}

/// Builds a thread pool sized by `MVFS_WORKERS` (rayon default when unset).
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| {
            Error::InvalidArgument(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))
        })?;
        if n == 0 {
            return Err(Error::InvalidArgument(format!("{WORKERS_ENV} must be >= 1")));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Train/test folds of one repeat, normalized per the spec.
fn prepare_folds(
    dataset: &MultiViewDataset,
    partition: &Partition,
    global_normalization: bool,
) -> Result<(MultiViewDataset, MultiViewDataset)> {
    if global_normalization {
        let full = dataset.normalized()?;
        return Ok((full.select_rows(&partition.train)?, full.select_rows(&partition.test)?));
    }
    let train = dataset.select_rows(&partition.train)?;
    let test = dataset.select_rows(&partition.test)?;
    let stats = train.fit_standardizers();
    Ok((train.apply_standardizers(&stats)?, test.apply_standardizers(&stats)?))
}

fn evaluate_cell(
    train: &MultiViewDataset,
    test: &MultiViewDataset,
    cfg: &SelectorConfig,
    spec: &ExperimentSpec,
    cell: &mut CellRow,
) -> Result<()> {
    let t0 = Instant::now();
    let selection = select(train, cfg)?;
    cell.seconds_select = t0.elapsed().as_secs_f64();
    cell.selected = selection.selected.clone();

    let t1 = Instant::now();
    let x_train = train.feature_matrix(&selection.selected)?;
    let x_test = test.feature_matrix(&selection.selected)?;
    let model = MlknnModel::fit(
        x_train.view(),
        train.labels().view(),
        spec.mlknn_k,
        spec.mlknn_smoothing,
    )?;
    let scores = model.predict(x_test.view())?;
    let metrics = evaluate_scores(scores.view(), test.labels().view())?;
    cell.seconds_eval = t1.elapsed().as_secs_f64();
    cell.metrics = Some(metrics);
    Ok(())
}

fn run_repeat(dataset: &MultiViewDataset, spec: &ExperimentSpec, repeat: usize) -> Result<Vec<CellRow>> {
    let seed = spec.base_seed.wrapping_add(repeat as u64);
    let partition = Partition::random(dataset.n_samples(), spec.test_fraction, seed)?;
    let (train, test) = prepare_folds(dataset, &partition, spec.global_normalization)?;
    let total = dataset.total_features();
    let base = spec.effective_selector();
    let hash = partition.hash();
    Ok(spec
        .fractions
        .iter()
        .map(|&fraction| {
            let k = k_for_fraction(fraction, total);
            let cfg = base.with_k(k);
            let mut cell = CellRow {
                fraction,
                repeat,
                seed,
                k,
                lambda: cfg.lambda,
                beta: cfg.beta,
                partition_hash: hash.clone(),
                metrics: None,
                error: None,
                selected: Vec::new(),
                seconds_select: 0.0,
                seconds_eval: 0.0,
            };
            if let Err(e) = evaluate_cell(&train, &test, &cfg, spec, &mut cell) {
                log::warn!("fraction {fraction}, repeat {repeat}: {e}");
                cell.error = Some(e.to_string());
            }
            cell
        })
        .collect())
}

/// Runs the full protocol on an already loaded dataset.
pub fn run_on(dataset: &MultiViewDataset, spec: &ExperimentSpec) -> Result<EvaluationReport> {
    spec.validate()?;
    let per_repeat: Vec<Vec<CellRow>> = (0..spec.repeats)
        .into_par_iter()
        .map(|r| run_repeat(dataset, spec, r))
        .collect::<Result<_>>()?;
    let cells: Vec<CellRow> = per_repeat.into_iter().flatten().collect();
    let aggregates = aggregate(&spec.fractions, dataset.total_features(), &cells);
    Ok(EvaluationReport {
        spec: spec.clone(),
        selector: spec.effective_selector(),
        dataset_fingerprint: dataset.fingerprint(),
        n_samples: dataset.n_samples(),
        view_dims: dataset.view_dims(),
        cells,
        aggregates,
    })
}

/// Loads the dataset named by `spec` and runs the protocol in the worker pool.
pub fn run(spec: &ExperimentSpec) -> Result<EvaluationReport> {
    let dataset = spec.source.load()?;
    worker_pool()?.install(|| run_on(&dataset, spec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub beta: f64,
    pub fraction: f64,
    pub k: usize,
    pub valid: usize,
    pub mean: Option<MetricSummary>,
    pub std: Option<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub reports: Vec<EvaluationReport>,
    pub summary: Vec<SweepRow>,
}

/// Default grid for both penalty coefficients.
pub fn default_grid() -> Vec<f64> {
    vec![0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0]
}

/// Runs every `(lambda, beta)` cell with the same split seeds.
pub fn sweep_on(
    dataset: &MultiViewDataset,
    spec: &ExperimentSpec,
    grid_lambda: &[f64],
    grid_beta: &[f64],
) -> Result<SweepReport> {
    if grid_lambda.is_empty() || grid_beta.is_empty() {
        return Err(Error::InvalidArgument("sweep grids must be non-empty".into()));
    }
    let cells: Vec<(f64, f64)> = grid_lambda
        .iter()
        .flat_map(|&l| grid_beta.iter().map(move |&b| (l, b)))
        .collect();
    let reports: Vec<EvaluationReport> = cells
        .par_iter()
        .map(|&(lambda, beta)| {
            let mut s = spec.clone();
            s.selector.lambda = lambda;
            s.selector.beta = beta;
            run_on(dataset, &s)
        })
        .collect::<Result<_>>()?;
    let summary = reports
        .iter()
        .flat_map(|r| {
            r.aggregates.iter().map(move |a| SweepRow {
                lambda: r.spec.selector.lambda,
                beta: r.spec.selector.beta,
                fraction: a.fraction,
                k: a.k,
                valid: a.valid,
                mean: a.mean,
                std: a.std,
            })
        })
        .collect();
    Ok(SweepReport { reports, summary })
}

pub fn sweep(spec: &ExperimentSpec, grid_lambda: &[f64], grid_beta: &[f64]) -> Result<SweepReport> {
    let dataset = spec.source.load()?;
    worker_pool()?.install(|| sweep_on(&dataset, spec, grid_lambda, grid_beta))
}

/// Header of the flat per-cell CSV.
pub const CSV_HEADER: &str =
    "fraction,repeat,lambda,beta,ap,auc,coverage,ranking_loss,seconds_select,seconds_eval";

/// Writes one CSV row per cell of every report. Failed cells leave the metric
/// fields empty.
pub fn write_cells_csv<'a, W: Write>(
    out: W,
    reports: impl IntoIterator<Item = &'a EvaluationReport>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Report(e.to_string());
    w.write_record(CSV_HEADER.split(',')).map_err(io)?;
    for report in reports {
        for c in &report.cells {
            let m = |f: fn(&MetricReport) -> f64| c.metrics.as_ref().map(f).map_or(String::new(), |v| v.to_string());
            w.write_record([
                c.fraction.to_string(),
                c.repeat.to_string(),
                c.lambda.to_string(),
                c.beta.to_string(),
                m(|x| x.ap),
                m(|x| x.auc),
                m(|x| x.coverage),
                m(|x| x.ranking_loss),
                format!("{:.6}", c.seconds_select),
                format!("{:.6}", c.seconds_eval),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Report(e.to_string()))
}

pub fn cells_csv_string<'a>(reports: impl IntoIterator<Item = &'a EvaluationReport>) -> Result<String> {
    let mut buf = Vec::new();
    write_cells_csv(&mut buf, reports)?;
    String::from_utf8(buf).map_err(|e| Error::Report(e.to_string()))
}
