//! Multi-view multi-label datasets: representation, z-scoring, CSV/manifest
//! ingestion, seeded train/test splits and synthetic planted-feature data.
//!
//! Feature matrices are stored column-major so that every feature column is a
//! contiguous slice; almost every downstream computation walks columns.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ShapeBuilder};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Identifies one feature column of a [`MultiViewDataset`].
///
/// The derived ordering is `(view, column)`, which is also the global feature
/// order used for tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureId {
    pub view: usize,
    pub column: usize,
}

impl FeatureId {
    pub fn new(view: usize, column: usize) -> Self {
        Self { view, column }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}:{}", self.view, self.column)
    }
}

/// One feature representation of the sample set (`n_samples x d_v`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureView {
    name: String,
    data: Array2<f64>,
    normalized: bool,
}

impl FeatureView {
    /// Builds a view, rejecting empty shapes and non-finite entries.
    pub fn new(name: impl Into<String>, data: Array2<f64>) -> Result<Self> {
        let name = name.into();
        let (n, d) = data.dim();
        if n == 0 || d == 0 {
            return Err(Error::Shape(format!(
                "view `{name}` must have at least one sample and one feature, got {n}x{d}"
            )));
        }
        check_finite(&name, &data)?;
        Ok(Self {
            name,
            data: to_column_major(data),
            normalized: false,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Contiguous slice of column `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n_samples();
        let all = self
            .data
            .as_slice_memory_order()
            .expect("feature views are stored contiguously");
        &all[j * n..(j + 1) * n]
    }

    fn select_rows(&self, rows: &[usize]) -> Self {
        let d = self.n_features();
        let mut out = Array2::zeros((rows.len(), d).f());
        for j in 0..d {
            let col = self.column(j);
            for (r, &i) in rows.iter().enumerate() {
                out[[r, j]] = col[i];
            }
        }
        Self {
            name: self.name.clone(),
            data: out,
            normalized: self.normalized,
        }
    }
}

fn to_column_major(data: Array2<f64>) -> Array2<f64> {
    if data.t().is_standard_layout() {
        return data;
    }
    let mut out = Array2::zeros(data.dim().f());
    out.assign(&data);
    out
}

fn check_finite(name: &str, data: &Array2<f64>) -> Result<()> {
    if let Some(((row, column), _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            view: name.to_string(),
            row,
            column,
        });
    }
    Ok(())
}

/// Per-column location and population scale of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation per column. Constant columns get
    /// a scale of 1 so they map to all zeros.
    pub fn fit(view: &FeatureView) -> Self {
        let n = view.n_samples() as f64;
        let mut means = Vec::with_capacity(view.n_features());
        let mut stds = Vec::with_capacity(view.n_features());
        for j in 0..view.n_features() {
            let col = view.column(j);
            let first = col[0];
            if col.iter().all(|&x| x == first) {
                means.push(first);
                stds.push(1.0);
                continue;
            }
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            means.push(mean);
            stds.push(if std > 0.0 { std } else { 1.0 });
        }
        Self { means, stds }
    }

    /// Applies `(x - mean) / std` column-wise. The result is flagged normalized.
    pub fn apply(&self, view: &FeatureView) -> Result<FeatureView> {
        if self.means.len() != view.n_features() {
            return Err(Error::Shape(format!(
                "standardizer has {} columns, view `{}` has {}",
                self.means.len(),
                view.name,
                view.n_features()
            )));
        }
        let (n, d) = view.data.dim();
        let mut out = Array2::zeros((n, d).f());
        for j in 0..d {
            let (m, s) = (self.means[j], self.stds[j]);
            for (i, &x) in view.column(j).iter().enumerate() {
                out[[i, j]] = (x - m) / s;
            }
        }
        check_finite(&view.name, &out)?;
        Ok(FeatureView {
            name: view.name.clone(),
            data: out,
            normalized: true,
        })
    }
}

/// Z-scores every column with its own population statistics.
pub fn zscore_normalize(view: &FeatureView) -> Result<FeatureView> {
    check_finite(&view.name, &view.data)?;
    Standardizer::fit(view).apply(view)
}

/// Per-view feature matrices sharing one binary label matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<FeatureView>,
    labels: Array2<u8>,
}

impl MultiViewDataset {
    pub fn new(views: Vec<FeatureView>, labels: Array2<u8>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Shape("dataset needs at least one view".into()));
        }
        let (n, c) = labels.dim();
        if c == 0 {
            return Err(Error::Shape("dataset needs at least one label".into()));
        }
        for v in &views {
            if v.n_samples() != n {
                return Err(Error::Shape(format!(
                    "view `{}` has {} rows, labels have {n}",
                    v.name,
                    v.n_samples()
                )));
            }
        }
        if let Some(((row, column), value)) = labels.indexed_iter().find(|(_, &y)| y > 1) {
            return Err(Error::InvalidArgument(format!(
                "label entry {value} at row {row}, column {column} is not binary"
            )));
        }
        Ok(Self { views, labels })
    }

    pub fn views(&self) -> &[FeatureView] {
        &self.views
    }

    pub fn view(&self, v: usize) -> &FeatureView {
        &self.views[v]
    }

    pub fn labels(&self) -> &Array2<u8> {
        &self.labels
    }

    pub fn labels_f64(&self) -> Array2<f64> {
        self.labels.mapv(f64::from)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.nrows()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.ncols()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(FeatureView::n_features).collect()
    }

    pub fn total_features(&self) -> usize {
        self.views.iter().map(FeatureView::n_features).sum()
    }

    pub fn is_normalized(&self) -> bool {
        self.views.iter().all(FeatureView::is_normalized)
    }

    pub fn contains(&self, id: FeatureId) -> bool {
        id.view < self.views.len() && id.column < self.views[id.view].n_features()
    }

    pub fn check_feature(&self, id: FeatureId) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::InvalidFeature {
                view: id.view,
                column: id.column,
            })
        }
    }

    /// Column of feature `id`. Panics on an out-of-range id.
    pub fn feature(&self, id: FeatureId) -> &[f64] {
        self.views[id.view].column(id.column)
    }

    /// All feature ids in global `(view, column)` order.
    pub fn feature_ids(&self) -> impl Iterator<Item = FeatureId> + '_ {
        self.views
            .iter()
            .enumerate()
            .flat_map(|(v, view)| (0..view.n_features()).map(move |j| FeatureId::new(v, j)))
    }

    /// Z-scores every view with statistics of this dataset.
    pub fn normalized(&self) -> Result<Self> {
        let views = self
            .views
            .iter()
            .map(zscore_normalize)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            views,
            labels: self.labels.clone(),
        })
    }

    pub fn fit_standardizers(&self) -> Vec<Standardizer> {
        self.views.iter().map(Standardizer::fit).collect()
    }

    pub fn apply_standardizers(&self, stats: &[Standardizer]) -> Result<Self> {
        if stats.len() != self.views.len() {
            return Err(Error::Shape(format!(
                "{} standardizers for {} views",
                stats.len(),
                self.views.len()
            )));
        }
        let views = self
            .views
            .iter()
            .zip(stats)
            .map(|(v, s)| s.apply(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            views,
            labels: self.labels.clone(),
        })
    }

    /// New dataset holding rows `rows` (in the given order) of every matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let n = self.n_samples();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::InvalidArgument(format!(
                "row {bad} out of range for {n} samples"
            )));
        }
        let views = self.views.iter().map(|v| v.select_rows(rows)).collect();
        let labels = self.labels.select(ndarray::Axis(0), rows);
        Ok(Self { views, labels })
    }

    /// Row-major `n x ids.len()` matrix of the given feature columns.
    pub fn feature_matrix(&self, ids: &[FeatureId]) -> Result<Array2<f64>> {
        for &id in ids {
            self.check_feature(id)?;
        }
        let n = self.n_samples();
        let mut out = Array2::zeros((n, ids.len()));
        for (k, &id) in ids.iter().enumerate() {
            for (i, &x) in self.feature(id).iter().enumerate() {
                out[[i, k]] = x;
            }
        }
        Ok(out)
    }

    /// SHA-256 over shapes, view names, feature bits and labels.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_samples() as u64).to_le_bytes());
        h.update((self.n_labels() as u64).to_le_bytes());
        for v in &self.views {
            h.update(v.name.as_bytes());
            h.update((v.n_features() as u64).to_le_bytes());
            for j in 0..v.n_features() {
                for &x in v.column(j) {
                    h.update(x.to_bits().to_le_bytes());
                }
            }
        }
        for &y in self.labels.iter() {
            h.update([y]);
        }
        to_hex(&h.finalize())
    }
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Disjoint train/test row indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Partition {
    /// Seeded random partition of `n` rows with `round(n * test_fraction)` test rows.
    pub fn random(n: usize, test_fraction: f64, seed: u64) -> Result<Self> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "test_fraction must lie in (0, 1), got {test_fraction}"
            )));
        }
        let n_test = (n as f64 * test_fraction).round() as usize;
        if n_test == 0 || n_test >= n {
            return Err(Error::InvalidArgument(format!(
                "split of {n} samples at test_fraction {test_fraction} leaves an empty partition"
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut test = idx[..n_test].to_vec();
        let mut train = idx[n_test..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        Ok(Self { train, test })
    }

    /// Hash of the test-row set, used to compare partitions across runs.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for &i in &self.test {
            h.update((i as u64).to_le_bytes());
        }
        to_hex(&h.finalize())[..16].to_string()
    }
}

/// Seeded train/test split applying one row partition to every matrix.
pub fn split(
    dataset: &MultiViewDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(MultiViewDataset, MultiViewDataset)> {
    let p = Partition::random(dataset.n_samples(), test_fraction, seed)?;
    Ok((dataset.select_rows(&p.train)?, dataset.select_rows(&p.test)?))
}

// ---------------------------------------------------------------------------
// Manifest + CSV ingestion

#[derive(Debug, Clone, PartialEq)]
struct Manifest {
    views: Vec<(String, PathBuf)>,
    labels: PathBuf,
    header: bool,
}

fn parse_manifest(path: &Path, text: &str) -> Result<Manifest> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let err = |line: usize, message: String| Error::Manifest {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut views = Vec::new();
    let mut labels = None;
    let mut header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match key {
            "view" => {
                let (name, file) = rest
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| err(i + 1, "expected `view <name> <csv-path>`".into()))?;
                views.push((name.to_string(), base.join(file.trim())));
            }
            "labels" => {
                if rest.is_empty() {
                    return Err(err(i + 1, "expected `labels <csv-path>`".into()));
                }
                if labels.replace(base.join(rest)).is_some() {
                    return Err(err(i + 1, "duplicate `labels` entry".into()));
                }
            }
            "header" => {
                header = match rest {
                    "true" => true,
                    "false" => false,
                    other => return Err(err(i + 1, format!("header must be true|false, got `{other}`"))),
                }
            }
            other => return Err(err(i + 1, format!("unknown key `{other}`"))),
        }
    }
    if views.is_empty() {
        return Err(err(0, "no `view` entries".into()));
    }
    let labels = labels.ok_or_else(|| err(0, "missing `labels` entry".into()))?;
    Ok(Manifest {
        views,
        labels,
        header,
    })
}

fn read_csv_matrix(path: &Path, header: bool) -> Result<Array2<f64>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            row,
            column: 0,
            message: e.to_string(),
        })?;
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Csv {
                    path: path.to_path_buf(),
                    row,
                    column: record.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        for (c, field) in record.iter().enumerate() {
            let x: f64 = field.parse().map_err(|_| Error::Csv {
                path: path.to_path_buf(),
                row,
                column: c + 1,
                message: format!("`{field}` is not a number"),
            })?;
            if !x.is_finite() {
                return Err(Error::Csv {
                    path: path.to_path_buf(),
                    row,
                    column: c + 1,
                    message: format!("`{field}` is not finite"),
                });
            }
            values.push(x);
        }
        rows += 1;
    }
    let width = width.unwrap_or(0);
    if rows == 0 || width == 0 {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            row: 0,
            column: 0,
            message: "no data rows".into(),
        });
    }
    Ok(Array2::from_shape_vec((rows, width), values).expect("row widths checked"))
}

/// Loads a dataset described by a manifest file.
///
/// Manifest lines: `view <name> <csv-path>` (in view order), `labels <csv-path>`
/// and optionally `header true`. Relative paths resolve against the manifest's
/// directory; `#` starts a comment line.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<MultiViewDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest = parse_manifest(path, &text)?;

    let raw_labels = read_csv_matrix(&manifest.labels, manifest.header)?;
    let n = raw_labels.nrows();
    let mut labels = Array2::<u8>::zeros(raw_labels.dim());
    for ((i, j), &y) in raw_labels.indexed_iter() {
        labels[[i, j]] = if y == 0.0 {
            0
        } else if y == 1.0 {
            1
        } else {
            return Err(Error::Csv {
                path: manifest.labels.clone(),
                row: i + 1,
                column: j + 1,
                message: format!("label value {y} is not 0 or 1"),
            });
        };
    }

    let mut views = Vec::with_capacity(manifest.views.len());
    for (name, file) in &manifest.views {
        let data = read_csv_matrix(file, manifest.header)?;
        if data.nrows() != n {
            return Err(Error::Csv {
                path: file.clone(),
                row: data.nrows().min(n) + 1,
                column: 0,
                message: format!(
                    "view `{name}` has {} rows but the label file has {n}",
                    data.nrows()
                ),
            });
        }
        views.push(FeatureView::new(name.clone(), data)?);
    }
    MultiViewDataset::new(views, labels)
}

/// Writes `dataset` as one CSV per view plus `labels.csv` and `manifest.txt`
/// into `dir`, returning the manifest path. Values are written with 17
/// significant digits so reloading is bit-exact.
pub fn write_manifest(dataset: &MultiViewDataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    for (v, view) in dataset.views.iter().enumerate() {
        let file = format!("view{v}.csv");
        write_rows(&dir.join(&file), view.n_samples(), view.n_features(), |i, j| {
            format!("{:.16e}", view.data[[i, j]])
        })?;
        manifest.push_str(&format!("view {} {file}\n", view.name));
    }
    let labels = &dataset.labels;
    write_rows(&dir.join("labels.csv"), labels.nrows(), labels.ncols(), |i, j| {
        labels[[i, j]].to_string()
    })?;
    manifest.push_str("labels labels.csv\n");
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn write_rows(
    path: &Path,
    rows: usize,
    cols: usize,
    cell: impl Fn(usize, usize) -> String,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for i in 0..rows {
        let line: Vec<String> = (0..cols).map(|j| cell(i, j)).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Parameters of a synthetic planted-feature dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_samples: usize,
    pub view_dims: Vec<usize>,
    pub n_labels: usize,
    /// Informative standard-normal features driving the labels.
    pub n_planted: usize,
    /// Noisy copies of planted columns placed elsewhere.
    pub n_duplicates: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let total: usize = self.view_dims.iter().sum();
        if self.n_samples < 2
            || self.view_dims.is_empty()
            || self.view_dims.contains(&0)
            || self.n_labels == 0
            || self.n_planted == 0
        {
            return Err(Error::InvalidArgument(format!(
                "synthetic spec needs n_samples >= 2 and positive dims, labels and planted count: {self:?}"
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise_std must be finite and >= 0, got {}",
                self.noise_std
            )));
        }
        if self.n_planted + self.n_duplicates > total {
            return Err(Error::InvalidArgument(format!(
                "{} planted + {} duplicate features exceed {total} total dims",
                self.n_planted, self.n_duplicates
            )));
        }
        Ok(())
    }
}

/// A generated dataset with ground truth about which columns matter.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: MultiViewDataset,
    /// Planted features, in generation order.
    pub planted: Vec<FeatureId>,
    /// `(duplicate, source)` pairs; every source is a planted feature.
    pub duplicates: Vec<(FeatureId, FeatureId)>,
}

/// Generates a dataset from `spec`, deterministically per seed.
///
/// Every column starts as N(0, 1) noise. Planted and duplicate positions are a
/// seeded random draw over all columns. Duplicate `j` copies planted feature
/// `j mod n_planted` plus `noise_std * N(0, 1)`. Label `l` thresholds a random
/// +/-1 weighted sum of the planted features assigned to it (planted `j` goes to
/// label `j mod n_labels`) at its median.
pub fn synth_generate(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let n = spec.n_samples;
    let total: usize = spec.view_dims.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut columns: Vec<Vec<f64>> = (0..total)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();

    let mut positions: Vec<usize> = (0..total).collect();
    positions.shuffle(&mut rng);
    let planted_pos = positions[..spec.n_planted].to_vec();
    let dup_pos = positions[spec.n_planted..spec.n_planted + spec.n_duplicates].to_vec();

    let mut dup_sources = Vec::with_capacity(dup_pos.len());
    for (j, &pos) in dup_pos.iter().enumerate() {
        let src = planted_pos[j % spec.n_planted];
        let copy: Vec<f64> = columns[src]
            .iter()
            .map(|&x| x + spec.noise_std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        columns[pos] = copy;
        dup_sources.push(src);
    }

    let mut labels = Array2::<u8>::zeros((n, spec.n_labels));
    for l in 0..spec.n_labels {
        let mut members: Vec<usize> = (0..spec.n_planted)
            .filter(|j| j % spec.n_labels == l)
            .collect();
        if members.is_empty() {
            members.push(l % spec.n_planted);
        }
        let weights: Vec<f64> = members
            .iter()
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let score: Vec<f64> = (0..n)
            .map(|i| {
                members
                    .iter()
                    .zip(&weights)
                    .map(|(&j, w)| w * columns[planted_pos[j]][i])
                    .sum()
            })
            .collect();
        let med = median(&score);
        for (i, &s) in score.iter().enumerate() {
            labels[[i, l]] = u8::from(s > med);
        }
    }

    let to_id = |global: usize| {
        let mut rem = global;
        for (v, &d) in spec.view_dims.iter().enumerate() {
            if rem < d {
                return FeatureId::new(v, rem);
            }
            rem -= d;
        }
        unreachable!("global index within total dims")
    };

    let mut views = Vec::with_capacity(spec.view_dims.len());
    let mut offset = 0;
    for (v, &d) in spec.view_dims.iter().enumerate() {
        let mut data = Array2::zeros((n, d).f());
        for j in 0..d {
            for (i, &x) in columns[offset + j].iter().enumerate() {
                data[[i, j]] = x;
            }
        }
        views.push(FeatureView::new(format!("view{v}"), data)?);
        offset += d;
    }

    Ok(Synthetic {
        dataset: MultiViewDataset::new(views, labels)?,
        planted: planted_pos.iter().map(|&p| to_id(p)).collect(),
        duplicates: dup_pos
            .iter()
            .zip(&dup_sources)
            .map(|(&d, &s)| (to_id(d), to_id(s)))
            .collect(),
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn view(data: Array2<f64>) -> FeatureView {
        FeatureView::new("v", data).unwrap()
    }

    #[test]
    fn zscore_matches_direct_formula() {
        let v = zscore_normalize(&view(array![[1.0], [2.0], [3.0]])).unwrap();
        // population sigma = sqrt(2/3)
        let s = (2.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(s, 0.8165, epsilon = 1e-4);
        let expected = [-1.0 / s, 0.0, 1.0 / s];
        for (a, b) in v.column(0).iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(v.column(0)[2], 1.2247, epsilon = 1e-4);
        assert!(v.is_normalized());
    }

    #[test]
    fn constant_column_maps_to_zeros() {
        let v = zscore_normalize(&view(array![[5.0, 0.1], [5.0, 0.1], [5.0, 0.1]])).unwrap();
        assert_eq!(v.column(0), &[0.0, 0.0, 0.0]);
        assert_eq!(v.column(1), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn normalization_is_idempotent() {
        let syn = synth_generate(&SynthSpec {
            n_samples: 50,
            view_dims: vec![4, 3],
            n_labels: 2,
            n_planted: 2,
            n_duplicates: 1,
            noise_std: 0.1,
            seed: 3,
        })
        .unwrap();
        let once = syn.dataset.normalized().unwrap();
        let twice = once.normalized().unwrap();
        for (a, b) in once.views().iter().zip(twice.views()) {
            for (x, y) in a.data().iter().zip(b.data().iter()) {
                assert!((x - y).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn non_finite_rejected_with_location() {
        let err = FeatureView::new("bad", array![[1.0, 2.0], [f64::NAN, 3.0]]).unwrap_err();
        match err {
            Error::NonFinite { view, row, column } => {
                assert_eq!((view.as_str(), row, column), ("bad", 1, 0));
            }
            other => panic!("unexpected {other:?}"),
        }
        let overflow = view(array![[f64::MAX], [f64::MAX / 2.0]]);
        assert!(matches!(
            zscore_normalize(&overflow),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn dataset_rejects_row_mismatch() {
        let labels = Array2::<u8>::zeros((3, 1));
        let err = MultiViewDataset::new(vec![view(Array2::zeros((2, 2)))], labels).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn split_partitions_rows() {
        let p = Partition::random(10, 0.3, 7).unwrap();
        assert_eq!((p.train.len(), p.test.len()), (7, 3));
        let mut all: Vec<usize> = p.train.iter().chain(&p.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(p, Partition::random(10, 0.3, 7).unwrap());
    }

    #[test]
    fn split_seeds_differ() {
        let parts: Vec<_> = (0..5)
            .map(|s| Partition::random(10, 0.3, s).unwrap())
            .collect();
        let differing = parts
            .iter()
            .enumerate()
            .any(|(i, a)| parts[i + 1..].iter().any(|b| a != b));
        assert!(differing);
    }

    #[test]
    fn split_rejects_degenerate() {
        assert!(Partition::random(10, 0.0, 1).is_err());
        assert!(Partition::random(10, 1.0, 1).is_err());
        assert!(Partition::random(3, 0.1, 1).is_err());
    }

    #[test]
    fn split_applies_same_rows_everywhere() {
        let syn = synth_generate(&SynthSpec {
            n_samples: 20,
            view_dims: vec![2, 3],
            n_labels: 2,
            n_planted: 1,
            n_duplicates: 0,
            noise_std: 0.0,
            seed: 9,
        })
        .unwrap();
        let ds = &syn.dataset;
        let p = Partition::random(20, 0.3, 4).unwrap();
        let (train, test) = split(ds, 0.3, 4).unwrap();
        for (r, &i) in p.test.iter().enumerate() {
            assert_eq!(test.view(1).column(2)[r], ds.view(1).column(2)[i]);
            assert_eq!(test.labels().row(r), ds.labels().row(i));
        }
        assert_eq!(train.n_samples(), 14);
    }

    #[test]
    fn synth_duplicates_are_exact_copies_without_noise() {
        let syn = synth_generate(&SynthSpec {
            n_samples: 100,
            view_dims: vec![10, 10],
            n_labels: 3,
            n_planted: 4,
            n_duplicates: 3,
            noise_std: 0.0,
            seed: 1,
        })
        .unwrap();
        for &(dup, src) in &syn.duplicates {
            assert_eq!(syn.dataset.feature(dup), syn.dataset.feature(src));
            let r = crate::redundancy::pearson(syn.dataset.feature(dup), syn.dataset.feature(src))
                .unwrap();
            assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn synth_is_deterministic() {
        let spec = SynthSpec {
            n_samples: 40,
            view_dims: vec![5, 6],
            n_labels: 2,
            n_planted: 3,
            n_duplicates: 2,
            noise_std: 0.2,
            seed: 1,
        };
        let a = synth_generate(&spec).unwrap();
        let b = synth_generate(&spec).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.planted, b.planted);
        assert_eq!(a.dataset.fingerprint(), b.dataset.fingerprint());
    }

    #[test]
    fn synth_labels_are_balanced() {
        let syn = synth_generate(&SynthSpec {
            n_samples: 200,
            view_dims: vec![8],
            n_labels: 4,
            n_planted: 4,
            n_duplicates: 0,
            noise_std: 0.0,
            seed: 5,
        })
        .unwrap();
        for col in syn.dataset.labels().columns() {
            let pos: usize = col.iter().map(|&y| y as usize).sum();
            assert_eq!(pos, 100);
        }
    }

    #[test]
    fn synth_rejects_overfull_spec() {
        let spec = SynthSpec {
            n_samples: 10,
            view_dims: vec![2, 2],
            n_labels: 1,
            n_planted: 3,
            n_duplicates: 2,
            noise_std: 0.0,
            seed: 0,
        };
        assert!(synth_generate(&spec).is_err());
    }

    #[test]
    fn manifest_parse_errors_carry_line() {
        let err = parse_manifest(Path::new("m.txt"), "view a a.csv\nbogus x\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(parse_manifest(Path::new("m.txt"), "view a a.csv\n").is_err());
    }
}
