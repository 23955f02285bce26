//! Datasets: delimited-text loading, synthetic generators, min-max scaling and
//! train/test splitting.
//!
//! A persisted dataset is a comma-separated file (header row naming the
//! columns) plus a `<file>.meta` sidecar in `key=value` form holding the
//! normalization bounds, the generator seed and which trailing columns carry
//! labels or the visualization color scalar.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kv::{join_list, KvDoc};
use crate::rng::{stream_rng, SamplerRng};
use crate::scalar::Scalar;

/// Feature matrix (rows = instances) with optional labels and per-feature bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub features: Array2<T>,
    /// Per-feature minimum used for scaling. Equals the column minimum of the
    /// raw data until [`normalize`] or [`apply_bounds`] is called.
    pub norm_min: Vec<T>,
    pub norm_max: Vec<T>,
    /// True once `features` have been mapped into `[0, 1]`.
    pub normalized: bool,
    /// Class labels, used only by the downstream classification benchmark.
    pub labels: Option<Vec<i64>>,
    /// Visualization scalar (the Swiss Roll angle).
    pub color: Option<Vec<T>>,
    pub seed: Option<u64>,
}

impl<T: Scalar> Dataset<T> {
    /// Wrap raw features; bounds are the column extremes.
    pub fn from_features(features: Array2<T>) -> Self {
        let (norm_min, norm_max) = column_bounds(&features);
        Self {
            features,
            norm_min,
            norm_max,
            normalized: false,
            labels: None,
            color: None,
            seed: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.n_instances() {
            return Err(Error::Dimension(format!(
                "{} labels for {} instances",
                labels.len(),
                self.n_instances()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n_instances(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Columns whose bounds coincide; their normalized values are all zero.
    pub fn degenerate_columns(&self) -> Vec<usize> {
        self.norm_min
            .iter()
            .zip(&self.norm_max)
            .enumerate()
            .filter(|(_, (lo, hi))| lo >= hi)
            .map(|(j, _)| j)
            .collect()
    }

    /// Rows at `indices`, keeping bounds and flags.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), indices),
            norm_min: self.norm_min.clone(),
            norm_max: self.norm_max.clone(),
            normalized: self.normalized,
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            color: self
                .color
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
            seed: self.seed,
        }
    }
}

fn column_bounds<T: Scalar>(features: &Array2<T>) -> (Vec<T>, Vec<T>) {
    let mut mins = Vec::with_capacity(features.ncols());
    let mut maxs = Vec::with_capacity(features.ncols());
    for col in features.columns() {
        let (lo, hi) = col_extremes(col);
        mins.push(lo);
        maxs.push(hi);
    }
    (mins, maxs)
}

fn col_extremes<T: Scalar>(col: ArrayView1<'_, T>) -> (T, T) {
    if col.is_empty() {
        return (T::zero(), T::zero());
    }
    col.iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Per-feature min-max scaling onto `[0, 1]` with bounds taken from the data
/// itself. Constant columns become zeros and are reported by
/// [`Dataset::degenerate_columns`].
pub fn normalize<T: Scalar>(dataset: &Dataset<T>) -> Dataset<T> {
    let (mins, maxs) = column_bounds(&dataset.features);
    apply_bounds(dataset, &mins, &maxs)
}

/// Scale with externally supplied bounds (e.g. those of the training split).
/// Values outside the bounds are clamped into `[0, 1]`.
pub fn apply_bounds<T: Scalar>(dataset: &Dataset<T>, mins: &[T], maxs: &[T]) -> Dataset<T> {
    let mut features = dataset.features.clone();
    for (j, mut col) in features.columns_mut().into_iter().enumerate() {
        let (lo, hi) = (mins[j], maxs[j]);
        let range = hi - lo;
        if range > T::zero() {
            col.mapv_inplace(|v| ((v - lo) / range).max(T::zero()).min(T::one()));
        } else {
            col.fill(T::zero());
        }
    }
    Dataset {
        features,
        norm_min: mins.to_vec(),
        norm_max: maxs.to_vec(),
        normalized: true,
        labels: dataset.labels.clone(),
        color: dataset.color.clone(),
        seed: dataset.seed,
    }
}

/// Map normalized features back to the original scale. Degenerate columns
/// come back as their constant value.
pub fn denormalize<T: Scalar>(dataset: &Dataset<T>) -> Dataset<T> {
    if !dataset.normalized {
        return dataset.clone();
    }
    let mut features = dataset.features.clone();
    for (j, mut col) in features.columns_mut().into_iter().enumerate() {
        let (lo, hi) = (dataset.norm_min[j], dataset.norm_max[j]);
        col.mapv_inplace(|v| lo + v * (hi - lo));
    }
    Dataset {
        features,
        normalized: false,
        ..dataset.clone()
    }
}

/// Train/test partition sizes and the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_count: usize,
    pub test_count: usize,
    pub shuffle_seed: u64,
}

/// Row order used by [`split`]: a seeded Fisher-Yates shuffle of `0..n`.
pub fn shuffled_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng: SamplerRng = stream_rng(seed, 0);
    order.shuffle(&mut rng);
    order
}

/// Shuffle, take disjoint train/test blocks, and normalize both with bounds
/// computed on the training block alone.
pub fn split<T: Scalar>(dataset: &Dataset<T>, spec: SplitSpec) -> Result<(Dataset<T>, Dataset<T>)> {
    let n = dataset.n_instances();
    if spec.train_count + spec.test_count > n {
        return Err(Error::Config(format!(
            "split {}+{} exceeds {} instances",
            spec.train_count, spec.test_count, n
        )));
    }
    if spec.train_count == 0 {
        return Err(Error::Config(
            "split needs at least one training instance".into(),
        ));
    }
    let raw = denormalize(dataset);
    let order = shuffled_order(n, spec.shuffle_seed);
    let train_raw = raw.select_rows(&order[..spec.train_count]);
    let test_raw = raw.select_rows(&order[spec.train_count..spec.train_count + spec.test_count]);
    let (mins, maxs) = column_bounds(&train_raw.features);
    Ok((
        apply_bounds(&train_raw, &mins, &maxs),
        apply_bounds(&test_raw, &mins, &maxs),
    ))
}

/// Points on a Swiss Roll: angle `u ~ U[1.5π, 4.5π]`, height `v ~ U[0, 21]`,
/// `(u cos u, v, u sin u)` plus isotropic Gaussian noise. The angle is kept as
/// the color scalar.
pub fn generate_swiss_roll<T: Scalar>(
    n_points: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if n_points == 0 {
        return Err(Error::Empty("swiss roll needs at least one point".into()));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::Config(format!(
            "noise_sd must be >= 0, got {noise_sd}"
        )));
    }
    let mut rng = stream_rng(seed, 0);
    let mut features = Array2::<T>::zeros((n_points, 3));
    let mut color = Vec::with_capacity(n_points);
    for mut row in features.rows_mut() {
        let u = 1.5 * PI * (1.0 + 2.0 * rng.random::<f64>());
        let v = 21.0 * rng.random::<f64>();
        let point = swiss_roll_point(u, v);
        for (k, &p) in point.iter().enumerate() {
            let noise = if noise_sd > 0.0 {
                noise_sd * f64::standard_normal(&mut rng)
            } else {
                0.0
            };
            row[k] = T::of(p + noise);
        }
        color.push(T::of(u));
    }
    let mut ds = Dataset::from_features(features);
    ds.color = Some(color);
    ds.seed = Some(seed);
    Ok(ds)
}

/// Noise-free Swiss Roll coordinates for angle `u` and height `v`.
pub fn swiss_roll_point(u: f64, v: f64) -> [f64; 3] {
    [u * u.cos(), v, u * u.sin()]
}

/// Madelon-style classification data: 2^5 = 32 Gaussian clusters on the
/// vertices of a five-dimensional hypercube, each cluster randomly labelled
/// +1/-1, fifteen random linear combinations of the five coordinates and
/// `n_features - 20` pure-noise distractor columns.
pub fn generate_madelon_like<T: Scalar>(
    n_instances: usize,
    n_features: usize,
    seed: u64,
) -> Result<Dataset<T>> {
    const BASE: usize = 5;
    const INFORMATIVE: usize = 20;
    if n_instances == 0 {
        return Err(Error::Empty(
            "madelon-like data needs at least one instance".into(),
        ));
    }
    if n_features < INFORMATIVE {
        return Err(Error::Config(format!(
            "madelon-like data needs at least {INFORMATIVE} features, got {n_features}"
        )));
    }
    let mut rng = stream_rng(seed, 0);
    let n_clusters = 1usize << BASE;
    let cluster_labels: Vec<i64> = (0..n_clusters)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    let mixing: Vec<[f64; BASE]> = (0..INFORMATIVE - BASE)
        .map(|_| std::array::from_fn(|_| 2.0 * rng.random::<f64>() - 1.0))
        .collect();
    let mut features = Array2::<T>::zeros((n_instances, n_features));
    let mut labels = Vec::with_capacity(n_instances);
    for (i, mut row) in features.rows_mut().into_iter().enumerate() {
        let cluster = i % n_clusters;
        labels.push(cluster_labels[cluster]);
        let base: [f64; BASE] = std::array::from_fn(|b| {
            let vertex = if cluster >> b & 1 == 1 { 1.0 } else { -1.0 };
            vertex + f64::standard_normal(&mut rng)
        });
        for (b, &v) in base.iter().enumerate() {
            row[b] = T::of(v);
        }
        for (r, w) in mixing.iter().enumerate() {
            row[BASE + r] = T::of(w.iter().zip(&base).map(|(a, b)| a * b).sum());
        }
        for j in INFORMATIVE..n_features {
            row[j] = T::of(f64::standard_normal(&mut rng));
        }
    }
    // Interleave informative and distractor columns the way the original data set does.
    let mut cols: Vec<usize> = (0..n_features).collect();
    cols.shuffle(&mut rng);
    let features = features.select(Axis(1), &cols);
    let mut ds = Dataset::from_features(features).with_labels(labels)?;
    ds.seed = Some(seed);
    Ok(ds)
}

/// Labelled isotropic Gaussian clusters with centers `separation` apart along
/// successive coordinate axes.
pub fn generate_clusters<T: Scalar>(
    n_per_class: usize,
    n_classes: usize,
    n_features: usize,
    separation: f64,
    sd: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if n_per_class == 0 || n_classes == 0 || n_features == 0 {
        return Err(Error::Empty(
            "cluster toy needs classes, points and features".into(),
        ));
    }
    let mut rng = stream_rng(seed, 0);
    let n = n_per_class * n_classes;
    let mut features = Array2::<T>::zeros((n, n_features));
    let mut labels = Vec::with_capacity(n);
    for (i, mut row) in features.rows_mut().into_iter().enumerate() {
        let class = i % n_classes;
        labels.push(class as i64);
        for (j, cell) in row.iter_mut().enumerate() {
            let center = if j == class % n_features {
                separation * (class / n_features + 1) as f64
            } else {
                0.0
            };
            *cell = T::of(center + sd * f64::standard_normal(&mut rng));
        }
    }
    let mut ds = Dataset::from_features(features).with_labels(labels)?;
    ds.seed = Some(seed);
    Ok(ds)
}

/// Read a comma-separated numeric file. A first row containing any
/// non-numeric cell is treated as a header. When `has_labels` is set the
/// column `label_column` is removed from the features and parsed as integer
/// labels.
pub fn load_csv<T: Scalar>(
    path: &Path,
    has_labels: bool,
    label_column: usize,
) -> Result<Dataset<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table = parse_table(path, &text)?;
    let n_cols = table.first().map_or(0, Vec::len);
    if table.is_empty() || n_cols == 0 {
        return Err(Error::format(path, "no data rows"));
    }
    if has_labels && label_column >= n_cols {
        return Err(Error::format(
            path,
            format!("label column {label_column} but only {n_cols} columns"),
        ));
    }
    let n_feat = if has_labels { n_cols - 1 } else { n_cols };
    let mut features = Array2::<T>::zeros((table.len(), n_feat));
    let mut labels = Vec::with_capacity(if has_labels { table.len() } else { 0 });
    for (i, row) in table.iter().enumerate() {
        let mut k = 0;
        for (j, &v) in row.iter().enumerate() {
            if has_labels && j == label_column {
                labels.push(v.round() as i64);
            } else {
                features[[i, k]] = T::of(v);
                k += 1;
            }
        }
    }
    let ds = Dataset::from_features(features);
    if has_labels {
        ds.with_labels(labels)
    } else {
        Ok(ds)
    }
}

/// Parse rows of f64 cells, skipping an auto-detected header. Rows are
/// reported 1-based as they appear in the file.
fn parse_table(path: &Path, text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut expected: Option<usize> = None;
    let mut first = true;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if first {
            first = false;
            if cells.iter().any(|c| c.parse::<f64>().is_err()) {
                expected = Some(cells.len());
                continue;
            }
        }
        match expected {
            Some(n) if n != cells.len() => {
                return Err(Error::RaggedRow {
                    path: path.to_path_buf(),
                    row: lineno + 1,
                    expected: n,
                    found: cells.len(),
                })
            }
            None => expected = Some(cells.len()),
            _ => {}
        }
        let mut parsed = Vec::with_capacity(cells.len());
        for (j, cell) in cells.iter().enumerate() {
            let v = cell.parse::<f64>().map_err(|_| Error::NonNumeric {
                path: path.to_path_buf(),
                row: lineno + 1,
                column: j + 1,
                cell: cell.to_string(),
            })?;
            parsed.push(v);
        }
        rows.push(parsed);
    }
    Ok(rows)
}

/// Sidecar path for a dataset file: `<file>.meta`.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

/// Write features (then `label`, then `color` columns when present) with a
/// header row, and the metadata sidecar.
pub fn save_dataset<T: Scalar>(dataset: &Dataset<T>, path: &Path) -> Result<()> {
    let d = dataset.n_features();
    let mut out = String::new();
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    if dataset.labels.is_some() {
        header.push("label".into());
    }
    if dataset.color.is_some() {
        header.push("color".into());
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, row) in dataset.features.rows().into_iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        if let Some(labels) = &dataset.labels {
            let _ = write!(out, ",{}", labels[i]);
        }
        if let Some(color) = &dataset.color {
            let _ = write!(out, ",{}", color[i]);
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))?;

    let mut meta = KvDoc::new();
    meta.set("format", "ptbae-dataset-v1");
    meta.set("scalar", T::NAME);
    meta.set("n_instances", dataset.n_instances());
    meta.set("n_features", d);
    meta.set("normalized", dataset.normalized);
    meta.set("has_labels", dataset.labels.is_some());
    meta.set("has_color", dataset.color.is_some());
    meta.set("norm_min", join_list(&dataset.norm_min));
    meta.set("norm_max", join_list(&dataset.norm_max));
    meta.set(
        "degenerate_columns",
        join_list(&dataset.degenerate_columns()),
    );
    meta.set(
        "seed",
        dataset.seed.map(|s| s.to_string()).unwrap_or_default(),
    );
    meta.write(&meta_path(path))
}

/// Read a dataset written by [`save_dataset`]. Without a sidecar the file is
/// read as plain unlabelled features.
pub fn load_dataset<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    let meta_file = meta_path(path);
    if !meta_file.exists() {
        return load_csv(path, false, 0);
    }
    let meta = KvDoc::read(&meta_file)?;
    let bad = |m: String| Error::format(&meta_file, m);
    let d: usize = meta
        .parsed("n_features")
        .map_err(bad)?
        .ok_or_else(|| Error::format(&meta_file, "missing n_features"))?;
    let has_labels = meta
        .parsed::<bool>("has_labels")
        .map_err(bad)?
        .unwrap_or(false);
    let has_color = meta
        .parsed::<bool>("has_color")
        .map_err(bad)?
        .unwrap_or(false);
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table = parse_table(path, &text)?;
    let width = d + usize::from(has_labels) + usize::from(has_color);
    if let Some(row) = table.first() {
        if row.len() != width {
            return Err(Error::format(
                path,
                format!(
                    "expected {width} columns from metadata, found {}",
                    row.len()
                ),
            ));
        }
    }
    let mut features = Array2::<T>::zeros((table.len(), d));
    let mut labels = Vec::new();
    let mut color = Vec::new();
    for (i, row) in table.iter().enumerate() {
        for j in 0..d {
            features[[i, j]] = T::of(row[j]);
        }
        if has_labels {
            labels.push(row[d].round() as i64);
        }
        if has_color {
            color.push(T::of(row[width - 1]));
        }
    }
    let mut ds = Dataset::from_features(features);
    if has_labels {
        ds = ds.with_labels(labels)?;
    }
    if has_color {
        ds.color = Some(color);
    }
    ds.normalized = meta
        .parsed::<bool>("normalized")
        .map_err(bad)?
        .unwrap_or(false);
    if let Some(mins) = meta.parsed_list::<T>("norm_min").map_err(bad)? {
        if mins.len() == d {
            ds.norm_min = mins;
        }
    }
    if let Some(maxs) = meta.parsed_list::<T>("norm_max").map_err(bad)? {
        if maxs.len() == d {
            ds.norm_max = maxs;
        }
    }
    ds.seed = meta
        .get("seed")
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u64>())
        .transpose()
        .map_err(|_| Error::format(&meta_file, "bad seed"))?;
    Ok(ds)
}
