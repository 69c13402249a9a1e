//! Datasets, CSV ingestion, feature scaling and the synthetic generators.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{FilterError, Result};
use crate::export::fmt_real;

/// `m` samples in `n` dimensions, with optional ground-truth classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Array2<f64>,
    labels: Option<Vec<usize>>,
    name: String,
}

impl Dataset {
    /// Validates shape, finiteness and label contiguity.
    pub fn new(
        name: impl Into<String>,
        points: Array2<f64>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let (m, n) = points.dim();
        if m == 0 || n == 0 {
            return Err(FilterError::InvalidDataset(format!(
                "need at least one sample and one feature, got {m}x{n}"
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(FilterError::InvalidDataset("non-finite entry".into()));
        }
        if let Some(labels) = &labels {
            if labels.len() != m {
                return Err(FilterError::InvalidDataset(format!(
                    "{} labels for {m} samples",
                    labels.len()
                )));
            }
            let k = labels.iter().max().map_or(0, |&c| c + 1);
            let mut seen = vec![false; k];
            for &c in labels {
                seen[c] = true;
            }
            if seen.iter().any(|s| !s) {
                return Err(FilterError::InvalidDataset(
                    "class labels are not contiguous from 0".into(),
                ));
            }
        }
        Ok(Self {
            points,
            labels,
            name: name.into(),
        })
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn sample(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    /// Number of distinct classes, when labels are present.
    pub fn num_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().max().map_or(0, |&c| c + 1))
    }

    /// Largest pairwise Euclidean distance between samples.
    pub fn diameter(&self) -> f64 {
        diameter(&self.points)
    }

    pub fn with_points(&self, points: Array2<f64>) -> Result<Self> {
        Self::new(self.name.clone(), points, self.labels.clone())
    }

    /// Writes one sample per row, features then label (if any), with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("x{j}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header).map_err(csv_write_err)?;
        for (i, row) in self.points.outer_iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|&v| fmt_real(v)).collect();
            if let Some(labels) = &self.labels {
                rec.push(labels[i].to_string());
            }
            w.write_record(&rec).map_err(csv_write_err)?;
        }
        w.flush().map_err(|source| FilterError::Io {
            path: "<output>".into(),
            source,
        })?;
        Ok(())
    }
}

fn csv_write_err(source: csv::Error) -> FilterError {
    FilterError::Csv {
        path: "<output>".into(),
        source,
    }
}

pub(crate) fn diameter(points: &Array2<f64>) -> f64 {
    let m = points.nrows();
    let mut best = 0.0_f64;
    for i in 0..m {
        let xi = points.row(i);
        for j in (i + 1)..m {
            let d2: f64 = xi
                .iter()
                .zip(points.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            best = best.max(d2);
        }
    }
    best.sqrt()
}

/// Options for [`load_csv_with`].
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Column holding the class label, if any.
    pub label_column: Option<usize>,
    /// Columns to skip entirely (e.g. sample identifiers).
    pub ignore_columns: Vec<usize>,
}

/// A loaded dataset plus the number of rows discarded for missing values.
#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub dataset: Dataset,
    pub dropped_rows: usize,
}

/// Loads a comma-separated file. See [`load_csv_with`].
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<usize>) -> Result<CsvLoad> {
    load_csv_with(
        path,
        &CsvOptions {
            label_column,
            ignore_columns: Vec::new(),
        },
    )
}

/// Loads a comma-separated numeric file.
///
/// A first row whose feature cells are all non-numeric is treated as a header.
/// Rows with a missing or unparseable feature cell are dropped. Labels are
/// mapped onto `0..k`: numerically sorted when every label is an integer,
/// otherwise in order of first appearance.
pub fn load_csv_with(path: impl AsRef<Path>, options: &CsvOptions) -> Result<CsvLoad> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| FilterError::Csv {
            path: path.to_path_buf(),
            source,
        })?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut dropped = 0usize;
    let mut columns: Option<usize> = None;

    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|source| FilterError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let width = record.len();
        if columns.is_none() {
            if let Some(lc) = options.label_column {
                if lc >= width {
                    return Err(FilterError::LabelColumnOutOfRange {
                        column: lc,
                        columns: width,
                    });
                }
            }
            columns = Some(width);
        }
        let is_feature =
            |c: usize| Some(c) != options.label_column && !options.ignore_columns.contains(&c);
        let parsed: Vec<Option<f64>> = record
            .iter()
            .enumerate()
            .filter(|(c, _)| is_feature(*c))
            .map(|(_, cell)| cell.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        if line == 0 && !parsed.is_empty() && parsed.iter().all(Option::is_none) {
            continue;
        }
        if parsed.is_empty() {
            return Err(FilterError::InvalidDataset("no feature columns".into()));
        }
        if parsed.iter().any(Option::is_none) {
            dropped += 1;
            continue;
        }
        rows.push(parsed.into_iter().flatten().collect());
        if let Some(lc) = options.label_column {
            raw_labels.push(record[lc].to_string());
        }
    }

    if rows.is_empty() {
        return Err(FilterError::NoUsableRows(path.to_path_buf()));
    }
    let n = rows[0].len();
    let m = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let points = Array2::from_shape_vec((m, n), flat)
        .map_err(|e| FilterError::InvalidDataset(e.to_string()))?;
    let labels = options.label_column.map(|_| encode_labels(&raw_labels));
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(CsvLoad {
        dataset: Dataset::new(name, points, labels)?,
        dropped_rows: dropped,
    })
}

fn encode_labels(raw: &[String]) -> Vec<usize> {
    let numeric: Option<Vec<i64>> = raw.iter().map(|s| s.parse::<i64>().ok()).collect();
    if let Some(values) = numeric {
        let mut uniq = values.clone();
        uniq.sort_unstable();
        uniq.dedup();
        return values
            .iter()
            .map(|v| uniq.binary_search(v).expect("value present"))
            .collect();
    }
    let mut ids: HashMap<&str, usize> = HashMap::new();
    raw.iter()
        .map(|s| {
            let next = ids.len();
            *ids.entry(s.as_str()).or_insert(next)
        })
        .collect()
}

/// Per-feature affine map onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTransform {
    /// Per-feature minimum of the source data.
    pub offset: Array1<f64>,
    /// Per-feature range (max - min); zero for constant features.
    pub scale: Array1<f64>,
    pub constant: Vec<bool>,
}

impl ScalingTransform {
    pub fn apply(&self, points: &Array2<f64>) -> Array2<f64> {
        let mut out = points.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            if self.constant[j] {
                col.fill(0.0);
            } else {
                let (lo, range) = (self.offset[j], self.scale[j]);
                col.mapv_inplace(|v| 2.0 * (v - lo) / range - 1.0);
            }
        }
        out
    }

    pub fn invert(&self, scaled: &Array2<f64>) -> Array2<f64> {
        let mut out = scaled.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, range) = (self.offset[j], self.scale[j]);
            if self.constant[j] {
                col.fill(lo);
            } else {
                col.mapv_inplace(|v| (v + 1.0) * 0.5 * range + lo);
            }
        }
        out
    }

    /// True when the transform leaves every feature unchanged to within `tol`.
    pub fn is_identity(&self, tol: f64) -> bool {
        self.constant.iter().all(|c| !c)
            && self.offset.iter().all(|&o| (o + 1.0).abs() <= tol)
            && self.scale.iter().all(|&s| (s - 2.0).abs() <= tol)
    }
}

/// Fits the per-feature scaling and returns it with the scaled dataset.
pub fn fit_scale(data: &Dataset) -> (ScalingTransform, Dataset) {
    let n = data.dim();
    let mut offset = Array1::zeros(n);
    let mut scale = Array1::zeros(n);
    let mut constant = vec![false; n];
    for (j, col) in data.points.axis_iter(Axis(1)).enumerate() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        offset[j] = lo;
        scale[j] = hi - lo;
        constant[j] = hi - lo == 0.0;
    }
    let transform = ScalingTransform {
        offset,
        scale,
        constant,
    };
    let scaled = Dataset {
        points: transform.apply(&data.points),
        labels: data.labels.clone(),
        name: data.name.clone(),
    };
    (transform, scaled)
}

/// The four synthetic scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyntheticCase {
    /// Two equal spherical clusters in 2-D.
    I,
    /// Two elongated clusters of different cardinality in 2-D.
    II,
    /// Two spherical clusters of different volume and cardinality in 2-D.
    III,
    /// Four clusters in 3-D with random centers and sizes.
    IV,
}

impl SyntheticCase {
    pub const ALL: [SyntheticCase; 4] = [Self::I, Self::II, Self::III, Self::IV];

    pub fn tag(self) -> &'static str {
        match self {
            Self::I => "i",
            Self::II => "ii",
            Self::III => "iii",
            Self::IV => "iv",
        }
    }

    pub fn num_clusters(self) -> usize {
        match self {
            Self::IV => 4,
            _ => 2,
        }
    }
}

impl fmt::Display for SyntheticCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SyntheticCase {
    type Err = FilterError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(Self::I),
            "ii" | "2" => Ok(Self::II),
            "iii" | "3" => Ok(Self::III),
            "iv" | "4" => Ok(Self::IV),
            other => Err(FilterError::InvalidArgument(format!(
                "unknown synthetic case '{other}'"
            ))),
        }
    }
}

/// A synthetic scenario and the seed that fixes its draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub case: SyntheticCase,
    pub seed: u64,
    /// Overrides every cluster size. Only meant for statistical tests.
    #[doc(hidden)]
    pub cluster_size_override: Option<usize>,
}

impl SyntheticSpec {
    pub fn new(case: SyntheticCase, seed: u64) -> Self {
        Self {
            case,
            seed,
            cluster_size_override: None,
        }
    }
}

struct Component {
    mean: Vec<f64>,
    std: Vec<f64>,
    size: usize,
}

/// Draws the (unscaled) dataset for a synthetic scenario.
pub fn generate_synthetic(spec: SyntheticSpec) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let components = match spec.case {
        SyntheticCase::I => vec![
            Component {
                mean: vec![0.0, 0.0],
                std: vec![0.33, 0.33],
                size: 50,
            },
            Component {
                mean: vec![1.0, 1.0],
                std: vec![0.33, 0.33],
                size: 50,
            },
        ],
        SyntheticCase::II => vec![
            Component {
                mean: vec![0.0, 5.0],
                std: vec![0.05_f64.sqrt(), 5.0_f64.sqrt()],
                size: 500,
            },
            Component {
                mean: vec![2.5, 0.0],
                std: vec![0.3_f64.sqrt(), 0.05_f64.sqrt()],
                size: 50,
            },
        ],
        SyntheticCase::III => vec![
            Component {
                mean: vec![0.0, 0.0],
                std: vec![2.0, 2.0],
                size: 500,
            },
            Component {
                mean: vec![7.0, 0.0],
                std: vec![0.5_f64.sqrt(); 2],
                size: 50,
            },
        ],
        SyntheticCase::IV => {
            let centers = draw_separated_centers(&mut rng, 4, 3, 5.0_f64.sqrt(), 1.0);
            centers
                .into_iter()
                .map(|mean| Component {
                    mean,
                    std: vec![1.0; 3],
                    size: rng.random_range(10..=100),
                })
                .collect()
        }
    };

    let n = components[0].mean.len();
    let sizes: Vec<usize> = components
        .iter()
        .map(|c| spec.cluster_size_override.unwrap_or(c.size))
        .collect();
    let m: usize = sizes.iter().sum();
    let mut points = Array2::zeros((m, n));
    let mut labels = Vec::with_capacity(m);
    let mut row = 0;
    for (label, (comp, &size)) in components.iter().zip(&sizes).enumerate() {
        for _ in 0..size {
            for j in 0..n {
                let e: f64 = rng.sample(StandardNormal);
                points[[row, j]] = comp.mean[j] + comp.std[j] * e;
            }
            labels.push(label);
            row += 1;
        }
    }
    Dataset::new(format!("case_{}", spec.case), points, Some(labels))
        .expect("generator output is valid")
}

/// Draws `count` centers from an isotropic normal, restarting the whole draw
/// whenever two centers are closer than `min_dist`.
pub(crate) fn draw_separated_centers<R: Rng>(
    rng: &mut R,
    count: usize,
    dim: usize,
    std: f64,
    min_dist: f64,
) -> Vec<Vec<f64>> {
    loop {
        let centers: Vec<Vec<f64>> = (0..count)
            .map(|_| {
                (0..dim)
                    .map(|_| std * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let ok = (0..count).all(|a| {
            ((a + 1)..count).all(|b| {
                let d2: f64 = centers[a]
                    .iter()
                    .zip(&centers[b])
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum();
                d2.sqrt() >= min_dist
            })
        });
        if ok {
            return centers;
        }
    }
}
