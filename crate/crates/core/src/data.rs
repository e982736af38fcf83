//! Datasets: CSV ingestion, standardization, PCA, and the two-component
//! simulation designs.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::eigen_descending;
use crate::parsimony::ModelFamily;
use crate::random::{sample_mvn, RngHandle, SpdMatrix};

/// `n × d` observations with optional ground-truth labels (0-based ids).
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    labels: Option<Vec<usize>>,
    label_names: Option<Vec<String>>,
    column_names: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Empty("data matrix"));
        }
        if let Some((idx, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (row, column) = (idx % values.nrows(), idx / values.nrows());
            return Err(Error::Parse {
                row: row + 1,
                column: column + 1,
                value: values[(row, column)].to_string(),
            });
        }
        Ok(Self {
            values,
            labels: None,
            label_names: None,
            column_names: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty("data matrix"));
        }
        let d = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: names.len(),
            });
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn label_names(&self) -> Option<&[String]> {
        self.label_names.as_deref()
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.values.row(i).transpose()
    }

    pub fn mean(&self) -> DVector<f64> {
        self.values.row_mean().transpose()
    }

    /// Unbiased (n - 1) sample covariance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let centered = self.centered();
        let denom = (self.n().max(2) - 1) as f64;
        centered.transpose() * &centered / denom
    }

    fn centered(&self) -> DMatrix<f64> {
        let mean = self.values.row_mean();
        let mut centered = self.values.clone();
        for mut row in centered.row_iter_mut() {
            row -= &mean;
        }
        centered
    }

    fn column_label(&self, j: usize) -> String {
        self.column_names
            .as_ref()
            .map(|names| names[j].clone())
            .unwrap_or_else(|| format!("column {}", j + 1))
    }

    fn replace_values(&self, values: DMatrix<f64>, column_names: Option<Vec<String>>) -> Self {
        Self {
            values,
            labels: self.labels.clone(),
            label_names: self.label_names.clone(),
            column_names,
        }
    }
}

/// A CSV column selected by header name or by 0-based index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl FromStr for ColumnRef {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct CsvOptions {
    pub has_header: bool,
    pub label_column: Option<ColumnRef>,
    /// Non-feature columns to drop (identifiers, extra categorical fields).
    pub skip_columns: Vec<ColumnRef>,
}

impl CsvOptions {
    pub fn with_header() -> Self {
        Self {
            has_header: true,
            ..Self::default()
        }
    }

    pub fn label(mut self, column: impl Into<String>) -> Self {
        self.label_column = Some(column.into().parse().unwrap());
        self
    }

    pub fn skip(mut self, column: impl Into<String>) -> Self {
        self.skip_columns.push(column.into().parse().unwrap());
        self
    }
}

fn resolve(column: &ColumnRef, header: Option<&[String]>, width: usize) -> Result<usize> {
    match column {
        ColumnRef::Index(i) if *i < width => Ok(*i),
        ColumnRef::Index(i) => Err(Error::UnknownColumn(i.to_string())),
        ColumnRef::Name(name) => header
            .and_then(|h| h.iter().position(|c| c.trim() == name))
            .ok_or_else(|| Error::UnknownColumn(name.clone())),
    }
}

/// Reads comma-separated numeric data. Label values may be any strings;
/// they are mapped to ids in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Option<Vec<String>> = if options.has_header {
        Some(reader.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };
    let records = reader.records().collect::<std::result::Result<Vec<_>, _>>()?;
    if records.is_empty() {
        return Err(Error::Empty("csv file has no data rows"));
    }
    let width = records[0].len();
    let label_idx = options
        .label_column
        .as_ref()
        .map(|c| resolve(c, header.as_deref(), width))
        .transpose()?;
    let skipped = options
        .skip_columns
        .iter()
        .map(|c| resolve(c, header.as_deref(), width))
        .collect::<Result<Vec<_>>>()?;
    let features: Vec<usize> = (0..width)
        .filter(|j| Some(*j) != label_idx && !skipped.contains(j))
        .collect();
    if features.is_empty() {
        return Err(Error::Empty("csv file has no feature columns"));
    }

    let first_row = if options.has_header { 2 } else { 1 };
    let mut values = DMatrix::zeros(records.len(), features.len());
    let mut label_ids = Vec::new();
    let mut label_names: Vec<String> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, record) in records.iter().enumerate() {
        for (out, &j) in features.iter().enumerate() {
            let cell = record.get(j).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: i + first_row,
                column: j + 1,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: i + first_row,
                    column: j + 1,
                    value: cell.to_string(),
                });
            }
            values[(i, out)] = v;
        }
        if let Some(l) = label_idx {
            let name = record.get(l).unwrap_or("").to_string();
            let next = seen.len();
            let id = *seen.entry(name.clone()).or_insert_with(|| {
                label_names.push(name);
                next
            });
            label_ids.push(id);
        }
    }

    let mut data = DataMatrix::new(values)?;
    if let Some(h) = header {
        data.column_names = Some(features.iter().map(|&j| h[j].clone()).collect());
    }
    if label_idx.is_some() {
        data.labels = Some(label_ids);
        data.label_names = Some(label_names);
    }
    Ok(data)
}

/// Per-column zero mean and unit population standard deviation.
pub fn standardize(data: &DataMatrix) -> Result<DataMatrix> {
    let n = data.n() as f64;
    let mut values = data.values.clone();
    for j in 0..data.d() {
        let col = data.values.column(j);
        let mean = col.mean();
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::ConstantColumn(data.column_label(j)));
        }
        for i in 0..data.n() {
            values[(i, j)] = (data.values[(i, j)] - mean) / sd;
        }
    }
    Ok(data.replace_values(values, data.column_names.clone()))
}

/// Projects the centered data onto its leading principal axes (descending
/// variance). Each axis is signed so its largest-magnitude loading is
/// positive.
pub fn pca_project(data: &DataMatrix, n_components: Option<usize>) -> Result<DataMatrix> {
    let d = data.d();
    let m = n_components.unwrap_or(d);
    if m == 0 || m > d {
        return Err(Error::domain(format!("n_components must be in 1..={d}, got {m}")));
    }
    let centered = data.centered();
    let cov = centered.transpose() * &centered / data.n() as f64;
    let (_, mut axes) = eigen_descending(&cov);
    for j in 0..d {
        let col = axes.column(j);
        let big = col.iter().copied().fold(0.0_f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if big < 0.0 {
            let flipped = -axes.column(j);
            axes.set_column(j, &flipped);
        }
    }
    let projected = centered * axes.columns(0, m);
    let names = (1..=m).map(|i| format!("PC{i}")).collect();
    Ok(data.replace_values(projected, Some(names)))
}

/// PCA followed by standardization, the preprocessing used for the crabs
/// morphology measurements.
pub fn pca_then_standardize(data: &DataMatrix, n_components: Option<usize>) -> Result<DataMatrix> {
    standardize(&pca_project(data, n_components)?)
}

/// Two-component simulation design in R².
#[derive(Clone, Debug)]
pub struct SimSpec {
    pub structure: ModelFamily,
    /// Mahalanobis separation ϱ under the pooled covariance.
    pub separation: f64,
    pub n: usize,
    pub mixing: [f64; 2],
}

impl SimSpec {
    pub const SEPARATION_PRESETS: [f64; 3] = [1.0, 3.0, 4.5];

    pub fn new(structure: ModelFamily, separation: f64, n: usize) -> Self {
        Self {
            structure,
            separation,
            n,
            mixing: [0.5, 0.5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.separation > 0.0) || !self.separation.is_finite() {
            return Err(Error::domain(format!("separation must be positive, got {}", self.separation)));
        }
        if self.n < 2 {
            return Err(Error::domain("need at least 2 observations"));
        }
        let total = self.mixing[0] + self.mixing[1];
        if self.mixing.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain("mixing proportions must lie on the simplex"));
        }
        Ok(())
    }
}

/// Realized parameters of a two-component design.
#[derive(Clone, Debug)]
pub struct TwoComponentDesign {
    pub mixing: [f64; 2],
    pub means: [DVector<f64>; 2],
    pub covariances: [SpdMatrix; 2],
}

fn rotation_45() -> DMatrix<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_row_slice(2, 2, &[h, -h, h, h])
}

/// Cluster covariances for the six simulated structures: λ = 1 or
/// λ_k = {1, 5}, A = diag(3, 1/3), D a 45° rotation.
pub fn structure_covariances(structure: ModelFamily) -> Result<[SpdMatrix; 2]> {
    let shape = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0 / 3.0]));
    let oriented = {
        let d = rotation_45();
        &d * &shape * d.transpose()
    };
    let (base, volumes) = match structure {
        ModelFamily::SphericalEqual => (DMatrix::identity(2, 2), [1.0, 1.0]),
        ModelFamily::SphericalFree => (DMatrix::identity(2, 2), [1.0, 5.0]),
        ModelFamily::DiagonalEqual => (shape, [1.0, 1.0]),
        ModelFamily::DiagonalFree => (shape, [1.0, 5.0]),
        ModelFamily::GeneralEqual => (oriented, [1.0, 1.0]),
        ModelFamily::GeneralScaleFree => (oriented, [1.0, 5.0]),
        other => {
            return Err(Error::domain(format!(
                "no simulation design for structure {other}"
            )))
        }
    };
    Ok([
        SpdMatrix::from_symmetrized(&(&base * volumes[0]), "sigma_1")?,
        SpdMatrix::from_symmetrized(&(&base * volumes[1]), "sigma_2")?,
    ])
}

/// μ₁ = 0 and μ₂ = c·u with u the leading eigenvector of the pooled
/// covariance P = (Σ₁+Σ₂)/2 and c chosen so (μ₁-μ₂)ᵀ P⁻¹ (μ₁-μ₂) = ϱ².
pub fn separated_means(sigmas: &[SpdMatrix; 2], separation: f64) -> Result<[DVector<f64>; 2]> {
    let pooled = SpdMatrix::from_symmetrized(&((sigmas[0].matrix() + sigmas[1].matrix()) * 0.5), "pooled")?;
    let (_, vecs) = eigen_descending(pooled.matrix());
    let u = vecs.column(0).into_owned();
    let c = separation / pooled.inv_quad_form(&u).sqrt();
    let d = u.len();
    Ok([DVector::zeros(d), u * c])
}

pub fn two_component_design(spec: &SimSpec) -> Result<TwoComponentDesign> {
    spec.validate()?;
    let covariances = structure_covariances(spec.structure)?;
    let means = separated_means(&covariances, spec.separation)?;
    Ok(TwoComponentDesign {
        mixing: spec.mixing,
        means,
        covariances,
    })
}

/// Draws `n` labelled points; each label is Bernoulli under the mixing
/// proportions.
pub fn sample_design(design: &TwoComponentDesign, n: usize, rng: &mut RngHandle) -> Result<DataMatrix> {
    let d = design.means[0].len();
    let mut values = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let k = usize::from(rng.uniform() >= design.mixing[0]);
        let x = sample_mvn(&design.means[k], &design.covariances[k], rng)?;
        values.set_row(i, &x.transpose());
        labels.push(k);
    }
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    DataMatrix::new(values)?.with_labels(labels)?.with_column_names(names)
}

pub fn simulate_two_component(spec: &SimSpec, rng: &mut RngHandle) -> Result<DataMatrix> {
    let design = two_component_design(spec)?;
    sample_design(&design, spec.n, rng)
}

/// π = (0.5, 0.5), μ₁ = (8, 8), μ₂ = (2, 2), Σ₁ = 4I, Σ₂ = I.
pub fn bensmail_design() -> TwoComponentDesign {
    TwoComponentDesign {
        mixing: [0.5, 0.5],
        means: [DVector::from_vec(vec![8.0, 8.0]), DVector::from_vec(vec![2.0, 2.0])],
        covariances: [SpdMatrix::scaled_identity(2, 4.0), SpdMatrix::identity(2)],
    }
}

pub fn simulate_bensmail(n: usize, rng: &mut RngHandle) -> Result<DataMatrix> {
    if n < 2 {
        return Err(Error::domain("need at least 2 observations"));
    }
    sample_design(&bensmail_design(), n, rng)
}
