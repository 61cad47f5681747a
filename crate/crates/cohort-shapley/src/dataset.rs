//! Dataset model and CSV ingestion.
//!
//! A [`Dataset`] holds `d` feature columns and any number of named real
//! response columns, all of length `n`. Categorical features store dense
//! codes in first-appearance order; continuous features store `f64` with
//! `NaN` as the missing marker. Missing categorical cells become their own
//! level rather than dropping rows, so cohort queries never fabricate or
//! discard observations.

use std::collections::HashMap;
use std::io::Read;

use crate::error::{Error, Result};

/// Dense-coded categorical data: `codes[i]` indexes into `labels`.
#[derive(Clone, Debug)]
pub struct CategoricalData {
    pub codes: Vec<u32>,
    pub labels: Vec<String>,
}

#[derive(Clone, Debug)]
pub enum ColumnData {
    Categorical(CategoricalData),
    /// Finite reals; `NaN` marks a missing value.
    Continuous(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct FeatureColumn {
    pub name: String,
    pub data: ColumnData,
}

/// Label used for missing categorical cells.
pub const MISSING_LABEL: &str = "missing";

impl FeatureColumn {
    /// Builds a categorical column from string cells, assigning dense codes
    /// in first-appearance order. Empty cells map to [`MISSING_LABEL`].
    pub fn categorical<S: AsRef<str>>(name: &str, cells: &[S]) -> FeatureColumn {
        let mut labels: Vec<String> = Vec::new();
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut codes = Vec::with_capacity(cells.len());
        for cell in cells {
            let label = if cell.as_ref().is_empty() {
                MISSING_LABEL
            } else {
                cell.as_ref()
            };
            let code = *index.entry(label.to_string()).or_insert_with(|| {
                labels.push(label.to_string());
                (labels.len() - 1) as u32
            });
            codes.push(code);
        }
        FeatureColumn {
            name: name.to_string(),
            data: ColumnData::Categorical(CategoricalData { codes, labels }),
        }
    }

    pub fn continuous(name: &str, values: Vec<f64>) -> FeatureColumn {
        FeatureColumn {
            name: name.to_string(),
            data: ColumnData::Continuous(values),
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Categorical(c) => c.codes.len(),
            ColumnData::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.data, ColumnData::Categorical(_))
    }

    /// Number of categorical levels, if categorical.
    pub fn level_count(&self) -> Option<usize> {
        match &self.data {
            ColumnData::Categorical(c) => Some(c.labels.len()),
            ColumnData::Continuous(_) => None,
        }
    }

    /// Display label for observation `i`.
    pub fn label_of(&self, i: usize) -> String {
        match &self.data {
            ColumnData::Categorical(c) => c.labels[c.codes[i] as usize].clone(),
            ColumnData::Continuous(v) => {
                if v[i].is_nan() {
                    MISSING_LABEL.to_string()
                } else {
                    format!("{}", v[i])
                }
            }
        }
    }

    fn select(&self, keep: &[usize]) -> FeatureColumn {
        let data = match &self.data {
            ColumnData::Categorical(c) => ColumnData::Categorical(CategoricalData {
                codes: keep.iter().map(|&i| c.codes[i]).collect(),
                labels: c.labels.clone(),
            }),
            ColumnData::Continuous(v) => {
                ColumnData::Continuous(keep.iter().map(|&i| v[i]).collect())
            }
        };
        FeatureColumn {
            name: self.name.clone(),
            data,
        }
    }
}

/// Observed rows: the single source of data for every cohort query.
#[derive(Clone, Debug)]
pub struct Dataset {
    n: usize,
    features: Vec<FeatureColumn>,
    responses: Vec<(String, Vec<f64>)>,
}

impl Dataset {
    pub fn new(
        features: Vec<FeatureColumn>,
        responses: Vec<(String, Vec<f64>)>,
    ) -> Result<Dataset> {
        if features.is_empty() {
            return Err(Error::EmptyTable);
        }
        let n = features[0].len();
        if n == 0 {
            return Err(Error::EmptyTable);
        }
        let mut seen: HashMap<&str, ()> = HashMap::new();
        for f in &features {
            if f.len() != n {
                return Err(Error::LengthMismatch(f.len(), n));
            }
            if seen.insert(f.name.as_str(), ()).is_some() {
                return Err(Error::DuplicateColumn(f.name.clone()));
            }
        }
        for (name, vals) in &responses {
            if vals.len() != n {
                return Err(Error::LengthMismatch(vals.len(), n));
            }
            if seen.insert(name.as_str(), ()).is_some() {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        Ok(Dataset {
            n,
            features,
            responses,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[FeatureColumn] {
        &self.features
    }

    pub fn feature(&self, j: usize) -> &FeatureColumn {
        &self.features[j]
    }

    pub fn feature_named(&self, name: &str) -> Result<(usize, &FeatureColumn)> {
        self.features
            .iter()
            .enumerate()
            .find(|(_, f)| f.name == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn responses(&self) -> &[(String, Vec<f64>)] {
        &self.responses
    }

    pub fn response_named(&self, name: &str) -> Result<&[f64]> {
        self.responses
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Adds a response column, e.g. a thresholded prediction.
    pub fn add_response(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n {
            return Err(Error::LengthMismatch(values.len(), self.n));
        }
        if self.responses.iter().any(|(n, _)| n == name)
            || self.features.iter().any(|f| f.name == name)
        {
            return Err(Error::DuplicateColumn(name.to_string()));
        }
        self.responses.push((name.to_string(), values));
        Ok(())
    }

    /// Replaces feature `j` (used when binning a continuous feature in place).
    pub fn replace_feature(&mut self, j: usize, col: FeatureColumn) -> Result<()> {
        if col.len() != self.n {
            return Err(Error::LengthMismatch(col.len(), self.n));
        }
        self.features[j] = col;
        Ok(())
    }

    /// New dataset containing only the rows in `keep`, in the given order.
    pub fn restrict(&self, keep: &[usize]) -> Result<Dataset> {
        if keep.is_empty() {
            return Err(Error::EmptySelection);
        }
        if let Some(&bad) = keep.iter().find(|&&i| i >= self.n) {
            return Err(Error::TargetOutOfRange { t: bad, n: self.n });
        }
        Ok(Dataset {
            n: keep.len(),
            features: self.features.iter().map(|f| f.select(keep)).collect(),
            responses: self
                .responses
                .iter()
                .map(|(name, v)| (name.clone(), keep.iter().map(|&i| v[i]).collect()))
                .collect(),
        })
    }
}

/// Declared role of one CSV column.
#[derive(Clone, Debug, PartialEq)]
pub enum ColumnRole {
    CategoricalFeature,
    /// Continuous feature; optional bin edges convert it to categorical at load.
    ContinuousFeature {
        bins: Option<Vec<f64>>,
    },
    /// Response stored under `name`; optional cutpoint turns a score column
    /// into the binary indicator `1{value >= cut}` at load.
    Response {
        name: String,
        threshold: Option<f64>,
    },
    Ignore,
}

/// Maps CSV header names to roles. Every column in the file must be declared.
#[derive(Clone, Debug, Default)]
pub struct TableSchema {
    pub columns: Vec<(String, ColumnRole)>,
}

impl TableSchema {
    fn role_of(&self, name: &str) -> Option<&ColumnRole> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }
}

/// Reads RFC 4180 CSV from `source` under `schema`.
///
/// Feature columns keep the order they appear in the file. Categorical
/// strings map to dense codes with the label table retained for reporting.
pub fn load_table(source: impl Read, schema: &TableSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if headers.is_empty() {
        return Err(Error::EmptyTable);
    }
    {
        let mut seen = HashMap::new();
        for h in &headers {
            if seen.insert(h.as_str(), ()).is_some() {
                return Err(Error::DuplicateColumn(h.clone()));
            }
        }
    }
    for h in &headers {
        if schema.role_of(h).is_none() {
            return Err(Error::Config {
                line: None,
                msg: format!("column `{h}` in the data file is not declared in the schema"),
            });
        }
    }
    for (name, _) in &schema.columns {
        if !headers.iter().any(|h| h == name) {
            return Err(Error::MissingColumn(name.clone()));
        }
    }

    let ncols = headers.len();
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); ncols];
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or_default();
        if record.len() != ncols {
            return Err(Error::RaggedRow {
                line,
                expected: ncols,
                found: record.len(),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            raw[c].push(cell.to_string());
        }
    }
    if raw[0].is_empty() {
        return Err(Error::EmptyTable);
    }

    let mut features = Vec::new();
    let mut responses = Vec::new();
    for (c, name) in headers.iter().enumerate() {
        match schema.role_of(name).expect("checked above") {
            ColumnRole::Ignore => {}
            ColumnRole::CategoricalFeature => {
                features.push(FeatureColumn::categorical(name, &raw[c]));
            }
            ColumnRole::ContinuousFeature { bins } => {
                let values = parse_numeric(name, &raw[c], true)?;
                let col = FeatureColumn::continuous(name, values);
                match bins {
                    Some(edges) => {
                        features.push(bin_continuous(&col, &BinSpec::Edges(edges.clone()))?)
                    }
                    None => features.push(col),
                }
            }
            ColumnRole::Response {
                name: resp_name,
                threshold,
            } => {
                let values = parse_numeric(name, &raw[c], false)?;
                let values = match threshold {
                    Some(cut) => values
                        .iter()
                        .map(|&v| if v >= *cut { 1.0 } else { 0.0 })
                        .collect(),
                    None => values,
                };
                responses.push((resp_name.clone(), values));
            }
        }
    }
    Dataset::new(features, responses)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or_default();
    Error::Csv {
        line,
        msg: e.to_string(),
    }
}

fn parse_numeric(name: &str, cells: &[String], allow_missing: bool) -> Result<Vec<f64>> {
    cells
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            if cell.is_empty() && allow_missing {
                return Ok(f64::NAN);
            }
            cell.trim()
                .parse::<f64>()
                .map_err(|_| Error::BadNumericCell {
                    line: i as u64 + 2, // header is line 1
                    column: name.to_string(),
                    cell: cell.clone(),
                })
        })
        .collect()
}

/// How to bin a continuous column.
#[derive(Clone, Debug)]
pub enum BinSpec {
    /// Strictly ascending interval boundaries `e_1 < ... < e_k`, defining
    /// the `k-1` intervals `[e_1,e_2), ..., [e_{k-1},e_k]` (final interval
    /// right-closed). Values outside `[e_1,e_k]` clamp to the end bins.
    Edges(Vec<f64>),
    /// `k` equal-probability bins from the empirical distribution.
    Quantiles(usize),
}

/// Index of the bin containing `v` among `edges.len()-1` intervals.
pub fn bin_index(edges: &[f64], v: f64) -> usize {
    let k = edges.len() - 1;
    let pos = edges.partition_point(|&e| e <= v);
    pos.saturating_sub(1).min(k - 1)
}

/// Converts a continuous column into a categorical one.
///
/// Missing values become their own `missing` level appended after the
/// interval levels. Every non-missing value maps to exactly one interval.
pub fn bin_continuous(col: &FeatureColumn, spec: &BinSpec) -> Result<FeatureColumn> {
    let values = match &col.data {
        ColumnData::Continuous(v) => v,
        ColumnData::Categorical(_) => return Err(Error::NotContinuous(col.name.clone())),
    };
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if finite.is_empty() {
        return Err(Error::AllMissing(col.name.clone()));
    }
    let edges: Vec<f64> = match spec {
        BinSpec::Edges(e) => {
            if e.len() < 2 {
                return Err(Error::TooFewEdges);
            }
            if e.windows(2)
                .any(|w| w[0].is_nan() || w[1].is_nan() || w[0] >= w[1])
            {
                return Err(Error::NonAscendingEdges);
            }
            e.clone()
        }
        BinSpec::Quantiles(k) => {
            if !(2..=50).contains(k) {
                return Err(Error::BadQuantileCount(*k));
            }
            finite.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
            (0..=*k)
                .map(|m| quantile_sorted(&finite, m as f64 / *k as f64))
                .collect()
        }
    };

    let nbins = edges.len() - 1;
    let any_missing = values.iter().any(|v| v.is_nan());
    let mut labels: Vec<String> = (0..nbins)
        .map(|m| {
            if m + 1 == nbins {
                format!("[{}, {}]", edges[m], edges[m + 1])
            } else {
                format!("[{}, {})", edges[m], edges[m + 1])
            }
        })
        .collect();
    if any_missing {
        labels.push(MISSING_LABEL.to_string());
    }
    let codes = values
        .iter()
        .map(|&v| {
            if v.is_nan() {
                nbins as u32
            } else {
                bin_index(&edges, v) as u32
            }
        })
        .collect();
    Ok(FeatureColumn {
        name: col.name.clone(),
        data: ColumnData::Categorical(CategoricalData { codes, labels }),
    })
}

/// Linear interpolation of order statistics on an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}
