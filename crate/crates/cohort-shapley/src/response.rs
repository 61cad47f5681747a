//! Response vectors and confusion-matrix fairness metrics.

use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseKindTag {
    Raw,
    Residual,
    FpIndicator,
    FnIndicator,
}

/// A named real response column, the quantity the attribution explains.
#[derive(Clone, Debug)]
pub struct ResponseVector {
    pub name: String,
    pub kind: ResponseKindTag,
    pub values: Vec<f64>,
}

impl ResponseVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Recipe for building a response from dataset columns.
///
/// `fp` and `fn` follow the standard definitions: a false positive is
/// `y=0, yhat=1` and a false negative is `y=1, yhat=0`, so that the sample
/// means satisfy `mean(fp) = FPR*(1-p)` and `mean(fn) = FNR*p`.
#[derive(Clone, Debug, PartialEq)]
pub enum ResponseKind {
    /// Copy the named response column.
    Raw(String),
    /// `y - yhat`, elementwise.
    Residual,
    /// `1{y=0 and yhat=1}`; requires binary `y` and `yhat`.
    FalsePositive,
    /// `1{y=1 and yhat=0}`; requires binary `y` and `yhat`.
    FalseNegative,
    /// `1{column >= cut}` on the named column.
    Threshold { column: String, cut: f64 },
}

fn require_binary(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|&x| x == 0.0 || x == 1.0) {
        Ok(())
    } else {
        Err(Error::NonBinaryColumn(name.to_string()))
    }
}

pub fn make_response(ds: &Dataset, kind: &ResponseKind) -> Result<ResponseVector> {
    match kind {
        ResponseKind::Raw(name) => Ok(ResponseVector {
            name: name.clone(),
            kind: ResponseKindTag::Raw,
            values: ds.response_named(name)?.to_vec(),
        }),
        ResponseKind::Residual => {
            let y = ds.response_named("y")?;
            let yhat = ds.response_named("yhat")?;
            Ok(ResponseVector {
                name: "residual".to_string(),
                kind: ResponseKindTag::Residual,
                values: y.iter().zip(yhat).map(|(a, b)| a - b).collect(),
            })
        }
        ResponseKind::FalsePositive => {
            let y = ds.response_named("y")?;
            let yhat = ds.response_named("yhat")?;
            require_binary("y", y)?;
            require_binary("yhat", yhat)?;
            Ok(ResponseVector {
                name: "fp".to_string(),
                kind: ResponseKindTag::FpIndicator,
                values: y
                    .iter()
                    .zip(yhat)
                    .map(|(&a, &b)| if a == 0.0 && b == 1.0 { 1.0 } else { 0.0 })
                    .collect(),
            })
        }
        ResponseKind::FalseNegative => {
            let y = ds.response_named("y")?;
            let yhat = ds.response_named("yhat")?;
            require_binary("y", y)?;
            require_binary("yhat", yhat)?;
            Ok(ResponseVector {
                name: "fn".to_string(),
                kind: ResponseKindTag::FnIndicator,
                values: y
                    .iter()
                    .zip(yhat)
                    .map(|(&a, &b)| if a == 1.0 && b == 0.0 { 1.0 } else { 0.0 })
                    .collect(),
            })
        }
        ResponseKind::Threshold { column, cut } => {
            let v = ds.response_named(column)?;
            Ok(ResponseVector {
                name: format!("{column}>={cut}"),
                kind: ResponseKindTag::Raw,
                values: v
                    .iter()
                    .map(|&x| if x >= *cut { 1.0 } else { 0.0 })
                    .collect(),
            })
        }
    }
}

/// Confusion counts over a subset of observations, `n[y][yhat]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub n00: u64,
    pub n01: u64,
    pub n10: u64,
    pub n11: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.n00 + self.n01 + self.n10 + self.n11
    }

    /// False positive rate `n01 / (n00 + n01)`; `None` when no `y=0` rows.
    pub fn fpr(&self) -> Option<f64> {
        ratio(self.n01, self.n00 + self.n01)
    }

    /// False negative rate `n10 / (n10 + n11)`; `None` when no `y=1` rows.
    pub fn fnr(&self) -> Option<f64> {
        ratio(self.n10, self.n10 + self.n11)
    }

    /// Positive predictive value `n11 / (n01 + n11)`.
    pub fn ppv(&self) -> Option<f64> {
        ratio(self.n11, self.n01 + self.n11)
    }

    /// Prevalence `(n10 + n11) / total`.
    pub fn prevalence(&self) -> Option<f64> {
        ratio(self.n10 + self.n11, self.total())
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// Tallies confusion counts for binary `y`, `yhat` over `subset`.
pub fn confusion(y: &[f64], yhat: &[f64], subset: &[usize]) -> Result<ConfusionCounts> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch(y.len(), yhat.len()));
    }
    require_binary("y", y)?;
    require_binary("yhat", yhat)?;
    if subset.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut c = ConfusionCounts::default();
    for &i in subset {
        if i >= y.len() {
            return Err(Error::TargetOutOfRange { t: i, n: y.len() });
        }
        match (y[i] == 1.0, yhat[i] == 1.0) {
            (false, false) => c.n00 += 1,
            (false, true) => c.n01 += 1,
            (true, false) => c.n10 += 1,
            (true, true) => c.n11 += 1,
        }
    }
    Ok(c)
}
