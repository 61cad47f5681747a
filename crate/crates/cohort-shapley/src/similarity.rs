//! Per-feature similarity rules and precomputed target masks.
//!
//! For a target observation `t`, `SimilarityMask` holds one bitset per
//! feature marking the observations similar to `t` on that feature. Every
//! cohort query is an intersection of these bitsets, so building the mask
//! once per target is the only pass over raw feature data.

use crate::bitset::Bitset;
use crate::dataset::{bin_index, ColumnData, Dataset};
use crate::error::{Error, Result};

/// Rule deciding whether `x_ij` is similar to the target's `x_tj`.
#[derive(Clone, Debug, PartialEq)]
pub enum SimilarityRule {
    /// Equal categorical code, or bit-equal continuous value.
    ExactMatch,
    /// `|x_ij - x_tj| <= delta` on a continuous feature.
    AbsWindow(f64),
    /// `|x_ij - x_tj| <= delta * |x_tj|`; at `x_tj = 0` this collapses to
    /// exact match on zero so reflexivity still holds.
    RelWindow(f64),
    /// Same bin under the given ascending edges; transitive by construction.
    SharedBin(Vec<f64>),
}

/// One rule per feature.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilaritySpec {
    pub rules: Vec<SimilarityRule>,
}

impl SimilaritySpec {
    /// All features compared by exact match.
    pub fn exact(d: usize) -> SimilaritySpec {
        SimilaritySpec {
            rules: vec![SimilarityRule::ExactMatch; d],
        }
    }

    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        if self.rules.len() != ds.d() {
            return Err(Error::ArityMismatch(format!(
                "{} similarity rules for {} features",
                self.rules.len(),
                ds.d()
            )));
        }
        for (j, rule) in self.rules.iter().enumerate() {
            let col = ds.feature(j);
            match rule {
                SimilarityRule::ExactMatch => {}
                SimilarityRule::AbsWindow(delta) | SimilarityRule::RelWindow(delta) => {
                    if delta.is_nan() || *delta <= 0.0 {
                        return Err(Error::NonPositiveWindow(col.name.clone()));
                    }
                    if col.is_categorical() {
                        return Err(Error::RuleKindMismatch {
                            feature: col.name.clone(),
                            kind: "categorical",
                        });
                    }
                }
                SimilarityRule::SharedBin(edges) => {
                    if edges.len() < 2 {
                        return Err(Error::TooFewEdges);
                    }
                    if edges
                        .windows(2)
                        .any(|w| w[0].is_nan() || w[1].is_nan() || w[0] >= w[1])
                    {
                        return Err(Error::NonAscendingEdges);
                    }
                    if col.is_categorical() {
                        return Err(Error::RuleKindMismatch {
                            feature: col.name.clone(),
                            kind: "categorical",
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-feature similarity bitsets for one target observation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SimilarityMask {
    target: usize,
    n: usize,
    bits: Vec<Bitset>,
}

impl SimilarityMask {
    pub fn target(&self) -> usize {
        self.target
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.bits.len()
    }

    /// Bitset of observations similar to the target on feature `j`.
    pub fn feature_bits(&self, j: usize) -> &Bitset {
        &self.bits[j]
    }
}

/// Builds the `d` similarity bitsets for target `t`.
pub fn build_mask(ds: &Dataset, spec: &SimilaritySpec, t: usize) -> Result<SimilarityMask> {
    if t >= ds.n() {
        return Err(Error::TargetOutOfRange { t, n: ds.n() });
    }
    spec.validate(ds)?;
    let n = ds.n();
    let bits = spec
        .rules
        .iter()
        .enumerate()
        .map(|(j, rule)| feature_bits(ds, j, rule, t))
        .collect::<Result<Vec<_>>>()?;
    debug_assert!(bits.iter().all(|b| b.contains(t)), "reflexivity");
    Ok(SimilarityMask { target: t, n, bits })
}

fn feature_bits(ds: &Dataset, j: usize, rule: &SimilarityRule, t: usize) -> Result<Bitset> {
    let col = ds.feature(j);
    let n = ds.n();
    let bits = match (&col.data, rule) {
        (ColumnData::Categorical(c), SimilarityRule::ExactMatch) => {
            let code_t = c.codes[t];
            Bitset::from_fn(n, |i| c.codes[i] == code_t)
        }
        (ColumnData::Continuous(v), SimilarityRule::ExactMatch) => {
            let vt = v[t];
            if vt.is_nan() {
                Bitset::from_fn(n, |i| v[i].is_nan())
            } else {
                Bitset::from_fn(n, |i| v[i] == vt)
            }
        }
        (ColumnData::Continuous(v), SimilarityRule::AbsWindow(delta)) => window_bits(v, t, *delta),
        (ColumnData::Continuous(v), SimilarityRule::RelWindow(delta)) => {
            window_bits(v, t, *delta * v[t].abs())
        }
        (ColumnData::Continuous(v), SimilarityRule::SharedBin(edges)) => {
            let vt = v[t];
            if vt.is_nan() {
                Bitset::from_fn(n, |i| v[i].is_nan())
            } else {
                let bin_t = bin_index(edges, vt);
                Bitset::from_fn(n, |i| !v[i].is_nan() && bin_index(edges, v[i]) == bin_t)
            }
        }
        (ColumnData::Categorical(_), _) => {
            return Err(Error::RuleKindMismatch {
                feature: col.name.clone(),
                kind: "categorical",
            })
        }
    };
    Ok(bits)
}

fn window_bits(v: &[f64], t: usize, width: f64) -> Bitset {
    let vt = v[t];
    if vt.is_nan() {
        // Missing is similar only to missing.
        Bitset::from_fn(v.len(), |i| v[i].is_nan())
    } else {
        Bitset::from_fn(v.len(), |i| (v[i] - vt).abs() <= width)
    }
}
