//! Group aggregation of attributions and conditional (subset-restricted)
//! analyses.

use crate::attribute::{all_targets, EstimationMode};
use crate::dataset::{ColumnData, Dataset};
use crate::error::{Error, Result};
use crate::response::{make_response, ResponseKind};
use crate::shapley::ShapleyAttribution;
use crate::similarity::SimilaritySpec;

/// One conjunct of a group definition: `column = value`.
///
/// The column resolves against the dataset when members are computed: a
/// categorical feature matches `value` as a level label, a continuous
/// feature or response column matches it as a number.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupTerm {
    pub column: String,
    pub value: String,
}

/// A named group of observations: the conjunction of its terms.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupDef {
    pub name: String,
    pub terms: Vec<GroupTerm>,
}

impl GroupDef {
    /// Row indices satisfying every term, ascending.
    pub fn members(&self, ds: &Dataset) -> Result<Vec<usize>> {
        let mut keep: Vec<bool> = vec![true; ds.n()];
        for term in &self.terms {
            if let Ok((_, col)) = ds.feature_named(&term.column) {
                match &col.data {
                    ColumnData::Categorical(cat) => {
                        let code = cat
                            .labels
                            .iter()
                            .position(|l| *l == term.value)
                            .ok_or_else(|| Error::Config {
                                line: None,
                                msg: format!(
                                    "feature `{}` has no level `{}`",
                                    term.column, term.value
                                ),
                            })? as u32;
                        for (i, k) in keep.iter_mut().enumerate() {
                            *k = *k && cat.codes[i] == code;
                        }
                    }
                    ColumnData::Continuous(vals) => {
                        let want: f64 = term.value.parse().map_err(|_| Error::Config {
                            line: None,
                            msg: format!(
                                "`{}` is not a number for continuous feature `{}`",
                                term.value, term.column
                            ),
                        })?;
                        for (i, k) in keep.iter_mut().enumerate() {
                            *k = *k && vals[i] == want;
                        }
                    }
                }
            } else {
                let vals = ds.response_named(&term.column)?;
                let want: f64 = term.value.parse().map_err(|_| Error::Config {
                    line: None,
                    msg: format!(
                        "`{}` is not a number for response column `{}`",
                        term.value, term.column
                    ),
                })?;
                for (i, k) in keep.iter_mut().enumerate() {
                    *k = *k && vals[i] == want;
                }
            }
        }
        let members: Vec<usize> = keep
            .iter()
            .enumerate()
            .filter_map(|(i, &k)| if k { Some(i) } else { None })
            .collect();
        if members.is_empty() {
            return Err(Error::EmptyGroup(self.name.clone()));
        }
        Ok(members)
    }
}

/// Per-feature mean attribution over a group of observations.
#[derive(Clone, Debug)]
pub struct GroupAggregate {
    pub name: String,
    pub count: usize,
    pub mean_phi: Vec<f64>,
}

/// Arithmetic means of member attributions, one aggregate per group.
///
/// `attrs` must hold one attribution per dataset row, in row order, as
/// produced by [`all_targets`].
pub fn aggregate_groups(
    attrs: &[ShapleyAttribution],
    groups: &[GroupDef],
    ds: &Dataset,
) -> Result<Vec<GroupAggregate>> {
    if attrs.len() != ds.n() {
        return Err(Error::LengthMismatch(attrs.len(), ds.n()));
    }
    let d = attrs.first().map(|a| a.phi.len()).unwrap_or(0);
    groups
        .iter()
        .map(|g| {
            let members = g.members(ds)?;
            let mut mean = vec![0.0f64; d];
            for &t in &members {
                for (m, p) in mean.iter_mut().zip(&attrs[t].phi) {
                    *m += p;
                }
            }
            for m in mean.iter_mut() {
                *m /= members.len() as f64;
            }
            Ok(GroupAggregate {
                name: g.name.clone(),
                count: members.len(),
                mean_phi: mean,
            })
        })
        .collect()
}

/// Restricts the dataset to `keep`, rebuilds the response there, and runs
/// cohort Shapley for every remaining observation.
///
/// This is the conditional workflow: e.g. keep only rows with `y = 0` and
/// attribute the prediction to study false positives.
pub fn conditional_attribution(
    ds: &Dataset,
    spec: &SimilaritySpec,
    keep: &[usize],
    kind: &ResponseKind,
    mode: EstimationMode,
) -> Result<(Dataset, Vec<ShapleyAttribution>)> {
    let sub = ds.restrict(keep)?;
    let resp = make_response(&sub, kind)?;
    let attrs = all_targets(&sub, spec, &resp, None, mode)?;
    Ok((sub, attrs))
}
