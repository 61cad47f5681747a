//! Bindings from value functions to attributions: the cohort game, the
//! baseline-hybrid game, and whole-dataset sweeps.

use rayon::prelude::*;

use crate::bitset::Bitset;
use crate::cohort::{cohort_value, lattice_values};
use crate::dataset::{ColumnData, Dataset};
use crate::error::{Error, Result};
use crate::response::ResponseVector;
use crate::shapley::{
    exact_shapley, exact_shapley_from_table, mc_shapley, GameKind, ShapleyAttribution, ValueOracle,
};
use crate::similarity::{build_mask, SimilarityMask, SimilarityRule, SimilaritySpec};
use crate::subset::FeatureSet;

/// Exact enumeration or permutation sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimationMode {
    Exact,
    MonteCarlo { n_perms: usize, seed: u64 },
}

/// The cohort-mean value function for one target, usable by any estimator.
pub struct CohortOracle<'a> {
    mask: &'a SimilarityMask,
    resp: &'a [f64],
    weights: Option<&'a [f64]>,
    /// `w_i * r_i`, kept so weighted chain walks reuse one buffer.
    products: Option<Vec<f64>>,
    nu_empty: f64,
}

impl<'a> CohortOracle<'a> {
    pub fn new(
        mask: &'a SimilarityMask,
        resp: &'a [f64],
        weights: Option<&'a [f64]>,
    ) -> Result<CohortOracle<'a>> {
        let nu_empty = cohort_value(mask, FeatureSet::EMPTY, resp, weights)?;
        let products = weights.map(|w| w.iter().zip(resp).map(|(wi, ri)| wi * ri).collect());
        Ok(CohortOracle {
            mask,
            resp,
            weights,
            products,
            nu_empty,
        })
    }

    fn mean_of(&self, members: &Bitset) -> f64 {
        match (self.weights, &self.products) {
            (Some(w), Some(p)) => {
                let (num, den) = members.sum2(p, w);
                num / den
            }
            _ => {
                let (sum, count) = members.sum_count(self.resp);
                sum / count as f64
            }
        }
    }
}

impl ValueOracle for CohortOracle<'_> {
    fn arity(&self) -> usize {
        self.mask.d()
    }

    fn value(&self, u: FeatureSet) -> f64 {
        if u.is_empty() {
            return self.nu_empty;
        }
        let mut members: Option<Bitset> = None;
        for j in u.iter() {
            members = Some(match members {
                None => self.mask.feature_bits(j).clone(),
                Some(m) => m.and(self.mask.feature_bits(j)),
            });
        }
        self.mean_of(&members.expect("nonempty subset"))
    }

    fn chain_values(&self, order: &[usize], out: &mut [f64]) {
        out[0] = self.nu_empty;
        let mut members: Option<Bitset> = None;
        for (k, &j) in order.iter().enumerate() {
            let m = match members.take() {
                None => self.mask.feature_bits(j).clone(),
                Some(mut m) => {
                    m.and_assign(self.mask.feature_bits(j));
                    m
                }
            };
            out[k + 1] = self.mean_of(&m);
            members = Some(m);
        }
    }
}

fn finish(mut attr: ShapleyAttribution, target: usize, game: GameKind) -> ShapleyAttribution {
    attr.target = Some(target);
    attr.game = game;
    attr
}

/// Cohort Shapley attribution for a single target observation.
pub fn cohort_shapley(
    ds: &Dataset,
    spec: &SimilaritySpec,
    t: usize,
    resp: &ResponseVector,
    weights: Option<&[f64]>,
    mode: EstimationMode,
) -> Result<ShapleyAttribution> {
    let mask = build_mask(ds, spec, t)?;
    cohort_shapley_masked(&mask, &resp.values, weights, mode)
}

fn cohort_shapley_masked(
    mask: &SimilarityMask,
    resp: &[f64],
    weights: Option<&[f64]>,
    mode: EstimationMode,
) -> Result<ShapleyAttribution> {
    let attr = match mode {
        EstimationMode::Exact => {
            let table = lattice_values(mask, resp, weights)?;
            exact_shapley_from_table(&table)
        }
        EstimationMode::MonteCarlo { n_perms, seed } => {
            let oracle = CohortOracle::new(mask, resp, weights)?;
            mc_shapley(&oracle, n_perms, seed)?
        }
    };
    Ok(finish(attr, mask.target(), GameKind::Cohort))
}

/// A deterministic prediction function of a full feature tuple.
pub trait FunctionEvaluator: Sync {
    fn arity(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> f64;
}

/// Wraps a closure as a [`FunctionEvaluator`] of known arity.
pub struct FnEvaluator<F: Fn(&[f64]) -> f64 + Sync> {
    pub arity: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FunctionEvaluator for FnEvaluator<F> {
    fn arity(&self) -> usize {
        self.arity
    }
    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

struct BaselineOracle<'a, F: FunctionEvaluator + ?Sized> {
    f: &'a F,
    x_target: &'a [f64],
    x_baseline: &'a [f64],
}

impl<F: FunctionEvaluator + ?Sized> ValueOracle for BaselineOracle<'_, F> {
    fn arity(&self) -> usize {
        self.x_target.len()
    }

    fn value(&self, u: FeatureSet) -> f64 {
        let hybrid: Vec<f64> = (0..self.x_target.len())
            .map(|j| {
                if u.contains(j) {
                    self.x_target[j]
                } else {
                    self.x_baseline[j]
                }
            })
            .collect();
        self.f.evaluate(&hybrid)
    }
}

/// Baseline Shapley: explains `f(x_t) - f(x_b)` through hybrid points
/// `x_{t,u} : x_{b,-u}`.
///
/// The hybrids generally do not occur in any dataset; the result is tagged
/// [`GameKind::Baseline`] so downstream reports can flag that.
pub fn baseline_shapley<F: FunctionEvaluator + ?Sized>(
    f: &F,
    x_target: &[f64],
    x_baseline: &[f64],
    mode: EstimationMode,
) -> Result<ShapleyAttribution> {
    if x_target.len() != x_baseline.len() || x_target.len() != f.arity() {
        return Err(Error::ArityMismatch(format!(
            "target tuple {}, baseline tuple {}, function arity {}",
            x_target.len(),
            x_baseline.len(),
            f.arity()
        )));
    }
    let oracle = BaselineOracle {
        f,
        x_target,
        x_baseline,
    };
    let mut attr = match mode {
        EstimationMode::Exact => exact_shapley(&oracle)?,
        EstimationMode::MonteCarlo { n_perms, seed } => mc_shapley(&oracle, n_perms, seed)?,
    };
    attr.game = GameKind::Baseline;
    Ok(attr)
}

/// Discrete per-feature signature of a target, when every rule partitions
/// the observations (exact match or shared bins). Targets with equal
/// signatures have identical similarity masks, hence identical attributions.
fn target_signature(ds: &Dataset, spec: &SimilaritySpec, t: usize) -> Option<Vec<u64>> {
    let mut sig = Vec::with_capacity(ds.d());
    for (j, rule) in spec.rules.iter().enumerate() {
        let col = ds.feature(j);
        let s = match (&col.data, rule) {
            (ColumnData::Categorical(c), SimilarityRule::ExactMatch) => c.codes[t] as u64,
            (ColumnData::Continuous(v), SimilarityRule::ExactMatch) => {
                if v[t].is_nan() {
                    u64::MAX
                } else {
                    v[t].to_bits()
                }
            }
            (ColumnData::Continuous(v), SimilarityRule::SharedBin(edges)) => {
                if v[t].is_nan() {
                    u64::MAX
                } else {
                    crate::dataset::bin_index(edges, v[t]) as u64
                }
            }
            _ => return None,
        };
        sig.push(s);
    }
    Some(sig)
}

/// Groups targets into cells of identical similarity masks, when the rules
/// allow a discrete signature; otherwise every target is its own cell.
/// Returns the cell index of each input target plus one representative
/// target per cell (first seen).
pub(crate) fn target_cells(
    ds: &Dataset,
    spec: &SimilaritySpec,
    targets: &[usize],
) -> (Vec<usize>, Vec<usize>) {
    let signatures: Option<Vec<Vec<u64>>> = targets
        .iter()
        .map(|&t| target_signature(ds, spec, t))
        .collect();
    match signatures {
        Some(sigs) => {
            let mut cell_of = Vec::with_capacity(targets.len());
            let mut reps: Vec<usize> = Vec::new();
            let mut index: std::collections::HashMap<&[u64], usize> =
                std::collections::HashMap::new();
            for (i, sig) in sigs.iter().enumerate() {
                let cell = *index.entry(sig.as_slice()).or_insert_with(|| {
                    reps.push(targets[i]);
                    reps.len() - 1
                });
                cell_of.push(cell);
            }
            (cell_of, reps)
        }
        None => ((0..targets.len()).collect(), targets.to_vec()),
    }
}

fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut x = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn mode_for(mode: EstimationMode, salt: u64) -> EstimationMode {
    match mode {
        EstimationMode::Exact => EstimationMode::Exact,
        EstimationMode::MonteCarlo { n_perms, seed } => EstimationMode::MonteCarlo {
            n_perms,
            seed: derive_seed(seed, salt),
        },
    }
}

/// One attribution per requested target, in target order.
///
/// When every similarity rule is discrete, targets that agree on all
/// feature signatures share one computation (and, in Monte Carlo mode, one
/// permutation stream).
pub fn attributions_for(
    ds: &Dataset,
    spec: &SimilaritySpec,
    targets: &[usize],
    resp: &ResponseVector,
    weights: Option<&[f64]>,
    mode: EstimationMode,
) -> Result<Vec<ShapleyAttribution>> {
    spec.validate(ds)?;
    if resp.values.len() != ds.n() {
        return Err(Error::LengthMismatch(resp.values.len(), ds.n()));
    }
    for &t in targets {
        if t >= ds.n() {
            return Err(Error::TargetOutOfRange { t, n: ds.n() });
        }
    }

    let (cell_of, reps) = target_cells(ds, spec, targets);
    let cell_attrs: Vec<ShapleyAttribution> = reps
        .par_iter()
        .map(|&t| {
            let mask = build_mask(ds, spec, t)?;
            cohort_shapley_masked(&mask, &resp.values, weights, mode_for(mode, t as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(targets
        .iter()
        .zip(&cell_of)
        .map(|(&t, &cell)| finish(cell_attrs[cell].clone(), t, GameKind::Cohort))
        .collect())
}

/// Cohort Shapley for every observation in the dataset.
pub fn all_targets(
    ds: &Dataset,
    spec: &SimilaritySpec,
    resp: &ResponseVector,
    weights: Option<&[f64]>,
    mode: EstimationMode,
) -> Result<Vec<ShapleyAttribution>> {
    let targets: Vec<usize> = (0..ds.n()).collect();
    attributions_for(ds, spec, &targets, resp, weights, mode)
}
