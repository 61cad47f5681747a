//! Cohort queries and the full subset-lattice evaluation.
//!
//! The cohort of target `t` for feature subset `u` is the intersection of
//! the per-feature similarity bitsets for `j` in `u`, with the empty subset
//! mapping to all observations. `lattice_values` evaluates the cohort mean
//! for every subset using one bitset intersection per subset: the lattice
//! is walked as a tree in which the parent of `u` is `u` minus its
//! lowest-set feature, so only one bitset per tree level is alive and the
//! table of `2^d` means is the dominant allocation.

use rayon::prelude::*;

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::similarity::SimilarityMask;
use crate::subset::{FeatureSet, EXACT_LIMIT};

/// A materialized cohort: the observations similar to the target on every
/// feature in `subset`.
#[derive(Clone, Debug)]
pub struct CohortSet {
    pub subset: FeatureSet,
    pub members: Bitset,
}

impl CohortSet {
    pub fn size(&self) -> usize {
        self.members.count()
    }
}

/// Intersects the similarity bitsets for the features in `u`.
pub fn cohort(mask: &SimilarityMask, u: FeatureSet) -> Result<CohortSet> {
    check_subset(mask.d(), u)?;
    let mut members = Bitset::full(mask.n());
    for j in u.iter() {
        members = members.and(mask.feature_bits(j));
    }
    Ok(CohortSet { subset: u, members })
}

fn check_subset(d: usize, u: FeatureSet) -> Result<()> {
    match u.iter().last() {
        Some(j) if j >= d => Err(Error::FeatureOutOfRange { j, d }),
        _ => Ok(()),
    }
}

fn check_weights(weights: Option<&[f64]>, n: usize, t: usize) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != n || w.iter().any(|&x| x.is_nan() || x < 0.0) || w[t] <= 0.0 {
            return Err(Error::InvalidWeights { n, t });
        }
    }
    Ok(())
}

/// Accumulators for the (possibly weighted) cohort mean.
///
/// All sums run in ascending observation order so results do not depend on
/// how the member set was produced.
struct MeanCtx<'a> {
    /// Response values, premultiplied by the weights in the weighted case.
    vals: &'a [f64],
    weights: Option<&'a [f64]>,
}

impl MeanCtx<'_> {
    fn mean(&self, members: &Bitset) -> f64 {
        match self.weights {
            None => {
                let (sum, count) = members.sum_count(self.vals);
                sum / count as f64
            }
            Some(w) => {
                let (num, den) = members.sum2(self.vals, w);
                num / den
            }
        }
    }

    fn mean_and(&self, a: &Bitset, b: &Bitset) -> f64 {
        match self.weights {
            None => {
                let (sum, count) = a.and_sum_count(b, self.vals);
                sum / count as f64
            }
            Some(w) => {
                let (num, den) = a.and_sum2(b, self.vals, w);
                num / den
            }
        }
    }
}

/// The cohort-mean value function `nu(u)`.
///
/// With uniform weights this is the plain mean of `resp` over the cohort;
/// with weights `w` it is `sum(w_i r_i) / sum(w_i)` over the cohort. The
/// target always belongs to the cohort, so the mean is defined whenever
/// `w_t > 0`.
pub fn cohort_value(
    mask: &SimilarityMask,
    u: FeatureSet,
    resp: &[f64],
    weights: Option<&[f64]>,
) -> Result<f64> {
    if resp.len() != mask.n() {
        return Err(Error::LengthMismatch(resp.len(), mask.n()));
    }
    check_weights(weights, mask.n(), mask.target())?;
    let c = cohort(mask, u)?;
    match weights {
        None => {
            let ctx = MeanCtx {
                vals: resp,
                weights: None,
            };
            Ok(ctx.mean(&c.members))
        }
        Some(w) => {
            let products: Vec<f64> = w.iter().zip(resp).map(|(wi, ri)| wi * ri).collect();
            let ctx = MeanCtx {
                vals: &products,
                weights: Some(w),
            };
            Ok(ctx.mean(&c.members))
        }
    }
}

/// Table of `nu(u)` for every subset, indexed by bitmask.
#[derive(Clone, Debug)]
pub struct ValueTable {
    d: usize,
    values: Vec<f64>,
}

impl ValueTable {
    pub fn new(d: usize, values: Vec<f64>) -> ValueTable {
        assert_eq!(values.len(), 1usize << d);
        ValueTable { d, values }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn value(&self, u: FeatureSet) -> f64 {
        self.values[u.bits() as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nu_empty(&self) -> f64 {
        self.values[0]
    }

    pub fn nu_full(&self) -> f64 {
        self.values[(1usize << self.d) - 1]
    }
}

/// Subtrees smaller than this are walked sequentially.
const PAR_SUBTREE: usize = 1 << 12;

/// Evaluates the cohort mean for all `2^d` subsets.
pub fn lattice_values(
    mask: &SimilarityMask,
    resp: &[f64],
    weights: Option<&[f64]>,
) -> Result<ValueTable> {
    let d = mask.d();
    if d > EXACT_LIMIT {
        return Err(Error::ExactLimitExceeded {
            d,
            limit: EXACT_LIMIT,
        });
    }
    if resp.len() != mask.n() {
        return Err(Error::LengthMismatch(resp.len(), mask.n()));
    }
    check_weights(weights, mask.n(), mask.target())?;

    let products; // keeps premultiplied values alive for the weighted case
    let ctx = match weights {
        None => MeanCtx {
            vals: resp,
            weights: None,
        },
        Some(w) => {
            products = w
                .iter()
                .zip(resp)
                .map(|(wi, ri)| wi * ri)
                .collect::<Vec<_>>();
            MeanCtx {
                vals: &products,
                weights: Some(w),
            }
        }
    };

    let masks: Vec<&Bitset> = (0..d).map(|j| mask.feature_bits(j)).collect();
    let mut values = vec![0.0f64; 1usize << d];
    let root = Bitset::full(mask.n());
    descend(&ctx, &masks, &root, d, &mut values);
    Ok(ValueTable { d, values })
}

/// Fills `out` with the means of the subtree rooted at the subset whose
/// bitset is `bits`; `min_feat` is the lowest feature of that subset (or
/// `d` at the root). Children extend the subset with one feature below
/// `min_feat`, each costing exactly one intersection, and child `j` owns
/// the contiguous slice `out[2^j .. 2^(j+1)]`.
fn descend(ctx: &MeanCtx<'_>, masks: &[&Bitset], bits: &Bitset, min_feat: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), 1usize << min_feat);
    let subtree = out.len();
    let (head, mut tail) = out.split_at_mut(1);
    head[0] = ctx.mean(bits);
    let mut children = Vec::with_capacity(min_feat);
    for j in 0..min_feat {
        let (slice, rest) = tail.split_at_mut(1usize << j);
        children.push((j, slice));
        tail = rest;
    }
    let visit = |(j, slice): (usize, &mut [f64])| {
        if j == 0 {
            // Leaf: fuse the intersection with the sum, skip materializing.
            slice[0] = ctx.mean_and(bits, masks[0]);
        } else {
            let child = bits.and(masks[j]);
            descend(ctx, masks, &child, j, slice);
        }
    };
    if subtree >= PAR_SUBTREE {
        children.into_par_iter().for_each(visit);
    } else {
        children.into_iter().for_each(visit);
    }
}

/// Materializes every cohort bitset, one intersection per subset.
///
/// Memory is `2^d` bitsets of `n` bits, so callers gate this on `d` and `n`;
/// it exists so repeated reweighted evaluations (the bootstrap) can skip
/// re-intersecting.
pub fn lattice_cohorts(mask: &SimilarityMask) -> Result<Vec<Bitset>> {
    let d = mask.d();
    if d > EXACT_LIMIT {
        return Err(Error::ExactLimitExceeded {
            d,
            limit: EXACT_LIMIT,
        });
    }
    let mut cohorts = Vec::with_capacity(1usize << d);
    cohorts.push(Bitset::full(mask.n()));
    for u in 1usize..(1usize << d) {
        let low = u.trailing_zeros() as usize;
        let parent = u & (u - 1); // parent: subset minus its lowest feature
        let bits = cohorts[parent].and(mask.feature_bits(low));
        cohorts.push(bits);
    }
    Ok(cohorts)
}

/// Cohort means over precomputed cohorts, for reweighted re-evaluation.
pub fn values_from_cohorts(
    cohorts: &[Bitset],
    resp: &[f64],
    weights: Option<&[f64]>,
    target: usize,
) -> Result<ValueTable> {
    let d = cohorts.len().trailing_zeros() as usize;
    assert_eq!(cohorts.len(), 1usize << d);
    let n = cohorts[0].len();
    if resp.len() != n {
        return Err(Error::LengthMismatch(resp.len(), n));
    }
    check_weights(weights, n, target)?;
    let products;
    let ctx = match weights {
        None => MeanCtx {
            vals: resp,
            weights: None,
        },
        Some(w) => {
            products = w
                .iter()
                .zip(resp)
                .map(|(wi, ri)| wi * ri)
                .collect::<Vec<_>>();
            MeanCtx {
                vals: &products,
                weights: Some(w),
            }
        }
    };
    let values: Vec<f64> = cohorts.par_iter().map(|c| ctx.mean(c)).collect();
    Ok(ValueTable { d, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, FeatureColumn};
    use crate::similarity::{build_mask, SimilaritySpec};

    /// Three binary features, all 8 rows observed (the independent setting).
    pub(crate) fn example_p() -> Dataset {
        let rows: [[&str; 3]; 8] = [
            ["0", "0", "0"],
            ["0", "0", "1"],
            ["0", "1", "0"],
            ["0", "1", "1"],
            ["1", "0", "0"],
            ["1", "0", "1"],
            ["1", "1", "0"],
            ["1", "1", "1"],
        ];
        build_example(&rows)
    }

    /// Same setting with the row (1,1,0) unobserved.
    pub(crate) fn example_p_star() -> Dataset {
        let rows: [[&str; 3]; 7] = [
            ["0", "0", "0"],
            ["0", "0", "1"],
            ["0", "1", "0"],
            ["0", "1", "1"],
            ["1", "0", "0"],
            ["1", "0", "1"],
            ["1", "1", "1"],
        ];
        build_example(&rows)
    }

    fn build_example(rows: &[[&str; 3]]) -> Dataset {
        let cols: Vec<FeatureColumn> = (0..3)
            .map(|j| {
                let cells: Vec<&str> = rows.iter().map(|r| r[j]).collect();
                FeatureColumn::categorical(&format!("x{}", j + 1), &cells)
            })
            .collect();
        let f1: Vec<f64> = rows
            .iter()
            .map(|r| {
                let x1: f64 = r[0].parse().unwrap();
                let x2: f64 = r[1].parse().unwrap();
                x1 - 2.0 * x2
            })
            .collect();
        let f2: Vec<f64> = rows
            .iter()
            .map(|r| {
                let x1: f64 = r[0].parse().unwrap();
                let x2: f64 = r[1].parse().unwrap();
                let x3: f64 = r[2].parse().unwrap();
                x1 * x2 * (1.0 - x3)
            })
            .collect();
        Dataset::new(cols, vec![("f1".into(), f1), ("f2".into(), f2)]).unwrap()
    }

    #[test]
    fn cohorts_of_target_one_under_p() {
        let ds = example_p();
        let mask = build_mask(&ds, &SimilaritySpec::exact(3), 0).unwrap();
        let check = |idx: &[usize], expect: &[usize]| {
            let c = cohort(&mask, FeatureSet::from_indices(idx)).unwrap();
            assert_eq!(c.members.to_indices(), expect);
        };
        check(&[], &[0, 1, 2, 3, 4, 5, 6, 7]);
        check(&[0], &[0, 1, 2, 3]);
        check(&[1], &[0, 1, 4, 5]);
        check(&[2], &[0, 2, 4, 6]);
        check(&[0, 1], &[0, 1]);
        check(&[0, 2], &[0, 2]);
        check(&[1, 2], &[0, 4]);
        check(&[0, 1, 2], &[0]);
    }

    #[test]
    fn impossible_row_drops_from_cohorts() {
        let ds = example_p_star();
        let mask = build_mask(&ds, &SimilaritySpec::exact(3), 0).unwrap();
        let c = cohort(&mask, FeatureSet::singleton(2)).unwrap();
        assert_eq!(c.members.to_indices(), vec![0, 2, 4]);
        let empty = cohort(&mask, FeatureSet::EMPTY).unwrap();
        assert_eq!(empty.size(), 7);
    }

    #[test]
    fn cohort_means_match_hand_computed_values() {
        let ds = example_p();
        let mask = build_mask(&ds, &SimilaritySpec::exact(3), 0).unwrap();
        let f1 = ds.response_named("f1").unwrap();
        let nu =
            |idx: &[usize]| cohort_value(&mask, FeatureSet::from_indices(idx), f1, None).unwrap();
        assert_eq!(nu(&[]), -0.5);
        assert_eq!(nu(&[0]), -1.0);
        assert_eq!(nu(&[1]), 0.5);
        assert_eq!(nu(&[2]), -0.5);
        assert_eq!(nu(&[0, 1, 2]), 0.0);

        let ds2 = example_p_star();
        let mask2 = build_mask(&ds2, &SimilaritySpec::exact(3), 0).unwrap();
        let f1s = ds2.response_named("f1").unwrap();
        let nu2 = cohort_value(&mask2, FeatureSet::singleton(2), f1s, None).unwrap();
        assert!((nu2 - (-1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn singleton_cohort_returns_target_response() {
        let ds = example_p();
        let mask = build_mask(&ds, &SimilaritySpec::exact(3), 0).unwrap();
        let f1 = ds.response_named("f1").unwrap();
        let v = cohort_value(&mask, FeatureSet::full(3), f1, None).unwrap();
        assert_eq!(v, f1[0]);
    }

    #[test]
    fn lattice_matches_per_subset_queries() {
        let ds = example_p();
        let mask = build_mask(&ds, &SimilaritySpec::exact(3), 0).unwrap();
        let f1 = ds.response_named("f1").unwrap();
        let table = lattice_values(&mask, f1, None).unwrap();
        for u in FeatureSet::all(3) {
            let direct = cohort_value(&mask, u, f1, None).unwrap();
            assert_eq!(table.value(u), direct, "subset {}", u.describe());
        }
    }

    #[test]
    fn constant_response_gives_constant_table() {
        let ds = example_p();
        let mask = build_mask(&ds, &SimilaritySpec::exact(3), 0).unwrap();
        let resp = vec![3.25; 8];
        let table = lattice_values(&mask, &resp, None).unwrap();
        assert!(table.values().iter().all(|&v| v == 3.25));
    }

    #[test]
    fn over_limit_routes_to_monte_carlo() {
        let n = 4;
        let cols: Vec<FeatureColumn> = (0..EXACT_LIMIT + 1)
            .map(|j| FeatureColumn::categorical(&format!("x{j}"), &["a", "b", "a", "b"]))
            .collect();
        let ds = Dataset::new(cols, vec![("y".into(), vec![0.0; n])]).unwrap();
        let mask = build_mask(&ds, &SimilaritySpec::exact(EXACT_LIMIT + 1), 0).unwrap();
        let err = lattice_values(&mask, &vec![0.0; n], None).unwrap_err();
        assert!(matches!(err, Error::ExactLimitExceeded { .. }));
    }

    #[test]
    fn cohorts_table_agrees_with_lattice() {
        let ds = example_p_star();
        let mask = build_mask(&ds, &SimilaritySpec::exact(3), 0).unwrap();
        let f2 = ds.response_named("f2").unwrap();
        let table = lattice_values(&mask, f2, None).unwrap();
        let cohorts = lattice_cohorts(&mask).unwrap();
        let table2 = values_from_cohorts(&cohorts, f2, None, 0).unwrap();
        assert_eq!(table.values(), table2.values());
    }

    #[test]
    fn weighted_all_ones_matches_uniform_bitwise() {
        let ds = example_p();
        let mask = build_mask(&ds, &SimilaritySpec::exact(3), 0).unwrap();
        let f1 = ds.response_named("f1").unwrap();
        let uniform = lattice_values(&mask, f1, None).unwrap();
        let ones = vec![1.0; 8];
        let weighted = lattice_values(&mask, f1, Some(&ones)).unwrap();
        assert_eq!(uniform.values(), weighted.values());
    }

    #[test]
    fn invalid_weights_rejected() {
        let ds = example_p();
        let mask = build_mask(&ds, &SimilaritySpec::exact(3), 0).unwrap();
        let f1 = ds.response_named("f1").unwrap();
        let mut w = vec![1.0; 8];
        w[0] = 0.0; // target weight must be positive
        assert!(matches!(
            lattice_values(&mask, f1, Some(&w)),
            Err(Error::InvalidWeights { .. })
        ));
        let neg = vec![-1.0; 8];
        assert!(matches!(
            lattice_values(&mask, f1, Some(&neg)),
            Err(Error::InvalidWeights { .. })
        ));
    }
}
