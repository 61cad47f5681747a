//! Shapley values for an arbitrary set-value function.
//!
//! `exact_shapley` evaluates every subset once and combines increments with
//! the usual binomial weights; `mc_shapley` averages increments along
//! randomly permuted build orders and reports a per-feature standard error.

use std::collections::HashMap;
use std::sync::RwLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cohort::ValueTable;
use crate::error::{Error, Result};
use crate::subset::{FeatureSet, EXACT_LIMIT};

/// A deterministic map from feature subsets to real values.
///
/// Implementations must return bit-identical values for repeated calls on
/// the same subset and be safe to call concurrently.
pub trait ValueOracle: Sync {
    fn arity(&self) -> usize;

    fn value(&self, u: FeatureSet) -> f64;

    /// Values along the chain `{}`, `{order[0]}`, `{order[0],order[1]}`, ...
    /// `out` has length `arity() + 1`. Implementations with cheap
    /// incremental refinement override this.
    fn chain_values(&self, order: &[usize], out: &mut [f64]) {
        let mut u = FeatureSet::EMPTY;
        out[0] = self.value(u);
        for (k, &j) in order.iter().enumerate() {
            u = u.with(j);
            out[k + 1] = self.value(u);
        }
    }
}

/// How an attribution was estimated.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Exact,
    Mc {
        n_perms: usize,
        seed: u64,
        /// Per-feature standard error of the permutation-mean estimate;
        /// zero when only one permutation was drawn.
        stderr: Vec<f64>,
    },
}

/// Which game the attribution explains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GameKind {
    /// Cohort means over observed rows only.
    Cohort,
    /// Baseline hybrids `f(x_t on u, x_b off u)`; may evaluate input
    /// combinations never observed in the data.
    Baseline,
    /// A caller-supplied value function.
    Oracle,
}

/// Per-feature attribution of `nu(full) - nu(empty)`.
#[derive(Clone, Debug, Serialize)]
pub struct ShapleyAttribution {
    pub target: Option<usize>,
    pub game: GameKind,
    pub phi: Vec<f64>,
    pub nu_empty: f64,
    pub nu_full: f64,
    #[serde(flatten)]
    pub method: Method,
}

impl ShapleyAttribution {
    /// `sum(phi) - (nu_full - nu_empty)`, which the efficiency axiom pins at
    /// zero up to rounding.
    pub fn efficiency_gap(&self) -> f64 {
        self.phi.iter().sum::<f64>() - (self.nu_full - self.nu_empty)
    }
}

/// The increment `nu(u + j) - nu(u)` of feature `j` joining coalition `u`.
pub fn incremental<O: ValueOracle + ?Sized>(oracle: &O, j: usize, u: FeatureSet) -> Result<f64> {
    if j >= oracle.arity() {
        return Err(Error::FeatureOutOfRange {
            j,
            d: oracle.arity(),
        });
    }
    if u.contains(j) {
        return Err(Error::FeatureInSubset(j));
    }
    Ok(oracle.value(u.with(j)) - oracle.value(u))
}

fn binomial(n: usize, k: usize) -> u64 {
    // Exact for the sizes used here (n < 64).
    let mut num: u128 = 1;
    for i in 0..k.min(n - k) {
        num = num * (n - i) as u128 / (i + 1) as u128;
    }
    num as u64
}

/// Exact Shapley values from a precomputed table of all subset values.
///
/// Increments are grouped by coalition size and each group is divided once
/// by the exact integer `d * C(d-1, k)`, avoiding per-term rounding from
/// tiny binomial reciprocals.
pub fn exact_shapley_from_table(table: &ValueTable) -> ShapleyAttribution {
    let d = table.d();
    let values = table.values();
    let full = (1usize << d) - 1;
    // acc[j][k]: sum of increments for feature j over coalitions of size k.
    let mut acc = vec![0.0f64; d * d.max(1)];
    for (u, &base) in values.iter().enumerate() {
        let k = u.count_ones() as usize;
        let mut absent = !u & full;
        while absent != 0 {
            let j = absent.trailing_zeros() as usize;
            absent &= absent - 1;
            acc[j * d + k] += values[u | (1 << j)] - base;
        }
    }
    let phi = (0..d)
        .map(|j| {
            (0..d)
                .map(|k| acc[j * d + k] / (d as u64 * binomial(d - 1, k)) as f64)
                .sum()
        })
        .collect();
    ShapleyAttribution {
        target: None,
        game: GameKind::Oracle,
        phi,
        nu_empty: values[0],
        nu_full: values[full],
        method: Method::Exact,
    }
}

/// Exact Shapley values by evaluating the oracle on every subset.
pub fn exact_shapley<O: ValueOracle + ?Sized>(oracle: &O) -> Result<ShapleyAttribution> {
    let d = oracle.arity();
    if d > EXACT_LIMIT {
        return Err(Error::ExactLimitExceeded {
            d,
            limit: EXACT_LIMIT,
        });
    }
    let values: Vec<f64> = (0u64..(1u64 << d))
        .into_par_iter()
        .map(|bits| oracle.value(FeatureSet::from_bits(bits)))
        .collect();
    Ok(exact_shapley_from_table(&ValueTable::new(d, values)))
}

/// Monte Carlo Shapley estimate from `n_perms` random feature orderings.
///
/// Each permutation contributes one increment per feature; the estimate is
/// the per-feature mean and `stderr` the standard error of that mean.
/// Permutation `k` draws from its own counter-based stream, so a fixed seed
/// reproduces the output bit for bit regardless of thread count.
pub fn mc_shapley<O: ValueOracle + ?Sized>(
    oracle: &O,
    n_perms: usize,
    seed: u64,
) -> Result<ShapleyAttribution> {
    let d = oracle.arity();
    if d == 0 || d > 63 {
        return Err(Error::ArityMismatch(format!(
            "monte carlo needs 1..=63 features, got {d}"
        )));
    }
    if n_perms == 0 {
        return Err(Error::Config {
            line: None,
            msg: "n_perms must be at least 1".to_string(),
        });
    }
    let credits: Vec<Vec<f64>> = (0..n_perms)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut order: Vec<usize> = (0..d).collect();
            order.shuffle(&mut rng);
            let mut chain = vec![0.0f64; d + 1];
            oracle.chain_values(&order, &mut chain);
            let mut credit = vec![0.0f64; d];
            for (m, &j) in order.iter().enumerate() {
                credit[j] = chain[m + 1] - chain[m];
            }
            credit
        })
        .collect();

    let mut phi = vec![0.0f64; d];
    for credit in &credits {
        for (p, c) in phi.iter_mut().zip(credit) {
            *p += c;
        }
    }
    for p in phi.iter_mut() {
        *p /= n_perms as f64;
    }
    let stderr = if n_perms < 2 {
        vec![0.0; d]
    } else {
        (0..d)
            .map(|j| {
                let var: f64 = credits
                    .iter()
                    .map(|c| {
                        let e = c[j] - phi[j];
                        e * e
                    })
                    .sum::<f64>()
                    / (n_perms - 1) as f64;
                (var / n_perms as f64).sqrt()
            })
            .collect()
    };
    Ok(ShapleyAttribution {
        target: None,
        game: GameKind::Oracle,
        phi,
        nu_empty: oracle.value(FeatureSet::EMPTY),
        nu_full: oracle.value(FeatureSet::full(d)),
        method: Method::Mc {
            n_perms,
            seed,
            stderr,
        },
    })
}

/// An oracle backed by a dense table of subset values.
pub struct TableOracle {
    table: ValueTable,
}

impl TableOracle {
    pub fn new(table: ValueTable) -> TableOracle {
        TableOracle { table }
    }
}

impl ValueOracle for TableOracle {
    fn arity(&self) -> usize {
        self.table.d()
    }

    fn value(&self, u: FeatureSet) -> f64 {
        self.table.value(u)
    }
}

/// Memoizing wrapper for expensive oracles.
///
/// Reads take a shared lock; a miss computes outside the lock and inserts
/// under the write lock. Because the inner oracle is deterministic, racing
/// writers insert identical values.
pub struct CachedOracle<O> {
    inner: O,
    cache: RwLock<HashMap<u64, f64>>,
}

impl<O: ValueOracle> CachedOracle<O> {
    pub fn new(inner: O) -> Self {
        CachedOracle {
            inner,
            cache: RwLock::new(HashMap::new()),
        }
    }
}

impl<O: ValueOracle> ValueOracle for CachedOracle<O> {
    fn arity(&self) -> usize {
        self.inner.arity()
    }

    fn value(&self, u: FeatureSet) -> f64 {
        if let Some(&v) = self.cache.read().expect("cache lock").get(&u.bits()) {
            return v;
        }
        let v = self.inner.value(u);
        self.cache.write().expect("cache lock").insert(u.bits(), v);
        v
    }
}
