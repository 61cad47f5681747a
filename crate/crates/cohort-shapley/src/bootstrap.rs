//! Bayesian-bootstrap uncertainty for cohort Shapley values.
//!
//! Each replicate reweights every observation by an independent unit-mean
//! exponential draw and recomputes the weighted attributions: the weighted
//! grand mean, weighted cohort means, and (for group series) a weighted
//! mean over group members using the same replicate weights. No observation
//! is ever dropped, so per-target uncertainty is well defined.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::attribute::target_cells;
use crate::bitset::Bitset;
use crate::cohort::{lattice_cohorts, lattice_values, values_from_cohorts};
use crate::dataset::{quantile_sorted, Dataset};
use crate::error::{Error, Result};
use crate::response::ResponseVector;
use crate::shapley::exact_shapley_from_table;
use crate::similarity::{build_mask, SimilarityMask, SimilaritySpec};

/// What to track across replicates.
#[derive(Clone, Debug)]
pub enum BootstrapTask<'a> {
    /// Per-target attribution series.
    Targets(&'a [usize]),
    /// Weighted group means of member attributions; members are row
    /// indices, resolved by the caller.
    Groups(&'a [(String, Vec<usize>)]),
}

/// One tracked series: an attribution vector per replicate.
#[derive(Clone, Debug)]
pub struct BootstrapSeries {
    pub label: String,
    /// `samples[k][j]`: replicate `k`, feature `j`.
    pub samples: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct BootstrapRun {
    pub replicates: usize,
    pub seed: u64,
    pub d: usize,
    /// Replicate weight vectors, `weights[k][i] > 0`.
    pub weights: Vec<Vec<f64>>,
    pub series: Vec<BootstrapSeries>,
}

/// `r` vectors of `n` i.i.d. unit-mean exponential weights.
///
/// Replicate `k` draws from stream `k` of a counter-based generator, so the
/// matrix is reproducible for a fixed seed no matter how work is split.
pub fn bb_weights(n: usize, r: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::EmptyTable);
    }
    if r == 0 {
        return Err(Error::TooFewReplicates { need: 1, got: 0 });
    }
    Ok((0..r)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            (0..n)
                .map(|_| {
                    let w: f64 = Exp1.sample(&mut rng);
                    // An exact zero would delete the observation; clamp to
                    // the smallest positive weight instead.
                    w.max(f64::MIN_POSITIVE)
                })
                .collect()
        })
        .collect())
}

/// Bootstrap with freshly drawn exponential weights.
pub fn bootstrap_attributions(
    ds: &Dataset,
    spec: &SimilaritySpec,
    task: BootstrapTask<'_>,
    resp: &ResponseVector,
    r: usize,
    seed: u64,
) -> Result<BootstrapRun> {
    let weights = bb_weights(ds.n(), r, seed)?;
    bootstrap_with_weights(ds, spec, task, resp, weights, seed)
}

/// Memory cap for keeping all cohort bitsets of the deduplicated targets.
const COHORT_CACHE_BYTES: usize = 256 << 20;

/// Bootstrap over caller-supplied weight matrices (each row one replicate).
///
/// With every weight equal to one this reproduces the unweighted pipeline
/// bit for bit, which the tests pin down.
pub fn bootstrap_with_weights(
    ds: &Dataset,
    spec: &SimilaritySpec,
    task: BootstrapTask<'_>,
    resp: &ResponseVector,
    weights: Vec<Vec<f64>>,
    seed: u64,
) -> Result<BootstrapRun> {
    if weights.is_empty() {
        return Err(Error::TooFewReplicates { need: 1, got: 0 });
    }
    if resp.values.len() != ds.n() {
        return Err(Error::LengthMismatch(resp.values.len(), ds.n()));
    }
    for w in &weights {
        if w.len() != ds.n() {
            return Err(Error::LengthMismatch(w.len(), ds.n()));
        }
    }
    spec.validate(ds)?;

    // Targets whose attribution any series needs.
    let needed: Vec<usize> = match &task {
        BootstrapTask::Targets(ts) => ts.to_vec(),
        BootstrapTask::Groups(gs) => {
            let mut all: Vec<usize> = gs.iter().flat_map(|(_, m)| m.iter().copied()).collect();
            all.sort_unstable();
            all.dedup();
            all
        }
    };
    if needed.is_empty() {
        return Err(Error::EmptySelection);
    }
    for &t in &needed {
        if t >= ds.n() {
            return Err(Error::TargetOutOfRange { t, n: ds.n() });
        }
    }

    // Targets sharing a similarity mask share every weighted attribution.
    let (cell_of_needed, reps) = target_cells(ds, spec, &needed);
    let masks: Vec<SimilarityMask> = reps
        .par_iter()
        .map(|&t| build_mask(ds, spec, t))
        .collect::<Result<Vec<_>>>()?;

    let d = ds.d();
    let words = ds.n().div_ceil(64);
    let cache_cohorts =
        d <= 25 && masks.len().saturating_mul((1usize << d) * words * 8) <= COHORT_CACHE_BYTES;
    let cohorts: Option<Vec<Vec<Bitset>>> = if cache_cohorts {
        Some(
            masks
                .par_iter()
                .map(lattice_cohorts)
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };

    let cell_index: std::collections::HashMap<usize, usize> = needed
        .iter()
        .zip(&cell_of_needed)
        .map(|(&t, &c)| (t, c))
        .collect();

    // Replicates are independent; results are collected in replicate order.
    let per_replicate: Vec<Vec<Vec<f64>>> = weights
        .par_iter()
        .map(|w| -> Result<Vec<Vec<f64>>> {
            let cell_phi: Vec<Vec<f64>> = (0..reps.len())
                .map(|c| {
                    let table = match &cohorts {
                        Some(all) => values_from_cohorts(&all[c], &resp.values, Some(w), reps[c])?,
                        None => lattice_values(&masks[c], &resp.values, Some(w))?,
                    };
                    Ok(exact_shapley_from_table(&table).phi)
                })
                .collect::<Result<Vec<_>>>()?;
            let rows = match &task {
                BootstrapTask::Targets(ts) => {
                    ts.iter().map(|t| cell_phi[cell_index[t]].clone()).collect()
                }
                BootstrapTask::Groups(gs) => gs
                    .iter()
                    .map(|(_, members)| {
                        let mut num = vec![0.0f64; d];
                        let mut den = 0.0f64;
                        for &t in members {
                            let wt = w[t];
                            den += wt;
                            for (acc, p) in num.iter_mut().zip(&cell_phi[cell_index[&t]]) {
                                *acc += wt * p;
                            }
                        }
                        num.iter().map(|v| v / den).collect()
                    })
                    .collect(),
            };
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;

    let labels: Vec<String> = match &task {
        BootstrapTask::Targets(ts) => ts.iter().map(|t| format!("target:{t}")).collect(),
        BootstrapTask::Groups(gs) => gs.iter().map(|(name, _)| name.clone()).collect(),
    };
    let series = labels
        .into_iter()
        .enumerate()
        .map(|(s, label)| BootstrapSeries {
            label,
            samples: per_replicate.iter().map(|rep| rep[s].clone()).collect(),
        })
        .collect();
    Ok(BootstrapRun {
        replicates: weights.len(),
        seed,
        d,
        weights,
        series,
    })
}

/// Per-feature distribution summary of one bootstrap series.
#[derive(Clone, Debug)]
pub struct FeatureSummary {
    pub series: String,
    pub feature: usize,
    pub mean: f64,
    pub sd: f64,
    /// `(probability, value)` pairs in the order requested.
    pub quantiles: Vec<(f64, f64)>,
    /// `(value, density)` polyline for violin plots.
    pub violin: Vec<(f64, f64)>,
}

const VIOLIN_POINTS: usize = 64;

fn violin_polyline(values: &[f64], sd: f64) -> Vec<(f64, f64)> {
    let r = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite attribution values"));
    if sd == 0.0 {
        return vec![(sorted[0], 1.0)];
    }
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let bw = 0.9 * spread * r.powf(-0.2);
    let lo = sorted[0] - 3.0 * bw;
    let hi = sorted[sorted.len() - 1] + 3.0 * bw;
    let norm = 1.0 / (r * bw * (2.0 * std::f64::consts::PI).sqrt());
    (0..VIOLIN_POINTS)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (VIOLIN_POINTS - 1) as f64;
            let dens: f64 = values
                .iter()
                .map(|&v| {
                    let z = (x - v) / bw;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm;
            (x, dens)
        })
        .collect()
}

/// Mean, standard deviation, quantiles, and a violin polyline per
/// (series, feature). Needs at least two replicates.
pub fn summarize(run: &BootstrapRun, quantiles: &[f64]) -> Result<Vec<FeatureSummary>> {
    if run.replicates < 2 {
        return Err(Error::TooFewReplicates {
            need: 2,
            got: run.replicates,
        });
    }
    let r = run.replicates as f64;
    let mut out = Vec::new();
    for series in &run.series {
        for j in 0..run.d {
            let col: Vec<f64> = series.samples.iter().map(|s| s[j]).collect();
            let mean = col.iter().sum::<f64>() / r;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0);
            let sd = var.sqrt();
            let mut sorted = col.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite attribution values"));
            let qs = quantiles
                .iter()
                .map(|&p| (p, quantile_sorted(&sorted, p)))
                .collect();
            out.push(FeatureSummary {
                series: series.label.clone(),
                feature: j,
                mean,
                sd,
                quantiles: qs,
                violin: violin_polyline(&col, sd),
            });
        }
    }
    Ok(out)
}
