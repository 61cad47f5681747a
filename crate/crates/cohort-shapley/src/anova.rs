//! Functional ANOVA on finite product distributions, Sobol' indices, and
//! variance-based Shapley effects.
//!
//! The grid is deliberately small and explicit: independent per-dimension
//! level distributions with a function value at every joint point, so the
//! decomposition is computed exactly by conditional means rather than by
//! quadrature. Sampling-based estimation lives in [`crate::pickfreeze`].

use std::io::Read;

use crate::error::{Error, Result};
use crate::subset::FeatureSet;

/// Levels and probabilities of one independent input dimension.
#[derive(Clone, Debug)]
pub struct GridDim {
    pub name: String,
    pub levels: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GridDim {
    pub fn uniform(name: &str, levels: Vec<f64>) -> GridDim {
        let k = levels.len();
        GridDim {
            name: name.to_string(),
            levels,
            weights: vec![1.0 / k as f64; k],
        }
    }

    /// Uniform on {0, 1}.
    pub fn binary(name: &str) -> GridDim {
        GridDim::uniform(name, vec![0.0, 1.0])
    }
}

/// Maximum number of joint points.
pub const GRID_POINT_LIMIT: u64 = 10_000_000;
/// Maximum total size of all effect tables, `prod_j (1 + k_j)`.
pub const EFFECT_TABLE_LIMIT: u64 = 50_000_000;
const GRID_DIM_LIMIT: usize = 20;

/// A full factorial design: every joint level combination carries a product
/// weight and a function value.
#[derive(Clone, Debug)]
pub struct ProductGrid {
    dims: Vec<GridDim>,
    /// Row-major over levels, first dimension slowest.
    values: Vec<f64>,
}

impl ProductGrid {
    pub fn new(dims: Vec<GridDim>, values: Vec<f64>) -> Result<ProductGrid> {
        if dims.is_empty() {
            return Err(Error::BadGridDimension {
                dim: 0,
                msg: "grid needs at least one dimension".into(),
            });
        }
        if dims.len() > GRID_DIM_LIMIT {
            return Err(Error::BadGridDimension {
                dim: dims.len(),
                msg: format!("at most {GRID_DIM_LIMIT} dimensions supported"),
            });
        }
        let mut n_points: u128 = 1;
        let mut table_total: u128 = 1;
        for (j, dim) in dims.iter().enumerate() {
            if dim.levels.is_empty() || dim.levels.len() != dim.weights.len() {
                return Err(Error::BadGridDimension {
                    dim: j,
                    msg: "levels and weights must be nonempty and equal length".into(),
                });
            }
            if dim.weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
                return Err(Error::BadGridDimension {
                    dim: j,
                    msg: "weights must be nonnegative and finite".into(),
                });
            }
            let sum: f64 = dim.weights.iter().sum();
            if sum <= 0.0 {
                return Err(Error::BadGridDimension {
                    dim: j,
                    msg: "weights must not all be zero".into(),
                });
            }
            n_points *= dim.levels.len() as u128;
            table_total *= (1 + dim.levels.len()) as u128;
        }
        if n_points > GRID_POINT_LIMIT as u128 {
            return Err(Error::GridTooLarge {
                points: n_points,
                limit: GRID_POINT_LIMIT,
            });
        }
        if table_total > EFFECT_TABLE_LIMIT as u128 {
            return Err(Error::GridTooLarge {
                points: table_total,
                limit: EFFECT_TABLE_LIMIT,
            });
        }
        if values.len() != n_points as usize {
            return Err(Error::GridValuesLength {
                got: values.len(),
                want: n_points as usize,
            });
        }
        // Normalize each dimension to an exact probability distribution.
        let dims = dims
            .into_iter()
            .map(|mut d| {
                let sum: f64 = d.weights.iter().sum();
                for w in d.weights.iter_mut() {
                    *w /= sum;
                }
                d
            })
            .collect();
        Ok(ProductGrid { dims, values })
    }

    pub fn from_fn(dims: Vec<GridDim>, mut f: impl FnMut(&[f64]) -> f64) -> Result<ProductGrid> {
        let cards: Vec<usize> = dims.iter().map(|d| d.levels.len()).collect();
        let n: usize = cards.iter().product();
        let mut levels = vec![0usize; dims.len()];
        let mut point = vec![0.0f64; dims.len()];
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            for (j, &l) in levels.iter().enumerate() {
                point[j] = dims[j].levels[l];
            }
            values.push(f(&point));
            advance(&mut levels, &cards);
        }
        ProductGrid::new(dims, values)
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[GridDim] {
        &self.dims
    }

    pub fn n_points(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn cards(&self) -> Vec<usize> {
        self.dims.iter().map(|d| d.levels.len()).collect()
    }
}

/// Odometer increment over mixed-radix digits, first digit slowest.
fn advance(levels: &mut [usize], cards: &[usize]) {
    for j in (0..levels.len()).rev() {
        levels[j] += 1;
        if levels[j] < cards[j] {
            return;
        }
        levels[j] = 0;
    }
}

/// Variance components `sigma2[u]` of the decomposition, indexed by subset
/// bitmask, together with the grand mean and total variance.
#[derive(Clone, Debug)]
pub struct VarianceComponents {
    pub d: usize,
    pub mu: f64,
    pub sigma2: Vec<f64>,
    pub total: f64,
}

/// The full decomposition: orthogonal effect tables for every subset.
#[derive(Clone, Debug)]
pub struct AnovaDecomposition {
    d: usize,
    cards: Vec<usize>,
    mu: f64,
    /// Effect table per subset mask; table for `u` is mixed-radix over the
    /// dims in `u`, ascending, first listed dim slowest.
    effects: Vec<Vec<f64>>,
    sigma2: Vec<f64>,
    total: f64,
}

impl AnovaDecomposition {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn components(&self) -> VarianceComponents {
        VarianceComponents {
            d: self.d,
            mu: self.mu,
            sigma2: self.sigma2.clone(),
            total: self.total,
        }
    }

    /// Effect `f_u` evaluated at the joint point with the given per-dim levels.
    pub fn effect_at(&self, u: FeatureSet, levels: &[usize]) -> f64 {
        let table = &self.effects[u.bits() as usize];
        table[self.cell_index(u, levels)]
    }

    /// Sum of all effects at a point; reconstructs `f` there.
    pub fn reconstruct(&self, levels: &[usize]) -> f64 {
        FeatureSet::all(self.d)
            .map(|u| self.effect_at(u, levels))
            .sum()
    }

    fn cell_index(&self, u: FeatureSet, levels: &[usize]) -> usize {
        let mut idx = 0usize;
        for j in u.iter() {
            idx = idx * self.cards[j] + levels[j];
        }
        idx
    }
}

/// Exact functional ANOVA of the grid.
///
/// Conditional-mean tables are built in increasing subset order; each
/// effect subtracts every proper-subset effect, and its variance component
/// is the weighted sum of squares (the effects have mean zero under the
/// product weights, and the empty-set component is zero by definition).
pub fn anova(grid: &ProductGrid) -> Result<AnovaDecomposition> {
    let d = grid.d();
    let cards = grid.cards();
    let nsub = 1usize << d;

    // Conditional means M_u(x_u) = sum over the complement of f * weight.
    let mut cond_means: Vec<Vec<f64>> = Vec::with_capacity(nsub);
    for bits in 0..nsub {
        let u = FeatureSet::from_bits(bits as u64);
        let table_len: usize = u.iter().map(|j| cards[j]).product();
        let mut table = vec![0.0f64; table_len];
        let mut levels = vec![0usize; d];
        for &value in grid.values.iter() {
            let mut cell = 0usize;
            let mut wcomp = 1.0f64;
            for j in 0..d {
                if u.contains(j) {
                    cell = cell * cards[j] + levels[j];
                } else {
                    wcomp *= grid.dims[j].weights[levels[j]];
                }
            }
            table[cell] += value * wcomp;
            advance(&mut levels, &cards);
        }
        cond_means.push(table);
    }
    let mu = cond_means[0][0];

    // Effects: subtract every proper-subset effect from the conditional mean.
    let mut effects: Vec<Vec<f64>> = Vec::with_capacity(nsub);
    let mut sigma2 = vec![0.0f64; nsub];
    for bits in 0..nsub {
        let u = FeatureSet::from_bits(bits as u64);
        let mut table = std::mem::take(&mut cond_means[bits]);
        let udims: Vec<usize> = u.iter().collect();
        let ucards: Vec<usize> = udims.iter().map(|&j| cards[j]).collect();
        let mut ulevels = vec![0usize; udims.len()];
        let mut full_levels = vec![0usize; d];
        for cell_value in table.iter_mut() {
            for (m, &j) in udims.iter().enumerate() {
                full_levels[j] = ulevels[m];
            }
            let mut correction = 0.0;
            for v in u.subsets() {
                if v != u {
                    let mut vidx = 0usize;
                    for j in v.iter() {
                        vidx = vidx * cards[j] + full_levels[j];
                    }
                    correction += effects[v.bits() as usize][vidx];
                }
            }
            *cell_value -= correction;
            advance(&mut ulevels, &ucards);
        }
        if bits != 0 {
            let mut var = 0.0;
            let mut ulevels = vec![0usize; udims.len()];
            for &e in table.iter() {
                let mut w = 1.0;
                for (m, &j) in udims.iter().enumerate() {
                    w *= grid.dims[j].weights[ulevels[m]];
                }
                var += w * e * e;
                advance(&mut ulevels, &ucards);
            }
            sigma2[bits] = var;
        }
        effects.push(table);
    }
    let total = sigma2.iter().sum();
    Ok(AnovaDecomposition {
        d,
        cards,
        mu,
        effects,
        sigma2,
        total,
    })
}

/// Closed Sobol' index: variance explained by the features in `u` alone.
pub fn sobol_closed(vc: &VarianceComponents, u: FeatureSet) -> f64 {
    u.subsets().map(|v| vc.sigma2[v.bits() as usize]).sum()
}

/// Total Sobol' index: variance involving any feature in `u`, via the
/// complement identity `total - closed(-u)`.
pub fn sobol_total(vc: &VarianceComponents, u: FeatureSet) -> f64 {
    vc.total - sobol_closed(vc, u.complement(vc.d))
}

/// Variance-based Shapley effects: each component is shared equally among
/// the features it involves.
pub fn shapley_effects(vc: &VarianceComponents) -> Vec<f64> {
    let mut phi = vec![0.0f64; vc.d];
    for (bits, &s2) in vc.sigma2.iter().enumerate() {
        if bits == 0 || s2 == 0.0 {
            continue;
        }
        let u = FeatureSet::from_bits(bits as u64);
        let share = s2 / u.len() as f64;
        for j in u.iter() {
            phi[j] += share;
        }
    }
    phi
}

/// Parses a grid from CSV rows `level_1,...,level_d,weight,f`.
///
/// The rows must enumerate a complete product grid exactly once and the
/// joint weights must factor into per-dimension marginals.
pub fn read_grid_csv(source: impl Read) -> Result<ProductGrid> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv {
            line: 1,
            msg: e.to_string(),
        })?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if headers.len() < 3
        || headers[headers.len() - 2] != "weight"
        || headers[headers.len() - 1] != "f"
    {
        return Err(Error::NotProductGrid(
            "header must be level columns followed by `weight,f`".into(),
        ));
    }
    let d = headers.len() - 2;
    let mut rows: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv {
            line: e.position().map(|p| p.line()).unwrap_or_default(),
            msg: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or_default();
        let mut nums = Vec::with_capacity(headers.len());
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::BadNumericCell {
                line,
                column: headers[c].clone(),
                cell: cell.to_string(),
            })?;
            nums.push(v);
        }
        if nums.len() != headers.len() {
            return Err(Error::RaggedRow {
                line,
                expected: headers.len(),
                found: nums.len(),
            });
        }
        rows.push((nums[..d].to_vec(), nums[d], nums[d + 1]));
    }
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }

    // Per-dimension level lists in first-appearance order.
    let mut levels: Vec<Vec<f64>> = vec![Vec::new(); d];
    for (point, _, _) in &rows {
        for (j, &v) in point.iter().enumerate() {
            if !levels[j].contains(&v) {
                levels[j].push(v);
            }
        }
    }
    let cards: Vec<usize> = levels.iter().map(|l| l.len()).collect();
    let n: usize = cards.iter().product();
    if rows.len() != n {
        return Err(Error::NotProductGrid(format!(
            "{} rows but the level lists imply {} joint points",
            rows.len(),
            n
        )));
    }

    // Marginal weights by summation, then verify the product structure.
    let total_weight: f64 = rows.iter().map(|(_, w, _)| *w).sum();
    if total_weight.is_nan() || total_weight <= 0.0 {
        return Err(Error::NotProductGrid("weights sum to zero".into()));
    }
    let mut marginals: Vec<Vec<f64>> = cards.iter().map(|&k| vec![0.0; k]).collect();
    let level_of = |j: usize, v: f64| levels[j].iter().position(|&l| l == v).unwrap();
    for (point, w, _) in &rows {
        for (j, &v) in point.iter().enumerate() {
            marginals[j][level_of(j, v)] += w / total_weight;
        }
    }
    let mut values = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for (point, w, f) in &rows {
        let mut idx = 0usize;
        for (j, &v) in point.iter().enumerate() {
            idx = idx * cards[j] + level_of(j, v);
        }
        if seen[idx] {
            return Err(Error::NotProductGrid(format!(
                "duplicate joint point {point:?}"
            )));
        }
        seen[idx] = true;
        values[idx] = *f;
        let product: f64 = point
            .iter()
            .enumerate()
            .map(|(j, &v)| marginals[j][level_of(j, v)])
            .product();
        if (w / total_weight - product).abs() > 1e-9 {
            return Err(Error::NotProductGrid(format!(
                "joint weight at {point:?} does not factor into marginals"
            )));
        }
    }
    let dims = headers[..d]
        .iter()
        .zip(levels)
        .zip(marginals)
        .map(|((name, levels), weights)| GridDim {
            name: name.clone(),
            levels,
            weights,
        })
        .collect();
    ProductGrid::new(dims, values)
}
