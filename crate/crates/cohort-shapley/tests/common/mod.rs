//! Shared fixtures and independent oracles for the integration suites.
//!
//! Everything here recomputes results from first principles (per-row scans,
//! exhaustive permutations) so the main implementation has something
//! genuinely independent to agree with.
#![allow(dead_code)]

use cohort_shapley::dataset::{CategoricalData, ColumnData};
use cohort_shapley::{Dataset, FeatureColumn, FeatureSet, TableOracle, ValueOracle, ValueTable};
use rand::Rng;

pub const EXAMPLE_ROWS_P: [[u8; 3]; 8] = [
    [0, 0, 0],
    [0, 0, 1],
    [0, 1, 0],
    [0, 1, 1],
    [1, 0, 0],
    [1, 0, 1],
    [1, 1, 0],
    [1, 1, 1],
];

fn f1(r: &[u8; 3]) -> f64 {
    r[0] as f64 - 2.0 * r[1] as f64
}

fn f2(r: &[u8; 3]) -> f64 {
    (r[0] * r[1] * (1 - r[2])) as f64
}

fn example_from(rows: &[[u8; 3]]) -> Dataset {
    let cols: Vec<FeatureColumn> = (0..3)
        .map(|j| {
            let cells: Vec<String> = rows.iter().map(|r| r[j].to_string()).collect();
            FeatureColumn::categorical(&format!("x{}", j + 1), &cells)
        })
        .collect();
    let f1v: Vec<f64> = rows.iter().map(f1).collect();
    let f2v: Vec<f64> = rows.iter().map(f2).collect();
    Dataset::new(cols, vec![("f1".into(), f1v), ("f2".into(), f2v)]).unwrap()
}

/// All eight binary rows observed: the independent distribution.
pub fn running_example_p() -> Dataset {
    example_from(&EXAMPLE_ROWS_P)
}

/// The same rows with (1,1,0) unobserved: the dependent distribution.
pub fn running_example_p_star() -> Dataset {
    let rows: Vec<[u8; 3]> = EXAMPLE_ROWS_P
        .iter()
        .copied()
        .filter(|r| *r != [1, 1, 0])
        .collect();
    example_from(&rows)
}

/// Cohort means for every subset by independent per-subset recomputation:
/// a fresh row scan per subset, no bitsets, no shared intersections.
/// Exact-match similarity on categorical codes.
pub fn brute_force_lattice(ds: &Dataset, t: usize, resp: &[f64]) -> Vec<f64> {
    let d = ds.d();
    let codes: Vec<&[u32]> = ds
        .features()
        .iter()
        .map(|f| match &f.data {
            ColumnData::Categorical(c) => c.codes.as_slice(),
            _ => panic!("brute force oracle expects categorical features"),
        })
        .collect();
    (0..1usize << d)
        .map(|bits| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for i in 0..ds.n() {
                let similar = (0..d)
                    .filter(|j| bits >> j & 1 == 1)
                    .all(|j| codes[j][i] == codes[j][t]);
                if similar {
                    sum += resp[i];
                    count += 1;
                }
            }
            sum / count as f64
        })
        .collect()
}

/// Averages increments over all `d!` feature orderings; cost is factorial
/// on purpose, as the independent cross-check of the weighted-subset form.
pub fn shapley_by_all_permutations<O: ValueOracle + ?Sized>(oracle: &O) -> Vec<f64> {
    let d = oracle.arity();
    let mut order: Vec<usize> = (0..d).collect();
    let mut phi = vec![0.0f64; d];
    let mut count = 0usize;
    permute(&mut order, 0, &mut |perm| {
        let mut u = FeatureSet::EMPTY;
        let mut prev = oracle.value(u);
        for &j in perm {
            u = u.with(j);
            let cur = oracle.value(u);
            phi[j] += cur - prev;
            prev = cur;
        }
        count += 1;
    });
    for p in phi.iter_mut() {
        *p /= count as f64;
    }
    phi
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// A dense random value function on `2^d` subsets.
pub fn random_table_oracle(rng: &mut impl Rng, d: usize) -> TableOracle {
    let values: Vec<f64> = (0..1usize << d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    TableOracle::new(ValueTable::new(d, values))
}

/// Random categorical dataset: `d` columns with 2-4 levels each.
pub fn random_categorical_dataset(rng: &mut impl Rng, n: usize, d: usize) -> Dataset {
    let features = (0..d)
        .map(|j| {
            let k = rng.gen_range(2..=4u32);
            let codes: Vec<u32> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            let labels = (0..k).map(|l| format!("l{l}")).collect();
            FeatureColumn {
                name: format!("x{j}"),
                data: ColumnData::Categorical(CategoricalData { codes, labels }),
            }
        })
        .collect();
    let resp: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Dataset::new(features, vec![("y".into(), resp)]).unwrap()
}
