//! Property tests for the structural invariants: binning partitions,
//! confusion-rate identities, cohort nesting and linearity, similarity
//! reflexivity and shared-bin transitivity.

mod common;

use cohort_shapley::response::confusion;
use cohort_shapley::{
    bin_continuous, build_mask, cohort, cohort_value, BinSpec, Dataset, FeatureColumn, FeatureSet,
    SimilarityRule, SimilaritySpec,
};
use proptest::prelude::*;

proptest! {
    /// Every non-missing value lands in exactly one bin, found equally well
    /// by an independent linear scan, and each bin's left edge maps to that
    /// bin (so re-binning representatives is idempotent).
    #[test]
    fn binning_is_a_partition(
        mut edges in proptest::collection::vec(-50.0f64..50.0, 2..8),
        values in proptest::collection::vec(-60.0f64..60.0, 1..40),
    ) {
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup();
        prop_assume!(edges.len() >= 2);
        let col = FeatureColumn::continuous("v", values.clone());
        let binned = bin_continuous(&col, &BinSpec::Edges(edges.clone())).unwrap();
        let codes = match &binned.data {
            cohort_shapley::ColumnData::Categorical(c) => c.codes.clone(),
            _ => unreachable!(),
        };
        let nbins = edges.len() - 1;
        for (i, &v) in values.iter().enumerate() {
            // Linear-scan oracle with explicit clamping of out-of-range
            // values to the end bins.
            let mut expect = nbins - 1;
            if v < edges[nbins] {
                for m in 0..nbins {
                    if v < edges[m + 1] {
                        expect = m;
                        break;
                    }
                }
            }
            prop_assert_eq!(codes[i] as usize, expect, "value {}", v);
        }
        // Left edges map into their own bin; the final right edge closes
        // the last interval.
        for m in 0..nbins {
            let col2 = FeatureColumn::continuous("e", vec![edges[m]]);
            let b2 = bin_continuous(&col2, &BinSpec::Edges(edges.clone())).unwrap();
            match &b2.data {
                cohort_shapley::ColumnData::Categorical(c) => {
                    prop_assert_eq!(c.codes[0] as usize, m)
                }
                _ => unreachable!(),
            }
        }
    }

    /// FPR = p/(1-p) * (1-PPV)/PPV * (1-FNR) whenever all four counts are
    /// positive, and the indicator means factor as FPR*(1-p) and FNR*p.
    #[test]
    fn confusion_rate_identities(
        pattern in proptest::collection::vec(0u8..4, 4..200),
    ) {
        let y: Vec<f64> = pattern.iter().map(|&c| f64::from(c / 2)).collect();
        let yhat: Vec<f64> = pattern.iter().map(|&c| f64::from(c % 2)).collect();
        let all: Vec<usize> = (0..y.len()).collect();
        let c = confusion(&y, &yhat, &all).unwrap();
        prop_assume!(c.n00 > 0 && c.n01 > 0 && c.n10 > 0 && c.n11 > 0);
        let (fpr, fnr, ppv, p) = (
            c.fpr().unwrap(),
            c.fnr().unwrap(),
            c.ppv().unwrap(),
            c.prevalence().unwrap(),
        );
        let rhs = p / (1.0 - p) * ((1.0 - ppv) / ppv) * (1.0 - fnr);
        prop_assert!((fpr - rhs).abs() <= 1e-12 * fpr.abs().max(1.0));

        let n = y.len() as f64;
        let fp_mean = y.iter().zip(&yhat)
            .filter(|(&a, &b)| a == 0.0 && b == 1.0)
            .count() as f64 / n;
        let fn_mean = y.iter().zip(&yhat)
            .filter(|(&a, &b)| a == 1.0 && b == 0.0)
            .count() as f64 / n;
        prop_assert!((fp_mean - fpr * (1.0 - p)).abs() < 1e-12);
        prop_assert!((fn_mean - fnr * p).abs() < 1e-12);
    }

    /// Cohorts shrink (weakly) as the conditioning subset grows, and the
    /// target never leaves them.
    #[test]
    fn cohorts_nest_and_keep_target(
        seed in any::<u64>(),
        n in 2usize..40,
        d in 1usize..7,
    ) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let ds = common::random_categorical_dataset(&mut rng, n, d);
        let t = (seed as usize) % n;
        let mask = build_mask(&ds, &SimilaritySpec::exact(d), t).unwrap();
        for bits in 0..(1u64 << d) {
            let u = FeatureSet::from_bits(bits);
            let cu = cohort(&mask, u).unwrap();
            prop_assert!(cu.members.contains(t));
            for j in 0..d {
                if !u.contains(j) {
                    let bigger = cohort(&mask, u.with(j)).unwrap();
                    prop_assert!(bigger.members.is_subset_of(&cu.members));
                    prop_assert!(bigger.size() <= cu.size());
                }
            }
        }
    }

    /// The cohort value function is linear in the response.
    #[test]
    fn cohort_value_linear_in_response(
        seed in any::<u64>(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..32usize);
        let d = rng.gen_range(1..5usize);
        let ds = common::random_categorical_dataset(&mut rng, n, d);
        let r1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let combo: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| a * x + b * y).collect();
        let t = rng.gen_range(0..n);
        let mask = build_mask(&ds, &SimilaritySpec::exact(d), t).unwrap();
        for bits in 0..(1u64 << d) {
            let u = FeatureSet::from_bits(bits);
            let v1 = cohort_value(&mask, u, &r1, None).unwrap();
            let v2 = cohort_value(&mask, u, &r2, None).unwrap();
            let vc = cohort_value(&mask, u, &combo, None).unwrap();
            prop_assert!((vc - (a * v1 + b * v2)).abs() <= 1e-10);
        }
    }

    /// Shared-bin similarity is an equivalence relation: rows in the same
    /// bin share one mask, so similarity is transitive.
    #[test]
    fn shared_bin_similarity_is_transitive(
        values in proptest::collection::vec(-10.0f64..10.0, 2..30),
        mut edges in proptest::collection::vec(-12.0f64..12.0, 2..6),
    ) {
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup();
        prop_assume!(edges.len() >= 2);
        let n = values.len();
        let ds = Dataset::new(
            vec![FeatureColumn::continuous("v", values)],
            vec![("y".into(), vec![0.0; n])],
        ).unwrap();
        let spec = SimilaritySpec { rules: vec![SimilarityRule::SharedBin(edges)] };
        let masks: Vec<_> = (0..n)
            .map(|t| build_mask(&ds, &spec, t).unwrap())
            .collect();
        for i in 0..n {
            prop_assert!(masks[i].feature_bits(0).contains(i), "reflexive");
            for k in 0..n {
                // Symmetric, and transitive via mask equality.
                prop_assert_eq!(
                    masks[i].feature_bits(0).contains(k),
                    masks[k].feature_bits(0).contains(i)
                );
                if masks[i].feature_bits(0).contains(k) {
                    prop_assert_eq!(masks[i].feature_bits(0), masks[k].feature_bits(0));
                }
            }
        }
    }

    /// Window similarity is reflexive for any target, including missing.
    #[test]
    fn window_similarity_is_reflexive(
        mut values in proptest::collection::vec(-10.0f64..10.0, 1..30),
        delta in 0.001f64..5.0,
        missing_at in any::<proptest::sample::Index>(),
    ) {
        let i = missing_at.index(values.len());
        values[i] = f64::NAN;
        let n = values.len();
        let ds = Dataset::new(
            vec![FeatureColumn::continuous("v", values)],
            vec![("y".into(), vec![0.0; n])],
        ).unwrap();
        for rule in [SimilarityRule::AbsWindow(delta), SimilarityRule::RelWindow(delta)] {
            let spec = SimilaritySpec { rules: vec![rule] };
            for t in 0..n {
                let mask = build_mask(&ds, &spec, t).unwrap();
                prop_assert!(mask.feature_bits(0).contains(t));
            }
        }
    }
}

/// With categorical features, the cohort value is the empirical conditional
/// expectation given the target's levels on the conditioning subset.
#[test]
fn cohort_value_is_conditional_expectation() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31337);
    let ds = common::random_categorical_dataset(&mut rng, 40, 5);
    let respv = ds.response_named("y").unwrap().to_vec();
    for t in [0usize, 7, 39] {
        let brute = common::brute_force_lattice(&ds, t, &respv);
        let mask = build_mask(&ds, &SimilaritySpec::exact(5), t).unwrap();
        for (bits, expect) in brute.iter().enumerate() {
            let u = FeatureSet::from_bits(bits as u64);
            let got = cohort_value(&mask, u, &respv, None).unwrap();
            assert!((got - expect).abs() < 1e-12);
        }
    }
}
