//! Bitmask subsets of the feature index set `0..d`.

/// Exact-mode cap: a full table of `2^d` subset values is kept in memory,
/// so beyond this the Monte Carlo path must be used.
pub const EXACT_LIMIT: usize = 25;

/// A subset of features, one bit per feature index.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct FeatureSet(u64);

impl FeatureSet {
    pub const EMPTY: FeatureSet = FeatureSet(0);

    pub fn full(d: usize) -> FeatureSet {
        debug_assert!(d <= 63);
        FeatureSet((1u64 << d) - 1)
    }

    pub fn singleton(j: usize) -> FeatureSet {
        FeatureSet(1u64 << j)
    }

    pub fn from_bits(bits: u64) -> FeatureSet {
        FeatureSet(bits)
    }

    pub fn from_indices(indices: &[usize]) -> FeatureSet {
        let mut s = FeatureSet::EMPTY;
        for &j in indices {
            s = s.with(j);
        }
        s
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, j: usize) -> bool {
        self.0 >> j & 1 == 1
    }

    pub fn with(self, j: usize) -> FeatureSet {
        FeatureSet(self.0 | 1u64 << j)
    }

    pub fn without(self, j: usize) -> FeatureSet {
        FeatureSet(self.0 & !(1u64 << j))
    }

    /// Cardinality.
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn lowest(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0.trailing_zeros() as usize)
        }
    }

    pub fn complement(self, d: usize) -> FeatureSet {
        FeatureSet(!self.0 & FeatureSet::full(d).0)
    }

    pub fn union(self, other: FeatureSet) -> FeatureSet {
        FeatureSet(self.0 | other.0)
    }

    pub fn intersect(self, other: FeatureSet) -> FeatureSet {
        FeatureSet(self.0 & other.0)
    }

    /// Member indices in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let j = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(j)
            }
        })
    }

    /// All subsets of `self`, including the empty set and `self` itself.
    pub fn subsets(self) -> impl Iterator<Item = FeatureSet> {
        let top = self.0;
        let mut cur = Some(top);
        std::iter::from_fn(move || {
            let v = cur?;
            cur = if v == 0 { None } else { Some((v - 1) & top) };
            Some(FeatureSet(v))
        })
    }

    /// All `2^d` subsets of `0..d` in bitmask order.
    pub fn all(d: usize) -> impl Iterator<Item = FeatureSet> {
        (0u64..(1u64 << d)).map(FeatureSet)
    }

    /// Label like `{0,2,3}` used in diagnostics.
    pub fn describe(self) -> String {
        let parts: Vec<String> = self.iter().map(|j| j.to_string()).collect();
        format!("{{{}}}", parts.join(","))
    }
}
