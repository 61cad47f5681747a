//! Fixed-width bitsets over observation indices.
//!
//! Cohort queries reduce to word-wise AND, popcount, and masked sums over
//! these sets, so the representation is a plain `Vec<u64>` with the tail
//! bits of the last word kept clear.

/// A set of observation indices `0..len`, one bit per observation.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Bitset {
    words: Vec<u64>,
    len: usize,
}

impl Bitset {
    pub fn empty(len: usize) -> Self {
        Bitset {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Bitset {
            words: vec![!0u64; len.div_ceil(64)],
            len,
        };
        s.clear_tail();
        s
    }

    /// Bits set exactly where `pred(i)` holds.
    pub fn from_fn(len: usize, mut pred: impl FnMut(usize) -> bool) -> Self {
        let mut s = Bitset::empty(len);
        for i in 0..len {
            if pred(i) {
                s.insert(i);
            }
        }
        s
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / 64] |= 1u64 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// Number of set bits.
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Intersection into a freshly allocated set.
    pub fn and(&self, other: &Bitset) -> Bitset {
        debug_assert_eq!(self.len, other.len);
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a & b)
            .collect();
        Bitset {
            words,
            len: self.len,
        }
    }

    /// Writes `self & other` into `out`, which must have the same length.
    pub fn and_into(&self, other: &Bitset, out: &mut Bitset) {
        debug_assert_eq!(self.len, other.len);
        debug_assert_eq!(self.len, out.len);
        for ((o, a), b) in out.words.iter_mut().zip(&self.words).zip(&other.words) {
            *o = a & b;
        }
    }

    /// In-place intersection.
    pub fn and_assign(&mut self, other: &Bitset) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    /// Whether every bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Bitset) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let base = wi * 64;
            std::iter::successors(if w == 0 { None } else { Some(w) }, |&rest| {
                let rest = rest & (rest - 1);
                if rest == 0 {
                    None
                } else {
                    Some(rest)
                }
            })
            .map(move |bits| base + bits.trailing_zeros() as usize)
        })
    }

    pub fn to_indices(&self) -> Vec<usize> {
        self.iter_ones().collect()
    }

    /// Sum of `vals[i]` over set bits, plus the number of set bits.
    ///
    /// Accumulation runs in ascending index order, so the result is
    /// bit-identical no matter how the set was produced.
    pub fn sum_count(&self, vals: &[f64]) -> (f64, usize) {
        debug_assert_eq!(vals.len(), self.len);
        let mut sum = 0.0;
        let mut count = 0usize;
        for (wi, &w) in self.words.iter().enumerate() {
            if w == 0 {
                continue;
            }
            count += w.count_ones() as usize;
            let base = wi * 64;
            let mut bits = w;
            while bits != 0 {
                let i = base + bits.trailing_zeros() as usize;
                sum += vals[i];
                bits &= bits - 1;
            }
        }
        (sum, count)
    }

    /// Sums of `a[i]` and `b[i]` over set bits in one pass.
    pub fn sum2(&self, a: &[f64], b: &[f64]) -> (f64, f64) {
        debug_assert_eq!(a.len(), self.len);
        debug_assert_eq!(b.len(), self.len);
        let mut sa = 0.0;
        let mut sb = 0.0;
        for (wi, &w) in self.words.iter().enumerate() {
            if w == 0 {
                continue;
            }
            let base = wi * 64;
            let mut bits = w;
            while bits != 0 {
                let i = base + bits.trailing_zeros() as usize;
                sa += a[i];
                sb += b[i];
                bits &= bits - 1;
            }
        }
        (sa, sb)
    }

    /// `(self & other).sum_count(vals)` without materializing the intersection.
    pub fn and_sum_count(&self, other: &Bitset, vals: &[f64]) -> (f64, usize) {
        debug_assert_eq!(self.len, other.len);
        let mut sum = 0.0;
        let mut count = 0usize;
        for (wi, (&a, &b)) in self.words.iter().zip(&other.words).enumerate() {
            let w = a & b;
            if w == 0 {
                continue;
            }
            count += w.count_ones() as usize;
            let base = wi * 64;
            let mut bits = w;
            while bits != 0 {
                let i = base + bits.trailing_zeros() as usize;
                sum += vals[i];
                bits &= bits - 1;
            }
        }
        (sum, count)
    }

    /// `(self & other).sum2(a, b)` without materializing the intersection.
    pub fn and_sum2(&self, other: &Bitset, a: &[f64], b: &[f64]) -> (f64, f64) {
        debug_assert_eq!(self.len, other.len);
        let mut sa = 0.0;
        let mut sb = 0.0;
        for (wi, (&x, &y)) in self.words.iter().zip(&other.words).enumerate() {
            let w = x & y;
            if w == 0 {
                continue;
            }
            let base = wi * 64;
            let mut bits = w;
            while bits != 0 {
                let i = base + bits.trailing_zeros() as usize;
                sa += a[i];
                sb += b[i];
                bits &= bits - 1;
            }
        }
        (sa, sb)
    }
}
