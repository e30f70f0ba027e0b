//! The approximate-index contract shared by every structure in the crate.
//!
//! An index maps a lookup key to a [`SearchBound`] that must contain the
//! key's lower bound in the underlying [`SortedDataset`]. A last-mile search
//! then resolves the exact position inside that bound.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Key, SortedDataset};
use crate::error::{Error, Result};

/// Half-open position interval `[lo, hi)`.
///
/// `hi` may be `n + 1` so that a lower bound of `n` (key above every stored
/// key) can be contained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SearchBound {
    pub lo: usize,
    pub hi: usize,
}

impl SearchBound {
    #[inline]
    pub fn new(lo: usize, hi: usize) -> Self {
        debug_assert!(lo < hi, "empty search bound [{lo}, {hi})");
        SearchBound { lo, hi }
    }

    /// The bound covering every possible lower bound of an `n`-key array.
    #[inline]
    pub fn full(n: usize) -> Self {
        SearchBound { lo: 0, hi: n + 1 }
    }

    #[inline]
    pub fn contains(&self, pos: usize) -> bool {
        self.lo <= pos && pos < self.hi
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.hi - self.lo
    }

    /// Expected number of binary-search steps needed inside this bound.
    #[inline]
    pub fn log2_width(&self) -> f64 {
        (self.width().max(1) as f64).log2()
    }
}

/// How far the true position may lie below (`under`) or above (`over`) an
/// estimate. The bound built from it reaches `under` positions below the
/// estimate and `over` positions above it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ErrorEnvelope {
    pub under: usize,
    pub over: usize,
}

impl ErrorEnvelope {
    pub const fn new(under: usize, over: usize) -> Self {
        ErrorEnvelope { under, over }
    }

    pub const fn symmetric(eps: usize) -> Self {
        ErrorEnvelope {
            under: eps,
            over: eps,
        }
    }
}

/// Index of the smallest key `>= x`, or `n` when `x` exceeds every key.
#[inline]
pub fn lower_bound_oracle(d: &SortedDataset, x: Key) -> usize {
    d.keys().partition_point(|&k| k < x)
}

/// Widens a position estimate by an error envelope, clamped to `[0, n + 1)`.
#[inline]
pub fn bound_from_estimate(estimate: usize, env: ErrorEnvelope, n: usize) -> SearchBound {
    let estimate = estimate.min(n);
    let lo = estimate.saturating_sub(env.under);
    let hi = estimate
        .saturating_add(env.over)
        .saturating_add(1)
        .min(n + 1);
    SearchBound { lo, hi }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchStrategy {
    Binary,
    Linear,
    Interpolation,
}

impl SearchStrategy {
    pub const ALL: [SearchStrategy; 3] = [
        SearchStrategy::Binary,
        SearchStrategy::Linear,
        SearchStrategy::Interpolation,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SearchStrategy::Binary => "binary",
            SearchStrategy::Linear => "linear",
            SearchStrategy::Interpolation => "interpolation",
        }
    }
}

impl fmt::Display for SearchStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SearchStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "bs" => Ok(SearchStrategy::Binary),
            "linear" | "ls" => Ok(SearchStrategy::Linear),
            "interpolation" | "is" => Ok(SearchStrategy::Interpolation),
            other => Err(Error::InvalidParameter(format!(
                "unknown search strategy {other:?} (expected binary, linear or interpolation)"
            ))),
        }
    }
}

/// Resolves the lower bound of `x` inside `bound`.
///
/// Position `n` is virtual: probing stops at the last stored key, and running
/// off the end is only accepted when the bound admits `n`.
#[inline]
pub fn last_mile_search(
    keys: &[Key],
    bound: SearchBound,
    x: Key,
    strategy: SearchStrategy,
) -> Result<usize> {
    let n = keys.len();
    let lo = bound.lo.min(n);
    let hi = bound.hi.min(n);
    let pos = match strategy {
        SearchStrategy::Binary => binary_lower_bound(keys, lo, hi, x),
        SearchStrategy::Linear => linear_lower_bound(keys, lo, hi, x),
        SearchStrategy::Interpolation => interpolation_lower_bound(keys, lo, hi, x),
    };
    // `pos == hi` means every probed key was < x; that is only the lower
    // bound if the scan reached the virtual end and the bound admits it.
    if pos == hi && (hi < n || bound.hi <= n) {
        return Err(Error::ContractViolation {
            key: x,
            lo: bound.lo,
            hi: bound.hi,
        });
    }
    Ok(pos)
}

#[inline]
fn binary_lower_bound(keys: &[Key], mut lo: usize, hi: usize, x: Key) -> usize {
    let mut len = hi - lo;
    while len > 0 {
        let half = len / 2;
        let mid = lo + half;
        if keys[mid] < x {
            lo = mid + 1;
            len -= half + 1;
        } else {
            len = half;
        }
    }
    lo
}

#[inline]
fn linear_lower_bound(keys: &[Key], lo: usize, hi: usize, x: Key) -> usize {
    let mut i = lo;
    while i < hi && keys[i] < x {
        i += 1;
    }
    i
}

/// Interpolation search for the lower bound in `[lo, hi)`.
///
/// Falls back to binary search once two consecutive probes fail to halve the
/// interval.
fn interpolation_lower_bound(keys: &[Key], mut lo: usize, mut hi: usize, x: Key) -> usize {
    let mut reference = hi - lo;
    let mut probes = 0u32;
    loop {
        if lo >= hi || x <= keys[lo] {
            return lo;
        }
        if x > keys[hi - 1] {
            return hi;
        }
        // keys[lo] < x <= keys[hi - 1], so the answer lies in (lo, hi - 1].
        let probe = if hi - lo == 1 {
            lo
        } else {
            let num = (x - keys[lo]) as u128 * (hi - 1 - lo) as u128;
            let den = (keys[hi - 1] - keys[lo]) as u128;
            lo + (num / den) as usize
        };
        if keys[probe] < x {
            lo = probe + 1;
        } else {
            hi = probe + 1;
        }
        probes += 1;
        if probes == 2 {
            let width = hi - lo;
            if width > reference / 2 {
                return binary_lower_bound(keys, lo, hi, x);
            }
            reference = width;
            probes = 0;
        }
    }
}

/// Anything that maps a key to a search bound over a fixed dataset.
pub trait SearchIndex: Send + Sync {
    fn search_bound(&self, key: Key) -> SearchBound;

    /// In-memory footprint under the crate's accounting rules.
    fn size_bytes(&self) -> usize;

    /// Short structure name, e.g. `"rmi"`.
    fn name(&self) -> &'static str;
}

impl<T: SearchIndex + ?Sized> SearchIndex for Box<T> {
    #[inline]
    fn search_bound(&self, key: Key) -> SearchBound {
        (**self).search_bound(key)
    }

    fn size_bytes(&self) -> usize {
        (**self).size_bytes()
    }

    fn name(&self) -> &'static str {
        (**self).name()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ValidationReport {
    pub queries: usize,
    pub violations: usize,
    pub log2_width_sum: f64,
}

impl ValidationReport {
    pub fn avg_log2_bound(&self) -> f64 {
        if self.queries == 0 {
            0.0
        } else {
            self.log2_width_sum / self.queries as f64
        }
    }

    pub fn is_valid(&self) -> bool {
        self.violations == 0
    }
}

/// Counts queries whose bound misses the lower bound.
pub fn validate_index<F>(lookup: F, d: &SortedDataset, queries: &[Key]) -> ValidationReport
where
    F: Fn(Key) -> SearchBound,
{
    let mut report = ValidationReport::default();
    for &x in queries {
        let bound = lookup(x);
        report.queries += 1;
        report.log2_width_sum += bound.log2_width();
        if !bound.contains(lower_bound_oracle(d, x)) {
            report.violations += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ds(keys: &[u64]) -> SortedDataset {
        SortedDataset::from_keys(keys.to_vec(), 1).unwrap()
    }

    #[test]
    fn oracle_examples() {
        let d = ds(&[10, 20, 30, 40]);
        assert_eq!(lower_bound_oracle(&d, 20), 1);
        assert_eq!(lower_bound_oracle(&d, 25), 2);
        assert_eq!(lower_bound_oracle(&d, 45), 4);
        assert_eq!(lower_bound_oracle(&d, 40), 3);
        assert_eq!(lower_bound_oracle(&d, 0), 0);
    }

    #[test]
    fn bound_examples() {
        let env = ErrorEnvelope::symmetric(3);
        assert_eq!(bound_from_estimate(10, env, 100), SearchBound::new(7, 14));
        assert_eq!(bound_from_estimate(1, env, 100), SearchBound::new(0, 5));
        assert_eq!(bound_from_estimate(99, env, 100), SearchBound::new(96, 101));
        // full envelope always yields the whole array
        assert_eq!(
            bound_from_estimate(40, ErrorEnvelope::symmetric(100), 100),
            SearchBound::full(100)
        );
    }

    #[test]
    fn cdf_error_bound_example() {
        // A CDF approximation reading 0.24 where the truth is 0.4, with a
        // maximum error of 0.16 of the dataset size.
        let n = 100;
        let eps = (0.16f64 * n as f64).ceil() as usize;
        let b = bound_from_estimate(24, ErrorEnvelope::symmetric(eps), n);
        assert_eq!(b, SearchBound::new(8, 41));
        assert!(b.contains(40));
        assert!(!bound_from_estimate(24, ErrorEnvelope::symmetric(eps - 1), n).contains(40));
    }

    #[test]
    fn last_mile_examples() {
        let d = ds(&[10, 20, 30, 40]);
        let k = d.keys();
        assert_eq!(
            last_mile_search(k, SearchBound::new(0, 5), 25, SearchStrategy::Binary).unwrap(),
            2
        );
        assert_eq!(
            last_mile_search(k, SearchBound::new(1, 4), 30, SearchStrategy::Linear).unwrap(),
            2
        );
        let expected = lower_bound_oracle(&d, 37);
        assert_eq!(expected, 3);
        assert_eq!(
            last_mile_search(k, SearchBound::new(0, 5), 37, SearchStrategy::Interpolation).unwrap(),
            expected
        );
    }

    #[test]
    fn last_mile_reports_exhausted_bound() {
        let d = ds(&[10, 20, 30, 40]);
        for s in SearchStrategy::ALL {
            // LB(35) = 3 lies past [0, 2)
            assert!(last_mile_search(d.keys(), SearchBound::new(0, 2), 35, s).is_err());
            // LB(50) = 4 needs the virtual end
            assert!(last_mile_search(d.keys(), SearchBound::new(2, 4), 50, s).is_err());
            assert_eq!(
                last_mile_search(d.keys(), SearchBound::new(2, 5), 50, s).unwrap(),
                4
            );
        }
    }

    #[test]
    fn validate_examples() {
        let d = ds(&[10, 20]);
        let queries = [0, 10, 15, 20, 25, u64::MAX];
        let r = validate_index(|_| SearchBound::full(2), &d, &queries);
        assert_eq!(r.violations, 0);
        assert!((r.avg_log2_bound() - 3f64.log2()).abs() < 1e-12);
        let r = validate_index(|_| SearchBound::new(0, 1), &d, &[15]);
        assert_eq!(r.violations, 1);
    }

    #[test]
    fn interpolation_handles_skew_and_extremes() {
        let mut keys: Vec<u64> = (0..1000u64).map(|i| i * i * i).collect();
        keys.push(u64::MAX - 1);
        keys.push(u64::MAX);
        let d = ds(&keys);
        for x in [0, 1, 8, 9, 999 * 999 * 999, u64::MAX - 1, u64::MAX, 1 << 40] {
            let got = last_mile_search(
                d.keys(),
                SearchBound::full(d.len()),
                x,
                SearchStrategy::Interpolation,
            )
            .unwrap();
            assert_eq!(got, lower_bound_oracle(&d, x), "x={x}");
        }
    }

    fn dataset_strategy() -> impl Strategy<Value = SortedDataset> {
        prop::collection::btree_set(any::<u64>(), 2..200)
            .prop_map(|s| SortedDataset::from_keys(s.into_iter().collect(), 3).unwrap())
    }

    proptest! {
        #[test]
        fn strategies_agree_with_oracle(
            d in dataset_strategy(),
            x in any::<u64>(),
            pick in any::<usize>(),
            slack_lo in 0usize..50,
            slack_hi in 0usize..50,
        ) {
            // half the time query an existing key
            let x = if pick % 2 == 0 { d.keys()[pick % d.len()] } else { x };
            let lb = lower_bound_oracle(&d, x);
            let n = d.len();
            let bound = SearchBound::new(lb.saturating_sub(slack_lo), (lb + 1 + slack_hi).min(n + 1));
            for s in SearchStrategy::ALL {
                prop_assert_eq!(last_mile_search(d.keys(), bound, x, s).unwrap(), lb);
                // enlarging a valid bound never changes the answer
                prop_assert_eq!(last_mile_search(d.keys(), SearchBound::full(n), x, s).unwrap(), lb);
            }
        }

        #[test]
        fn oracle_is_monotone(d in dataset_strategy(), a in any::<u64>(), b in any::<u64>()) {
            let (a, b) = (a.min(b), a.max(b));
            prop_assert!(lower_bound_oracle(&d, a) <= lower_bound_oracle(&d, b));
        }

        #[test]
        fn full_envelope_covers_everything(n in 2usize..10_000, est in 0usize..20_000) {
            prop_assert_eq!(
                bound_from_estimate(est, ErrorEnvelope::symmetric(n), n),
                SearchBound::full(n)
            );
        }
    }
}
