//! RadixSpline: an error-bounded linear spline over the key/position pairs,
//! plus a radix table over `r`-bit key prefixes that narrows the search for
//! the spline segment enclosing a lookup key.
//!
//! The spline is fitted in one pass with a shrinking slope corridor. Spline
//! points are always data points, so every slope in the corridor test is a
//! ratio of integers and is compared exactly in `i128`.

use std::cmp::Ordering;

use crate::codec::{BlobReader, BlobWriter};
use crate::dataset::{Key, SortedDataset};
use crate::error::{Error, Result};
use crate::search::{bound_from_estimate, ErrorEnvelope, SearchBound, SearchIndex};

const MAGIC: &[u8; 4] = b"RSP1";

pub const MAX_RADIX_BITS: u32 = 30;

/// A spline knot: a stored key and its position in the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplinePoint {
    pub key: Key,
    pub position: u64,
}

/// `dy / dx` with `dx > 0`.
#[derive(Debug, Clone, Copy)]
struct Slope {
    dy: i128,
    dx: i128,
}

impl Slope {
    fn between(base: SplinePoint, key: Key, pos: i128) -> Slope {
        Slope {
            dy: pos - base.position as i128,
            dx: key as i128 - base.key as i128,
        }
    }

    fn cmp(&self, other: &Slope) -> Ordering {
        (self.dy * other.dx).cmp(&(other.dy * self.dx))
    }
}

/// Fits the spline from a stream of sorted keys, reading each key once.
///
/// The corridor half-width is `epsilon - 1` so that rounding the
/// interpolated estimate still lands within `epsilon` of the truth.
pub fn fit_spline_iter<I>(keys: I, epsilon: usize) -> Result<Vec<SplinePoint>>
where
    I: IntoIterator<Item = Key>,
{
    if epsilon == 0 {
        return Err(Error::InvalidParameter(
            "RadixSpline error bound must be at least 1".into(),
        ));
    }
    let half = epsilon as i128 - 1;
    let mut spline = Vec::new();
    let mut iter = keys.into_iter().enumerate();
    let Some((_, first_key)) = iter.next() else {
        return Ok(spline);
    };
    let mut base = SplinePoint {
        key: first_key,
        position: 0,
    };
    spline.push(base);
    let mut prev = base;
    // (lower, upper); None right after a point was committed
    let mut corridor: Option<(Slope, Slope)> = None;

    for (i, key) in iter {
        let pos = i as i128;
        let current = SplinePoint {
            key,
            position: i as u64,
        };
        match corridor {
            None => {
                corridor = Some((
                    Slope::between(base, key, pos - half),
                    Slope::between(base, key, pos + half),
                ));
            }
            Some((lower, upper)) => {
                let slope = Slope::between(base, key, pos);
                if slope.cmp(&upper) == Ordering::Greater || slope.cmp(&lower) == Ordering::Less {
                    spline.push(prev);
                    base = prev;
                    corridor = Some((
                        Slope::between(base, key, pos - half),
                        Slope::between(base, key, pos + half),
                    ));
                } else {
                    let lo = Slope::between(base, key, pos - half);
                    let hi = Slope::between(base, key, pos + half);
                    corridor = Some((
                        if lo.cmp(&lower) == Ordering::Greater {
                            lo
                        } else {
                            lower
                        },
                        if hi.cmp(&upper) == Ordering::Less {
                            hi
                        } else {
                            upper
                        },
                    ));
                }
            }
        }
        prev = current;
    }
    if prev != base {
        spline.push(prev);
    }
    Ok(spline)
}

pub fn fit_spline(d: &SortedDataset, epsilon: usize) -> Result<Vec<SplinePoint>> {
    fit_spline_iter(d.keys().iter().copied(), epsilon)
}

/// Linear interpolation on the segment `[left, right]`, clamped to its ends.
#[inline]
fn interpolate_segment(left: SplinePoint, right: SplinePoint, key: Key) -> f64 {
    let dk = (right.key - left.key) as f64;
    let dp = (right.position - left.position) as f64;
    let v = left.position as f64 + (key - left.key) as f64 * dp / dk;
    v.clamp(left.position as f64, right.position as f64)
}

/// Bit width of `v` (0 for 0).
#[inline]
fn bit_width(v: u64) -> u32 {
    64 - v.leading_zeros()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadixTable {
    pub radix_bits: u32,
    pub shift: u32,
    pub offsets: Vec<u32>,
}

impl RadixTable {
    #[inline]
    pub fn prefix(&self, key: Key) -> usize {
        (key >> self.shift) as usize
    }

    pub fn size_bytes(&self) -> usize {
        4 * self.offsets.len()
    }
}

pub(crate) fn check_radix_bits(radix_bits: u32) -> Result<()> {
    if radix_bits == 0 || radix_bits > MAX_RADIX_BITS {
        return Err(Error::InvalidParameter(format!(
            "radix bits must be in 1..={MAX_RADIX_BITS}, got {radix_bits}"
        )));
    }
    Ok(())
}

/// Shift that keeps the top `radix_bits` bits of keys up to `max_key`.
pub fn radix_shift(max_key: Key, radix_bits: u32) -> u32 {
    bit_width(max_key).saturating_sub(radix_bits)
}

/// `offsets[p]` is the first of `sorted_keys` whose prefix is `>= p`.
pub(crate) fn prefix_offsets<I>(
    sorted_keys: I,
    count: usize,
    radix_bits: u32,
    shift: u32,
) -> Vec<u32>
where
    I: IntoIterator<Item = Key>,
{
    let slots = 1usize << radix_bits;
    let mut offsets = vec![count as u32; slots + 1];
    let mut next = 0usize;
    for (j, key) in sorted_keys.into_iter().enumerate() {
        let prefix = ((key >> shift) as usize).min(slots - 1);
        while next <= prefix {
            offsets[next] = j as u32;
            next += 1;
        }
    }
    offsets
}

pub fn build_radix_table(
    spline: &[SplinePoint],
    radix_bits: u32,
    key_universe_max: Key,
) -> Result<RadixTable> {
    check_radix_bits(radix_bits)?;
    let shift = radix_shift(key_universe_max, radix_bits);
    let offsets = prefix_offsets(
        spline.iter().map(|p| p.key),
        spline.len(),
        radix_bits,
        shift,
    );
    Ok(RadixTable {
        radix_bits,
        shift,
        offsets,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsIndex {
    spline: Vec<SplinePoint>,
    table: RadixTable,
    epsilon: usize,
    n: usize,
}

impl RsIndex {
    pub fn build(d: &SortedDataset, epsilon: usize, radix_bits: u32) -> Result<RsIndex> {
        check_radix_bits(radix_bits)?;
        if d.len() > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "RadixSpline supports at most {} keys",
                u32::MAX
            )));
        }
        let spline = fit_spline(d, epsilon)?;
        let table = build_radix_table(&spline, radix_bits, d.max_key())?;
        Ok(RsIndex {
            spline,
            table,
            epsilon,
            n: d.len(),
        })
    }

    pub fn spline(&self) -> &[SplinePoint] {
        &self.spline
    }

    pub fn table(&self) -> &RadixTable {
        &self.table
    }

    pub fn epsilon(&self) -> usize {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Index of the first spline point with key `>= key`, searched only
    /// within the radix bucket. Requires `min < key <= max`.
    #[inline]
    pub fn segment_end(&self, key: Key) -> usize {
        let p = self.table.prefix(key);
        let begin = self.table.offsets[p] as usize;
        let end = (self.table.offsets[p + 1] as usize + 1).min(self.spline.len());
        begin + self.spline[begin..end].partition_point(|s| s.key < key)
    }

    /// Interpolated (real-valued) position for a key inside the key range;
    /// keys outside it map to 0 or `n`.
    #[inline]
    pub fn interpolate(&self, key: Key) -> f64 {
        let first = self.spline[0];
        let last = self.spline[self.spline.len() - 1];
        if key <= first.key {
            return 0.0;
        }
        if key > last.key {
            return self.n as f64;
        }
        let j = self.segment_end(key);
        let right = self.spline[j];
        if right.key == key {
            return right.position as f64;
        }
        interpolate_segment(self.spline[j - 1], right, key)
    }

    /// Rounded position estimate (round half up).
    #[inline]
    pub fn estimate(&self, key: Key) -> usize {
        (self.interpolate(key) + 0.5).floor() as usize
    }

    #[inline]
    pub fn lookup(&self, key: Key) -> SearchBound {
        bound_from_estimate(
            self.estimate(key),
            ErrorEnvelope::symmetric(self.epsilon),
            self.n,
        )
    }

    pub fn size_bytes(&self) -> usize {
        16 * self.spline.len() + self.table.size_bytes() + 24
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BlobWriter::new(MAGIC);
        w.u64(self.epsilon as u64)
            .u32(self.table.radix_bits)
            .u32(self.table.shift)
            .u64(self.spline.len() as u64);
        for p in &self.spline {
            w.u64(p.key).u64(p.position);
        }
        for &o in &self.table.offsets {
            w.u32(o);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<RsIndex> {
        let mut r = BlobReader::new(bytes, MAGIC, "RadixSpline blob")?;
        let epsilon = r.u64()? as usize;
        let radix_bits = r.u32()?;
        let shift = r.u32()?;
        if epsilon == 0 || check_radix_bits(radix_bits).is_err() || shift > 63 {
            return Err(r.invalid("bad header"));
        }
        let count = r.len_prefix(16)?;
        if count < 2 {
            return Err(r.invalid("spline needs at least two points"));
        }
        let mut spline = Vec::with_capacity(count);
        for _ in 0..count {
            spline.push(SplinePoint {
                key: r.u64()?,
                position: r.u64()?,
            });
        }
        let ordered = spline
            .windows(2)
            .all(|w| w[0].key < w[1].key && w[0].position < w[1].position);
        if !ordered || spline[0].position != 0 {
            return Err(r.invalid("spline points are not strictly increasing"));
        }
        let slots = (1usize << radix_bits) + 1;
        let mut offsets = Vec::with_capacity(slots);
        for _ in 0..slots {
            offsets.push(r.u32()?);
        }
        r.finish()?;
        let table = RadixTable {
            radix_bits,
            shift,
            offsets,
        };
        let expected = prefix_offsets(
            spline.iter().map(|p| p.key),
            spline.len(),
            radix_bits,
            shift,
        );
        if table.offsets != expected {
            return Err(Error::Format(
                "RadixSpline blob: radix table does not match spline".into(),
            ));
        }
        let n = spline[count - 1].position as usize + 1;
        Ok(RsIndex {
            spline,
            table,
            epsilon,
            n,
        })
    }
}

impl SearchIndex for RsIndex {
    #[inline]
    fn search_bound(&self, key: Key) -> SearchBound {
        self.lookup(key)
    }

    fn size_bytes(&self) -> usize {
        RsIndex::size_bytes(self)
    }

    fn name(&self) -> &'static str {
        "rs"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::lower_bound_oracle;
    use proptest::prelude::*;
    use std::cell::Cell;

    fn ds(keys: Vec<u64>) -> SortedDataset {
        SortedDataset::from_keys(keys, 0).unwrap()
    }

    /// Exhaustive oracle: max |interpolated - position| over stored keys.
    fn max_interpolation_error(rs: &RsIndex, d: &SortedDataset) -> f64 {
        d.keys()
            .iter()
            .enumerate()
            .map(|(i, &k)| (rs.interpolate(k) - i as f64).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn linear_keys_need_only_endpoints() {
        let d = ds((0..100).collect());
        let spline = fit_spline(&d, 1).unwrap();
        assert_eq!(
            spline,
            vec![
                SplinePoint {
                    key: 0,
                    position: 0
                },
                SplinePoint {
                    key: 99,
                    position: 99
                }
            ]
        );
    }

    #[test]
    fn zero_width_corridor_example() {
        let d = ds(vec![0, 1, 2, 10]);
        let keys: Vec<u64> = fit_spline(&d, 1).unwrap().iter().map(|p| p.key).collect();
        assert_eq!(keys, vec![0, 2, 10]);
        // oracle: the two-point spline has a non-zero error at key 2
        let two = [
            SplinePoint {
                key: 0,
                position: 0,
            },
            SplinePoint {
                key: 10,
                position: 3,
            },
        ];
        assert!(interpolate_segment(two[0], two[1], 2) != 2.0);
        let rs = RsIndex::build(&d, 1, 2).unwrap();
        assert_eq!(max_interpolation_error(&rs, &d), 0.0);
    }

    #[test]
    fn rejects_zero_epsilon_and_bad_radix() {
        let d = ds(vec![1, 2, 3]);
        assert!(fit_spline(&d, 0).is_err());
        assert!(RsIndex::build(&d, 4, 0).is_err());
        assert!(RsIndex::build(&d, 4, 31).is_err());
    }

    #[test]
    fn radix_table_examples() {
        assert_eq!(radix_shift(255, 3), 5);
        assert_eq!(96u64 >> radix_shift(255, 3), 3);
        assert_eq!(radix_shift(5, 8), 0);

        let spline: Vec<SplinePoint> = (0..5)
            .map(|i| SplinePoint {
                key: i,
                position: i,
            })
            .collect();
        let t = build_radix_table(&spline, 4, u64::MAX).unwrap();
        assert_eq!(t.offsets[0], 0);
        assert!(t.offsets[1..].iter().all(|&o| o == 5));
    }

    #[test]
    fn radix_offsets_match_prefix_histogram() {
        let mut x = 0x1234_5678_9abc_def1u64;
        let mut keys: Vec<u64> = (0..5000)
            .map(|_| {
                x ^= x << 13;
                x ^= x >> 7;
                x ^= x << 17;
                x
            })
            .collect();
        keys.sort_unstable();
        keys.dedup();
        let d = ds(keys);
        let rs = RsIndex::build(&d, 8, 8).unwrap();
        let t = rs.table();
        let mut histogram = vec![0u32; 256];
        for p in rs.spline() {
            histogram[t.prefix(p.key)] += 1;
        }
        assert_eq!(t.offsets[0], 0);
        assert_eq!(t.offsets[256] as usize, rs.spline().len());
        for (p, w) in t.offsets.windows(2).enumerate() {
            assert_eq!(w[1] - w[0], histogram[p], "prefix {p}");
        }
    }

    #[test]
    fn bucket_search_finds_enclosing_segment() {
        let keys: Vec<u64> = (0..3000u64).map(|i| i * i + (i % 7) * 3).collect();
        let d = SortedDataset::from_unsorted(keys, 0).unwrap();
        for r in [1, 3, 6, 10] {
            let rs = RsIndex::build(&d, 2, r).unwrap();
            let s = rs.spline();
            for x in d.min_key() + 1..=d.max_key().min(200_000) {
                let full = s.partition_point(|p| p.key < x);
                assert_eq!(rs.segment_end(x), full, "x={x} r={r}");
            }
        }
    }

    #[test]
    fn spline_point_keys_are_exact() {
        let keys: Vec<u64> = (0..2000u64).map(|i| i * i * 3 + 11).collect();
        let d = ds(keys);
        let rs = RsIndex::build(&d, 16, 10).unwrap();
        for p in rs.spline() {
            assert_eq!(rs.estimate(p.key), p.position as usize);
            assert!(rs.lookup(p.key).contains(p.position as usize));
        }
        assert!(rs.lookup(u64::MAX).contains(d.len()));
        assert!(rs.lookup(0).contains(0));
    }

    #[test]
    fn single_pass_read_counter() {
        let d = ds((0..10_000u64).map(|i| i * 17 + (i * i) % 13).collect());
        let reads = Cell::new(0usize);
        let counted = d.keys().iter().map(|&k| {
            reads.set(reads.get() + 1);
            k
        });
        let spline = fit_spline_iter(counted, 8).unwrap();
        assert_eq!(reads.get(), d.len());
        assert_eq!(spline, fit_spline(&d, 8).unwrap());
    }

    #[test]
    fn size_accounting() {
        let d = ds((0..100).collect());
        let rs = RsIndex::build(&d, 1, 1).unwrap();
        assert_eq!(rs.spline().len(), 2);
        assert_eq!(rs.size_bytes(), 68);
        let t = |r| RsIndex::build(&d, 1, r).unwrap().table().size_bytes();
        assert_eq!(t(5) - 4, 2 * (t(4) - 4));
    }

    #[test]
    fn blob_round_trip() {
        let d = ds((0..5000u64).map(|i| i * i).collect());
        let rs = RsIndex::build(&d, 4, 7).unwrap();
        let bytes = rs.to_bytes();
        assert_eq!(&bytes[..4], b"RSP1");
        assert_eq!(RsIndex::from_bytes(&bytes).unwrap(), rs);
        assert!(RsIndex::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut corrupt = bytes.clone();
        let last = corrupt.len() - 1;
        corrupt[last] ^= 0x40;
        assert!(RsIndex::from_bytes(&corrupt).is_err());
    }

    fn key_sets() -> impl Strategy<Value = Vec<u64>> {
        prop_oneof![
            prop::collection::btree_set(any::<u64>(), 2..400).prop_map(|s| s.into_iter().collect()),
            prop::collection::btree_set(0u64..2000, 2..400).prop_map(|s| s.into_iter().collect()),
            prop::collection::vec(1u64..1000, 2..400).prop_map(|gaps| {
                gaps.iter()
                    .scan(0u64, |acc, g| {
                        *acc += g * g * g;
                        Some(*acc)
                    })
                    .collect()
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]
        #[test]
        fn error_guarantee_and_validity(
            keys in key_sets(),
            eps in 1usize..40,
            r in 1u32..14,
            queries in prop::collection::vec(any::<u64>(), 100),
        ) {
            let d = ds(keys);
            let rs = RsIndex::build(&d, eps, r).unwrap();
            let s = rs.spline();
            prop_assert_eq!(s[0], SplinePoint { key: d.min_key(), position: 0 });
            prop_assert_eq!(s[s.len() - 1].position as usize, d.len() - 1);
            prop_assert!(max_interpolation_error(&rs, &d) <= (eps - 1) as f64 + 1e-6);
            for (i, &k) in d.keys().iter().enumerate() {
                prop_assert!(rs.estimate(k).abs_diff(i) <= eps);
            }
            let span = d.max_key() - d.min_key() + 1;
            for q in queries.iter().copied()
                .chain(queries.iter().map(|q| d.min_key() + q % span))
                .chain(d.keys().iter().map(|k| k.wrapping_add(1)))
            {
                prop_assert!(rs.lookup(q).contains(lower_bound_oracle(&d, q)));
            }
        }

        #[test]
        fn tighter_bound_never_uses_fewer_points(keys in key_sets(), eps in 2usize..64) {
            let d = ds(keys);
            let coarse = RsIndex::build(&d, eps, 4).unwrap();
            let fine = RsIndex::build(&d, eps / 2, 4).unwrap();
            prop_assert!(fine.spline().len() >= coarse.spline().len());
            prop_assert!(max_interpolation_error(&fine, &d) <= (eps / 2 - 1) as f64 + 1e-6);
        }
    }
}
