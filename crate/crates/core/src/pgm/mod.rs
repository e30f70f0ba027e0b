//! PGM index: a stack of optimal ε-bounded piecewise linear models.
//!
//! The bottom level approximates `(key_i, i)` over the dataset. Each level
//! above approximates `(first_key_s, s)` over the segments of the level below,
//! until a level consists of a single segment. A lookup walks down from the
//! top, using each level's prediction to binary-search a window of `2ε + 3`
//! first keys in the level below.

mod pla;

pub use pla::{optimal_pla, OptimalPla, Segment, MAX_EPSILON};

use crate::codec::{BlobReader, BlobWriter};
use crate::dataset::{Key, SortedDataset};
use crate::error::{Error, Result};
use crate::search::{bound_from_estimate, ErrorEnvelope, SearchBound, SearchIndex};

const MAGIC: &[u8; 4] = b"PGM1";

#[derive(Debug, Clone, PartialEq)]
pub struct PgmLevel {
    segments: Vec<Segment>,
    /// items in the level below (dataset size at the bottom)
    covered: usize,
}

impl PgmLevel {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn covered(&self) -> usize {
        self.covered
    }

    /// Rounded position of `key` predicted by segment `seg`, capped by the
    /// next segment's starting prediction so that extrapolating across a
    /// gap cannot overshoot.
    #[inline]
    pub fn estimate(&self, seg: usize, key: Key) -> usize {
        let cap = match self.segments.get(seg + 1) {
            Some(next) => next.intercept,
            None => self.covered as f64,
        };
        let p = self.segments[seg].predict(key).min(cap);
        let est = (p + 0.5).floor();
        if est <= 0.0 {
            0
        } else {
            (est as usize).min(self.covered)
        }
    }

    /// Index of the segment owning `key`: the last one whose first key is
    /// `<= key` (segment 0 for keys below every first key).
    pub fn owner(&self, key: Key) -> usize {
        self.segments
            .partition_point(|s| s.first_key <= key)
            .saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgmIndex {
    epsilon: usize,
    /// bottom-up; the last level has exactly one segment
    levels: Vec<PgmLevel>,
    n: usize,
}

impl PgmIndex {
    pub fn build(d: &SortedDataset, epsilon: usize) -> Result<PgmIndex> {
        if epsilon == 0 {
            return Err(Error::InvalidParameter(
                "PGM error bound must be at least 1".into(),
            ));
        }
        let eps = epsilon as u64;
        let bottom = pla::segment_stream(
            d.keys().iter().enumerate().map(|(i, &k)| (k, i as i64)),
            eps,
        )?;
        let mut levels = vec![PgmLevel {
            segments: bottom,
            covered: d.len(),
        }];
        while levels.last().unwrap().segments.len() > 1 {
            let below = &levels.last().unwrap().segments;
            let segments = pla::segment_stream(
                below
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.first_key, i as i64)),
                eps,
            )?;
            levels.push(PgmLevel {
                covered: below.len(),
                segments,
            });
        }
        Ok(PgmIndex {
            epsilon,
            levels,
            n: d.len(),
        })
    }

    pub fn epsilon(&self) -> usize {
        self.epsilon
    }

    pub fn levels(&self) -> &[PgmLevel] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Bottom segment owning `key`, found by descending through the levels.
    #[inline]
    pub fn bottom_segment(&self, key: Key) -> usize {
        let eps = self.epsilon;
        let mut seg = 0usize;
        for lvl in (1..self.levels.len()).rev() {
            let est = self.levels[lvl].estimate(seg, key);
            let child = &self.levels[lvl - 1].segments;
            // number of child first keys <= key lies in [est - ε, est + ε + 2]
            let lo = est.saturating_sub(eps).min(child.len());
            let hi = (est + eps + 2).min(child.len());
            let upper = lo + child[lo..hi].partition_point(|s| s.first_key <= key);
            seg = upper.saturating_sub(1);
        }
        seg
    }

    /// Rounded position estimate from the bottom level.
    #[inline]
    pub fn estimate(&self, key: Key) -> usize {
        self.levels[0].estimate(self.bottom_segment(key), key)
    }

    #[inline]
    pub fn lookup(&self, key: Key) -> SearchBound {
        // Stored keys land within ±ε; a key just above a stored key can sit
        // one more position above its estimate.
        bound_from_estimate(
            self.estimate(key),
            ErrorEnvelope::new(self.epsilon, self.epsilon + 1),
            self.n,
        )
    }

    pub fn segment_count(&self) -> usize {
        self.levels.iter().map(|l| l.segments.len()).sum()
    }

    pub fn size_bytes(&self) -> usize {
        Segment::SIZE_BYTES * self.segment_count() + 16
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BlobWriter::new(MAGIC);
        w.u64(self.epsilon as u64)
            .u64(self.n as u64)
            .u32(self.levels.len() as u32);
        for level in &self.levels {
            w.u64(level.covered as u64).u64(level.segments.len() as u64);
            for s in &level.segments {
                w.u64(s.first_key).f64(s.slope).f64(s.intercept);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<PgmIndex> {
        let mut r = BlobReader::new(bytes, MAGIC, "PGM blob")?;
        let epsilon = r.u64()?;
        let n = r.u64()? as usize;
        let level_count = r.u32()? as usize;
        if epsilon == 0 || epsilon > MAX_EPSILON || n < 2 || level_count == 0 {
            return Err(r.invalid("bad header"));
        }
        let mut levels: Vec<PgmLevel> = Vec::with_capacity(level_count.min(64));
        for l in 0..level_count {
            let covered = r.u64()? as usize;
            let count = r.len_prefix(Segment::SIZE_BYTES)?;
            let expected_cover = if l == 0 {
                n
            } else {
                levels[l - 1].segments.len()
            };
            if count == 0 || covered != expected_cover {
                return Err(r.invalid("level sizes are inconsistent"));
            }
            let mut segments = Vec::with_capacity(count);
            for _ in 0..count {
                segments.push(Segment {
                    first_key: r.u64()?,
                    slope: r.f64()?,
                    intercept: r.f64()?,
                });
            }
            if !segments.windows(2).all(|w| w[0].first_key < w[1].first_key) {
                return Err(r.invalid("segment keys are not increasing"));
            }
            if l > 0 {
                let below = &levels[l - 1].segments;
                if segments.iter().any(|s| {
                    below
                        .binary_search_by_key(&s.first_key, |b| b.first_key)
                        .is_err()
                }) {
                    return Err(r.invalid("upper level keys do not match the level below"));
                }
            }
            levels.push(PgmLevel { segments, covered });
        }
        if levels.last().unwrap().segments.len() != 1 {
            return Err(r.invalid("top level must have one segment"));
        }
        r.finish()?;
        Ok(PgmIndex {
            epsilon: epsilon as usize,
            levels,
            n,
        })
    }
}

impl SearchIndex for PgmIndex {
    #[inline]
    fn search_bound(&self, key: Key) -> SearchBound {
        self.lookup(key)
    }

    fn size_bytes(&self) -> usize {
        PgmIndex::size_bytes(self)
    }

    fn name(&self) -> &'static str {
        "pgm"
    }
}
