//! Non-learned comparators: radix binary search, stride sampling, and plain
//! binary search over the whole array.

use crate::codec::{BlobReader, BlobWriter};
use crate::dataset::{Key, SortedDataset};
use crate::error::{Error, Result};
use crate::radix_spline::{check_radix_bits, prefix_offsets, radix_shift};
use crate::search::{SearchBound, SearchIndex};

/// Radix binary search: a table of bucket offsets over key prefixes and
/// nothing else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RbsIndex {
    radix_bits: u32,
    shift: u32,
    table: Vec<u32>,
    n: usize,
}

impl RbsIndex {
    pub fn build(d: &SortedDataset, radix_bits: u32) -> Result<RbsIndex> {
        check_radix_bits(radix_bits)?;
        if d.len() > u32::MAX as usize {
            return Err(Error::InvalidDataset(
                "too many keys for a u32 radix table".into(),
            ));
        }
        let shift = radix_shift(d.max_key(), radix_bits);
        let table = prefix_offsets(d.keys().iter().copied(), d.len(), radix_bits, shift);
        Ok(RbsIndex {
            radix_bits,
            shift,
            table,
            n: d.len(),
        })
    }

    pub fn radix_bits(&self) -> u32 {
        self.radix_bits
    }

    pub fn shift(&self) -> u32 {
        self.shift
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn lookup(&self, key: Key) -> SearchBound {
        let last = (1usize << self.radix_bits) - 1;
        let b = ((key >> self.shift) as usize).min(last);
        let lo = self.table[b] as usize;
        let hi = (self.table[b + 1] as usize + 1).min(self.n + 1);
        SearchBound::new(lo, hi)
    }

    pub fn size_bytes(&self) -> usize {
        4 * self.table.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BlobWriter::new(b"RBS1");
        w.u32(self.radix_bits).u32(self.shift).u64(self.n as u64);
        for &o in &self.table {
            w.u32(o);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<RbsIndex> {
        let mut r = BlobReader::new(bytes, b"RBS1", "RBS blob")?;
        let radix_bits = r.u32()?;
        let shift = r.u32()?;
        let n = r.u64()? as usize;
        if check_radix_bits(radix_bits).is_err() || shift >= 64 || n > u32::MAX as usize {
            return Err(r.invalid("bad header"));
        }
        let table = (0..(1usize << radix_bits) + 1)
            .map(|_| r.u32())
            .collect::<Result<Vec<_>>>()?;
        r.finish()?;
        let ordered = table.windows(2).all(|w| w[0] <= w[1]);
        if !ordered || table[0] != 0 || *table.last().unwrap() as usize != n {
            return Err(Error::Format(
                "RBS blob: radix table is inconsistent".into(),
            ));
        }
        Ok(RbsIndex {
            radix_bits,
            shift,
            table,
            n,
        })
    }
}

impl SearchIndex for RbsIndex {
    #[inline]
    fn search_bound(&self, key: Key) -> SearchBound {
        self.lookup(key)
    }

    fn size_bytes(&self) -> usize {
        RbsIndex::size_bytes(self)
    }

    fn name(&self) -> &'static str {
        "rbs"
    }
}

/// Every `stride`-th key, searched by binary search. Sample `j` sits at
/// position `j * stride`, so positions are implicit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledIndex {
    stride: usize,
    samples: Vec<Key>,
    n: usize,
}

impl SampledIndex {
    pub fn build(d: &SortedDataset, stride: usize) -> Result<SampledIndex> {
        if stride == 0 {
            return Err(Error::InvalidParameter(
                "sample stride must be at least 1".into(),
            ));
        }
        Ok(SampledIndex {
            stride,
            samples: d.keys().iter().step_by(stride).copied().collect(),
            n: d.len(),
        })
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn samples(&self) -> &[Key] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn lookup(&self, key: Key) -> SearchBound {
        // rightmost sample <= key; below the first sample the answer is 0
        let j = self
            .samples
            .partition_point(|&s| s <= key)
            .saturating_sub(1);
        let lo = j * self.stride;
        SearchBound::new(lo, (lo + self.stride + 1).min(self.n + 1))
    }

    pub fn size_bytes(&self) -> usize {
        8 * self.samples.len() + 16
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BlobWriter::new(b"SMP1");
        w.u64(self.stride as u64)
            .u64(self.n as u64)
            .u64(self.samples.len() as u64);
        for &k in &self.samples {
            w.u64(k);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SampledIndex> {
        let mut r = BlobReader::new(bytes, b"SMP1", "sampled blob")?;
        let stride = r.u64()? as usize;
        let n = r.u64()? as usize;
        let count = r.len_prefix(8)?;
        if stride == 0 || n < 2 || count != n.div_ceil(stride) {
            return Err(r.invalid("bad header"));
        }
        let samples = (0..count).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        if !samples.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Format(
                "sampled blob: samples are not increasing".into(),
            ));
        }
        Ok(SampledIndex { stride, samples, n })
    }
}

impl SearchIndex for SampledIndex {
    #[inline]
    fn search_bound(&self, key: Key) -> SearchBound {
        self.lookup(key)
    }

    fn size_bytes(&self) -> usize {
        SampledIndex::size_bytes(self)
    }

    fn name(&self) -> &'static str {
        "sampled"
    }
}

/// No structure at all: every lookup searches the whole array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryBaseline {
    n: usize,
}

impl BinaryBaseline {
    pub fn build(d: &SortedDataset) -> BinaryBaseline {
        BinaryBaseline { n: d.len() }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn lookup(&self, _key: Key) -> SearchBound {
        SearchBound::full(self.n)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BlobWriter::new(b"BIN1");
        w.u64(self.n as u64);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<BinaryBaseline> {
        let mut r = BlobReader::new(bytes, b"BIN1", "binary baseline blob")?;
        let n = r.u64()? as usize;
        r.finish()?;
        Ok(BinaryBaseline { n })
    }
}

impl SearchIndex for BinaryBaseline {
    #[inline]
    fn search_bound(&self, key: Key) -> SearchBound {
        self.lookup(key)
    }

    fn size_bytes(&self) -> usize {
        0
    }

    fn name(&self) -> &'static str {
        "binary"
    }
}
