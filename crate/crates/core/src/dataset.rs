use crate::error::{Error, Result};

/// Lookup keys are plain unsigned 64-bit integers over the full range.
pub type Key = u64;

/// Seed used to derive payloads when a key file carries no seed footer.
pub const DEFAULT_PAYLOAD_SEED: u64 = 0x5EED_0000_0000_0001;

/// A strictly increasing key array with one 8-byte payload per key.
///
/// This is the array every index in the crate is built over and searched in.
/// Construction rejects duplicate or out-of-order keys, mismatched payload
/// counts and datasets with fewer than two keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedDataset {
    keys: Vec<Key>,
    payloads: Vec<u64>,
    seed: Option<u64>,
}

impl SortedDataset {
    pub fn new(keys: Vec<Key>, payloads: Vec<u64>) -> Result<Self> {
        if payloads.len() != keys.len() {
            return Err(Error::InvalidDataset(format!(
                "{} keys but {} payloads",
                keys.len(),
                payloads.len()
            )));
        }
        check_keys(&keys)?;
        Ok(SortedDataset {
            keys,
            payloads,
            seed: None,
        })
    }

    /// Builds a dataset whose payloads are derived from `seed` with [`gen_payloads`].
    pub fn from_keys(keys: Vec<Key>, seed: u64) -> Result<Self> {
        check_keys(&keys)?;
        let payloads = gen_payloads(&keys, seed);
        Ok(SortedDataset {
            keys,
            payloads,
            seed: Some(seed),
        })
    }

    /// Sorts and deduplicates arbitrary keys before building the dataset.
    pub fn from_unsorted(mut keys: Vec<Key>, seed: u64) -> Result<Self> {
        keys.sort_unstable();
        keys.dedup();
        Self::from_keys(keys, seed)
    }

    #[inline]
    pub fn keys(&self) -> &[Key] {
        &self.keys
    }

    #[inline]
    pub fn payloads(&self) -> &[u64] {
        &self.payloads
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    /// Always false; kept for API symmetry with slices.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Seed the payloads were derived from, if they were derived at all.
    pub fn payload_seed(&self) -> Option<u64> {
        self.seed
    }

    pub(crate) fn set_payload_seed(&mut self, seed: Option<u64>) {
        self.seed = seed;
    }

    #[inline]
    pub fn min_key(&self) -> Key {
        self.keys[0]
    }

    #[inline]
    pub fn max_key(&self) -> Key {
        self.keys[self.keys.len() - 1]
    }
}

fn check_keys(keys: &[Key]) -> Result<()> {
    if keys.len() < 2 {
        return Err(Error::InvalidDataset(format!(
            "need at least 2 keys, got {}",
            keys.len()
        )));
    }
    if let Some(i) = keys.windows(2).position(|w| w[0] >= w[1]) {
        let what = if keys[i] == keys[i + 1] {
            "duplicate"
        } else {
            "unsorted"
        };
        return Err(Error::InvalidDataset(format!(
            "{what} keys at positions {i} and {}: {} then {}",
            i + 1,
            keys[i],
            keys[i + 1]
        )));
    }
    Ok(())
}

/// Mixes a seed and a key into a pseudo-random payload (splitmix64 finalizer).
#[inline]
pub fn payload_for(seed: u64, key: Key) -> u64 {
    let mut z = seed ^ key.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gen_payloads(keys: &[Key], seed: u64) -> Vec<u64> {
    keys.iter().map(|&k| payload_for(seed, k)).collect()
}
