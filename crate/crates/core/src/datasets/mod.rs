//! Synthetic dataset generators, lookup workloads, payload checksums and the
//! SOSD-style key file format.
//!
//! The generators are stand-ins for real key sets: uniform keys are easy for
//! every learned model, lognormal keys have a strongly curved CDF, and the
//! outlier-tail distribution packs most keys into a low band with a handful
//! of huge outliers that make the top prefix bits useless.

mod sosd;

pub use sosd::{load_sosd, read_sosd, save_sosd, write_sosd, SOSD_FOOTER_MAGIC};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, LogNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Key, SortedDataset};
use crate::error::{Error, Result};
use crate::search::lower_bound_oracle;

/// Give up when this many consecutive redraw rounds add no new key.
const MAX_STALLED_ROUNDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform over the whole 64-bit range.
    Uniform,
    /// `floor(exp(N(mu, sigma)))`, saturating at `u64::MAX`.
    Lognormal {
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    /// `n - outlier_count` keys uniform in `[0, 2^low_band_bits)` and
    /// `outlier_count` keys uniform in `(2^high_band_bits, u64::MAX]`.
    OutlierTail {
        #[serde(default = "default_outlier_count")]
        outlier_count: usize,
        #[serde(default = "default_low_band_bits")]
        low_band_bits: u32,
        #[serde(default = "default_high_band_bits")]
        high_band_bits: u32,
    },
}

fn default_mu() -> f64 {
    20.0
}

fn default_sigma() -> f64 {
    2.0
}

fn default_outlier_count() -> usize {
    100
}

fn default_low_band_bits() -> u32 {
    50
}

fn default_high_band_bits() -> u32 {
    59
}

impl Distribution {
    pub fn lognormal() -> Self {
        Distribution::Lognormal {
            mu: default_mu(),
            sigma: default_sigma(),
        }
    }

    pub fn outlier_tail() -> Self {
        Distribution::OutlierTail {
            outlier_count: default_outlier_count(),
            low_band_bits: default_low_band_bits(),
            high_band_bits: default_high_band_bits(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Distribution::Uniform => "uniform",
            Distribution::Lognormal { .. } => "lognormal",
            Distribution::OutlierTail { .. } => "outlier_tail",
        }
    }

    /// Looks up a distribution by name with default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "uniform" => Ok(Distribution::Uniform),
            "lognormal" => Ok(Distribution::lognormal()),
            "outlier_tail" | "outlier-tail" => Ok(Distribution::outlier_tail()),
            other => Err(Error::InvalidParameter(format!(
                "unknown distribution {other:?} (expected uniform, lognormal or outlier_tail)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub distribution: Distribution,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(distribution: Distribution, n: usize, seed: u64) -> Self {
        DatasetSpec {
            distribution,
            n,
            seed,
        }
    }

    pub fn uniform(n: usize, seed: u64) -> Self {
        Self::new(Distribution::Uniform, n, seed)
    }

    pub fn lognormal(n: usize, seed: u64) -> Self {
        Self::new(Distribution::lognormal(), n, seed)
    }

    pub fn outlier_tail(n: usize, seed: u64) -> Self {
        Self::new(Distribution::outlier_tail(), n, seed)
    }

    /// Short label used in benchmark output, e.g. `lognormal-100000`.
    pub fn label(&self) -> String {
        format!("{}-{}", self.distribution.name(), self.n)
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "dataset size must be at least 2, got {}",
                self.n
            )));
        }
        match self.distribution {
            Distribution::Uniform => Ok(()),
            Distribution::Lognormal { mu, sigma } => {
                if !mu.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "lognormal needs finite mu and positive sigma, got mu={mu} sigma={sigma}"
                    )));
                }
                Ok(())
            }
            Distribution::OutlierTail {
                outlier_count,
                low_band_bits,
                high_band_bits,
            } => {
                if low_band_bits == 0 || low_band_bits > high_band_bits || high_band_bits > 63 {
                    return Err(Error::InvalidParameter(format!(
                        "band bits must satisfy 1 <= low <= high <= 63, got low={low_band_bits} high={high_band_bits}"
                    )));
                }
                if outlier_count >= self.n {
                    return Err(Error::InvalidParameter(format!(
                        "{outlier_count} outliers leave no room for regular keys in a dataset of {}",
                        self.n
                    )));
                }
                let low_universe = 1u128 << low_band_bits;
                let high_universe = u64::MAX as u128 - (1u128 << high_band_bits);
                if (self.n - outlier_count) as u128 > low_universe
                    || outlier_count as u128 > high_universe
                {
                    return Err(Error::InvalidParameter(format!(
                        "bands of {low_band_bits} and {high_band_bits} bits cannot hold {} unique keys",
                        self.n
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Draws `spec.n` unique keys, deterministically in `spec.seed`, and attaches
/// payloads derived from the same seed.
pub fn generate(spec: &DatasetSpec) -> Result<SortedDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let keys = match spec.distribution {
        Distribution::Uniform => draw_unique(spec.n, &mut rng, |r| r.random::<u64>())?,
        Distribution::Lognormal { mu, sigma } => {
            let dist = LogNormal::new(mu, sigma)
                .map_err(|e| Error::InvalidParameter(format!("lognormal: {e}")))?;
            // `as` saturates, so huge draws land on u64::MAX
            draw_unique(spec.n, &mut rng, |r| dist.sample(r) as u64)?
        }
        Distribution::OutlierTail {
            outlier_count,
            low_band_bits,
            high_band_bits,
        } => {
            let low_max = (1u64 << low_band_bits) - 1;
            let high_min = (1u64 << high_band_bits) + 1;
            let mut keys = draw_unique(spec.n - outlier_count, &mut rng, |r| {
                r.random_range(0..=low_max)
            })?;
            if outlier_count > 0 {
                keys.extend(draw_unique(outlier_count, &mut rng, |r| {
                    r.random_range(high_min..=u64::MAX)
                })?);
            }
            keys
        }
    };
    SortedDataset::from_keys(keys, spec.seed)
}

fn draw_unique<R, F>(n: usize, rng: &mut R, mut draw: F) -> Result<Vec<Key>>
where
    R: Rng,
    F: FnMut(&mut R) -> Key,
{
    let mut keys: Vec<Key> = (0..n).map(|_| draw(rng)).collect();
    keys.sort_unstable();
    keys.dedup();
    let mut stalled = 0;
    while keys.len() < n {
        let before = keys.len();
        let missing = n - before;
        keys.extend((0..missing).map(|_| draw(rng)));
        keys.sort_unstable();
        keys.dedup();
        if keys.len() == before {
            stalled += 1;
            if stalled == MAX_STALLED_ROUNDS {
                return Err(Error::InvalidParameter(format!(
                    "distribution produced only {before} unique keys, {n} requested"
                )));
            }
        } else {
            stalled = 0;
        }
    }
    Ok(keys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LookupMode {
    /// Uniform draws, with replacement, from the stored keys.
    #[default]
    ExistingKeys,
    /// Uniform draws from `[min key, max key]`; most miss the stored keys.
    UniformInRange,
}

impl LookupMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            LookupMode::ExistingKeys => "existing_keys",
            LookupMode::UniformInRange => "uniform_in_range",
        }
    }
}

impl std::fmt::Display for LookupMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LookupMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "existing_keys" | "existing" => Ok(LookupMode::ExistingKeys),
            "uniform_in_range" | "uniform" => Ok(LookupMode::UniformInRange),
            other => Err(Error::InvalidParameter(format!(
                "unknown lookup mode {other:?} (expected existing_keys or uniform_in_range)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupWorkload {
    pub queries: Vec<Key>,
    pub mode: LookupMode,
}

impl LookupWorkload {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

pub fn gen_lookups(d: &SortedDataset, m: usize, seed: u64, mode: LookupMode) -> LookupWorkload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keys = d.keys();
    let queries = match mode {
        LookupMode::ExistingKeys => (0..m)
            .map(|_| keys[rng.random_range(0..keys.len())])
            .collect(),
        LookupMode::UniformInRange => (0..m)
            .map(|_| rng.random_range(d.min_key()..=d.max_key()))
            .collect(),
    };
    LookupWorkload { queries, mode }
}

/// Wrapping sum of the payloads at each query's lower bound; queries past the
/// last key contribute nothing.
pub fn checksum(d: &SortedDataset, queries: &[Key]) -> u64 {
    queries.iter().fold(0u64, |acc, &q| {
        let lb = lower_bound_oracle(d, q);
        acc.wrapping_add(d.payloads().get(lb).copied().unwrap_or(0))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        for spec in [
            DatasetSpec::uniform(1000, 7),
            DatasetSpec::lognormal(1000, 7),
            DatasetSpec::outlier_tail(1000, 7),
        ] {
            let a = generate(&spec).unwrap();
            assert_eq!(a, generate(&spec).unwrap());
            assert_eq!(a.len(), 1000);
            assert_eq!(a.payload_seed(), Some(7));
            assert_ne!(a, generate(&DatasetSpec { seed: 8, ..spec }).unwrap());
        }
    }

    #[test]
    fn outlier_tail_bands() {
        let d = generate(&DatasetSpec::outlier_tail(5000, 3)).unwrap();
        let high = d.keys().iter().filter(|&&k| k > 1 << 59).count();
        let low = d.keys().iter().filter(|&&k| k < 1 << 50).count();
        assert_eq!(high, 100);
        assert_eq!(low, 4900);
    }

    #[test]
    fn lognormal_cdf_is_curved() {
        let d = generate(&DatasetSpec::lognormal(100_000, 1)).unwrap();
        let (lo, hi) = (d.min_key() as f64, d.max_key() as f64);
        let n = d.len() as f64;
        let max_dev = d
            .keys()
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let line = (k as f64 - lo) / (hi - lo) * (n - 1.0);
                (line - i as f64).abs()
            })
            .fold(0.0, f64::max);
        assert!(max_dev > 0.05 * n, "max deviation {max_dev}");
    }

    #[test]
    fn small_universes_are_rejected() {
        let tight = Distribution::OutlierTail {
            outlier_count: 1,
            low_band_bits: 3,
            high_band_bits: 10,
        };
        assert!(generate(&DatasetSpec::new(tight, 9, 0)).is_ok());
        assert!(generate(&DatasetSpec::new(tight, 10, 0)).is_err());
        let narrow = Distribution::Lognormal {
            mu: 0.0,
            sigma: 0.01,
        };
        let err = generate(&DatasetSpec::new(narrow, 10, 0)).unwrap_err();
        assert!(err.to_string().contains("unique keys"), "{err}");
        assert!(generate(&DatasetSpec::uniform(1, 0)).is_err());
    }

    #[test]
    fn lookups() {
        let d = generate(&DatasetSpec::uniform(2000, 5)).unwrap();
        let existing = gen_lookups(&d, 5000, 9, LookupMode::ExistingKeys);
        assert_eq!(existing, gen_lookups(&d, 5000, 9, LookupMode::ExistingKeys));
        for &q in &existing.queries {
            assert_eq!(d.keys()[lower_bound_oracle(&d, q)], q);
        }
        let ranged = gen_lookups(&d, 5000, 9, LookupMode::UniformInRange);
        for &q in &ranged.queries {
            assert!(lower_bound_oracle(&d, q) < d.len());
        }
    }

    #[test]
    fn checksum_properties() {
        let d = generate(&DatasetSpec::uniform(500, 5)).unwrap();
        assert_eq!(checksum(&d, &[]), 0);
        let mut q = gen_lookups(&d, 300, 1, LookupMode::UniformInRange).queries;
        let direct = q.iter().fold(0u64, |acc, &x| {
            let i = d.keys().partition_point(|&k| k < x);
            acc.wrapping_add(d.payloads()[i])
        });
        assert_eq!(checksum(&d, &q), direct);
        q.reverse();
        assert_eq!(checksum(&d, &q), direct);
        assert_eq!(checksum(&d, &[u64::MAX]), 0);
    }

    #[test]
    fn spec_parses_from_toml() {
        let spec: DatasetSpec =
            toml::from_str("kind = \"lognormal\"\nn = 100\nseed = 4\n").unwrap();
        assert_eq!(spec, DatasetSpec::lognormal(100, 4));
        let spec: DatasetSpec =
            toml::from_str("kind = \"outlier_tail\"\nn = 100\noutlier_count = 5\n").unwrap();
        assert_eq!(
            spec.distribution,
            Distribution::OutlierTail {
                outlier_count: 5,
                low_band_bits: 50,
                high_band_bits: 59
            }
        );
        assert!(toml::from_str::<DatasetSpec>("kind = \"zipf\"\nn = 100\n").is_err());
    }
}
