//! Measurement harness: build time, lookup latency, search-bound size and
//! multithreaded throughput, plus Pareto extraction and CSV output.
//!
//! Lookups are timed in batches (100 queries by default) because a single
//! lookup is too short for the clock. In cold-cache mode every lookup is
//! timed on its own instead, with an eviction buffer streamed through the
//! cache between lookups outside the timed region.

mod pareto;
mod report;

pub use pareto::{first_dominated_pair, pareto_front, pareto_indices};
pub use report::{read_csv, write_csv, write_csv_to, BenchRecord, CSV_HEADER};

use std::hint::black_box;
use std::sync::atomic::{fence, Ordering};
use std::sync::Barrier;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{Key, SortedDataset};
use crate::datasets::checksum;
use crate::error::{Error, Result};
use crate::index_spec::{AnyIndex, IndexSpec};
use crate::search::{last_mile_search, validate_index, SearchIndex, SearchStrategy};

/// Environment variable overriding the eviction buffer size, in MiB.
pub const EVICT_MB_ENV: &str = "LIL_EVICT_MB";

pub const DEFAULT_EVICTION_MB: usize = 64;

const CACHE_LINE: usize = 64;

/// Written `warm`, `cold` or `cold:<mb>` in text and config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CacheMode {
    Warm,
    /// Stream an eviction buffer of this many MiB through the cache before
    /// every lookup.
    Cold {
        eviction_mb: usize,
    },
}

impl CacheMode {
    pub fn cold() -> Self {
        CacheMode::Cold {
            eviction_mb: DEFAULT_EVICTION_MB,
        }
    }

    /// Buffer size actually used, honouring `LIL_EVICT_MB`; `None` when warm.
    pub fn eviction_mb(&self) -> Option<usize> {
        match *self {
            CacheMode::Warm => None,
            CacheMode::Cold { eviction_mb } => Some(
                std::env::var(EVICT_MB_ENV)
                    .ok()
                    .and_then(|v| v.trim().parse().ok())
                    .filter(|&mb| mb >= 1)
                    .unwrap_or(eviction_mb),
            ),
        }
    }

    /// Like `Display`, but with the eviction size actually in effect.
    pub fn label(&self) -> String {
        match self.eviction_mb() {
            None => "warm".into(),
            Some(mb) => format!("cold:{mb}"),
        }
    }
}

impl std::fmt::Display for CacheMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CacheMode::Warm => f.write_str("warm"),
            CacheMode::Cold { eviction_mb } => write!(f, "cold:{eviction_mb}"),
        }
    }
}

impl TryFrom<String> for CacheMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CacheMode> for String {
    fn from(mode: CacheMode) -> String {
        mode.to_string()
    }
}

impl std::str::FromStr for CacheMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "warm" => Ok(CacheMode::Warm),
            None if s == "cold" => Ok(CacheMode::cold()),
            Some(("cold", mb)) => match mb.parse() {
                Ok(eviction_mb) if eviction_mb >= 1 => Ok(CacheMode::Cold { eviction_mb }),
                _ => Err(Error::InvalidParameter(format!(
                    "bad eviction size {mb:?} in cache mode"
                ))),
            },
            _ => Err(Error::InvalidParameter(format!(
                "unknown cache mode {s:?} (expected warm, cold or cold:<mb>)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub strategy: SearchStrategy,
    pub repetitions: usize,
    pub batch_size: usize,
    pub fence: bool,
    pub cache_mode: CacheMode,
    pub threads: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            strategy: SearchStrategy::Binary,
            repetitions: 5,
            batch_size: 100,
            fence: false,
            cache_mode: CacheMode::Warm,
            threads: 1,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 || self.batch_size == 0 || self.threads == 0 {
            return Err(Error::InvalidParameter(format!(
                "repetitions, batch size and threads must all be at least 1 (got {}, {}, {})",
                self.repetitions, self.batch_size, self.threads
            )));
        }
        if self.cache_mode == (CacheMode::Cold { eviction_mb: 0 }) {
            return Err(Error::InvalidParameter(
                "eviction buffer must be at least 1 MiB".into(),
            ));
        }
        Ok(())
    }
}

/// Builds `R` times and returns the last result with the median build time.
pub fn measure_build<T, F>(repetitions: usize, mut build: F) -> Result<(T, u64)>
where
    F: FnMut() -> Result<T>,
{
    let mut times = Vec::with_capacity(repetitions.max(1));
    let mut built = None;
    for _ in 0..repetitions.max(1) {
        let start = Instant::now();
        let value = build()?;
        times.push(start.elapsed().as_nanos() as u64);
        built = Some(black_box(value));
    }
    times.sort_unstable();
    Ok((built.unwrap(), times[times.len() / 2]))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LookupStats {
    pub avg_lookup_ns: f64,
    pub p50_ns: f64,
    pub p99_ns: f64,
    pub throughput: f64,
    pub avg_log2_bound: f64,
    pub checksum: u64,
    pub violations: usize,
}

/// One pass over a workload by one or more workers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub wall_ns: u64,
    /// `(elapsed ns, lookups)` per timed batch, across all workers
    pub batches: Vec<(u64, usize)>,
    pub checksum: u64,
    /// lookups whose last-mile search ran off its bound
    pub misses: usize,
}

impl RunOutput {
    pub fn throughput(&self) -> f64 {
        let lookups: usize = self.batches.iter().map(|b| b.1).sum();
        lookups as f64 * 1e9 / self.wall_ns.max(1) as f64
    }

    fn timed_ns(&self) -> u64 {
        self.batches.iter().map(|b| b.0).sum()
    }
}

struct Worker<'a, I: ?Sized> {
    index: &'a I,
    d: &'a SortedDataset,
    strategy: SearchStrategy,
    fence: bool,
    evict: Option<Vec<u8>>,
}

impl<I: SearchIndex + ?Sized> Worker<'_, I> {
    #[inline(always)]
    fn lookup(&self, q: Key, sum: &mut u64, misses: &mut usize) {
        let bound = self.index.search_bound(q);
        match last_mile_search(self.d.keys(), bound, q, self.strategy) {
            Ok(pos) => *sum = sum.wrapping_add(self.d.payloads().get(pos).copied().unwrap_or(0)),
            Err(_) => *misses += 1,
        }
        if self.fence {
            fence(Ordering::SeqCst);
        }
    }

    fn evict(&mut self) {
        if let Some(buf) = self.evict.as_mut() {
            for i in (0..buf.len()).step_by(CACHE_LINE) {
                buf[i] = buf[i].wrapping_add(1);
            }
            black_box(&buf);
        }
    }

    fn run(mut self, queries: &[Key], batch_size: usize) -> (Vec<(u64, usize)>, u64, usize) {
        let mut sum = 0u64;
        let mut misses = 0usize;
        let mut batches = Vec::new();
        if self.evict.is_some() {
            batches.reserve(queries.len());
            for &q in queries {
                self.evict();
                let start = Instant::now();
                self.lookup(black_box(q), &mut sum, &mut misses);
                batches.push((start.elapsed().as_nanos() as u64, 1));
            }
        } else {
            batches.reserve(queries.len().div_ceil(batch_size));
            for chunk in queries.chunks(batch_size) {
                let start = Instant::now();
                for &q in chunk {
                    self.lookup(black_box(q), &mut sum, &mut misses);
                }
                batches.push((start.elapsed().as_nanos() as u64, chunk.len()));
            }
        }
        (batches, black_box(sum), misses)
    }
}

/// Runs the workload once, split into `cfg.threads` contiguous slices that
/// workers process concurrently against the shared index.
pub fn run_multithreaded<I>(
    index: &I,
    d: &SortedDataset,
    queries: &[Key],
    cfg: &BenchConfig,
) -> Result<RunOutput>
where
    I: SearchIndex + ?Sized,
{
    cfg.validate()?;
    let eviction_bytes = cfg.cache_mode.eviction_mb().map(|mb| mb << 20);
    let worker = || Worker {
        index,
        d,
        strategy: cfg.strategy,
        fence: cfg.fence,
        evict: eviction_bytes.map(|len| vec![0u8; len]),
    };
    let threads = cfg.threads;
    if threads == 1 {
        let w = worker();
        let start = Instant::now();
        let (batches, checksum, misses) = w.run(queries, cfg.batch_size);
        let wall_ns = start.elapsed().as_nanos() as u64;
        return Ok(RunOutput {
            wall_ns,
            batches,
            checksum,
            misses,
        });
    }
    let per_worker = queries.len().div_ceil(threads).max(1);
    let barrier = Barrier::new(threads + 1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let lo = (t * per_worker).min(queries.len());
                let hi = ((t + 1) * per_worker).min(queries.len());
                let slice = &queries[lo..hi];
                let w = worker();
                let barrier = &barrier;
                scope.spawn(move || {
                    barrier.wait();
                    w.run(slice, cfg.batch_size)
                })
            })
            .collect();
        barrier.wait();
        let start = Instant::now();
        let results: Vec<_> = handles
            .into_iter()
            .map(|h| h.join().expect("benchmark worker panicked"))
            .collect();
        let wall_ns = start.elapsed().as_nanos() as u64;
        let mut out = RunOutput {
            wall_ns,
            ..RunOutput::default()
        };
        for (batches, checksum, misses) in results {
            out.batches.extend(batches);
            out.checksum = out.checksum.wrapping_add(checksum);
            out.misses += misses;
        }
        Ok(out)
    })
}

/// Times `cfg.repetitions` passes over the workload, then checks every
/// query's bound against the lower-bound oracle outside the timed region.
///
/// The average latency is the median over passes of timed nanoseconds per
/// lookup; percentiles are taken over the per-lookup means of all batches.
pub fn measure_lookups<I>(
    index: &I,
    d: &SortedDataset,
    queries: &[Key],
    cfg: &BenchConfig,
) -> Result<LookupStats>
where
    I: SearchIndex + ?Sized,
{
    cfg.validate()?;
    let mut averages = Vec::with_capacity(cfg.repetitions);
    let mut throughputs = Vec::with_capacity(cfg.repetitions);
    let mut batch_means = Vec::new();
    let mut checksum_seen = None;
    let mut misses = 0;
    for _ in 0..cfg.repetitions {
        let run = run_multithreaded(index, d, queries, cfg)?;
        averages.push(run.timed_ns() as f64 / queries.len().max(1) as f64);
        throughputs.push(run.throughput());
        batch_means.extend(
            run.batches
                .iter()
                .filter(|b| b.1 > 0)
                .map(|&(ns, count)| ns as f64 / count as f64),
        );
        misses = misses.max(run.misses);
        match checksum_seen {
            None => checksum_seen = Some(run.checksum),
            Some(c) if c != run.checksum => {
                return Err(Error::InvalidParameter(format!(
                    "checksum changed between repetitions: {c} then {}",
                    run.checksum
                )))
            }
            Some(_) => {}
        }
    }
    let report = validate_index(|q| index.search_bound(q), d, queries);
    Ok(LookupStats {
        avg_lookup_ns: median(&mut averages),
        p50_ns: percentile(&mut batch_means, 0.50),
        p99_ns: percentile(&mut batch_means, 0.99),
        throughput: median(&mut throughputs),
        avg_log2_bound: report.avg_log2_bound(),
        checksum: checksum_seen.unwrap_or(0),
        violations: report.violations.max(misses),
    })
}

fn median(values: &mut [f64]) -> f64 {
    percentile(values, 0.5)
}

/// Nearest-rank percentile; 0 for an empty sample.
pub fn percentile(values: &mut [f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_unstable_by(f64::total_cmp);
    let rank = (p * values.len() as f64).ceil() as usize;
    values[rank.clamp(1, values.len()) - 1]
}

/// Builds one index configuration and benchmarks it on a workload.
pub fn run_bench(
    spec: IndexSpec,
    dataset_label: &str,
    d: &SortedDataset,
    queries: &[Key],
    cfg: &BenchConfig,
) -> Result<BenchRecord> {
    cfg.validate()?;
    let (index, build_ns): (AnyIndex, u64) = measure_build(cfg.repetitions, || spec.build(d))?;
    let stats = measure_lookups(&index, d, queries, cfg)?;
    Ok(BenchRecord {
        dataset: dataset_label.to_string(),
        index: spec.kind().to_string(),
        config: format!("{}/{}", spec.params(), cfg.strategy),
        size_bytes: index.size_bytes() as u64,
        build_ns,
        avg_lookup_ns: stats.avg_lookup_ns,
        p50_ns: stats.p50_ns,
        p99_ns: stats.p99_ns,
        avg_log2_bound: stats.avg_log2_bound,
        threads: cfg.threads,
        fence: if cfg.fence { "on" } else { "off" }.to_string(),
        cache_mode: cfg.cache_mode.label(),
        checksum: stats.checksum,
        violations: stats.violations as u64,
    })
}

/// The checksum every correct index must reproduce on `queries`.
pub fn oracle_checksum(d: &SortedDataset, queries: &[Key]) -> u64 {
    checksum(d, queries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gen_lookups, generate, DatasetSpec, LookupMode};

    fn quick(cfg: BenchConfig) -> BenchConfig {
        BenchConfig {
            repetitions: 2,
            ..cfg
        }
    }

    #[test]
    fn percentiles_use_nearest_rank() {
        let mut v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&mut v, 0.5), 50.0);
        assert_eq!(percentile(&mut v, 0.99), 99.0);
        assert_eq!(percentile(&mut [7.0], 0.99), 7.0);
        assert_eq!(percentile(&mut [], 0.5), 0.0);
    }

    #[test]
    fn cache_mode_parsing() {
        assert_eq!("warm".parse::<CacheMode>().unwrap(), CacheMode::Warm);
        assert_eq!(
            "cold:8".parse::<CacheMode>().unwrap(),
            CacheMode::Cold { eviction_mb: 8 }
        );
        assert_eq!("cold".parse::<CacheMode>().unwrap(), CacheMode::cold());
        assert!("cold:0".parse::<CacheMode>().is_err());
        assert!("hot".parse::<CacheMode>().is_err());
        assert_eq!(CacheMode::Cold { eviction_mb: 8 }.to_string(), "cold:8");
    }

    #[test]
    fn config_validation() {
        assert!(BenchConfig::default().validate().is_ok());
        for bad in [
            BenchConfig {
                repetitions: 0,
                ..Default::default()
            },
            BenchConfig {
                threads: 0,
                ..Default::default()
            },
            BenchConfig {
                batch_size: 0,
                ..Default::default()
            },
            BenchConfig {
                cache_mode: CacheMode::Cold { eviction_mb: 0 },
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn checksums_match_oracle_across_settings() {
        let d = generate(&DatasetSpec::lognormal(20_000, 3)).unwrap();
        let q = gen_lookups(&d, 3000, 4, LookupMode::UniformInRange).queries;
        let expected = oracle_checksum(&d, &q);
        for spec in [
            "rmi:linear:linear:64",
            "rs:16:10",
            "pgm:16",
            "rbs:10",
            "sampled:32",
            "binary",
        ] {
            let index = spec.parse::<IndexSpec>().unwrap().build(&d).unwrap();
            for strategy in SearchStrategy::ALL {
                for threads in [1, 3] {
                    for fence in [false, true] {
                        let cfg = quick(BenchConfig {
                            strategy,
                            threads,
                            fence,
                            ..Default::default()
                        });
                        let stats = measure_lookups(&index, &d, &q, &cfg).unwrap();
                        assert_eq!(
                            stats.checksum, expected,
                            "{spec} {strategy} {threads} {fence}"
                        );
                        assert_eq!(stats.violations, 0);
                    }
                }
            }
        }
    }

    #[test]
    fn binary_baseline_log2_bound_is_whole_array() {
        let d = generate(&DatasetSpec::uniform(1000, 1)).unwrap();
        let q = gen_lookups(&d, 100, 1, LookupMode::ExistingKeys).queries;
        let stats = measure_lookups(
            &"binary".parse::<IndexSpec>().unwrap().build(&d).unwrap(),
            &d,
            &q,
            &quick(BenchConfig::default()),
        )
        .unwrap();
        assert!((stats.avg_log2_bound - 1001f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn multithreaded_run_covers_every_query() {
        let d = generate(&DatasetSpec::uniform(5000, 2)).unwrap();
        let q = gen_lookups(&d, 1001, 2, LookupMode::ExistingKeys).queries;
        let index = "pgm:8".parse::<IndexSpec>().unwrap().build(&d).unwrap();
        for threads in [1, 2, 4, 7] {
            let cfg = BenchConfig {
                threads,
                batch_size: 10,
                ..Default::default()
            };
            let out = run_multithreaded(&index, &d, &q, &cfg).unwrap();
            assert_eq!(out.batches.iter().map(|b| b.1).sum::<usize>(), 1001);
            assert_eq!(out.checksum, oracle_checksum(&d, &q));
            assert!(out.throughput() > 0.0);
        }
    }

    #[test]
    fn cold_mode_times_lookups_individually() {
        let d = generate(&DatasetSpec::uniform(1000, 2)).unwrap();
        let q = gen_lookups(&d, 20, 2, LookupMode::ExistingKeys).queries;
        let index = "rs:8:8".parse::<IndexSpec>().unwrap().build(&d).unwrap();
        let cfg = BenchConfig {
            cache_mode: CacheMode::Cold { eviction_mb: 1 },
            ..Default::default()
        };
        let out = run_multithreaded(&index, &d, &q, &cfg).unwrap();
        assert_eq!(out.batches.len(), 20);
        assert_eq!(out.checksum, oracle_checksum(&d, &q));
    }

    #[test]
    fn broken_index_is_flagged() {
        struct Liar(usize);
        impl SearchIndex for Liar {
            fn search_bound(&self, _: Key) -> crate::search::SearchBound {
                crate::search::SearchBound::new(0, self.0)
            }
            fn size_bytes(&self) -> usize {
                0
            }
            fn name(&self) -> &'static str {
                "liar"
            }
        }
        let d = generate(&DatasetSpec::uniform(1000, 2)).unwrap();
        let q = gen_lookups(&d, 200, 2, LookupMode::ExistingKeys).queries;
        let stats = measure_lookups(&Liar(10), &d, &q, &quick(BenchConfig::default())).unwrap();
        assert!(stats.violations > 0);
        assert_ne!(stats.checksum, oracle_checksum(&d, &q));
    }

    #[test]
    fn run_bench_fills_a_record() {
        let d = generate(&DatasetSpec::uniform(2000, 2)).unwrap();
        let q = gen_lookups(&d, 500, 2, LookupMode::ExistingKeys).queries;
        let cfg = quick(BenchConfig {
            strategy: SearchStrategy::Linear,
            ..Default::default()
        });
        let rec = run_bench("rs:8:6".parse().unwrap(), "uniform-2000", &d, &q, &cfg).unwrap();
        assert_eq!(rec.index, "rs");
        assert_eq!(rec.config, "8:6/linear");
        assert_eq!(rec.cache_mode, "warm");
        assert_eq!(rec.fence, "off");
        assert_eq!(rec.checksum, oracle_checksum(&d, &q));
        assert_eq!(rec.violations, 0);
        assert!(rec.size_bytes > 0 && rec.avg_log2_bound < 5.0);
    }
}
