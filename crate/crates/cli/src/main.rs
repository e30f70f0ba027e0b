//! `lil`: generate datasets, build and validate indexes, run benchmark grids
//! and extract Pareto fronts.

mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lil_core::bench::{self, BenchRecord, CacheMode};
use lil_core::datasets::{self, DatasetSpec, Distribution, LookupMode};
use lil_core::{validate_index, AnyIndex, IndexSpec, SearchIndex, SearchStrategy, SortedDataset};

use manifest::{
    DatasetSource, RunManifest, DEFAULT_DATASET_SEED, DEFAULT_QUERY_COUNT, DEFAULT_WORKLOAD_SEED,
};

#[derive(Parser)]
#[command(name = "lil", version, about = "Learned index benchmark suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it as a SOSD-style key file
    Generate {
        #[command(flatten)]
        dataset: GenArgs,
        /// Output key file
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Build an index over a key file and write the serialized index
    Build {
        /// Input key file
        #[arg(long)]
        dataset: PathBuf,
        /// Index spec, e.g. rmi:linear:linear:1024, rs:32:12, pgm:32, rbs:12, sampled:16, binary
        #[arg(long)]
        index: IndexSpec,
        /// Output index file
        #[arg(long, short)]
        out: PathBuf,
        /// Builds to time; the median is reported
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
    },
    /// Check that an index's search bounds contain every query's lower bound
    Validate {
        /// Serialized index written by `build`
        #[arg(long)]
        index: PathBuf,
        /// Key file the index was built over
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        workload: WorkloadArgs,
    },
    /// Run a benchmark grid and write one CSV row per index
    Bench(BenchArgs),
    /// Keep only the rows of a results CSV that no other row dominates
    Pareto {
        /// Results CSV written by `bench`
        #[arg(long, short)]
        input: PathBuf,
        /// Output CSV; standard output when omitted
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct GenArgs {
    /// Key distribution: uniform, lognormal or outlier_tail
    #[arg(long = "dist")]
    dist: Option<String>,
    /// Number of keys
    #[arg(long)]
    n: Option<usize>,
    /// Generator seed
    #[arg(long)]
    seed: Option<u64>,
    /// Lognormal location parameter
    #[arg(long)]
    mu: Option<f64>,
    /// Lognormal scale parameter
    #[arg(long)]
    sigma: Option<f64>,
    /// Number of huge outlier keys (outlier_tail)
    #[arg(long)]
    outlier_count: Option<usize>,
    /// Regular keys lie below 2^low_band_bits (outlier_tail)
    #[arg(long)]
    low_band_bits: Option<u32>,
    /// Outliers lie above 2^high_band_bits (outlier_tail)
    #[arg(long)]
    high_band_bits: Option<u32>,
}

impl GenArgs {
    fn is_empty(&self) -> bool {
        self.dist.is_none()
            && self.n.is_none()
            && self.seed.is_none()
            && self.mu.is_none()
            && self.sigma.is_none()
            && self.outlier_count.is_none()
            && self.low_band_bits.is_none()
            && self.high_band_bits.is_none()
    }

    /// Applies the flags on top of `base` (or defaults when there is none).
    fn apply(&self, base: Option<DatasetSpec>) -> Result<DatasetSpec> {
        let mut spec = match (&self.dist, base) {
            (Some(name), Some(base)) if name != base.distribution.name() => DatasetSpec {
                distribution: Distribution::from_name(name)?,
                ..base
            },
            (_, Some(base)) => base,
            (Some(name), None) => {
                DatasetSpec::new(Distribution::from_name(name)?, 0, DEFAULT_DATASET_SEED)
            }
            (None, None) => bail!("--dist is required"),
        };
        if let Some(n) = self.n {
            spec.n = n;
        }
        if spec.n == 0 {
            bail!("--n is required");
        }
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        match &mut spec.distribution {
            Distribution::Uniform => {}
            Distribution::Lognormal { mu, sigma } => {
                *mu = self.mu.unwrap_or(*mu);
                *sigma = self.sigma.unwrap_or(*sigma);
            }
            Distribution::OutlierTail {
                outlier_count,
                low_band_bits,
                high_band_bits,
            } => {
                *outlier_count = self.outlier_count.unwrap_or(*outlier_count);
                *low_band_bits = self.low_band_bits.unwrap_or(*low_band_bits);
                *high_band_bits = self.high_band_bits.unwrap_or(*high_band_bits);
            }
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct WorkloadArgs {
    /// Number of lookup queries
    #[arg(long, default_value_t = DEFAULT_QUERY_COUNT)]
    queries: usize,
    /// existing_keys or uniform_in_range
    #[arg(long, default_value_t = LookupMode::ExistingKeys)]
    mode: LookupMode,
    /// Workload seed
    #[arg(long, default_value_t = DEFAULT_WORKLOAD_SEED)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML run manifest; every field can be overridden by the flags below
    #[arg(long, short)]
    manifest: Option<PathBuf>,
    /// Key file to benchmark on (replaces the manifest's dataset)
    #[arg(long, conflicts_with = "dist")]
    dataset: Option<PathBuf>,
    #[command(flatten)]
    gen: GenArgs,
    /// Index spec to benchmark; repeat for a grid (replaces the manifest's list)
    #[arg(long = "index")]
    indexes: Vec<IndexSpec>,
    /// Number of lookup queries
    #[arg(long)]
    queries: Option<usize>,
    /// existing_keys or uniform_in_range
    #[arg(long)]
    mode: Option<LookupMode>,
    /// Workload seed
    #[arg(long)]
    workload_seed: Option<u64>,
    /// Last-mile search: binary, linear or interpolation
    #[arg(long)]
    strategy: Option<SearchStrategy>,
    /// Timed passes per configuration
    #[arg(long)]
    repetitions: Option<usize>,
    /// Lookups per timed batch
    #[arg(long)]
    batch_size: Option<usize>,
    /// Put a full memory fence after every lookup
    #[arg(long)]
    fence: Option<bool>,
    /// warm, cold or cold:<MiB>
    #[arg(long)]
    cache_mode: Option<CacheMode>,
    /// Worker threads sharing the index
    #[arg(long)]
    threads: Option<usize>,
    /// Output CSV; standard output when omitted
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl BenchArgs {
    fn manifest(&self) -> Result<RunManifest> {
        let mut m = match &self.manifest {
            Some(path) => RunManifest::load(path)?,
            None => RunManifest::default(),
        };
        if let Some(path) = &self.dataset {
            m.dataset = Some(DatasetSource::File { path: path.clone() });
        } else if !self.gen.is_empty() {
            let base = match m.dataset {
                Some(DatasetSource::Generated(spec)) => Some(spec),
                _ => None,
            };
            m.dataset = Some(DatasetSource::Generated(self.gen.apply(base)?));
        }
        if !self.indexes.is_empty() {
            m.indexes = self.indexes.clone();
        }
        let w = &mut m.workload;
        w.count = self.queries.unwrap_or(w.count);
        w.mode = self.mode.unwrap_or(w.mode);
        w.seed = self.workload_seed.unwrap_or(w.seed);
        let b = &mut m.bench;
        b.strategy = self.strategy.unwrap_or(b.strategy);
        b.repetitions = self.repetitions.unwrap_or(b.repetitions);
        b.batch_size = self.batch_size.unwrap_or(b.batch_size);
        b.fence = self.fence.unwrap_or(b.fence);
        b.cache_mode = self.cache_mode.unwrap_or(b.cache_mode);
        b.threads = self.threads.unwrap_or(b.threads);
        if self.out.is_some() {
            m.output = self.out.clone();
        }
        m.check()?;
        Ok(m)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Generate { dataset, out } => {
            let spec = dataset.apply(None)?;
            let d = datasets::generate(&spec)?;
            datasets::save_sosd(&d, &out)?;
            println!("wrote {} keys to {}", d.len(), out.display());
        }
        Command::Build {
            dataset,
            index,
            out,
            repetitions,
        } => {
            let d = datasets::load_sosd(&dataset)?;
            let (built, build_ns) = bench::measure_build(repetitions, || index.build(&d))?;
            fs::write(&out, built.to_bytes())
                .with_context(|| format!("writing {}", out.display()))?;
            println!(
                "index={index} size_bytes={} build_ns={build_ns}",
                built.size_bytes()
            );
        }
        Command::Validate {
            index,
            dataset,
            workload,
        } => {
            let d = datasets::load_sosd(&dataset)?;
            let bytes = fs::read(&index).with_context(|| format!("reading {}", index.display()))?;
            let built = AnyIndex::from_bytes(&bytes)
                .with_context(|| format!("decoding {}", index.display()))?;
            if built.len() != d.len() {
                bail!(
                    "index covers {} keys but the dataset has {}",
                    built.len(),
                    d.len()
                );
            }
            let queries =
                datasets::gen_lookups(&d, workload.queries, workload.seed, workload.mode).queries;
            let report = validate_index(|q| built.search_bound(q), &d, &queries);
            println!("{} violations", report.violations);
            println!("avg_log2_bound={:.3}", report.avg_log2_bound());
            if !report.is_valid() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Bench(args) => return bench_command(&args.manifest()?),
        Command::Pareto { input, out } => {
            let rows = bench::read_csv(&input)?;
            let front = grouped_front(&rows)?;
            emit_csv(&front, out.as_ref())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn bench_command(m: &RunManifest) -> Result<ExitCode> {
    let source = m.dataset.as_ref().expect("checked by RunManifest::check");
    let d: SortedDataset = source.load()?;
    let label = source.label();
    let queries =
        datasets::gen_lookups(&d, m.workload.count, m.workload.seed, m.workload.mode).queries;
    let expected = bench::oracle_checksum(&d, &queries);
    let mut rows = Vec::with_capacity(m.indexes.len());
    let mut failures = 0;
    for &spec in &m.indexes {
        let row = bench::run_bench(spec, &label, &d, &queries, &m.bench)?;
        if row.violations > 0 || row.checksum != expected {
            eprintln!(
                "{spec}: {} violations, checksum {} (expected {expected})",
                row.violations, row.checksum
            );
            failures += 1;
        }
        eprintln!(
            "{spec}: size {} B, {:.1} ns/lookup, log2 bound {:.2}",
            row.size_bytes, row.avg_lookup_ns, row.avg_log2_bound
        );
        rows.push(row);
    }
    let front = grouped_front(&rows)?;
    eprintln!(
        "{} of {} configurations are Pareto optimal",
        front.len(),
        rows.len()
    );
    emit_csv(&rows, m.output.as_ref())?;
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

/// Pareto front within each (dataset, threads, fence, cache mode) group,
/// rechecked exhaustively before it is returned.
fn grouped_front(rows: &[BenchRecord]) -> Result<Vec<BenchRecord>> {
    let mut groups: BTreeMap<(&str, usize, &str, &str), Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups
            .entry((&r.dataset, r.threads, &r.fence, &r.cache_mode))
            .or_default()
            .push(i);
    }
    let mut keep = Vec::new();
    for members in groups.values() {
        let front = bench::pareto_indices(members, |&i| rows[i].size_latency());
        let chosen: Vec<usize> = front.into_iter().map(|j| members[j]).collect();
        if let Some((a, b)) = bench::first_dominated_pair(&chosen, |&i| rows[i].size_latency()) {
            bail!(
                "Pareto recheck failed: row {} dominates row {}",
                chosen[a],
                chosen[b]
            );
        }
        keep.extend(chosen);
    }
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| rows[i].clone()).collect())
}

fn emit_csv(rows: &[BenchRecord], out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => bench::write_csv(rows, path)?,
        None => bench::write_csv_to(rows, io::stdout().lock())?,
    }
    Ok(())
}
