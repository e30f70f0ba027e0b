//! Declarative benchmark runs loaded from TOML.
//!
//! ```toml
//! indexes = ["rmi:linear:linear:1024", "rs:32:12", "pgm:32", "binary"]
//! output = "results.csv"
//!
//! [dataset]
//! kind = "lognormal"   # or: path = "keys.bin"
//! n = 1000000
//! seed = 42
//!
//! [workload]
//! count = 100000
//! mode = "existing_keys"
//! seed = 7
//!
//! [bench]
//! strategy = "binary"
//! repetitions = 5
//! cache_mode = "warm"   # or "cold:64"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use lil_core::bench::BenchConfig;
use lil_core::datasets::{self, DatasetSpec, LookupMode};
use lil_core::{IndexSpec, SortedDataset};

pub const DEFAULT_DATASET_SEED: u64 = 42;
pub const DEFAULT_WORKLOAD_SEED: u64 = 7;
pub const DEFAULT_QUERY_COUNT: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    File { path: PathBuf },
    Generated(DatasetSpec),
}

impl DatasetSource {
    pub fn label(&self) -> String {
        match self {
            DatasetSource::File { path } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            DatasetSource::Generated(spec) => spec.label(),
        }
    }

    pub fn load(&self) -> Result<SortedDataset> {
        Ok(match self {
            DatasetSource::File { path } => datasets::load_sosd(path)?,
            DatasetSource::Generated(spec) => datasets::generate(spec)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    pub count: usize,
    pub mode: LookupMode,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            count: DEFAULT_QUERY_COUNT,
            mode: LookupMode::ExistingKeys,
            seed: DEFAULT_WORKLOAD_SEED,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub dataset: Option<DatasetSource>,
    #[serde(default)]
    pub indexes: Vec<IndexSpec>,
    #[serde(default)]
    pub workload: WorkloadSpec,
    #[serde(default)]
    pub bench: BenchConfig,
    pub output: Option<PathBuf>,
}

impl RunManifest {
    pub fn parse(text: &str) -> Result<RunManifest> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a manifest; relative dataset and output paths are taken
    /// relative to the manifest's directory.
    pub fn load(path: &Path) -> Result<RunManifest> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut m = Self::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(DatasetSource::File { path }) = &mut m.dataset {
            *path = base.join(&*path);
        }
        if let Some(out) = &mut m.output {
            *out = base.join(&*out);
        }
        Ok(m)
    }

    pub fn check(&self) -> Result<()> {
        if self.dataset.is_none() {
            bail!("no dataset: give one in the manifest or with --dataset / --dist");
        }
        if self.indexes.is_empty() {
            bail!("no indexes to benchmark: list them in the manifest or with --index");
        }
        if self.workload.count == 0 {
            bail!("the workload needs at least one query");
        }
        self.bench.validate()?;
        Ok(())
    }
}
