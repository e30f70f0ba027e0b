//! Textual index specifications (`rs:32:12`, `pgm:64`, ...) and a closed enum
//! over every buildable index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{BinaryBaseline, RbsIndex, SampledIndex};
use crate::dataset::{Key, SortedDataset};
use crate::error::{Error, Result};
use crate::pgm::PgmIndex;
use crate::radix_spline::RsIndex;
use crate::rmi::{ModelKind, RmiConfig, TrainedRmi};
use crate::search::{SearchBound, SearchIndex};

/// An index kind plus its parameters.
///
/// The text form is `kind[:param...]`:
/// `rmi:<stage1>:<stage2>:<branching>`, `rs:<epsilon>:<radix_bits>`,
/// `pgm:<epsilon>`, `rbs:<radix_bits>`, `sampled:<stride>` and `binary`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum IndexSpec {
    Rmi(RmiConfig),
    RadixSpline { epsilon: usize, radix_bits: u32 },
    Pgm { epsilon: usize },
    Rbs { radix_bits: u32 },
    Sampled { stride: usize },
    Binary,
}

impl IndexSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            IndexSpec::Rmi(_) => "rmi",
            IndexSpec::RadixSpline { .. } => "rs",
            IndexSpec::Pgm { .. } => "pgm",
            IndexSpec::Rbs { .. } => "rbs",
            IndexSpec::Sampled { .. } => "sampled",
            IndexSpec::Binary => "binary",
        }
    }

    /// The parameters without the kind, e.g. `32:12` for `rs:32:12`.
    pub fn params(&self) -> String {
        match self {
            IndexSpec::Rmi(c) => format!("{}:{}:{}", c.stage1, c.stage2, c.branching),
            IndexSpec::RadixSpline {
                epsilon,
                radix_bits,
            } => format!("{epsilon}:{radix_bits}"),
            IndexSpec::Pgm { epsilon } => epsilon.to_string(),
            IndexSpec::Rbs { radix_bits } => radix_bits.to_string(),
            IndexSpec::Sampled { stride } => stride.to_string(),
            IndexSpec::Binary => String::new(),
        }
    }

    pub fn build(&self, d: &SortedDataset) -> Result<AnyIndex> {
        Ok(match *self {
            IndexSpec::Rmi(config) => AnyIndex::Rmi(TrainedRmi::train(d, config)?),
            IndexSpec::RadixSpline {
                epsilon,
                radix_bits,
            } => AnyIndex::RadixSpline(RsIndex::build(d, epsilon, radix_bits)?),
            IndexSpec::Pgm { epsilon } => AnyIndex::Pgm(PgmIndex::build(d, epsilon)?),
            IndexSpec::Rbs { radix_bits } => AnyIndex::Rbs(RbsIndex::build(d, radix_bits)?),
            IndexSpec::Sampled { stride } => AnyIndex::Sampled(SampledIndex::build(d, stride)?),
            IndexSpec::Binary => AnyIndex::Binary(BinaryBaseline::build(d)),
        })
    }
}

impl fmt::Display for IndexSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexSpec::Binary => f.write_str("binary"),
            other => write!(f, "{}:{}", other.kind(), other.params()),
        }
    }
}

fn param<T: FromStr>(spec: &str, what: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("index spec {spec:?}: bad {what} {value:?}")))
}

impl FromStr for IndexSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let spec = match parts.as_slice() {
            ["rmi", s1, s2, b] => IndexSpec::Rmi(RmiConfig::new(
                s1.parse::<ModelKind>()?,
                s2.parse::<ModelKind>()?,
                param(s, "branching factor", b)?,
            )),
            ["rs", eps, r] => IndexSpec::RadixSpline {
                epsilon: param(s, "error bound", eps)?,
                radix_bits: param(s, "radix bits", r)?,
            },
            ["pgm", eps] => IndexSpec::Pgm {
                epsilon: param(s, "error bound", eps)?,
            },
            ["rbs", r] => IndexSpec::Rbs {
                radix_bits: param(s, "radix bits", r)?,
            },
            ["sampled", k] => IndexSpec::Sampled {
                stride: param(s, "stride", k)?,
            },
            ["binary"] => IndexSpec::Binary,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unrecognised index spec {s:?}; expected one of rmi:<linear|cubic>:<linear|cubic>:<B>, \
                     rs:<eps>:<bits>, pgm:<eps>, rbs:<bits>, sampled:<k>, binary"
                )))
            }
        };
        Ok(spec)
    }
}

impl TryFrom<String> for IndexSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<IndexSpec> for String {
    fn from(spec: IndexSpec) -> String {
        spec.to_string()
    }
}

/// Any built index, dispatched statically by variant.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyIndex {
    Rmi(TrainedRmi),
    RadixSpline(RsIndex),
    Pgm(PgmIndex),
    Rbs(RbsIndex),
    Sampled(SampledIndex),
    Binary(BinaryBaseline),
}

impl AnyIndex {
    pub fn spec(&self) -> IndexSpec {
        match self {
            AnyIndex::Rmi(i) => IndexSpec::Rmi(i.config()),
            AnyIndex::RadixSpline(i) => IndexSpec::RadixSpline {
                epsilon: i.epsilon(),
                radix_bits: i.table().radix_bits,
            },
            AnyIndex::Pgm(i) => IndexSpec::Pgm {
                epsilon: i.epsilon(),
            },
            AnyIndex::Rbs(i) => IndexSpec::Rbs {
                radix_bits: i.radix_bits(),
            },
            AnyIndex::Sampled(i) => IndexSpec::Sampled { stride: i.stride() },
            AnyIndex::Binary(_) => IndexSpec::Binary,
        }
    }

    /// Number of keys the index was built over.
    pub fn len(&self) -> usize {
        match self {
            AnyIndex::Rmi(i) => i.len(),
            AnyIndex::RadixSpline(i) => i.len(),
            AnyIndex::Pgm(i) => i.len(),
            AnyIndex::Rbs(i) => i.len(),
            AnyIndex::Sampled(i) => i.len(),
            AnyIndex::Binary(i) => i.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            AnyIndex::Rmi(i) => i.to_bytes(),
            AnyIndex::RadixSpline(i) => i.to_bytes(),
            AnyIndex::Pgm(i) => i.to_bytes(),
            AnyIndex::Rbs(i) => i.to_bytes(),
            AnyIndex::Sampled(i) => i.to_bytes(),
            AnyIndex::Binary(i) => i.to_bytes(),
        }
    }

    /// Decodes a blob written by [`AnyIndex::to_bytes`], picking the index
    /// type from its leading magic.
    pub fn from_bytes(bytes: &[u8]) -> Result<AnyIndex> {
        Ok(match bytes.get(..4) {
            Some(b"RMI1") => AnyIndex::Rmi(TrainedRmi::from_bytes(bytes)?),
            Some(b"RSP1") => AnyIndex::RadixSpline(RsIndex::from_bytes(bytes)?),
            Some(b"PGM1") => AnyIndex::Pgm(PgmIndex::from_bytes(bytes)?),
            Some(b"RBS1") => AnyIndex::Rbs(RbsIndex::from_bytes(bytes)?),
            Some(b"SMP1") => AnyIndex::Sampled(SampledIndex::from_bytes(bytes)?),
            Some(b"BIN1") => AnyIndex::Binary(BinaryBaseline::from_bytes(bytes)?),
            _ => {
                return Err(Error::Format(
                    "not a serialized index (unknown magic)".into(),
                ))
            }
        })
    }

    /// Borrows the concrete index as a trait object.
    pub fn as_dyn(&self) -> &dyn SearchIndex {
        match self {
            AnyIndex::Rmi(i) => i,
            AnyIndex::RadixSpline(i) => i,
            AnyIndex::Pgm(i) => i,
            AnyIndex::Rbs(i) => i,
            AnyIndex::Sampled(i) => i,
            AnyIndex::Binary(i) => i,
        }
    }
}

impl SearchIndex for AnyIndex {
    #[inline]
    fn search_bound(&self, key: Key) -> SearchBound {
        match self {
            AnyIndex::Rmi(i) => i.lookup(key),
            AnyIndex::RadixSpline(i) => i.lookup(key),
            AnyIndex::Pgm(i) => i.lookup(key),
            AnyIndex::Rbs(i) => i.lookup(key),
            AnyIndex::Sampled(i) => i.lookup(key),
            AnyIndex::Binary(i) => i.lookup(key),
        }
    }

    fn size_bytes(&self) -> usize {
        self.as_dyn().size_bytes()
    }

    fn name(&self) -> &'static str {
        self.as_dyn().name()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::lower_bound_oracle;

    const SPECS: [&str; 7] = [
        "rmi:linear:linear:64",
        "rmi:linear:cubic:8",
        "rs:32:12",
        "pgm:32",
        "rbs:12",
        "sampled:16",
        "binary",
    ];

    #[test]
    fn text_form_round_trips() {
        for s in SPECS {
            let spec: IndexSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert_eq!(
            "rs:4:8".parse::<IndexSpec>().unwrap(),
            IndexSpec::RadixSpline {
                epsilon: 4,
                radix_bits: 8
            }
        );
        for bad in [
            "",
            "rs:4",
            "pgm:x",
            "rmi:linear:quad:4",
            "btree:4",
            "binary:1",
        ] {
            assert!(bad.parse::<IndexSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn builds_every_kind_and_round_trips_blobs() {
        let d = SortedDataset::from_keys((0..5000u64).map(|i| i * i + 3).collect(), 1).unwrap();
        for s in SPECS {
            let spec: IndexSpec = s.parse().unwrap();
            let index = spec.build(&d).unwrap();
            assert_eq!(index.spec(), spec);
            assert_eq!(index.name(), spec.kind());
            assert_eq!(index.len(), d.len());
            let back = AnyIndex::from_bytes(&index.to_bytes()).unwrap();
            assert_eq!(back, index);
            for x in [0, 4, 1_000_000, u64::MAX] {
                assert!(index.search_bound(x).contains(lower_bound_oracle(&d, x)));
            }
        }
        assert!(AnyIndex::from_bytes(b"nope").is_err());
        assert!("pgm:0".parse::<IndexSpec>().unwrap().build(&d).is_err());
    }

    #[test]
    fn serde_uses_text_form() {
        #[derive(Deserialize)]
        struct Grid {
            indexes: Vec<IndexSpec>,
        }
        let grid: Grid = toml::from_str("indexes = [\"pgm:8\", \"binary\"]").unwrap();
        assert_eq!(
            grid.indexes,
            vec![IndexSpec::Pgm { epsilon: 8 }, IndexSpec::Binary]
        );
        assert!(toml::from_str::<Grid>("indexes = [\"pgm\"]").is_err());
    }
}
