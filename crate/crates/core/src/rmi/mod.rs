//! Two-stage recursive model index.
//!
//! A stage-one model routes each key to one of `B` stage-two models
//! (leaf `= ⌊B · f1(x) / n⌋`, clamped). The chosen leaf predicts a position,
//! which is clamped to the leaf's position range and widened by the leaf's
//! recorded error envelope to form the search bound.
//!
//! Both stages are forced to be non-decreasing in the key. That keeps each
//! leaf's keys contiguous and lets a lookup for an absent key be covered by
//! the envelopes of its neighbouring stored keys.

mod model;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use model::{fit_cubic, fit_linear, CubicModel, LinearModel};

use crate::codec::{BlobReader, BlobWriter};
use crate::dataset::{Key, SortedDataset};
use crate::error::{Error, Result};
use crate::search::{bound_from_estimate, ErrorEnvelope, SearchBound, SearchIndex};

const MAGIC: &[u8; 4] = b"RMI1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Cubic,
}

impl ModelKind {
    fn code(self) -> u8 {
        match self {
            ModelKind::Linear => 0,
            ModelKind::Cubic => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ModelKind::Linear),
            1 => Some(ModelKind::Cubic),
            _ => None,
        }
    }

    pub fn size_bytes(self) -> usize {
        match self {
            ModelKind::Linear => LinearModel::SIZE_BYTES,
            ModelKind::Cubic => CubicModel::SIZE_BYTES,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Linear => "linear",
            ModelKind::Cubic => "cubic",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(ModelKind::Linear),
            "cubic" => Ok(ModelKind::Cubic),
            other => Err(Error::InvalidParameter(format!(
                "unknown model kind {other:?} (expected linear or cubic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RmiConfig {
    pub stage1: ModelKind,
    pub stage2: ModelKind,
    pub branching: usize,
}

impl RmiConfig {
    pub fn new(stage1: ModelKind, stage2: ModelKind, branching: usize) -> Self {
        RmiConfig {
            stage1,
            stage2,
            branching,
        }
    }

    pub fn linear(branching: usize) -> Self {
        Self::new(ModelKind::Linear, ModelKind::Linear, branching)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    Cubic(CubicModel),
}

impl Model {
    #[inline]
    pub fn predict(&self, key: Key) -> f64 {
        match self {
            Model::Linear(m) => m.predict(key),
            Model::Cubic(m) => m.predict(key),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Linear(_) => ModelKind::Linear,
            Model::Cubic(_) => ModelKind::Cubic,
        }
    }

    /// Fits a (near) non-decreasing model of the requested kind.
    fn fit_monotone(kind: ModelKind, points: &[(Key, f64)]) -> Model {
        Self::fit_with_dip(kind, points, 0.5)
    }

    /// Stage-one models route keys, so any decrease would break contiguity.
    fn fit_router(kind: ModelKind, points: &[(Key, f64)]) -> Model {
        Self::fit_with_dip(kind, points, 0.0)
    }

    fn fit_with_dip(kind: ModelKind, points: &[(Key, f64)], max_dip: f64) -> Model {
        match kind {
            ModelKind::Linear => {
                let mut m = fit_linear(points.iter().copied());
                if m.slope < 0.0 {
                    m = LinearModel {
                        slope: 0.0,
                        intercept: points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64,
                    };
                }
                Model::Linear(m)
            }
            ModelKind::Cubic => {
                let mut m = fit_cubic(points);
                // A dip of under half a position is absorbed by the lookup slack.
                if m.min_slope() < -max_dip {
                    m = model::embed_linear(points, m);
                }
                if m.c < 0.0 {
                    m.d += m.c * 0.5;
                    m.c = 0.0;
                }
                Model::Cubic(m)
            }
        }
    }

    fn constant(kind: ModelKind, position: f64) -> Model {
        match kind {
            ModelKind::Linear => Model::Linear(LinearModel {
                slope: 0.0,
                intercept: position,
            }),
            ModelKind::Cubic => Model::Cubic(CubicModel {
                a: 0.0,
                b: 0.0,
                c: 0.0,
                d: position,
                key_min: 0,
                inv_range: 1.0,
            }),
        }
    }

    fn write(&self, w: &mut BlobWriter) {
        match self {
            Model::Linear(m) => {
                w.f64(m.slope).f64(m.intercept);
            }
            Model::Cubic(m) => {
                w.f64(m.a)
                    .f64(m.b)
                    .f64(m.c)
                    .f64(m.d)
                    .u64(m.key_min)
                    .f64(m.inv_range);
            }
        }
    }

    fn read(kind: ModelKind, r: &mut BlobReader<'_>) -> Result<Model> {
        Ok(match kind {
            ModelKind::Linear => Model::Linear(LinearModel {
                slope: r.f64()?,
                intercept: r.f64()?,
            }),
            ModelKind::Cubic => Model::Cubic(CubicModel {
                a: r.f64()?,
                b: r.f64()?,
                c: r.f64()?,
                d: r.f64()?,
                key_min: r.u64()?,
                inv_range: r.f64()?,
            }),
        })
    }
}

/// Per-leaf position range and error envelope. Positions fit in `u32`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LeafRecord {
    /// exact envelope over the leaf's stored keys
    under: u32,
    over: u32,
    /// first assigned position; `end` is one past the last
    first: u32,
    end: u32,
}

impl LeafRecord {
    const SIZE_BYTES: usize = 16;
}

#[derive(Debug, Clone, PartialEq)]
struct Leaf {
    model: Model,
    record: LeafRecord,
    /// envelope applied at lookup time
    lookup_env: ErrorEnvelope,
}

impl Leaf {
    fn new(model: Model, record: LeafRecord, empty: bool) -> Leaf {
        // A key between two stored keys may sit one position further above
        // its estimate than the stored key below it.
        let mut lookup_env = ErrorEnvelope::new(record.under as usize, record.over as usize + 1);
        if !empty && model.kind() == ModelKind::Cubic {
            // Horner evaluation is monotone only up to rounding.
            lookup_env.under += 1;
            lookup_env.over += 1;
        }
        Leaf {
            model,
            record,
            lookup_env,
        }
    }

    #[inline]
    fn estimate(&self, key: Key) -> usize {
        let p = self.model.predict(key);
        p.max(self.record.first as f64).min(self.record.end as f64) as usize
    }
}

/// Clamped leaf selection from a pre-scaled stage-one output `B · f1(x) / n`.
#[inline]
pub fn route(scaled: f64, branching: usize) -> usize {
    // `as` saturates negatives and NaN to 0
    (scaled as usize).min(branching - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRmi {
    config: RmiConfig,
    stage1: Model,
    leaves: Vec<Leaf>,
    n: usize,
    route_scale: f64,
}

impl TrainedRmi {
    pub fn train(d: &SortedDataset, config: RmiConfig) -> Result<TrainedRmi> {
        if config.branching == 0 {
            return Err(Error::InvalidParameter(
                "RMI branching factor must be at least 1".into(),
            ));
        }
        if config.branching > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "RMI branching factor {} too large",
                config.branching
            )));
        }
        let n = d.len();
        if n >= u32::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "RMI supports at most {} keys, got {n}",
                u32::MAX - 1
            )));
        }
        let keys = d.keys();
        let points: Vec<(Key, f64)> = keys
            .iter()
            .enumerate()
            .map(|(i, &k)| (k, i as f64))
            .collect();

        let stage1 = Model::fit_router(config.stage1, &points);
        let route_scale = config.branching as f64 / n as f64;
        let mut rmi = TrainedRmi {
            config,
            stage1,
            leaves: Vec::with_capacity(config.branching),
            n,
            route_scale,
        };

        let mut start = 0usize;
        for leaf in 0..config.branching {
            let mut end = start;
            while end < n && rmi.leaf_index(keys[end]) == leaf {
                end += 1;
            }
            rmi.leaves
                .push(train_leaf(config.stage2, &points[start..end], start));
            start = end;
        }
        if start != n {
            // Routing is non-decreasing in the key, so this is unreachable
            // unless the stage-one model misbehaves numerically.
            return Err(Error::InvalidParameter(format!(
                "stage-one routing is not monotone at position {start}"
            )));
        }
        Ok(rmi)
    }

    #[inline]
    pub fn leaf_index(&self, key: Key) -> usize {
        route(
            self.stage1.predict(key) * self.route_scale,
            self.config.branching,
        )
    }

    #[inline]
    pub fn lookup(&self, key: Key) -> SearchBound {
        let leaf = &self.leaves[self.leaf_index(key)];
        bound_from_estimate(leaf.estimate(key), leaf.lookup_env, self.n)
    }

    /// Clamped position estimate before the envelope is applied.
    pub fn estimate(&self, key: Key) -> usize {
        self.leaves[self.leaf_index(key)].estimate(key)
    }

    pub fn config(&self) -> RmiConfig {
        self.config
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn stage1(&self) -> &Model {
        &self.stage1
    }

    pub fn leaf_model(&self, leaf: usize) -> &Model {
        &self.leaves[leaf].model
    }

    /// Exact under/over deviation of the leaf's clamped estimate over the
    /// keys assigned to it (`(1, 1)` for a leaf with no keys).
    pub fn leaf_envelope(&self, leaf: usize) -> ErrorEnvelope {
        let r = &self.leaves[leaf].record;
        ErrorEnvelope::new(r.under as usize, r.over as usize)
    }

    /// Envelope actually applied to lookups routed to `leaf`.
    pub fn lookup_envelope(&self, leaf: usize) -> ErrorEnvelope {
        self.leaves[leaf].lookup_env
    }

    /// Positions `[first, end)` of the keys assigned to `leaf`.
    pub fn leaf_positions(&self, leaf: usize) -> (usize, usize) {
        let r = &self.leaves[leaf].record;
        (r.first as usize, r.end as usize)
    }

    pub fn size_bytes(&self) -> usize {
        16 + self.config.stage1.size_bytes()
            + self.config.branching * (self.config.stage2.size_bytes() + LeafRecord::SIZE_BYTES)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BlobWriter::new(MAGIC);
        w.u8(self.config.stage1.code())
            .u8(self.config.stage2.code())
            .u8(0)
            .u8(0)
            .u32(self.config.branching as u32)
            .u64(self.n as u64);
        self.stage1.write(&mut w);
        for leaf in &self.leaves {
            leaf.model.write(&mut w);
            let r = leaf.record;
            w.u32(r.under).u32(r.over).u32(r.first).u32(r.end);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<TrainedRmi> {
        let mut r = BlobReader::new(bytes, MAGIC, "RMI blob")?;
        let stage1_kind =
            ModelKind::from_code(r.u8()?).ok_or_else(|| r.invalid("bad stage-1 kind"))?;
        let stage2_kind =
            ModelKind::from_code(r.u8()?).ok_or_else(|| r.invalid("bad stage-2 kind"))?;
        r.u8()?;
        r.u8()?;
        let branching = r.u32()? as usize;
        let n = r.u64()? as usize;
        if branching == 0 || n < 2 || n >= u32::MAX as usize {
            return Err(r.invalid("bad header"));
        }
        let config = RmiConfig::new(stage1_kind, stage2_kind, branching);
        let stage1 = Model::read(stage1_kind, &mut r)?;
        let mut leaves = Vec::with_capacity(branching.min(1 << 20));
        let mut expected_first = 0u32;
        for _ in 0..branching {
            let model = Model::read(stage2_kind, &mut r)?;
            let record = LeafRecord {
                under: r.u32()?,
                over: r.u32()?,
                first: r.u32()?,
                end: r.u32()?,
            };
            if record.first != expected_first
                || record.end < record.first
                || record.end as usize > n
            {
                return Err(r.invalid("leaf position ranges are not contiguous"));
            }
            expected_first = record.end;
            leaves.push(Leaf::new(model, record, record.first == record.end));
        }
        if expected_first as usize != n {
            return Err(r.invalid("leaf position ranges do not cover the dataset"));
        }
        r.finish()?;
        Ok(TrainedRmi {
            config,
            stage1,
            leaves,
            n,
            route_scale: branching as f64 / n as f64,
        })
    }
}

fn train_leaf(kind: ModelKind, points: &[(Key, f64)], start: usize) -> Leaf {
    if points.is_empty() {
        let record = LeafRecord {
            under: 1,
            over: 1,
            first: start as u32,
            end: start as u32,
        };
        return Leaf::new(Model::constant(kind, start as f64), record, true);
    }
    let model = Model::fit_monotone(kind, points);
    let end = start + points.len();
    let mut record = LeafRecord {
        under: 0,
        over: 0,
        first: start as u32,
        end: end as u32,
    };
    let probe = Leaf::new(model, record, false);
    for (offset, &(key, _)) in points.iter().enumerate() {
        let pos = start + offset;
        let est = probe.estimate(key);
        if est > pos {
            record.under = record.under.max((est - pos) as u32);
        } else {
            record.over = record.over.max((pos - est) as u32);
        }
    }
    Leaf::new(model, record, false)
}

impl SearchIndex for TrainedRmi {
    #[inline]
    fn search_bound(&self, key: Key) -> SearchBound {
        self.lookup(key)
    }

    fn size_bytes(&self) -> usize {
        TrainedRmi::size_bytes(self)
    }

    fn name(&self) -> &'static str {
        "rmi"
    }
}
