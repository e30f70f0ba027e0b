//! Learned index structures over sorted 64-bit keys, the baselines they are
//! compared against, and the harness used to measure them.
//!
//! Every structure implements [`SearchIndex`]: given a key it returns a
//! [`SearchBound`] guaranteed to contain the key's lower bound, and a
//! [`last_mile_search`] resolves the exact position inside it.

pub mod baselines;
pub mod bench;
mod codec;
pub mod dataset;
pub mod datasets;
pub mod error;
pub mod index_spec;
pub mod pgm;
pub mod radix_spline;
pub mod rmi;
pub mod search;

pub use dataset::{gen_payloads, Key, SortedDataset};
pub use error::{Error, Result};
pub use index_spec::{AnyIndex, IndexSpec};
pub use search::{
    bound_from_estimate, last_mile_search, lower_bound_oracle, validate_index, ErrorEnvelope,
    SearchBound, SearchIndex, SearchStrategy, ValidationReport,
};
