//! Feature selection for multi-view multi-label data.
//!
//! Features are scored per view by label-driven attention (within the view and
//! across the other views), penalized for intra-view correlation and for
//! dependence on already selected features, and picked view by view. An MLKNN
//! evaluation harness measures the selected subsets.
//!
//! ```no_run
//! use mvfs::dataset::{synth_generate, SynthSpec};
//! use mvfs::selector::{select, SelectorConfig};
//!
//! let syn = synth_generate(&SynthSpec {
//!     n_samples: 300,
//!     view_dims: vec![20, 30],
//!     n_labels: 3,
//!     n_planted: 4,
//!     n_duplicates: 2,
//!     noise_std: 0.05,
//!     seed: 1,
//! })?;
//! let data = syn.dataset.normalized()?;
//! let result = select(&data, &SelectorConfig::default().with_k(5))?;
//! println!("{:?}", result.selected);
//! # Ok::<(), mvfs::Error>(())
//! ```

pub mod attention;
pub mod dataset;
mod error;
pub mod evaluation;
pub mod harness;
pub mod oracle;
pub mod redundancy;
pub mod selector;
pub mod selftest;

pub use error::{Error, Result};
