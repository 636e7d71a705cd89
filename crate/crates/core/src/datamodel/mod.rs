//! Datasets, synthetic additive-noise sampling, CSV ingestion, splits,
//! standardization and PCA.

mod dataset;
mod ingest;
mod pca;
mod sampling;
mod split;

pub use dataset::Dataset;
pub use ingest::{csv_header, load_csv};
pub use pca::PcaModel;
pub use sampling::{sample_additive, AdditiveModelSpec, InputLaw, NoiseFamily, TargetFn};
pub use split::{split, SplitSpec, Standardizer};
