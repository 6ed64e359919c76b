//! Reading datasets from CSV tables, pipeline configuration files, synthetic
//! data and MovieLens conversion.

pub mod config;
pub mod export;
pub mod manifest;
pub mod movielens;
pub mod synth;

pub use config::{load_config, parse_config, CONFIG_KEYS};
pub use export::{write_dataset, write_manifest, write_tables};
pub use manifest::{load_database, DatasetManifest, TargetDecl};
pub use movielens::{convert_movielens, MovieLensSummary};
pub use synth::{generate_synthetic, SyntheticData, SyntheticSpec};
