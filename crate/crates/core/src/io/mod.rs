//! File formats and run configuration: dataset CSVs, pathway JSON, genotype
//! ingestion, chain persistence, and reproducibility manifests.

pub mod chain_store;
pub mod config;
pub mod csvio;
pub mod genotype;
pub mod manifest;

pub use chain_store::{load_chain, save_chain, CHAIN_SCHEMA_VERSION};
pub use config::{
    DataInputs, FitConfig, IngestConfig, LoadedData, MapConfig, PriorOverrides, RunConfig,
    ScoreConfig, SimulateConfig,
};
pub use csvio::{
    fmt_f64, read_gdm, read_nodes, read_pathways, read_responses, write_gdm, write_nodes,
    write_pathways, write_responses,
};
pub use genotype::{ingest_genotypes, GenotypeTable, IngestOutput, MismatchMode};
pub use manifest::{file_sha256, InputHash, Manifest};
