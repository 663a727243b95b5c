//! Data sources and non-IID client partitioning.

mod csv_io;
mod dirichlet;
mod synth;

pub use csv_io::{load_csv_dataset, write_csv_dataset};
pub use dirichlet::{dirichlet_partition, DirichletConfig, PartitionPlan};
pub use synth::{synth_classification, SynthParams};
