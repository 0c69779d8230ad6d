//! Synthetic benchmarks, metrics, experiment sweeps and file formats.

pub mod experiment;
pub mod io;
pub mod metrics;
pub mod synthetic;
