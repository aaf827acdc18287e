//! Text formats: observation CSV, chains, estimate streams, run configuration and surrogate files.

mod artifact;
mod chain;
mod config;
mod events;
mod table;

pub use artifact::{read_surrogate, write_surrogate, SurrogateArtifact};
pub use chain::{coord_names, read_chain, write_chain};
pub use config::{parse_key_values, RunConfig, CONFIG_KEYS};
pub use events::EventWriter;
pub use table::{read_series, read_series_from, state_labels, write_series, SeriesLayout};

use std::io::Write;

use crate::rng::RNG_ALGORITHM;

/// Comment block opening every output file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputHeader {
    pub command: String,
    pub seed: u64,
    pub config: Vec<(String, String)>,
}

impl OutputHeader {
    pub fn new(command: &str, seed: u64, config: Vec<(String, String)>) -> Self {
        Self { command: command.to_string(), seed, config }
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "# swmc {} {}", env!("CARGO_PKG_VERSION"), self.command)?;
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "# rng={RNG_ALGORITHM}")?;
        for (k, v) in &self.config {
            writeln!(w, "# config {k}={v}")?;
        }
        Ok(())
    }
}
