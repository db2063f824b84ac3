use std::path::Path;

use crate::dataset::{self, GenDataConfig};
use crate::error::Result;
use crate::manifest::{Manifest, ManifestBuilder};

/// Writes `train.jsonl`, `valid.jsonl` and `test.jsonl` under `out`.
pub fn run(config: &GenDataConfig, seed: u64, out: &Path) -> Result<Manifest> {
    let builder = ManifestBuilder::start("gen-data", config, seed)?;
    let splits = dataset::generate(config, seed)?;
    let files = dataset::write(out, &splits)?;
    let names: Vec<&str> = files.iter().map(String::as_str).collect();
    builder.finish(out, &names)
}
