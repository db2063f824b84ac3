use std::path::{Path, PathBuf};

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use pseudeq_core::pseudogame;
use pseudeq_core::rng;
use pseudeq_core::solvers::{eval_generalization_gap, generate, GaesModel, GaesProblem};

use super::{load_model, problems, timed, write_metrics, Problems};
use crate::dataset::Dataset;
use crate::dto::ProblemKind;
use crate::error::{HarnessError, Result};
use crate::io;
use crate::manifest::{Manifest, ManifestBuilder};

pub const METRICS: &str = "metrics.csv";
pub const GAP: &str = "gap.csv";
pub const METRIC_COLUMNS: [&str; 3] = ["exploitability", "normalized_exploitability", "wall_ms"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    /// The trained generator in `model`.
    Gaes,
    /// A profile from the game's feasible sampler.
    Uniform,
    /// Profiles read line by line from the JSONL file `profiles`.
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub dataset: PathBuf,
    pub model: Option<PathBuf>,
    pub predictor: Predictor,
    pub profiles: Option<PathBuf>,
    pub split: String,
    /// Split compared against `split` in `gap.csv`; the model is required.
    pub gap_split: Option<String>,
    pub n_norm_samples: usize,
    pub record_time: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            dataset: PathBuf::from("data"),
            model: None,
            predictor: Predictor::Gaes,
            profiles: None,
            split: "test".into(),
            gap_split: None,
            n_norm_samples: 1000,
            record_time: false,
        }
    }
}

enum Source<'a> {
    Model(&'a GaesModel),
    Uniform(u64),
    Profiles(&'a [Vec<f64>]),
}

/// Denominator seed of row `k`.
pub fn norm_seed(seed: u64, k: usize) -> u64 {
    rng::derive(seed, k as u64).next_u64()
}

fn rows<P: GaesProblem + Sync>(set: &[P], source: &Source, n_norm: usize, seed: u64, record: bool) -> Result<Vec<Vec<f64>>> {
    set.par_iter()
        .enumerate()
        .map(|(k, p)| {
            let (profile, ms) = timed(record, || -> Result<Vec<f64>> {
                match source {
                    Source::Model(m) => Ok(generate(m, p)?),
                    Source::Uniform(s) => Ok(p.sample_profile(&mut rng::derive(*s, k as u64))?),
                    Source::Profiles(all) => Ok(all[k].clone()),
                }
            });
            let profile = profile?;
            let phi = pseudogame::exploitability(p.game(), &profile)?.value;
            let denom = pseudogame::mean_sampled_exploitability(p.game(), n_norm, norm_seed(seed, k))?;
            Ok(vec![phi, phi / denom, ms])
        })
        .collect()
}

fn gap<P: GaesProblem>(model: &GaesModel, a: &[P], b: &[P]) -> Result<Vec<String>> {
    let g = eval_generalization_gap(model, a, b)?;
    Ok(vec![io::fmt17(g.train_mean), io::fmt17(g.test_mean), io::fmt17(g.gap)])
}

/// Per-instance exploitability, normalized exploitability and prediction
/// time on one split, plus summary rows and an optional generalization gap.
pub fn run(config: &EvalConfig, seed: u64, out: &Path) -> Result<Manifest> {
    let mut builder = ManifestBuilder::start("eval", config, seed)?;
    let data = Dataset::load(&config.dataset)?;
    builder.dataset(&config.dataset, data.hash.clone());
    let model = match &config.model {
        Some(path) => Some(load_model(path, data.kind)?),
        None => None,
    };
    let padding = match (data.kind, &model) {
        (ProblemKind::Exchange, _) => 0,
        (ProblemKind::Kyoto, Some(m)) => m.generator.out_dim(),
        (ProblemKind::Kyoto, None) => super::kyoto_rows(&data)?,
    };
    let set = problems(data.kind, data.split(&config.split)?, padding)?;
    let profiles: Vec<Vec<f64>>;
    let source = match config.predictor {
        Predictor::Gaes => Source::Model(model.as_ref().ok_or_else(|| HarnessError::validation("predictor gaes needs a model"))?),
        Predictor::Uniform => Source::Uniform(rng::derive(seed, u64::MAX).next_u64()),
        Predictor::File => {
            let path = config.profiles.as_ref().ok_or_else(|| HarnessError::validation("predictor file needs profiles"))?;
            profiles = io::read_jsonl(path)?;
            if profiles.len() != set.len() {
                return Err(HarnessError::validation(format!(
                    "{}: {} profiles for {} instances",
                    path.display(),
                    profiles.len(),
                    set.len()
                )));
            }
            Source::Profiles(&profiles)
        }
    };
    let detail = match &set {
        Problems::Exchange(p) => rows(p, &source, config.n_norm_samples, seed, config.record_time)?,
        Problems::Kyoto(p) => rows(p, &source, config.n_norm_samples, seed, config.record_time)?,
    };
    io::create_dir(out)?;
    write_metrics(&out.join(METRICS), &METRIC_COLUMNS, &detail)?;
    let mut files = vec![METRICS];
    if let Some(other) = &config.gap_split {
        let model = model.as_ref().ok_or_else(|| HarnessError::validation("the generalization gap needs a model"))?;
        let against = problems(data.kind, data.split(other)?, padding)?;
        let row = match (&against, &set) {
            (Problems::Exchange(a), Problems::Exchange(b)) => gap(model, a, b)?,
            (Problems::Kyoto(a), Problems::Kyoto(b)) => gap(model, a, b)?,
            _ => unreachable!("splits share the dataset kind"),
        };
        io::write_csv(&out.join(GAP), &[&format!("{}_mean", other), &format!("{}_mean", config.split), "gap"], &[row])?;
        files.push(GAP);
    }
    builder.finish(out, &files)
}
