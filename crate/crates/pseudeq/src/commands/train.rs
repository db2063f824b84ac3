use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pseudeq_core::solvers::{gaes_resume, GaesModel, GaesProblem, StopReason, TrainConfig, TrainState};

use super::{clock, kyoto_rows, problems, Problems};
use crate::dataset::Dataset;
use crate::dto::{trajectory_to_records, ModelRecord, ProblemKind, TrainConfigRecord, TrainStateRecord};
use crate::error::{HarnessError, Result};
use crate::io;
use crate::manifest::{Manifest, ManifestBuilder};

pub const MODEL_FINAL: &str = "model_final.json";
pub const MODEL_BEST: &str = "model_best.json";
pub const STATE: &str = "state.json";
pub const TRAJECTORY: &str = "trajectory.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCommandConfig {
    /// Directory written by `gen-data`.
    pub dataset: PathBuf,
    pub training: TrainConfigRecord,
    pub learned_discriminator: bool,
    /// A `state.json` to continue from.
    pub resume_from: Option<PathBuf>,
    /// Stop after this many completed outer iterations, leaving a resumable
    /// state.
    pub pause_after: Option<usize>,
    /// Record wall-clock milliseconds in the trajectory; makes the output
    /// non-reproducible.
    pub record_time: bool,
}

impl Default for TrainCommandConfig {
    fn default() -> Self {
        TrainCommandConfig {
            dataset: PathBuf::from("data"),
            training: TrainConfigRecord::default(),
            learned_discriminator: false,
            resume_from: None,
            pause_after: None,
            record_time: false,
        }
    }
}

fn status(stop: &Option<StopReason>) -> String {
    match stop {
        None => "paused".into(),
        Some(StopReason::Completed) => "completed".into(),
        Some(StopReason::EarlyStop { iteration }) => format!("early_stop at iteration {}", iteration),
        Some(StopReason::Aborted { iteration, reason }) => format!("aborted at iteration {}: {}", iteration, reason),
    }
}

fn continue_run<P: GaesProblem>(
    state: Option<TrainState>,
    train: &[P],
    valid: &[P],
    config: &TrainConfig,
    learned: bool,
    until: usize,
    record_time: bool,
) -> Result<TrainState> {
    let state = match state {
        Some(s) => s,
        None => {
            let first = train.first().ok_or_else(|| HarnessError::validation("training split is empty"))?;
            TrainState::new(GaesModel::new(first, learned, config.seed)?, config)
        }
    };
    let clock = clock(record_time);
    Ok(gaes_resume(state, train, valid, config, until, clock.as_ref())?)
}

fn write_trajectory(path: &Path, state: &TrainState) -> Result<()> {
    let rows: Vec<Vec<String>> = trajectory_to_records(&state.trajectory)
        .iter()
        .map(|p| {
            vec![
                p.iteration.to_string(),
                p.snapshot.to_string(),
                io::fmt17(p.exploitability),
                io::fmt17(p.cumulative_regret),
                io::fmt17(p.wall_ms),
            ]
        })
        .collect();
    io::write_csv(path, &["iteration", "snapshot", "exploitability", "cumulative_regret", "wall_ms"], &rows)
}

/// Trains (or continues training) a generator on the dataset's train split,
/// validating on its valid split.
///
/// Writes the final and best-validation models, the resumable state and the
/// validation trajectory. An aborted run still writes its last good model
/// and then fails with a numerical error.
pub fn run(config: &TrainCommandConfig, seed: u64, out: &Path) -> Result<Manifest> {
    let mut builder = ManifestBuilder::start("train", config, seed)?;
    let train_config = config.training.to_config(seed)?;
    let data = Dataset::load(&config.dataset)?;
    builder.dataset(&config.dataset, data.hash.clone());
    let resumed = match &config.resume_from {
        Some(path) => {
            let rec: TrainStateRecord = io::read_json(path)?;
            if rec.model.problem != data.kind {
                return Err(HarnessError::validation(format!("{}: state belongs to a different problem kind", path.display())));
            }
            if rec.model.discriminator.is_some() != config.learned_discriminator {
                return Err(HarnessError::validation("resumed state disagrees on learned_discriminator"));
            }
            Some(rec.to_state()?)
        }
        None => None,
    };
    let until = config.pause_after.unwrap_or(train_config.outer_iters);
    let rows = if data.kind == ProblemKind::Kyoto { kyoto_rows(&data)? } else { 0 };
    let train = problems(data.kind, &data.train, rows)?;
    let valid = problems(data.kind, &data.valid, rows)?;
    let learned = config.learned_discriminator;
    let state = match (train, valid) {
        (Problems::Exchange(t), Problems::Exchange(v)) => {
            continue_run(resumed, &t, &v, &train_config, learned, until, config.record_time)?
        }
        (Problems::Kyoto(t), Problems::Kyoto(v)) => continue_run(resumed, &t, &v, &train_config, learned, until, config.record_time)?,
        _ => unreachable!("splits share the dataset kind"),
    };

    io::create_dir(out)?;
    let best = match &state.best {
        Some(b) => GaesModel { generator: b.generator.clone(), discriminator: state.model.discriminator.clone() },
        None => state.model.clone(),
    };
    io::write_json(&out.join(MODEL_FINAL), &ModelRecord::from_model(data.kind, &state.model))?;
    io::write_json(&out.join(MODEL_BEST), &ModelRecord::from_model(data.kind, &best))?;
    io::write_json(&out.join(STATE), &TrainStateRecord::from_state(data.kind, &state))?;
    write_trajectory(&out.join(TRAJECTORY), &state)?;
    let status = status(&state.stop);
    builder.status(&status);
    if let Some(b) = &state.best {
        builder.note(format!("best validation exploitability {} at iteration {}", io::fmt17(b.value), b.iteration));
    }
    if let Some(r) = &config.resume_from {
        builder.note(format!("resumed from {}", r.display()));
    }
    let manifest = builder.finish(out, &[MODEL_FINAL, MODEL_BEST, STATE, TRAJECTORY])?;
    if let Some(StopReason::Aborted { .. }) = state.stop {
        return Err(HarnessError::Numerical(format!("training {}; partial outputs in {}", status, out.display())));
    }
    Ok(manifest)
}
