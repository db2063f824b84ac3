use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use pseudeq_core::kyoto::{
    classify_gne, comparative_statics_grid, sample_kyoto, variational_equilibrium, KyotoAction, KyotoGame, CLASSIFY_TOL,
};
use pseudeq_core::pseudogame::{self, DeviationMode};
use pseudeq_core::solvers::{generate, GaesModel, KyotoProblem};

use super::eval::norm_seed;
use super::load_model;
use crate::dataset::KyotoBase;
use crate::dto::{damage_from_name, ProblemKind};
use crate::error::{HarnessError, Result};
use crate::io;
use crate::manifest::{Manifest, ManifestBuilder};

pub const PHASE: &str = "phase.csv";
pub const SUMMARY: &str = "summary.csv";

/// Tolerance and iteration budget of the equilibrium oracle.
pub const ORACLE_TOL: f64 = 1e-10;
pub const ORACLE_MAX_ITER: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    /// Exact variational equilibria.
    Oracle,
    /// Profiles from the trained generator in `model`.
    Model,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KyotoPhaseConfig {
    pub mode: PhaseMode,
    pub model: Option<PathBuf>,
    pub grid: usize,
    /// Fixed damage, investment and cap parameters; drawn from the seed when
    /// absent.
    pub base: Option<KyotoBase>,
    pub damage: String,
    pub n_norm_samples: usize,
    pub tol: f64,
}

impl Default for KyotoPhaseConfig {
    fn default() -> Self {
        KyotoPhaseConfig {
            mode: PhaseMode::Oracle,
            model: None,
            grid: 10,
            base: Some(KyotoBase::default()),
            damage: "plain".into(),
            n_norm_samples: 1000,
            tol: CLASSIFY_TOL,
        }
    }
}

struct Row {
    rev: Vec<f64>,
    label: String,
    oracle_label: String,
    exploitability: f64,
    normalized: f64,
}

fn row(game: &KyotoGame, model: Option<(&GaesModel, usize)>, config: &KyotoPhaseConfig, seed: u64, k: usize) -> Result<Row> {
    let inst = game.instance();
    let ve = variational_equilibrium(game, ORACLE_TOL, ORACLE_MAX_ITER)?;
    let oracle_label = classify_gne(inst, &KyotoAction::from_profile(inst.n(), &ve.profile), config.tol).label();
    let profile = match model {
        Some((m, rows)) => {
            if rows < game.vertices().len() {
                return Err(HarnessError::validation(format!(
                    "model pads {} vertices, instance has {}",
                    rows,
                    game.vertices().len()
                )));
            }
            generate(m, &KyotoProblem::new(game, rows)?)?
        }
        None => ve.profile.clone(),
    };
    let label = classify_gne(inst, &KyotoAction::from_profile(inst.n(), &profile), config.tol).label();
    let exploitability = pseudogame::exploitability(game, &profile)?.value;
    let denom = pseudogame::mean_sampled_exploitability(game, config.n_norm_samples, norm_seed(seed, k))?;
    Ok(Row { rev: inst.rev.clone(), label, oracle_label, exploitability, normalized: exploitability / denom })
}

/// Equilibrium type over a `grid x grid` revenue grid with the other
/// parameters fixed. Every row carries the label of the chosen predictor
/// and of the exact equilibrium.
pub fn run(config: &KyotoPhaseConfig, seed: u64, out: &Path) -> Result<Manifest> {
    let mut builder = ManifestBuilder::start("kyoto-phase", config, seed)?;
    if !(config.tol > 0.0) {
        return Err(HarnessError::validation("tol must be positive"));
    }
    let damage = damage_from_name(&config.damage)?;
    let base = match &config.base {
        Some(b) => b.instance()?,
        None => {
            let drawn = sample_kyoto(2, seed)?;
            builder.note(format!("base parameters drawn from seed {}", seed));
            drawn
        }
    };
    let games = comparative_statics_grid(&base, config.grid)?
        .into_iter()
        .map(|inst| KyotoGame::new(inst, DeviationMode::Joint, damage))
        .collect::<pseudeq_core::Result<Vec<_>>>()?;
    let model = match config.mode {
        PhaseMode::Oracle => None,
        PhaseMode::Model => {
            let path = config.model.as_ref().ok_or_else(|| HarnessError::validation("model mode needs a model"))?;
            Some(load_model(path, ProblemKind::Kyoto)?)
        }
    };
    let predictor = model.as_ref().map(|m| (m, m.generator.out_dim()));
    let rows = games
        .par_iter()
        .enumerate()
        .map(|(k, g)| row(g, predictor, config, seed, k))
        .collect::<Result<Vec<_>>>()?;
    let text: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                io::fmt17(r.rev[0]),
                io::fmt17(r.rev[1]),
                r.label.clone(),
                r.oracle_label.clone(),
                io::fmt17(r.normalized),
                io::fmt17(r.exploitability),
            ]
        })
        .collect();
    io::create_dir(out)?;
    io::write_csv(
        &out.join(PHASE),
        &["beta1", "beta2", "label", "oracle_label", "normalized_exploitability", "exploitability"],
        &text,
    )?;
    let n = rows.len() as f64;
    let agreement = rows.iter().filter(|r| r.label == r.oracle_label).count() as f64 / n;
    let mean_norm = rows.iter().map(|r| r.normalized).sum::<f64>() / n;
    io::write_csv(
        &out.join(SUMMARY),
        &["points", "label_agreement", "mean_normalized_exploitability"],
        &[vec![rows.len().to_string(), io::fmt17(agreement), io::fmt17(mean_norm)]],
    )?;
    builder.finish(out, &[PHASE, SUMMARY])
}
