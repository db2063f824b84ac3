//! Seeded dataset generation and loading. A dataset is a directory with
//! `train.jsonl`, `valid.jsonl` and `test.jsonl`, one instance per line.

use std::path::Path;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use pseudeq_core::exchange::{sample_economy, ExchangeEconomy, Family, RhoRange};
use pseudeq_core::kyoto::{comparative_statics_grid, comparative_statics_sample, sample_kyoto, DamageForm, KyotoGame, KyotoInstance};
use pseudeq_core::pseudogame::DeviationMode;
use pseudeq_core::rng;

use crate::dto::{damage_from_name, EconomyRecord, InstanceRecord, KyotoRecord, ProblemKind};
use crate::error::{HarnessError, Result};
use crate::io;

pub const SPLITS: [&str; 3] = ["train", "valid", "test"];

pub fn split_file(split: &str) -> String {
    format!("{}.jsonl", split)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Exchange,
    /// Every Kyoto parameter drawn at random.
    Kyoto,
    /// Kyoto instances sharing `base` and differing only in revenue; the
    /// test split is the `grid x grid` revenue grid.
    KyotoStatics,
}

/// Fixed Kyoto parameters of a comparative-statics sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KyotoBase {
    pub dmg: Vec<f64>,
    pub gamma: Vec<f64>,
    pub cap: Vec<f64>,
}

impl Default for KyotoBase {
    fn default() -> Self {
        KyotoBase { dmg: vec![5.0, 8.0], gamma: vec![1.0, 1.5], cap: vec![10.0, 15.0] }
    }
}

impl KyotoBase {
    /// Instance with unit revenues on top of the fixed parameters.
    pub fn instance(&self) -> Result<KyotoInstance> {
        Ok(KyotoInstance::new(vec![1.0; self.dmg.len()], self.dmg.clone(), self.gamma.clone(), self.cap.clone())?)
    }

    pub fn from_instance(inst: &KyotoInstance) -> Self {
        KyotoBase { dmg: inst.dmg.clone(), gamma: inst.gamma.clone(), cap: inst.cap.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenDataConfig {
    pub kind: DatasetKind,
    pub family: String,
    pub buyers: usize,
    pub goods: usize,
    pub rho_range: String,
    pub countries: usize,
    pub base: KyotoBase,
    /// Side of the revenue grid used as the comparative-statics test split.
    pub grid: usize,
    pub damage: String,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        GenDataConfig {
            kind: DatasetKind::Exchange,
            family: "linear".into(),
            buyers: 3,
            goods: 5,
            rho_range: "gs".into(),
            countries: 2,
            base: KyotoBase::default(),
            grid: 10,
            damage: "plain".into(),
            train: 500,
            valid: 50,
            test: 50,
        }
    }
}

/// Per-item seeds of split `s`, disjoint across splits.
fn item_seeds(seed: u64, split: usize, count: usize) -> Vec<u64> {
    let mut r = rng::derive(seed, split as u64);
    (0..count).map(|_| r.next_u64()).collect()
}

fn kyoto_record(inst: &KyotoInstance, damage: DamageForm) -> Result<InstanceRecord> {
    let game = KyotoGame::new(inst.clone(), DeviationMode::Joint, damage)?;
    Ok(InstanceRecord::Kyoto(KyotoRecord::from_instance(inst, damage, game.vertices().to_vec())))
}

/// The three splits for `config` and `seed`.
pub fn generate(config: &GenDataConfig, seed: u64) -> Result<[Vec<InstanceRecord>; 3]> {
    let counts = [config.train, config.valid, config.test];
    let damage = damage_from_name(&config.damage)?;
    let mut out: [Vec<InstanceRecord>; 3] = Default::default();
    match config.kind {
        DatasetKind::Exchange => {
            let family = Family::from_name(&config.family)
                .ok_or_else(|| HarnessError::validation(format!("unknown utility family {:?}", config.family)))?;
            let rho = RhoRange::from_name(&config.rho_range)
                .ok_or_else(|| HarnessError::validation(format!("unknown rho range {:?}", config.rho_range)))?;
            for (s, split) in out.iter_mut().enumerate() {
                for item in item_seeds(seed, s, counts[s]) {
                    let e = sample_economy(family, config.buyers, config.goods, rho, item)?;
                    split.push(InstanceRecord::Exchange(EconomyRecord::from_economy(&e)));
                }
            }
        }
        DatasetKind::Kyoto => {
            for (s, split) in out.iter_mut().enumerate() {
                for item in item_seeds(seed, s, counts[s]) {
                    split.push(kyoto_record(&sample_kyoto(config.countries, item)?, damage)?);
                }
            }
        }
        DatasetKind::KyotoStatics => {
            let base = config.base.instance()?;
            for s in 0..2 {
                let split_seed = item_seeds(seed, s, 1)[0];
                for inst in comparative_statics_sample(&base, counts[s], split_seed)? {
                    out[s].push(kyoto_record(&inst, damage)?);
                }
            }
            for inst in comparative_statics_grid(&base, config.grid)? {
                out[2].push(kyoto_record(&inst, damage)?);
            }
        }
    }
    Ok(out)
}

/// Writes the splits under `dir` and returns the file names.
pub fn write(dir: &Path, splits: &[Vec<InstanceRecord>; 3]) -> Result<Vec<String>> {
    io::create_dir(dir)?;
    let mut files = Vec::new();
    for (name, items) in SPLITS.iter().zip(splits) {
        let f = split_file(name);
        io::write_jsonl(&dir.join(&f), items)?;
        files.push(f);
    }
    Ok(files)
}

/// A loaded dataset directory.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub kind: ProblemKind,
    pub train: Vec<InstanceRecord>,
    pub valid: Vec<InstanceRecord>,
    pub test: Vec<InstanceRecord>,
    /// Digest over the split digests.
    pub hash: String,
}

impl Dataset {
    /// Loads every split present under `dir`; missing splits are empty.
    pub fn load(dir: &Path) -> Result<Self> {
        std::fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
        let mut splits: [Vec<InstanceRecord>; 3] = Default::default();
        let mut digest = String::new();
        for (k, name) in SPLITS.iter().enumerate() {
            let path = dir.join(split_file(name));
            if path.exists() {
                splits[k] = io::read_jsonl(&path)?;
                digest.push_str(&format!("{}:{}\n", name, io::sha256_file(&path)?));
            }
        }
        let all = splits.iter().flatten();
        let kinds: Vec<ProblemKind> = all
            .map(|r| match r {
                InstanceRecord::Exchange(_) => ProblemKind::Exchange,
                InstanceRecord::Kyoto(_) => ProblemKind::Kyoto,
            })
            .collect();
        let kind = *kinds.first().ok_or_else(|| HarnessError::validation(format!("{}: empty dataset", dir.display())))?;
        if kinds.iter().any(|k| *k != kind) {
            return Err(HarnessError::validation(format!("{}: mixes exchange and Kyoto instances", dir.display())));
        }
        let [train, valid, test] = splits;
        Ok(Dataset { kind, train, valid, test, hash: io::sha256_bytes(digest.as_bytes()) })
    }

    pub fn split(&self, name: &str) -> Result<&[InstanceRecord]> {
        match name {
            "train" => Ok(&self.train),
            "valid" => Ok(&self.valid),
            "test" => Ok(&self.test),
            other => Err(HarnessError::validation(format!("unknown split {:?}", other))),
        }
    }
}

pub fn economies(records: &[InstanceRecord]) -> Result<Vec<ExchangeEconomy>> {
    records
        .iter()
        .map(|r| match r {
            InstanceRecord::Exchange(e) => e.to_economy(),
            InstanceRecord::Kyoto(_) => Err(HarnessError::validation("expected an exchange economy")),
        })
        .collect()
}

/// Kyoto games in joint-deviation mode. Recorded vertices, when present,
/// must match the enumeration.
pub fn kyoto_games(records: &[InstanceRecord]) -> Result<Vec<KyotoGame>> {
    records
        .iter()
        .map(|r| match r {
            InstanceRecord::Kyoto(k) => {
                let game = KyotoGame::new(k.to_instance()?, DeviationMode::Joint, k.damage_form()?)?;
                if !k.vertices.is_empty() && k.vertices.len() != game.vertices().len() {
                    return Err(HarnessError::validation(format!(
                        "recorded {} vertices, enumeration gives {}",
                        k.vertices.len(),
                        game.vertices().len()
                    )));
                }
                Ok(game)
            }
            InstanceRecord::Exchange(_) => Err(HarnessError::validation("expected a Kyoto instance")),
        })
        .collect()
}
