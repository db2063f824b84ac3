//! Serializable mirrors of the core types and their conversions.

use serde::{Deserialize, Serialize};

use pseudeq_core::exchange::{ExchangeEconomy, Family};
use pseudeq_core::kyoto::{DamageForm, KyotoInstance};
use pseudeq_core::nn::{Activation, Layer, MlpParams};
use pseudeq_core::optim::{OptState, OptimizerKind};
use pseudeq_core::solvers::{
    BestSnapshot, Discriminator, GaesModel, GradMode, Schedule, StopReason, TrainConfig, TrainState, Trajectory,
    TrajectoryPoint,
};
use pseudeq_core::Tensor;

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomyRecord {
    pub family: String,
    pub buyers: usize,
    pub goods: usize,
    /// Row-major `buyers x goods`.
    pub valuations: Vec<f64>,
    /// Row-major `buyers x goods`.
    pub endowments: Vec<f64>,
    pub rho: Vec<f64>,
}

impl EconomyRecord {
    pub fn from_economy(e: &ExchangeEconomy) -> Self {
        EconomyRecord {
            family: e.family().name().into(),
            buyers: e.n_buyers(),
            goods: e.m_goods(),
            valuations: e.valuations().to_vec(),
            endowments: e.endowments().to_vec(),
            rho: e.rho().to_vec(),
        }
    }

    pub fn to_economy(&self) -> Result<ExchangeEconomy> {
        let family = Family::from_name(&self.family)
            .ok_or_else(|| HarnessError::validation(format!("unknown utility family {:?}", self.family)))?;
        Ok(ExchangeEconomy::new(
            family,
            self.buyers,
            self.goods,
            self.valuations.clone(),
            self.endowments.clone(),
            self.rho.clone(),
        )?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KyotoRecord {
    pub rev: Vec<f64>,
    pub dmg: Vec<f64>,
    pub gamma: Vec<f64>,
    pub cap: Vec<f64>,
    #[serde(default = "plain_damage")]
    pub damage: String,
    /// Vertices of the jointly feasible set in profile layout.
    #[serde(default)]
    pub vertices: Vec<Vec<f64>>,
}

fn plain_damage() -> String {
    damage_name(DamageForm::Plain).into()
}

impl KyotoRecord {
    pub fn from_instance(inst: &KyotoInstance, damage: DamageForm, vertices: Vec<Vec<f64>>) -> Self {
        KyotoRecord {
            rev: inst.rev.clone(),
            dmg: inst.dmg.clone(),
            gamma: inst.gamma.clone(),
            cap: inst.cap.clone(),
            damage: damage_name(damage).into(),
            vertices,
        }
    }

    pub fn damage_form(&self) -> Result<DamageForm> {
        damage_from_name(&self.damage)
    }

    pub fn to_instance(&self) -> Result<KyotoInstance> {
        Ok(KyotoInstance::new(self.rev.clone(), self.dmg.clone(), self.gamma.clone(), self.cap.clone())?)
    }
}

/// One dataset line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceRecord {
    Exchange(EconomyRecord),
    Kyoto(KyotoRecord),
}

pub fn damage_name(form: DamageForm) -> &'static str {
    match form {
        DamageForm::Plain => "plain",
        DamageForm::GammaWeighted => "gamma_weighted",
    }
}

pub fn damage_from_name(name: &str) -> Result<DamageForm> {
    match name {
        "plain" => Ok(DamageForm::Plain),
        "gamma_weighted" => Ok(DamageForm::GammaWeighted),
        other => Err(HarnessError::validation(format!("unknown damage form {:?}", other))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    /// `[out, in]`
    pub shape: [usize; 2],
    /// Row-major weights.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpRecord {
    pub layers: Vec<LayerRecord>,
}

impl MlpRecord {
    pub fn from_params(p: &MlpParams) -> Self {
        MlpRecord {
            layers: p
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    shape: [l.out_dim(), l.in_dim()],
                    weight: l.weight.data().to_vec(),
                    bias: l.bias.data().to_vec(),
                    activation: l.activation.name().into(),
                })
                .collect(),
        }
    }

    pub fn to_params(&self) -> Result<MlpParams> {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let activation = Activation::from_name(&l.activation)
                    .ok_or_else(|| HarnessError::validation(format!("unknown activation {:?}", l.activation)))?;
                Ok(Layer {
                    weight: Tensor::new(l.shape.to_vec(), l.weight.clone())?,
                    bias: Tensor::vector(l.bias.clone()),
                    activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let params = MlpParams::new(layers)?;
        if !params.is_finite() {
            return Err(HarnessError::validation("network weights must be finite"));
        }
        Ok(params)
    }
}

/// Which problem family a model was built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Exchange,
    Kyoto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRecord {
    pub problem: ProblemKind,
    pub generator: MlpRecord,
    /// `None` for the exact discriminator.
    pub discriminator: Option<MlpRecord>,
}

impl ModelRecord {
    pub fn from_model(problem: ProblemKind, m: &GaesModel) -> Self {
        ModelRecord {
            problem,
            generator: MlpRecord::from_params(&m.generator),
            discriminator: match &m.discriminator {
                Discriminator::Exact => None,
                Discriminator::Learned(d) => Some(MlpRecord::from_params(d)),
            },
        }
    }

    pub fn to_model(&self) -> Result<GaesModel> {
        Ok(GaesModel {
            generator: self.generator.to_params()?,
            discriminator: match &self.discriminator {
                None => Discriminator::Exact,
                Some(d) => Discriminator::Learned(d.to_params()?),
            },
        })
    }
}

/// Training hyperparameters; omitted fields take the library defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfigRecord {
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub warmup_iters: usize,
    pub batch_size: usize,
    pub lr_gen: f64,
    pub lr_disc: f64,
    pub schedule: String,
    pub pl_constant: Option<f64>,
    pub halve_every: Option<usize>,
    pub grad_mode: String,
    pub reset_discriminator: bool,
    pub validate_every: usize,
    pub patience: Option<usize>,
}

impl Default for TrainConfigRecord {
    fn default() -> Self {
        Self::from_config(&TrainConfig::default())
    }
}

impl TrainConfigRecord {
    pub fn from_config(c: &TrainConfig) -> Self {
        TrainConfigRecord {
            outer_iters: c.outer_iters,
            inner_iters: c.inner_iters,
            warmup_iters: c.warmup_iters,
            batch_size: c.batch_size,
            lr_gen: c.lr_gen,
            lr_disc: c.lr_disc,
            schedule: c.schedule.name().into(),
            pl_constant: c.pl_constant,
            halve_every: c.halve_every,
            grad_mode: c.grad_mode.name().into(),
            reset_discriminator: c.reset_discriminator,
            validate_every: c.validate_every,
            patience: c.patience,
        }
    }

    pub fn to_config(&self, seed: u64) -> Result<TrainConfig> {
        let config = TrainConfig {
            outer_iters: self.outer_iters,
            inner_iters: self.inner_iters,
            warmup_iters: self.warmup_iters,
            batch_size: self.batch_size,
            lr_gen: self.lr_gen,
            lr_disc: self.lr_disc,
            schedule: Schedule::from_name(&self.schedule)
                .ok_or_else(|| HarnessError::validation(format!("unknown schedule {:?}", self.schedule)))?,
            pl_constant: self.pl_constant,
            halve_every: self.halve_every,
            grad_mode: GradMode::from_name(&self.grad_mode)
                .ok_or_else(|| HarnessError::validation(format!("unknown gradient mode {:?}", self.grad_mode)))?,
            reset_discriminator: self.reset_discriminator,
            validate_every: self.validate_every,
            patience: self.patience,
            seed,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptRecord {
    pub kind: String,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl OptRecord {
    pub fn from_state(s: &OptState) -> Self {
        OptRecord {
            kind: match s.kind {
                OptimizerKind::Sgd => "sgd".into(),
                OptimizerKind::Adam => "adam".into(),
            },
            beta1: s.beta1,
            beta2: s.beta2,
            eps: s.eps,
            t: s.t,
            m: s.m.clone(),
            v: s.v.clone(),
        }
    }

    pub fn to_state(&self) -> Result<OptState> {
        let kind = match self.kind.as_str() {
            "sgd" => OptimizerKind::Sgd,
            "adam" => OptimizerKind::Adam,
            other => return Err(HarnessError::validation(format!("unknown optimizer {:?}", other))),
        };
        Ok(OptState { kind, beta1: self.beta1, beta2: self.beta2, eps: self.eps, t: self.t, m: self.m.clone(), v: self.v.clone() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointRecord {
    pub iteration: usize,
    pub snapshot: usize,
    pub exploitability: f64,
    pub cumulative_regret: f64,
    pub wall_ms: f64,
}

pub fn trajectory_to_records(t: &Trajectory) -> Vec<PointRecord> {
    t.points()
        .iter()
        .map(|p| PointRecord {
            iteration: p.iteration,
            snapshot: p.snapshot,
            exploitability: p.exploitability,
            cumulative_regret: p.cumulative_regret,
            wall_ms: p.wall_ms,
        })
        .collect()
}

pub fn trajectory_from_records(points: &[PointRecord]) -> Result<Trajectory> {
    let mut t = Trajectory::new();
    for p in points {
        t.push(TrajectoryPoint {
            iteration: p.iteration,
            snapshot: p.snapshot,
            exploitability: p.exploitability,
            cumulative_regret: p.cumulative_regret,
            wall_ms: p.wall_ms,
        })?;
    }
    Ok(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StopRecord {
    Completed,
    EarlyStop { iteration: usize },
    Aborted { iteration: usize, reason: String },
}

impl StopRecord {
    pub fn from_reason(r: &StopReason) -> Self {
        match r {
            StopReason::Completed => StopRecord::Completed,
            StopReason::EarlyStop { iteration } => StopRecord::EarlyStop { iteration: *iteration },
            StopReason::Aborted { iteration, reason } => StopRecord::Aborted { iteration: *iteration, reason: reason.clone() },
        }
    }

    pub fn to_reason(&self) -> StopReason {
        match self {
            StopRecord::Completed => StopReason::Completed,
            StopRecord::EarlyStop { iteration } => StopReason::EarlyStop { iteration: *iteration },
            StopRecord::Aborted { iteration, reason } => StopReason::Aborted { iteration: *iteration, reason: reason.clone() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BestRecord {
    pub iteration: usize,
    pub value: f64,
    pub generator: MlpRecord,
}

/// A resumable training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainStateRecord {
    pub model: ModelRecord,
    pub gen_opt: OptRecord,
    pub disc_opt: OptRecord,
    pub completed: usize,
    pub warmed_up: bool,
    pub best: Option<BestRecord>,
    pub stagnant: usize,
    pub validations: usize,
    pub trajectory: Vec<PointRecord>,
    pub stop: Option<StopRecord>,
}

impl TrainStateRecord {
    pub fn from_state(problem: ProblemKind, s: &TrainState) -> Self {
        TrainStateRecord {
            model: ModelRecord::from_model(problem, &s.model),
            gen_opt: OptRecord::from_state(&s.gen_opt),
            disc_opt: OptRecord::from_state(&s.disc_opt),
            completed: s.completed,
            warmed_up: s.warmed_up,
            best: s.best.as_ref().map(|b| BestRecord {
                iteration: b.iteration,
                value: b.value,
                generator: MlpRecord::from_params(&b.generator),
            }),
            stagnant: s.stagnant,
            validations: s.validations,
            trajectory: trajectory_to_records(&s.trajectory),
            stop: s.stop.as_ref().map(StopRecord::from_reason),
        }
    }

    pub fn to_state(&self) -> Result<TrainState> {
        Ok(TrainState {
            model: self.model.to_model()?,
            gen_opt: self.gen_opt.to_state()?,
            disc_opt: self.disc_opt.to_state()?,
            completed: self.completed,
            warmed_up: self.warmed_up,
            best: match &self.best {
                Some(b) => Some(BestSnapshot { iteration: b.iteration, value: b.value, generator: b.generator.to_params()? }),
                None => None,
            },
            stagnant: self.stagnant,
            validations: self.validations,
            trajectory: trajectory_from_records(&self.trajectory)?,
            stop: self.stop.as_ref().map(StopRecord::to_reason),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pseudeq_core::exchange::{sample_economy, RhoRange};
    use pseudeq_core::solvers::{gaes_resume, ExchangeProblem, NullClock};

    #[test]
    fn economies_round_trip() {
        for f in Family::ALL {
            let e = sample_economy(f, 3, 4, RhoRange::Mixed, 5).unwrap();
            let rec = EconomyRecord::from_economy(&e);
            let text = serde_json::to_string(&InstanceRecord::Exchange(rec)).unwrap();
            let InstanceRecord::Exchange(back) = serde_json::from_str(&text).unwrap() else { panic!() };
            assert_eq!(back.to_economy().unwrap(), e);
        }
    }

    #[test]
    fn training_state_round_trips_exactly() {
        let problems: Vec<ExchangeProblem> = (0..4)
            .map(|k| ExchangeProblem::new(sample_economy(Family::Linear, 2, 3, RhoRange::GrossSubstitutes, k).unwrap()))
            .collect();
        let model = GaesModel::new(&problems[0], true, 1).unwrap();
        let config = TrainConfig { outer_iters: 6, warmup_iters: 2, batch_size: 2, validate_every: 2, ..Default::default() };
        let state = gaes_resume(TrainState::new(model, &config), &problems, &[], &config, 6, &NullClock).unwrap();
        let rec = TrainStateRecord::from_state(ProblemKind::Exchange, &state);
        let text = serde_json::to_string(&rec).unwrap();
        let back: TrainStateRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_state().unwrap(), state);
    }

    #[test]
    fn partial_configs_take_defaults() {
        let rec: TrainConfigRecord = serde_json::from_str(r#"{"outer_iters": 7, "schedule": "theorem1", "pl_constant": 2.0}"#).unwrap();
        let c = rec.to_config(3).unwrap();
        assert_eq!(c.outer_iters, 7);
        assert_eq!(c.schedule, Schedule::Theorem1);
        assert_eq!(c.batch_size, TrainConfig::default().batch_size);
        assert!(serde_json::from_str::<TrainConfigRecord>(r#"{"outer_itrs": 7}"#).is_err());
        let bad: TrainConfigRecord = serde_json::from_str(r#"{"schedule": "cosine"}"#).unwrap();
        assert!(bad.to_config(0).is_err());
    }
}
