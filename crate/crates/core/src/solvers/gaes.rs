use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::problem::{ExchangeProblem, GaesProblem, KyotoProblem};
use super::{theorem1_disc_lr, theorem1_gen_lr, Clock, Trajectory, TrajectoryPoint};
use crate::exchange::{ExchangeEconomy, MarketOutcome};
use crate::nn::{Activation, MlpParams};
use crate::optim::{Direction, OptState, OptimizerKind};
use crate::math;
use crate::pseudogame;
use crate::rng::{self, SeededRng};
use crate::tape::{Tape, Var};
use crate::{Error, Result};

/// Hidden widths of both networks.
pub const HIDDEN: [usize; 2] = [64, 64];

/// Stream label that keeps warm-up randomness apart from the outer loop.
const WARMUP_STREAM: u64 = 0x5741_524d;

/// How the generator's gradient treats the discriminator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum GradMode {
    /// Differentiate through the discriminator's response.
    #[default]
    Pathwise,
    /// Hold the discriminator's raw output fixed; feasibility heads still
    /// see the live profile.
    StopGradient,
}

impl GradMode {
    pub fn name(self) -> &'static str {
        match self {
            GradMode::Pathwise => "pathwise",
            GradMode::StopGradient => "stop_gradient",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "pathwise" => Some(GradMode::Pathwise),
            "stop_gradient" => Some(GradMode::StopGradient),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Schedule {
    /// Plain gradient steps with the configured rates.
    Constant,
    /// ADAM with the configured rates.
    #[default]
    Adam,
    /// Plain gradient steps with `1 / sqrt(t)` outside and
    /// `(2s + 1) / (pl (s + 1)^2)` inside; the configured rates are unused.
    Theorem1,
}

impl Schedule {
    pub fn name(self) -> &'static str {
        match self {
            Schedule::Constant => "constant",
            Schedule::Adam => "adam",
            Schedule::Theorem1 => "theorem1",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "constant" => Some(Schedule::Constant),
            "adam" => Some(Schedule::Adam),
            "theorem1" => Some(Schedule::Theorem1),
            _ => None,
        }
    }

    fn optimizer(self) -> OptState {
        match self {
            Schedule::Adam => OptState::new(OptimizerKind::Adam),
            _ => OptState::new(OptimizerKind::Sgd),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub warmup_iters: usize,
    pub batch_size: usize,
    pub lr_gen: f64,
    pub lr_disc: f64,
    pub schedule: Schedule,
    pub pl_constant: Option<f64>,
    /// Halve both configured rates every this many outer iterations.
    pub halve_every: Option<usize>,
    pub grad_mode: GradMode,
    /// Zero the discriminator before every outer iteration.
    pub reset_discriminator: bool,
    pub validate_every: usize,
    /// Stop after this many validations without improvement.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            outer_iters: 2000,
            inner_iters: 1,
            warmup_iters: 0,
            batch_size: 32,
            lr_gen: 1e-3,
            lr_disc: 1e-3,
            schedule: Schedule::Adam,
            pl_constant: None,
            halve_every: None,
            grad_mode: GradMode::Pathwise,
            reset_discriminator: false,
            validate_every: 100,
            patience: Some(10),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 || self.batch_size == 0 || self.validate_every == 0 {
            return Err(Error::invalid("outer iterations, batch size and validation period must be positive"));
        }
        if !(self.lr_gen >= 0.0 && self.lr_gen.is_finite() && self.lr_disc >= 0.0 && self.lr_disc.is_finite()) {
            return Err(Error::invalid("learning rates must be finite and nonnegative"));
        }
        if self.halve_every == Some(0) {
            return Err(Error::invalid("halving period must be positive"));
        }
        if self.schedule == Schedule::Theorem1 && !matches!(self.pl_constant, Some(pl) if pl > 0.0 && pl.is_finite()) {
            return Err(Error::invalid("the theorem1 schedule needs a positive pl_constant"));
        }
        Ok(())
    }

    /// Factor applied to the configured rates at outer iteration `t`.
    fn decay(&self, t: usize) -> f64 {
        match self.halve_every {
            Some(k) => math::powf(0.5, (t.saturating_sub(1) / k) as f64),
            None => 1.0,
        }
    }

    fn gen_lr(&self, t: usize) -> f64 {
        match self.schedule {
            Schedule::Theorem1 => theorem1_gen_lr(t as u64),
            _ => self.lr_gen * self.decay(t),
        }
    }

    /// Rate of inner step `s` within outer iteration `t` (`t = 0` during
    /// warm-up).
    fn disc_lr(&self, t: usize, s: usize) -> f64 {
        match self.schedule {
            Schedule::Theorem1 => theorem1_disc_lr(s as u64, self.pl_constant.unwrap_or(1.0)),
            _ => self.lr_disc * self.decay(t),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Discriminator {
    /// The game's exact best responses.
    Exact,
    Learned(MlpParams),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaesModel {
    pub generator: MlpParams,
    pub discriminator: Discriminator,
}

impl GaesModel {
    /// Glorot-initialized networks sized for `problem`, with hidden widths
    /// [`HIDDEN`].
    pub fn new<P: GaesProblem + ?Sized>(problem: &P, learned_discriminator: bool, seed: u64) -> Result<Self> {
        let mut r = rng::seeded(seed);
        let features = problem.features().len();
        let generator = MlpParams::init(
            &[features, HIDDEN[0], HIDDEN[1], problem.generator_outputs()],
            Activation::Relu,
            Activation::Identity,
            &mut r,
        )?;
        let discriminator = if learned_discriminator {
            Discriminator::Learned(MlpParams::init(
                &[features + problem.profile_dim(), HIDDEN[0], HIDDEN[1], problem.discriminator_outputs()],
                Activation::Relu,
                Activation::Identity,
                &mut r,
            )?)
        } else {
            Discriminator::Exact
        };
        Ok(GaesModel { generator, discriminator })
    }

    /// Checks that the networks fit `problem`.
    pub fn check<P: GaesProblem + ?Sized>(&self, problem: &P) -> Result<()> {
        let features = problem.features().len();
        if self.generator.in_dim() != features || self.generator.out_dim() != problem.generator_outputs() {
            return Err(Error::shape(format!(
                "generator maps {} -> {}, problem needs {} -> {}",
                self.generator.in_dim(),
                self.generator.out_dim(),
                features,
                problem.generator_outputs()
            )));
        }
        if let Discriminator::Learned(d) = &self.discriminator {
            let input = features + problem.profile_dim();
            if d.in_dim() != input || d.out_dim() != problem.discriminator_outputs() {
                return Err(Error::shape(format!(
                    "discriminator maps {} -> {}, problem needs {} -> {}",
                    d.in_dim(),
                    d.out_dim(),
                    input,
                    problem.discriminator_outputs()
                )));
            }
        }
        Ok(())
    }
}

fn generator_var<P: GaesProblem + ?Sized>(tape: &mut Tape, generator: &crate::nn::MlpVars, problem: &P) -> Result<Var> {
    let f = tape.vector(problem.features());
    let raw = generator.forward(tape, f)?;
    Ok(problem.generator_head(tape, raw))
}

fn deviation_var<P: GaesProblem + ?Sized>(tape: &mut Tape, disc: &crate::nn::MlpVars, problem: &P, profile: Var) -> Result<Var> {
    let input = problem.discriminator_input(tape, profile);
    let raw = disc.forward(tape, input)?;
    Ok(problem.discriminator_head(tape, raw, profile))
}

/// The generator's profile for `problem`.
pub fn generate<P: GaesProblem + ?Sized>(model: &GaesModel, problem: &P) -> Result<Vec<f64>> {
    model.check(problem)?;
    let mut tape = Tape::new();
    let gv = model.generator.register(&mut tape);
    let a = generator_var(&mut tape, &gv, problem)?;
    Ok(tape.value(a).data().to_vec())
}

/// The discriminator's deviation profile against `profile`.
pub fn discriminate<P: GaesProblem + ?Sized>(model: &GaesModel, problem: &P, profile: &[f64]) -> Result<Vec<f64>> {
    model.check(problem)?;
    match &model.discriminator {
        Discriminator::Exact => Ok(pseudogame::exploitability(problem.game(), profile)?.best_responses.concat()),
        Discriminator::Learned(d) => {
            let mut tape = Tape::new();
            let dv = d.register(&mut tape);
            let a = tape.vector(profile.to_vec());
            let dev = deviation_var(&mut tape, &dv, problem, a)?;
            Ok(tape.value(dev).data().to_vec())
        }
    }
}

pub fn generator_forward_exchange(model: &GaesModel, economy: &ExchangeEconomy) -> Result<MarketOutcome> {
    let problem = ExchangeProblem::new(economy.clone());
    let profile = generate(model, &problem)?;
    MarketOutcome::from_profile(economy, &profile)
}

/// Deviation profile (allocation rows, then prices) against `outcome`.
pub fn discriminator_forward_exchange(model: &GaesModel, economy: &ExchangeEconomy, outcome: &MarketOutcome) -> Result<Vec<f64>> {
    outcome.validate(economy)?;
    discriminate(model, &ExchangeProblem::new(economy.clone()), &outcome.to_profile())
}

/// Exploitability of the generator's profile on every problem.
pub fn evaluate<P: GaesProblem>(model: &GaesModel, problems: &[P]) -> Result<Vec<f64>> {
    problems.iter().map(|p| p.exploitability(&generate(model, p)?)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapReport {
    pub train_mean: f64,
    pub test_mean: f64,
    /// `|train_mean - test_mean|`
    pub gap: f64,
}

/// Mean exact-discriminator cumulative regret of the generator on both sets.
pub fn eval_generalization_gap<P: GaesProblem>(model: &GaesModel, train: &[P], test: &[P]) -> Result<GapReport> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("generalization gap needs nonempty sets"));
    }
    let mean = |xs: Vec<f64>| xs.iter().sum::<f64>() / xs.len() as f64;
    let train_mean = mean(evaluate(model, train)?);
    let test_mean = mean(evaluate(model, test)?);
    Ok(GapReport { train_mean, test_mean, gap: (train_mean - test_mean).abs() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestSnapshot {
    pub iteration: usize,
    pub value: f64,
    pub generator: MlpParams,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    Completed,
    EarlyStop { iteration: usize },
    /// A non-finite loss or gradient; the model is the last good one.
    Aborted { iteration: usize, reason: String },
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub model: GaesModel,
    pub gen_opt: OptState,
    pub disc_opt: OptState,
    /// Completed outer iterations.
    pub completed: usize,
    pub warmed_up: bool,
    pub best: Option<BestSnapshot>,
    pub stagnant: usize,
    pub validations: usize,
    pub trajectory: Trajectory,
    pub stop: Option<StopReason>,
}

impl TrainState {
    pub fn new(model: GaesModel, config: &TrainConfig) -> Self {
        TrainState {
            model,
            gen_opt: config.schedule.optimizer(),
            disc_opt: config.schedule.optimizer(),
            completed: 0,
            warmed_up: false,
            best: None,
            stagnant: 0,
            validations: 0,
            trajectory: Trajectory::new(),
            stop: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub model: GaesModel,
    pub best: Option<BestSnapshot>,
    pub trajectory: Trajectory,
    pub stop: StopReason,
}

impl TrainOutcome {
    /// The final model with the best validated generator swapped in.
    pub fn best_model(&self) -> GaesModel {
        match &self.best {
            Some(b) => GaesModel { generator: b.generator.clone(), discriminator: self.model.discriminator.clone() },
            None => self.model.clone(),
        }
    }
}

fn batch<'a, P>(set: &'a [P], size: usize, rng: &mut SeededRng) -> Vec<&'a P> {
    (0..size).map(|_| &set[rng.gen_range(0..set.len())]).collect()
}

fn mean_loss(tape: &mut Tape, parts: Vec<Var>) -> Var {
    let b = parts.len() as f64;
    let mut it = parts.into_iter();
    let first = it.next().expect("nonempty batch");
    let total = it.fold(first, |acc, v| tape.add(acc, v));
    tape.mul_scalar(total, 1.0 / b)
}

/// One ascent step of the discriminator on the batch-mean cumulative regret
/// against fixed profiles. Returns the loss before the step.
fn discriminator_step<P: GaesProblem>(
    disc: &mut MlpParams,
    opt: &mut OptState,
    problems: &[&P],
    profiles: &[Vec<f64>],
    lr: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let dv = disc.register(&mut tape);
    let mut parts = Vec::with_capacity(problems.len());
    for (p, a) in problems.iter().zip(profiles) {
        let av = tape.vector(a.clone());
        let dev = deviation_var(&mut tape, &dv, *p, av)?;
        parts.push(p.cumulative_regret(&mut tape, av, dev));
    }
    let loss = mean_loss(&mut tape, parts);
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Err(Error::NonFinite("discriminator loss".into()));
    }
    let grads = tape.backward_scalar(loss)?;
    let g = disc.gradients(&dv, &grads);
    opt.step(disc, &g, lr, Direction::Ascent)?;
    Ok(value)
}

/// One descent step of the generator on the batch-mean cumulative regret.
/// Returns the loss before the step.
fn generator_step<P: GaesProblem>(
    model: &mut GaesModel,
    opt: &mut OptState,
    problems: &[&P],
    mode: GradMode,
    lr: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let gv = model.generator.register(&mut tape);
    let dv = match &model.discriminator {
        Discriminator::Learned(d) => Some(d.register(&mut tape)),
        Discriminator::Exact => None,
    };
    let mut parts = Vec::with_capacity(problems.len());
    for p in problems {
        let a = generator_var(&mut tape, &gv, *p)?;
        let psi = match &dv {
            None => p.exact_cumulative_regret(&mut tape, a, mode),
            Some(dv) => {
                let dev = match mode {
                    GradMode::Pathwise => deviation_var(&mut tape, dv, *p, a)?,
                    GradMode::StopGradient => {
                        let a_in = tape.detach(a);
                        let input = p.discriminator_input(&mut tape, a_in);
                        let raw = dv.forward(&mut tape, input)?;
                        let raw = tape.detach(raw);
                        p.discriminator_head(&mut tape, raw, a)
                    }
                };
                p.cumulative_regret(&mut tape, a, dev)
            }
        };
        parts.push(psi);
    }
    let loss = mean_loss(&mut tape, parts);
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Err(Error::NonFinite("generator loss".into()));
    }
    let grads = tape.backward_scalar(loss)?;
    let g = model.generator.gradients(&gv, &grads);
    opt.step(&mut model.generator, &g, lr, Direction::Descent)?;
    Ok(value)
}

fn warm_up<P: GaesProblem>(state: &mut TrainState, train: &[P], config: &TrainConfig) -> Result<()> {
    let Discriminator::Learned(disc) = &mut state.model.discriminator else {
        return Ok(());
    };
    for k in 1..=config.warmup_iters {
        let mut r = rng::derive(config.seed ^ WARMUP_STREAM, k as u64);
        let problems = batch(train, config.batch_size, &mut r);
        let profiles = problems.iter().map(|p| p.sample_profile(&mut r)).collect::<Result<Vec<_>>>()?;
        discriminator_step(disc, &mut state.disc_opt, &problems, &profiles, config.disc_lr(0, k))?;
    }
    Ok(())
}

fn outer_iteration<P: GaesProblem>(state: &mut TrainState, train: &[P], config: &TrainConfig, t: usize) -> Result<(f64, Vec<usize>)> {
    let mut r = rng::derive(config.seed, t as u64);
    if let Discriminator::Learned(disc) = &mut state.model.discriminator {
        if config.reset_discriminator {
            *disc = disc.zeros_like();
            state.disc_opt.reset();
        }
    }
    if matches!(state.model.discriminator, Discriminator::Learned(_)) {
        for s in 1..=config.inner_iters {
            let problems = batch(train, config.batch_size, &mut r);
            let profiles = problems.iter().map(|p| generate(&state.model, *p)).collect::<Result<Vec<_>>>()?;
            let Discriminator::Learned(disc) = &mut state.model.discriminator else { unreachable!() };
            discriminator_step(disc, &mut state.disc_opt, &problems, &profiles, config.disc_lr(t, s))?;
        }
    }
    let idx: Vec<usize> = (0..config.batch_size).map(|_| r.gen_range(0..train.len())).collect();
    let problems: Vec<&P> = idx.iter().map(|&k| &train[k]).collect();
    let loss = generator_step(&mut state.model, &mut state.gen_opt, &problems, config.grad_mode, config.gen_lr(t))?;
    Ok((loss, idx))
}

fn validation_metric<P: GaesProblem>(model: &GaesModel, valid: &[P], train: &[P], batch_idx: &[usize]) -> Result<f64> {
    let values = if valid.is_empty() {
        batch_idx.iter().map(|&k| train[k].exploitability(&generate(model, &train[k])?)).collect::<Result<Vec<_>>>()?
    } else {
        evaluate(model, valid)?
    };
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Continues `state` until `until` outer iterations are complete, the run
/// stops early or training aborts. Iteration `t` draws its batches from a
/// generator derived from `(seed, t)`, so a resumed run repeats the
/// uninterrupted one exactly.
pub fn gaes_resume<P: GaesProblem>(
    mut state: TrainState,
    train: &[P],
    valid: &[P],
    config: &TrainConfig,
    until: usize,
    clock: &dyn Clock,
) -> Result<TrainState> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    for p in train.iter().chain(valid) {
        state.model.check(p)?;
    }
    if !state.warmed_up {
        if let Err(e) = warm_up(&mut state, train, config) {
            state.stop = Some(StopReason::Aborted { iteration: 0, reason: format!("{}", e) });
            return Ok(state);
        }
        state.warmed_up = true;
    }
    let end = until.min(config.outer_iters);
    while state.stop.is_none() && state.completed < end {
        let t = state.completed + 1;
        let snapshot = state.model.clone();
        let saved_opts = (state.gen_opt.clone(), state.disc_opt.clone());
        let (loss, idx) = match outer_iteration(&mut state, train, config, t) {
            Ok(v) => v,
            Err(e @ (Error::NonFinite(_) | Error::Aborted { .. })) => {
                state.model = snapshot;
                state.gen_opt = saved_opts.0;
                state.disc_opt = saved_opts.1;
                state.stop = Some(StopReason::Aborted { iteration: t, reason: format!("{}", e) });
                break;
            }
            Err(e) => return Err(e),
        };
        state.completed = t;
        if t % config.validate_every == 0 || t == config.outer_iters {
            let metric = validation_metric(&state.model, valid, train, &idx)?;
            if !metric.is_finite() {
                state.stop = Some(StopReason::Aborted { iteration: t, reason: "non-finite validation exploitability".into() });
                break;
            }
            state.validations += 1;
            state.trajectory.push(TrajectoryPoint {
                iteration: t,
                snapshot: state.validations,
                exploitability: metric,
                cumulative_regret: loss,
                wall_ms: clock.now_ms(),
            })?;
            if state.best.as_ref().map_or(true, |b| metric < b.value) {
                state.best = Some(BestSnapshot { iteration: t, value: metric, generator: state.model.generator.clone() });
                state.stagnant = 0;
            } else {
                state.stagnant += 1;
                if config.patience.is_some_and(|k| state.stagnant >= k) {
                    state.stop = Some(StopReason::EarlyStop { iteration: t });
                }
            }
        }
    }
    if state.stop.is_none() && state.completed >= config.outer_iters {
        state.stop = Some(StopReason::Completed);
    }
    Ok(state)
}

/// Stochastic exploitability descent: optional discriminator warm-up on
/// sampled profiles, then `outer_iters` rounds of `inner_iters`
/// discriminator ascent steps followed by one generator descent step, each
/// on a fresh batch.
pub fn gaes_train<P: GaesProblem>(
    train: &[P],
    valid: &[P],
    model: GaesModel,
    config: &TrainConfig,
    clock: &dyn Clock,
) -> Result<TrainOutcome> {
    let state = gaes_resume(TrainState::new(model, config), train, valid, config, config.outer_iters, clock)?;
    Ok(TrainOutcome {
        model: state.model,
        best: state.best,
        trajectory: state.trajectory,
        stop: state.stop.unwrap_or(StopReason::Completed),
    })
}

/// [`gaes_train`] on Kyoto games, which must share the vertex padding.
pub fn gaes_train_kyoto(
    train: &[KyotoProblem],
    valid: &[KyotoProblem],
    model: GaesModel,
    config: &TrainConfig,
    clock: &dyn Clock,
) -> Result<TrainOutcome> {
    if let Some(first) = train.first() {
        if train.iter().chain(valid).any(|p| p.rows() != first.rows()) {
            return Err(Error::shape("Kyoto problems must share the vertex padding"));
        }
    }
    gaes_train(train, valid, model, config, clock)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exchange::{sample_economy, Family, RhoRange};
    use crate::kyoto::{is_jointly_feasible, DamageForm, KyotoGame, KyotoInstance};
    use crate::pseudogame::DeviationMode;
    use crate::solvers::NullClock;
    use alloc::vec;

    fn linear_problems(count: u64, seed: u64) -> Vec<ExchangeProblem> {
        (0..count)
            .map(|k| ExchangeProblem::new(sample_economy(Family::Linear, 3, 5, RhoRange::GrossSubstitutes, seed + k).unwrap()))
            .collect()
    }

    fn kyoto_problem() -> KyotoProblem {
        let inst = KyotoInstance::new(vec![20.0, 30.0], vec![5.0, 8.0], vec![1.0, 1.5], vec![10.0, 15.0]).unwrap();
        let game = KyotoGame::new(inst, DeviationMode::Joint, DamageForm::Plain).unwrap();
        let rows = game.vertices().len() + 3;
        KyotoProblem::new(&game, rows).unwrap()
    }

    fn generator_gradient(model: &GaesModel, problems: &[ExchangeProblem], mode: GradMode) -> MlpParams {
        let mut tape = Tape::new();
        let gv = model.generator.register(&mut tape);
        let parts = problems
            .iter()
            .map(|p| {
                let a = generator_var(&mut tape, &gv, p).unwrap();
                p.exact_cumulative_regret(&mut tape, a, mode)
            })
            .collect();
        let loss = mean_loss(&mut tape, parts);
        let grads = tape.backward_scalar(loss).unwrap();
        model.generator.gradients(&gv, &grads)
    }

    #[test]
    fn generated_outcomes_are_feasible() {
        for (k, p) in linear_problems(5, 10).iter().enumerate() {
            let model = GaesModel::new(p, true, k as u64).unwrap();
            let outcome = generator_forward_exchange(&model, p.economy()).unwrap();
            outcome.validate(p.economy()).unwrap();
            let dev = discriminator_forward_exchange(&model, p.economy(), &outcome).unwrap();
            let a = outcome.to_profile();
            for i in 0..3 {
                let spent: f64 = dev[i * 5..(i + 1) * 5].iter().zip(&a[15..]).map(|(x, q)| x * q).sum();
                assert!((spent - p.economy().budget(i, &a[15..])).abs() <= 1e-9);
            }
            let q = &dev[15..];
            assert_eq!(q.iter().filter(|&&x| x == 1.0).count(), 1);
        }
        let kp = kyoto_problem();
        for seed in 0..5 {
            let model = GaesModel::new(&kp, true, seed).unwrap();
            let a = generate(&model, &kp).unwrap();
            assert!(is_jointly_feasible(kp.kyoto(), &a));
            let b = discriminate(&model, &kp, &a).unwrap();
            assert!(is_jointly_feasible(kp.kyoto(), &b));
        }
    }

    #[test]
    fn exact_cumulative_regret_equals_exploitability() {
        for p in linear_problems(4, 20) {
            let model = GaesModel::new(&p, false, 3).unwrap();
            let a = generate(&model, &p).unwrap();
            let phi = p.exploitability(&a).unwrap();
            for mode in [GradMode::Pathwise, GradMode::StopGradient] {
                let mut tape = Tape::new();
                let av = tape.vector(a.clone());
                let psi = p.exact_cumulative_regret(&mut tape, av, mode);
                assert!((tape.value(psi).item() - phi).abs() <= 1e-9);
            }
            let dev = discriminate(&model, &p, &a).unwrap();
            let mut tape = Tape::new();
            let av = tape.vector(a.clone());
            let dv = tape.vector(dev);
            let psi = p.cumulative_regret(&mut tape, av, dv);
            assert!((tape.value(psi).item() - phi).abs() <= 1e-9);
        }
        let kp = kyoto_problem();
        let model = GaesModel::new(&kp, false, 4).unwrap();
        let a = generate(&model, &kp).unwrap();
        let mut tape = Tape::new();
        let av = tape.vector(a.clone());
        let psi = kp.exact_cumulative_regret(&mut tape, av, GradMode::Pathwise);
        assert!((tape.value(psi).item() - kp.exploitability(&a).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn pathwise_and_stop_gradient_agree_for_the_exact_oracle() {
        let problems = linear_problems(3, 30);
        let model = GaesModel::new(&problems[0], false, 5).unwrap();
        let g1 = generator_gradient(&model, &problems, GradMode::Pathwise);
        let g2 = generator_gradient(&model, &problems, GradMode::StopGradient);
        for (a, b) in g1.tensors().zip(g2.tensors()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
            }
        }
    }

    #[test]
    fn zero_generator_rate_freezes_the_generator() {
        let problems = linear_problems(4, 40);
        let model = GaesModel::new(&problems[0], true, 6).unwrap();
        let config = TrainConfig { outer_iters: 5, lr_gen: 0.0, warmup_iters: 3, validate_every: 1, ..Default::default() };
        let out = gaes_train(&problems, &[], model.clone(), &config, &NullClock).unwrap();
        assert_eq!(out.model.generator, model.generator);
        assert_ne!(out.model.discriminator, model.discriminator);
        assert_eq!(out.stop, StopReason::Completed);
        assert_eq!(out.trajectory.len(), 5);
    }

    #[test]
    fn resumed_run_matches_the_uninterrupted_one() {
        let problems = linear_problems(6, 50);
        let valid = linear_problems(2, 60);
        let model = GaesModel::new(&problems[0], true, 7).unwrap();
        let config = TrainConfig { outer_iters: 12, warmup_iters: 2, batch_size: 4, validate_every: 3, patience: None, ..Default::default() };
        let whole = gaes_resume(TrainState::new(model.clone(), &config), &problems, &valid, &config, 12, &NullClock).unwrap();
        let half = gaes_resume(TrainState::new(model, &config), &problems, &valid, &config, 5, &NullClock).unwrap();
        assert_eq!(half.completed, 5);
        assert!(half.stop.is_none());
        let rest = gaes_resume(half, &problems, &valid, &config, 12, &NullClock).unwrap();
        assert_eq!(rest, whole);
        assert_eq!(whole.stop, Some(StopReason::Completed));
    }

    #[test]
    fn training_reduces_exploitability() {
        let problems = linear_problems(16, 70);
        let model = GaesModel::new(&problems[0], false, 8).unwrap();
        let before = evaluate(&model, &problems).unwrap().iter().sum::<f64>();
        let config = TrainConfig { outer_iters: 200, batch_size: 8, validate_every: 50, patience: None, ..Default::default() };
        let out = gaes_train(&problems, &[], model, &config, &NullClock).unwrap();
        let after = evaluate(&out.model, &problems).unwrap().iter().sum::<f64>();
        assert!(after < before, "{} -> {}", before, after);
        assert!(out.best.is_some());
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let p = &linear_problems(1, 90)[0];
        let model = GaesModel::new(&kyoto_problem(), false, 1).unwrap();
        assert!(generate(&model, p).is_err());
        assert!(gaes_train(&[p.clone()], &[], model, &TrainConfig::default(), &NullClock).is_err());
    }

    #[test]
    fn schedules() {
        let theorem1 = TrainConfig { schedule: Schedule::Theorem1, pl_constant: Some(2.0), lr_gen: 0.3, ..Default::default() };
        theorem1.validate().unwrap();
        assert_eq!(theorem1.gen_lr(4), 0.5);
        assert_eq!(theorem1.disc_lr(7, 1), 3.0 / 8.0);
        assert!(TrainConfig { schedule: Schedule::Theorem1, ..Default::default() }.validate().is_err());
        let halving = TrainConfig { halve_every: Some(10), lr_gen: 1.0, lr_disc: 0.5, ..Default::default() };
        assert_eq!(halving.gen_lr(10), 1.0);
        assert_eq!(halving.gen_lr(11), 0.5);
        assert_eq!(halving.disc_lr(25, 1), 0.125);
        assert!(TrainConfig { halve_every: Some(0), ..Default::default() }.validate().is_err());
        for s in [Schedule::Constant, Schedule::Adam, Schedule::Theorem1] {
            assert_eq!(Schedule::from_name(s.name()), Some(s));
        }
        for g in [GradMode::Pathwise, GradMode::StopGradient] {
            assert_eq!(GradMode::from_name(g.name()), Some(g));
        }
    }
}
