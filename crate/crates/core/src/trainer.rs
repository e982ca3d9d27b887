//! Outer loop of adversarial imitation by random search.
//!
//! One iteration: sample `N` Gaussian directions, roll out the `2N`
//! perturbed policies `theta +/- nu * delta_i`, train the discriminator on
//! expert pairs against the freshly collected pairs, score every rollout with
//! the updated discriminator, keep the `K` best directions, take the
//! `sigma_R`-scaled finite-difference step, and fold every visited state into
//! the running normalization statistics.

use std::time::Instant;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decision::ACTION_DIM;
use crate::discriminator::{Discriminator, DiscriminatorConfig, Pair, RewardModel};
use crate::error::{check_dim, Error, Result};
use crate::eval::lane_change_metrics;
use crate::policy::{Matrix, Perturbation, PolicyParams, Sign};
use crate::rollout::{run_policy, Rollout, RolloutEnv};
use crate::seed::{stream, Rng, SeedStreams};
use crate::stats::RunningStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorMode {
    /// Divide the summed step by the number of sampled directions.
    UseN,
    /// Divide by the number of retained directions.
    UseK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub step_size: f64,
    pub directions: usize,
    pub top_k: usize,
    pub perturb_std: f64,
    pub iterations: usize,
    pub denominator_mode: DenominatorMode,
    pub sigma_floor: f64,
    pub master_seed: u64,
    /// Checkpoint period in iterations.
    pub checkpoint_every: usize,
    /// Unperturbed-policy episodes run after each iteration for the log.
    pub monitor_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            step_size: 0.02,
            directions: 16,
            top_k: 8,
            perturb_std: 0.03,
            iterations: 200,
            denominator_mode: DenominatorMode::UseN,
            sigma_floor: 1e-8,
            master_seed: 0,
            checkpoint_every: 10,
            monitor_episodes: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(format!("train: {msg}")));
        if self.directions == 0 {
            return fail("directions must be at least 1");
        }
        if self.top_k == 0 || self.top_k > self.directions {
            return fail("top_k must satisfy 1 <= top_k <= directions");
        }
        if !(self.step_size > 0.0) {
            return fail("step_size must be positive");
        }
        if !(self.perturb_std > 0.0) {
            return fail("perturb_std must be positive");
        }
        if !(self.sigma_floor > 0.0) {
            return fail("sigma_floor must be positive");
        }
        if self.checkpoint_every == 0 {
            return fail("checkpoint_every must be at least 1");
        }
        Ok(())
    }

    pub fn denominator(&self) -> f64 {
        match self.denominator_mode {
            DenominatorMode::UseN => self.directions as f64,
            DenominatorMode::UseK => self.top_k as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionScore {
    pub index: usize,
    pub return_plus: f64,
    pub return_minus: f64,
}

impl DirectionScore {
    fn key(&self) -> f64 {
        self.return_plus.max(self.return_minus)
    }
}

/// `count` matrices of shape `p x n` with i.i.d. standard normal entries,
/// drawn row-major, matrix after matrix.
pub fn sample_directions(rng: &mut Rng, count: usize, p: usize, n: usize) -> Vec<Matrix> {
    (0..count)
        .map(|_| Matrix {
            rows: p,
            cols: n,
            data: (0..p * n).map(|_| StandardNormal.sample(rng)).collect(),
        })
        .collect()
}

/// Environment seed shared by both rollouts of direction `index`.
pub fn direction_seed(seed_base: u64, index: usize) -> u64 {
    seed_base ^ index as u64
}

/// Roll out `theta + nu*delta_i` and `theta - nu*delta_i` for every
/// direction. Output order is `(+1, -1, +2, -2, ...)`.
pub fn collect_rollouts<E: RolloutEnv>(
    env: &E,
    params: &PolicyParams,
    stats: &RunningStats,
    directions: &[Matrix],
    nu: f64,
    seed_base: u64,
) -> Result<Vec<Rollout>> {
    if directions.is_empty() {
        return Err(Error::Usage(
            "collect_rollouts needs at least one direction".into(),
        ));
    }
    let mut policies = Vec::with_capacity(2 * directions.len());
    for delta in directions {
        let pert = Perturbation {
            delta: delta.clone(),
            nu,
        };
        policies.push(params.perturb(&pert, Sign::Plus)?);
        policies.push(params.perturb(&pert, Sign::Minus)?);
    }
    policies
        .par_iter()
        .enumerate()
        .map(|(k, policy)| run_policy(env, policy, stats, direction_seed(seed_base, k / 2)))
        .collect()
}

/// Indices of the `k` best directions (by `max(r+, r-)`, descending, ties
/// to the lower index) and the population standard deviation of their `2k`
/// returns, floored at `sigma_floor`.
pub fn score_and_select(
    scores: &[DirectionScore],
    k: usize,
    sigma_floor: f64,
) -> Result<(Vec<usize>, f64)> {
    if k == 0 || k > scores.len() {
        return Err(Error::Usage(format!(
            "top-k selection needs 1 <= k <= {}, got {k}",
            scores.len()
        )));
    }
    let mut order: Vec<&DirectionScore> = scores.iter().collect();
    order.sort_by(|a, b| b.key().total_cmp(&a.key()));
    let chosen: Vec<&DirectionScore> = order.into_iter().take(k).collect();
    let returns: Vec<f64> = chosen
        .iter()
        .flat_map(|s| [s.return_plus, s.return_minus])
        .collect();
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / returns.len() as f64;
    let sigma = var.sqrt();
    let sigma = if sigma < sigma_floor {
        sigma_floor
    } else {
        sigma
    };
    Ok((chosen.iter().map(|s| s.index).collect(), sigma))
}

/// `theta + step_size / (denominator * sigma_r) * sum_i (r+_i - r-_i) delta_i`.
pub fn ars_update(
    theta: &Matrix,
    selected: &[(&Matrix, f64, f64)],
    step_size: f64,
    denominator: f64,
    sigma_r: f64,
) -> Result<Matrix> {
    if selected.is_empty() {
        return Err(Error::Usage(
            "ars_update needs at least one direction".into(),
        ));
    }
    if !(sigma_r > 0.0) {
        return Err(Error::Usage("sigma_r must be positive".into()));
    }
    let mut step = Matrix::zeros(theta.rows, theta.cols);
    for (delta, r_plus, r_minus) in selected {
        step = step.add_scaled(delta, r_plus - r_minus)?;
    }
    theta.add_scaled(&step, step_size / (denominator * sigma_r))
}

/// Everything that evolves across iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerState<R> {
    /// Completed iterations.
    pub iteration: usize,
    pub policy: PolicyParams,
    pub stats: RunningStats,
    pub reward_model: R,
    pub streams: SeedStreams,
}

impl<R: RewardModel> TrainerState<R> {
    /// Zero policy, identity normalization, streams from `master_seed`.
    pub fn new(state_dim: usize, reward_model: R, master_seed: u64) -> Self {
        TrainerState {
            iteration: 0,
            policy: PolicyParams::zeros(ACTION_DIM, state_dim),
            stats: RunningStats::new(state_dim),
            reward_model,
            streams: SeedStreams::new(master_seed),
        }
    }
}

/// Seed stream name for discriminator weight initialization.
pub const DISC_INIT_STREAM: &str = "disc-init";

/// Discriminator with weights drawn from the `DISC_INIT_STREAM` stream of
/// `master_seed` and its state inputs standardized on the expert states.
pub fn init_discriminator(
    expert: &[Pair<'_>],
    config: DiscriminatorConfig,
    master_seed: u64,
) -> Result<Discriminator> {
    let Some(&(s0, a0)) = expert.first() else {
        return Err(Error::Usage("no expert pairs".into()));
    };
    let mut rng = stream(master_seed, DISC_INIT_STREAM);
    let mut disc = Discriminator::new(s0.len(), a0.len(), config, &mut rng)?;
    disc.params
        .standardize_inputs(expert.iter().map(|(s, _)| *s))?;
    Ok(disc)
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mean_return: f64,
    pub max_return: f64,
    pub sigma_r: f64,
    pub disc_loss: f64,
    pub lane_changes: f64,
    pub lane_change_reward: f64,
    pub wall_ms: f64,
}

pub fn train_iteration<E, R>(
    state: &mut TrainerState<R>,
    expert: &[Pair<'_>],
    env: &E,
    cfg: &TrainConfig,
) -> Result<IterationRecord>
where
    E: RolloutEnv,
    R: RewardModel,
{
    let started = Instant::now();
    if state.iteration >= cfg.iterations {
        return Err(Error::Usage(format!(
            "iteration budget of {} exhausted",
            cfg.iterations
        )));
    }
    check_dim(
        "environment observation",
        state.policy.state_dim(),
        env.obs_dim(),
    )?;

    let directions = sample_directions(
        &mut state.streams.directions,
        cfg.directions,
        state.policy.action_dim(),
        state.policy.state_dim(),
    );
    let seed_base = state.streams.env.next_u64();
    let rollouts = collect_rollouts(
        env,
        &state.policy,
        &state.stats,
        &directions,
        cfg.perturb_std,
        seed_base,
    )?;

    let policy_pairs: Vec<Pair<'_>> = rollouts.iter().flat_map(|r| r.trajectory.pairs()).collect();
    let disc_loss =
        state
            .reward_model
            .update(expert, &policy_pairs, &mut state.streams.minibatch)?;

    let model = &state.reward_model;
    let returns: Vec<f64> = rollouts
        .par_iter()
        .map(|r| model.trajectory_return(&r.trajectory))
        .collect::<Result<_>>()?;
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(Error::Data("non-finite rollout return".into()));
    }
    let scores: Vec<DirectionScore> = (0..directions.len())
        .map(|i| DirectionScore {
            index: i,
            return_plus: returns[2 * i],
            return_minus: returns[2 * i + 1],
        })
        .collect();

    let (chosen, sigma_r) = score_and_select(&scores, cfg.top_k, cfg.sigma_floor)?;
    let selected: Vec<(&Matrix, f64, f64)> = chosen
        .iter()
        .map(|&i| {
            (
                &directions[i],
                scores[i].return_plus,
                scores[i].return_minus,
            )
        })
        .collect();
    let theta = ars_update(
        &state.policy.theta,
        &selected,
        cfg.step_size,
        cfg.denominator(),
        sigma_r,
    )?;
    if !theta.is_finite() {
        return Err(Error::Data("policy parameters became non-finite".into()));
    }
    state.policy = PolicyParams { theta };

    state.stats = state.stats.update(
        rollouts
            .iter()
            .flat_map(|r| r.trajectory.states.iter().map(Vec::as_slice)),
    )?;
    state.iteration += 1;

    let (lane_changes, lane_change_reward) = monitor(state, env, cfg.monitor_episodes)?;

    Ok(IterationRecord {
        iteration: state.iteration,
        mean_return: returns.iter().sum::<f64>() / returns.len() as f64,
        max_return: returns.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        sigma_r,
        disc_loss,
        lane_changes,
        lane_change_reward,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Mean lane-change count and reward of the current unperturbed policy.
fn monitor<E: RolloutEnv, R>(
    state: &mut TrainerState<R>,
    env: &E,
    episodes: usize,
) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Ok((0.0, 0.0));
    }
    let seeds: Vec<u64> = (0..episodes)
        .map(|_| state.streams.eval.next_u64())
        .collect();
    let (policy, stats) = (&state.policy, &state.stats);
    let metrics: Vec<(usize, usize)> = seeds
        .par_iter()
        .map(|&seed| run_policy(env, policy, stats, seed).map(|r| lane_change_metrics(&r.infos)))
        .collect::<Result<_>>()?;
    let n = episodes as f64;
    Ok((
        metrics.iter().map(|m| m.0 as f64).sum::<f64>() / n,
        metrics.iter().map(|m| m.1 as f64).sum::<f64>() / n,
    ))
}

/// Run iterations until the budget is spent, handing each record (and the
/// state after it) to `on_iteration`.
pub fn train<E, R, F>(
    state: &mut TrainerState<R>,
    expert: &[Pair<'_>],
    env: &E,
    cfg: &TrainConfig,
    mut on_iteration: F,
) -> Result<()>
where
    E: RolloutEnv,
    R: RewardModel,
    F: FnMut(&IterationRecord, &TrainerState<R>) -> Result<()>,
{
    cfg.validate()?;
    while state.iteration < cfg.iterations {
        let record = train_iteration(state, expert, env, cfg)?;
        on_iteration(&record, state)?;
    }
    Ok(())
}
