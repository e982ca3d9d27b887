//! Feed-forward discriminator `D(s, a)` trained with a least-squares loss.
//!
//! Architecture: `[n + p] -> hidden (tanh) ... -> 1 (sigmoid)`. The state
//! part of the input passes through a fixed affine map (`input_shift`,
//! `input_scale`) that is not trained. The imitation reward for a pair is
//! `-ln(1 - D)`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rollout::Trajectory;
use crate::seed::Rng;

pub type Pair<'a> = (&'a [f64], &'a [f64]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnMode {
    Sum,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    /// Target for policy pairs.
    pub label_policy: f64,
    /// Target for expert pairs.
    pub label_expert: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub minibatch_size: usize,
    pub updates_per_iteration: usize,
    /// `D` is clamped to `[d_clamp, 1 - d_clamp]` before taking the log.
    pub d_clamp: f64,
    pub hidden: Vec<usize>,
    pub return_mode: ReturnMode,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            label_policy: 0.0,
            label_expert: 1.0,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            minibatch_size: 128,
            updates_per_iteration: 1,
            d_clamp: 1e-6,
            hidden: vec![64, 64],
            return_mode: ReturnMode::Sum,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(format!("discriminator: {msg}")));
        if self.label_policy == self.label_expert {
            return fail("label_policy and label_expert must differ");
        }
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        if !(self.d_clamp > 0.0 && self.d_clamp < 0.5) {
            return fail("d_clamp must lie in (0, 0.5)");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("adam betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return fail("epsilon must be positive");
        }
        if self.minibatch_size == 0 {
            return fail("minibatch_size must be at least 1");
        }
        if self.hidden.contains(&0) {
            return fail("hidden layer widths must be positive");
        }
        Ok(())
    }
}

/// Fully connected layer, `weights` row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorParams {
    pub state_dim: usize,
    pub action_dim: usize,
    pub input_shift: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub layers: Vec<Dense>,
}

/// Gradient of the loss with respect to every trainable parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Dense>,
}

impl Gradient {
    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }
}

fn flatten(layers: &[Dense]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
        .collect()
}

fn sigmoid(z: f64) -> f64 {
    let d = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    d.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

impl DiscriminatorParams {
    fn sizes(state_dim: usize, action_dim: usize, hidden: &[usize]) -> Vec<usize> {
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        sizes
    }

    /// All weights and biases zero, identity input map.
    pub fn zeros(state_dim: usize, action_dim: usize, hidden: &[usize]) -> Self {
        let sizes = Self::sizes(state_dim, action_dim, hidden);
        DiscriminatorParams {
            state_dim,
            action_dim,
            input_shift: vec![0.0; state_dim],
            input_scale: vec![1.0; state_dim],
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(state_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut Rng) -> Self {
        let mut params = Self::zeros(state_dim, action_dim, hidden);
        for layer in &mut params.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        params
    }

    /// Fix the input map so that `states` are standardized per component.
    pub fn standardize_inputs<'a, I>(&mut self, states: I) -> Result<()>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let stats = crate::stats::RunningStats::new(self.state_dim).update(states)?;
        self.input_shift = stats.mean.clone();
        self.input_scale = stats
            .var
            .iter()
            .map(|&v| {
                if v < crate::stats::VAR_FLOOR {
                    1.0
                } else {
                    1.0 / v.sqrt()
                }
            })
            .collect();
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.flat().iter().all(|x| x.is_finite())
    }

    fn input(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        check_dim("discriminator state", self.state_dim, state.len())?;
        check_dim("discriminator action", self.action_dim, action.len())?;
        if state.iter().chain(action).any(|x| !x.is_finite()) {
            return Err(Error::Data("non-finite discriminator input".into()));
        }
        let mut x = Vec::with_capacity(self.state_dim + self.action_dim);
        x.extend(
            state
                .iter()
                .zip(&self.input_shift)
                .zip(&self.input_scale)
                .map(|((s, m), k)| (s - m) * k),
        );
        x.extend_from_slice(action);
        Ok(x)
    }

    /// Activations of every layer (input first, hidden outputs after) and D.
    fn forward_cached(&self, state: &[f64], action: &[f64]) -> Result<(Vec<Vec<f64>>, f64)> {
        let mut acts = vec![self.input(state, action)?];
        let last = self.layers.len() - 1;
        for layer in &self.layers[..last] {
            let z = layer.apply(acts.last().expect("input present"));
            acts.push(z.into_iter().map(f64::tanh).collect());
        }
        let z = self.layers[last].apply(acts.last().expect("input present"))[0];
        Ok((acts, sigmoid(z)))
    }

    /// Probability, strictly inside (0, 1), that `(state, action)` is expert.
    pub fn forward(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let mut x = self.input(state, action)?;
        let last = self.layers.len() - 1;
        for layer in &self.layers[..last] {
            x = layer.apply(&x).into_iter().map(f64::tanh).collect();
        }
        Ok(sigmoid(self.layers[last].apply(&x)[0]))
    }

    /// Accumulate `scale * dD/dphi`-weighted backprop of one sample into
    /// `grad`, where `dl_dd` is the loss derivative with respect to D.
    fn backprop(&self, acts: &[Vec<f64>], d: f64, dl_dd: f64, grad: &mut [Dense]) {
        let mut delta = vec![dl_dd * d * (1.0 - d)];
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let input = &acts[idx];
            let g = &mut grad[idx];
            for (o, &dz) in delta.iter().enumerate() {
                g.bias[o] += dz;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (w, &x) in row.iter_mut().zip(input) {
                    *w += dz * x;
                }
            }
            if idx == 0 {
                break;
            }
            let mut upstream = vec![0.0; layer.inputs];
            for (o, &dz) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (u, &w) in upstream.iter_mut().zip(row) {
                    *u += w * dz;
                }
            }
            // Previous layer is tanh: d tanh = 1 - a^2.
            delta = upstream
                .iter()
                .zip(input)
                .map(|(u, a)| u * (1.0 - a * a))
                .collect();
        }
    }
}

/// `0.5 * mean_expert (D - b)^2 + 0.5 * mean_policy (D - a)^2`.
pub fn ls_loss(
    params: &DiscriminatorParams,
    expert: &[Pair<'_>],
    policy: &[Pair<'_>],
    cfg: &DiscriminatorConfig,
) -> Result<f64> {
    if expert.is_empty() || policy.is_empty() {
        return Err(Error::Usage(
            "least-squares loss needs non-empty batches".into(),
        ));
    }
    let term = |batch: &[Pair<'_>], label: f64| -> Result<f64> {
        let mut acc = 0.0;
        for (s, a) in batch {
            acc += (params.forward(s, a)? - label).powi(2);
        }
        Ok(0.5 * acc / batch.len() as f64)
    };
    Ok(term(expert, cfg.label_expert)? + term(policy, cfg.label_policy)?)
}

/// Loss and its exact analytic gradient over both batches.
pub fn ls_gradient(
    params: &DiscriminatorParams,
    expert: &[Pair<'_>],
    policy: &[Pair<'_>],
    cfg: &DiscriminatorConfig,
) -> Result<(f64, Gradient)> {
    if expert.is_empty() || policy.is_empty() {
        return Err(Error::Usage(
            "least-squares gradient needs non-empty batches".into(),
        ));
    }
    let mut grad: Vec<Dense> = params
        .layers
        .iter()
        .map(|l| Dense::zeros(l.inputs, l.outputs))
        .collect();
    let mut loss = 0.0;
    for (batch, label) in [(expert, cfg.label_expert), (policy, cfg.label_policy)] {
        let weight = 1.0 / batch.len() as f64;
        for (s, a) in batch {
            let (acts, d) = params.forward_cached(s, a)?;
            loss += 0.5 * weight * (d - label).powi(2);
            params.backprop(&acts, d, weight * (d - label), &mut grad);
        }
    }
    Ok((loss, Gradient { layers: grad }))
}

/// First and second moment estimates for bias-corrected adaptive steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub timestep: u64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        AdamState {
            first: vec![0.0; param_count],
            second: vec![0.0; param_count],
            timestep: 0,
        }
    }
}

/// One descent step on the loss whose gradient is `grad`.
pub fn adam_step(
    params: &DiscriminatorParams,
    grad: &Gradient,
    state: &AdamState,
    cfg: &DiscriminatorConfig,
) -> Result<(DiscriminatorParams, AdamState)> {
    let g = grad.flat();
    check_dim("adam gradient", params.param_count(), g.len())?;
    check_dim("adam moments", params.param_count(), state.first.len())?;
    let t = state.timestep + 1;
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    let mut next_state = AdamState {
        first: Vec::with_capacity(g.len()),
        second: Vec::with_capacity(g.len()),
        timestep: t,
    };
    let mut next = params.clone();
    for (((w, &gi), &m), &v) in next
        .params_mut()
        .zip(&g)
        .zip(&state.first)
        .zip(&state.second)
    {
        let m = cfg.beta1 * m + (1.0 - cfg.beta1) * gi;
        let v = cfg.beta2 * v + (1.0 - cfg.beta2) * gi * gi;
        *w -= cfg.learning_rate * (m / bc1) / ((v / bc2).sqrt() + cfg.epsilon);
        next_state.first.push(m);
        next_state.second.push(v);
    }
    Ok((next, next_state))
}

/// `-ln(1 - clamp(D, eps, 1 - eps))`.
pub fn pair_reward(
    params: &DiscriminatorParams,
    state: &[f64],
    action: &[f64],
    cfg: &DiscriminatorConfig,
) -> Result<f64> {
    let d = params.forward(state, action)?;
    Ok(reward_from_probability(d, cfg.d_clamp))
}

pub fn reward_from_probability(d: f64, d_clamp: f64) -> f64 {
    -(1.0 - d.clamp(d_clamp, 1.0 - d_clamp)).ln()
}

/// Sum (or mean, per `cfg.return_mode`) of pair rewards over a trajectory.
pub fn trajectory_return(
    params: &DiscriminatorParams,
    traj: &Trajectory,
    cfg: &DiscriminatorConfig,
) -> Result<f64> {
    let mut total = 0.0;
    for (s, a) in traj.pairs() {
        total += pair_reward(params, s, a, cfg)?;
    }
    Ok(match cfg.return_mode {
        ReturnMode::Sum => total,
        ReturnMode::Mean if traj.is_empty() => 0.0,
        ReturnMode::Mean => total / traj.len() as f64,
    })
}

/// Source of imitation rewards for the trainer.
pub trait RewardModel: Sync {
    /// Train on expert and freshly collected policy pairs; returns the mean
    /// loss over the updates performed.
    fn update(&mut self, expert: &[Pair<'_>], policy: &[Pair<'_>], rng: &mut Rng) -> Result<f64>;

    fn pair_reward(&self, state: &[f64], action: &[f64]) -> Result<f64>;

    fn trajectory_return(&self, traj: &Trajectory) -> Result<f64> {
        let mut total = 0.0;
        for (s, a) in traj.pairs() {
            total += self.pair_reward(s, a)?;
        }
        Ok(total)
    }
}

/// Trainable discriminator with its optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub params: DiscriminatorParams,
    pub adam: AdamState,
    pub config: DiscriminatorConfig,
}

impl Discriminator {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        config: DiscriminatorConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        config.validate()?;
        let params = DiscriminatorParams::init(state_dim, action_dim, &config.hidden, rng);
        let adam = AdamState::new(params.param_count());
        Ok(Discriminator {
            params,
            adam,
            config,
        })
    }
}

fn sample<'b>(pool: &[Pair<'b>], count: usize, rng: &mut Rng) -> Vec<Pair<'b>> {
    (0..count)
        .map(|_| pool[rng.random_range(0..pool.len())])
        .collect()
}

impl RewardModel for Discriminator {
    fn update(&mut self, expert: &[Pair<'_>], policy: &[Pair<'_>], rng: &mut Rng) -> Result<f64> {
        if expert.is_empty() || policy.is_empty() {
            return Err(Error::Usage(
                "discriminator update needs expert and policy pairs".into(),
            ));
        }
        let updates = self.config.updates_per_iteration;
        let mut loss_sum = 0.0;
        for _ in 0..updates {
            let e = sample(expert, self.config.minibatch_size, rng);
            let p = sample(policy, self.config.minibatch_size, rng);
            let (loss, grad) = ls_gradient(&self.params, &e, &p, &self.config)?;
            let (params, adam) = adam_step(&self.params, &grad, &self.adam, &self.config)?;
            self.params = params;
            self.adam = adam;
            loss_sum += loss;
        }
        Ok(if updates == 0 {
            0.0
        } else {
            loss_sum / updates as f64
        })
    }

    fn pair_reward(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        pair_reward(&self.params, state, action, &self.config)
    }

    fn trajectory_return(&self, traj: &Trajectory) -> Result<f64> {
        trajectory_return(&self.params, traj, &self.config)
    }
}
