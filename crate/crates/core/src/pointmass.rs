//! One-dimensional point mass driven by three discrete accelerations, with
//! two exogenous autoregressive features. Used as a small imitation benchmark
//! where a linear expert is exactly representable.
//!
//! State `(x, v, xi1, xi2)`. Decisions map to accelerations
//! `ChangeLeft -> -1`, `Keep -> 0`, `ChangeRight -> +1`.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decision::Decision;
use crate::error::{Error, Result};
use crate::highway::{StepInfo, Terminal};
use crate::policy::{Matrix, PolicyParams};
use crate::rollout::{RolloutEnv, Trajectory};
use crate::seed::derive_seed;
use crate::stats::RunningStats;

pub const STATE_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointMassConfig {
    pub dt: f64,
    pub horizon: usize,
    /// Velocity damping rate, 1/s.
    pub damping: f64,
    /// Spring constant pulling `x` back to the origin, 1/s^2.
    pub stiffness: f64,
    /// AR(1) coefficient of the exogenous features.
    pub rho: f64,
    /// Initial `x` and `v` are uniform on `[-init_range, init_range]`.
    pub init_range: f64,
}

impl Default for PointMassConfig {
    fn default() -> Self {
        PointMassConfig {
            dt: 0.1,
            horizon: 100,
            damping: 1.0,
            stiffness: 1.0,
            rho: 0.9,
            init_range: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PointMassState {
    pub s: [f64; STATE_DIM],
    pub step_index: usize,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone)]
pub struct PointMassEnv {
    pub config: PointMassConfig,
}

impl PointMassEnv {
    pub fn new(config: PointMassConfig) -> Result<Self> {
        if !(config.dt > 0.0
            && config.damping >= 0.0
            && config.stiffness >= 0.0
            && config.init_range >= 0.0)
            || config.horizon == 0
            || !(0.0..1.0).contains(&config.rho)
        {
            return Err(Error::Config("point mass: invalid configuration".into()));
        }
        Ok(PointMassEnv { config })
    }
}

impl RolloutEnv for PointMassEnv {
    type State = PointMassState;

    fn obs_dim(&self) -> usize {
        STATE_DIM
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&self, seed: u64) -> (PointMassState, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = self.config.init_range;
        let x = if r > 0.0 {
            rng.random_range(-r..=r)
        } else {
            0.0
        };
        let v = if r > 0.0 {
            rng.random_range(-r..=r)
        } else {
            0.0
        };
        let xi1: f64 = StandardNormal.sample(&mut rng);
        let xi2: f64 = StandardNormal.sample(&mut rng);
        let state = PointMassState {
            s: [x, v, xi1, xi2],
            step_index: 0,
            rng,
        };
        let obs = state.s.to_vec();
        (state, obs)
    }

    fn step(&self, state: &mut PointMassState, decision: Decision) -> Result<(Vec<f64>, StepInfo)> {
        let c = &self.config;
        if state.step_index >= c.horizon {
            return Err(Error::Usage("step called on a finished episode".into()));
        }
        let u = decision.lane_step() as f64;
        let [x, v, xi1, xi2] = state.s;
        let v_next = v + (u - c.stiffness * x - c.damping * v) * c.dt;
        let innovation = (1.0 - c.rho * c.rho).sqrt();
        let e1: f64 = StandardNormal.sample(&mut state.rng);
        let e2: f64 = StandardNormal.sample(&mut state.rng);
        state.s = [
            x + v_next * c.dt,
            v_next,
            c.rho * xi1 + innovation * e1,
            c.rho * xi2 + innovation * e2,
        ];
        state.step_index += 1;
        let terminal = if state.step_index >= c.horizon {
            Terminal::HorizonReached
        } else {
            Terminal::None
        };
        Ok((state.s.to_vec(), StepInfo::quiet(terminal)))
    }
}

/// The linear expert, acting on raw states: logits
/// `L = xi1 + (x + v) / 2`, `K = 0`, `R = xi2 - (x + v) / 2`. Each exogenous
/// feature votes for one direction and the position term pulls toward the
/// origin; `K` wins when both votes are negative.
pub fn expert_theta() -> Matrix {
    Matrix::from_rows(
        3,
        STATE_DIM,
        vec![0.5, 0.5, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.5, -0.5, 0.0, 1.0],
    )
    .expect("static shape")
}

pub fn expert_decide(s: &[f64]) -> Decision {
    Decision::from_logits(&expert_theta().mul_vec(s))
}

/// Expert episodes from seeds `derive_seed(seed, "point-mass", e)`.
pub fn expert_demos(env: &PointMassEnv, episodes: usize, seed: u64) -> Result<Vec<Trajectory>> {
    (0..episodes)
        .map(|e| {
            let (mut state, mut obs) = env.reset(derive_seed(seed, "point-mass", e as u64));
            let mut traj = Trajectory::default();
            loop {
                let d = expert_decide(&obs);
                let (next, info) = env.step(&mut state, d)?;
                traj.push(std::mem::replace(&mut obs, next), d.one_hot().to_vec());
                if info.is_terminal() {
                    return Ok(traj);
                }
            }
        })
        .collect()
}

/// Fraction of `states` on which the policy picks the expert's decision.
pub fn agreement(params: &PolicyParams, stats: &RunningStats, states: &[Vec<f64>]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::Usage("agreement needs at least one state".into()));
    }
    let mut hits = 0usize;
    for s in states {
        if params.act(stats, s)?.1 == expert_decide(s) {
            hits += 1;
        }
    }
    Ok(hits as f64 / states.len() as f64)
}
