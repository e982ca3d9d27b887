//! Environment abstraction used by training, plus episode collection.

use serde::{Deserialize, Serialize};

use crate::decision::Decision;
use crate::error::Result;
use crate::highway::{HighwayEnv, StepInfo, WorldState};
use crate::policy::PolicyParams;
use crate::stats::RunningStats;

/// An episodic environment driven by discrete decisions.
///
/// Implementations must be deterministic in `seed` and the decision
/// sequence; `reset` includes the initial observation.
pub trait RolloutEnv: Sync {
    type State: Send;

    fn obs_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn reset(&self, seed: u64) -> (Self::State, Vec<f64>);
    fn step(&self, state: &mut Self::State, decision: Decision) -> Result<(Vec<f64>, StepInfo)>;
}

impl RolloutEnv for HighwayEnv {
    type State = WorldState;

    fn obs_dim(&self) -> usize {
        self.config().obs_dim()
    }

    fn horizon(&self) -> usize {
        self.config().horizon
    }

    fn reset(&self, seed: u64) -> (WorldState, Vec<f64>) {
        let (state, obs) = HighwayEnv::reset(self, seed);
        (state, obs.to_vec())
    }

    fn step(&self, state: &mut WorldState, decision: Decision) -> Result<(Vec<f64>, StepInfo)> {
        let (obs, info) = HighwayEnv::step(self, state, decision)?;
        Ok((obs.to_vec(), info))
    }
}

/// Ordered `(state, one-hot action)` pairs from one episode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn push(&mut self, state: Vec<f64>, action: Vec<f64>) {
        self.states.push(state);
        self.actions.push(action);
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> + '_ {
        self.states
            .iter()
            .zip(&self.actions)
            .map(|(s, a)| (s.as_slice(), a.as_slice()))
    }
}

/// One episode together with the per-step outcome flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub trajectory: Trajectory,
    pub infos: Vec<StepInfo>,
}

/// Run the linear policy for one episode from `seed`, until a terminal step.
pub fn run_policy<E: RolloutEnv>(
    env: &E,
    params: &PolicyParams,
    stats: &RunningStats,
    seed: u64,
) -> Result<Rollout> {
    let (mut state, mut obs) = env.reset(seed);
    let mut trajectory = Trajectory::default();
    let mut infos = Vec::new();
    loop {
        let (_, decision) = params.act(stats, &obs)?;
        let (next, info) = env.step(&mut state, decision)?;
        trajectory.push(
            std::mem::replace(&mut obs, next),
            decision.one_hot().to_vec(),
        );
        infos.push(info);
        if info.is_terminal() {
            break;
        }
    }
    Ok(Rollout { trajectory, infos })
}
