//! Lane-change metrics.
//!
//! Per episode, the lane-change *count* is the number of maneuvers that
//! settled in a lane other than their origin, and the lane-change *reward*
//! is the number of maneuvers whose host center crossed out of the origin
//! lane, whether or not they later completed. An aborted maneuver therefore
//! raises the reward without raising the count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decision::Decision;
use crate::error::{check_dim, Error, Result};
use crate::expert::{expert_decide, ExpertRule};
use crate::highway::{EnvConfig, HighwayEnv, StepInfo, Terminal, WorldState};
use crate::policy::PolicyParams;
use crate::seed::derive_seed;
use crate::stats::RunningStats;

/// `(count, reward)` for one episode's step stream.
pub fn lane_change_metrics(infos: &[StepInfo]) -> (usize, usize) {
    let count = infos.iter().filter(|i| i.maneuver_completed_event).count();
    let reward = infos.iter().filter(|i| i.midpoint_passed_event).count();
    (count, reward)
}

/// Anything that can drive the host on the highway.
pub trait Decider: Sync {
    fn decide(&self, world: &WorldState, observation: &[f64]) -> Result<Decision>;
}

/// Linear policy acting on observations only.
pub struct LinearDriver<'a> {
    pub params: &'a PolicyParams,
    pub stats: &'a RunningStats,
}

impl Decider for LinearDriver<'_> {
    fn decide(&self, _world: &WorldState, observation: &[f64]) -> Result<Decision> {
        Ok(self.params.act(self.stats, observation)?.1)
    }
}

/// Rule-based expert with privileged access to the world state.
pub struct ExpertDriver<'a> {
    pub env: &'a EnvConfig,
    pub rule: &'a ExpertRule,
}

impl Decider for ExpertDriver<'_> {
    fn decide(&self, world: &WorldState, _observation: &[f64]) -> Result<Decision> {
        Ok(expert_decide(world, self.env, self.rule))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// Mean per episode.
    pub lane_change_count: f64,
    /// Mean per episode.
    pub lane_change_reward: f64,
    pub collision_rate: f64,
    pub episodes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedMetrics {
    pub count_ratio: f64,
    pub reward_ratio: f64,
}

/// Outcome of one evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub env_seed: u64,
    pub infos: Vec<StepInfo>,
}

impl EpisodeSummary {
    pub fn collided(&self) -> bool {
        self.infos.last().map(|i| i.terminal) == Some(Terminal::Collision)
    }
}

/// Environment seed of evaluation episode `index`.
pub fn eval_episode_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, "eval-episode", index as u64)
}

pub fn run_episode(
    env: &HighwayEnv,
    driver: &dyn Decider,
    env_seed: u64,
) -> Result<EpisodeSummary> {
    let (mut world, obs) = env.reset(env_seed);
    let mut obs = obs.to_vec();
    let mut infos = Vec::with_capacity(env.config().horizon);
    loop {
        let decision = driver.decide(&world, &obs)?;
        let (next, info) = env.step(&mut world, decision)?;
        obs = next.to_vec();
        infos.push(info);
        if info.is_terminal() {
            break;
        }
    }
    Ok(EpisodeSummary { env_seed, infos })
}

/// Per-episode summaries for `episodes` seeded episodes, in episode order.
pub fn run_episodes(
    env: &HighwayEnv,
    driver: &dyn Decider,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeSummary>> {
    (0..episodes)
        .into_par_iter()
        .map(|e| run_episode(env, driver, eval_episode_seed(seed, e)))
        .collect()
}

pub fn summarize(episodes: &[EpisodeSummary], seed: u64) -> EvalMetrics {
    let n = episodes.len().max(1) as f64;
    let (mut count, mut reward, mut collisions) = (0usize, 0usize, 0usize);
    for ep in episodes {
        let (c, r) = lane_change_metrics(&ep.infos);
        count += c;
        reward += r;
        collisions += usize::from(ep.collided());
    }
    EvalMetrics {
        lane_change_count: count as f64 / n,
        lane_change_reward: reward as f64 / n,
        collision_rate: collisions as f64 / n,
        episodes: episodes.len(),
        seed,
    }
}

/// Averaged metrics of `driver` over `episodes` seeded episodes.
pub fn run_eval(
    env_config: &EnvConfig,
    driver: &dyn Decider,
    episodes: usize,
    seed: u64,
) -> Result<EvalMetrics> {
    if episodes == 0 {
        return Err(Error::Usage("evaluation needs at least one episode".into()));
    }
    let env = HighwayEnv::new(env_config.clone())?;
    Ok(summarize(
        &run_episodes(&env, driver, episodes, seed)?,
        seed,
    ))
}

/// Evaluate a linear policy after checking its dimensions against the env.
pub fn run_policy_eval(
    env_config: &EnvConfig,
    params: &PolicyParams,
    stats: &RunningStats,
    episodes: usize,
    seed: u64,
) -> Result<EvalMetrics> {
    check_dim(
        "policy state dimension",
        env_config.obs_dim(),
        params.state_dim(),
    )?;
    check_dim(
        "policy action dimension",
        crate::ACTION_DIM,
        params.action_dim(),
    )?;
    check_dim("running stats dimension", env_config.obs_dim(), stats.dim())?;
    run_eval(env_config, &LinearDriver { params, stats }, episodes, seed)
}

/// Elementwise `policy / expert`.
pub fn normalize_metrics(policy: &EvalMetrics, expert: &EvalMetrics) -> Result<NormalizedMetrics> {
    if !(expert.lane_change_count > 0.0) {
        return Err(Error::Normalization(
            "expert lane-change count is zero".into(),
        ));
    }
    if !(expert.lane_change_reward > 0.0) {
        return Err(Error::Normalization(
            "expert lane-change reward is zero".into(),
        ));
    }
    Ok(NormalizedMetrics {
        count_ratio: policy.lane_change_count / expert.lane_change_count,
        reward_ratio: policy.lane_change_reward / expert.lane_change_reward,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scripted(Vec<Decision>);

    impl Decider for Scripted {
        fn decide(&self, world: &WorldState, _: &[f64]) -> Result<Decision> {
            Ok(*self.0.get(world.step_index).unwrap_or(&Decision::Keep))
        }
    }

    fn quiet_env() -> HighwayEnv {
        HighwayEnv::new(EnvConfig {
            traffic_density: 0.0,
            horizon: 120,
            ..Default::default()
        })
        .unwrap()
    }

    fn metrics(m: f64, r: f64) -> EvalMetrics {
        EvalMetrics {
            lane_change_count: m,
            lane_change_reward: r,
            collision_rate: 0.0,
            episodes: 10,
            seed: 0,
        }
    }

    #[test]
    fn staying_centered_scores_nothing() {
        let ep = run_episode(&quiet_env(), &Scripted(vec![]), 0).unwrap();
        assert_eq!(lane_change_metrics(&ep.infos), (0, 0));
    }

    #[test]
    fn full_crossing_scores_one_and_one() {
        let ep = run_episode(&quiet_env(), &Scripted(vec![Decision::ChangeRight]), 0).unwrap();
        assert_eq!(lane_change_metrics(&ep.infos), (1, 1));
    }

    #[test]
    fn boundary_pass_then_return_scores_reward_only() {
        let mut script = vec![Decision::ChangeRight; 25];
        // Reverse, then let the executor finish the return under Keep.
        script.extend(vec![Decision::ChangeLeft; 20]);
        let ep = run_episode(&quiet_env(), &Scripted(script), 0).unwrap();
        assert_eq!(lane_change_metrics(&ep.infos), (0, 1));
    }

    #[test]
    fn keep_only_policy_never_changes_lanes() {
        let cfg = EnvConfig::default();
        let params = PolicyParams::zeros(3, cfg.obs_dim());
        let stats = RunningStats::new(cfg.obs_dim());
        let m = run_policy_eval(&cfg, &params, &stats, 5, 3).unwrap();
        assert_eq!(m.lane_change_count, 0.0);
        assert_eq!(m.lane_change_reward, 0.0);
        assert_eq!(m.episodes, 5);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let cfg = EnvConfig::default();
        let rule = ExpertRule::default();
        let driver = ExpertDriver {
            env: &cfg,
            rule: &rule,
        };
        assert_eq!(
            run_eval(&cfg, &driver, 4, 17).unwrap(),
            run_eval(&cfg, &driver, 4, 17).unwrap()
        );
    }

    #[test]
    fn mismatched_policy_is_rejected() {
        let cfg = EnvConfig::default();
        let params = PolicyParams::zeros(3, 10);
        let stats = RunningStats::new(10);
        assert!(matches!(
            run_policy_eval(&cfg, &params, &stats, 1, 0),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn normalization_ratios() {
        let expert = metrics(2.0, 4.0);
        assert_eq!(
            normalize_metrics(&expert, &expert).unwrap(),
            NormalizedMetrics {
                count_ratio: 1.0,
                reward_ratio: 1.0
            }
        );
        assert_eq!(
            normalize_metrics(&metrics(1.0, 4.0), &expert)
                .unwrap()
                .count_ratio,
            0.5
        );
        assert!(matches!(
            normalize_metrics(&expert, &metrics(0.0, 1.0)),
            Err(Error::Normalization(_))
        ));
        assert!(matches!(
            normalize_metrics(&expert, &metrics(1.0, 0.0)),
            Err(Error::Normalization(_))
        ));
    }

    #[test]
    fn quiet_episode_cannot_raise_means() {
        let base =
            vec![run_episode(&quiet_env(), &Scripted(vec![Decision::ChangeRight]), 0).unwrap()];
        let mut extended = base.clone();
        extended.push(run_episode(&quiet_env(), &Scripted(vec![]), 1).unwrap());
        let a = summarize(&base, 0);
        let b = summarize(&extended, 0);
        assert!(b.lane_change_count <= a.lane_change_count);
        assert!(b.lane_change_reward <= a.lane_change_reward);
    }
}
