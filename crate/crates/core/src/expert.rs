//! Privileged rule-based demonstrator and its demonstration datasets.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decision::{Decision, ACTION_DIM};
use crate::discriminator::Pair;
use crate::error::{Error, Result};
use crate::highway::{
    cruise_law, front_neighbor, rear_neighbor, EnvConfig, HighwayEnv, Terminal, WorldState,
    MIN_HEADWAY_SPEED,
};
use crate::persist::{read_to_string, write_atomic};
use crate::rollout::Trajectory;
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpertRule {
    /// Lead-vehicle time headway that triggers a lane change, seconds.
    pub headway_trigger: f64,
    /// Meters of free space needed ahead in the target lane.
    pub front_gap_required: f64,
    /// Meters of free space needed behind in the target lane.
    pub rear_gap_required: f64,
    /// Steps to keep the lane after finishing a maneuver.
    pub cooldown: usize,
}

impl Default for ExpertRule {
    fn default() -> Self {
        ExpertRule {
            headway_trigger: 2.0,
            front_gap_required: 20.0,
            rear_gap_required: 10.0,
            cooldown: 30,
        }
    }
}

impl ExpertRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.headway_trigger > 0.0
            && self.front_gap_required > 0.0
            && self.rear_gap_required > 0.0)
            || self.cooldown == 0
        {
            return Err(Error::Config(
                "expert: all rule parameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Smallest rear gap the prediction tolerates, meters.
pub const PREDICTED_REAR_MARGIN: f64 = 2.0;
/// Longest look-ahead of the rear-gap prediction, seconds.
const PREDICTION_LIMIT: f64 = 30.0;

/// Whether `lane` has the required gaps now, and keeps at least
/// `PREDICTED_REAR_MARGIN` behind the host while it changes over and the
/// cruise controller settles its speed.
///
/// The prediction rolls the cruise law forward against the current-lane and
/// target-lane leads, with all traffic at constant speed, until the maneuver
/// is done and the host is at least as fast as the rear vehicle.
pub fn lane_is_clear(world: &WorldState, cfg: &EnvConfig, rule: &ExpertRule, lane: usize) -> bool {
    let front = front_neighbor(world, cfg, lane);
    if front.is_some_and(|f| f.gap < rule.front_gap_required) {
        return false;
    }
    let Some(rear) = rear_neighbor(world, cfg, lane) else {
        return true;
    };
    if rear.gap < rule.rear_gap_required {
        return false;
    }
    let mut target_lead = front;
    let mut origin_lead = front_neighbor(world, cfg, cfg.lane_of(world.host.lateral_pos));
    let maneuver_steps = (cfg.lane_width / (cfg.lateral_rate * cfg.dt)).ceil() as usize;
    // The host center leaves the origin lane halfway through.
    let crossing_step = maneuver_steps / 2;
    let max_steps = (PREDICTION_LIMIT / cfg.dt).ceil() as usize;
    let mut gap = rear.gap;
    let mut v = world.host.speed;
    for step in 0..max_steps {
        if step >= maneuver_steps && v >= rear.speed {
            break;
        }
        let in_origin = if step < crossing_step {
            origin_lead
        } else {
            None
        };
        let lead = [target_lead, in_origin]
            .into_iter()
            .flatten()
            .min_by(|a, b| a.gap.total_cmp(&b.gap));
        let accel = cruise_law(v, lead, cfg.host_speed_target);
        for l in [&mut target_lead, &mut origin_lead].into_iter().flatten() {
            l.gap += (l.speed - v) * cfg.dt;
        }
        gap += (v - rear.speed) * cfg.dt;
        v = (v + accel * cfg.dt).max(0.0);
        if gap < PREDICTED_REAR_MARGIN {
            return false;
        }
    }
    true
}

/// The expert's decision for the current world.
///
/// Continues any active maneuver, holds the lane during the cooldown after a
/// completed maneuver, and otherwise changes lane (left first) only when the
/// lead vehicle is within `headway_trigger` and the adjacent lane is clear.
pub fn expert_decide(world: &WorldState, cfg: &EnvConfig, rule: &ExpertRule) -> Decision {
    if world.maneuver.is_some() {
        return Decision::Keep;
    }
    if let Some(done) = world.last_completion_step {
        if world.step_index.saturating_sub(done) < rule.cooldown {
            return Decision::Keep;
        }
    }
    let lane = cfg.lane_of(world.host.lateral_pos);
    let Some(lead) = front_neighbor(world, cfg, lane) else {
        return Decision::Keep;
    };
    if lead.gap / world.host.speed.max(MIN_HEADWAY_SPEED) >= rule.headway_trigger {
        return Decision::Keep;
    }
    for decision in [Decision::ChangeLeft, Decision::ChangeRight] {
        let target = lane as i64 + decision.lane_step();
        if (0..cfg.lane_count as i64).contains(&target)
            && lane_is_clear(world, cfg, rule, target as usize)
        {
            return decision;
        }
    }
    Decision::Keep
}

/// Expert demonstrations: `(observation, one-hot decision)` per step.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoDataset {
    pub episodes: Vec<Trajectory>,
    pub env_config: EnvConfig,
    pub rule: ExpertRule,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemoHeader {
    env_config: EnvConfig,
    rule: ExpertRule,
    seed: u64,
    n: usize,
    p: usize,
    episodes: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemoRecord {
    episode: usize,
    step: usize,
    s: Vec<f64>,
    a: Vec<f64>,
}

/// Environment seed of demonstration episode `index`.
pub fn demo_episode_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, "demo-episode", index as u64)
}

/// Run the expert for `episodes` full episodes.
pub fn generate_demos(
    env_config: &EnvConfig,
    rule: &ExpertRule,
    episodes: usize,
    seed: u64,
) -> Result<DemoDataset> {
    if episodes == 0 {
        return Err(Error::Usage(
            "need at least one demonstration episode".into(),
        ));
    }
    rule.validate()?;
    let env = HighwayEnv::new(env_config.clone())?;
    let trajectories = (0..episodes)
        .into_par_iter()
        .map(|e| {
            let env_seed = demo_episode_seed(seed, e);
            let (mut world, obs) = env.reset(env_seed);
            let mut obs = obs.to_vec();
            let mut traj = Trajectory::default();
            loop {
                let decision = expert_decide(&world, env_config, rule);
                let (next, info) = env.step(&mut world, decision)?;
                traj.push(
                    std::mem::replace(&mut obs, next.to_vec()),
                    decision.one_hot().to_vec(),
                );
                match info.terminal {
                    Terminal::None => {}
                    Terminal::HorizonReached => return Ok(traj),
                    Terminal::Collision => {
                        return Err(Error::ExpertCollision {
                            episode: e,
                            seed: env_seed,
                        })
                    }
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DemoDataset {
        episodes: trajectories,
        env_config: env_config.clone(),
        rule: rule.clone(),
        seed,
    })
}

impl DemoDataset {
    pub fn state_dim(&self) -> usize {
        self.env_config.obs_dim()
    }

    pub fn len(&self) -> usize {
        self.episodes.iter().map(Trajectory::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All pairs, episode-major.
    pub fn pairs(&self) -> Vec<Pair<'_>> {
        self.episodes.iter().flat_map(Trajectory::pairs).collect()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let header = DemoHeader {
            env_config: self.env_config.clone(),
            rule: self.rule.clone(),
            seed: self.seed,
            n: self.state_dim(),
            p: ACTION_DIM,
            episodes: self.episodes.len(),
        };
        let mut out = json_line(&header)?;
        for (episode, traj) in self.episodes.iter().enumerate() {
            for (step, (s, a)) in traj.pairs().enumerate() {
                let record = DemoRecord {
                    episode,
                    step,
                    s: s.to_vec(),
                    a: a.to_vec(),
                };
                out.push_str(&json_line(&record)?);
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_jsonl()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<DemoDataset> {
        Self::parse(&read_to_string(path)?, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<DemoDataset> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::malformed(path, "empty demonstration file"))?;
        let header: DemoHeader = serde_json::from_str(first)
            .map_err(|e| Error::malformed(path, format!("header: {e}")))?;
        if header.n != header.env_config.obs_dim() || header.p != ACTION_DIM {
            return Err(Error::malformed(
                path,
                format!(
                    "header dimensions n={} p={} disagree with env_config",
                    header.n, header.p
                ),
            ));
        }
        let mut episodes: Vec<Trajectory> = Vec::new();
        for (lineno, line) in lines {
            let rec: DemoRecord = serde_json::from_str(line)
                .map_err(|e| Error::malformed(path, format!("line {}: {e}", lineno + 1)))?;
            if rec.s.len() != header.n || rec.a.len() != header.p {
                return Err(Error::malformed(
                    path,
                    format!("line {}: field s or a has the wrong length", lineno + 1),
                ));
            }
            if rec.s.iter().chain(&rec.a).any(|x| !x.is_finite()) {
                return Err(Error::malformed(
                    path,
                    format!("line {}: non-finite value", lineno + 1),
                ));
            }
            if rec.episode == episodes.len() && rec.step == 0 {
                episodes.push(Trajectory::default());
            }
            let current = episodes.len().checked_sub(1);
            match current {
                Some(e) if e == rec.episode && rec.step == episodes[e].len() => {
                    episodes[e].push(rec.s, rec.a);
                }
                _ => {
                    return Err(Error::malformed(
                        path,
                        format!("line {}: episode/step out of order", lineno + 1),
                    ))
                }
            }
        }
        if episodes.is_empty() || episodes.len() != header.episodes {
            return Err(Error::malformed(
                path,
                format!(
                    "expected {} episodes, found {}",
                    header.episodes,
                    episodes.len()
                ),
            ));
        }
        Ok(DemoDataset {
            episodes,
            env_config: header.env_config,
            rule: header.rule,
            seed: header.seed,
        })
    }
}

fn json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut line = serde_json::to_string(value).map_err(|e| Error::Data(e.to_string()))?;
    line.push('\n');
    Ok(line)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::highway::Vehicle;

    fn scene(host_speed: f64, lead_gap: f64) -> (HighwayEnv, WorldState) {
        let env = HighwayEnv::new(EnvConfig {
            traffic_density: 0.0,
            ..Default::default()
        })
        .unwrap();
        let (mut world, _) = env.reset(0);
        world.host.speed = host_speed;
        let cfg = env.config().clone();
        // Lead in the host lane: center distance = gap + one vehicle length.
        world
            .traffic
            .push(vehicle(lead_gap + cfg.vehicle_length, 1, host_speed, &cfg));
        (env, world)
    }

    fn vehicle(x: f64, lane: usize, speed: f64, cfg: &EnvConfig) -> Vehicle {
        Vehicle {
            longitudinal_pos: x.rem_euclid(cfg.road_length),
            lateral_pos: cfg.lane_center(lane),
            speed,
            length: cfg.vehicle_length,
            width: cfg.vehicle_width,
        }
    }

    #[test]
    fn keeps_without_close_lead() {
        let (env, world) = scene(25.0, 60.0);
        assert_eq!(
            expert_decide(&world, env.config(), &ExpertRule::default()),
            Decision::Keep
        );
        let (env, mut world) = scene(25.0, 60.0);
        world.traffic.clear();
        assert_eq!(
            expert_decide(&world, env.config(), &ExpertRule::default()),
            Decision::Keep
        );
    }

    #[test]
    fn changes_left_into_clear_lane() {
        // 1.0 s headway at 25 m/s.
        let (env, mut world) = scene(25.0, 25.0);
        let cfg = env.config().clone();
        world
            .traffic
            .push(vehicle(25.0 + cfg.vehicle_length, 0, 25.0, &cfg));
        world
            .traffic
            .push(vehicle(-(15.0 + cfg.vehicle_length), 0, 25.0, &cfg));
        assert_eq!(
            expert_decide(&world, &cfg, &ExpertRule::default()),
            Decision::ChangeLeft
        );
    }

    #[test]
    fn keeps_when_both_adjacent_lanes_blocked() {
        let (env, mut world) = scene(25.0, 25.0);
        let cfg = env.config().clone();
        world.traffic.push(vehicle(10.0, 0, 25.0, &cfg));
        world.traffic.push(vehicle(-8.0, 2, 25.0, &cfg));
        assert_eq!(
            expert_decide(&world, &cfg, &ExpertRule::default()),
            Decision::Keep
        );
    }

    #[test]
    fn falls_back_to_right_when_left_blocked() {
        let (env, mut world) = scene(25.0, 25.0);
        let cfg = env.config().clone();
        world.traffic.push(vehicle(2.0, 0, 25.0, &cfg));
        assert_eq!(
            expert_decide(&world, &cfg, &ExpertRule::default()),
            Decision::ChangeRight
        );
    }

    #[test]
    fn rejects_lane_with_fast_closing_rear_vehicle() {
        let (env, mut world) = scene(20.0, 20.0);
        let cfg = env.config().clone();
        world
            .traffic
            .push(vehicle(-(15.0 + cfg.vehicle_length), 0, 30.0, &cfg));
        world.traffic.push(vehicle(2.0, 2, 20.0, &cfg));
        assert_eq!(
            expert_decide(&world, &cfg, &ExpertRule::default()),
            Decision::Keep
        );
    }

    #[test]
    fn respects_cooldown_and_active_maneuver() {
        let (env, mut world) = scene(25.0, 25.0);
        let cfg = env.config().clone();
        world.step_index = 100;
        world.last_completion_step = Some(90);
        assert_eq!(
            expert_decide(&world, &cfg, &ExpertRule::default()),
            Decision::Keep
        );
        world.last_completion_step = Some(60);
        assert_eq!(
            expert_decide(&world, &cfg, &ExpertRule::default()),
            Decision::ChangeLeft
        );
        world.maneuver = Some(crate::highway::Maneuver {
            origin_lane: 1,
            target_lane: 0,
            passed_midpoint: false,
            direction: -1,
        });
        assert_eq!(
            expert_decide(&world, &cfg, &ExpertRule::default()),
            Decision::Keep
        );
    }

    #[test]
    fn never_targets_missing_lane() {
        let (env, mut world) = scene(25.0, 25.0);
        let cfg = env.config().clone();
        world.host.lateral_pos = 0.0;
        world.traffic = vec![vehicle(25.0 + cfg.vehicle_length, 0, 25.0, &cfg)];
        world.traffic.push(vehicle(1.0, 1, 25.0, &cfg));
        assert_eq!(
            expert_decide(&world, &cfg, &ExpertRule::default()),
            Decision::Keep
        );
    }

    #[test]
    fn demos_are_deterministic_and_counted() {
        let cfg = EnvConfig {
            horizon: 60,
            ..Default::default()
        };
        let a = generate_demos(&cfg, &ExpertRule::default(), 3, 5).unwrap();
        let b = generate_demos(&cfg, &ExpertRule::default(), 3, 5).unwrap();
        assert_eq!(a.episodes.len(), 3);
        assert_eq!(a.to_jsonl().unwrap(), b.to_jsonl().unwrap());
        assert!(a.episodes.iter().all(|t| t.len() == 60));
        assert!(a.pairs().iter().all(|(s, a)| s.len() == 28 && a.len() == 3));
    }

    #[test]
    fn default_config_expert_never_collides() {
        let data = generate_demos(&EnvConfig::default(), &ExpertRule::default(), 100, 0).unwrap();
        assert_eq!(data.episodes.len(), 100);
        assert!(data.episodes.iter().all(|t| t.len() == 500));
    }

    #[test]
    fn jsonl_round_trip_and_validation() {
        let cfg = EnvConfig {
            horizon: 20,
            ..Default::default()
        };
        let data = generate_demos(&cfg, &ExpertRule::default(), 2, 9).unwrap();
        let text = data.to_jsonl().unwrap();
        let path = Path::new("demo.jsonl");
        assert_eq!(DemoDataset::parse(&text, path).unwrap(), data);

        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(DemoDataset::parse(&truncated, path).is_err());
        assert!(DemoDataset::parse("", path).is_err());
        let mut lines: Vec<&str> = text.lines().collect();
        lines.swap(2, 3);
        assert!(DemoDataset::parse(&lines.join("\n"), path).is_err());
    }
}
