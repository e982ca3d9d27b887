//! Deterministic multi-lane highway simulator.
//!
//! The learned supervisor only issues lane-change decisions. Speed is handled
//! by a fixed adaptive-cruise rule and lateral motion by a constant-rate
//! lane-change executor. Traffic keeps its lane and a per-lane constant
//! speed, so traffic vehicles never interact with each other.

mod config;
pub mod lidar;

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

pub use config::EnvConfig;

use crate::decision::Decision;
use crate::error::{Error, Result};

/// Time headway below which the cruise controller brakes, seconds.
pub const FOLLOW_HEADWAY: f64 = 1.5;
/// Follow-mode gains on the speed difference and on the headway gap error.
pub const FOLLOW_SPEED_GAIN: f64 = 0.5;
pub const FOLLOW_GAP_GAIN: f64 = 0.1;
pub const MAX_DECEL: f64 = 3.0;
pub const MAX_ACCEL: f64 = 2.0;
/// No traffic spawns within this distance of the host in the host's lane.
pub const SPAWN_CLEARANCE: f64 = 40.0;
/// Speeds below this are treated as this value when computing headways.
pub const MIN_HEADWAY_SPEED: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub longitudinal_pos: f64,
    /// Signed, 0 at the center of lane 0, growing toward higher lane indices.
    pub lateral_pos: f64,
    pub speed: f64,
    pub length: f64,
    pub width: f64,
}

impl Vehicle {
    fn overlaps(&self, other: &Vehicle, cfg: &EnvConfig) -> bool {
        let dx = cfg.wrap_offset(self.longitudinal_pos, other.longitudinal_pos);
        let dy = other.lateral_pos - self.lateral_pos;
        dx.abs() < 0.5 * (self.length + other.length) && dy.abs() < 0.5 * (self.width + other.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Maneuver {
    pub origin_lane: usize,
    pub target_lane: usize,
    pub passed_midpoint: bool,
    /// Lane-index direction the maneuver started in (-1 left, +1 right).
    pub direction: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    None,
    Collision,
    HorizonReached,
}

/// Per-step outcome flags. Event flags are edge-triggered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepInfo {
    pub terminal: Terminal,
    /// The decision pointed at a nonexistent lane and was treated as Keep.
    pub clamped: bool,
    /// The lane containing the host center changed this step.
    pub boundary_crossed: bool,
    /// The host center left the maneuver's origin lane for the first time.
    pub midpoint_passed_event: bool,
    /// The host settled at the center of a lane other than the origin.
    pub maneuver_completed_event: bool,
}

impl StepInfo {
    pub fn quiet(terminal: Terminal) -> Self {
        StepInfo {
            terminal,
            clamped: false,
            boundary_crossed: false,
            midpoint_passed_event: false,
            maneuver_completed_event: false,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal != Terminal::None
    }
}

/// Full privileged simulator state.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub host: Vehicle,
    /// Lateral displacement over the last step divided by `dt`.
    pub host_lateral_velocity: f64,
    pub traffic: Vec<Vehicle>,
    pub maneuver: Option<Maneuver>,
    pub step_index: usize,
    /// Step index at which the most recent maneuver completed.
    pub last_completion_step: Option<usize>,
    pub terminal: Terminal,
    pub rng: ChaCha8Rng,
}

/// What the learned supervisor sees.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub beams: Vec<f64>,
    pub host_speed: f64,
    pub lateral_offset_in_lane: f64,
    pub lateral_velocity: f64,
    /// Current lane index divided by `lane_count - 1`.
    pub lane_index_normalized: f64,
}

impl Observation {
    /// `[beams..., host_speed, lateral_offset_in_lane, lateral_velocity, lane_index_normalized]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.beams.len() + 4);
        v.extend_from_slice(&self.beams);
        v.extend([
            self.host_speed,
            self.lateral_offset_in_lane,
            self.lateral_velocity,
            self.lane_index_normalized,
        ]);
        v
    }
}

/// Nearest vehicle ahead or behind in some lane, as a bumper-to-bumper gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub gap: f64,
    pub speed: f64,
}

#[derive(Debug, Clone)]
pub struct HighwayEnv {
    config: EnvConfig,
}

impl HighwayEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(HighwayEnv { config })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn reset(&self, seed: u64) -> (WorldState, Observation) {
        let cfg = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let host_lane = cfg.lane_count / 2;
        let host = Vehicle {
            longitudinal_pos: 0.0,
            lateral_pos: cfg.lane_center(host_lane),
            speed: cfg.host_speed_target,
            length: cfg.vehicle_length,
            width: cfg.vehicle_width,
        };
        let traffic = spawn_traffic(cfg, host_lane, &mut rng);
        let state = WorldState {
            host,
            host_lateral_velocity: 0.0,
            traffic,
            maneuver: None,
            step_index: 0,
            last_completion_step: None,
            terminal: Terminal::None,
            rng,
        };
        let obs = self.observe(&state);
        (state, obs)
    }

    pub fn observe(&self, state: &WorldState) -> Observation {
        let cfg = &self.config;
        let lane = cfg.lane_of(state.host.lateral_pos);
        Observation {
            beams: lidar::scan(state, cfg),
            host_speed: state.host.speed,
            lateral_offset_in_lane: state.host.lateral_pos - cfg.lane_center(lane),
            lateral_velocity: state.host_lateral_velocity,
            lane_index_normalized: lane as f64 / (cfg.lane_count - 1) as f64,
        }
    }

    /// Advance one step under `decision`. Stepping a terminal state is a
    /// usage error and leaves the state untouched.
    pub fn step(
        &self,
        state: &mut WorldState,
        decision: Decision,
    ) -> Result<(Observation, StepInfo)> {
        if state.terminal != Terminal::None {
            return Err(Error::Usage(format!(
                "step called on a terminal state ({:?})",
                state.terminal
            )));
        }
        let cfg = &self.config;
        let lane_before = cfg.lane_of(state.host.lateral_pos);

        let (maneuver, clamped) =
            apply_decision(state.maneuver, lane_before, decision, cfg.lane_count);
        state.maneuver = maneuver;

        // Lateral executor.
        let lateral_goal = match state.maneuver {
            Some(m) => cfg.lane_center(m.target_lane),
            None => cfg.lane_center(lane_before),
        };
        let max_move = cfg.lateral_rate * cfg.dt;
        let y_before = state.host.lateral_pos;
        let dy = (lateral_goal - y_before).clamp(-max_move, max_move);
        state.host.lateral_pos = y_before + dy;
        state.host_lateral_velocity = dy / cfg.dt;

        // Adaptive cruise against the leads in the lane of the host center
        // (before moving) and in the maneuver target lane.
        let accel = self.cruise_accel(state, lane_before);
        let host = &mut state.host;
        host.longitudinal_pos =
            (host.longitudinal_pos + host.speed * cfg.dt).rem_euclid(cfg.road_length);
        host.speed = (host.speed + accel * cfg.dt).max(0.0);

        for v in &mut state.traffic {
            v.longitudinal_pos =
                (v.longitudinal_pos + v.speed * cfg.dt).rem_euclid(cfg.road_length);
        }

        // Events.
        let lane_after = cfg.lane_of(state.host.lateral_pos);
        let mut info = StepInfo::quiet(Terminal::None);
        info.clamped = clamped;
        info.boundary_crossed = lane_after != lane_before;
        if let Some(mut m) = state.maneuver {
            if !m.passed_midpoint && lane_after != m.origin_lane {
                m.passed_midpoint = true;
                info.midpoint_passed_event = true;
            }
            let settled = (state.host.lateral_pos - cfg.lane_center(m.target_lane)).abs()
                <= cfg.settle_tolerance;
            state.maneuver = if settled {
                if m.target_lane != m.origin_lane {
                    info.maneuver_completed_event = true;
                    state.last_completion_step = Some(state.step_index + 1);
                }
                None
            } else {
                Some(m)
            };
        }

        state.step_index += 1;
        if state.traffic.iter().any(|v| state.host.overlaps(v, cfg)) {
            state.terminal = Terminal::Collision;
        } else if state.step_index >= cfg.horizon {
            state.terminal = Terminal::HorizonReached;
        }
        info.terminal = state.terminal;

        Ok((self.observe(state), info))
    }

    fn cruise_accel(&self, state: &WorldState, lane: usize) -> f64 {
        let cfg = &self.config;
        let mut lanes = vec![lane];
        if let Some(m) = state.maneuver {
            lanes.push(m.target_lane);
        }
        let lead = lanes
            .iter()
            .filter_map(|&l| front_neighbor(state, cfg, l))
            .min_by(|a, b| a.gap.total_cmp(&b.gap));
        cruise_law(state.host.speed, lead, cfg.host_speed_target)
    }
}

/// Adaptive-cruise acceleration for speed `v` given the nearest lead.
///
/// Within `FOLLOW_HEADWAY` the host tracks the lead's speed and a
/// `FOLLOW_HEADWAY * v` gap; otherwise it regulates toward `target`. The
/// result never pushes the speed past `target`.
pub fn cruise_law(v: f64, lead: Option<Neighbor>, target: f64) -> f64 {
    let free = (target - v).clamp(-MAX_ACCEL, MAX_ACCEL);
    match lead {
        Some(lead) if lead.gap / v.max(MIN_HEADWAY_SPEED) < FOLLOW_HEADWAY => {
            let desired = FOLLOW_SPEED_GAIN * (lead.speed - v)
                + FOLLOW_GAP_GAIN * (lead.gap - FOLLOW_HEADWAY * v);
            desired.clamp(-MAX_DECEL, MAX_ACCEL).min(free.max(0.0))
        }
        _ => free,
    }
}

/// Nearest vehicle ahead of the host in `lane`.
pub fn front_neighbor(state: &WorldState, cfg: &EnvConfig, lane: usize) -> Option<Neighbor> {
    neighbor(state, cfg, lane, true)
}

/// Nearest vehicle behind the host in `lane`.
pub fn rear_neighbor(state: &WorldState, cfg: &EnvConfig, lane: usize) -> Option<Neighbor> {
    neighbor(state, cfg, lane, false)
}

fn neighbor(state: &WorldState, cfg: &EnvConfig, lane: usize, ahead: bool) -> Option<Neighbor> {
    let host = &state.host;
    state
        .traffic
        .iter()
        .filter(|v| cfg.lane_of(v.lateral_pos) == lane)
        .filter_map(|v| {
            let dx = cfg.wrap_offset(host.longitudinal_pos, v.longitudinal_pos);
            let half = 0.5 * (host.length + v.length);
            match (ahead, dx >= 0.0) {
                (true, true) => Some(Neighbor {
                    gap: dx - half,
                    speed: v.speed,
                }),
                (false, false) => Some(Neighbor {
                    gap: -dx - half,
                    speed: v.speed,
                }),
                _ => None,
            }
        })
        .min_by(|a, b| a.gap.total_cmp(&b.gap))
}

/// Maneuver bookkeeping for one decision. Returns the new maneuver and
/// whether the decision was clamped at a road edge.
///
/// While a maneuver is active the decision only chooses between the
/// maneuver's original target (same direction) and its origin lane
/// (opposite direction); Keep continues whichever is current.
fn apply_decision(
    maneuver: Option<Maneuver>,
    current_lane: usize,
    decision: Decision,
    lane_count: usize,
) -> (Option<Maneuver>, bool) {
    let step = decision.lane_step();
    match maneuver {
        Some(mut m) => {
            if step != 0 {
                let forward = m.origin_lane as i64 + m.direction;
                m.target_lane = if step == m.direction {
                    forward as usize
                } else {
                    m.origin_lane
                };
            }
            (Some(m), false)
        }
        None if step == 0 => (None, false),
        None => {
            let target = current_lane as i64 + step;
            if target < 0 || target >= lane_count as i64 {
                (None, true)
            } else {
                (
                    Some(Maneuver {
                        origin_lane: current_lane,
                        target_lane: target as usize,
                        passed_midpoint: false,
                        direction: step,
                    }),
                    false,
                )
            }
        }
    }
}

fn spawn_traffic(cfg: &EnvConfig, host_lane: usize, rng: &mut ChaCha8Rng) -> Vec<Vehicle> {
    let mut traffic = Vec::new();
    let [lo, hi] = cfg.traffic_speed_range;
    for lane in 0..cfg.lane_count {
        let speed = if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        };
        if cfg.traffic_density <= 0.0 {
            continue;
        }
        let mean_spacing = 1000.0 / cfg.traffic_density;
        // Bumper-to-bumper gaps of at least two vehicle lengths.
        let min_spacing = 3.0 * cfg.vehicle_length;
        let extra = Exp::new(1.0 / (mean_spacing - min_spacing).max(1e-3)).expect("positive rate");
        let start = rng.random::<f64>() * cfg.road_length;
        let mut offset = 0.0;
        loop {
            let x = (start + offset).rem_euclid(cfg.road_length);
            let clear_of_host =
                lane != host_lane || cfg.wrap_offset(0.0, x).abs() >= SPAWN_CLEARANCE;
            if clear_of_host {
                traffic.push(Vehicle {
                    longitudinal_pos: x,
                    lateral_pos: cfg.lane_center(lane),
                    speed,
                    length: cfg.vehicle_length,
                    width: cfg.vehicle_width,
                });
            }
            offset += min_spacing + extra.sample(rng);
            if offset > cfg.road_length - min_spacing {
                break;
            }
        }
    }
    traffic
}
