use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry, traffic and controller constants of the simulated highway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub lane_count: usize,
    /// Meters.
    pub lane_width: f64,
    /// Meters; the road wraps cyclically.
    pub road_length: f64,
    /// Seconds per step.
    pub dt: f64,
    /// Steps per episode.
    pub horizon: usize,
    pub beam_count: usize,
    pub lidar_range: f64,
    /// Vehicles per kilometer per lane.
    pub traffic_density: f64,
    /// Lane speeds are drawn uniformly from this range, m/s.
    pub traffic_speed_range: [f64; 2],
    pub host_speed_target: f64,
    /// Lateral speed of the lane-change executor, m/s.
    pub lateral_rate: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// A maneuver completes once the host is this close to the target center.
    pub settle_tolerance: f64,
    /// Whether LIDAR beams stop at the road edge lines.
    pub lidar_detects_road_edges: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            lane_count: 3,
            lane_width: 3.7,
            road_length: 1000.0,
            dt: 0.1,
            horizon: 500,
            beam_count: 24,
            lidar_range: 50.0,
            traffic_density: 10.0,
            traffic_speed_range: [20.0, 30.0],
            host_speed_target: 30.0,
            lateral_rate: 1.0,
            vehicle_length: 4.0,
            vehicle_width: 1.8,
            settle_tolerance: 0.2,
            lidar_detects_road_edges: true,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(format!("env: {msg}")));
        if self.lane_count < 2 {
            return fail("lane_count must be at least 2");
        }
        if !(self.dt > 0.0) {
            return fail("dt must be positive");
        }
        if self.horizon == 0 {
            return fail("horizon must be at least 1");
        }
        if self.beam_count < 4 {
            return fail("beam_count must be at least 4");
        }
        if !(self.lidar_range > 0.0) {
            return fail("lidar_range must be positive");
        }
        for (name, v) in [
            ("lane_width", self.lane_width),
            ("road_length", self.road_length),
            ("lateral_rate", self.lateral_rate),
            ("vehicle_length", self.vehicle_length),
            ("vehicle_width", self.vehicle_width),
            ("host_speed_target", self.host_speed_target),
            ("settle_tolerance", self.settle_tolerance),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return fail(&format!("{name} must be positive and finite"));
            }
        }
        if self.settle_tolerance >= self.lane_width / 2.0 {
            return fail("settle_tolerance must be below half a lane width");
        }
        if self.vehicle_width >= self.lane_width {
            return fail("vehicle_width must be below lane_width");
        }
        if !(self.traffic_density >= 0.0) || !self.traffic_density.is_finite() {
            return fail("traffic_density must be non-negative");
        }
        let [lo, hi] = self.traffic_speed_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return fail("traffic_speed_range must satisfy 0 <= lo <= hi");
        }
        if self.road_length < 4.0 * self.lidar_range {
            return fail("road_length must be at least four LIDAR ranges");
        }
        Ok(())
    }

    /// Observation dimension: beams plus four host features.
    pub fn obs_dim(&self) -> usize {
        self.beam_count + 4
    }

    pub fn lane_center(&self, lane: usize) -> f64 {
        lane as f64 * self.lane_width
    }

    /// Lane whose center is nearest to `lateral`, clamped to the road.
    pub fn lane_of(&self, lateral: f64) -> usize {
        let idx = (lateral / self.lane_width + 0.5).floor();
        idx.clamp(0.0, (self.lane_count - 1) as f64) as usize
    }

    pub fn left_edge(&self) -> f64 {
        -0.5 * self.lane_width
    }

    pub fn right_edge(&self) -> f64 {
        (self.lane_count as f64 - 0.5) * self.lane_width
    }

    /// Signed longitudinal offset from `from` to `to` on the cyclic road, in
    /// `[-L/2, L/2)`.
    pub fn wrap_offset(&self, from: f64, to: f64) -> f64 {
        let l = self.road_length;
        let d = (to - from).rem_euclid(l);
        if d >= 0.5 * l {
            d - l
        } else {
            d
        }
    }
}
