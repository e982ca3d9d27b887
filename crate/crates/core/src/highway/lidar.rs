//! Planar ray casting against axis-aligned vehicle boxes and the two road
//! edge lines.
//!
//! Beam `k` leaves the host center at angle `2*pi*k/B`, measured
//! counter-clockwise from the direction of travel. Lateral positions grow
//! toward the right, so a counter-clockwise beam has direction
//! `(cos a, -sin a)` in `(longitudinal, lateral)` coordinates.

use super::{EnvConfig, WorldState};

const PARALLEL_EPS: f64 = 1e-12;

/// Distance along the ray `origin + t * dir` (unit `dir`, `t >= 0`) to the
/// box with the given center and half extents, or `None` if it misses.
/// An origin inside the box yields `Some(0.0)`.
pub fn ray_box(origin: [f64; 2], dir: [f64; 2], center: [f64; 2], half: [f64; 2]) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for axis in 0..2 {
        let lo = center[axis] - half[axis];
        let hi = center[axis] + half[axis];
        if dir[axis].abs() < PARALLEL_EPS {
            if origin[axis] < lo || origin[axis] > hi {
                return None;
            }
            continue;
        }
        let t1 = (lo - origin[axis]) / dir[axis];
        let t2 = (hi - origin[axis]) / dir[axis];
        let (a, b) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        t_near = t_near.max(a);
        t_far = t_far.min(b);
        if t_near > t_far {
            return None;
        }
    }
    if t_far < 0.0 {
        None
    } else {
        Some(t_near.max(0.0))
    }
}

pub fn beam_directions(beam_count: usize) -> Vec<[f64; 2]> {
    (0..beam_count)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / beam_count as f64;
            [a.cos(), -a.sin()]
        })
        .collect()
}

/// LIDAR distances for the current world, each in `[0, lidar_range]`.
pub fn scan(state: &WorldState, cfg: &EnvConfig) -> Vec<f64> {
    let host = &state.host;
    let range = cfg.lidar_range;
    let origin = [0.0, host.lateral_pos];

    // Each vehicle is tested at its cyclic image nearest the host.
    let boxes: Vec<([f64; 2], [f64; 2])> = state
        .traffic
        .iter()
        .filter_map(|v| {
            let dx = cfg.wrap_offset(host.longitudinal_pos, v.longitudinal_pos);
            let reach = range + 0.5 * v.length.hypot(v.width);
            let dy = v.lateral_pos - host.lateral_pos;
            (dx.abs() <= reach && dy.abs() <= reach)
                .then_some(([dx, v.lateral_pos], [0.5 * v.length, 0.5 * v.width]))
        })
        .collect();

    beam_directions(cfg.beam_count)
        .into_iter()
        .map(|dir| {
            let mut best = range;
            if cfg.lidar_detects_road_edges && dir[1].abs() >= PARALLEL_EPS {
                let edge = if dir[1] < 0.0 {
                    cfg.left_edge()
                } else {
                    cfg.right_edge()
                };
                let t = (edge - origin[1]) / dir[1];
                if t >= 0.0 {
                    best = best.min(t);
                }
            }
            for (center, half) in &boxes {
                if let Some(t) = ray_box(origin, dir, *center, *half) {
                    best = best.min(t);
                }
            }
            best.clamp(0.0, range)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: march along the ray in fine steps and report the
    /// first sample inside the box.
    fn march(
        origin: [f64; 2],
        dir: [f64; 2],
        center: [f64; 2],
        half: [f64; 2],
        max: f64,
    ) -> Option<f64> {
        let step = 1e-4;
        let mut t = 0.0;
        while t <= max {
            let p = [origin[0] + t * dir[0], origin[1] + t * dir[1]];
            if (p[0] - center[0]).abs() <= half[0] && (p[1] - center[1]).abs() <= half[1] {
                return Some(t);
            }
            t += step;
        }
        None
    }

    #[test]
    fn box_straight_ahead() {
        let t = ray_box([0.0, 0.0], [1.0, 0.0], [12.0, 0.0], [2.0, 0.9]).unwrap();
        assert_eq!(t, 10.0);
    }

    #[test]
    fn box_behind_is_missed() {
        assert_eq!(
            ray_box([0.0, 0.0], [1.0, 0.0], [-12.0, 0.0], [2.0, 0.9]),
            None
        );
    }

    #[test]
    fn origin_inside_box() {
        assert_eq!(
            ray_box([0.0, 0.0], [0.0, 1.0], [0.5, 0.0], [2.0, 0.9]),
            Some(0.0)
        );
    }

    #[test]
    fn ray_box_matches_marching_oracle() {
        let dirs = beam_directions(24);
        let boxes = [
            ([12.0, 0.0], [2.0, 0.9]),
            ([5.0, 3.7], [2.0, 0.9]),
            ([-7.0, -3.7], [2.0, 0.9]),
            ([0.0, 3.7], [2.0, 0.9]),
            ([20.0, 2.0], [2.0, 0.9]),
        ];
        for dir in &dirs {
            for (center, half) in &boxes {
                let exact = ray_box([0.0, 0.0], *dir, *center, *half);
                let marched = march([0.0, 0.0], *dir, *center, *half, 30.0);
                match (exact, marched) {
                    (Some(a), Some(b)) => {
                        assert!((a - b).abs() < 2e-4, "{dir:?} {center:?}: {a} vs {b}")
                    }
                    (None, None) => {}
                    (a, b) => panic!("{dir:?} {center:?}: {a:?} vs {b:?}"),
                }
            }
        }
    }
}
