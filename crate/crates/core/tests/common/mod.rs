#![allow(dead_code)]

use ailrs_core::discriminator::{DiscriminatorConfig, Pair};
use ailrs_core::pointmass::{agreement, expert_demos, PointMassConfig, PointMassEnv, STATE_DIM};
use ailrs_core::rollout::Trajectory;
use ailrs_core::trainer::{init_discriminator, train, TrainConfig, TrainerState};

pub const TOY_DEMO_EPISODES: usize = 20;
pub const TOY_DEMO_SEED: u64 = 100;
pub const TOY_HELD_OUT_SEED: u64 = 200;

/// Held-out expert agreement of AILRS on the point-mass task after
/// `iterations`, for each master seed.
pub fn toy_agreement(disc: DiscriminatorConfig, iterations: usize, seeds: &[u64]) -> Vec<f64> {
    let env = PointMassEnv::new(PointMassConfig::default()).unwrap();
    let demos = expert_demos(&env, TOY_DEMO_EPISODES, TOY_DEMO_SEED).unwrap();
    let held_out: Vec<Vec<f64>> = expert_demos(&env, TOY_DEMO_EPISODES, TOY_HELD_OUT_SEED)
        .unwrap()
        .into_iter()
        .flat_map(|t: Trajectory| t.states)
        .collect();
    let pairs: Vec<Pair<'_>> = demos.iter().flat_map(|t| t.pairs()).collect();
    seeds
        .iter()
        .map(|&seed| {
            let model = init_discriminator(&pairs, disc.clone(), seed).unwrap();
            let mut state = TrainerState::new(STATE_DIM, model, seed);
            let cfg = TrainConfig {
                iterations,
                master_seed: seed,
                ..Default::default()
            };
            train(&mut state, &pairs, &env, &cfg, |_, _| Ok(())).unwrap();
            agreement(&state.policy, &state.stats, &held_out).unwrap()
        })
        .collect()
}
