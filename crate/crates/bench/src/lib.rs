//! Fixtures shared by the benchmarks.

use flambe_core::env::{make_hypothesis_class, make_smooth_lowrank_mdp, EnvConfig, HypothesisClass};
use flambe_core::flambe::sparse_reward_family;
use flambe_core::mdp::{rollout, GridPolicy, LowRankMdp, Policy, RewardFunction};
use flambe_core::oracles::{Sample, TransitionDataset};
use flambe_core::rng;

pub struct Fixture {
    pub env: LowRankMdp,
    pub class: HypothesisClass,
    pub reward: RewardFunction,
    pub policy: Policy,
    pub data: TransitionDataset,
}

/// Environment, class, one sparse reward, a grid policy and `n` uniform samples per step.
pub fn fixture(cfg: &EnvConfig, n: usize) -> Fixture {
    let env = make_smooth_lowrank_mdp(cfg).expect("environment");
    let class = make_hypothesis_class(&env, cfg).expect("class");
    let reward = sparse_reward_family(&env, 1, cfg.seed).expect("reward").remove(0);
    let mut r = rng::root(cfg.seed);
    let policy = Policy::GridMixture(
        GridPolicy::random(env.horizon, env.n_states, env.m, 8, 4.0, &mut r).expect("policy"),
    );
    let mut data = TransitionDataset::new(env.n_states, env.m, env.horizon);
    for i in 0..n {
        let seed = rng::derive(cfg.seed, &[i as u64]);
        let traj = rollout(&env, &Policy::UniformRandom, seed).expect("rollout");
        for t in traj.steps {
            data.push(
                t.h,
                Sample {
                    state: t.state,
                    action: t.action,
                    next_state: t.next_state,
                    iter: 0,
                    seed,
                },
            )
            .expect("sample");
        }
    }
    Fixture {
        env,
        class,
        reward,
        policy,
        data,
    }
}

/// The 3-state end-to-end setting.
pub fn small() -> Fixture {
    fixture(&EnvConfig::small(7), 500)
}

/// A larger two-dimensional-action setting.
pub fn medium() -> Fixture {
    let cfg = EnvConfig {
        n_phi_decoys: 4,
        n_psi_decoys: 4,
        ..EnvConfig::new(8, 3, 2, 4, 11)
    };
    fixture(&cfg, 500)
}
