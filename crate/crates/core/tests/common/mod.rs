//! Shared fixtures: small affine instances with a closed-form value oracle.
#![allow(dead_code)]

use flambe_core::mdp::policy::{clipped_box, smoothing_radius};
use flambe_core::mdp::{
    DeterministicPolicy, FeatureMap, GridPolicy, LowRankMdp, Policy, RewardFunction, RewardShape,
    StateEmbedding,
};
use flambe_core::ActionGrid;
use rand::Rng;

/// Two-state, d = 2 model with `φ_0 = o + b·a`, `φ_1 = 1 − φ_0`, and an affine reward.
pub struct AffineInstance {
    pub m: usize,
    pub horizon: usize,
    pub rho: Vec<f64>,
    /// `off[h][s]`, `slope[h][s][j]` for the first feature.
    pub off: Vec<Vec<f64>>,
    pub slope: Vec<Vec<Vec<f64>>>,
    /// `col[h][i][s′]`.
    pub col: Vec<Vec<Vec<f64>>>,
    pub r_off: Vec<Vec<f64>>,
    pub r_slope: Vec<Vec<Vec<f64>>>,
}

impl AffineInstance {
    pub fn random(seed: u64, m: usize, horizon: usize) -> Self {
        let mut rng = flambe_core::rng::root(seed);
        let p0: f64 = rng.random_range(0.05..0.95);
        let mut inst = AffineInstance {
            m,
            horizon,
            rho: vec![p0, 1.0 - p0],
            off: vec![],
            slope: vec![],
            col: vec![],
            r_off: vec![],
            r_slope: vec![],
        };
        for _ in 0..horizon {
            let mut off = vec![];
            let mut slope = vec![];
            let mut r_off = vec![];
            let mut r_slope = vec![];
            for _ in 0..2 {
                let o: f64 = rng.random_range(0.2..0.8);
                let room = o.min(1.0 - o) / m as f64;
                off.push(o);
                slope.push((0..m).map(|_| rng.random_range(-room..room)).collect());
                r_off.push(rng.random_range(0.25..0.5));
                r_slope.push((0..m).map(|_| rng.random_range(-0.25..0.25) / m as f64).collect());
            }
            let cols = (0..2)
                .map(|_| {
                    let p: f64 = rng.random_range(0.0..1.0);
                    vec![p, 1.0 - p]
                })
                .collect();
            inst.off.push(off);
            inst.slope.push(slope);
            inst.col.push(cols);
            inst.r_off.push(r_off);
            inst.r_slope.push(r_slope);
        }
        inst
    }

    pub fn model(&self) -> LowRankMdp {
        let mut phi = vec![];
        let mut psi = vec![];
        for h in 0..self.horizon {
            let mut offset = vec![];
            let mut slope = vec![];
            for s in 0..2 {
                offset.extend([self.off[h][s], 1.0 - self.off[h][s]]);
                slope.extend(self.slope[h][s].iter().copied());
                slope.extend(self.slope[h][s].iter().map(|b| -b));
            }
            phi.push(FeatureMap::Affine {
                n_states: 2,
                d: 2,
                m: self.m,
                offset,
                slope,
            });
            psi.push(StateEmbedding::from_components(&self.col[h]).unwrap());
        }
        LowRankMdp::new(self.rho.clone(), phi, psi).unwrap()
    }

    pub fn reward(&self) -> RewardFunction {
        let mut shapes = vec![];
        for h in 0..self.horizon {
            for s in 0..2 {
                shapes.push(RewardShape::Affine {
                    offset: self.r_off[h][s],
                    slope: self.r_slope[h][s].clone(),
                });
            }
        }
        RewardFunction::new(self.horizon, 2, self.m, shapes).unwrap()
    }

    fn transition(&self, h: usize, s: usize, a: &[f64], next: usize) -> f64 {
        let f0 = self.off[h][s] + self.slope[h][s].iter().zip(a).map(|(b, x)| b * x).sum::<f64>();
        f0 * self.col[h][0][next] + (1.0 - f0) * self.col[h][1][next]
    }

    fn r(&self, h: usize, s: usize, a: &[f64]) -> f64 {
        self.r_off[h][s] + self.r_slope[h][s].iter().zip(a).map(|(b, x)| b * x).sum::<f64>()
    }

    /// Value by enumerating every state sequence, component and action atom.
    /// Both the reward and the transition are affine in the action, so each
    /// cell or box contributes exactly its centre.
    pub fn brute_force_value(&self, policy: &Policy) -> f64 {
        match policy {
            Policy::FiniteMixture { components } => components
                .iter()
                .map(|c| c.weight * self.brute_force_value(&c.policy))
                .sum(),
            _ => {
                let mut total = 0.0;
                for s0 in 0..2 {
                    total += self.rho[s0] * self.tail(policy, 0, s0);
                }
                total
            }
        }
    }

    fn tail(&self, policy: &Policy, h: usize, s: usize) -> f64 {
        if h == self.horizon {
            return 0.0;
        }
        let mut v = 0.0;
        for (p, a) in atoms(policy, h, s, self.m) {
            let mut future = 0.0;
            for next in 0..2 {
                let t = self.transition(h, s, &a, next);
                if t != 0.0 {
                    future += t * self.tail(policy, h + 1, next);
                }
            }
            v += p * (self.r(h, s, &a) + future);
        }
        v
    }
}

/// Mean-preserving atoms of a Markov policy at `(h, s)`.
fn atoms(policy: &Policy, h: usize, s: usize, m: usize) -> Vec<(f64, Vec<f64>)> {
    match policy {
        Policy::UniformRandom => vec![(1.0, vec![0.5; m])],
        Policy::Deterministic(d) => vec![(1.0, d.action(h, s).to_vec())],
        Policy::GridMixture(g) => {
            let grid = g.grid();
            g.cell_probs(h, s)
                .iter()
                .enumerate()
                .map(|(c, &p)| (p, grid.midpoint(c)))
                .collect()
        }
        Policy::Smoothed { base, k } => atoms(base, h, s, m)
            .into_iter()
            .map(|(p, a)| {
                let (lo, hi) = clipped_box(&a, smoothing_radius(*k, m));
                (p, lo.iter().zip(&hi).map(|(l, u)| 0.5 * (l + u)).collect())
            })
            .collect(),
        Policy::UniformFrom { base, step } => {
            if h >= *step {
                vec![(1.0, vec![0.5; m])]
            } else {
                atoms(base, h, s, m)
            }
        }
        Policy::FiniteMixture { .. } => panic!("mixtures are enumerated at trajectory level"),
    }
}

/// A spread of policy types on a 2-state problem.
pub fn policy_zoo(seed: u64, m: usize, horizon: usize) -> Vec<Policy> {
    let mut rng = flambe_core::rng::root(seed ^ 0xABCD);
    let grid = GridPolicy::random(horizon, 2, m, 4, 4.0, &mut rng).unwrap();
    let actions: Vec<f64> = (0..horizon * 2 * m).map(|_| rng.random::<f64>()).collect();
    let det = DeterministicPolicy::new(horizon, 2, m, actions).unwrap();
    let edge = DeterministicPolicy::constant(horizon, 2, &vec![1.0; m]).unwrap();
    vec![
        Policy::UniformRandom,
        Policy::GridMixture(grid.clone()),
        Policy::Deterministic(det.clone()),
        Policy::Smoothed {
            base: Box::new(Policy::Deterministic(det.clone())),
            k: 4.0,
        },
        Policy::Smoothed {
            base: Box::new(Policy::Deterministic(edge)),
            k: 2.0,
        },
        Policy::UniformFrom {
            base: Box::new(Policy::Deterministic(det.clone())),
            step: 1,
        },
        Policy::uniform_mixture(vec![Policy::GridMixture(grid), Policy::Deterministic(det)])
            .unwrap(),
    ]
}

/// Quadrature resolution that refines every grid in [`policy_zoo`].
pub const ZOO_QUAD: usize = 8;

pub fn grid(m: usize, g: usize) -> ActionGrid {
    ActionGrid::new(m, g).unwrap()
}

/// `n` transitions per step, each from its own uniform-action episode.
pub fn uniform_dataset(
    env: &LowRankMdp,
    n: usize,
    seed: u64,
) -> flambe_core::oracles::TransitionDataset {
    use flambe_core::mdp::rollout;
    use flambe_core::oracles::{Sample, TransitionDataset};
    let mut data = TransitionDataset::new(env.n_states, env.m, env.horizon);
    for h in 0..env.horizon {
        let step_seed = flambe_core::rng::derive(seed, &[h as u64]);
        for i in 0..n {
            let episode_seed = flambe_core::rng::derive(step_seed, &[i as u64]);
            let traj = rollout(env, &Policy::UniformRandom, episode_seed).unwrap();
            let t = &traj.steps[h];
            data.push(
                h,
                Sample {
                    state: t.state,
                    action: t.action.clone(),
                    next_state: t.next_state,
                    iter: 0,
                    seed: episode_seed,
                },
            )
            .unwrap();
        }
    }
    data
}

/// `E_{s∼d_h, a∼unif}[TV(T̂_h, T*_h)]` averaged over steps, under uniform exploration.
pub fn uniform_tv_error(env: &LowRankMdp, model: &LowRankMdp) -> f64 {
    use flambe_core::mdp::state_occupancy;
    let occ = state_occupancy(env, &Policy::UniformRandom, 64).unwrap();
    let actions = grid(env.m, if env.m == 1 { 64 } else { 16 }).midpoints();
    let w = 1.0 / actions.len() as f64;
    let mut total = 0.0;
    for h in 0..env.horizon {
        for s in 0..env.n_states {
            for a in &actions {
                let p = env.transition_density(h, s, a).unwrap();
                let q = model.transition_density(h, s, a).unwrap();
                total += occ[h][s] * w * flambe_core::mdp::tv_distance(&p, &q).unwrap();
            }
        }
    }
    total / env.horizon as f64
}
