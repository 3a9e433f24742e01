//! Exact values by backward dynamic programming, and Monte Carlo cross-checks.
//!
//! Action integrals use the policy's quadrature rule (midpoint rule on a
//! `G^m` grid for continuous densities). Trajectory-level mixtures are
//! evaluated component by component and averaged.

use super::model::LowRankMdp;
use super::policy::Policy;
use super::reward::RewardFunction;
use super::rollout::rollout_components;
use crate::error::{Error, Result};

/// `V(π; R, model)` by exact backward DP with `quad_g` quadrature.
pub fn value_exact(
    model: &LowRankMdp,
    policy: &Policy,
    reward: &RewardFunction,
    quad_g: usize,
) -> Result<f64> {
    check_reward(model, reward)?;
    policy.validate(model.horizon, model.n_states, model.m)?;
    let mut total = 0.0;
    for (w, comp) in policy.components() {
        let v0 = markov_values(model, &comp, reward, quad_g)?;
        total += w * dot(&model.rho, &v0);
    }
    Ok(total)
}

/// Per-state values `V_0(s)` of a Markov policy.
pub fn markov_values(
    model: &LowRankMdp,
    policy: &Policy,
    reward: &RewardFunction,
    quad_g: usize,
) -> Result<Vec<f64>> {
    let n = model.n_states;
    let mut next = vec![0.0; n];
    let mut density = vec![0.0; n];
    for h in (0..model.horizon).rev() {
        let mut cur = vec![0.0; n];
        for (s, v) in cur.iter_mut().enumerate() {
            for (w, a) in policy.action_rule(h, s, model.m, quad_g)? {
                let phi = model.features(h, s, &a);
                model.density_from_features(h, s, &a, &phi, &mut density)?;
                *v += w * (reward.eval(h, s, &a) + dot(&density, &next));
            }
        }
        next = cur;
    }
    Ok(next)
}

/// State distributions `d_0, …, d_H` induced by `policy` (mixture-averaged).
pub fn state_occupancy(model: &LowRankMdp, policy: &Policy, quad_g: usize) -> Result<Vec<Vec<f64>>> {
    policy.validate(model.horizon, model.n_states, model.m)?;
    let n = model.n_states;
    let mut out = vec![vec![0.0; n]; model.horizon + 1];
    for (w, comp) in policy.components() {
        let occ = markov_occupancy(model, &comp, quad_g, model.horizon)?;
        for (acc, d) in out.iter_mut().zip(occ) {
            for (x, y) in acc.iter_mut().zip(d) {
                *x += w * y;
            }
        }
    }
    Ok(out)
}

/// `d_0..=d_upto` for a Markov policy.
pub(crate) fn markov_occupancy(
    model: &LowRankMdp,
    policy: &Policy,
    quad_g: usize,
    upto: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = model.n_states;
    let mut occ = vec![model.rho.clone()];
    let mut density = vec![0.0; n];
    for h in 0..upto {
        let mut next = vec![0.0; n];
        for s in 0..n {
            let ds = occ[h][s];
            if ds == 0.0 {
                continue;
            }
            for (w, a) in policy.action_rule(h, s, model.m, quad_g)? {
                let phi = model.features(h, s, &a);
                model.density_from_features(h, s, &a, &phi, &mut density)?;
                for (x, p) in next.iter_mut().zip(&density) {
                    *x += ds * w * p;
                }
            }
        }
        occ.push(next);
    }
    Ok(occ)
}

/// Monte Carlo value estimate: `(mean, standard error)` over `n_traj` seeded rollouts.
pub fn value_mc(
    mdp: &LowRankMdp,
    policy: &Policy,
    reward: &RewardFunction,
    n_traj: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_traj == 0 {
        return Err(Error::domain("n_traj must be at least 1"));
    }
    check_reward(mdp, reward)?;
    policy.validate(mdp.horizon, mdp.n_states, mdp.m)?;
    let comps = policy.components();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for i in 0..n_traj {
        let traj = rollout_components(mdp, &comps, seed, i as u64)?;
        let ret: f64 = traj
            .steps
            .iter()
            .map(|st| reward.eval(st.h, st.state, &st.action))
            .sum();
        sum += ret;
        sum_sq += ret * ret;
    }
    let n = n_traj as f64;
    let mean = sum / n;
    let var = if n_traj > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((mean, (var / n).sqrt()))
}

fn check_reward(model: &LowRankMdp, reward: &RewardFunction) -> Result<()> {
    if reward.horizon != model.horizon || reward.n_states != model.n_states || reward.m != model.m {
        return Err(Error::config("reward shape does not match the model"));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
