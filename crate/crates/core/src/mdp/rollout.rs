use serde::{Deserialize, Serialize};

use super::model::LowRankMdp;
use super::policy::Policy;
use crate::error::Result;
use crate::rng::{categorical, stream, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub h: usize,
    pub state: usize,
    pub action: Vec<f64>,
    pub next_state: usize,
}

/// One episode of length `H`, with the stream that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Transition>,
    pub seed: u64,
    pub stream: u64,
    /// Mixture component followed during the episode.
    pub component: usize,
}

/// Samples `s_0 ~ ρ`, `a_h ~ π_h(·|s_h)`, `s_{h+1} ~ T_h(·|s_h,a_h)`.
pub fn rollout(mdp: &LowRankMdp, policy: &Policy, seed: u64) -> Result<Trajectory> {
    policy.validate(mdp.horizon, mdp.n_states, mdp.m)?;
    rollout_components(mdp, &policy.components(), seed, 0)
}

pub(crate) fn rollout_components(
    mdp: &LowRankMdp,
    components: &[(f64, Policy)],
    seed: u64,
    index: u64,
) -> Result<Trajectory> {
    let mut rng = stream(seed, index);
    let component = pick_component(components, &mut rng);
    let policy = &components[component].1;
    let mut s = categorical(&mut rng, &mdp.rho);
    let mut steps = Vec::with_capacity(mdp.horizon);
    for h in 0..mdp.horizon {
        let a = policy.sample_action(h, s, mdp.m, &mut rng)?;
        let next = categorical(&mut rng, &mdp.transition_density(h, s, &a)?);
        steps.push(Transition {
            h,
            state: s,
            action: a,
            next_state: next,
        });
        s = next;
    }
    Ok(Trajectory {
        steps,
        seed,
        stream: index,
        component,
    })
}

/// Runs `components`' policy up to step `h` and returns `s_h`.
pub(crate) fn roll_in(
    mdp: &LowRankMdp,
    components: &[(f64, Policy)],
    h: usize,
    rng: &mut SimRng,
) -> Result<usize> {
    let policy = &components[pick_component(components, rng)].1;
    let mut s = categorical(rng, &mdp.rho);
    for step in 0..h {
        let a = policy.sample_action(step, s, mdp.m, rng)?;
        s = categorical(rng, &mdp.transition_density(step, s, &a)?);
    }
    Ok(s)
}

fn pick_component(components: &[(f64, Policy)], rng: &mut SimRng) -> usize {
    if components.len() == 1 {
        return 0;
    }
    let w: Vec<f64> = components.iter().map(|(w, _)| *w).collect();
    categorical(rng, &w)
}
