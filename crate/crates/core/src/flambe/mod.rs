//! The outer exploration loop: collect data with the current exploratory
//! mixture, fit the model by maximum likelihood, plan new exploratory
//! policies under the fitted model, repeat.

pub mod hyper;

use serde::{Deserialize, Serialize};

use crate::env::{probe_points, HypothesisClass};
use crate::error::{Error, Result};
use crate::mdp::distance::tv_unchecked;
use crate::mdp::policy::{DeterministicPolicy, GridPolicy, Policy};
use crate::mdp::rollout::roll_in;
use crate::mdp::{value_exact, LowRankMdp, RewardFunction, RewardShape};
use crate::oracles::{mle_fit, Sample, TransitionDataset};
use crate::planner::{elliptical_plan, PlannerConfig};
use crate::rng::{self, categorical};
use crate::smoothness::smooth_policy;

pub use hyper::{
    theoretical_hyperparams, trajectory_slope, FrozenLogs, HyperMode, HyperParams, HyperRequest,
    Provenance,
};

/// Learned model: one selected `(φ̂_h, ψ̂_h)` pair per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEstimate {
    pub model: LowRankMdp,
    pub phi_idx: Vec<usize>,
    pub psi_idx: Vec<usize>,
    pub log_likelihood: Vec<f64>,
    pub iteration: usize,
    pub dataset_sizes: Vec<usize>,
}

/// Per-`(iteration, step)` diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub h: usize,
    pub tv_probe_mean: f64,
    pub planner_iters: usize,
    pub chosen_phi_idx: usize,
    pub chosen_psi_idx: usize,
    pub degenerate_mixture: bool,
    pub uncertified_slack: bool,
    pub spot_check_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlambeDiagnostics {
    pub records: Vec<IterationRecord>,
    /// Mean probe TV over all steps, per iteration.
    pub model_error: Vec<f64>,
    pub warnings: Vec<String>,
}

impl FlambeDiagnostics {
    /// Writes `iteration,h,tv_probe_mean,planner_iters,chosen_phi_idx,chosen_psi_idx`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "iteration",
            "h",
            "tv_probe_mean",
            "planner_iters",
            "chosen_phi_idx",
            "chosen_psi_idx",
        ])?;
        for r in &self.records {
            wtr.write_record([
                r.iteration.to_string(),
                r.h.to_string(),
                format!("{:?}", r.tv_probe_mean),
                r.planner_iters.to_string(),
                r.chosen_phi_idx.to_string(),
                r.chosen_psi_idx.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlambeOutput {
    pub model: ModelEstimate,
    pub diagnostics: FlambeDiagnostics,
    pub dataset: TransitionDataset,
    /// Exploratory mixture after the last iteration.
    pub exploration: Policy,
}

/// Mean over the fixed probes of `TV(T̂_h(·|s,a), T_h(·|s,a))`.
pub fn probe_tv(env: &LowRankMdp, model: &LowRankMdp, h: usize) -> Result<f64> {
    let probes = probe_points(env.n_states, env.m);
    let mut total = 0.0;
    for (s, a) in &probes {
        let p = env.transition_density(h, *s, a)?;
        let q = model.transition_density(h, *s, a)?;
        total += tv_unchecked(&p, &q);
    }
    Ok(total / probes.len() as f64)
}

/// Probe TV averaged over every step.
pub fn model_probe_error(env: &LowRankMdp, model: &LowRankMdp) -> Result<f64> {
    let mut total = 0.0;
    for h in 0..env.horizon {
        total += probe_tv(env, model, h)?;
    }
    Ok(total / env.horizon as f64)
}

/// Collects `n` samples at step `h`: roll in with `explore`, act uniformly, observe the environment.
fn collect(
    env: &LowRankMdp,
    explore: &[(f64, Policy)],
    h: usize,
    n: usize,
    iteration: usize,
    seed: u64,
) -> Result<Vec<Sample>> {
    (0..n)
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let s = roll_in(env, explore, h, &mut rng)?;
            let a = rng::uniform_action(&mut rng, env.m);
            let next = categorical(&mut rng, &env.transition_density(h, s, &a)?);
            Ok(Sample {
                state: s,
                action: a,
                next_state: next,
                iter: iteration,
                seed,
            })
        })
        .collect()
}

/// Runs `J_max` rounds of exploration, fitting and planning.
pub fn run_flambe(
    env: &LowRankMdp,
    class: &HypothesisClass,
    hyper: &HyperParams,
    planner: &PlannerConfig,
    seed: u64,
) -> Result<FlambeOutput> {
    let (n, j_max) = hyper.runnable()?;
    class.check_realizable(env)?;
    let horizon = env.horizon;
    let mut data = TransitionDataset::new(env.n_states, env.m, horizon);
    let mut explore = Policy::UniformRandom;
    let mut diag = FlambeDiagnostics::default();
    let mut estimate = None;
    for j in 1..=j_max {
        let comps = explore.components();
        for h in 0..horizon {
            let sub = rng::derive(seed, &[j as u64, h as u64]);
            let batch = collect(env, &comps, h, n, j, sub)?;
            data.extend(h, batch)?;
        }
        let fits = mle_fit(&data, class).map_err(|e| provenance(e, j, "maximum likelihood"))?;
        let phi_idx: Vec<usize> = fits.iter().map(|f| f.phi_idx).collect();
        let psi_idx: Vec<usize> = fits.iter().map(|f| f.psi_idx).collect();
        let model = class.model(&env.rho, &phi_idx, &psi_idx)?;

        let mut pre = Vec::with_capacity(horizon);
        for h in 0..horizon {
            let cfg = PlannerConfig {
                seed: rng::derive(seed, &[j as u64, h as u64, 0x91A]),
                ..*planner
            };
            let plan = elliptical_plan(&model, h, &cfg).map_err(|e| provenance(e, j, "planner"))?;
            for w in &plan.warnings {
                let w = format!("iteration {j}, step {h}: {w}");
                if !diag.warnings.contains(&w) {
                    diag.warnings.push(w);
                }
            }
            diag.records.push(IterationRecord {
                iteration: j,
                h,
                tv_probe_mean: probe_tv(env, &model, h)?,
                planner_iters: plan.iterations,
                chosen_phi_idx: phi_idx[h],
                chosen_psi_idx: psi_idx[h],
                degenerate_mixture: plan.degenerate_mixture,
                uncertified_slack: plan.uncertified_slack,
                spot_check_holds: plan.spot_check.holds,
            });
            pre.push(Policy::UniformFrom {
                base: Box::new(plan.mixture),
                step: h,
            });
        }
        diag.model_error.push(model_probe_error(env, &model)?);
        explore = Policy::uniform_mixture(pre)?;
        estimate = Some(ModelEstimate {
            model,
            phi_idx,
            psi_idx,
            log_likelihood: fits.iter().map(|f| f.log_likelihood).collect(),
            iteration: j,
            dataset_sizes: (0..horizon).map(|h| data.len(h)).collect(),
        });
    }
    let model = estimate.ok_or_else(|| Error::domain("J_max must be at least 1"))?;
    Ok(FlambeOutput {
        model,
        diagnostics: diag,
        dataset: data,
        exploration: explore,
    })
}

fn provenance(e: Error, j: usize, stage: &str) -> Error {
    match e {
        Error::Invariant(msg) => Error::Invariant(format!("iteration {j}, {stage}: {msg}")),
        Error::Domain(msg) => Error::Domain(format!("iteration {j}, {stage}: {msg}")),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub reward: usize,
    pub policy: usize,
    pub v_model: f64,
    pub v_env: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalGap {
    pub max_gap: f64,
    pub table: Vec<GapRow>,
}

impl EvalGap {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["reward", "policy", "v_model", "v_env", "gap"])?;
        for r in &self.table {
            wtr.write_record([
                r.reward.to_string(),
                r.policy.to_string(),
                format!("{:?}", r.v_model),
                format!("{:?}", r.v_env),
                format!("{:?}", r.gap),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `|V(π; R, model) − V(π; R, env)|` for every sparse reward and policy.
pub fn model_eval_gap(
    env: &LowRankMdp,
    model: &LowRankMdp,
    rewards: &[RewardFunction],
    policies: &[Policy],
    quad_g: usize,
) -> Result<EvalGap> {
    if let Some(i) = rewards.iter().position(|r| !r.sparse) {
        return Err(Error::domain(format!("reward {i} is not sparse")));
    }
    let mut table = Vec::with_capacity(rewards.len() * policies.len());
    for (ri, r) in rewards.iter().enumerate() {
        for (pi, p) in policies.iter().enumerate() {
            let v_model = value_exact(model, p, r, quad_g)?;
            let v_env = value_exact(env, p, r, quad_g)?;
            table.push(GapRow {
                reward: ri,
                policy: pi,
                v_model,
                v_env,
                gap: (v_model - v_env).abs(),
            });
        }
    }
    let max_gap = table.iter().map(|r| r.gap).fold(0.0, f64::max);
    Ok(EvalGap { max_gap, table })
}

/// Seeded single-step rewards `offset + amplitude·Π(1+cos π(a−phase))/2` with values in `[0,1]`.
pub fn sparse_reward_family(env: &LowRankMdp, count: usize, seed: u64) -> Result<Vec<RewardFunction>> {
    use rand::Rng;
    let mut rng = rng::stream(seed, 0x2E3A);
    (0..count)
        .map(|i| {
            let step = i % env.horizon;
            let shapes = (0..env.n_states)
                .map(|_| {
                    let offset = 0.5 * rng.random::<f64>();
                    RewardShape::Cosine {
                        offset,
                        amplitude: (1.0 - offset) * rng.random::<f64>(),
                        phase: (0..env.m).map(|_| rng.random::<f64>()).collect(),
                    }
                })
                .collect();
            RewardFunction::single_step(env.horizon, env.m, step, shapes)
        })
        .collect()
}

/// Evaluation policies: random grid policies with bounded density, then
/// smoothed random deterministic policies.
pub fn evaluation_policies(
    env: &LowRankMdp,
    n_grid: usize,
    max_density: f64,
    g: usize,
    n_smoothed: usize,
    k: f64,
    seed: u64,
) -> Result<Vec<Policy>> {
    let mut rng = rng::stream(seed, 0xE7A1);
    let mut out = Vec::with_capacity(n_grid + n_smoothed);
    for _ in 0..n_grid {
        out.push(Policy::GridMixture(GridPolicy::random(
            env.horizon,
            env.n_states,
            env.m,
            g,
            max_density,
            &mut rng,
        )?));
    }
    for _ in 0..n_smoothed {
        let actions: Vec<f64> = (0..env.horizon * env.n_states)
            .flat_map(|_| rng::uniform_action(&mut rng, env.m))
            .collect();
        let base = DeterministicPolicy::new(env.horizon, env.n_states, env.m, actions)?;
        out.push(smooth_policy(Policy::Deterministic(base), k)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_hypothesis_class, make_smooth_lowrank_mdp, EnvConfig};
    use crate::mdp::{FeatureMap, StateEmbedding};
    use crate::smoothness::SmoothnessProfile;

    fn profile() -> SmoothnessProfile {
        SmoothnessProfile {
            m: 1,
            alpha_e: 1.0,
            l_e: 1.0,
            alpha_t: 1.0,
            l_t: 1.0,
            alpha_r: 1.0,
            l_r: 1.0,
        }
    }

    fn setup(decoys: usize, seed: u64) -> (LowRankMdp, HypothesisClass) {
        let cfg = EnvConfig {
            n_phi_decoys: decoys,
            n_psi_decoys: decoys,
            decoy_scale: 0.5,
            l_target: 2.0,
            ..EnvConfig::new(3, 2, 1, 3, seed)
        };
        let env = make_smooth_lowrank_mdp(&cfg).unwrap();
        let class = make_hypothesis_class(&env, &cfg).unwrap();
        (env, class)
    }

    #[test]
    fn truth_only_class_recovers_truth() {
        let (env, class) = setup(0, 7);
        let hp = HyperParams::practical(20, 1, 0.5, 4.0, &profile(), 3);
        let out = run_flambe(&env, &class, &hp, &PlannerConfig::new(0.5, 16), 1).unwrap();
        assert_eq!(out.model.model, env);
        assert_eq!(out.diagnostics.model_error, vec![0.0]);
    }

    #[test]
    fn zero_samples_rejected() {
        let (env, class) = setup(0, 7);
        let hp = HyperParams::practical(0, 1, 0.5, 4.0, &profile(), 3);
        assert!(run_flambe(&env, &class, &hp, &PlannerConfig::new(0.5, 16), 1).is_err());
    }

    #[test]
    fn datasets_grow_by_n_and_exploration_is_valid() {
        let (env, class) = setup(2, 3);
        let hp = HyperParams::practical(50, 2, 0.5, 4.0, &profile(), 3);
        let out = run_flambe(&env, &class, &hp, &PlannerConfig::new(0.5, 16), 9).unwrap();
        assert_eq!(out.model.dataset_sizes, vec![100; 3]);
        assert_eq!(out.diagnostics.records.len(), 6);
        out.exploration.validate(3, 3, 1).unwrap();
        for (_, comp) in out.exploration.components() {
            let Policy::UniformFrom { step, .. } = comp else {
                panic!("exploration component is not uniform from a step");
            };
            for h in step..3 {
                assert_eq!(comp.density(h, 0, &[0.3]).unwrap(), 1.0);
            }
        }
        let mut buf = Vec::new();
        out.diagnostics.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 7);
    }

    #[test]
    fn gap_of_truth_is_zero() {
        let (env, _) = setup(0, 2);
        let rewards = sparse_reward_family(&env, 3, 1).unwrap();
        let pols = evaluation_policies(&env, 2, 4.0, 8, 2, 16.0, 1).unwrap();
        let gap = model_eval_gap(&env, &env, &rewards, &pols, 16).unwrap();
        assert_eq!(gap.max_gap, 0.0);
        assert_eq!(gap.table.len(), 12);
    }

    #[test]
    fn non_sparse_reward_rejected() {
        let (env, _) = setup(0, 2);
        let dense = RewardFunction::new(3, 3, 1, vec![RewardShape::Constant { value: 0.2 }; 9]).unwrap();
        assert!(model_eval_gap(&env, &env, &[dense], &[Policy::UniformRandom], 8).is_err());
    }

    #[test]
    fn swapped_rows_gap_by_hand() {
        // two states, H = 2; step 0 moves s=0 → 0 and s=1 → 1 in truth, swapped in the model
        let phi = FeatureMap::constant(2, 1, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let swapped = FeatureMap::constant(2, 1, &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let psi = StateEmbedding::from_components(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let rho = vec![0.25, 0.75];
        let env = LowRankMdp::new(rho.clone(), vec![phi.clone(), phi.clone()], vec![psi.clone(), psi.clone()]).unwrap();
        let model = LowRankMdp::new(rho, vec![swapped, phi], vec![psi.clone(), psi]).unwrap();
        let r = RewardFunction::single_step(
            2,
            1,
            1,
            vec![RewardShape::Constant { value: 1.0 }, RewardShape::Constant { value: 0.0 }],
        )
        .unwrap();
        // truth reaches state 0 w.p. 0.25, the model w.p. 0.75
        let gap = model_eval_gap(&env, &model, &[r], &[Policy::UniformRandom], 4).unwrap();
        assert!((gap.max_gap - 0.5).abs() < 1e-15);
    }
}
