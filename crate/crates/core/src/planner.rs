//! Elliptical planner: builds a policy mixture whose feature second moment
//! covers every direction reachable under a model.
//!
//! The inner maximization is exact backward DP over grid-midpoint actions.
//! Planning only reads the model passed in; it never touches a true environment.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::env::feature_holder_constant;
use crate::error::{Error, Result};
use crate::grid::ActionGrid;
use crate::mdp::policy::{DeterministicPolicy, GridPolicy, Policy};
use crate::mdp::value::{dot, markov_occupancy};
use crate::mdp::LowRankMdp;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    GridSearch,
    /// Coordinate ascent on non-terminal steps when features are concave.
    Concave,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    pub beta: f64,
    /// Grid resolution per action axis.
    pub g: usize,
    #[serde(default)]
    pub optimizer: Optimizer,
    /// Random grid policies checked after halting.
    #[serde(default = "default_probes")]
    pub spot_checks: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_probes() -> usize {
    32
}

impl PlannerConfig {
    pub fn new(beta: f64, g: usize) -> Self {
        Self {
            beta,
            g,
            optimizer: Optimizer::GridSearch,
            spot_checks: 32,
            seed: 0,
        }
    }
}

/// `ceil(8·d·ln(1 + 8/β)/β)`.
pub fn iteration_bound(d: usize, beta: f64) -> usize {
    (8.0 * d as f64 * (1.0 + 8.0 / beta).ln() / beta).ceil() as usize
}

/// Maximizer of a per-step reward by backward DP over grid midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution {
    pub policy: DeterministicPolicy,
    /// `V_0(s)` under the model.
    pub values: Vec<f64>,
    /// `ρᵀ V_0`.
    pub objective: f64,
}

/// Backward DP over steps `0..=last` maximizing `Σ_h reward(h, s, a)`.
///
/// Ties go to the lowest lexicographic cell. Actions after `last` are the
/// midpoint of cell 0; they do not affect the objective.
pub fn grid_dp(
    model: &LowRankMdp,
    last: usize,
    grid: &ActionGrid,
    reward: impl Fn(usize, usize, &[f64], &[f64]) -> f64,
) -> Result<DpSolution> {
    dp_inner(model, last, grid, &reward, false).map(|(sol, _)| sol)
}

/// Reward-maximizing deterministic policy over grid actions, by exact DP under `model`.
pub fn greedy_policy(
    model: &LowRankMdp,
    reward: &crate::mdp::RewardFunction,
    grid: &ActionGrid,
) -> Result<DpSolution> {
    if reward.horizon != model.horizon || reward.n_states != model.n_states || reward.m != model.m {
        return Err(Error::config("reward shape does not match the model"));
    }
    grid_dp(model, model.horizon - 1, grid, |h, s, a, _| reward.eval(h, s, a))
}

fn dp_inner(
    model: &LowRankMdp,
    last: usize,
    grid: &ActionGrid,
    reward: &dyn Fn(usize, usize, &[f64], &[f64]) -> f64,
    ascend: bool,
) -> Result<(DpSolution, bool)> {
    if last >= model.horizon {
        return Err(Error::domain(format!(
            "step {last} outside horizon {}",
            model.horizon
        )));
    }
    if grid.m != model.m {
        return Err(Error::config("planning grid dimension differs from the model"));
    }
    let n = model.n_states;
    let mids = grid.midpoints();
    let mut actions = mids[0].repeat(model.horizon * n);
    let mut next = vec![0.0; n];
    let mut density = vec![0.0; n];
    let mut fell_back = false;
    for h in (0..=last).rev() {
        let mut cur = vec![0.0; n];
        let w = model.psi[h].pullback(&next);
        let concave_ok = ascend && h < last && model.phi[h].is_concave() && w.iter().all(|&x| x >= 0.0);
        fell_back |= ascend && h < last && !concave_ok;
        for s in 0..n {
            let q = |a: &[f64], density: &mut [f64]| -> Result<f64> {
                let phi = model.features(h, s, a);
                let cont = if h < last {
                    model.density_from_features(h, s, a, &phi, density)?;
                    dot(density, &next)
                } else {
                    0.0
                };
                Ok(reward(h, s, a, &phi) + cont)
            };
            let mut best = f64::NEG_INFINITY;
            let mut best_a = mids[0].clone();
            for a in &mids {
                let v = q(a, &mut density)?;
                if v > best {
                    best = v;
                    best_a = a.clone();
                }
            }
            if concave_ok {
                let (a, v) = coordinate_ascent(best_a.clone(), best, |a| {
                    q(a, &mut vec![0.0; n]).unwrap_or(f64::NEG_INFINITY)
                });
                if v > best {
                    best = v;
                    best_a = a;
                }
            }
            cur[s] = best;
            let start = (h * n + s) * model.m;
            actions[start..start + model.m].copy_from_slice(&best_a);
        }
        next = cur;
    }
    let policy = DeterministicPolicy::new(model.horizon, n, model.m, actions)?;
    let objective = dot(&model.rho, &next);
    Ok((
        DpSolution {
            policy,
            values: next,
            objective,
        },
        fell_back,
    ))
}

/// Cyclic golden-section search over each coordinate of `[0,1]^m`.
fn coordinate_ascent(mut a: Vec<f64>, mut best: f64, f: impl Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _sweep in 0..4 {
        for j in 0..a.len() {
            let at = |x: f64, a: &[f64]| {
                let mut b = a.to_vec();
                b[j] = x;
                f(&b)
            };
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let mut x1 = hi - inv_phi * (hi - lo);
            let mut x2 = lo + inv_phi * (hi - lo);
            let (mut f1, mut f2) = (at(x1, &a), at(x2, &a));
            for _ in 0..60 {
                if f1 < f2 {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + inv_phi * (hi - lo);
                    f2 = at(x2, &a);
                } else {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - inv_phi * (hi - lo);
                    f1 = at(x1, &a);
                }
            }
            for x in [0.5 * (lo + hi), 0.0, 1.0] {
                let v = at(x, &a);
                if v > best {
                    best = v;
                    a[j] = x;
                }
            }
        }
    }
    (a, best)
}

fn check_symmetric(m: &DMatrix<f64>, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::domain(format!("matrix is {}×{}, expected {d}×{d}", m.nrows(), m.ncols())));
    }
    for i in 0..d {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 {
                return Err(Error::domain(format!(
                    "matrix is not symmetric at ({i},{j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

fn quad_form(a: &DMatrix<f64>, x: &[f64]) -> f64 {
    let d = x.len();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += x[i] * a[(i, j)] * x[j];
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSolution {
    pub policy: DeterministicPolicy,
    pub objective: f64,
    pub warning: Option<String>,
}

/// Maximizes `E[φ_h̃ᵀ Σ⁻¹ φ_h̃]` over grid-action policies under `model`.
pub fn optimize_elliptical_objective(
    model: &LowRankMdp,
    h_tilde: usize,
    sigma_inv: &DMatrix<f64>,
    grid: &ActionGrid,
    optimizer: Optimizer,
) -> Result<ObjectiveSolution> {
    check_symmetric(sigma_inv, model.d)?;
    let reward = |h: usize, _s: usize, _a: &[f64], phi: &[f64]| {
        if h == h_tilde {
            quad_form(sigma_inv, phi)
        } else {
            0.0
        }
    };
    let ascend = optimizer == Optimizer::Concave;
    let (sol, fell_back) = dp_inner(model, h_tilde, grid, &reward, ascend)?;
    Ok(ObjectiveSolution {
        policy: sol.policy,
        objective: sol.objective,
        warning: fell_back.then(|| {
            "concave optimizer not certified at some step; used grid search there".to_string()
        }),
    })
}

/// `E[φ_h̃ φ_h̃ᵀ]` under the model's occupancy at `h̃`, mixture-averaged.
pub fn expected_feature_covariance(
    model: &LowRankMdp,
    policy: &Policy,
    h_tilde: usize,
    quad_g: usize,
) -> Result<DMatrix<f64>> {
    if h_tilde >= model.horizon {
        return Err(Error::domain(format!("step {h_tilde} outside horizon {}", model.horizon)));
    }
    policy.validate(model.horizon, model.n_states, model.m)?;
    let d = model.d;
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for (w, comp) in policy.components() {
        let occ = markov_occupancy(model, &comp, quad_g, h_tilde)?;
        for (s, &ds) in occ[h_tilde].iter().enumerate() {
            if ds == 0.0 {
                continue;
            }
            for (wa, a) in comp.action_rule(h_tilde, s, model.m, quad_g)? {
                let phi = model.features(h_tilde, s, &a);
                let c = w * ds * wa;
                for i in 0..d {
                    for j in 0..d {
                        cov[(i, j)] += c * phi[i] * phi[j];
                    }
                }
            }
        }
    }
    Ok(cov)
}

/// `E_π[φ_h̃ᵀ A φ_h̃] = tr(A · E[φφᵀ])`.
pub fn policy_objective(
    model: &LowRankMdp,
    policy: &Policy,
    h_tilde: usize,
    a: &DMatrix<f64>,
    quad_g: usize,
) -> Result<f64> {
    let cov = expected_feature_covariance(model, policy, h_tilde, quad_g)?;
    Ok(a.component_mul(&cov).sum())
}

/// Bound on the per-cell variation of the planning objective:
/// `2·L_Φ(h̃) + Σ_{h<h̃} √d·L_Φ(h)`, with `L_Φ` measured on `grid`.
pub fn objective_lipschitz(model: &LowRankMdp, h_tilde: usize, grid: &ActionGrid) -> f64 {
    let lip = |h: usize| feature_holder_constant(&model.phi[h], grid, 1.0, 1);
    let sd = (model.d as f64).sqrt();
    2.0 * lip(h_tilde) + (0..h_tilde).map(|h| sd * lip(h)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub objective: f64,
    pub log_det: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub probes: usize,
    /// Largest `E[φᵀ Σ_T⁻¹ φ]` over the probes; must be ≤ β.
    pub max_objective: f64,
    /// Largest `E[φᵀ (Σ_ρ + I/T)⁻¹ φ]`; must be ≤ T·β.
    pub max_mixture_objective: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    /// `unif{π_τ}_{τ<t}`, or the uniform-random policy when the first objective already halts.
    pub mixture: Policy,
    pub policies: Vec<DeterministicPolicy>,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
    pub sigma: DMatrix<f64>,
    pub degenerate_mixture: bool,
    pub uncertified_slack: bool,
    /// `L_obj·(√m/G)` for the planning grid.
    pub slack_bound: f64,
    pub warnings: Vec<String>,
    pub spot_check: SpotCheck,
}

impl PlanResult {
    /// Writes `t,objective,log_det`.
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "objective", "log_det"])?;
        for r in &self.trace {
            wtr.write_record([r.t.to_string(), format!("{:?}", r.objective), format!("{:?}", r.log_det)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn cholesky(sigma: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(sigma.clone())
        .ok_or_else(|| Error::Invariant("Σ lost positive definiteness".into()))
}

fn log_det(ch: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * ch.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>()
}

/// Runs the elliptical planner for target step `h̃` under `model`.
pub fn elliptical_plan(model: &LowRankMdp, h_tilde: usize, cfg: &PlannerConfig) -> Result<PlanResult> {
    if !(cfg.beta > 0.0 && cfg.beta <= 8.0) {
        return Err(Error::domain(format!("β = {} must lie in (0, 8]", cfg.beta)));
    }
    let grid = ActionGrid::new(model.m, cfg.g)?;
    let d = model.d;
    let bound = iteration_bound(d, cfg.beta);
    let slack_bound = objective_lipschitz(model, h_tilde, &grid) * (model.m as f64).sqrt() / cfg.g as f64;
    let uncertified_slack = slack_bound >= cfg.beta / 2.0;
    let mut warnings = Vec::new();
    if uncertified_slack {
        warnings.push(format!(
            "grid G = {} leaves per-cell objective variation {slack_bound:.4} ≥ β/2",
            cfg.g
        ));
    }

    let mut sigma = DMatrix::<f64>::identity(d, d);
    let mut policies = Vec::new();
    let mut trace = Vec::new();
    for t in 1..=bound {
        let ch = cholesky(&sigma)?;
        let inv = ch.inverse();
        let inv = (&inv + inv.transpose()) * 0.5;
        let sol = optimize_elliptical_objective(model, h_tilde, &inv, &grid, cfg.optimizer)?;
        if let Some(w) = sol.warning {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        if sol.objective <= cfg.beta / 2.0 {
            trace.push(TraceRow {
                t,
                objective: sol.objective,
                log_det: log_det(&ch),
            });
            let degenerate = policies.is_empty();
            let mixture = if degenerate {
                Policy::UniformRandom
            } else {
                Policy::uniform_mixture(
                    policies.iter().cloned().map(Policy::Deterministic).collect(),
                )?
            };
            let spot_check = spot_check(model, h_tilde, &sigma, policies.len().max(1), cfg)?;
            return Ok(PlanResult {
                mixture,
                policies,
                iterations: t,
                trace,
                sigma,
                degenerate_mixture: degenerate,
                uncertified_slack,
                slack_bound,
                warnings,
                spot_check,
            });
        }
        let pol = Policy::Deterministic(sol.policy.clone());
        let cov = expected_feature_covariance(model, &pol, h_tilde, cfg.g)?;
        sigma += cov;
        trace.push(TraceRow {
            t,
            objective: sol.objective,
            log_det: log_det(&cholesky(&sigma)?),
        });
        policies.push(sol.policy);
    }
    Err(Error::IterationBound { bound })
}

fn spot_check(
    model: &LowRankMdp,
    h_tilde: usize,
    sigma: &DMatrix<f64>,
    t: usize,
    cfg: &PlannerConfig,
) -> Result<SpotCheck> {
    let inv = cholesky(sigma)?.inverse();
    let mix = cholesky(&(sigma / t as f64))?.inverse();
    let cells = ActionGrid::new(model.m, cfg.g)?.n_cells() as f64;
    let mut rng = rng::stream(cfg.seed, 0x5107);
    let quad_g = 2 * cfg.g;
    let mut max_objective = 0.0f64;
    let mut max_mixture_objective = 0.0f64;
    for _ in 0..cfg.spot_checks {
        let p = GridPolicy::random(model.horizon, model.n_states, model.m, cfg.g, cells, &mut rng)?;
        let cov = expected_feature_covariance(model, &Policy::GridMixture(p), h_tilde, quad_g)?;
        max_objective = max_objective.max(inv.component_mul(&cov).sum());
        max_mixture_objective = max_mixture_objective.max(mix.component_mul(&cov).sum());
    }
    Ok(SpotCheck {
        probes: cfg.spot_checks,
        max_objective,
        max_mixture_objective,
        holds: max_objective <= cfg.beta && max_mixture_objective <= t as f64 * cfg.beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_smooth_lowrank_mdp, EnvConfig};
    use crate::mdp::{FeatureMap, StateEmbedding};

    fn rank_one(n: usize, horizon: usize) -> LowRankMdp {
        let phi = FeatureMap::constant(n, 1, &vec![vec![1.0]; n]).unwrap();
        let psi = StateEmbedding::from_rows(&vec![vec![1.0 / n as f64]; n]).unwrap();
        LowRankMdp::new(vec![1.0 / n as f64; n], vec![phi; horizon], vec![psi; horizon]).unwrap()
    }

    fn factory(d: usize, horizon: usize, seed: u64) -> LowRankMdp {
        make_smooth_lowrank_mdp(&EnvConfig {
            l_target: 2.0,
            ..EnvConfig::new(3, d, 1, horizon, seed)
        })
        .unwrap()
    }

    #[test]
    fn bound_formula() {
        assert_eq!(iteration_bound(2, 0.5), 91);
        assert_eq!(iteration_bound(1, 0.5), 46);
    }

    #[test]
    fn identity_objective_of_constant_feature_is_one() {
        let mdp = rank_one(2, 2);
        let grid = ActionGrid::new(1, 8).unwrap();
        let sol = optimize_elliptical_objective(&mdp, 1, &DMatrix::identity(1, 1), &grid, Optimizer::GridSearch)
            .unwrap();
        assert_eq!(sol.objective, 1.0);
        let cov = expected_feature_covariance(&mdp, &Policy::UniformRandom, 1, 8).unwrap();
        assert_eq!(cov[(0, 0)], 1.0);
    }

    #[test]
    fn asymmetric_inverse_rejected() {
        let mdp = factory(2, 1, 1);
        let grid = ActionGrid::new(1, 8).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(
            optimize_elliptical_objective(&mdp, 0, &m, &grid, Optimizer::GridSearch),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn constant_vector_covariance() {
        let v = [0.6, 0.4];
        let phi = FeatureMap::constant(2, 1, &[v.to_vec(), v.to_vec()]).unwrap();
        let psi = StateEmbedding::from_components(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let mdp = LowRankMdp::new(vec![0.3, 0.7], vec![phi; 2], vec![psi; 2]).unwrap();
        let cov = expected_feature_covariance(&mdp, &Policy::UniformRandom, 1, 4).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((cov[(i, j)] - v[i] * v[j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_state_step_zero_matches_scan() {
        let cfg = EnvConfig {
            l_target: 3.0,
            ..EnvConfig::new(2, 2, 1, 1, 5)
        };
        let mut mdp = make_smooth_lowrank_mdp(&cfg).unwrap();
        mdp.rho = vec![1.0, 0.0];
        let grid = ActionGrid::new(1, 32).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
        let sol = optimize_elliptical_objective(&mdp, 0, &a, &grid, Optimizer::GridSearch).unwrap();
        let scan = grid
            .midpoints()
            .iter()
            .map(|x| quad_form(&a, &mdp.features(0, 0, x)))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(sol.objective, scan);
    }

    #[test]
    fn dp_matches_sequence_enumeration() {
        let mdp = factory(2, 2, 7);
        let grid = ActionGrid::new(1, 64).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.5, -0.2, -0.2, 0.7]);
        let sol = optimize_elliptical_objective(&mdp, 1, &a, &grid, Optimizer::GridSearch).unwrap();
        // enumerate every (cell at step 0, cell at step 1) choice per state
        let mids = grid.midpoints();
        let n = mdp.n_states;
        let term: Vec<f64> = (0..n)
            .map(|s| {
                mids.iter()
                    .map(|x| quad_form(&a, &mdp.features(1, s, x)))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let mut total = 0.0;
        for s0 in 0..n {
            let mut best = f64::NEG_INFINITY;
            for c0 in &mids {
                let p = mdp.transition_density(0, s0, c0).unwrap();
                let mut v = 0.0;
                for s1 in 0..n {
                    let mut b1 = f64::NEG_INFINITY;
                    for c1 in &mids {
                        b1 = b1.max(quad_form(&a, &mdp.features(1, s1, c1)));
                    }
                    assert_eq!(b1, term[s1]);
                    v += p[s1] * b1;
                }
                best = best.max(v);
            }
            total += mdp.rho[s0] * best;
        }
        assert!((sol.objective - total).abs() < 1e-9);
    }

    #[test]
    fn covariance_matches_monte_carlo() {
        let mdp = factory(2, 2, 7);
        let cov = expected_feature_covariance(&mdp, &Policy::UniformRandom, 1, 256).unwrap();
        let n = 100_000;
        let mut sum = [[0.0; 2]; 2];
        let mut sum_sq = [[0.0; 2]; 2];
        for i in 0..n {
            let traj = crate::mdp::rollout(&mdp, &Policy::UniformRandom, 1000 + i as u64).unwrap();
            let st = &traj.steps[1];
            let phi = mdp.features(1, st.state, &st.action);
            for r in 0..2 {
                for c in 0..2 {
                    let x = phi[r] * phi[c];
                    sum[r][c] += x;
                    sum_sq[r][c] += x * x;
                }
            }
        }
        for r in 0..2 {
            for c in 0..2 {
                let mean = sum[r][c] / n as f64;
                let se = ((sum_sq[r][c] / n as f64 - mean * mean) / n as f64).sqrt();
                assert!((mean - cov[(r, c)]).abs() < 3.0 * se, "({r},{c}) {mean} vs {}", cov[(r, c)]);
            }
        }
        assert!(cov.trace() <= 1.0 + 1e-12);
    }

    #[test]
    fn rank_one_potential_recursion() {
        let mdp = rank_one(2, 1);
        let plan = elliptical_plan(&mdp, 0, &PlannerConfig::new(0.5, 4)).unwrap();
        let objectives: Vec<f64> = plan.trace.iter().map(|r| r.objective).collect();
        let expect = [1.0, 0.5, 1.0 / 3.0, 0.25];
        assert_eq!(objectives.len(), 4);
        assert!(objectives.iter().zip(expect).all(|(x, y)| (x - y).abs() < 1e-12));
        assert_eq!(plan.iterations, 4);
        assert_eq!(plan.policies.len(), 3);
        assert!(!plan.degenerate_mixture);
        assert!(plan.spot_check.holds);
    }

    #[test]
    fn immediate_halt_is_degenerate() {
        let mdp = rank_one(2, 1);
        let plan = elliptical_plan(&mdp, 0, &PlannerConfig::new(4.0, 4)).unwrap();
        assert_eq!(plan.iterations, 1);
        assert!(plan.degenerate_mixture);
        assert_eq!(plan.mixture, Policy::UniformRandom);
    }

    #[test]
    fn factory_plan_respects_bound_and_potential() {
        let mdp = factory(2, 3, 7);
        let plan = elliptical_plan(&mdp, 2, &PlannerConfig::new(0.5, 32)).unwrap();
        assert!(plan.iterations <= 91);
        assert!(plan.spot_check.holds, "{:?}", plan.spot_check);
        for w in plan.trace.windows(2) {
            assert!(w[1].log_det >= w[0].log_det);
        }
        let mut buf = Vec::new();
        plan.write_trace_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,objective,log_det\n"));
    }

    #[test]
    fn concave_optimizer_on_affine_features() {
        let phi = FeatureMap::Affine {
            n_states: 2,
            d: 2,
            m: 1,
            offset: vec![0.4, 0.6, 0.7, 0.3],
            slope: vec![0.3, -0.3, -0.4, 0.4],
        };
        let psi = StateEmbedding::from_components(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let mdp = LowRankMdp::new(vec![0.5, 0.5], vec![phi; 2], vec![psi; 2]).unwrap();
        let grid = ActionGrid::new(1, 8).unwrap();
        let id = DMatrix::identity(2, 2);
        let g = optimize_elliptical_objective(&mdp, 1, &id, &grid, Optimizer::GridSearch).unwrap();
        let c = optimize_elliptical_objective(&mdp, 1, &id, &grid, Optimizer::Concave).unwrap();
        assert!(c.warning.is_none());
        assert!(c.objective >= g.objective - 1e-12);
    }

    #[test]
    fn concave_optimizer_falls_back_on_softplus_features() {
        let mdp = factory(2, 2, 3);
        let grid = ActionGrid::new(1, 8).unwrap();
        let sol = optimize_elliptical_objective(&mdp, 1, &DMatrix::identity(2, 2), &grid, Optimizer::Concave)
            .unwrap();
        assert!(sol.warning.is_some());
    }
}
