//! Time-indexed action distributions over `[0,1]^m`.
//!
//! `FiniteMixture` mixes at the trajectory level: one component is drawn at
//! the start of an episode and followed throughout. Every other variant is
//! Markov, i.e. a per-(step, state) action distribution.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{check_action, ActionGrid};
use crate::rng::categorical;

/// A quadrature rule: weighted action nodes.
pub type ActionRule = Vec<(f64, Vec<f64>)>;

/// Piecewise-constant density over a `g^m` action grid, per (step, state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPolicy {
    pub horizon: usize,
    pub n_states: usize,
    pub m: usize,
    pub g: usize,
    /// `probs[((h * n_states) + s) * g^m + cell]`.
    pub probs: Vec<f64>,
}

impl GridPolicy {
    pub fn new(horizon: usize, n_states: usize, m: usize, g: usize, probs: Vec<f64>) -> Result<Self> {
        let p = Self {
            horizon,
            n_states,
            m,
            g,
            probs,
        };
        p.validate()?;
        Ok(p)
    }

    /// Uniform over the grid; equivalent in law to the uniform-random policy.
    pub fn uniform(horizon: usize, n_states: usize, m: usize, g: usize) -> Result<Self> {
        let cells = ActionGrid::new(m, g)?.n_cells();
        Self::new(
            horizon,
            n_states,
            m,
            g,
            vec![1.0 / cells as f64; horizon * n_states * cells],
        )
    }

    /// Random cell probabilities with every density value at most `max_density`.
    pub fn random<R: Rng + ?Sized>(
        horizon: usize,
        n_states: usize,
        m: usize,
        g: usize,
        max_density: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let cells = ActionGrid::new(m, g)?.n_cells();
        let cap = max_density / cells as f64;
        if cap * (cells as f64) < 1.0 - 1e-12 {
            return Err(Error::domain("max_density below 1 admits no distribution"));
        }
        let mut probs = Vec::with_capacity(horizon * n_states * cells);
        for _ in 0..horizon * n_states {
            probs.extend(capped_random_simplex(cells, cap, rng));
        }
        Self::new(horizon, n_states, m, g, probs)
    }

    pub fn grid(&self) -> ActionGrid {
        ActionGrid { m: self.m, g: self.g }
    }

    pub fn cell_probs(&self, h: usize, s: usize) -> &[f64] {
        let cells = self.grid().n_cells();
        let start = (h * self.n_states + s) * cells;
        &self.probs[start..start + cells]
    }

    pub fn validate(&self) -> Result<()> {
        let grid = ActionGrid::new(self.m, self.g)?;
        let cells = grid.n_cells();
        if self.probs.len() != self.horizon * self.n_states * cells {
            return Err(Error::config("grid policy table has the wrong length"));
        }
        for h in 0..self.horizon {
            for s in 0..self.n_states {
                let p = self.cell_probs(h, s);
                if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::domain(format!("negative cell probability at ({h},{s})")));
                }
                let total: f64 = p.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::domain(format!(
                        "cell probabilities at ({h},{s}) sum to {total}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest density value `p·g^m`.
    pub fn max_density(&self) -> f64 {
        let cells = self.grid().n_cells() as f64;
        self.probs.iter().fold(0.0f64, |acc, &p| acc.max(p * cells))
    }
}

/// Random point of the simplex with every coordinate at most `cap`.
pub fn capped_random_simplex<R: Rng + ?Sized>(n: usize, cap: f64, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    // water-fill: clip at the cap, spread the excess over unclipped entries
    for _ in 0..n {
        let excess: f64 = w.iter().map(|&x| (x - cap).max(0.0)).sum();
        if excess <= 1e-15 {
            break;
        }
        let free: f64 = w.iter().filter(|&&x| x < cap).sum();
        for x in w.iter_mut() {
            if *x >= cap {
                *x = cap;
            } else {
                *x += excess * *x / free;
            }
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// One action per (step, state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicPolicy {
    pub horizon: usize,
    pub n_states: usize,
    pub m: usize,
    /// `actions[((h * n_states) + s) * m + j]`.
    pub actions: Vec<f64>,
}

impl DeterministicPolicy {
    pub fn new(horizon: usize, n_states: usize, m: usize, actions: Vec<f64>) -> Result<Self> {
        let p = Self {
            horizon,
            n_states,
            m,
            actions,
        };
        p.validate()?;
        Ok(p)
    }

    /// The same action everywhere.
    pub fn constant(horizon: usize, n_states: usize, action: &[f64]) -> Result<Self> {
        let m = action.len();
        Self::new(horizon, n_states, m, action.repeat(horizon * n_states))
    }

    pub fn action(&self, h: usize, s: usize) -> &[f64] {
        let start = (h * self.n_states + s) * self.m;
        &self.actions[start..start + self.m]
    }

    pub fn set_action(&mut self, h: usize, s: usize, a: &[f64]) {
        let start = (h * self.n_states + s) * self.m;
        self.actions[start..start + self.m].copy_from_slice(a);
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.actions.len() != self.horizon * self.n_states * self.m {
            return Err(Error::config("deterministic policy table has the wrong length"));
        }
        for chunk in self.actions.chunks(self.m) {
            check_action(chunk, self.m)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub policy: Policy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// Uniform actions on `[0,1]^m` at every step.
    UniformRandom,
    GridMixture(GridPolicy),
    Deterministic(DeterministicPolicy),
    /// Base action `a′` followed by a uniform draw from `B_∞(a′, K^{-1/m}/2) ∩ [0,1]^m`.
    Smoothed { base: Box<Policy>, k: f64 },
    /// Follows `base` before `step` and takes uniform actions from `step` on.
    UniformFrom { base: Box<Policy>, step: usize },
    FiniteMixture { components: Vec<MixtureComponent> },
}

impl Policy {
    /// Uniform trajectory-level mixture.
    pub fn uniform_mixture(policies: Vec<Policy>) -> Result<Self> {
        if policies.is_empty() {
            return Err(Error::domain("mixture needs at least one component"));
        }
        let w = 1.0 / policies.len() as f64;
        Ok(Policy::FiniteMixture {
            components: policies
                .into_iter()
                .map(|policy| MixtureComponent { weight: w, policy })
                .collect(),
        })
    }

    pub fn is_markov(&self) -> bool {
        match self {
            Policy::FiniteMixture { .. } => false,
            Policy::Smoothed { base, .. } | Policy::UniformFrom { base, .. } => base.is_markov(),
            _ => true,
        }
    }

    /// Trajectory-level decomposition into weighted Markov policies.
    pub fn components(&self) -> Vec<(f64, Policy)> {
        match self {
            Policy::FiniteMixture { components } => components
                .iter()
                .flat_map(|c| {
                    c.policy
                        .components()
                        .into_iter()
                        .map(move |(w, p)| (w * c.weight, p))
                })
                .collect(),
            Policy::Smoothed { base, k } if !base.is_markov() => base
                .components()
                .into_iter()
                .map(|(w, p)| {
                    (
                        w,
                        Policy::Smoothed {
                            base: Box::new(p),
                            k: *k,
                        },
                    )
                })
                .collect(),
            Policy::UniformFrom { base, step } if !base.is_markov() => base
                .components()
                .into_iter()
                .map(|(w, p)| {
                    (
                        w,
                        Policy::UniformFrom {
                            base: Box::new(p),
                            step: *step,
                        },
                    )
                })
                .collect(),
            other => vec![(1.0, other.clone())],
        }
    }

    /// Checks tables against the model shape.
    pub fn validate(&self, horizon: usize, n_states: usize, m: usize) -> Result<()> {
        match self {
            Policy::UniformRandom => Ok(()),
            Policy::GridMixture(p) => {
                p.validate()?;
                if p.horizon != horizon || p.n_states != n_states || p.m != m {
                    return Err(Error::config("grid policy shape does not match the model"));
                }
                Ok(())
            }
            Policy::Deterministic(p) => {
                p.validate()?;
                if p.horizon != horizon || p.n_states != n_states || p.m != m {
                    return Err(Error::config(
                        "deterministic policy shape does not match the model",
                    ));
                }
                Ok(())
            }
            Policy::Smoothed { base, k } => {
                if !(*k >= 1.0) || !k.is_finite() {
                    return Err(Error::domain(format!("smoothing width K = {k} must be ≥ 1")));
                }
                base.validate(horizon, n_states, m)
            }
            Policy::UniformFrom { base, .. } => base.validate(horizon, n_states, m),
            Policy::FiniteMixture { components } => {
                if components.is_empty() {
                    return Err(Error::domain("empty mixture"));
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if components.iter().any(|c| !(c.weight >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::domain(format!("mixture weights sum to {total}")));
                }
                components
                    .iter()
                    .try_for_each(|c| c.policy.validate(horizon, n_states, m))
            }
        }
    }

    /// Quadrature rule for the action distribution at `(h, s)` of a Markov policy.
    ///
    /// Continuous densities are integrated with the midpoint rule on a `quad_g^m`
    /// grid; a grid policy's grid must divide `quad_g`.
    pub fn action_rule(&self, h: usize, s: usize, m: usize, quad_g: usize) -> Result<ActionRule> {
        match self {
            Policy::UniformRandom => {
                let grid = ActionGrid::new(m, quad_g)?;
                let w = 1.0 / grid.n_cells() as f64;
                Ok(grid.midpoints().into_iter().map(|a| (w, a)).collect())
            }
            Policy::GridMixture(p) => {
                if quad_g % p.g != 0 {
                    return Err(Error::config(format!(
                        "quadrature grid {quad_g} does not refine policy grid {}",
                        p.g
                    )));
                }
                let grid = p.grid();
                let sub = quad_g / p.g;
                let sub_w = 1.0 / (sub.pow(m as u32)) as f64;
                let mut rule = Vec::new();
                for (c, &pc) in p.cell_probs(h, s).iter().enumerate() {
                    if pc == 0.0 {
                        continue;
                    }
                    let lo = grid.corner(c);
                    let hi: Vec<f64> = lo.iter().map(|x| x + grid.width()).collect();
                    for a in ActionGrid::box_midpoints(&lo, &hi, sub) {
                        rule.push((pc * sub_w, a));
                    }
                }
                Ok(rule)
            }
            Policy::Deterministic(p) => Ok(vec![(1.0, p.action(h, s).to_vec())]),
            Policy::Smoothed { base, k } => {
                let radius = smoothing_radius(*k, m);
                let inner = quad_g.max(1);
                let inner_w = 1.0 / inner.pow(m as u32) as f64;
                let mut rule = Vec::new();
                for (w, center) in base.action_rule(h, s, m, quad_g)? {
                    let (lo, hi) = clipped_box(&center, radius);
                    for a in ActionGrid::box_midpoints(&lo, &hi, inner) {
                        rule.push((w * inner_w, a));
                    }
                }
                Ok(rule)
            }
            Policy::UniformFrom { base, step } => {
                if h >= *step {
                    Policy::UniformRandom.action_rule(h, s, m, quad_g)
                } else {
                    base.action_rule(h, s, m, quad_g)
                }
            }
            Policy::FiniteMixture { .. } => Err(Error::domain(
                "a trajectory-level mixture has no per-state action rule; use components()",
            )),
        }
    }

    /// Draws an action at `(h, s)` from a Markov policy.
    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        h: usize,
        s: usize,
        m: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        match self {
            Policy::UniformRandom => Ok(crate::rng::uniform_action(rng, m)),
            Policy::GridMixture(p) => {
                let grid = p.grid();
                let c = categorical(rng, p.cell_probs(h, s));
                let lo = grid.corner(c);
                Ok(lo
                    .into_iter()
                    .map(|x| (x + rng.random::<f64>() * grid.width()).min(1.0))
                    .collect())
            }
            Policy::Deterministic(p) => Ok(p.action(h, s).to_vec()),
            Policy::Smoothed { base, k } => {
                let center = base.sample_action(h, s, m, rng)?;
                let (lo, hi) = clipped_box(&center, smoothing_radius(*k, m));
                Ok(lo
                    .iter()
                    .zip(&hi)
                    .map(|(l, u)| l + rng.random::<f64>() * (u - l))
                    .collect())
            }
            Policy::UniformFrom { base, step } => {
                if h >= *step {
                    Ok(crate::rng::uniform_action(rng, m))
                } else {
                    base.sample_action(h, s, m, rng)
                }
            }
            Policy::FiniteMixture { .. } => Err(Error::domain(
                "sample a component first; mixtures are trajectory-level",
            )),
        }
    }

    /// Upper bound on the action density over all (h, s, a); infinite for point masses.
    ///
    /// Exact for grid, uniform and smoothed-deterministic policies.
    pub fn max_density(&self, m: usize) -> f64 {
        match self {
            Policy::UniformRandom => 1.0,
            Policy::GridMixture(p) => p.max_density(),
            Policy::Deterministic(_) => f64::INFINITY,
            Policy::Smoothed { base, k } => {
                let r = smoothing_radius(*k, m);
                match base.as_ref() {
                    Policy::Deterministic(p) => p
                        .actions
                        .chunks(p.m)
                        .map(|a| {
                            let (lo, hi) = clipped_box(a, r);
                            1.0 / lo.iter().zip(&hi).map(|(l, u)| u - l).product::<f64>()
                        })
                        .fold(0.0, f64::max),
                    // the kernel peak is 1/r^m, and each axis integral of 1/len is at most 2
                    other => {
                        let scale = 2f64.powi(m as i32);
                        (1.0 / r.powi(m as i32)).min(scale * other.max_density(m))
                    }
                }
            }
            Policy::UniformFrom { base, .. } => base.max_density(m).max(1.0),
            Policy::FiniteMixture { components } => components
                .iter()
                .map(|c| c.policy.max_density(m))
                .fold(0.0, f64::max),
        }
    }

    /// Action density at `(h, s, a)` for policies that have one.
    pub fn density(&self, h: usize, s: usize, a: &[f64]) -> Result<f64> {
        let m = a.len();
        check_action(a, m)?;
        match self {
            Policy::UniformRandom => Ok(1.0),
            Policy::GridMixture(p) => {
                let grid = p.grid();
                Ok(p.cell_probs(h, s)[grid.cell_of(a)] * grid.n_cells() as f64)
            }
            Policy::Deterministic(_) => Err(Error::domain("deterministic policies have no density")),
            Policy::Smoothed { base, k } => smoothed_density(base, *k, h, s, a),
            Policy::UniformFrom { base, step } => {
                if h >= *step {
                    Ok(1.0)
                } else {
                    base.density(h, s, a)
                }
            }
            Policy::FiniteMixture { .. } => {
                Err(Error::domain("mixture densities depend on the history"))
            }
        }
    }
}

/// Half-width `K^{-1/m}/2` of the smoothing box.
pub fn smoothing_radius(k: f64, m: usize) -> f64 {
    0.5 * k.powf(-1.0 / m as f64)
}

/// `B_∞(center, r) ∩ [0,1]^m` as per-axis intervals.
pub fn clipped_box(center: &[f64], r: f64) -> (Vec<f64>, Vec<f64>) {
    let lo = center.iter().map(|&c| (c - r).max(0.0)).collect();
    let hi = center.iter().map(|&c| (c + r).min(1.0)).collect();
    (lo, hi)
}

/// Antiderivative of `1/len(x)` on `[0,1]`, where `len(x)` is the length of
/// `[x-r, x+r] ∩ [0,1]` and `0 < r ≤ 1/2`.
fn inv_len_antiderivative(x: f64, r: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if x <= r {
        (x + r).ln() - r.ln()
    } else if x <= 1.0 - r {
        std::f64::consts::LN_2 + (x - r) / (2.0 * r)
    } else {
        let mid = std::f64::consts::LN_2 + (1.0 - 2.0 * r) / (2.0 * r);
        mid - (1.0 - x + r).ln() + (2.0 * r).ln()
    }
}

fn inv_len_integral(lo: f64, hi: f64, r: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    inv_len_antiderivative(hi, r) - inv_len_antiderivative(lo, r)
}

fn smoothed_density(base: &Policy, k: f64, h: usize, s: usize, a: &[f64]) -> Result<f64> {
    let m = a.len();
    let r = smoothing_radius(k, m);
    // base centers a′ that reach a: |a_j - a′_j| ≤ r
    let reach: Vec<(f64, f64)> = a
        .iter()
        .map(|&x| ((x - r).max(0.0), (x + r).min(1.0)))
        .collect();
    match base {
        Policy::Deterministic(p) => {
            let center = p.action(h, s);
            let (lo, hi) = clipped_box(center, r);
            let inside = a
                .iter()
                .zip(center)
                .all(|(x, c)| (x - c).abs() <= r + 1e-15);
            Ok(if inside {
                1.0 / lo.iter().zip(&hi).map(|(l, u)| u - l).product::<f64>()
            } else {
                0.0
            })
        }
        Policy::UniformRandom => Ok(reach
            .iter()
            .map(|&(lo, hi)| inv_len_integral(lo, hi, r))
            .product()),
        Policy::GridMixture(p) => {
            let grid = p.grid();
            let w = grid.width();
            let mut total = 0.0;
            for (c, &pc) in p.cell_probs(h, s).iter().enumerate() {
                if pc == 0.0 {
                    continue;
                }
                let corner = grid.corner(c);
                let mut prod = pc * grid.n_cells() as f64;
                for (j, &(lo, hi)) in reach.iter().enumerate() {
                    prod *= inv_len_integral(lo.max(corner[j]), hi.min(corner[j] + w), r);
                    if prod == 0.0 {
                        break;
                    }
                }
                total += prod;
            }
            Ok(total)
        }
        Policy::UniformFrom { base, step } => {
            if h >= *step {
                smoothed_density(&Policy::UniformRandom, k, h, s, a)
            } else {
                smoothed_density(base, k, h, s, a)
            }
        }
        _ => Err(Error::domain(
            "density of a smoothed policy is available for deterministic, uniform and grid bases",
        )),
    }
}
