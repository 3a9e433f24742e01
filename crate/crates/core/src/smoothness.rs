//! Smoothness verifiers: Hölder-norm estimation on grids, the sup-versus-mean
//! bound for nonnegative smooth functions, and policy smoothing (`π_K`).
//!
//! Every estimate here is computed on a finite grid. Hölder quotients over
//! grid pairs are lower bounds on the true constants; `holds` decisions add
//! the per-cell variation `2·L·(√m/G)^α` as quadrature tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dist2, ActionGrid};
use crate::mdp::policy::{ActionRule, Policy};
use crate::mdp::reward::RewardFunction;
use crate::mdp::value::value_exact;
use crate::mdp::LowRankMdp;

/// Largest per-axis cell offset considered by pairwise Hölder quotients.
pub const HOLDER_REACH: usize = 4;

/// Smoothness constants of an instance; derived exponents are computed on demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessProfile {
    pub m: usize,
    /// Error-functional smoothness.
    pub alpha_e: f64,
    pub l_e: f64,
    /// True-transition TV smoothness, `α_T ∈ (0,1]`.
    pub alpha_t: f64,
    pub l_t: f64,
    /// Reward smoothness, `α_R ∈ (0,1]`.
    pub alpha_r: f64,
    pub l_r: f64,
}

impl SmoothnessProfile {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::domain("m must be positive"));
        }
        if !(self.alpha_e > 0.0 && self.alpha_e.is_finite()) {
            return Err(Error::domain(format!("α_E = {} must be positive", self.alpha_e)));
        }
        for (name, a) in [("α_T", self.alpha_t), ("α_R", self.alpha_r)] {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::domain(format!("{name} = {a} must lie in (0,1]")));
            }
        }
        for (name, l) in [("L_E", self.l_e), ("L_T", self.l_t), ("L_R", self.l_r)] {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::domain(format!("{name} = {l} must be finite and ≥ 0")));
            }
        }
        Ok(())
    }

    /// `τ = m/α_E`.
    pub fn tau(&self) -> f64 {
        self.m as f64 / self.alpha_e
    }

    /// `κ = m/(m+α_E)`.
    pub fn kappa(&self) -> f64 {
        self.m as f64 / (self.m as f64 + self.alpha_e)
    }

    /// `σ = m/min(α_T, α_R)`.
    pub fn sigma(&self) -> f64 {
        self.m as f64 / self.alpha_t.min(self.alpha_r)
    }

    /// `L = max(L_T, L_R)`.
    pub fn l(&self) -> f64 {
        self.l_t.max(self.l_r)
    }

    /// Exponent used by the policy-smoothing bound: `min(α_T, α_R, 1)`.
    pub fn smoothing_alpha(&self) -> f64 {
        self.alpha_t.min(self.alpha_r).min(1.0)
    }
}

/// Real values at the midpoints of a regular action grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: ActionGrid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn sample(grid: ActionGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = grid.midpoints().iter().map(|a| f(a)).collect();
        Self { grid, values }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Midpoint-rule mean over `[0,1]^m`.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Largest `diff(i,k)/‖a_i − a_k‖₂^α` over grid pairs within `reach` cells.
pub fn holder_quotient(
    grid: &ActionGrid,
    alpha: f64,
    reach: usize,
    mut diff: impl FnMut(usize, usize) -> f64,
) -> f64 {
    let mids = grid.midpoints();
    let mut best = 0.0f64;
    grid.for_each_neighbor_pair(reach, |i, k| {
        let q = diff(i, k) / dist2(&mids[i], &mids[k]).powf(alpha);
        if q > best {
            best = q;
        }
    });
    best
}

/// Grid estimate of `‖f‖_{C^α}` for `α ∈ (0,1]`; a lower bound on the true norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    /// `max(quotient, sup |f|)`.
    pub value: f64,
    pub quotient: f64,
    pub sup_abs: f64,
    pub grid_g: usize,
    pub lower_bound: bool,
}

pub fn holder_norm_estimate(f: &GridFunction, alpha: f64) -> Result<HolderEstimate> {
    if f.grid.g < 16 {
        return Err(Error::domain(format!(
            "Hölder estimation needs ≥ 16 points per axis, got {}",
            f.grid.g
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("Hölder exponent {alpha} outside (0,1]")));
    }
    if f.values.len() != f.grid.n_cells() {
        return Err(Error::config("grid function has the wrong number of values"));
    }
    let quotient = holder_quotient(&f.grid, alpha, HOLDER_REACH, |i, k| {
        (f.values[i] - f.values[k]).abs()
    });
    let sup_abs = f.sup_abs();
    Ok(HolderEstimate {
        value: quotient.max(sup_abs),
        quotient,
        sup_abs,
        grid_g: f.grid.g,
        lower_bound: true,
    })
}

/// Per-cell variation allowance `2·L·(√m/G)^α`.
pub fn quadrature_tolerance(l: f64, m: usize, g: usize, alpha: f64) -> f64 {
    2.0 * l * ((m as f64).sqrt() / g as f64).powf(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformBoundReport {
    pub sup: f64,
    pub mean: f64,
    /// `c_cal · L^{m/(m+α)} · mean^{α/(m+α)}`.
    pub bound: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Sup-versus-mean bound for a nonnegative grid function with smoothness constant `l`.
pub fn uniform_bound_check(
    f: &GridFunction,
    alpha: f64,
    l: f64,
    c_cal: f64,
) -> Result<UniformBoundReport> {
    if let Some(v) = f.values.iter().find(|&&v| v < -1e-12) {
        return Err(Error::domain(format!("function takes negative value {v}")));
    }
    if !(alpha > 0.0) || !(l >= 0.0) || !(c_cal > 0.0) {
        return Err(Error::domain("need α > 0, L ≥ 0, c_cal > 0"));
    }
    let m = f.grid.m as f64;
    let sup = f.sup().max(0.0);
    let mean = f.mean().max(0.0);
    let bound = c_cal * l.powf(m / (m + alpha)) * mean.powf(alpha / (m + alpha));
    let tolerance = quadrature_tolerance(l, f.grid.m, f.grid.g, alpha.min(1.0));
    Ok(UniformBoundReport {
        sup,
        mean,
        bound,
        tolerance,
        holds: sup <= bound + tolerance,
    })
}

/// Ratio `sup / (L^{m/(m+α)} mean^{α/(m+α)})`: the smallest `c_cal` that works for `f`.
pub fn required_constant(f: &GridFunction, alpha: f64, l: f64) -> f64 {
    let m = f.grid.m as f64;
    let denom = l.powf(m / (m + alpha)) * f.mean().max(0.0).powf(alpha / (m + alpha));
    if f.sup() <= 0.0 {
        0.0
    } else if denom == 0.0 {
        f64::INFINITY
    } else {
        f.sup() / denom
    }
}

/// Nonnegative test functions with a declared smoothness constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `f ≡ value`.
    Constant { value: f64 },
    /// `height · max(0, r − ‖a − ½‖_∞)^α`, centred in the cube.
    Bump { height: f64, radius: f64, alpha: f64 },
    /// `amplitude · Π_j (1 + cos(2π k a_j))/2`.
    Trig { amplitude: f64, freq: f64 },
}

impl TestFunction {
    pub fn eval(&self, a: &[f64]) -> f64 {
        match self {
            TestFunction::Constant { value } => *value,
            TestFunction::Bump {
                height,
                radius,
                alpha,
            } => {
                let d = a.iter().fold(0.0f64, |acc, x| acc.max((x - 0.5).abs()));
                height * (radius - d).max(0.0).powf(*alpha)
            }
            TestFunction::Trig { amplitude, freq } => {
                amplitude
                    * a.iter()
                        .map(|x| 0.5 * (1.0 + (2.0 * std::f64::consts::PI * freq * x).cos()))
                        .product::<f64>()
            }
        }
    }

    /// Analytic upper bound on `‖f‖_{C^α}` over `[0,1]^m` for `α ∈ (0,1]`.
    pub fn declared_norm(&self, m: usize, alpha: f64) -> f64 {
        let diam = (m as f64).sqrt();
        match self {
            TestFunction::Constant { value } => value.abs(),
            TestFunction::Bump {
                height,
                radius,
                alpha: shape,
            } => {
                let sup = height * radius.powf(*shape);
                // |x^s − y^s| ≤ |x − y|^s, and ‖·‖_∞ is 1-Lipschitz for ‖·‖₂
                let seminorm = if alpha <= *shape {
                    height * (2.0 * radius).powf(shape - alpha)
                } else {
                    f64::INFINITY
                };
                sup.max(seminorm)
            }
            TestFunction::Trig { amplitude, freq } => {
                let lip = amplitude * std::f64::consts::PI * freq * diam;
                let seminorm = lip.powf(alpha) * amplitude.powf(1.0 - alpha);
                amplitude.max(seminorm).max(lip.min(seminorm))
            }
        }
    }
}

/// One row of the sup-versus-mean battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryRow {
    pub name: String,
    pub m: usize,
    pub alpha: f64,
    pub l: f64,
    pub estimated_norm: f64,
    pub report: UniformBoundReport,
    pub required_c: f64,
}

/// Constants, centred bumps and trigonometric products for one `(m, α)`.
pub fn uniform_bound_battery(alpha: f64) -> Vec<(String, TestFunction)> {
    let mut out = vec![
        ("constant_0.3".to_string(), TestFunction::Constant { value: 0.3 }),
        ("constant_1".to_string(), TestFunction::Constant { value: 1.0 }),
    ];
    for e in 2..=6 {
        out.push((
            format!("bump_r2^-{e}"),
            TestFunction::Bump {
                height: 1.0,
                radius: 2f64.powi(-e),
                alpha,
            },
        ));
    }
    for k in [1.0, 2.0, 4.0] {
        out.push((
            format!("trig_k{k}"),
            TestFunction::Trig {
                amplitude: 1.0,
                freq: k,
            },
        ));
    }
    out
}

/// Grid size used by the battery for dimension `m`.
pub fn battery_grid(m: usize) -> Result<ActionGrid> {
    ActionGrid::new(m, if m == 1 { 4096 } else { 512 })
}

/// Runs the battery with calibration constant `c_cal`.
pub fn run_uniform_bound_battery(m: usize, alpha: f64, c_cal: f64) -> Result<Vec<BatteryRow>> {
    let grid = battery_grid(m)?;
    uniform_bound_battery(alpha)
        .into_iter()
        .map(|(name, tf)| {
            let f = GridFunction::sample(grid, |a| tf.eval(a));
            let l = tf.declared_norm(m, alpha);
            let est = holder_norm_estimate(&f, alpha.min(1.0))?;
            if est.value > l * (1.0 + 1e-9) {
                return Err(Error::Invariant(format!(
                    "{name}: declared norm {l} below grid estimate {}",
                    est.value
                )));
            }
            Ok(BatteryRow {
                report: uniform_bound_check(&f, alpha, l, c_cal)?,
                required_c: required_constant(&f, alpha, l),
                estimated_norm: est.value,
                name,
                m,
                alpha,
                l,
            })
        })
        .collect()
}

/// Least-squares slope of `log sup` against `log mean` over the bump family.
pub fn bump_loglog_slope(m: usize, alpha: f64) -> Result<f64> {
    let grid = battery_grid(m)?;
    let pts: Vec<(f64, f64)> = (2..=6)
        .map(|e| {
            let tf = TestFunction::Bump {
                height: 1.0,
                radius: 2f64.powi(-e),
                alpha,
            };
            let f = GridFunction::sample(grid, |a| tf.eval(a));
            (f.mean().ln(), f.sup().ln())
        })
        .collect();
    Ok(ls_slope(&pts))
}

/// Largest relative change of the required constant when `(f, L)` is scaled by each `s`.
pub fn scale_invariance_deviation(f: &GridFunction, alpha: f64, l: f64, scales: &[f64]) -> f64 {
    let base = required_constant(f, alpha, l);
    scales
        .iter()
        .map(|&s| {
            let c = required_constant(&f.scaled(s), alpha, l * s);
            ((c - base) / base).abs()
        })
        .fold(0.0, f64::max)
}

pub(crate) fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `π_K`: draw `a′` from `base`, then uniformly from `B_∞(a′, K^{-1/m}/2) ∩ [0,1]^m`.
pub fn smooth_policy(base: Policy, k: f64) -> Result<Policy> {
    if !(k >= 1.0) || !k.is_finite() {
        return Err(Error::domain(format!("smoothing width K = {k} must be ≥ 1")));
    }
    Ok(Policy::Smoothed {
        base: Box::new(base),
        k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCheck {
    pub k: f64,
    pub gap: f64,
    /// `2·√m·L·H·K^{-α/m}`.
    pub bound: f64,
    pub tolerance: f64,
    pub holds: bool,
    pub alpha: f64,
    pub l: f64,
}

/// Value gap between `base` and its smoothed version under the true environment.
///
/// The transition constants come from `profile`; the reward's own Hölder
/// metadata supplies `(α_R, L_R)`.
pub fn policy_gap_check(
    env: &LowRankMdp,
    base: &Policy,
    k: f64,
    reward: &RewardFunction,
    profile: &SmoothnessProfile,
    quad_g: usize,
) -> Result<GapCheck> {
    let meta = reward
        .holder
        .ok_or_else(|| Error::domain("reward carries no Hölder metadata"))?;
    let alpha = profile.alpha_t.min(meta.alpha).min(1.0);
    let l = profile.l_t.max(meta.l);
    let m = env.m;
    let smoothed = smooth_policy(base.clone(), k)?;
    let v_base = value_exact(env, base, reward, quad_g)?;
    let v_smooth = value_exact(env, &smoothed, reward, quad_g)?;
    let gap = (v_base - v_smooth).abs();
    let bound = 2.0 * (m as f64).sqrt() * l * env.horizon as f64 * k.powf(-alpha / m as f64);
    let tolerance = quadrature_tolerance(l, m, quad_g, alpha);
    Ok(GapCheck {
        k,
        gap,
        bound,
        tolerance,
        holds: gap <= bound + tolerance,
        alpha,
        l,
    })
}

/// `E_{π_K}[f] − E_π[f]` at one action distribution, against `√m·L·K^{-α/m}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationShift {
    pub shift: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Checks the one-step smoothing inequality for a base action rule.
pub fn expectation_shift_check(
    base_rule: &ActionRule,
    k: f64,
    f: impl Fn(&[f64]) -> f64,
    alpha: f64,
    l: f64,
    quad_g: usize,
) -> Result<ExpectationShift> {
    if !(k >= 1.0) {
        return Err(Error::domain("K must be ≥ 1"));
    }
    let m = base_rule
        .first()
        .map(|(_, a)| a.len())
        .ok_or_else(|| Error::domain("empty action rule"))?;
    let r = crate::mdp::policy::smoothing_radius(k, m);
    let inner_w = 1.0 / quad_g.pow(m as u32) as f64;
    let mut base_mean = 0.0;
    let mut smooth_mean = 0.0;
    for (w, center) in base_rule {
        base_mean += w * f(center);
        let (lo, hi) = crate::mdp::policy::clipped_box(center, r);
        for a in ActionGrid::box_midpoints(&lo, &hi, quad_g) {
            smooth_mean += w * inner_w * f(&a);
        }
    }
    let shift = smooth_mean - base_mean;
    let bound = (m as f64).sqrt() * l * k.powf(-alpha / m as f64);
    let tolerance = quadrature_tolerance(l, m, quad_g, alpha);
    Ok(ExpectationShift {
        shift,
        bound,
        tolerance,
        holds: shift <= bound + tolerance,
    })
}

/// Exact discrete importance-sampling comparison on a grid action set.
///
/// Treats the `G^m` cells as a finite action set; returns
/// `(E_{s∼d, c∼π}[f], G^m · E_{s∼d, c∼unif}[f])`.
///
/// The right side is accumulated as `Σ d(s) f(s,c)` in the same order as the
/// left, so for nonnegative inputs `lhs ≤ rhs` survives rounding exactly.
pub fn discrete_is_sides(state_dist: &[f64], policy_cells: &[Vec<f64>], f: &[Vec<f64>]) -> (f64, f64) {
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (s, &ds) in state_dist.iter().enumerate() {
        for (c, &fc) in f[s].iter().enumerate() {
            lhs += ds * policy_cells[s][c] * fc;
            rhs += ds * fc;
        }
    }
    (lhs, rhs)
}
