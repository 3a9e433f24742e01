//! Synthetic smooth low-rank environments and finite hypothesis classes.
//!
//! Truth features are latent-mixture weights: `φ*(s,a)` lies on the
//! probability simplex and every column of `ψ*` is a distribution over
//! states, so `φ*ᵀψ*` is always a valid density and `Σ_s′ ‖ψ*(s′)‖₂ ≤ d`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ActionGrid;
use crate::mdp::distance::{hellinger_unchecked, tv_unchecked};
use crate::mdp::{FeatureMap, LowRankMdp, StateEmbedding};
use crate::rng::{self, SimRng};
use crate::smoothness::{holder_quotient, HOLDER_REACH};

/// Number of fixed `(s, a)` probes used for TV diagnostics.
pub const N_PROBES: usize = 64;
/// Attempts allowed to draw a decoy that differs from the truth.
pub const DECOY_ATTEMPTS: usize = 100;
const PROBE_SEED: u64 = 0x5EED_0F9E_0BE5;

fn default_amplitude() -> f64 {
    1.0
}

fn default_decay() -> f64 {
    1.0
}

fn default_logit_spread() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub n_states: usize,
    pub d: usize,
    pub m: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Hölder exponent recorded for certificates.
    pub alpha: f64,
    /// Upper bound on the measured Lipschitz constant of `a ↦ φ*(s,a)`.
    pub l_target: f64,
    #[serde(default)]
    pub n_phi_decoys: usize,
    #[serde(default)]
    pub n_psi_decoys: usize,
    #[serde(default)]
    pub decoy_scale: f64,
    /// Decoy `k` is perturbed with `decoy_scale · decoy_decay^k`.
    #[serde(default = "default_decay")]
    pub decoy_decay: f64,
    /// Multiplies the random cosine weights; 0 gives action-independent features.
    #[serde(default = "default_amplitude")]
    pub bandwidth_amplitude: f64,
    /// Spread of the logits of the `ψ*` mixture components.
    #[serde(default = "default_logit_spread")]
    pub logit_spread: f64,
    /// Draw a separate truth for every step instead of sharing one.
    #[serde(default)]
    pub per_step_truth: bool,
}

impl EnvConfig {
    pub fn new(n_states: usize, d: usize, m: usize, horizon: usize, seed: u64) -> Self {
        Self {
            n_states,
            d,
            m,
            horizon,
            seed,
            alpha: 1.0,
            l_target: 1.0,
            n_phi_decoys: 0,
            n_psi_decoys: 0,
            decoy_scale: 0.3,
            decoy_decay: 1.0,
            bandwidth_amplitude: 1.0,
            logit_spread: 3.0,
            per_step_truth: false,
        }
    }

    /// Small end-to-end setting: 3 states, d = 2, m = 1, H = 3, four graded
    /// decoys of each kind.
    pub fn small(seed: u64) -> Self {
        Self {
            l_target: 2.0,
            n_phi_decoys: 4,
            n_psi_decoys: 4,
            decoy_scale: 0.5,
            decoy_decay: 0.5,
            ..Self::new(3, 2, 1, 3, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.d == 0 || self.m == 0 || self.horizon == 0 {
            return Err(Error::config("n_states, d, m and H must be positive"));
        }
        if self.d > self.n_states {
            return Err(Error::config(format!(
                "d = {} exceeds n_states = {}",
                self.d, self.n_states
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config(format!("α = {} must lie in (0,1]", self.alpha)));
        }
        for (name, v) in [
            ("decoy_scale", self.decoy_scale),
            ("decoy_decay", self.decoy_decay),
            ("bandwidth_amplitude", self.bandwidth_amplitude),
            ("logit_spread", self.logit_spread),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} = {v} must be finite and ≥ 0")));
            }
        }
        ActionGrid::new(self.m, certify_resolution(self.m))?;
        Ok(())
    }
}

/// Fine grid used to scale the truth features.
fn certify_resolution(m: usize) -> usize {
    match m {
        1 => 2048,
        2 => 128,
        3 => 24,
        _ => 8,
    }
}

/// Largest `‖φ(s,a) − φ(s,a′)‖₂ / ‖a − a′‖₂^α` over all states and grid pairs within `reach`.
pub fn feature_holder_constant(phi: &FeatureMap, grid: &ActionGrid, alpha: f64, reach: usize) -> f64 {
    let mids = grid.midpoints();
    (0..phi.n_states())
        .map(|s| {
            let vals: Vec<Vec<f64>> = mids.iter().map(|a| phi.eval(s, a)).collect();
            holder_quotient(grid, alpha, reach, |i, k| l2_diff(&vals[i], &vals[k]))
        })
        .fold(0.0, f64::max)
}

fn l2_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|x| (x - mx).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

fn symmetric(rng: &mut SimRng) -> f64 {
    2.0 * rng.random::<f64>() - 1.0
}

/// `±1` with equal probability; decoy weights move by exactly the decoy scale.
fn sign(rng: &mut SimRng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Zero-mean sign pattern scaled to unit max-norm. Normalized features are
/// nearly blind to a common shift, so decoys move along contrasts instead.
fn contrast(rng: &mut SimRng, n: usize) -> Vec<f64> {
    let mut z: Vec<f64> = (0..n).map(|_| sign(rng)).collect();
    if n > 1 && z.iter().all(|&x| x == z[0]) {
        let i = rng.random_range(0..n);
        z[i] = -z[i];
    }
    let mean = z.iter().sum::<f64>() / n as f64;
    let top = z.iter().fold(0.0f64, |acc, x| acc.max((x - mean).abs()));
    if top == 0.0 {
        return vec![0.0; n];
    }
    z.iter().map(|x| (x - mean) / top).collect()
}

fn random_simplex(rng: &mut SimRng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

fn truth_features(cfg: &EnvConfig, rng: &mut SimRng) -> Result<FeatureMap> {
    let (n, d, m) = (cfg.n_states, cfg.d, cfg.m);
    let bias: Vec<f64> = (0..n * d).map(|_| symmetric(rng)).collect();
    let amplitude: Vec<f64> = (0..n * d * m)
        .map(|_| cfg.bandwidth_amplitude * symmetric(rng))
        .collect();
    let grid = ActionGrid::new(m, certify_resolution(m))?;
    let with_scale = |scale: f64| FeatureMap::SoftplusCosine {
        n_states: n,
        d,
        m,
        bias: bias.clone(),
        amplitude: amplitude.clone(),
        scale,
    };
    let lip = |scale: f64| feature_holder_constant(&with_scale(scale), &grid, 1.0, 1);
    if !(cfg.l_target >= 0.0 && cfg.l_target.is_finite()) {
        return Err(Error::Construction(format!(
            "smoothness target {} must be finite and ≥ 0",
            cfg.l_target
        )));
    }
    if lip(1.0) <= cfg.l_target {
        return Ok(with_scale(1.0));
    }
    let (mut lo, mut hi) = (1e-6, 1.0);
    if lip(lo) > cfg.l_target {
        return Err(Error::Construction(format!(
            "smoothness target {} is below the flattest achievable constant {}",
            cfg.l_target,
            lip(lo)
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if lip(mid) <= cfg.l_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(with_scale(lo))
}

fn truth_embedding(cfg: &EnvConfig, rng: &mut SimRng) -> Result<StateEmbedding> {
    let comps: Vec<Vec<f64>> = (0..cfg.d)
        .map(|_| {
            let logits: Vec<f64> = (0..cfg.n_states)
                .map(|_| cfg.logit_spread * symmetric(rng))
                .collect();
            softmax(&logits)
        })
        .collect();
    StateEmbedding::from_components(&comps)
}

/// Builds a validated environment whose truth features have measured Lipschitz constant ≤ `l_target`.
pub fn make_smooth_lowrank_mdp(cfg: &EnvConfig) -> Result<LowRankMdp> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, 0);
    let rho = random_simplex(&mut rng, cfg.n_states);
    let n_truths = if cfg.per_step_truth { cfg.horizon } else { 1 };
    let mut truths = Vec::with_capacity(n_truths);
    for _ in 0..n_truths {
        let phi = truth_features(cfg, &mut rng)?;
        let psi = truth_embedding(cfg, &mut rng)?;
        truths.push((phi, psi));
    }
    let (phi, psi) = (0..cfg.horizon)
        .map(|h| truths[h % n_truths].clone())
        .unzip();
    LowRankMdp::new(rho, phi, psi)
}

/// Fixed probe `(s, a)` pairs shared by every diagnostic that compares models.
pub fn probe_points(n_states: usize, m: usize) -> Vec<(usize, Vec<f64>)> {
    let mut rng = rng::root(PROBE_SEED);
    (0..N_PROBES)
        .map(|i| (i % n_states, rng::uniform_action(&mut rng, m)))
        .collect()
}

/// Finite classes `Φ`, `Ψ` containing the truth of every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisClass {
    pub n_states: usize,
    pub d: usize,
    pub m: usize,
    pub phi: Vec<FeatureMap>,
    pub psi: Vec<StateEmbedding>,
    /// Index of `φ*_h` in `phi`, per step.
    pub true_phi: Vec<usize>,
    /// Index of `ψ*_h` in `psi`, per step.
    pub true_psi: Vec<usize>,
    /// Per step: smallest mean probe TV between the truth and any other pair.
    pub separation: Vec<f64>,
}

impl HypothesisClass {
    /// The class `{(φ*_h, ψ*_h)}` with no decoys.
    pub fn truth_only(mdp: &LowRankMdp) -> Self {
        let mut phi: Vec<FeatureMap> = Vec::new();
        let mut psi: Vec<StateEmbedding> = Vec::new();
        let mut true_phi = Vec::new();
        let mut true_psi = Vec::new();
        for h in 0..mdp.horizon {
            true_phi.push(index_or_push(&mut phi, &mdp.phi[h]));
            true_psi.push(index_or_push(&mut psi, &mdp.psi[h]));
        }
        Self {
            n_states: mdp.n_states,
            d: mdp.d,
            m: mdp.m,
            phi,
            psi,
            true_phi,
            true_psi,
            separation: vec![f64::INFINITY; mdp.horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.true_phi.len()
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.phi.len(), self.psi.len())
    }

    pub fn min_separation(&self) -> f64 {
        self.separation.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Transition density of the pair `(phi[i], psi[j])`, validated.
    pub fn pair_density(&self, i: usize, j: usize, s: usize, a: &[f64]) -> Result<Vec<f64>> {
        let phi = self.phi[i].eval(s, a);
        let mut out = vec![0.0; self.n_states];
        self.psi[j].contract(&phi, &mut out);
        crate::mdp::model::normalize_density(&mut out).map_err(|detail| {
            Error::ModelIntegrity {
                h: 0,
                s,
                a: a.to_vec(),
                detail: format!("pair (φ{i}, ψ{j}): {detail}"),
            }
        })?;
        Ok(out)
    }

    /// Checks that the truth of every step of `mdp` is a member at the recorded index.
    pub fn check_realizable(&self, mdp: &LowRankMdp) -> Result<()> {
        if self.horizon() != mdp.horizon || self.true_psi.len() != mdp.horizon {
            return Err(Error::Invariant("class horizon differs from the environment".into()));
        }
        for h in 0..mdp.horizon {
            if self.phi.get(self.true_phi[h]) != Some(&mdp.phi[h])
                || self.psi.get(self.true_psi[h]) != Some(&mdp.psi[h])
            {
                return Err(Error::Invariant(format!("truth of step {h} is not in the class")));
            }
        }
        Ok(())
    }

    /// Builds the one-step-per-`h` model selecting `(phi[i_h], psi[j_h])`.
    pub fn model(&self, rho: &[f64], phi_idx: &[usize], psi_idx: &[usize]) -> Result<LowRankMdp> {
        LowRankMdp::new_unchecked(
            rho.to_vec(),
            phi_idx.iter().map(|&i| self.phi[i].clone()).collect(),
            psi_idx.iter().map(|&j| self.psi[j].clone()).collect(),
        )
    }
}

fn index_or_push<T: PartialEq + Clone>(items: &mut Vec<T>, x: &T) -> usize {
    match items.iter().position(|y| y == x) {
        Some(i) => i,
        None => {
            items.push(x.clone());
            items.len() - 1
        }
    }
}

fn perturb_features(base: &FeatureMap, scale: f64, rng: &mut SimRng) -> Result<FeatureMap> {
    match base {
        FeatureMap::SoftplusCosine {
            n_states,
            d,
            m,
            bias,
            amplitude,
            scale: c,
        } => Ok(FeatureMap::SoftplusCosine {
            n_states: *n_states,
            d: *d,
            m: *m,
            bias: bias
                .chunks(*d)
                .flat_map(|row| {
                    let z = contrast(rng, *d);
                    row.iter().zip(z).map(|(b, zi)| b + scale * zi).collect::<Vec<_>>()
                })
                .collect(),
            // perturb the effective weights `c·w`, not the raw ones
            amplitude: amplitude
                .iter()
                .map(|w| w + scale * sign(rng) / c)
                .collect(),
            scale: *c,
        }),
        _ => Err(Error::Construction(
            "decoy features require softplus-cosine truth features".into(),
        )),
    }
}

/// Moves each mixture component a fraction `scale` of the way toward a point
/// mass on one of its light states.
fn perturb_embedding(base: &StateEmbedding, scale: f64, rng: &mut SimRng) -> Result<StateEmbedding> {
    let n = base.n_states;
    let comps: Vec<Vec<f64>> = (0..base.d)
        .map(|i| {
            let col = base.component(i);
            let light: Vec<usize> = (0..n).filter(|&s| col[s] <= 1.0 / n as f64).collect();
            let target = light[rng.random_range(0..light.len())];
            let w = (scale * (0.5 + 0.5 * rng.random::<f64>())).min(1.0);
            col.iter()
                .enumerate()
                .map(|(s, p)| (1.0 - w) * p + if s == target { w } else { 0.0 })
                .collect()
        })
        .collect();
    StateEmbedding::from_components(&comps)
}

/// TV between two pairs' densities at every probe.
fn probe_tvs(
    probes: &[(usize, Vec<f64>)],
    a: (&FeatureMap, &StateEmbedding),
    b: (&FeatureMap, &StateEmbedding),
) -> Vec<f64> {
    let n = a.1.n_states;
    let (mut p, mut q) = (vec![0.0; n], vec![0.0; n]);
    probes
        .iter()
        .map(|(s, act)| {
            a.1.contract(&a.0.eval(*s, act), &mut p);
            b.1.contract(&b.0.eval(*s, act), &mut q);
            tv_unchecked(&p, &q)
        })
        .collect()
}

fn draw_decoy<T>(
    label: &str,
    seed: u64,
    k: usize,
    mut make: impl FnMut(&mut SimRng) -> Result<T>,
    mut distinct: impl FnMut(&T) -> bool,
) -> Result<T> {
    for attempt in 0..DECOY_ATTEMPTS {
        let mut r = rng::root(rng::derive(seed, &[k as u64, attempt as u64]));
        let cand = make(&mut r)?;
        if distinct(&cand) {
            return Ok(cand);
        }
    }
    Err(Error::Construction(format!(
        "{label} decoy {k} matched the truth at every probe after {DECOY_ATTEMPTS} attempts"
    )))
}

/// Adds seeded decoys to the truth of `mdp` and shuffles member order.
pub fn make_hypothesis_class(mdp: &LowRankMdp, cfg: &EnvConfig) -> Result<HypothesisClass> {
    cfg.validate()?;
    if cfg.n_states != mdp.n_states || cfg.d != mdp.d || cfg.m != mdp.m || cfg.horizon != mdp.horizon {
        return Err(Error::config("class config does not match the environment"));
    }
    let truth = HypothesisClass::truth_only(mdp);
    let wants_decoys = cfg.n_phi_decoys + cfg.n_psi_decoys > 0;
    if wants_decoys && cfg.decoy_scale == 0.0 {
        return Err(Error::Construction(
            "decoy scale 0 makes every decoy identical to the truth".into(),
        ));
    }
    let probes = probe_points(mdp.n_states, mdp.m);
    let n_phi_truth = truth.phi.len();
    let n_psi_truth = truth.psi.len();
    let mut phi = truth.phi.clone();
    let mut psi = truth.psi.clone();
    let phi_seed = rng::derive(cfg.seed, &[1]);
    let psi_seed = rng::derive(cfg.seed, &[2]);
    for k in 0..cfg.n_phi_decoys {
        let (f0, p0) = (&truth.phi[k % n_phi_truth], &mdp.psi[0]);
        let scale = cfg.decoy_scale * cfg.decoy_decay.powi(k as i32);
        phi.push(draw_decoy(
            "feature",
            phi_seed,
            k,
            |r| perturb_features(f0, scale, r),
            |f| probe_tvs(&probes, (f, p0), (f0, p0)).iter().any(|&t| t >= 1e-6),
        )?);
    }
    for k in 0..cfg.n_psi_decoys {
        let (p0, f0) = (&truth.psi[k % n_psi_truth], &mdp.phi[0]);
        let scale = cfg.decoy_scale * cfg.decoy_decay.powi(k as i32);
        psi.push(draw_decoy(
            "embedding",
            psi_seed,
            k,
            |r| perturb_embedding(p0, scale, r),
            |p| probe_tvs(&probes, (f0, p), (f0, p0)).iter().any(|&t| t >= 1e-6),
        )?);
    }

    // truth positions must not be predictable from tie-breaking order
    let mut shuffle_rng = rng::stream(cfg.seed, 3);
    let phi_perm = permutation(phi.len(), &mut shuffle_rng);
    let psi_perm = permutation(psi.len(), &mut shuffle_rng);
    let phi: Vec<FeatureMap> = phi_perm.iter().map(|&i| phi[i].clone()).collect();
    let psi: Vec<StateEmbedding> = psi_perm.iter().map(|&i| psi[i].clone()).collect();
    let inv = |perm: &[usize], old: usize| perm.iter().position(|&i| i == old).unwrap_or(0);
    let true_phi: Vec<usize> = truth.true_phi.iter().map(|&i| inv(&phi_perm, i)).collect();
    let true_psi: Vec<usize> = truth.true_psi.iter().map(|&j| inv(&psi_perm, j)).collect();

    let mut class = HypothesisClass {
        n_states: mdp.n_states,
        d: mdp.d,
        m: mdp.m,
        phi,
        psi,
        true_phi,
        true_psi,
        separation: Vec::new(),
    };
    class.check_realizable(mdp)?;
    for i in 0..class.phi.len() {
        for j in 0..class.psi.len() {
            let pair = LowRankMdp::new_unchecked(
                mdp.rho.clone(),
                vec![class.phi[i].clone()],
                vec![class.psi[j].clone()],
            )?;
            pair.validate()?;
        }
    }
    class.separation = (0..mdp.horizon)
        .map(|h| {
            let (ti, tj) = (class.true_phi[h], class.true_psi[h]);
            let mut best = f64::INFINITY;
            for i in 0..class.phi.len() {
                for j in 0..class.psi.len() {
                    if (i, j) == (ti, tj) {
                        continue;
                    }
                    let tvs = probe_tvs(
                        &probes,
                        (&class.phi[i], &class.psi[j]),
                        (&class.phi[ti], &class.psi[tj]),
                    );
                    best = best.min(tvs.iter().sum::<f64>() / tvs.len() as f64);
                }
            }
            best
        })
        .collect();
    Ok(class)
}

fn permutation(n: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        p.swap(i, j);
    }
    p
}

/// Measured smoothness constants of a class relative to the environment's truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessCertificate {
    pub alpha: f64,
    pub grid_g: usize,
    /// Largest Hölder quotient of `a ↦ φ(s,a)` over `φ ∈ Φ` and states.
    pub l_phi: f64,
    /// Hölder quotient of `a ↦ T*_h(·|s,a)` in TV.
    pub l_t: f64,
    /// Hölder seminorm of the TV error functional over every pair in the class.
    pub l_e: f64,
    /// `max(l_e, sup of the error functional)`.
    pub l_e_norm: f64,
    /// Same seminorm for the Hellinger error functional; diagnostic only.
    pub l_hellinger: f64,
    /// `max_ψ Σ_s′ ‖ψ(s′)‖₂`.
    pub u_measured: f64,
    /// `2·d·l_phi`.
    pub l_e_bound: f64,
    pub l_e_bound_holds: bool,
}

/// Grid estimate of the class smoothness constants; every value is a lower bound.
pub fn smoothness_certificate(
    class: &HypothesisClass,
    mdp: &LowRankMdp,
    grid: &ActionGrid,
    alpha: f64,
) -> Result<SmoothnessCertificate> {
    if grid.g < 16 {
        return Err(Error::domain(format!(
            "certificate grid needs ≥ 16 points per axis, got {}",
            grid.g
        )));
    }
    if grid.m != mdp.m || class.m != mdp.m {
        return Err(Error::config("certificate grid dimension differs from the environment"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("α = {alpha} must lie in (0,1]")));
    }
    class.check_realizable(mdp)?;
    let mids = grid.midpoints();
    let n = mdp.n_states;

    let l_phi = class
        .phi
        .iter()
        .map(|f| feature_holder_constant(f, grid, alpha, HOLDER_REACH))
        .fold(0.0, f64::max);

    // dens[i][j][s][c]: density of pair (i, j) at state s, cell c
    let dens = |f: &FeatureMap, p: &StateEmbedding| -> Vec<Vec<Vec<f64>>> {
        (0..n)
            .map(|s| {
                mids.iter()
                    .map(|a| {
                        let mut out = vec![0.0; n];
                        p.contract(&f.eval(s, a), &mut out);
                        out
                    })
                    .collect()
            })
            .collect()
    };

    let mut l_t = 0.0f64;
    let mut l_e = 0.0f64;
    let mut sup_e = 0.0f64;
    let mut l_hel = 0.0f64;
    for h in 0..mdp.horizon {
        let truth = dens(&mdp.phi[h], &mdp.psi[h]);
        for s in 0..n {
            l_t = l_t.max(holder_quotient(grid, alpha, HOLDER_REACH, |i, k| {
                tv_unchecked(&truth[s][i], &truth[s][k])
            }));
        }
        for f in &class.phi {
            for p in &class.psi {
                let cand = dens(f, p);
                for s in 0..n {
                    let e: Vec<f64> = (0..mids.len())
                        .map(|c| tv_unchecked(&cand[s][c], &truth[s][c]))
                        .collect();
                    let hel: Vec<f64> = (0..mids.len())
                        .map(|c| hellinger_unchecked(&cand[s][c], &truth[s][c]))
                        .collect();
                    sup_e = e.iter().copied().fold(sup_e, f64::max);
                    l_e = l_e.max(holder_quotient(grid, alpha, HOLDER_REACH, |i, k| {
                        (e[i] - e[k]).abs()
                    }));
                    l_hel = l_hel.max(holder_quotient(grid, alpha, HOLDER_REACH, |i, k| {
                        (hel[i] - hel[k]).abs()
                    }));
                }
            }
        }
    }
    let u_measured = class.psi.iter().map(|p| p.l2_mass()).fold(0.0, f64::max);
    let l_e_bound = 2.0 * mdp.d as f64 * l_phi;
    Ok(SmoothnessCertificate {
        alpha,
        grid_g: grid.g,
        l_phi,
        l_t,
        l_e,
        l_e_norm: l_e.max(sup_e),
        l_hellinger: l_hel,
        u_measured,
        l_e_bound,
        // relative slack covers floating-point noise when both sides vanish
        l_e_bound_holds: l_e <= l_e_bound * (1.0 + 1e-12) + 1e-12,
    })
}
