//! Theoretical hyperparameters for reward-free model learning with continuous actions.
//!
//! Values follow the balancing argument of the accuracy proof step by step.
//! They are astronomically large for any nontrivial accuracy and exist to make
//! the theory executable, not to configure runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smoothness::SmoothnessProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HyperMode {
    /// Accuracy for policies with density ratio to uniform at most `k`.
    RestrictedPolicy { k: f64 },
    /// Accuracy for all policies and Hölder rewards, through `π_K` smoothing.
    UnrestrictedPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Theoretical,
    Practical,
}

/// Log factors held at fixed values, for measuring polynomial scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrozenLogs {
    /// `log(1 + 8/β′)`.
    pub log_beta: f64,
    /// `log(1 + 4H/(λ U ε_TV^{1/(2(1+τ))}))` inside `J_max`.
    pub log_jmax: f64,
    /// `log(J_max H |Φ||Ψ| / δ)` inside `n`.
    pub log_union: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperRequest {
    pub eps: f64,
    pub delta: f64,
    pub d: usize,
    pub horizon: usize,
    pub m: usize,
    pub n_phi: usize,
    pub n_psi: usize,
    pub profile: SmoothnessProfile,
    pub mode: HyperMode,
    /// Constant `c` in `U = c·L_E^κ`.
    pub c_u: f64,
    pub frozen_logs: Option<FrozenLogs>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub provenance: Provenance,
    /// Planner tolerance; equals `β′` for theoretical values.
    pub beta: f64,
    pub beta_prime: f64,
    pub n: f64,
    pub j_max: f64,
    pub lambda: f64,
    pub eps_tv: f64,
    pub k: f64,
    /// Accuracy after the unrestricted-mode halving.
    pub eps_used: f64,
    pub u: f64,
    pub tau: f64,
    pub kappa: f64,
    pub sigma: f64,
    /// `n·J_max·H`.
    pub trajectories: f64,
    /// The balancing argument assumes `U ≥ 1`.
    pub u_below_one: bool,
    pub logs: FrozenLogs,
}

impl HyperParams {
    /// Hand-chosen values for runnable experiments.
    pub fn practical(n: usize, j_max: usize, beta: f64, k: f64, profile: &SmoothnessProfile, horizon: usize) -> Self {
        Self {
            provenance: Provenance::Practical,
            beta,
            beta_prime: beta,
            n: n as f64,
            j_max: j_max as f64,
            lambda: f64::NAN,
            eps_tv: f64::NAN,
            k,
            eps_used: f64::NAN,
            u: f64::NAN,
            tau: profile.tau(),
            kappa: profile.kappa(),
            sigma: profile.sigma(),
            trajectories: (n * j_max * horizon) as f64,
            u_below_one: false,
            logs: FrozenLogs {
                log_beta: f64::NAN,
                log_jmax: f64::NAN,
                log_union: f64::NAN,
            },
        }
    }

    /// Integer `(n, J_max)` for an actual run.
    pub fn runnable(&self) -> Result<(usize, usize)> {
        let ok = |x: f64| (1.0..=1e7).contains(&x);
        if !ok(self.n) || !ok(self.j_max) {
            return Err(Error::domain(format!(
                "n = {:e}, J_max = {:e} are not runnable (need 1 ≤ value ≤ 1e7)",
                self.n, self.j_max
            )));
        }
        Ok((self.n.round() as usize, self.j_max.round() as usize))
    }
}

/// `K = (8·√m·H·L/ε)^σ`.
pub fn smoothing_width(m: usize, horizon: usize, l: f64, eps: f64, sigma: f64) -> f64 {
    (8.0 * (m as f64).sqrt() * horizon as f64 * l / eps).powf(sigma)
}

/// Evaluates the printed hyperparameter assignment.
pub fn theoretical_hyperparams(req: &HyperRequest) -> Result<HyperParams> {
    let p = &req.profile;
    if !(req.eps > 0.0 && req.eps < 1.0) || !(req.delta > 0.0 && req.delta < 1.0) {
        return Err(Error::domain(format!(
            "ε = {} and δ = {} must lie in (0,1)",
            req.eps, req.delta
        )));
    }
    if req.d == 0 || req.horizon == 0 || req.m == 0 || req.n_phi == 0 || req.n_psi == 0 {
        return Err(Error::domain("d, H, m and class sizes must be positive"));
    }
    if p.m != req.m {
        return Err(Error::domain("smoothness profile has a different action dimension"));
    }
    p.validate()?;
    if !(req.c_u > 0.0) {
        return Err(Error::domain("U constant must be positive"));
    }
    let (tau, kappa, sigma) = (p.tau(), p.kappa(), p.sigma());
    let (k, eps) = match req.mode {
        HyperMode::RestrictedPolicy { k } => {
            if !(k >= 1.0) {
                return Err(Error::domain(format!("density bound K = {k} must be ≥ 1")));
            }
            (k, req.eps)
        }
        HyperMode::UnrestrictedPolicy => {
            let k = smoothing_width(req.m, req.horizon, p.l(), req.eps, sigma);
            (k.max(1.0), req.eps / 2.0)
        }
    };
    let (d, h) = (req.d as f64, req.horizon as f64);
    let u = req.c_u * p.l_e.powf(kappa);
    if !(u > 0.0) {
        return Err(Error::domain("U = c·L_E^κ must be positive; L_E = 0 gives no bound"));
    }

    let denom = 2f64.powi(16) * d.powi(4) * h.powi(4) * u * u * eps.powi(-4) - 1.0;
    if !(denom > 0.0) {
        return Err(Error::domain(format!(
            "β′ undefined: 2^16·d^4·H^4·U^2·ε^-4 = {} must exceed 1",
            denom + 1.0
        )));
    }
    let beta_prime = 8.0 / denom;
    let log_beta = req
        .frozen_logs
        .map_or_else(|| (1.0 + 8.0 / beta_prime).ln(), |f| f.log_beta);

    let e = 4.0 + 4.0 * tau;
    let q = 2.0 + 2.0 * tau;
    let core = h.powf(-2.0 * e) * u.powf(-e) * k.powf(-q) * eps.powf(e) / log_beta.powf(q);
    let eps_tv = 8f64.powf(-e) * core * d.powf(-q);
    let lambda = 8f64.powf(-e) / 2.0 * core * d.powf(-q - 1.0);

    let root = eps_tv.powf(1.0 / (2.0 * (1.0 + tau)));
    let inner = 4.0 * h / (lambda * u * root);
    let log_jmax = req.frozen_logs.map_or_else(|| (1.0 + inner).ln(), |f| f.log_jmax);
    let j_max = 4.0 * h * d / (lambda * u * root) * log_jmax;

    let log_union = req.frozen_logs.map_or_else(
        || (j_max * h * req.n_phi as f64 * req.n_psi as f64 / req.delta).ln(),
        |f| f.log_union,
    );
    let n = 8f64.powf(e) * h.powf(2.0 * e) * u.powf(e) * k.powf(q) * d.powf(q) * log_beta.powf(q)
        / eps.powf(e)
        * log_union;

    Ok(HyperParams {
        provenance: Provenance::Theoretical,
        beta: beta_prime,
        beta_prime,
        n,
        j_max,
        lambda,
        eps_tv,
        k,
        eps_used: eps,
        u,
        tau,
        kappa,
        sigma,
        trajectories: n * j_max * h,
        u_below_one: u < 1.0,
        logs: FrozenLogs {
            log_beta,
            log_jmax,
            log_union,
        },
    })
}

/// Least-squares slope of `ln(n·J_max·H)` against `ln(1/ε)` with log factors
/// frozen at their values for the first `ε`.
pub fn trajectory_slope(base: &HyperRequest, eps_values: &[f64]) -> Result<f64> {
    let first = theoretical_hyperparams(&HyperRequest {
        eps: eps_values[0],
        frozen_logs: None,
        ..*base
    })?;
    let pts = eps_values
        .iter()
        .map(|&eps| {
            let hp = theoretical_hyperparams(&HyperRequest {
                eps,
                frozen_logs: Some(first.logs),
                ..*base
            })?;
            Ok(((1.0 / eps).ln(), hp.trajectories.ln()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(crate::smoothness::ls_slope(&pts))
}
