use serde::{Deserialize, Serialize};

use super::features::{FeatureMap, StateEmbedding};
use crate::error::{Error, Result};
use crate::grid::{check_action, ActionGrid};

/// Entries above this negative level are clamped to zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;
/// Allowed deviation of a transition density's total mass from one.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Finite-state, continuous-action episodic MDP with `T_h(s′|s,a) = φ_h(s,a)ᵀψ_h(s′)`.
///
/// Used both for ground-truth environments and for learned models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankMdp {
    pub n_states: usize,
    pub m: usize,
    pub d: usize,
    pub horizon: usize,
    pub rho: Vec<f64>,
    /// One feature map per step.
    pub phi: Vec<FeatureMap>,
    /// One state embedding per step.
    pub psi: Vec<StateEmbedding>,
}

impl LowRankMdp {
    /// Builds and validates a model, including the normalization checks.
    pub fn new(
        rho: Vec<f64>,
        phi: Vec<FeatureMap>,
        psi: Vec<StateEmbedding>,
    ) -> Result<Self> {
        let mdp = Self::new_unchecked(rho, phi, psi)?;
        mdp.validate()?;
        Ok(mdp)
    }

    /// Shape checks only; used by callers that validate separately.
    pub fn new_unchecked(
        rho: Vec<f64>,
        phi: Vec<FeatureMap>,
        psi: Vec<StateEmbedding>,
    ) -> Result<Self> {
        let horizon = phi.len();
        if horizon == 0 || psi.len() != horizon {
            return Err(Error::config("need one (φ, ψ) pair per step and H ≥ 1"));
        }
        let n_states = rho.len();
        let d = phi[0].dim();
        let m = phi[0].action_dim();
        for (f, p) in phi.iter().zip(&psi) {
            f.validate_shape()?;
            p.validate_shape()?;
            if f.n_states() != n_states || p.n_states != n_states {
                return Err(Error::config("embedding state counts disagree with rho"));
            }
            if f.dim() != d || p.d != d || f.action_dim() != m {
                return Err(Error::config("embedding dimensions disagree across steps"));
            }
        }
        Ok(Self {
            n_states,
            m,
            d,
            horizon,
            rho,
            phi,
            psi,
        })
    }

    /// Runs the normalization and density checks on a validation grid.
    ///
    /// `‖φ(s,a)‖₂ ≤ 1` and density validity are checked at grid midpoints and
    /// cube vertices; the ψ condition on the vertices of `{0,1}^S`.
    pub fn validate(&self) -> Result<()> {
        validate_distribution(&self.rho, 1e-12).map_err(|e| Error::config(format!("rho: {e}")))?;
        let grid = ActionGrid::new(self.m, if self.m == 1 { 16 } else { 6 })?;
        let mut probes = grid.midpoints();
        probes.extend(cube_vertices(self.m));
        for h in 0..self.horizon {
            let bound = (self.d as f64).sqrt() * (1.0 + 1e-12);
            let norm = self.psi[h].max_indicator_norm(10_000, h as u64);
            if norm > bound {
                return Err(Error::Invariant(format!(
                    "step {h}: ‖Σ g(s′)ψ(s′)‖₂ = {norm} exceeds √d"
                )));
            }
            for s in 0..self.n_states {
                for a in &probes {
                    let phi = self.phi[h].eval(s, a);
                    let n2 = phi.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if n2 > 1.0 + 1e-12 {
                        return Err(Error::ModelIntegrity {
                            h,
                            s,
                            a: a.clone(),
                            detail: format!("‖φ‖₂ = {n2} > 1"),
                        });
                    }
                    self.transition_density(h, s, a)?;
                }
            }
        }
        Ok(())
    }

    pub fn features(&self, h: usize, s: usize, a: &[f64]) -> Vec<f64> {
        self.phi[h].eval(s, a)
    }

    /// `T_h(·|s,a)` with tiny negative entries clamped and the mass renormalized.
    pub fn transition_density(&self, h: usize, s: usize, a: &[f64]) -> Result<Vec<f64>> {
        if h >= self.horizon {
            return Err(Error::domain(format!("step {h} ≥ horizon {}", self.horizon)));
        }
        if s >= self.n_states {
            return Err(Error::domain(format!("state {s} ≥ {}", self.n_states)));
        }
        check_action(a, self.m)?;
        let phi = self.phi[h].eval(s, a);
        let mut out = vec![0.0; self.n_states];
        self.psi[h].contract(&phi, &mut out);
        normalize_density(&mut out).map_err(|detail| Error::ModelIntegrity {
            h,
            s,
            a: a.to_vec(),
            detail,
        })?;
        Ok(out)
    }

    /// Density from precomputed features; skips the action check.
    pub(crate) fn density_from_features(
        &self,
        h: usize,
        s: usize,
        a: &[f64],
        phi: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        self.psi[h].contract(phi, out);
        normalize_density(out).map_err(|detail| Error::ModelIntegrity {
            h,
            s,
            a: a.to_vec(),
            detail,
        })
    }

    /// Copy of `self` with step `h` replaced.
    pub fn with_step(&self, h: usize, phi: FeatureMap, psi: StateEmbedding) -> Result<Self> {
        let mut phis = self.phi.clone();
        let mut psis = self.psi.clone();
        phis[h] = phi;
        psis[h] = psi;
        Self::new_unchecked(self.rho.clone(), phis, psis)
    }
}

pub(crate) fn normalize_density(v: &mut [f64]) -> std::result::Result<(), String> {
    let mut total = 0.0;
    for x in v.iter_mut() {
        if !x.is_finite() {
            return Err("non-finite density entry".into());
        }
        if *x < 0.0 {
            if *x < -NEGATIVE_TOLERANCE {
                return Err(format!("negative density entry {x}"));
            }
            *x = 0.0;
        }
        total += *x;
    }
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(format!("density sums to {total}"));
    }
    for x in v.iter_mut() {
        *x /= total;
    }
    Ok(())
}

/// Checks a probability vector: nonnegative, finite, sums to one within `tol`.
pub fn validate_distribution(p: &[f64], tol: f64) -> Result<()> {
    if p.is_empty() {
        return Err(Error::domain("empty probability vector"));
    }
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::domain("probability vector has a negative or non-finite entry"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::domain(format!("probability vector sums to {total}")));
    }
    Ok(())
}

pub(crate) fn cube_vertices(m: usize) -> Vec<Vec<f64>> {
    (0u32..(1 << m))
        .map(|bits| (0..m).map(|j| f64::from(bits >> j & 1)).collect())
        .collect()
}
