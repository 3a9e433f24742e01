use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ActionGrid;

/// Shape of `a ↦ R_h(s, a)` for one (step, state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardShape {
    Constant { value: f64 },
    /// `offset + Σ_j slope_j a_j`.
    Affine { offset: f64, slope: Vec<f64> },
    /// `offset + amplitude · Π_j (1 + cos(π (a_j - phase_j))) / 2`.
    Cosine {
        offset: f64,
        amplitude: f64,
        phase: Vec<f64>,
    },
}

impl RewardShape {
    pub fn eval(&self, a: &[f64]) -> f64 {
        match self {
            RewardShape::Constant { value } => *value,
            RewardShape::Affine { offset, slope } => {
                offset + slope.iter().zip(a).map(|(w, x)| w * x).sum::<f64>()
            }
            RewardShape::Cosine {
                offset,
                amplitude,
                phase,
            } => {
                offset
                    + amplitude
                        * phase
                            .iter()
                            .zip(a)
                            .map(|(p, x)| 0.5 * (1.0 + (std::f64::consts::PI * (x - p)).cos()))
                            .product::<f64>()
            }
        }
    }

    /// Lipschitz constant in `a` (Euclidean).
    pub fn lipschitz(&self) -> f64 {
        match self {
            RewardShape::Constant { .. } => 0.0,
            RewardShape::Affine { slope, .. } => slope.iter().map(|x| x * x).sum::<f64>().sqrt(),
            RewardShape::Cosine {
                amplitude, phase, ..
            } => amplitude.abs() * std::f64::consts::FRAC_PI_2 * (phase.len() as f64).sqrt(),
        }
    }
}

/// Hölder exponent and constant of a reward in the action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderMeta {
    pub alpha: f64,
    pub l: f64,
}

/// `R_h(s,a) ∈ [0,1]`, stored per (step, state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardFunction {
    pub horizon: usize,
    pub n_states: usize,
    pub m: usize,
    /// `shapes[h * n_states + s]`.
    pub shapes: Vec<RewardShape>,
    /// Set when at most one step carries reward, so every value is at most 1.
    pub sparse: bool,
    pub holder: Option<HolderMeta>,
}

impl RewardFunction {
    /// General reward table; `sparse` is set only if a single step is nonzero.
    pub fn new(horizon: usize, n_states: usize, m: usize, shapes: Vec<RewardShape>) -> Result<Self> {
        if shapes.len() != horizon * n_states {
            return Err(Error::config("reward table needs one shape per (step, state)"));
        }
        let mut r = Self {
            horizon,
            n_states,
            m,
            shapes,
            sparse: false,
            holder: None,
        };
        r.validate()?;
        let active = (0..horizon).filter(|&h| !r.step_is_zero(h)).count();
        r.sparse = active <= 1;
        Ok(r)
    }

    /// Reward only at `step`, given per state; zero elsewhere.
    pub fn single_step(
        horizon: usize,
        m: usize,
        step: usize,
        per_state: Vec<RewardShape>,
    ) -> Result<Self> {
        if step >= horizon {
            return Err(Error::domain(format!("reward step {step} ≥ horizon {horizon}")));
        }
        let n_states = per_state.len();
        let mut shapes = vec![RewardShape::Constant { value: 0.0 }; horizon * n_states];
        for (s, shape) in per_state.into_iter().enumerate() {
            shapes[step * n_states + s] = shape;
        }
        let mut r = Self::new(horizon, n_states, m, shapes)?;
        r.sparse = true;
        let l = r.lipschitz();
        r.holder = Some(HolderMeta { alpha: 1.0, l });
        Ok(r)
    }

    pub fn with_holder(mut self, alpha: f64, l: f64) -> Self {
        self.holder = Some(HolderMeta { alpha, l });
        self
    }

    pub fn eval(&self, h: usize, s: usize, a: &[f64]) -> f64 {
        self.shapes[h * self.n_states + s].eval(a)
    }

    /// Largest Lipschitz constant over (step, state).
    pub fn lipschitz(&self) -> f64 {
        self.shapes.iter().map(RewardShape::lipschitz).fold(0.0, f64::max)
    }

    fn step_is_zero(&self, h: usize) -> bool {
        (0..self.n_states).all(|s| {
            matches!(self.shapes[h * self.n_states + s], RewardShape::Constant { value } if value == 0.0)
        })
    }

    /// Values in `[0,1]`, checked at grid midpoints and cube vertices.
    pub fn validate(&self) -> Result<()> {
        let grid = ActionGrid::new(self.m, if self.m == 1 { 64 } else { 8 })?;
        let mut probes = grid.midpoints();
        probes.extend(crate::mdp::model::cube_vertices(self.m));
        for (i, shape) in self.shapes.iter().enumerate() {
            match shape {
                RewardShape::Affine { slope, .. } if slope.len() != self.m => {
                    return Err(Error::config("affine reward slope has the wrong length"))
                }
                RewardShape::Cosine { phase, .. } if phase.len() != self.m => {
                    return Err(Error::config("cosine reward phase has the wrong length"))
                }
                _ => {}
            }
            for a in &probes {
                let v = shape.eval(a);
                if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                    return Err(Error::domain(format!(
                        "reward at (h={}, s={}) takes value {v} outside [0,1]",
                        i / self.n_states,
                        i % self.n_states
                    )));
                }
            }
        }
        Ok(())
    }
}
