//! Parametric state-action features `φ(s,a)` and state embeddings `ψ(s′)`.
//!
//! Tables are stored row-major so they serialize as flat float arrays.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A map `(s, a) ↦ φ(s,a) ∈ R^d` over finitely many states and `a ∈ [0,1]^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    /// Independent of the action. `table[s*d + i]`.
    Constant {
        n_states: usize,
        d: usize,
        m: usize,
        table: Vec<f64>,
    },
    /// `φ_i(s,a) = offset[s,i] + Σ_j slope[s,i,j]·a_j`.
    Affine {
        n_states: usize,
        d: usize,
        m: usize,
        offset: Vec<f64>,
        slope: Vec<f64>,
    },
    /// Latent-mixture weights: `r_i = bias[s,i] + scale·Σ_j amp[s,i,j]·cos(π a_j)`,
    /// then `φ = softplus(r) / Σ softplus(r)`. Always on the probability simplex.
    SoftplusCosine {
        n_states: usize,
        d: usize,
        m: usize,
        bias: Vec<f64>,
        amplitude: Vec<f64>,
        scale: f64,
    },
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

impl FeatureMap {
    pub fn constant(n_states: usize, m: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != n_states || rows.is_empty() {
            return Err(Error::config("constant features need one row per state"));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::config("constant feature rows differ in length"));
        }
        Ok(FeatureMap::Constant {
            n_states,
            d,
            m,
            table: rows.concat(),
        })
    }

    pub fn n_states(&self) -> usize {
        match self {
            FeatureMap::Constant { n_states, .. }
            | FeatureMap::Affine { n_states, .. }
            | FeatureMap::SoftplusCosine { n_states, .. } => *n_states,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::Constant { d, .. }
            | FeatureMap::Affine { d, .. }
            | FeatureMap::SoftplusCosine { d, .. } => *d,
        }
    }

    pub fn action_dim(&self) -> usize {
        match self {
            FeatureMap::Constant { m, .. }
            | FeatureMap::Affine { m, .. }
            | FeatureMap::SoftplusCosine { m, .. } => *m,
        }
    }

    /// Concave in `a` coordinatewise (affine and constant maps).
    pub fn is_concave(&self) -> bool {
        !matches!(self, FeatureMap::SoftplusCosine { .. })
    }

    /// Checks table shapes.
    pub fn validate_shape(&self) -> Result<()> {
        let (s, d, m) = (self.n_states(), self.dim(), self.action_dim());
        if s == 0 || d == 0 || m == 0 {
            return Err(Error::config("feature map needs positive n_states, d, m"));
        }
        let ok = match self {
            FeatureMap::Constant { table, .. } => table.len() == s * d,
            FeatureMap::Affine { offset, slope, .. } => {
                offset.len() == s * d && slope.len() == s * d * m
            }
            FeatureMap::SoftplusCosine {
                bias,
                amplitude,
                scale,
                ..
            } => bias.len() == s * d && amplitude.len() == s * d * m && scale.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config("feature table lengths do not match (n_states, d, m)"))
        }
    }

    /// Writes `φ(s,a)` into `out` (length `d`).
    pub fn eval_into(&self, s: usize, a: &[f64], out: &mut [f64]) {
        match self {
            FeatureMap::Constant { d, table, .. } => {
                out.copy_from_slice(&table[s * d..(s + 1) * d]);
            }
            FeatureMap::Affine {
                d, m, offset, slope, ..
            } => {
                for i in 0..*d {
                    let row = &slope[(s * d + i) * m..(s * d + i + 1) * m];
                    out[i] = offset[s * d + i] + row.iter().zip(a).map(|(w, x)| w * x).sum::<f64>();
                }
            }
            FeatureMap::SoftplusCosine {
                d,
                m,
                bias,
                amplitude,
                scale,
                ..
            } => {
                let mut total = 0.0;
                for i in 0..*d {
                    let row = &amplitude[(s * d + i) * m..(s * d + i + 1) * m];
                    let wave: f64 = row
                        .iter()
                        .zip(a)
                        .map(|(w, x)| w * (std::f64::consts::PI * x).cos())
                        .sum();
                    let u = softplus(bias[s * d + i] + scale * wave);
                    out[i] = u;
                    total += u;
                }
                for v in out.iter_mut() {
                    *v /= total;
                }
            }
        }
    }

    pub fn eval(&self, s: usize, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(s, a, &mut out);
        out
    }
}

/// `ψ(s′) ∈ R^d` for every state, stored as `table[s′*d + i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEmbedding {
    pub n_states: usize,
    pub d: usize,
    pub table: Vec<f64>,
}

impl StateEmbedding {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::config("embedding rows must share a positive length"));
        }
        Ok(Self {
            n_states: rows.len(),
            d,
            table: rows.concat(),
        })
    }

    /// Builds `ψ` whose columns are the given distributions over states.
    pub fn from_components(components: &[Vec<f64>]) -> Result<Self> {
        let d = components.len();
        let n = components.first().map(Vec::len).unwrap_or(0);
        if d == 0 || n == 0 || components.iter().any(|c| c.len() != n) {
            return Err(Error::config("mixture components must share a positive length"));
        }
        let mut table = vec![0.0; n * d];
        for (i, c) in components.iter().enumerate() {
            for (s, &p) in c.iter().enumerate() {
                table[s * d + i] = p;
            }
        }
        Ok(Self {
            n_states: n,
            d,
            table,
        })
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.table[s * self.d..(s + 1) * self.d]
    }

    /// Column `i` as a vector over states.
    pub fn component(&self, i: usize) -> Vec<f64> {
        (0..self.n_states).map(|s| self.table[s * self.d + i]).collect()
    }

    pub fn validate_shape(&self) -> Result<()> {
        if self.n_states == 0 || self.d == 0 || self.table.len() != self.n_states * self.d {
            return Err(Error::config("embedding table length does not match (n_states, d)"));
        }
        Ok(())
    }

    /// Unnormalized density `ψ(s′)ᵀφ` for every `s′`.
    pub fn contract(&self, phi: &[f64], out: &mut [f64]) {
        for (s, o) in out.iter_mut().enumerate() {
            *o = self.row(s).iter().zip(phi).map(|(p, f)| p * f).sum();
        }
    }

    /// `ψᵀv = Σ_s′ v(s′) ψ(s′)`.
    pub fn pullback(&self, v: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.d];
        for (s, &vs) in v.iter().enumerate() {
            for (wi, p) in w.iter_mut().zip(self.row(s)) {
                *wi += vs * p;
            }
        }
        w
    }

    /// `Σ_s′ ‖ψ(s′)‖₂`, the constant `U` of the smooth-transition bound.
    pub fn l2_mass(&self) -> f64 {
        (0..self.n_states)
            .map(|s| self.row(s).iter().map(|x| x * x).sum::<f64>().sqrt())
            .sum()
    }

    /// `max_g ‖Σ_s′ g(s′)ψ(s′)‖₂` over `g ∈ {0,1}^S`.
    ///
    /// Exhaustive for `n_states ≤ 12`; otherwise a sample of `samples` random vertices.
    pub fn max_indicator_norm(&self, samples: usize, seed: u64) -> f64 {
        use rand::Rng;
        let n = self.n_states;
        let eval = |mask: &dyn Fn(usize) -> bool| -> f64 {
            let mut acc = vec![0.0; self.d];
            for s in 0..n {
                if mask(s) {
                    for (a, p) in acc.iter_mut().zip(self.row(s)) {
                        *a += p;
                    }
                }
            }
            acc.iter().map(|x| x * x).sum::<f64>().sqrt()
        };
        if n <= 12 {
            (0u32..(1 << n))
                .map(|bits| eval(&|s| bits >> s & 1 == 1))
                .fold(0.0, f64::max)
        } else {
            let mut rng = crate::rng::root(seed);
            (0..samples)
                .map(|_| {
                    let bits: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
                    eval(&|s| bits[s])
                })
                .fold(0.0, f64::max)
        }
    }
}
