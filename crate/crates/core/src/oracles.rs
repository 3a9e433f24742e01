//! Maximum-likelihood selection over a finite class and successor sampling.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::env::HypothesisClass;
use crate::error::{Error, Result};
use crate::grid::check_action;
use crate::mdp::model::normalize_density;
use crate::mdp::{FeatureMap, StateEmbedding};
use crate::rng::{self, categorical, SimRng};

/// Added inside the logarithm so clamped zeros stay finite.
pub const LIKELIHOOD_FLOOR: f64 = 1e-12;

/// One observed transition `(s, a, s′)` with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: usize,
    pub action: Vec<f64>,
    pub next_state: usize,
    /// Outer iteration that collected the sample.
    pub iter: usize,
    pub seed: u64,
}

/// Append-only per-step transition data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionDataset {
    pub n_states: usize,
    pub m: usize,
    pub steps: Vec<Vec<Sample>>,
}

impl TransitionDataset {
    pub fn new(n_states: usize, m: usize, horizon: usize) -> Self {
        Self {
            n_states,
            m,
            steps: vec![Vec::new(); horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn len(&self, h: usize) -> usize {
        self.steps[h].len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.iter().all(Vec::is_empty)
    }

    pub fn push(&mut self, h: usize, sample: Sample) -> Result<()> {
        if h >= self.horizon() {
            return Err(Error::domain(format!("step {h} outside horizon {}", self.horizon())));
        }
        if sample.state >= self.n_states || sample.next_state >= self.n_states {
            return Err(Error::domain(format!(
                "transition {} → {} outside {} states",
                sample.state, sample.next_state, self.n_states
            )));
        }
        check_action(&sample.action, self.m)?;
        self.steps[h].push(sample);
        Ok(())
    }

    pub fn extend(&mut self, h: usize, samples: impl IntoIterator<Item = Sample>) -> Result<()> {
        for s in samples {
            self.push(h, s)?;
        }
        Ok(())
    }

    /// Writes columns `h, s, a_1..a_m, s_next, iter, seed`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["h".to_string(), "s".to_string()];
        header.extend((1..=self.m).map(|j| format!("a_{j}")));
        header.extend(["s_next", "iter", "seed"].map(String::from));
        wtr.write_record(&header)?;
        for (h, samples) in self.steps.iter().enumerate() {
            for x in samples {
                let mut row = vec![h.to_string(), x.state.to_string()];
                row.extend(x.action.iter().map(|a| format!("{a:?}")));
                row.extend([x.next_state.to_string(), x.iter.to_string(), x.seed.to_string()]);
                wtr.write_record(&row)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the format of [`write_csv`](Self::write_csv); lines starting with `#` are skipped.
    pub fn read_csv<R: Read>(r: R, n_states: usize, m: usize, horizon: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.len() != m + 5 {
            return Err(Error::config(format!(
                "dataset has {} columns, expected {}",
                headers.len(),
                m + 5
            )));
        }
        let mut out = Self::new(n_states, m, horizon);
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| -> Result<&str> {
                rec.get(i).ok_or_else(|| Error::config("short dataset row"))
            };
            let parse_usize = |i: usize| -> Result<usize> {
                field(i)?
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("column {i}: expected an integer")))
            };
            let h = parse_usize(0)?;
            let action = (0..m)
                .map(|j| {
                    field(2 + j)?
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::config(format!("column {}: expected a number", 2 + j)))
                })
                .collect::<Result<Vec<_>>>()?;
            let seed = field(m + 4)?
                .trim()
                .parse()
                .map_err(|_| Error::config("seed column: expected an integer"))?;
            out.push(
                h,
                Sample {
                    state: parse_usize(1)?,
                    action,
                    next_state: parse_usize(m + 2)?,
                    iter: parse_usize(m + 3)?,
                    seed,
                },
            )?;
        }
        Ok(out)
    }
}

/// Result of one maximum-likelihood fit at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub phi_idx: usize,
    pub psi_idx: usize,
    pub log_likelihood: f64,
    /// Log-likelihood of every pair, row-major in `(φ, ψ)`.
    pub pair_log_likelihood: Vec<f64>,
    pub n_samples: usize,
}

/// Exhaustive MLE over `Φ × Ψ` for the samples of one step.
///
/// Per-sample terms are sorted before summation so the result does not
/// depend on sample order; ties go to the lowest `(φ, ψ)` index.
pub fn mle_fit_step(samples: &[Sample], class: &HypothesisClass) -> Result<MleFit> {
    if samples.is_empty() {
        return Err(Error::domain("maximum likelihood needs at least one sample"));
    }
    let (n_phi, n_psi) = class.sizes();
    let feats: Vec<Vec<Vec<f64>>> = class
        .phi
        .iter()
        .map(|f| samples.iter().map(|x| f.eval(x.state, &x.action)).collect())
        .collect();
    let mut pair_ll = Vec::with_capacity(n_phi * n_psi);
    let mut any_clean = false;
    let mut terms = vec![0.0; samples.len()];
    for fi in &feats {
        for psi in &class.psi {
            let mut floor_hit = false;
            for (t, (x, phi)) in terms.iter_mut().zip(samples.iter().zip(fi)) {
                let p: f64 = psi.row(x.next_state).iter().zip(phi).map(|(a, b)| a * b).sum();
                let p = p.max(0.0);
                floor_hit |= p < LIKELIHOOD_FLOOR;
                *t = (p + LIKELIHOOD_FLOOR).ln();
            }
            any_clean |= !floor_hit;
            terms.sort_by(f64::total_cmp);
            pair_ll.push(terms.iter().sum::<f64>());
        }
    }
    if !any_clean {
        return Err(Error::DataModelMismatch(format!(
            "every one of the {} pairs assigns zero probability to an observed transition",
            n_phi * n_psi
        )));
    }
    let mut best = 0;
    for (k, &ll) in pair_ll.iter().enumerate() {
        if ll > pair_ll[best] {
            best = k;
        }
    }
    Ok(MleFit {
        phi_idx: best / n_psi,
        psi_idx: best % n_psi,
        log_likelihood: pair_ll[best],
        pair_log_likelihood: pair_ll,
        n_samples: samples.len(),
    })
}

/// Fits every step and checks that no fit scores below the true pair.
pub fn mle_fit(data: &TransitionDataset, class: &HypothesisClass) -> Result<Vec<MleFit>> {
    if data.horizon() != class.horizon() {
        return Err(Error::config("dataset and class disagree on the horizon"));
    }
    let n_psi = class.psi.len();
    data.steps
        .iter()
        .enumerate()
        .map(|(h, samples)| {
            let fit = mle_fit_step(samples, class)?;
            let truth = fit.pair_log_likelihood[class.true_phi[h] * n_psi + class.true_psi[h]];
            if fit.log_likelihood < truth {
                return Err(Error::Invariant(format!(
                    "step {h}: selected log-likelihood {} below the true pair's {truth}",
                    fit.log_likelihood
                )));
            }
            Ok(fit)
        })
        .collect()
}

/// Draws `s′ ~ φ(s,a)ᵀψ(·)` from an explicit generator.
pub fn samp_with(
    phi: &FeatureMap,
    psi: &StateEmbedding,
    s: usize,
    a: &[f64],
    rng: &mut SimRng,
) -> Result<usize> {
    if s >= phi.n_states() {
        return Err(Error::domain(format!("state {s} outside {} states", phi.n_states())));
    }
    check_action(a, phi.action_dim())?;
    let mut p = vec![0.0; psi.n_states];
    psi.contract(&phi.eval(s, a), &mut p);
    normalize_density(&mut p).map_err(|detail| Error::ModelIntegrity {
        h: 0,
        s,
        a: a.to_vec(),
        detail,
    })?;
    Ok(categorical(rng, &p))
}

/// Draws `s′ ~ φ(s,a)ᵀψ(·)`, reproducibly from `seed`.
pub fn samp(phi: &FeatureMap, psi: &StateEmbedding, s: usize, a: &[f64], seed: u64) -> Result<usize> {
    samp_with(phi, psi, s, a, &mut rng::root(seed))
}
