use super::model::validate_distribution;
use crate::error::{Error, Result};

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::domain(format!(
            "distributions have lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    validate_distribution(p, 1e-9)?;
    validate_distribution(q, 1e-9)
}

/// `½ Σ |p_i − q_i|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    Ok(tv_unchecked(p, q))
}

/// `(½ Σ (√p_i − √q_i)²)^{1/2}`.
pub fn hellinger_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    Ok(hellinger_unchecked(p, q))
}

pub(crate) fn tv_unchecked(p: &[f64], q: &[f64]) -> f64 {
    (0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()).min(1.0)
}

pub(crate) fn hellinger_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let s: f64 = p
        .iter()
        .zip(q)
        .map(|(a, b)| (a.max(0.0).sqrt() - b.max(0.0).sqrt()).powi(2))
        .sum();
    (0.5 * s).sqrt().min(1.0)
}
