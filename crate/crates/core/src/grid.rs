//! Uniform midpoint grids on the action cube `[0,1]^m`.
//!
//! Cells are indexed lexicographically with the first action coordinate most
//! significant, so "smallest index" tie-breaking is well defined.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `g` cells per dimension over `[0,1]^m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionGrid {
    pub m: usize,
    pub g: usize,
}

impl ActionGrid {
    pub fn new(m: usize, g: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("action dimension must be at least 1"));
        }
        if g == 0 {
            return Err(Error::config("grid resolution must be at least 1"));
        }
        if (g as f64).powi(m as i32) > 1e8 {
            return Err(Error::config(format!("grid {g}^{m} is too large")));
        }
        Ok(Self { m, g })
    }

    /// Default resolution: 32 for m = 1, 16 for m = 2, 8 above.
    pub fn default_for(m: usize) -> Result<Self> {
        let g = match m {
            1 => 32,
            2 => 16,
            _ => 8,
        };
        Self::new(m, g)
    }

    pub fn n_cells(&self) -> usize {
        self.g.pow(self.m as u32)
    }

    /// Side length of one cell.
    pub fn width(&self) -> f64 {
        1.0 / self.g as f64
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.m];
        for j in (0..self.m).rev() {
            out[j] = idx % self.g;
            idx /= self.g;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &i| acc * self.g + i)
    }

    pub fn midpoint(&self, idx: usize) -> Vec<f64> {
        let w = self.width();
        self.multi_index(idx)
            .into_iter()
            .map(|i| (i as f64 + 0.5) * w)
            .collect()
    }

    pub fn midpoints(&self) -> Vec<Vec<f64>> {
        (0..self.n_cells()).map(|c| self.midpoint(c)).collect()
    }

    /// Lower corner of a cell.
    pub fn corner(&self, idx: usize) -> Vec<f64> {
        let w = self.width();
        self.multi_index(idx)
            .into_iter()
            .map(|i| i as f64 * w)
            .collect()
    }

    /// Cell containing `a`; the upper face `a_j = 1` belongs to the last cell.
    pub fn cell_of(&self, a: &[f64]) -> usize {
        let multi: Vec<usize> = a
            .iter()
            .map(|&x| ((x * self.g as f64).floor() as usize).min(self.g - 1))
            .collect();
        self.flat_index(&multi)
    }

    /// Whether `fine` subdivides every cell of `self` evenly.
    pub fn is_refined_by(&self, fine: &ActionGrid) -> bool {
        self.m == fine.m && fine.g % self.g == 0
    }

    /// Midpoints of a sub-box `[lo, hi]` split into `g^m` equal pieces.
    pub fn box_midpoints(lo: &[f64], hi: &[f64], g: usize) -> Vec<Vec<f64>> {
        let m = lo.len();
        let total = g.pow(m as u32);
        let mut out = Vec::with_capacity(total);
        let mut multi = vec![0usize; m];
        for _ in 0..total {
            out.push(
                (0..m)
                    .map(|j| lo[j] + (multi[j] as f64 + 0.5) * (hi[j] - lo[j]) / g as f64)
                    .collect(),
            );
            for j in (0..m).rev() {
                multi[j] += 1;
                if multi[j] < g {
                    break;
                }
                multi[j] = 0;
            }
        }
        out
    }

    /// Calls `f(i, k)` once for every unordered pair of distinct cells whose
    /// per-axis index offset is at most `reach`.
    pub fn for_each_neighbor_pair(&self, reach: usize, mut f: impl FnMut(usize, usize)) {
        let r = reach as i64;
        let span = (2 * reach + 1).pow(self.m as u32);
        // offsets that are lexicographically positive, so each pair is seen once
        let offsets: Vec<Vec<i64>> = (0..span)
            .map(|mut code| {
                let mut off = vec![0i64; self.m];
                for j in (0..self.m).rev() {
                    off[j] = (code % (2 * reach + 1)) as i64 - r;
                    code /= 2 * reach + 1;
                }
                off
            })
            .filter(|off| off.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0))
            .collect();
        let g = self.g as i64;
        for i in 0..self.n_cells() {
            let mi = self.multi_index(i);
            'next: for off in &offsets {
                let mut k = 0usize;
                for (j, &o) in off.iter().enumerate() {
                    let x = mi[j] as i64 + o;
                    if x < 0 || x >= g {
                        continue 'next;
                    }
                    k = k * self.g + x as usize;
                }
                f(i, k);
            }
        }
    }
}

/// Checks `a ∈ [0,1]^m`.
pub fn check_action(a: &[f64], m: usize) -> Result<()> {
    if a.len() != m {
        return Err(Error::domain(format!(
            "action has {} coordinates, expected {m}",
            a.len()
        )));
    }
    if a.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::domain(format!("action {a:?} lies outside [0,1]^{m}")));
    }
    Ok(())
}

/// Euclidean distance.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_layout() {
        let g = ActionGrid::new(2, 4).unwrap();
        assert_eq!(g.multi_index(5), vec![1, 1]);
        assert_eq!(g.flat_index(&[3, 2]), 14);
        assert_eq!(g.midpoint(0), vec![0.125, 0.125]);
        assert_eq!(g.cell_of(&[1.0, 0.0]), g.flat_index(&[3, 0]));
    }

    #[test]
    fn box_midpoints_cover_box() {
        let pts = ActionGrid::box_midpoints(&[0.0], &[0.5], 2);
        assert_eq!(pts, vec![vec![0.125], vec![0.375]]);
    }

    #[test]
    fn neighbor_pairs_counts() {
        let g = ActionGrid::new(1, 10).unwrap();
        let mut n = 0;
        g.for_each_neighbor_pair(4, |i, k| {
            assert!(k > i && k - i <= 4);
            n += 1;
        });
        // each i pairs with up to 4 successors
        assert_eq!(n, 4 * 6 + 3 + 2 + 1);
        let g2 = ActionGrid::new(2, 5).unwrap();
        let mut brute = 0;
        for i in 0..25 {
            for k in (i + 1)..25 {
                let (a, b) = (g2.multi_index(i), g2.multi_index(k));
                if a.iter().zip(&b).all(|(x, y)| x.abs_diff(*y) <= 2) {
                    brute += 1;
                }
            }
        }
        let mut fast = 0;
        g2.for_each_neighbor_pair(2, |_, _| fast += 1);
        assert_eq!(fast, brute);
    }

    #[test]
    fn rejects_out_of_cube() {
        assert!(check_action(&[1.2], 1).is_err());
        assert!(check_action(&[0.2, 0.3], 1).is_err());
        assert!(check_action(&[0.0], 1).is_ok());
    }
}
