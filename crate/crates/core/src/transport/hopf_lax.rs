//! Hopf-Lax semigroup `Q_t f(x) = min_y f(y) + d(x, y)² / 2t` by exhaustive
//! minimisation over the grid's support points.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Grid points (cell centres, then vertices) with their pairwise distances
/// and nearest-neighbour structure.
#[derive(Debug, Clone)]
pub struct HopfLax {
    n: usize,
    cells: usize,
    dist: Vec<f64>,
    neighbours: Vec<Vec<usize>>,
    h: f64,
}

impl HopfLax {
    pub fn new(grid: &Grid) -> Self {
        let g = grid.graph();
        let pts = grid.support_points();
        let n = pts.len();
        let dist: Vec<f64> = pts
            .par_iter()
            .flat_map_iter(|x| pts.iter().map(move |y| g.distance_unchecked(x, y)))
            .collect();
        let cells = grid.cell_count();
        let mut neighbours = vec![Vec::new(); n];
        for e in g.edge_ids() {
            let r = grid.cells(e);
            for c in r.clone() {
                if c + 1 < r.end {
                    neighbours[c].push(c + 1);
                    neighbours[c + 1].push(c);
                }
            }
            let edge = g.edge(e);
            for v in [edge.init, edge.term] {
                let c = grid.boundary_cell(e, v);
                neighbours[c].push(cells + v.0);
                neighbours[cells + v.0].push(c);
            }
        }
        Self { n, cells, dist, neighbours, h: grid.max_width() }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn apply(&self, f: &[f64], t: f64) -> Result<Vec<f64>> {
        if f.len() != self.n || f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("Hopf-Lax input must be finite, one value per grid point".into()));
        }
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        if t == 0.0 {
            return Ok(f.to_vec());
        }
        let inv = 0.5 / t;
        Ok((0..self.n)
            .into_par_iter()
            .map(|i| {
                let row = &self.dist[i * self.n..(i + 1) * self.n];
                row.iter().zip(f).map(|(d, fy)| fy + inv * d * d).fold(f64::INFINITY, f64::min)
            })
            .collect())
    }

    /// Largest difference quotient over all pairs.
    pub fn lipschitz(&self, f: &[f64]) -> f64 {
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                (i + 1..self.n)
                    .map(|j| {
                        let d = self.distance(i, j);
                        if d > 0.0 {
                            (f[i] - f[j]).abs() / d
                        } else {
                            0.0
                        }
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Smallest quotient towards a grid neighbour; differs from
    /// [`Self::local_slope`] by `O(h)` away from kinks.
    pub fn min_slope(&self, f: &[f64], i: usize) -> f64 {
        self.neighbours[i]
            .iter()
            .map(|&j| (f[i] - f[j]).abs() / self.distance(i, j))
            .fold(f64::INFINITY, f64::min)
    }

    /// Discrete local slope: largest quotient towards a grid neighbour.
    pub fn local_slope(&self, f: &[f64], i: usize) -> f64 {
        self.neighbours[i]
            .iter()
            .map(|&j| (f[i] - f[j]).abs() / self.distance(i, j))
            .fold(0.0, f64::max)
    }
}

/// One-shot `Q_t f` on the support points of `grid`.
pub fn hopf_lax(grid: &Grid, f: &[f64], t: f64) -> Result<Vec<f64>> {
    HopfLax::new(grid).apply(f, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfLaxReport {
    pub lip_f: f64,
    /// `(t, Lip(Q_t f) / Lip(f))`, zero when `f` is constant
    pub lip_ratios: Vec<(f64, f64)>,
    pub max_lip_ratio: f64,
    /// largest positive part of `∂_t Q_t f + lip(Q_t f)² / 2` over cell centres
    pub hj_violation: f64,
    pub hj_tolerance: f64,
    /// `(time, cell)` samples above the tolerance, and all samples
    pub hj_failures: usize,
    pub hj_samples: usize,
    /// the residual with the smaller one-sided slope, which ignores the
    /// steeper side of a kink
    pub hj_violation_min_slope: f64,
    pub dt: f64,
    pub h: f64,
}

impl HopfLaxReport {
    pub fn passes(&self) -> bool {
        self.max_lip_ratio <= 2.0 * (1.0 + 5.0 * self.h) && self.hj_violation <= self.hj_tolerance
    }
}

/// Checks `Lip(Q_t f) ≤ 2 Lip(f)` and the Hamilton-Jacobi inequality at the
/// given times. Time derivatives are centred differences with step `dt`
/// (one-sided when `t ≤ dt`); the tolerance is `4 Lip(f)² (h + dt)`.
pub fn verify_hopf_lax_properties(grid: &Grid, f: &[f64], times: &[f64], dt: f64) -> Result<HopfLaxReport> {
    if !(dt > 0.0) {
        return Err(Error::NonPositiveDt(dt));
    }
    let hl = HopfLax::new(grid);
    let lip_f = hl.lipschitz(f);
    let mut lip_ratios = Vec::new();
    let mut hj_violation: f64 = 0.0;
    let mut hj_min: f64 = 0.0;
    let mut residuals = Vec::new();
    for &t in times {
        if !(t > 0.0) {
            return Err(Error::NegativeTime(t));
        }
        let q = hl.apply(f, t)?;
        let ratio = if lip_f > 0.0 { hl.lipschitz(&q) / lip_f } else { 0.0 };
        lip_ratios.push((t, ratio));
        let ahead = hl.apply(f, t + dt)?;
        let (behind, span) = if t > dt { (hl.apply(f, t - dt)?, 2.0 * dt) } else { (q.clone(), dt) };
        for i in 0..hl.cells {
            let dq = (ahead[i] - behind[i]) / span;
            let slope = hl.local_slope(&q, i);
            let r = dq + 0.5 * slope * slope;
            hj_violation = hj_violation.max(r);
            residuals.push(r);
            hj_min = hj_min.max(dq + 0.5 * hl.min_slope(&q, i).powi(2));
        }
    }
    let max_lip_ratio = lip_ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let hj_tolerance = 4.0 * lip_f * lip_f * (hl.h + dt);
    Ok(HopfLaxReport {
        lip_f,
        lip_ratios,
        max_lip_ratio,
        hj_violation,
        hj_tolerance,
        hj_failures: residuals.iter().filter(|r| **r > hj_tolerance).count(),
        hj_samples: residuals.len(),
        hj_violation_min_slope: hj_min,
        dt,
        h: hl.h,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::builders::{interval, three_star};
    use crate::graph::VertexId;

    #[test]
    fn trivial_cases() {
        let grid = Grid::new(Arc::new(three_star(1.0)), 0.1).unwrap();
        let n = grid.support_points().len();
        let zero = vec![0.0; n];
        assert_eq!(hopf_lax(&grid, &zero, 0.7).unwrap(), zero);
        let f: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        assert_eq!(hopf_lax(&grid, &f, 0.0).unwrap(), f);
        assert!(matches!(hopf_lax(&grid, &f, -1.0), Err(Error::NegativeTime(_))));
        let r = verify_hopf_lax_properties(&grid, &vec![3.0; n], &[0.1, 0.5], 0.01).unwrap();
        assert_eq!(r.max_lip_ratio, 0.0);
        assert_eq!(r.hj_violation, 0.0);
    }

    #[test]
    fn linear_function_on_interval() {
        let grid = Grid::new(Arc::new(interval(1.0)), 0.001).unwrap();
        let pts = grid.support_points();
        let f: Vec<f64> = pts.iter().map(|p| p.s).collect();
        let t = 0.1;
        let q = hopf_lax(&grid, &f, t).unwrap();
        for (p, v) in pts.iter().zip(&q) {
            if p.s >= t {
                // the minimiser y = x - t is matched up to the grid spacing
                assert!((v - (p.s - t / 2.0)).abs() <= 0.001 * 0.001 / (2.0 * t) + 1e-12, "{} {}", p.s, v);
            }
        }
    }

    #[test]
    fn distance_function_on_star() {
        let grid = Grid::new(Arc::new(three_star(1.0)), 0.02).unwrap();
        let g = grid.graph();
        let x0 = g.vertex_point(VertexId(0));
        let f: Vec<f64> = grid.support_points().iter().map(|p| g.distance(p, &x0).unwrap()).collect();
        let r = verify_hopf_lax_properties(&grid, &f, &[0.1, 0.5], 0.02).unwrap();
        assert!(r.max_lip_ratio <= 2.0, "{r:?}");
        assert!(r.passes(), "{r:?}");
    }
}
