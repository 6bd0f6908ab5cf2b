//! Displacement interpolation along an optimal plan.
//!
//! A plan entry between two grid cells carries its mass as a uniform block
//! whose length interpolates the two cell widths and whose centre travels at
//! constant speed along the geodesic. Entries involving a point mass move as
//! point masses. The resulting piecewise-constant density can be evaluated
//! exactly (entropy) or binned onto the grid.

use super::{SupportCloud, TransportPlan};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, GeodesicPath, GraphPoint, MetricGraph};
use crate::grid::Grid;
use crate::measure::GridMeasure;

/// `T_t # π` as uniform pieces per edge plus point masses.
#[derive(Debug, Clone)]
pub struct Displacement {
    grid: Grid,
    /// per edge: `(from, to, density)` with `from < to`
    pieces: Vec<Vec<(f64, f64, f64)>>,
    points: Vec<(GraphPoint, f64)>,
}

impl Displacement {
    pub fn pieces(&self, e: EdgeId) -> &[(f64, f64, f64)] {
        &self.pieces[e.0]
    }

    pub fn point_masses(&self) -> &[(GraphPoint, f64)] {
        &self.points
    }

    pub fn total_mass(&self) -> f64 {
        let spread: f64 = self.pieces.iter().flatten().map(|&(a, b, d)| (b - a) * d).sum();
        spread + self.points.iter().map(|p| p.1).sum::<f64>()
    }

    /// Superposed density on one edge as disjoint `(from, to, density)` runs.
    pub fn runs(&self, e: EdgeId) -> Vec<(f64, f64, f64)> {
        let mut events: Vec<(f64, f64)> = Vec::with_capacity(2 * self.pieces[e.0].len());
        for &(a, b, d) in &self.pieces[e.0] {
            events.push((a, d));
            events.push((b, -d));
        }
        events.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut runs = Vec::new();
        let mut level = 0.0;
        let mut depth = 0usize;
        for w in 0..events.len() {
            let (x, d) = events[w];
            level += d;
            if d > 0.0 {
                depth += 1;
            } else {
                depth -= 1;
            }
            if depth == 0 {
                // avoid drift from repeated additions
                level = 0.0;
            }
            if let Some(&(next, _)) = events.get(w + 1) {
                if next > x && level > 0.0 {
                    runs.push((x, next, level));
                }
            }
        }
        runs
    }

    /// `∫ ρ log ρ` of the exact interpolant; `+∞` with point masses.
    pub fn entropy(&self) -> f64 {
        if self.points.iter().any(|p| p.1 > 0.0) {
            return f64::INFINITY;
        }
        let g = self.grid.graph();
        g.edge_ids()
            .flat_map(|e| self.runs(e))
            .map(|(a, b, d)| (b - a) * d * d.ln())
            .sum()
    }

    /// Bins the interpolant onto the grid (exact cell overlaps; point masses
    /// at vertices become atoms).
    pub fn to_measure(&self) -> Result<GridMeasure> {
        let grid = &self.grid;
        let g = grid.graph();
        let mut cells = vec![0.0; grid.cell_count()];
        let mut atoms = vec![0.0; g.vertex_count()];
        for e in g.edge_ids() {
            let h = grid.width(e);
            let range = grid.cells(e);
            for &(a, b, d) in &self.pieces[e.0] {
                let first = grid.locate(e, a) - range.start;
                let last = grid.locate(e, b) - range.start;
                for i in first..=last {
                    let lo = a.max(i as f64 * h);
                    let hi = b.min((i + 1) as f64 * h);
                    if hi > lo {
                        cells[range.start + i] += d * (hi - lo);
                    }
                }
            }
        }
        for &(p, m) in &self.points {
            match g.point_vertex(&p) {
                Some(v) => atoms[v.0] += m,
                None => cells[grid.locate(p.edge, p.s)] += m,
            }
        }
        GridMeasure::new(grid.clone(), cells, atoms)
    }
}

/// Edge pieces covered by arc lengths `[alpha, beta]` along `path`, extended
/// beyond its ends along the first and last edge.
fn arc_pieces(g: &MetricGraph, path: &GeodesicPath, alpha: f64, beta: f64) -> Vec<(EdgeId, f64, f64)> {
    let segs = g.segments(path);
    let dir0 = segs.first().map_or(1.0, |s| s.direction());
    let dir1 = segs.last().map_or(1.0, |s| s.direction());
    let mut out = Vec::new();
    let mut push = |e: EdgeId, u: f64, v: f64| {
        let len = g.edge(e).length;
        let (lo, hi) = (u.min(v).clamp(0.0, len), u.max(v).clamp(0.0, len));
        if hi > lo {
            out.push((e, lo, hi));
        }
    };
    if alpha < 0.0 {
        let b = beta.min(0.0);
        push(path.start.edge, path.start.s + dir0 * alpha, path.start.s + dir0 * b);
    }
    let mut cum = 0.0;
    for seg in &segs {
        let (lo, hi) = (alpha.max(cum), beta.min(cum + seg.len()));
        if hi > lo {
            push(seg.edge, seg.at(lo - cum), seg.at(hi - cum));
        }
        cum += seg.len();
    }
    let len = path.length;
    if beta > len {
        let a = alpha.max(len);
        push(path.end.edge, path.end.s + dir1 * (a - len), path.end.s + dir1 * (beta - len));
    }
    out
}

/// The interpolant at time `t` of the plan `plan` between `mu` and `nu`.
pub fn displacement_interpolation(
    grid: &Grid,
    mu: &SupportCloud,
    nu: &SupportCloud,
    plan: &TransportPlan,
    t: f64,
) -> Result<Displacement> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::ParameterOutOfRange { name: "t", value: t });
    }
    if plan.shape() != (mu.len(), nu.len()) {
        return Err(Error::PlanMarginalMismatch(f64::INFINITY));
    }
    let defect = plan.marginal_defect(mu.masses(), nu.masses());
    if defect > 1e-10 {
        return Err(Error::PlanMarginalMismatch(defect));
    }
    let g = grid.graph();
    let mut pieces = vec![Vec::new(); g.edge_count()];
    let mut points = Vec::new();
    for &(i, j, m) in plan.entries() {
        if m <= 0.0 {
            continue;
        }
        let (x, y) = (mu.points()[i], nu.points()[j]);
        let path = g.geodesic(&x, &y)?;
        let (w0, w1) = (mu.widths()[i], nu.widths()[j]);
        if w0 > 0.0 && w1 > 0.0 {
            let w = (1.0 - t) * w0 + t * w1;
            let centre = t * path.length;
            let parts = arc_pieces(g, &path, centre - 0.5 * w, centre + 0.5 * w);
            let covered: f64 = parts.iter().map(|p| p.2 - p.1).sum();
            for (e, a, b) in parts {
                pieces[e.0].push((a, b, m / covered));
            }
        } else {
            points.push((g.interpolate(&path, t)?, m));
        }
    }
    Ok(Displacement { grid: grid.clone(), pieces, points })
}

/// `T_t # π` binned onto the grid.
pub fn geodesic_interpolation(
    grid: &Grid,
    mu: &SupportCloud,
    nu: &SupportCloud,
    plan: &TransportPlan,
    t: f64,
) -> Result<GridMeasure> {
    displacement_interpolation(grid, mu, nu, plan, t)?.to_measure()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::builders::three_star;
    use crate::measure::{entropy, MeasureSpec};
    use crate::transport::wasserstein;

    fn setup(eps: f64, h: f64) -> (Grid, SupportCloud, SupportCloud, TransportPlan) {
        let grid = Grid::new(Arc::new(three_star(1.0)), h).unwrap();
        let mu = format!(
            r#"{{"edges": {{"e1": [{{"interval": [0, {eps}], "density": {d}}}], "e2": [{{"interval": [0, {eps}], "density": {d}}}]}}}}"#,
            d = 0.5 / eps
        );
        let nu = format!(r#"{{"edges": {{"f": [{{"interval": [{a}, 1], "density": {d}}}]}}}}"#, a = 1.0 - eps, d = 1.0 / eps);
        let mu = MeasureSpec::from_json(&mu).unwrap().discretize(&grid).unwrap();
        let nu = MeasureSpec::from_json(&nu).unwrap().discretize(&grid).unwrap();
        let a = SupportCloud::from_measure(&mu).unwrap();
        let b = SupportCloud::from_measure(&nu).unwrap();
        let w = wasserstein(grid.graph(), &a, &b, 2).unwrap();
        (grid, a, b, w.plan)
    }

    #[test]
    fn endpoints_reproduce_the_bins() {
        let (grid, a, b, plan) = setup(0.1, 0.02);
        let m0 = geodesic_interpolation(&grid, &a, &b, &plan, 0.0).unwrap();
        let m1 = geodesic_interpolation(&grid, &a, &b, &plan, 1.0).unwrap();
        for (c, &m) in m0.cells().iter().enumerate() {
            let expected = a.points().iter().position(|p| *p == grid.cell_point(c)).map_or(0.0, |k| a.masses()[k]);
            assert!((m - expected).abs() < 1e-15);
        }
        assert!((entropy(&m0).unwrap() - 5f64.ln()).abs() < 1e-12);
        assert!((entropy(&m1).unwrap() - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn support_moves_at_speed_two_minus_eps() {
        let eps = 0.1;
        let (grid, a, b, plan) = setup(eps, 0.01);
        let t = 0.2;
        let d = displacement_interpolation(&grid, &a, &b, &plan, t).unwrap();
        let g = grid.graph();
        for e in [EdgeId(0), EdgeId(1)] {
            let runs = d.runs(e);
            let lo = runs.first().unwrap().0;
            let hi = runs.last().unwrap().1;
            assert!((lo - (2.0 - eps) * t).abs() < 1e-12);
            assert!((hi - (eps + (2.0 - eps) * t)).abs() < 1e-12);
        }
        assert!(d.pieces(g.edge_by_name("f").unwrap()).is_empty());
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dirac_midpoint() {
        let g = three_star(1.0);
        let grid = Grid::new(Arc::new(g.clone()), 0.1).unwrap();
        let x = g.point(EdgeId(0), 0.2).unwrap();
        let y = g.point(EdgeId(2), 0.6).unwrap();
        let plan = TransportPlan::new(1, 1, vec![(0, 0, 1.0)]).unwrap();
        let d = displacement_interpolation(&grid, &SupportCloud::dirac(x), &SupportCloud::dirac(y), &plan, 0.5).unwrap();
        let (p, m) = d.point_masses()[0];
        assert_eq!(m, 1.0);
        assert!((g.distance(&p, &x).unwrap() - 0.7).abs() < 1e-12);
        assert!((g.distance(&p, &y).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn mismatched_plan_is_rejected() {
        let (grid, a, b, _) = setup(0.1, 0.05);
        let plan = TransportPlan::new(a.len(), b.len(), vec![(0, 0, 1.0)]).unwrap();
        assert!(matches!(geodesic_interpolation(&grid, &a, &b, &plan, 0.5), Err(Error::PlanMarginalMismatch(_))));
    }
}
