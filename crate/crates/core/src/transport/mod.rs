//! Static optimal transport between finitely supported measures on a metric
//! graph: exact plans and Kantorovich potentials, c-transforms, the Hopf-Lax
//! semigroup and displacement interpolation.

mod hopf_lax;
mod interpolation;
mod simplex;

use rayon::prelude::*;

pub use hopf_lax::{hopf_lax, verify_hopf_lax_properties, HopfLax, HopfLaxReport};
pub use interpolation::{displacement_interpolation, geodesic_interpolation, Displacement};
pub use simplex::{CostMatrix, SimplexSolution};

use crate::error::{Error, Result};
use crate::graph::{GraphPoint, MetricGraph};
use crate::measure::{GridMeasure, MASS_TOL};

/// A finitely supported probability measure. `widths` records the cell width
/// a point stands for (zero for genuine point masses); it is only used when
/// interpolating.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportCloud {
    points: Vec<GraphPoint>,
    masses: Vec<f64>,
    widths: Vec<f64>,
}

impl SupportCloud {
    pub fn new(g: &MetricGraph, points: Vec<GraphPoint>, masses: Vec<f64>) -> Result<Self> {
        let widths = vec![0.0; points.len()];
        Self::with_widths(g, points, masses, widths)
    }

    fn with_widths(g: &MetricGraph, points: Vec<GraphPoint>, masses: Vec<f64>, widths: Vec<f64>) -> Result<Self> {
        if points.len() != masses.len() || points.is_empty() {
            return Err(Error::InvalidInput("support cloud needs one mass per point".into()));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::NegativeMass);
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::NotProbability(total));
        }
        let points = points
            .iter()
            .map(|p| g.point(p.edge, p.s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points, masses, widths })
    }

    /// Cell centres and vertex atoms carrying positive mass.
    pub fn from_measure(mu: &GridMeasure) -> Result<Self> {
        let grid = mu.grid();
        let g = grid.graph();
        let mut points = Vec::new();
        let mut masses = Vec::new();
        let mut widths = Vec::new();
        for (c, &m) in mu.cells().iter().enumerate() {
            if m > 0.0 {
                points.push(grid.cell_point(c));
                masses.push(m);
                widths.push(grid.width(grid.cell_edge(c).0));
            }
        }
        for (v, &m) in mu.atoms().iter().enumerate() {
            if m > 0.0 {
                points.push(g.vertex_point(crate::graph::VertexId(v)));
                masses.push(m);
                widths.push(0.0);
            }
        }
        Self::with_widths(g, points, masses, widths)
    }

    pub fn dirac(p: GraphPoint) -> Self {
        Self { points: vec![p], masses: vec![1.0], widths: vec![0.0] }
    }

    pub fn points(&self) -> &[GraphPoint] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sparse coupling between two clouds.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TransportPlan {
    pub fn new(rows: usize, cols: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if entries.iter().any(|&(i, j, m)| i >= rows || j >= cols || !(m >= 0.0)) {
            return Err(Error::InvalidInput("plan entry out of range or negative".into()));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn source_marginal(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.rows];
        for &(i, _, m) in &self.entries {
            a[i] += m;
        }
        a
    }

    pub fn target_marginal(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.cols];
        for &(_, j, m) in &self.entries {
            b[j] += m;
        }
        b
    }

    /// Largest deviation of the marginals from the given masses.
    pub fn marginal_defect(&self, a: &[f64], b: &[f64]) -> f64 {
        if a.len() != self.rows || b.len() != self.cols {
            return f64::INFINITY;
        }
        let da = self.source_marginal().iter().zip(a).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let db = self.target_marginal().iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        da.max(db)
    }

    pub fn cost(&self, costs: &CostMatrix) -> f64 {
        self.entries.iter().map(|&(i, j, m)| m * costs.get(i, j)).sum()
    }

    /// CSV with one row per entry: indices, both locations and the mass.
    pub fn to_csv(&self, g: &MetricGraph, mu: &SupportCloud, nu: &SupportCloud) -> String {
        let mut out = String::from("source,target,source_edge,source_s,target_edge,target_s,mass\n");
        for &(i, j, m) in &self.entries {
            let (x, y) = (mu.points[i], nu.points[j]);
            out.push_str(&format!(
                "{i},{j},{},{},{},{},{m:e}\n",
                g.edge(x.edge).name,
                x.s,
                g.edge(y.edge).name,
                y.s
            ));
        }
        out
    }
}

/// Kantorovich potentials: `phi` on the source points, `psi` on the target.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotentials {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl DualPotentials {
    pub fn value(&self, a: &[f64], b: &[f64]) -> f64 {
        self.phi.iter().zip(a).map(|(p, m)| p * m).sum::<f64>() + self.psi.iter().zip(b).map(|(p, m)| p * m).sum::<f64>()
    }

    /// `max (φ_i + ψ_j - c_ij)`, non-positive for an admissible pair.
    pub fn max_violation(&self, costs: &CostMatrix) -> f64 {
        (0..costs.rows())
            .map(|i| (0..costs.cols()).map(|j| self.phi[i] + self.psi[j] - costs.get(i, j)).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max |φ_i + ψ_j - c_ij|` over the support of `plan`.
    pub fn slackness(&self, plan: &TransportPlan, costs: &CostMatrix) -> f64 {
        plan.entries
            .iter()
            .filter(|e| e.2 > 0.0)
            .map(|&(i, j, _)| (self.phi[i] + self.psi[j] - costs.get(i, j)).abs())
            .fold(0.0, f64::max)
    }

    /// Largest difference quotient of `phi` over pairs of source points.
    pub fn lipschitz(&self, g: &MetricGraph, points: &[GraphPoint]) -> f64 {
        let mut lip: f64 = 0.0;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let d = g.distance_unchecked(&points[i], &points[j]);
                if d > 0.0 {
                    lip = lip.max((self.phi[i] - self.phi[j]).abs() / d);
                }
            }
        }
        lip
    }
}

#[derive(Debug, Clone)]
pub struct Wasserstein {
    /// `W_p`
    pub value: f64,
    /// optimal cost `W_p^p`
    pub cost: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub plan: TransportPlan,
    pub duals: DualPotentials,
    pub costs: CostMatrix,
}

fn check_exponent(p: u32) -> Result<()> {
    if p == 1 || p == 2 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange { name: "p", value: p as f64 })
    }
}

/// Matrix of `d(x_i, y_j)^p`, assembled in parallel over rows.
pub fn cost_matrix(g: &MetricGraph, xs: &[GraphPoint], ys: &[GraphPoint], p: u32) -> Result<CostMatrix> {
    check_exponent(p)?;
    let data: Vec<f64> = xs
        .par_iter()
        .flat_map_iter(|x| ys.iter().map(move |y| g.distance_unchecked(x, y).powi(p as i32)))
        .collect();
    CostMatrix::new(xs.len(), ys.len(), data)
}

/// Exact `W_p` between two clouds with plan and potentials.
pub fn wasserstein(g: &MetricGraph, mu: &SupportCloud, nu: &SupportCloud, p: u32) -> Result<Wasserstein> {
    check_exponent(p)?;
    let (ma, mb) = (mu.masses.iter().sum::<f64>(), nu.masses.iter().sum::<f64>());
    if (ma - mb).abs() > MASS_TOL {
        return Err(Error::UnbalancedMasses(ma, mb));
    }
    let costs = cost_matrix(g, &mu.points, &nu.points, p)?;
    let sol = simplex::solve(&costs, &mu.masses, &nu.masses)?;
    let plan = TransportPlan::new(mu.len(), nu.len(), sol.entries)?;
    let duals = DualPotentials { phi: sol.u, psi: sol.v };
    let cost = plan.cost(&costs).max(0.0);
    let dual_value = duals.value(&mu.masses, &nu.masses);
    Ok(Wasserstein {
        value: cost.powf(1.0 / p as f64),
        cost,
        dual_value,
        gap: (cost - dual_value).abs(),
        plan,
        duals,
        costs,
    })
}

/// `W_p` between two grid measures via their support clouds.
pub fn wasserstein_measures(mu: &GridMeasure, nu: &GridMeasure, p: u32) -> Result<Wasserstein> {
    if mu.grid() != nu.grid() {
        return Err(Error::GridMismatch);
    }
    wasserstein(mu.graph(), &SupportCloud::from_measure(mu)?, &SupportCloud::from_measure(nu)?, p)
}

/// `φ^c(y) = min_x d(x, y)^p - φ(x)` for every `y` in `ys`.
pub fn c_transform(g: &MetricGraph, xs: &[GraphPoint], phi: &[f64], ys: &[GraphPoint], p: u32) -> Result<Vec<f64>> {
    check_exponent(p)?;
    if xs.len() != phi.len() || xs.is_empty() {
        return Err(Error::InvalidInput("c_transform needs one value per point".into()));
    }
    Ok(ys
        .par_iter()
        .map(|y| {
            xs.iter()
                .zip(phi)
                .map(|(x, f)| g.distance_unchecked(x, y).powi(p as i32) - f)
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::builders::{interval, three_star};
    use crate::graph::EdgeId;
    use crate::grid::Grid;
    use crate::measure::MeasureSpec;

    fn example(eps: f64, h: f64) -> (GridMeasure, GridMeasure) {
        let grid = Grid::new(Arc::new(three_star(1.0)), h).unwrap();
        let mu = format!(
            r#"{{"edges": {{"e1": [{{"interval": [0, {eps}], "density": {d}}}], "e2": [{{"interval": [0, {eps}], "density": {d}}}]}}}}"#,
            d = 0.5 / eps
        );
        let nu = format!(r#"{{"edges": {{"f": [{{"interval": [{a}, 1], "density": {d}}}]}}}}"#, a = 1.0 - eps, d = 1.0 / eps);
        (
            MeasureSpec::from_json(&mu).unwrap().discretize(&grid).unwrap(),
            MeasureSpec::from_json(&nu).unwrap().discretize(&grid).unwrap(),
        )
    }

    #[test]
    fn identical_clouds_cost_nothing() {
        let (mu, _) = example(0.1, 0.02);
        let w = wasserstein_measures(&mu, &mu, 2).unwrap();
        assert!(w.cost.abs() < 1e-14);
        for &(i, j, _) in w.plan.entries() {
            assert_eq!(i, j);
        }
    }

    #[test]
    fn diracs() {
        let g = three_star(1.0);
        let x = g.point(EdgeId(0), 0.3).unwrap();
        let y = g.point(EdgeId(1), 0.4).unwrap();
        for p in [1, 2] {
            let w = wasserstein(&g, &SupportCloud::dirac(x), &SupportCloud::dirac(y), p).unwrap();
            assert!((w.value - 1.3).abs() < 1e-14);
        }
        assert!(matches!(wasserstein(&g, &SupportCloud::dirac(x), &SupportCloud::dirac(y), 3), Err(Error::ParameterOutOfRange { .. })));
    }

    #[test]
    fn example_distance_and_certificate() {
        let h = 0.01;
        let (mu, nu) = example(0.1, h);
        let w = wasserstein_measures(&mu, &nu, 2).unwrap();
        assert!((w.value - 1.9).abs() <= 2.0 * h, "{}", w.value);
        assert!(w.gap <= 1e-8 * (1.0 + w.cost));
        assert!(w.duals.max_violation(&w.costs) <= 1e-9);
        assert!(w.duals.slackness(&w.plan, &w.costs) <= 1e-8);
        let a = SupportCloud::from_measure(&mu).unwrap();
        let b = SupportCloud::from_measure(&nu).unwrap();
        assert!(w.plan.marginal_defect(a.masses(), b.masses()) <= 1e-10);
        assert!(w.plan.entries().len() < a.len() + b.len());
    }

    #[test]
    fn unbalanced_masses_are_rejected() {
        let g = interval(1.0);
        let p = g.point(EdgeId(0), 0.5).unwrap();
        let bad = SupportCloud { points: vec![p], masses: vec![0.5], widths: vec![0.0] };
        assert!(matches!(wasserstein(&g, &SupportCloud::dirac(p), &bad, 2), Err(Error::UnbalancedMasses(..))));
    }

    #[test]
    fn c_transform_examples() {
        let grid = Grid::new(Arc::new(three_star(1.0)), 0.1).unwrap();
        let g = grid.graph();
        let pts = grid.support_points();
        let zero = vec![0.0; pts.len()];
        let t = c_transform(g, &pts, &zero, &pts, 2).unwrap();
        assert!(t.iter().all(|v| *v == 0.0));

        let phi: Vec<f64> = pts.iter().map(|p| (3.0 * p.s).sin() + p.edge.0 as f64 * 0.2).collect();
        let phic = c_transform(g, &pts, &phi, &pts, 2).unwrap();
        let phicc = c_transform(g, &pts, &phic, &pts, 2).unwrap();
        let phiccc = c_transform(g, &pts, &phicc, &pts, 2).unwrap();
        for i in 0..pts.len() {
            // brute-force oracle of the first transform
            let brute = (0..pts.len())
                .map(|k| g.distance(&pts[k], &pts[i]).unwrap().powi(2) - phi[k])
                .fold(f64::INFINITY, f64::min);
            assert_eq!(phic[i], brute);
            assert!(phicc[i] >= phi[i] - 1e-12);
            assert!((phiccc[i] - phic[i]).abs() <= 1e-12);
        }
    }
}
