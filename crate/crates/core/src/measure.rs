//! Discretised measures on a metric graph and the free-energy functionals.
//!
//! A [`GridMeasure`] stores one mass per cell (density constant on the cell)
//! plus one atom per vertex.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, GraphPoint, MetricGraph};
use crate::grid::{EdgeField, Grid};
use crate::piecewise::Quadrature;

/// Tolerance on the total mass of a probability measure.
pub const MASS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    grid: Grid,
    cells: Vec<f64>,
    atoms: Vec<f64>,
}

impl GridMeasure {
    pub fn new(grid: Grid, cells: Vec<f64>, atoms: Vec<f64>) -> Result<Self> {
        if cells.len() != grid.cell_count() || atoms.len() != grid.graph().vertex_count() {
            return Err(Error::GridMismatch);
        }
        if cells.iter().chain(&atoms).any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::NegativeMass);
        }
        Ok(Self { grid, cells, atoms })
    }

    /// Atom-free measure from cell masses.
    pub fn from_cells(grid: Grid, cells: Vec<f64>) -> Result<Self> {
        let v = grid.graph().vertex_count();
        Self::new(grid, cells, vec![0.0; v])
    }

    /// Atom-free measure from cell densities.
    pub fn from_densities(grid: Grid, densities: &[f64]) -> Result<Self> {
        let cells = (0..grid.cell_count())
            .map(|c| densities[c] * grid.width(grid.cell_edge(c).0))
            .collect();
        Self::from_cells(grid, cells)
    }

    /// Cell averages of a density given pointwise, by Gauss-Legendre quadrature.
    pub fn from_density_fn(grid: Grid, f: impl Fn(EdgeId, f64) -> f64) -> Result<Self> {
        let q = Quadrature::new(8);
        let mut cells = vec![0.0; grid.cell_count()];
        for e in grid.graph().edge_ids() {
            let h = grid.width(e);
            for (i, c) in grid.cells(e).enumerate() {
                let a = i as f64 * h;
                cells[c] = q.integrate(a, a + h, |s| f(e, s));
            }
        }
        Self::from_cells(grid, cells)
    }

    pub fn lebesgue(grid: &Grid) -> Self {
        let cells = (0..grid.cell_count()).map(|c| grid.width(grid.cell_edge(c).0)).collect();
        Self::from_cells(grid.clone(), cells).expect("lebesgue masses are valid")
    }

    /// Unit mass at a point: an atom at a vertex, otherwise the containing cell.
    pub fn dirac(grid: &Grid, p: &GraphPoint) -> Self {
        let mut cells = vec![0.0; grid.cell_count()];
        let mut atoms = vec![0.0; grid.graph().vertex_count()];
        match grid.graph().point_vertex(p) {
            Some(v) => atoms[v.0] = 1.0,
            None => cells[grid.locate(p.edge, p.s)] = 1.0,
        }
        Self::new(grid.clone(), cells, atoms).expect("dirac is valid")
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn graph(&self) -> &MetricGraph {
        self.grid.graph()
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn has_atoms(&self) -> bool {
        self.atoms.iter().any(|&a| a > 0.0)
    }

    /// Error naming the first vertex carrying an atom.
    pub fn reject_atoms(&self) -> Result<()> {
        match self.atoms.iter().position(|&a| a > 0.0) {
            Some(v) => Err(Error::AtomPresent(self.graph().vertex_name(crate::graph::VertexId(v)).to_string())),
            None => Ok(()),
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().sum::<f64>() + self.atoms.iter().sum::<f64>()
    }

    pub fn check_probability(&self) -> Result<()> {
        let m = self.total_mass();
        if (m - 1.0).abs() > MASS_TOL {
            Err(Error::NotProbability(m))
        } else {
            Ok(())
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let m = self.total_mass();
        if !(m > 0.0) {
            return Err(Error::NotProbability(m));
        }
        Ok(Self {
            grid: self.grid.clone(),
            cells: self.cells.iter().map(|x| x / m).collect(),
            atoms: self.atoms.iter().map(|x| x / m).collect(),
        })
    }

    pub fn density(&self, cell: usize) -> f64 {
        self.cells[cell] / self.grid.width(self.grid.cell_edge(cell).0)
    }

    pub fn densities(&self) -> Vec<f64> {
        (0..self.cells.len()).map(|c| self.density(c)).collect()
    }

    /// Masses on the support points of [`Grid::support_points`].
    pub fn support_masses(&self) -> Vec<f64> {
        self.cells.iter().chain(&self.atoms).copied().collect()
    }

    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .cells
            .iter()
            .zip(&other.cells)
            .chain(self.atoms.iter().zip(&other.atoms))
            .map(|(a, b)| (a - b).abs())
            .sum())
    }

    /// `∫ φ dμ` for `φ` given pointwise; cell masses sit at their centres.
    pub fn integrate_midpoint(&self, phi: impl Fn(&GraphPoint) -> f64) -> f64 {
        let g = self.graph();
        let cells: f64 = (0..self.cells.len())
            .filter(|&c| self.cells[c] != 0.0)
            .map(|c| self.cells[c] * phi(&self.grid.cell_point(c)))
            .sum();
        let atoms: f64 = g
            .vertex_ids()
            .filter(|v| self.atoms[v.0] != 0.0)
            .map(|v| self.atoms[v.0] * phi(&g.vertex_point(v)))
            .sum();
        cells + atoms
    }

    /// CSV with one row per cell: `edge,cell,center,density`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("edge,cell,center,density\n");
        for e in self.graph().edge_ids() {
            let name = &self.graph().edge(e).name;
            for (i, c) in self.grid.cells(e).enumerate() {
                writeln!(out, "{name},{i},{:.12e},{:.12e}", self.grid.cell_center(e, i), self.density(c)).unwrap();
            }
        }
        out
    }
}

/// One piece of a measure description on a single edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DensityPiece {
    /// constant density on `[a, b]`
    Interval { interval: [f64; 2], density: f64 },
    /// `mass · (1/w) cos²(π(s−c)/(2w))` on `|s − c| < w`
    Bump { bump: BumpSpec },
    /// Gaussian of the given total mass, truncated to the edge
    Gaussian { gaussian: GaussianSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: f64,
    pub width: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub center: f64,
    pub sigma: f64,
    pub mass: f64,
}

/// JSON description of a measure: per-edge density pieces and vertex atoms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(default)]
    pub edges: BTreeMap<String, Vec<DensityPiece>>,
    #[serde(default)]
    pub atoms: BTreeMap<String, f64>,
    /// rescale to unit mass after binning
    #[serde(default)]
    pub normalize: bool,
}

impl MeasureSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("measure json: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("measure spec serialises")
    }

    /// Bins the description onto `grid`; interval pieces are binned exactly.
    pub fn discretize(&self, grid: &Grid) -> Result<GridMeasure> {
        let g = grid.graph();
        let mut cells = vec![0.0; grid.cell_count()];
        let mut atoms = vec![0.0; g.vertex_count()];
        let q = Quadrature::new(12);
        for (name, pieces) in &self.edges {
            let e = g.edge_by_name(name)?;
            let h = grid.width(e);
            let len = g.edge(e).length;
            for piece in pieces {
                match *piece {
                    DensityPiece::Interval { interval: [a, b], density } => {
                        if !(0.0 <= a && a <= b && b <= len * (1.0 + 1e-12)) || density < 0.0 {
                            return Err(Error::InvalidInput(format!("bad interval [{a}, {b}] on edge {name}")));
                        }
                        for (i, c) in grid.cells(e).enumerate() {
                            let lo = (i as f64 * h).max(a);
                            let hi = ((i + 1) as f64 * h).min(b);
                            if hi > lo {
                                cells[c] += density * (hi - lo);
                            }
                        }
                    }
                    DensityPiece::Bump { bump } => {
                        let BumpSpec { center, width, mass } = bump;
                        if !(width > 0.0 && mass >= 0.0) {
                            return Err(Error::InvalidInput(format!("bad bump on edge {name}")));
                        }
                        // antiderivative of (1/w) cos²(π x / 2w) on [-w, w]
                        let cum = |s: f64| {
                            let x = (s - center).clamp(-width, width);
                            0.5 * x / width + (1.0 / (2.0 * std::f64::consts::PI)) * (std::f64::consts::PI * x / width).sin()
                        };
                        for (i, c) in grid.cells(e).enumerate() {
                            cells[c] += mass * (cum((i + 1) as f64 * h) - cum(i as f64 * h)).max(0.0);
                        }
                    }
                    DensityPiece::Gaussian { gaussian } => {
                        let GaussianSpec { center, sigma, mass } = gaussian;
                        if !(sigma > 0.0 && mass >= 0.0) {
                            return Err(Error::InvalidInput(format!("bad gaussian on edge {name}")));
                        }
                        let norm = mass / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                        for (i, c) in grid.cells(e).enumerate() {
                            let a = i as f64 * h;
                            cells[c] += q.integrate(a, a + h, |s| norm * (-0.5 * ((s - center) / sigma).powi(2)).exp());
                        }
                    }
                }
            }
        }
        for (name, &mass) in &self.atoms {
            let v = g.vertex_by_name(name)?;
            atoms[v.0] += mass;
        }
        let mu = GridMeasure::new(grid.clone(), cells, atoms)?;
        if self.normalize {
            mu.normalized()
        } else {
            Ok(mu)
        }
    }
}

/// `Σ h ρ log ρ` over cells, `+∞` when an atom is present.
pub fn entropy(mu: &GridMeasure) -> Result<f64> {
    mu.check_probability()?;
    if mu.has_atoms() {
        return Ok(f64::INFINITY);
    }
    Ok((0..mu.cells.len())
        .map(|c| {
            let m = mu.cells[c];
            if m > 0.0 {
                m * mu.density(c).ln()
            } else {
                0.0
            }
        })
        .sum())
}

/// Entropy relative to `e^{-V} λ`, with `V` taken at cell centres.
pub fn relative_entropy(mu: &GridMeasure, v: &EdgeField) -> Result<f64> {
    mu.check_probability()?;
    if mu.has_atoms() {
        return Ok(f64::INFINITY);
    }
    let grid = mu.grid();
    let mut total = 0.0;
    for e in grid.graph().edge_ids() {
        for (i, c) in grid.cells(e).enumerate() {
            let m = mu.cells[c];
            if m > 0.0 {
                total += m * (mu.density(c).ln() + v.center(e, i));
            }
        }
    }
    Ok(total)
}

/// Scalar profile applied to the graph distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum Profile {
    Linear,
    Quadratic,
    Gaussian { width: f64 },
}

impl Profile {
    pub fn eval(&self, d: f64) -> f64 {
        match *self {
            Profile::Linear => d,
            Profile::Quadratic => d * d,
            Profile::Gaussian { width } => (-0.5 * (d / width).powi(2)).exp(),
        }
    }
}

/// Interaction kernel description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InteractionSpec {
    Zero,
    Constant { value: f64 },
    /// `W(x, y) = scale · profile(d(x, y))`
    Distance {
        #[serde(flatten)]
        profile: Profile,
        scale: f64,
    },
    /// values on the grid support points (cell centres, then vertices)
    Table { values: Vec<Vec<f64>> },
}

/// External potential description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Zero,
    /// per-edge polynomial coefficients in the edge coordinate; missing edges are zero
    Polynomial { edges: BTreeMap<String, Vec<f64>> },
    /// `scale · profile(d(x, vertex))`
    Distance {
        vertex: String,
        #[serde(flatten)]
        profile: Profile,
        scale: f64,
    },
}

impl PotentialSpec {
    pub fn sample(&self, grid: &Grid) -> Result<EdgeField> {
        let g = grid.graph();
        match self {
            PotentialSpec::Zero => Ok(EdgeField::zero(grid)),
            PotentialSpec::Polynomial { edges } => {
                let mut coeffs = vec![Vec::new(); g.edge_count()];
                for (name, c) in edges {
                    coeffs[g.edge_by_name(name)?.0] = c.clone();
                }
                Ok(EdgeField::from_fn(grid, |e, s| coeffs[e.0].iter().rev().fold(0.0, |acc, &a| acc * s + a)))
            }
            PotentialSpec::Distance { vertex, profile, scale } => {
                let v = g.vertex_by_name(vertex)?;
                let p = g.vertex_point(v);
                Ok(EdgeField::from_fn(grid, |e, s| {
                    let x = GraphPoint { edge: e, s };
                    scale * profile.eval(g.distance_unchecked(&x, &p))
                }))
            }
        }
    }
}

/// Interaction kernel assembled on a grid.
#[derive(Debug, Clone)]
pub struct Interaction {
    kind: InteractionKind,
}

#[derive(Debug, Clone)]
enum InteractionKind {
    Zero,
    Constant(f64),
    /// rows: every half-cell sample of every edge, then every vertex;
    /// columns: support points (cells, then vertices)
    Matrix { rows: DMatrix<f64>, support: DMatrix<f64> },
}

impl Interaction {
    pub fn zero() -> Self {
        Self { kind: InteractionKind::Zero }
    }

    pub fn constant(c: f64) -> Self {
        Self { kind: InteractionKind::Constant(c) }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, InteractionKind::Zero)
    }

    /// Kernel `W(x, y) = w(d(x, y))`.
    pub fn from_distance(grid: &Grid, w: impl Fn(f64) -> f64) -> Self {
        let g = grid.graph();
        let support = grid.support_points();
        let mut rows = Vec::new();
        for e in g.edge_ids() {
            let n = grid.count(e);
            let len = g.edge(e).length;
            for k in 0..=2 * n {
                let s = if k == 2 * n { len } else { 0.5 * k as f64 * grid.width(e) };
                rows.push(GraphPoint { edge: e, s });
            }
        }
        rows.extend(g.vertex_ids().map(|v| g.vertex_point(v)));
        let m = DMatrix::from_fn(rows.len(), support.len(), |r, c| w(g.distance_unchecked(&rows[r], &support[c])));
        let s = DMatrix::from_fn(support.len(), support.len(), |r, c| w(g.distance_unchecked(&support[r], &support[c])));
        Self { kind: InteractionKind::Matrix { rows: m, support: s } }
    }

    /// Kernel tabulated on the support points; interfaces interpolate.
    pub fn from_table(grid: &Grid, table: &[Vec<f64>]) -> Result<Self> {
        let n = grid.cell_count() + grid.graph().vertex_count();
        if table.len() != n || table.iter().any(|r| r.len() != n) {
            return Err(Error::GridMismatch);
        }
        let support = DMatrix::from_fn(n, n, |r, c| table[r][c]);
        let defect = (&support - support.transpose()).amax();
        if defect > 1e-12 {
            return Err(Error::AsymmetricKernel(defect));
        }
        let nc = grid.cell_count();
        let g = grid.graph();
        let mut rows: Vec<DVector<f64>> = Vec::new();
        for e in g.edge_ids() {
            let edge = g.edge(e);
            let cells = grid.cells(e);
            let row = |i: usize| support.row(i).transpose();
            for k in 0..=2 * cells.len() {
                let r = if k == 0 {
                    row(nc + edge.init.0)
                } else if k == 2 * cells.len() {
                    row(nc + edge.term.0)
                } else if k % 2 == 1 {
                    row(cells.start + k / 2)
                } else {
                    (row(cells.start + k / 2 - 1) + row(cells.start + k / 2)) * 0.5
                };
                rows.push(r);
            }
        }
        for v in 0..g.vertex_count() {
            rows.push(support.row(nc + v).transpose());
        }
        let m = DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]);
        Ok(Self { kind: InteractionKind::Matrix { rows: m, support } })
    }

    pub fn from_spec(grid: &Grid, spec: &InteractionSpec) -> Result<Self> {
        Ok(match spec {
            InteractionSpec::Zero => Self::zero(),
            InteractionSpec::Constant { value } => Self::constant(*value),
            InteractionSpec::Distance { profile, scale } => {
                let (p, s) = (*profile, *scale);
                Self::from_distance(grid, move |d| s * p.eval(d))
            }
            InteractionSpec::Table { values } => Self::from_table(grid, values)?,
        })
    }

    /// `W[μ](x) = ∫ W(x, y) dμ(y)` on every half-cell sample, plus vertex values.
    pub fn field(&self, mu: &GridMeasure) -> (EdgeField, Vec<f64>) {
        let grid = mu.grid();
        let nv = grid.graph().vertex_count();
        match &self.kind {
            InteractionKind::Zero => (EdgeField::zero(grid), vec![0.0; nv]),
            InteractionKind::Constant(c) => {
                let m = mu.total_mass();
                (EdgeField::from_fn(grid, |_, _| c * m), vec![c * m; nv])
            }
            InteractionKind::Matrix { rows, .. } => {
                let masses = DVector::from_vec(mu.support_masses());
                let vals = rows * masses;
                let mut offset = 0;
                let mut per_edge = Vec::new();
                for e in grid.graph().edge_ids() {
                    let len = 2 * grid.count(e) + 1;
                    per_edge.push(vals.as_slice()[offset..offset + len].to_vec());
                    offset += len;
                }
                let field = EdgeField::from_samples(per_edge);
                (field, vals.as_slice()[offset..].to_vec())
            }
        }
    }

    pub fn energy(&self, mu: &GridMeasure) -> f64 {
        match &self.kind {
            InteractionKind::Zero => 0.0,
            InteractionKind::Constant(c) => 0.5 * c * mu.total_mass().powi(2),
            InteractionKind::Matrix { support, .. } => {
                let m = DVector::from_vec(mu.support_masses());
                0.5 * m.dot(&(support * &m))
            }
        }
    }

    pub fn min_value(&self) -> f64 {
        match &self.kind {
            InteractionKind::Zero => 0.0,
            InteractionKind::Constant(c) => *c,
            InteractionKind::Matrix { support, .. } => support.min(),
        }
    }
}

/// `½ Σ W(x_p, x_q) m_p m_q` over support points.
pub fn interaction_energy(mu: &GridMeasure, w: &Interaction) -> f64 {
    w.energy(mu)
}

/// `ℱ = ℰ_V + 𝒲`.
pub fn free_energy(mu: &GridMeasure, v: &EdgeField, w: &Interaction) -> Result<f64> {
    Ok(relative_entropy(mu, v)? + interaction_energy(mu, w))
}

/// The three parts of the free energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyParts {
    pub entropy: f64,
    pub potential: f64,
    pub interaction: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.entropy + self.potential + self.interaction
    }
}

pub fn energy_parts(mu: &GridMeasure, v: &EdgeField, w: &Interaction) -> Result<EnergyParts> {
    let ent = entropy(mu)?;
    let grid = mu.grid();
    let potential = grid
        .graph()
        .edge_ids()
        .flat_map(|e| grid.cells(e).enumerate().map(move |(i, c)| (e, i, c)))
        .map(|(e, i, c)| mu.cells()[c] * v.center(e, i))
        .sum();
    Ok(EnergyParts { entropy: ent, potential, interaction: interaction_energy(mu, w) })
}

/// Gibbs measure `e^{-V} λ / Z` with `V` at cell centres, and `Z`.
pub fn gibbs(grid: &Grid, v: &EdgeField) -> (GridMeasure, f64) {
    let mut cells = vec![0.0; grid.cell_count()];
    for e in grid.graph().edge_ids() {
        for (i, c) in grid.cells(e).enumerate() {
            cells[c] = grid.width(e) * (-v.center(e, i)).exp();
        }
    }
    let z: f64 = cells.iter().sum();
    cells.iter_mut().for_each(|m| *m /= z);
    (GridMeasure::from_cells(grid.clone(), cells).expect("gibbs masses are valid"), z)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::builders::{interval, three_star};

    fn star_grid(h: f64) -> Grid {
        Grid::new(Arc::new(three_star(1.0)), h).unwrap()
    }

    pub(crate) fn example_mu(grid: &Grid, eps: f64) -> GridMeasure {
        let spec = format!(
            r#"{{"edges": {{"e1": [{{"interval": [0, {eps}], "density": {d}}}],
                            "e2": [{{"interval": [0, {eps}], "density": {d}}}]}}}}"#,
            d = 1.0 / (2.0 * eps)
        );
        MeasureSpec::from_json(&spec).unwrap().discretize(grid).unwrap()
    }

    #[test]
    fn lebesgue_masses() {
        let grid = star_grid(0.1);
        let l = GridMeasure::lebesgue(&grid);
        assert!((l.total_mass() - 3.0).abs() < 1e-14);
        let g = Grid::new(Arc::new(interval(1.0)), 0.25).unwrap();
        assert_eq!(GridMeasure::lebesgue(&g).cells(), &[0.25; 4]);
        assert!(GridMeasure::lebesgue(&grid).normalized().unwrap().check_probability().is_ok());
    }

    #[test]
    fn entropy_values() {
        let grid = star_grid(0.1);
        let u = GridMeasure::lebesgue(&grid).normalized().unwrap();
        assert!((entropy(&u).unwrap() - (1.0f64 / 3.0).ln()).abs() < 1e-14);
        let mu = example_mu(&grid, 0.1);
        assert!((entropy(&mu).unwrap() - 5f64.ln()).abs() < 1e-12);
        let nu = MeasureSpec::from_json(r#"{"edges": {"f": [{"interval": [0.9, 1.0], "density": 10}]}}"#)
            .unwrap()
            .discretize(&grid)
            .unwrap();
        assert!((entropy(&nu).unwrap() - 10f64.ln()).abs() < 1e-12);
        let atom = GridMeasure::dirac(&grid, &grid.graph().vertex_point(crate::graph::VertexId(2)));
        assert_eq!(entropy(&atom).unwrap(), f64::INFINITY);
        assert!(matches!(entropy(&GridMeasure::lebesgue(&grid)), Err(Error::NotProbability(_))));
    }

    #[test]
    fn relative_entropy_of_gibbs() {
        let grid = star_grid(0.02);
        let v = EdgeField::from_fn(&grid, |e, s| (e.0 as f64 + 1.0) * (s - 0.3).powi(2));
        let (g, z) = gibbs(&grid, &v);
        assert!((relative_entropy(&g, &v).unwrap() + z.ln()).abs() < 1e-12);
        let u = GridMeasure::lebesgue(&grid).normalized().unwrap();
        let zero = EdgeField::zero(&grid);
        assert_eq!(relative_entropy(&u, &zero).unwrap(), entropy(&u).unwrap());
        let expected = entropy(&u).unwrap() + u.integrate_midpoint(|p| v.center(p.edge, grid.locate(p.edge, p.s) - grid.cells(p.edge).start));
        assert!((relative_entropy(&u, &v).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn interaction_examples() {
        let grid = Grid::new(Arc::new(interval(1.0)), 0.001).unwrap();
        let u = GridMeasure::lebesgue(&grid);
        assert_eq!(interaction_energy(&u, &Interaction::zero()), 0.0);
        assert!((interaction_energy(&u, &Interaction::constant(3.0)) - 1.5).abs() < 1e-12);
        let w = Interaction::from_distance(&grid, |d| d);
        // midpoint rule on ∫∫|x-y| = 1/3 has error h²/6 from the diagonal
        assert!((interaction_energy(&u, &w) - 1.0 / 6.0).abs() < 1e-6);
        let (field, _) = w.field(&u);
        // W[λ](x) = (x² + (1-x)²)/2
        let x = grid.cell_center(EdgeId(0), 250);
        assert!((field.center(EdgeId(0), 250) - 0.5 * (x * x + (1.0 - x) * (1.0 - x))).abs() < 1e-6);
    }

    #[test]
    fn free_energy_lower_bound() {
        let grid = star_grid(0.05);
        let v = EdgeField::from_fn(&grid, |_, s| s.sin());
        let w = Interaction::from_distance(&grid, |d| d * d);
        let mu = MeasureSpec::from_json(r#"{"edges": {"e2": [{"bump": {"center": 0.4, "width": 0.2, "mass": 1}}]}}"#)
            .unwrap()
            .discretize(&grid)
            .unwrap();
        let (_, z) = gibbs(&grid, &v);
        let f = free_energy(&mu, &v, &w).unwrap();
        assert!(f >= -z.ln() + w.min_value() / 2.0);
        let zero = EdgeField::zero(&grid);
        let u = GridMeasure::lebesgue(&grid).normalized().unwrap();
        assert!((free_energy(&u, &zero, &Interaction::zero()).unwrap() + 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn table_kernel_matches_distance_kernel() {
        let grid = star_grid(0.25);
        let pts = grid.support_points();
        let table: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| pts.iter().map(|q| grid.graph().distance_unchecked(p, q)).collect())
            .collect();
        let t = Interaction::from_table(&grid, &table).unwrap();
        let d = Interaction::from_distance(&grid, |x| x);
        let mu = GridMeasure::lebesgue(&grid).normalized().unwrap();
        assert!((t.energy(&mu) - d.energy(&mu)).abs() < 1e-14);
        let mut bad = table.clone();
        bad[0][1] += 1.0;
        assert!(matches!(Interaction::from_table(&grid, &bad), Err(Error::AsymmetricKernel(_))));
    }

    #[test]
    fn bump_pieces_are_exact() {
        let grid = Grid::new(Arc::new(interval(1.0)), 0.01).unwrap();
        let spec = MeasureSpec::from_json(r#"{"edges": {"e": [{"bump": {"center": 0.5, "width": 0.2, "mass": 1}}]}}"#).unwrap();
        let mu = spec.discretize(&grid).unwrap();
        assert!((mu.total_mass() - 1.0).abs() < 1e-14);
        let json = spec.to_json();
        assert_eq!(MeasureSpec::from_json(&json).unwrap(), spec);
    }
}
