//! Continuity equation with Kirchhoff coupling, the Benamou-Brenier action
//! and the dynamical transport solver.
//!
//! Densities live at cell centres and integer times, fluxes at interfaces and
//! half times. A discrete pair satisfies
//! `m_i(t_{k+1}) - m_i(t_k) + Δt (U_{i+½} - U_{i-½}) = 0` on every cell and
//! `Σ_e ι_{ew} U_e(w) = 0` at every vertex.

pub(crate) mod bb;

use std::fmt::Write as _;

use serde::Serialize;

pub use bb::{prox_perspective, solve_bb, BbOptions, BbSolution};

use crate::error::{Error, Result};
use crate::graph::VertexId;
use crate::grid::Grid;
use crate::measure::GridMeasure;
use crate::regularize::{regularize_flux, regularize_measure, ExtendedGraph};

/// Momentum values at the interfaces of a grid, oriented along each edge.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    grid: Grid,
    values: Vec<f64>,
}

impl FluxField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.interface_count() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("flux values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zero(grid: &Grid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.interface_count()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `Σ_e ι_{ew} U_e(w)`: net momentum leaving vertex `w`.
    pub fn vertex_balance(&self, w: VertexId) -> f64 {
        let g = self.grid.graph();
        g.incident(w)
            .iter()
            .map(|&(e, iota)| iota as f64 * self.values[self.grid.vertex_interface(e, w)])
            .sum()
    }
}

/// Time-indexed densities with fluxes on the half steps.
#[derive(Debug, Clone)]
pub struct SpaceTimePath {
    times: Vec<f64>,
    measures: Vec<GridMeasure>,
    fluxes: Vec<FluxField>,
}

impl SpaceTimePath {
    pub fn new(times: Vec<f64>, measures: Vec<GridMeasure>, fluxes: Vec<FluxField>) -> Result<Self> {
        if times.len() < 2 || measures.len() != times.len() || fluxes.len() + 1 != times.len() {
            return Err(Error::InvalidInput("path needs K+1 times, K+1 measures and K fluxes".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("times must increase".into()));
        }
        let grid = measures[0].grid();
        if measures.iter().any(|m| m.grid() != grid) || fluxes.iter().any(|f| f.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { times, measures, fluxes })
    }

    /// The constant path at `mu` with zero flux.
    pub fn constant(mu: &GridMeasure, times: Vec<f64>) -> Result<Self> {
        let k = times.len().saturating_sub(1);
        Self::new(times, vec![mu.clone(); k + 1], vec![FluxField::zero(mu.grid()); k])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn measures(&self) -> &[GridMeasure] {
        &self.measures
    }

    pub fn fluxes(&self) -> &[FluxField] {
        &self.fluxes
    }

    pub fn grid(&self) -> &Grid {
        self.measures[0].grid()
    }

    pub fn steps(&self) -> usize {
        self.fluxes.len()
    }

    /// `Σ_k Δt_k · bb_action(ρ̄_{k+½}, U_{k+½})` with the time-averaged density.
    pub fn action(&self) -> f64 {
        (0..self.steps())
            .map(|k| {
                let dt = self.times[k + 1] - self.times[k];
                let mid: Vec<f64> = self.measures[k]
                    .cells()
                    .iter()
                    .zip(self.measures[k + 1].cells())
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                let mid = GridMeasure::from_cells(self.grid().clone(), mid).expect("average of valid measures");
                dt * bb_action(&mid, &self.fluxes[k]).value
            })
            .sum()
    }

    /// CSV rows `t,edge,cell,density,flux`; `flux` is the cell average of the
    /// interface momentum, averaged over the half steps adjacent to `t`.
    pub fn to_csv(&self) -> String {
        let grid = self.grid();
        let g = grid.graph();
        let mut out = String::from("t,edge,cell,density,flux\n");
        for (k, (t, mu)) in self.times.iter().zip(&self.measures).enumerate() {
            let adjacent: Vec<&FluxField> = [k.checked_sub(1), (k < self.steps()).then_some(k)]
                .into_iter()
                .flatten()
                .map(|j| &self.fluxes[j])
                .collect();
            for e in g.edge_ids() {
                let ifs = grid.interfaces(e);
                for (i, c) in grid.cells(e).enumerate() {
                    let flux = adjacent
                        .iter()
                        .map(|f| 0.5 * (f.values[ifs.start + i] + f.values[ifs.start + i + 1]))
                        .sum::<f64>()
                        / adjacent.len() as f64;
                    writeln!(out, "{:.9e},{},{i},{:.12e},{:.12e}", t, g.edge(e).name, mu.density(c), flux).unwrap();
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub cell_max: f64,
    pub cell_l1: f64,
    pub vertex_max: f64,
    pub vertex_l1: f64,
}

impl ContinuityReport {
    pub fn max(&self) -> f64 {
        self.cell_max.max(self.vertex_max)
    }
}

/// Residuals of the conservative update on every cell and of the Kirchhoff
/// balance at every vertex, over all steps.
pub fn check_continuity(path: &SpaceTimePath) -> Result<ContinuityReport> {
    for mu in &path.measures {
        mu.reject_atoms()?;
    }
    let grid = path.grid();
    let g = grid.graph();
    let mut report = ContinuityReport { cell_max: 0.0, cell_l1: 0.0, vertex_max: 0.0, vertex_l1: 0.0 };
    for k in 0..path.steps() {
        let dt = path.times[k + 1] - path.times[k];
        let (m0, m1) = (path.measures[k].cells(), path.measures[k + 1].cells());
        let u = &path.fluxes[k].values;
        for e in g.edge_ids() {
            let ifs = grid.interfaces(e);
            for (i, c) in grid.cells(e).enumerate() {
                let r = (m1[c] - m0[c] + dt * (u[ifs.start + i + 1] - u[ifs.start + i])).abs();
                report.cell_max = report.cell_max.max(r);
                report.cell_l1 += r;
            }
        }
        for w in g.vertex_ids() {
            let r = path.fluxes[k].vertex_balance(w).abs() * dt;
            report.vertex_max = report.vertex_max.max(r);
            report.vertex_l1 += r;
        }
    }
    Ok(report)
}

/// `∫ |v|² dμ` for a discrete pair, i.e. twice the Benamou-Brenier functional.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionValue {
    pub value: f64,
    pub finite: bool,
    /// `U / ρ̄` per interface, zero where both vanish
    pub velocity: Option<Vec<f64>>,
}

/// Interface weight `h_I` and averaged density `ρ̄_I` for every interface:
/// interior interfaces use the two neighbouring cells, vertex interfaces the
/// mean over all boundary cells touching the vertex and half a cell width.
pub fn interface_densities(mu: &GridMeasure) -> (Vec<f64>, Vec<f64>) {
    let grid = mu.grid();
    let g = grid.graph();
    let rho = mu.densities();
    let mut vertex_rho = vec![0.0; g.vertex_count()];
    for w in g.vertex_ids() {
        let inc = g.incident(w);
        vertex_rho[w.0] = inc.iter().map(|&(e, _)| rho[grid.boundary_cell(e, w)]).sum::<f64>() / inc.len() as f64;
    }
    let mut weight = vec![0.0; grid.interface_count()];
    let mut avg = vec![0.0; grid.interface_count()];
    for e in g.edge_ids() {
        let edge = g.edge(e);
        let h = grid.width(e);
        let cells = grid.cells(e);
        for (k, idx) in grid.interfaces(e).enumerate() {
            if k == 0 {
                weight[idx] = 0.5 * h;
                avg[idx] = vertex_rho[edge.init.0];
            } else if k == cells.len() {
                weight[idx] = 0.5 * h;
                avg[idx] = vertex_rho[edge.term.0];
            } else {
                weight[idx] = h;
                avg[idx] = 0.5 * (rho[cells.start + k - 1] + rho[cells.start + k]);
            }
        }
    }
    (weight, avg)
}

/// `Σ_I h_I U_I² / ρ̄_I`, `+∞` when momentum sits on zero density or the
/// measure is negative somewhere.
pub fn bb_action(mu: &GridMeasure, j: &FluxField) -> ActionValue {
    if mu.grid() != j.grid() || mu.has_atoms() {
        return ActionValue { value: f64::INFINITY, finite: false, velocity: None };
    }
    let (weight, avg) = interface_densities(mu);
    let mut value = 0.0;
    let mut velocity = vec![0.0; avg.len()];
    for (i, &u) in j.values.iter().enumerate() {
        if u == 0.0 {
            continue;
        }
        if avg[i] <= 0.0 {
            return ActionValue { value: f64::INFINITY, finite: false, velocity: None };
        }
        velocity[i] = u / avg[i];
        value += weight[i] * u * u / avg[i];
    }
    ActionValue { value, finite: true, velocity: Some(velocity) }
}

/// Regularises every measure and flux of `path` onto the extended graph. The
/// returned fluxes carry the factor `α`, so the result satisfies the plain
/// discrete continuity equation there.
pub fn regularize_path(ext: &ExtendedGraph, path: &SpaceTimePath) -> Result<SpaceTimePath> {
    let measures = path.measures.iter().map(|m| regularize_measure(ext, m)).collect::<Result<Vec<_>>>()?;
    let fluxes = path.fluxes.iter().map(|f| regularize_flux(ext, f)).collect::<Result<Vec<_>>>()?;
    SpaceTimePath::new(path.times.clone(), measures, fluxes)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::builders::{interval, three_star};
    use crate::graph::EdgeId;
    use crate::measure::MeasureSpec;

    fn times(k: usize) -> Vec<f64> {
        (0..=k).map(|i| i as f64 / k as f64).collect()
    }

    #[test]
    fn constant_path_has_no_residual() {
        let grid = Grid::new(Arc::new(three_star(1.0)), 0.1).unwrap();
        let mu = GridMeasure::lebesgue(&grid).normalized().unwrap();
        let path = SpaceTimePath::constant(&mu, times(4)).unwrap();
        assert_eq!(check_continuity(&path).unwrap().max(), 0.0);
        assert_eq!(path.action(), 0.0);
    }

    #[test]
    fn translating_bump_with_matching_flux() {
        let grid = Grid::new(Arc::new(interval(1.0)), 0.01).unwrap();
        let k = 10;
        let measures: Vec<GridMeasure> = (0..=k)
            .map(|i| {
                let c = 0.3 + 0.4 * i as f64 / k as f64;
                let spec = format!(r#"{{"edges": {{"e": [{{"bump": {{"center": {c}, "width": 0.1, "mass": 1}}}}]}}}}"#);
                MeasureSpec::from_json(&spec).unwrap().discretize(&grid).unwrap()
            })
            .collect();
        // flux through interface j is minus the mass change to its left
        let dt = 1.0 / k as f64;
        let fluxes: Vec<FluxField> = (0..k)
            .map(|i| {
                let mut vals = vec![0.0; grid.interface_count()];
                let mut acc = 0.0;
                for c in 0..grid.cell_count() {
                    acc += measures[i + 1].cells()[c] - measures[i].cells()[c];
                    vals[c + 1] = -acc / dt;
                }
                vals[grid.cell_count()] = 0.0;
                FluxField::new(grid.clone(), vals).unwrap()
            })
            .collect();
        let path = SpaceTimePath::new(times(k), measures, fluxes).unwrap();
        assert!(check_continuity(&path).unwrap().max() <= 1e-12);
    }

    #[test]
    fn injected_vertex_flux_is_reported() {
        let grid = Grid::new(Arc::new(three_star(1.0)), 0.25).unwrap();
        let mu = GridMeasure::lebesgue(&grid).normalized().unwrap();
        let mut flux = FluxField::zero(&grid);
        let c = VertexId(2);
        flux.values_mut()[grid.vertex_interface(EdgeId(2), c)] = 0.7;
        let path = SpaceTimePath::new(vec![0.0, 1.0], vec![mu.clone(), mu], vec![flux]).unwrap();
        let r = check_continuity(&path).unwrap();
        assert!((r.vertex_max - 0.7).abs() < 1e-15);
        let atom = GridMeasure::dirac(&grid, &grid.graph().vertex_point(c));
        let bad = SpaceTimePath::constant(&atom, times(2)).unwrap();
        assert!(matches!(check_continuity(&bad), Err(Error::AtomPresent(_))));
    }

    #[test]
    fn action_examples() {
        let grid = Grid::new(Arc::new(interval(2.0)), 0.1).unwrap();
        let mu = GridMeasure::lebesgue(&grid).normalized().unwrap().normalized().unwrap();
        let ones = GridMeasure::lebesgue(&grid);
        assert_eq!(bb_action(&mu, &FluxField::zero(&grid)).value, 0.0);
        let c = 0.7;
        let flux = FluxField::new(grid.clone(), vec![c; grid.interface_count()]).unwrap();
        assert!((bb_action(&ones, &flux).value - c * c * 2.0).abs() < 1e-13);
        let mut cells = ones.cells().to_vec();
        cells[5] = 0.0;
        cells[6] = 0.0;
        let holed = GridMeasure::from_cells(grid.clone(), cells).unwrap();
        let a = bb_action(&holed, &flux);
        assert!(!a.finite && a.value == f64::INFINITY);
    }
}
