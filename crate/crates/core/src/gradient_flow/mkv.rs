//! Implicit Euler finite volumes for `∂_t η = Δη + ∇·(η(∇V + ∇W[μ]))`.
//!
//! The flux through an interface is
//! `J = -e^{-V_I} (ρ_R - ρ_L) / δ - (∇W)⁺ η_R + (∇W)⁻ η_L`,
//! with `W[μ]` frozen at the start of the step. Every vertex carries one
//! trace unknown `ρ_w`, shared by all incident edges, and one Kirchhoff row
//! `Σ_e ι_{ew} J_e(w) = 0`. Cells are eliminated edge by edge (tridiagonal
//! solves), leaving a dense system in the vertex traces.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::{drift, links, rho_cells, vertex_traces, Link, Side};
use crate::dynamics::{FluxField, SpaceTimePath};
use crate::error::{Error, Result};
use crate::grid::{EdgeField, Grid};
use crate::measure::{GridMeasure, Interaction, MASS_TOL};

#[derive(Debug, Clone)]
pub struct MkvState {
    measure: GridMeasure,
    rho: Vec<f64>,
    vertex_rho: Vec<f64>,
    /// flux of the step that produced this state, zero initially
    flux: FluxField,
    t: f64,
}

impl MkvState {
    /// Initial state; vertex traces are extrapolated from the adjacent cells.
    pub fn new(mu: &GridMeasure, v: &EdgeField) -> Result<Self> {
        mu.reject_atoms()?;
        mu.check_probability()?;
        let grid = mu.grid();
        let rho = rho_cells(grid, &mu.densities(), v);
        let (vertex_rho, _) = vertex_traces(grid, &rho);
        Ok(Self { measure: mu.clone(), rho, vertex_rho, flux: FluxField::zero(grid), t: 0.0 })
    }

    pub fn measure(&self) -> &GridMeasure {
        &self.measure
    }

    pub fn grid(&self) -> &Grid {
        self.measure.grid()
    }

    /// `η` per cell.
    pub fn eta(&self) -> Vec<f64> {
        self.measure.densities()
    }

    /// `ρ = η e^V` per cell.
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn vertex_rho(&self) -> &[f64] {
        &self.vertex_rho
    }

    pub fn flux(&self) -> &FluxField {
        &self.flux
    }

    pub fn time(&self) -> f64 {
        self.t
    }
}

/// Interface coefficients: `J = a_l x_l - a_r x_r` in the unknowns
/// (`η` for cells, `ρ` for vertex traces).
fn coefficients(grid: &Grid, links: &[Link], v: &EdgeField, g: &[f64]) -> Vec<(f64, f64)> {
    links
        .iter()
        .zip(g)
        .map(|(l, &gi)| {
            let d = (-v.interface(l.edge, l.k)).exp() / l.delta;
            let (gp, gm) = (gi.max(0.0), (-gi).max(0.0));
            // (scale to ρ, scale to η) for each side
            let factors = |s: Side| match s {
                Side::Cell(c) => {
                    let (e, i) = grid.cell_edge(c);
                    (v.center(e, i).exp(), 1.0)
                }
                Side::Vertex(_) => (1.0, (-v.interface(l.edge, l.k)).exp()),
            };
            let (sl, tl) = factors(l.left);
            let (sr, tr) = factors(l.right);
            (d * sl + gm * tl, d * sr + gp * tr)
        })
        .collect()
}

/// Solves a tridiagonal system in place (`lower[0]`, `upper[n-1]` unused).
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut Vec<f64>) -> Result<()> {
    let n = diag.len();
    scratch.clear();
    scratch.resize(n, 0.0);
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::SingularSystem);
    }
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::SingularSystem);
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
    Ok(())
}

/// One implicit step of length `dt`.
pub fn mkv_step(state: &MkvState, v: &EdgeField, w: &Interaction, dt: f64) -> Result<MkvState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::NonPositiveDt(dt));
    }
    let grid = state.grid();
    let g = grid.graph();
    let links = links(grid);
    let (wf, wv) = w.field(&state.measure);
    let grad_w = drift(grid, &links, &wf, &wv);
    let coef = coefficients(grid, &links, v, &grad_w);
    let eta0 = state.eta();
    let nv = g.vertex_count();

    // per edge: η = y + p ρ_init + q ρ_term
    let mut y = vec![0.0; grid.cell_count()];
    let mut p = vec![0.0; grid.cell_count()];
    let mut q = vec![0.0; grid.cell_count()];
    let mut scratch = Vec::new();
    for e in g.edge_ids() {
        let h = grid.width(e);
        let cells = grid.cells(e);
        let ifs = grid.interfaces(e);
        let n = cells.len();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            let (al_right, ar_right) = coef[ifs.start + i + 1];
            let (al_left, ar_left) = coef[ifs.start + i];
            diag[i] = h + dt * (al_right + ar_left);
            if i > 0 {
                lower[i] = -dt * al_left;
            }
            if i + 1 < n {
                upper[i] = -dt * ar_right;
            }
        }
        let ys = &mut y[cells.clone()];
        ys.iter_mut().zip(&eta0[cells.clone()]).for_each(|(y, e0)| *y = h * e0);
        thomas(&lower, &diag, &upper, ys, &mut scratch)?;
        let ps = &mut p[cells.clone()];
        ps[0] = dt * coef[ifs.start].0;
        thomas(&lower, &diag, &upper, ps, &mut scratch)?;
        let qs = &mut q[cells.clone()];
        qs[n - 1] = dt * coef[ifs.end - 1].1;
        thomas(&lower, &diag, &upper, qs, &mut scratch)?;
    }

    // Kirchhoff rows in the vertex traces
    let mut m = DMatrix::<f64>::zeros(nv, nv);
    let mut f = DVector::<f64>::zeros(nv);
    for e in g.edge_ids() {
        let edge = g.edge(e);
        let (a, b) = (edge.init.0, edge.term.0);
        let cells = grid.cells(e);
        let ifs = grid.interfaces(e);
        // outflow into the edge at its initial vertex: J_0 = a_l ρ_a - a_r η_first
        let (al, ar) = coef[ifs.start];
        let first = cells.start;
        m[(a, a)] += al - ar * p[first];
        m[(a, b)] -= ar * q[first];
        f[a] += ar * y[first];
        // outflow at its terminal vertex: -J_n = a_r ρ_b - a_l η_last
        let (al, ar) = coef[ifs.end - 1];
        let last = cells.end - 1;
        m[(b, b)] += ar - al * q[last];
        m[(b, a)] -= al * p[last];
        f[b] += al * y[last];
    }
    let traces = m.lu().solve(&f).ok_or(Error::SingularSystem)?;
    if traces.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularSystem);
    }

    let mut eta = vec![0.0; grid.cell_count()];
    for e in g.edge_ids() {
        let edge = g.edge(e);
        for c in grid.cells(e) {
            eta[c] = y[c] + p[c] * traces[edge.init.0] + q[c] * traces[edge.term.0];
        }
    }
    let value = |s: Side| match s {
        Side::Cell(c) => eta[c],
        Side::Vertex(v) => traces[v.0],
    };
    let flux: Vec<f64> = links
        .iter()
        .zip(&coef)
        .map(|(l, &(al, ar))| al * value(l.left) - ar * value(l.right))
        .collect();

    let cells: Vec<f64> = (0..grid.cell_count())
        .map(|c| (grid.width(grid.cell_edge(c).0) * eta[c]).max(0.0))
        .collect();
    let measure = GridMeasure::from_cells(grid.clone(), cells)?;
    let rho = rho_cells(grid, &measure.densities(), v);
    Ok(MkvState {
        measure,
        rho,
        vertex_rho: traces.iter().copied().collect(),
        flux: FluxField::new(grid.clone(), flux)?,
        t: state.t + dt,
    })
}

/// Discrete trajectory on `[0, t_end]`; the final step is shortened when
/// `t_end` is not a multiple of `dt`.
#[derive(Debug, Clone)]
pub struct MkvTrajectory {
    pub path: SpaceTimePath,
    pub vertex_rho: Vec<Vec<f64>>,
    /// largest total-mass drift over all steps
    pub mass_defect: f64,
}

impl MkvTrajectory {
    pub fn final_measure(&self) -> &GridMeasure {
        self.path.measures().last().expect("trajectory is never empty")
    }

    /// Rows `(t, edge, cell, eta, rho, flux)`. `flux` is taken at the left
    /// interface of each cell; one extra row per edge (`cell = n`, empty
    /// `eta` and `rho`) carries the flux at the edge's end.
    pub fn to_csv(&self, v: &EdgeField) -> String {
        let grid = self.path.grid();
        let g = grid.graph();
        let mut out = String::from("t,edge,cell,eta,rho,flux\n");
        let zero = FluxField::zero(grid);
        for (step, mu) in self.path.measures().iter().enumerate() {
            let t = self.path.times()[step];
            let flux = if step == 0 { &zero } else { &self.path.fluxes()[step - 1] };
            let eta = mu.densities();
            for e in g.edge_ids() {
                let name = &g.edge(e).name;
                let ifs = grid.interfaces(e);
                for (i, c) in grid.cells(e).enumerate() {
                    let rho = eta[c] * v.center(e, i).exp();
                    let _ = writeln!(out, "{t},{name},{i},{},{rho},{}", eta[c], flux.values()[ifs.start + i]);
                }
                let n = grid.count(e);
                let _ = writeln!(out, "{t},{name},{n},,,{}", flux.values()[ifs.end - 1]);
            }
        }
        out
    }
}

pub fn mkv_flow(mu0: &GridMeasure, v: &EdgeField, w: &Interaction, dt: f64, t_end: f64) -> Result<MkvTrajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::NonPositiveDt(dt));
    }
    if !(t_end >= 0.0) {
        return Err(Error::NegativeTime(t_end));
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let mut state = MkvState::new(mu0, v)?;
    let m0 = mu0.total_mass();
    let mut times = vec![0.0];
    let mut measures = vec![mu0.clone()];
    let mut fluxes = Vec::with_capacity(steps);
    let mut vertex_rho = vec![state.vertex_rho.clone()];
    let mut mass_defect: f64 = 0.0;
    for s in 0..steps {
        let tau = if s + 1 == steps { t_end - s as f64 * dt } else { dt };
        state = mkv_step(&state, v, w, tau)?;
        let mass = state.measure.total_mass();
        if (mass - m0).abs() > MASS_TOL {
            return Err(Error::NotProbability(mass));
        }
        mass_defect = mass_defect.max((mass - m0).abs());
        times.push(if s + 1 == steps { t_end } else { state.t });
        measures.push(state.measure.clone());
        fluxes.push(state.flux.clone());
        vertex_rho.push(state.vertex_rho.clone());
    }
    Ok(MkvTrajectory { path: SpaceTimePath::new(times, measures, fluxes)?, vertex_rho, mass_defect })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dynamics::check_continuity;
    use crate::graph::builders::{interval, three_star};
    use crate::measure::gibbs;

    fn bump(grid: &Grid) -> GridMeasure {
        GridMeasure::from_density_fn(grid.clone(), |e, s| {
            if e.0 == 0 && (s - 0.5).abs() < 0.25 {
                (std::f64::consts::PI * (s - 0.5) / 0.5).cos().powi(2) / 0.25
            } else {
                0.0
            }
        })
        .unwrap()
        .normalized()
        .unwrap()
    }

    #[test]
    fn uniform_is_stationary_without_potentials() {
        let grid = Grid::new(Arc::new(three_star(1.0)), 0.05).unwrap();
        let mu = GridMeasure::lebesgue(&grid).normalized().unwrap();
        let v = EdgeField::zero(&grid);
        let s = MkvState::new(&mu, &v).unwrap();
        let next = mkv_step(&s, &v, &Interaction::zero(), 0.1).unwrap();
        assert!(next.measure().l1_distance(&mu).unwrap() < 1e-14);
        assert!(next.flux().values().iter().all(|j| j.abs() < 1e-13));
    }

    #[test]
    fn gibbs_is_stationary() {
        let grid = Grid::new(Arc::new(three_star(1.0)), 0.02).unwrap();
        // continuous at the centre vertex, where e1 and e2 end and f starts
        let v = EdgeField::from_fn(&grid, |e, s| {
            match e.0 {
                0 | 1 => (1.0 - s).powi(2) * (1.0 + e.0 as f64),
                _ => s * s,
            }
        });
        let (mu, _) = gibbs(&grid, &v);
        let s = MkvState::new(&mu, &v).unwrap();
        let next = mkv_step(&s, &v, &Interaction::zero(), 0.01).unwrap();
        assert!(next.measure().l1_distance(&mu).unwrap() < 1e-12);
    }

    #[test]
    fn conserves_mass_and_satisfies_continuity() {
        let grid = Grid::new(Arc::new(three_star(1.0)), 0.02).unwrap();
        let v = EdgeField::from_fn(&grid, |_, s| 0.5 * s);
        let w = Interaction::from_distance(&grid, |d| d * d);
        let traj = mkv_flow(&bump(&grid), &v, &w, 1e-3, 0.05).unwrap();
        assert!(traj.mass_defect < 1e-12);
        let report = check_continuity(&traj.path).unwrap();
        assert!(report.max() < 1e-12, "{report:?}");
        for mu in traj.path.measures() {
            assert!(mu.cells().iter().all(|&m| m >= 0.0));
        }
    }

    #[test]
    fn heat_flow_spreads_to_uniform() {
        let grid = Grid::new(Arc::new(interval(1.0)), 0.02).unwrap();
        let v = EdgeField::zero(&grid);
        let traj = mkv_flow(&bump(&grid), &v, &Interaction::zero(), 1e-2, 3.0).unwrap();
        let uniform = GridMeasure::lebesgue(&grid).normalized().unwrap();
        assert!(traj.final_measure().l1_distance(&uniform).unwrap() < 1e-6);
        assert_eq!(traj.path.times().len(), 301);
    }

    #[test]
    fn rejects_bad_steps() {
        let grid = Grid::new(Arc::new(interval(1.0)), 0.1).unwrap();
        let v = EdgeField::zero(&grid);
        let s = MkvState::new(&bump(&grid), &v).unwrap();
        assert_eq!(mkv_step(&s, &v, &Interaction::zero(), 0.0).unwrap_err(), Error::NonPositiveDt(0.0));
    }
}
