//! Regularisation by non-centred averaging over an extended graph.
//!
//! Every vertex `v` receives an auxiliary leaf edge of length `2ε`, oriented
//! away from `v`. Along a base edge `e` of length `ℓ` the extended line runs
//! over `u ∈ [-2ε, ℓ + 2ε]`: negative `u` is the auxiliary edge at the
//! initial vertex (at distance `-u`), `u > ℓ` the one at the terminal vertex.
//! A point `s` of `e` averages over the window of half-width `ε` centred at
//! `α (s - ℓ/2) + ℓ/2`, where `α = (ℓ + 2ε)/ℓ`.

use std::sync::Arc;

use crate::dynamics::FluxField;
use crate::error::{Error, Result};
use crate::graph::{builders::description, EdgeId, MetricGraph, VertexId};
use crate::grid::{Grid, NodalFunction};
use crate::measure::GridMeasure;
use crate::piecewise::{adaptive, merge_breaks, PiecewiseLinear, Quadrature};

#[derive(Debug, Clone)]
pub struct ExtendedGraph {
    base: Grid,
    eps: f64,
    grid: Grid,
}

/// A base edge contributing to a point of the extended graph: the edge, the
/// point's coordinate on that edge's extended line, and the orientation of
/// the extended edge relative to the line.
#[derive(Debug, Clone, Copy)]
struct Contribution {
    edge: EdgeId,
    u: f64,
    sign: f64,
}

impl ExtendedGraph {
    /// Extends the graph of `base`; auxiliary edges get cells no wider than
    /// the finest base cell.
    pub fn new(base: &Grid, eps: f64) -> Result<Self> {
        let g = base.graph();
        let min_length = g.min_edge_length();
        if !(eps > 0.0) {
            return Err(Error::ParameterOutOfRange { name: "eps", value: eps });
        }
        if 2.0 * eps >= min_length {
            return Err(Error::EpsilonTooLarge { two_eps: 2.0 * eps, min_length });
        }
        let mut vertices: Vec<String> = g.vertex_ids().map(|v| g.vertex_name(v).to_string()).collect();
        let leaves: Vec<String> = vertices.iter().map(|v| format!("{v}~ext")).collect();
        vertices.extend(leaves.iter().cloned());
        let mut edges: Vec<(String, String, String, f64)> = g
            .edges()
            .iter()
            .map(|e| (e.name.clone(), g.vertex_name(e.init).to_string(), g.vertex_name(e.term).to_string(), e.length))
            .collect();
        for v in g.vertex_ids() {
            edges.push((leaves[v.0].clone(), g.vertex_name(v).to_string(), leaves[v.0].clone(), 2.0 * eps));
        }
        let v: Vec<&str> = vertices.iter().map(String::as_str).collect();
        let e: Vec<(&str, &str, &str, f64)> =
            edges.iter().map(|(i, a, b, l)| (i.as_str(), a.as_str(), b.as_str(), *l)).collect();
        let ext = Arc::new(MetricGraph::from_description(&description(&v, &e))?);
        let aux_cells = ((2.0 * eps / base.min_width() - 1e-9).ceil() as usize).max(1);
        let mut counts = base.counts().to_vec();
        counts.extend(std::iter::repeat_n(aux_cells, g.vertex_count()));
        let grid = Grid::with_counts(ext, counts)?;
        Ok(Self { base: base.clone(), eps, grid })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn base_grid(&self) -> &Grid {
        &self.base
    }

    /// Grid on the extended graph.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn graph(&self) -> &MetricGraph {
        self.grid.graph()
    }

    pub fn aux_edge(&self, v: VertexId) -> EdgeId {
        EdgeId(self.base.graph().edge_count() + v.0)
    }

    fn is_aux(&self, e: EdgeId) -> bool {
        e.0 >= self.base.graph().edge_count()
    }

    pub fn alpha(&self, e: EdgeId) -> f64 {
        let l = self.base.graph().edge(e).length;
        (l + 2.0 * self.eps) / l
    }

    /// Centre of the averaging window of base point `(e, s)` on the extended line.
    pub fn window_center(&self, e: EdgeId, s: f64) -> f64 {
        let l = self.base.graph().edge(e).length;
        self.alpha(e) * (s - 0.5 * l) + 0.5 * l
    }

    /// Base points whose window covers `u`: the interval `I_e(u)` in edge
    /// coordinates, clamped to the edge.
    fn preimage(&self, e: EdgeId, u: f64) -> (f64, f64) {
        let l = self.base.graph().edge(e).length;
        let a = self.alpha(e);
        let lo = (u - 0.5 * l - self.eps) / a + 0.5 * l;
        let hi = (u - 0.5 * l + self.eps) / a + 0.5 * l;
        (lo.clamp(0.0, l), hi.clamp(0.0, l))
    }

    fn contributions(&self, e: EdgeId, x: f64) -> Vec<Contribution> {
        if !self.is_aux(e) {
            return vec![Contribution { edge: e, u: x, sign: 1.0 }];
        }
        let v = VertexId(e.0 - self.base.graph().edge_count());
        let g = self.base.graph();
        g.incident(v)
            .iter()
            .map(|&(b, iota)| {
                if iota > 0 {
                    Contribution { edge: b, u: -x, sign: -1.0 }
                } else {
                    Contribution { edge: b, u: g.edge(b).length + x, sign: 1.0 }
                }
            })
            .collect()
    }

    /// Coordinates on extended edge `e` where some window endpoint crosses one
    /// of the base `nodes(edge)`.
    fn breakpoints(&self, e: EdgeId, nodes: &dyn Fn(EdgeId) -> Vec<f64>) -> Vec<f64> {
        let len = self.graph().edge(e).length;
        let mut out = vec![0.0, len];
        for c in self.contributions(e, 0.0) {
            let l = self.base.graph().edge(c.edge).length;
            for s in nodes(c.edge) {
                let centre = self.window_center(c.edge, s);
                for u in [centre - self.eps, centre + self.eps] {
                    let x = if !self.is_aux(e) {
                        u
                    } else if c.sign < 0.0 {
                        -u
                    } else {
                        u - l
                    };
                    if x > 0.0 && x < len {
                        out.push(x);
                    }
                }
            }
        }
        merge_breaks(out, 1e-14)
    }

    fn cell_boundaries(&self, e: EdgeId) -> Vec<f64> {
        (0..=self.base.count(e)).map(|k| self.base.interface_coord(e, k)).collect()
    }

    fn check_base(&self, grid: &Grid) -> Result<()> {
        if *grid != self.base {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// PL representation of `φ` along the extended line of base edge `e`.
    fn line(&self, phi: &NodalFunction, e: EdgeId) -> PiecewiseLinear {
        let g = self.base.graph();
        let edge = g.edge(e);
        let l = edge.length;
        let (xs_init, ys_init) = phi.edge_nodes(self.aux_edge(edge.init));
        let (xs_base, ys_base) = phi.edge_nodes(e);
        let (xs_term, ys_term) = phi.edge_nodes(self.aux_edge(edge.term));
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (x, y) in xs_init.iter().zip(&ys_init).rev() {
            xs.push(-x);
            ys.push(*y);
        }
        xs.extend(xs_base.iter().skip(1));
        ys.extend(ys_base.iter().skip(1));
        xs.extend(xs_term.iter().skip(1).map(|x| l + x));
        ys.extend(ys_term.iter().skip(1));
        PiecewiseLinear::new(xs, ys)
    }
}

/// Regularised function on the base graph, with exact window averages.
#[derive(Debug, Clone)]
pub struct RegularizedFunction {
    ext: ExtendedGraph,
    lines: Vec<PiecewiseLinear>,
}

impl RegularizedFunction {
    pub fn value(&self, e: EdgeId, s: f64) -> f64 {
        let c = self.ext.window_center(e, s);
        let eps = self.ext.eps;
        self.lines[e.0].integral(c - eps, c + eps) / (2.0 * eps)
    }

    /// `∇φ^ε(s) = (α/2ε)(φ(c + ε) − φ(c − ε))`.
    pub fn gradient(&self, e: EdgeId, s: f64) -> f64 {
        let c = self.ext.window_center(e, s);
        let eps = self.ext.eps;
        self.ext.alpha(e) / (2.0 * eps) * (self.lines[e.0].eval(c + eps) - self.lines[e.0].eval(c - eps))
    }

    /// `∫_a^b φ^ε(s) ds`, exact.
    pub fn integral(&self, e: EdgeId, a: f64, b: f64) -> f64 {
        let eps = self.ext.eps;
        let alpha = self.ext.alpha(e);
        let line = &self.lines[e.0];
        let (ca, cb) = (self.ext.window_center(e, a), self.ext.window_center(e, b));
        let f2 = |x: f64| line.second_antiderivative(x);
        (f2(cb + eps) - f2(ca + eps) - f2(cb - eps) + f2(ca - eps)) / (2.0 * eps * alpha)
    }

    /// `∫ φ^ε dμ` for a measure on the base grid (cellwise-constant densities).
    pub fn integrate(&self, mu: &GridMeasure) -> f64 {
        let grid = mu.grid();
        let g = grid.graph();
        let mut total = 0.0;
        for e in g.edge_ids() {
            let h = grid.width(e);
            for (i, c) in grid.cells(e).enumerate() {
                if mu.cells()[c] != 0.0 {
                    let a = grid.interface_coord(e, i);
                    total += mu.cells()[c] / h * self.integral(e, a, grid.interface_coord(e, i + 1));
                }
            }
        }
        for v in g.vertex_ids() {
            let a = mu.atoms()[v.0];
            if a != 0.0 {
                let p = g.vertex_point(v);
                total += a * self.value(p.edge, p.s);
            }
        }
        total
    }

    /// Sampled at the base grid nodes.
    pub fn to_nodal(&self) -> NodalFunction {
        NodalFunction::from_fn(&self.ext.base, |p| self.value(p.edge, p.s))
    }
}

/// `φ^ε(x) = (1/2ε) ∫_{αx−ε}^{αx+ε} φ` for `φ` given on the extended grid.
pub fn regularize_function(ext: &ExtendedGraph, phi: &NodalFunction) -> Result<RegularizedFunction> {
    if *phi.grid() != ext.grid {
        return Err(Error::GridMismatch);
    }
    let lines = ext.base.graph().edge_ids().map(|e| ext.line(phi, e)).collect();
    Ok(RegularizedFunction { ext: ext.clone(), lines })
}

/// Pointwise view of a regularised measure (and optionally a flux).
pub struct RegularizedDensity<'a> {
    ext: &'a ExtendedGraph,
    /// cumulative mass along each base edge
    mass: Vec<PiecewiseLinear>,
    atoms: Vec<f64>,
}

impl<'a> RegularizedDensity<'a> {
    pub fn new(ext: &'a ExtendedGraph, mu: &GridMeasure) -> Result<Self> {
        ext.check_base(mu.grid())?;
        let grid = mu.grid();
        let mass = grid
            .graph()
            .edge_ids()
            .map(|e| {
                let xs = ext.cell_boundaries(e);
                let mut ys = vec![0.0];
                for c in grid.cells(e) {
                    ys.push(ys.last().unwrap() + mu.cells()[c]);
                }
                PiecewiseLinear::new(xs, ys)
            })
            .collect();
        Ok(Self { ext, mass, atoms: mu.atoms().to_vec() })
    }

    /// `ρ^ε` at coordinate `x` of extended edge `e`.
    pub fn density(&self, e: EdgeId, x: f64) -> f64 {
        let mut total = 0.0;
        for c in self.ext.contributions(e, x) {
            let (lo, hi) = self.ext.preimage(c.edge, c.u);
            total += self.mass[c.edge.0].eval(hi) - self.mass[c.edge.0].eval(lo);
        }
        if self.ext.is_aux(e) {
            let v = e.0 - self.ext.base.graph().edge_count();
            total += self.atoms[v];
        }
        total / (2.0 * self.ext.eps)
    }

    pub fn breakpoints(&self, e: EdgeId) -> Vec<f64> {
        self.ext.breakpoints(e, &|b| self.ext.cell_boundaries(b))
    }
}

/// `μ^ε` on the extended grid, cell masses integrated exactly from the density
/// `ρ^ε(x) = (1/2ε) μ(e ∩ I_e(x))` (plus the atom term on auxiliary edges).
pub fn regularize_measure(ext: &ExtendedGraph, mu: &GridMeasure) -> Result<GridMeasure> {
    let dens = RegularizedDensity::new(ext, mu)?;
    let grid = &ext.grid;
    let mut cells = vec![0.0; grid.cell_count()];
    for e in grid.graph().edge_ids() {
        let breaks = dens.breakpoints(e);
        for (i, c) in grid.cells(e).enumerate() {
            let (a, b) = (grid.interface_coord(e, i), grid.interface_coord(e, i + 1));
            // ρ^ε is linear between breakpoints, so the trapezoid rule is exact
            let mut pts = vec![a];
            pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
            pts.push(b);
            cells[c] = pts
                .windows(2)
                .map(|w| 0.5 * (w[1] - w[0]) * (dens.density(e, w[0]) + dens.density(e, w[1])))
                .sum();
        }
    }
    GridMeasure::from_cells(grid.clone(), cells)
}

/// Pointwise view of a regularised flux. The flux density along each base
/// edge is the piecewise-linear interpolant of its interface values.
pub struct RegularizedFlux<'a> {
    ext: &'a ExtendedGraph,
    flux: Vec<PiecewiseLinear>,
}

impl<'a> RegularizedFlux<'a> {
    pub fn new(ext: &'a ExtendedGraph, j: &FluxField) -> Result<Self> {
        ext.check_base(j.grid())?;
        let grid = j.grid();
        let flux = grid
            .graph()
            .edge_ids()
            .map(|e| PiecewiseLinear::new(ext.cell_boundaries(e), j.values()[grid.interfaces(e)].to_vec()))
            .collect();
        Ok(Self { ext, flux })
    }

    fn combine(&self, e: EdgeId, x: f64, weighted: bool) -> f64 {
        let mut total = 0.0;
        for c in self.ext.contributions(e, x) {
            let (lo, hi) = self.ext.preimage(c.edge, c.u);
            let w = if weighted { self.ext.alpha(c.edge) } else { 1.0 };
            total += c.sign * w * self.flux[c.edge.0].integral(lo, hi);
        }
        total / (2.0 * self.ext.eps)
    }

    /// Density of `J^ε` along the orientation of extended edge `e`.
    pub fn density(&self, e: EdgeId, x: f64) -> f64 {
        self.combine(e, x, false)
    }

    /// Density of `α J^ε`, the flux that transports `μ^ε`.
    pub fn weighted_density(&self, e: EdgeId, x: f64) -> f64 {
        self.combine(e, x, true)
    }

    pub fn breakpoints(&self, e: EdgeId) -> Vec<f64> {
        self.ext.breakpoints(e, &|b| self.ext.cell_boundaries(b))
    }
}

/// `α J^ε` sampled at the interfaces of the extended grid.
pub fn regularize_flux(ext: &ExtendedGraph, j: &FluxField) -> Result<FluxField> {
    let rf = RegularizedFlux::new(ext, j)?;
    let grid = &ext.grid;
    let mut values = vec![0.0; grid.interface_count()];
    for e in grid.graph().edge_ids() {
        for (k, idx) in grid.interfaces(e).enumerate() {
            values[idx] = rf.weighted_density(e, grid.interface_coord(e, k));
        }
    }
    FluxField::new(grid.clone(), values)
}

/// `∫ j² / ρ` on the base graph for cellwise-constant `ρ` and piecewise-linear
/// `j`; `+∞` when flux crosses a region of zero density.
pub fn kinetic_energy(mu: &GridMeasure, j: &FluxField) -> f64 {
    let grid = mu.grid();
    let mut total = 0.0;
    for e in grid.graph().edge_ids() {
        let vals = &j.values()[grid.interfaces(e)];
        let h = grid.width(e);
        for (i, c) in grid.cells(e).enumerate() {
            let (a, b) = (vals[i], vals[i + 1]);
            let int_sq = h * (a * a + a * b + b * b) / 3.0;
            if int_sq == 0.0 {
                continue;
            }
            let rho = mu.cells()[c] / h;
            if rho <= 0.0 {
                return f64::INFINITY;
            }
            total += int_sq / rho;
        }
    }
    total
}

/// `∫ |j^ε|² / ρ^ε` over the extended graph, by adaptive quadrature between
/// breakpoints.
pub fn regularized_kinetic_energy(ext: &ExtendedGraph, mu: &GridMeasure, j: &FluxField) -> Result<f64> {
    let dens = RegularizedDensity::new(ext, mu)?;
    let flux = RegularizedFlux::new(ext, j)?;
    let mut total = 0.0;
    for e in ext.grid.graph().edge_ids() {
        let breaks = dens.breakpoints(e);
        for w in breaks.windows(2) {
            let mut infinite = false;
            total += adaptive(w[0], w[1], 1e-14, &mut |x: f64| {
                let jv = flux.density(e, x);
                if jv == 0.0 {
                    return 0.0;
                }
                let r = dens.density(e, x);
                if r <= 0.0 {
                    // the flux vanishes wherever the windows see no mass
                    if jv.abs() > 1e-13 {
                        infinite = true;
                    }
                    return 0.0;
                }
                jv * jv / r
            });
            if infinite {
                return Ok(f64::INFINITY);
            }
        }
    }
    Ok(total)
}

/// `∫ φ dμ^ε` for `φ` on the extended grid, exact: `φ ρ^ε` is quadratic
/// between the merged breakpoints.
pub fn integrate_regularized(ext: &ExtendedGraph, mu: &GridMeasure, phi: &NodalFunction) -> Result<f64> {
    let dens = RegularizedDensity::new(ext, mu)?;
    let q = Quadrature::new(3);
    let mut total = 0.0;
    for e in ext.grid.graph().edge_ids() {
        let (xs, ys) = phi.edge_nodes(e);
        let mut breaks = dens.breakpoints(e);
        breaks.extend(xs.iter().copied());
        let breaks = merge_breaks(breaks, 1e-14);
        let line = PiecewiseLinear::new(xs, ys);
        total += q.integrate_pieces(0.0, ext.graph().edge(e).length, &breaks, |x| line.eval(x) * dens.density(e, x));
    }
    Ok(total)
}
