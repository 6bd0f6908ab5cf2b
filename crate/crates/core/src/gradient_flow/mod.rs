//! Free-energy gradient flows: the dissipation functional, an implicit
//! finite-volume McKean-Vlasov solver, minimising movements and the
//! energy-dissipation balance.
//!
//! `η` is the density of `μ` with respect to `λ`, `ρ = η e^V` its density with
//! respect to `𝔪 = e^{-V} λ`. Cell values use `V` at cell centres.

mod dissipation;
mod jko;
mod mkv;

pub use dissipation::{
    chain_rule_check, dissipation, dissipation0, energy_dissipation_check, linfty_bound_check, sobolev_constant,
    ChainRuleSample, DissipationReport, EdeReport, EdeSample, LinftyReport,
};
pub use jko::{jko_flow, jko_step, slope_estimate, JkoFlow, JkoOptions, JkoStep, SlopeEstimate};
pub use mkv::{mkv_flow, mkv_step, MkvState, MkvTrajectory};

use crate::graph::{EdgeId, VertexId};
use crate::grid::{EdgeField, Grid};

/// One end of an interface: a cell or a vertex trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Side {
    Cell(usize),
    Vertex(VertexId),
}

/// Geometry of one interface, oriented along its edge.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Link {
    pub edge: EdgeId,
    /// local interface index on the edge
    pub k: usize,
    pub left: Side,
    pub right: Side,
    /// distance between the two sample points
    pub delta: f64,
    /// quadrature weight `h_I`
    pub weight: f64,
}

impl Link {
    pub fn is_interior(&self) -> bool {
        matches!((self.left, self.right), (Side::Cell(_), Side::Cell(_)))
    }
}

/// All interfaces in global order.
pub(crate) fn links(grid: &Grid) -> Vec<Link> {
    let g = grid.graph();
    let mut out = Vec::with_capacity(grid.interface_count());
    for e in g.edge_ids() {
        let edge = g.edge(e);
        let h = grid.width(e);
        let cells = grid.cells(e);
        let n = cells.len();
        for k in 0..=n {
            let (left, right, delta, weight) = if k == 0 {
                (Side::Vertex(edge.init), Side::Cell(cells.start), 0.5 * h, 0.5 * h)
            } else if k == n {
                (Side::Cell(cells.end - 1), Side::Vertex(edge.term), 0.5 * h, 0.5 * h)
            } else {
                (Side::Cell(cells.start + k - 1), Side::Cell(cells.start + k), h, h)
            };
            out.push(Link { edge: e, k, left, right, delta, weight });
        }
    }
    out
}

/// `∇W[μ]` per interface: centred between cells, one-sided at vertices.
pub(crate) fn drift(grid: &Grid, links: &[Link], field: &EdgeField, vertex: &[f64]) -> Vec<f64> {
    let value = |s: Side| match s {
        Side::Cell(c) => {
            let (e, i) = grid.cell_edge(c);
            field.center(e, i)
        }
        Side::Vertex(v) => vertex[v.0],
    };
    links.iter().map(|l| (value(l.right) - value(l.left)) / l.delta).collect()
}

/// `ρ = η e^V` per cell.
pub(crate) fn rho_cells(grid: &Grid, eta: &[f64], v: &EdgeField) -> Vec<f64> {
    (0..grid.cell_count())
        .map(|c| {
            let (e, i) = grid.cell_edge(c);
            eta[c] * v.center(e, i).exp()
        })
        .collect()
}

/// Vertex traces of `rho`: on every incident edge the value is extrapolated
/// linearly from the two cells next to the vertex; returns the mean over the
/// edges and the spread `max - min` among them.
pub(crate) fn vertex_traces(grid: &Grid, rho: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let g = grid.graph();
    g.vertex_ids()
        .map(|w| {
            let vals: Vec<f64> = g
                .incident(w)
                .iter()
                .map(|&(e, iota)| {
                    let b = grid.boundary_cell(e, w);
                    if grid.count(e) < 2 {
                        return rho[b];
                    }
                    let inner = if iota > 0 { b + 1 } else { b - 1 };
                    (1.5 * rho[b] - 0.5 * rho[inner]).max(0.0)
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            (mean, hi - lo)
        })
        .unzip()
}
