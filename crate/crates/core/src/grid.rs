//! Uniform per-edge cell grids and fields sampled on them.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, GraphPoint, MetricGraph, VertexId};

/// Each edge `e` split into `n_e` equal cells of width `h_e = ℓ_e / n_e`.
///
/// Cells are numbered globally, edge by edge. Every edge also owns `n_e + 1`
/// interfaces; interface `0` sits at the initial vertex and `n_e` at the
/// terminal vertex.
#[derive(Debug, Clone)]
pub struct Grid {
    graph: Arc<MetricGraph>,
    counts: Vec<usize>,
    widths: Vec<f64>,
    offsets: Vec<usize>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.counts == other.counts
            && (Arc::ptr_eq(&self.graph, &other.graph) || self.graph == other.graph)
    }
}

impl Grid {
    /// Cell counts `n_e = ceil(ℓ_e / h)`, robust to round-off when `ℓ_e / h`
    /// is an integer.
    pub fn new(graph: Arc<MetricGraph>, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::ParameterOutOfRange { name: "h", value: h });
        }
        let counts = graph
            .edges()
            .iter()
            .map(|e| ((e.length / h - 1e-9).ceil() as usize).max(1))
            .collect();
        Self::with_counts(graph, counts)
    }

    pub fn with_counts(graph: Arc<MetricGraph>, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != graph.edge_count() || counts.contains(&0) {
            return Err(Error::InvalidInput("one positive cell count per edge required".into()));
        }
        let widths = graph.edges().iter().zip(&counts).map(|(e, &n)| e.length / n as f64).collect();
        let mut offsets = Vec::with_capacity(counts.len() + 1);
        offsets.push(0);
        for &n in &counts {
            offsets.push(offsets.last().unwrap() + n);
        }
        Ok(Self { graph, counts, widths, offsets })
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<MetricGraph> {
        &self.graph
    }

    pub fn cell_count(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn interface_count(&self) -> usize {
        self.cell_count() + self.counts.len()
    }

    pub fn count(&self, e: EdgeId) -> usize {
        self.counts[e.0]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn width(&self, e: EdgeId) -> f64 {
        self.widths[e.0]
    }

    pub fn max_width(&self) -> f64 {
        self.widths.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_width(&self) -> f64 {
        self.widths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Global indices of the cells of edge `e`.
    pub fn cells(&self, e: EdgeId) -> Range<usize> {
        self.offsets[e.0]..self.offsets[e.0 + 1]
    }

    /// Global indices of the interfaces of edge `e`.
    pub fn interfaces(&self, e: EdgeId) -> Range<usize> {
        let start = self.offsets[e.0] + e.0;
        start..start + self.counts[e.0] + 1
    }

    pub fn cell_edge(&self, cell: usize) -> (EdgeId, usize) {
        let e = self.offsets.partition_point(|&o| o <= cell) - 1;
        (EdgeId(e), cell - self.offsets[e])
    }

    pub fn cell_center(&self, e: EdgeId, i: usize) -> f64 {
        (i as f64 + 0.5) * self.widths[e.0]
    }

    pub fn interface_coord(&self, e: EdgeId, k: usize) -> f64 {
        if k == self.counts[e.0] {
            self.graph.edge(e).length
        } else {
            k as f64 * self.widths[e.0]
        }
    }

    pub fn cell_point(&self, cell: usize) -> GraphPoint {
        let (e, i) = self.cell_edge(cell);
        GraphPoint { edge: e, s: self.cell_center(e, i) }
    }

    /// Cell containing coordinate `s` of edge `e` (right-closed at the end).
    pub fn locate(&self, e: EdgeId, s: f64) -> usize {
        let n = self.counts[e.0];
        let i = ((s / self.widths[e.0]).floor().max(0.0) as usize).min(n - 1);
        self.offsets[e.0] + i
    }

    /// Global interface index of vertex `v` on incident edge `e`.
    pub fn vertex_interface(&self, e: EdgeId, v: VertexId) -> usize {
        let r = self.interfaces(e);
        if self.graph.edge(e).init == v {
            r.start
        } else {
            r.end - 1
        }
    }

    /// Boundary cell of edge `e` adjacent to its endpoint `v`.
    pub fn boundary_cell(&self, e: EdgeId, v: VertexId) -> usize {
        let r = self.cells(e);
        if self.graph.edge(e).init == v {
            r.start
        } else {
            r.end - 1
        }
    }

    /// Whether the grid lines of `e` include coordinate `s` (to `tol`).
    pub fn is_aligned(&self, e: EdgeId, s: f64, tol: f64) -> bool {
        let k = s / self.widths[e.0];
        (k - k.round()).abs() <= tol
    }

    /// Support points used for finite-support computations: every cell centre
    /// followed by every vertex.
    pub fn support_points(&self) -> Vec<GraphPoint> {
        (0..self.cell_count())
            .map(|c| self.cell_point(c))
            .chain(self.graph.vertex_ids().map(|v| self.graph.vertex_point(v)))
            .collect()
    }
}

/// A field sampled at the `2 n_e + 1` half-cell points of each edge:
/// sample `2i + 1` is the centre of cell `i`, sample `2k` is interface `k`.
/// One-sided vertex values may differ between edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField {
    samples: Vec<Vec<f64>>,
}

impl EdgeField {
    pub fn from_fn(grid: &Grid, f: impl Fn(EdgeId, f64) -> f64) -> Self {
        let samples = grid
            .graph()
            .edge_ids()
            .map(|e| {
                let n = grid.count(e);
                let h = grid.width(e);
                let len = grid.graph().edge(e).length;
                (0..=2 * n)
                    .map(|k| if k == 2 * n { f(e, len) } else { f(e, 0.5 * k as f64 * h) })
                    .collect()
            })
            .collect();
        Self { samples }
    }

    pub fn from_samples(samples: Vec<Vec<f64>>) -> Self {
        Self { samples }
    }

    pub fn zero(grid: &Grid) -> Self {
        Self::from_fn(grid, |_, _| 0.0)
    }

    /// Builds the field from cell-centre values and vertex values; interfaces
    /// interpolate linearly between neighbouring centres.
    pub fn from_centers(grid: &Grid, centers: &[f64], vertices: &[f64]) -> Self {
        let g = grid.graph();
        let samples = g
            .edge_ids()
            .map(|e| {
                let edge = g.edge(e);
                let c = &centers[grid.cells(e)];
                let n = c.len();
                let mut out = vec![0.0; 2 * n + 1];
                for i in 0..n {
                    out[2 * i + 1] = c[i];
                }
                for k in 1..n {
                    out[2 * k] = 0.5 * (c[k - 1] + c[k]);
                }
                out[0] = vertices[edge.init.0];
                out[2 * n] = vertices[edge.term.0];
                out
            })
            .collect();
        Self { samples }
    }

    pub fn edge(&self, e: EdgeId) -> &[f64] {
        &self.samples[e.0]
    }

    pub fn center(&self, e: EdgeId, i: usize) -> f64 {
        self.samples[e.0][2 * i + 1]
    }

    pub fn interface(&self, e: EdgeId, k: usize) -> f64 {
        self.samples[e.0][2 * k]
    }

    /// Cell-centre values in global cell order.
    pub fn centers(&self) -> Vec<f64> {
        self.samples
            .iter()
            .flat_map(|s| s.iter().skip(1).step_by(2).copied())
            .collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_constant(&self) -> bool {
        let first = self.samples[0][0];
        self.samples.iter().flatten().all(|&v| v == first)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { samples: self.samples.iter().map(|s| s.iter().map(|&v| f(v)).collect()).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
        }
    }
}

/// Continuous piecewise-linear function with nodes at cell centres and
/// vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalFunction {
    grid: Grid,
    centers: Vec<f64>,
    vertices: Vec<f64>,
}

impl NodalFunction {
    pub fn new(grid: Grid, centers: Vec<f64>, vertices: Vec<f64>) -> Result<Self> {
        if centers.len() != grid.cell_count() || vertices.len() != grid.graph().vertex_count() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, centers, vertices })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&GraphPoint) -> f64) -> Self {
        let g = grid.graph();
        let centers = (0..grid.cell_count()).map(|c| f(&grid.cell_point(c))).collect();
        let vertices = g.vertex_ids().map(|v| f(&g.vertex_point(v))).collect();
        Self { grid: grid.clone(), centers, vertices }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn vertices(&self) -> &[f64] {
        &self.vertices
    }

    /// Node coordinates and values along edge `e`, vertices included.
    pub fn edge_nodes(&self, e: EdgeId) -> (Vec<f64>, Vec<f64>) {
        let edge = self.grid.graph().edge(e);
        let n = self.grid.count(e);
        let mut xs = Vec::with_capacity(n + 2);
        let mut ys = Vec::with_capacity(n + 2);
        xs.push(0.0);
        ys.push(self.vertices[edge.init.0]);
        for (i, c) in self.grid.cells(e).enumerate() {
            xs.push(self.grid.cell_center(e, i));
            ys.push(self.centers[c]);
        }
        xs.push(edge.length);
        ys.push(self.vertices[edge.term.0]);
        (xs, ys)
    }

    pub fn eval(&self, p: &GraphPoint) -> f64 {
        let (xs, ys) = self.edge_nodes(p.edge);
        crate::piecewise::PiecewiseLinear::new(xs, ys).eval(p.s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::builders::three_star;

    #[test]
    fn counts_are_robust_to_round_off() {
        let g = Arc::new(three_star(1.0));
        let grid = Grid::new(g.clone(), 0.1).unwrap();
        assert_eq!(grid.counts(), &[10, 10, 10]);
        let grid = Grid::new(g, 0.3).unwrap();
        assert_eq!(grid.counts(), &[4, 4, 4]);
        assert!((grid.width(EdgeId(0)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn indexing() {
        let g = Arc::new(three_star(1.0));
        let grid = Grid::new(g, 0.25).unwrap();
        assert_eq!(grid.cell_count(), 12);
        assert_eq!(grid.interface_count(), 15);
        assert_eq!(grid.cells(EdgeId(1)), 4..8);
        assert_eq!(grid.interfaces(EdgeId(1)), 5..10);
        assert_eq!(grid.cell_edge(5), (EdgeId(1), 1));
        assert_eq!(grid.locate(EdgeId(2), 1.0), 11);
        assert_eq!(grid.locate(EdgeId(2), 0.0), 8);
        let c = VertexId(2);
        assert_eq!(grid.vertex_interface(EdgeId(0), c), 4);
        assert_eq!(grid.vertex_interface(EdgeId(2), c), 10);
        assert_eq!(grid.boundary_cell(EdgeId(2), c), 8);
    }

    #[test]
    fn field_layout() {
        let g = Arc::new(three_star(1.0));
        let grid = Grid::new(g, 0.5).unwrap();
        let f = EdgeField::from_fn(&grid, |e, s| e.0 as f64 * 10.0 + s);
        assert_eq!(f.edge(EdgeId(1)), &[10.0, 10.25, 10.5, 10.75, 11.0]);
        assert_eq!(f.center(EdgeId(2), 1), 20.75);
        assert_eq!(f.interface(EdgeId(2), 2), 21.0);
        assert_eq!(f.centers().len(), 6);
    }
}
