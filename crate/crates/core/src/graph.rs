//! Metric graphs: finite connected oriented graphs whose edges are
//! identified with intervals `[0, length]`.
//!
//! The orientation of an edge only fixes its parametrisation: coordinate
//! `0` sits at the initial vertex and `length` at the terminal vertex.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

/// JSON description of a graph:
/// `{"vertices": [...], "edges": [{"id", "init", "term", "length"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDescription {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeDescription>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDescription {
    pub id: String,
    pub init: String,
    pub term: String,
    pub length: f64,
}

impl GraphDescription {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("graph json: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph description serialises")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub name: String,
    pub init: VertexId,
    pub term: VertexId,
    pub length: f64,
}

impl Edge {
    /// Signed incidence `ι_ev`: `+1` at the initial vertex, `-1` at the terminal one.
    pub fn incidence(&self, v: VertexId) -> i8 {
        if v == self.init {
            1
        } else if v == self.term {
            -1
        } else {
            0
        }
    }

    /// Coordinate of vertex `v` on this edge. Panics if `v` is not an endpoint.
    pub fn coordinate_of(&self, v: VertexId) -> f64 {
        match self.incidence(v) {
            1 => 0.0,
            -1 => self.length,
            _ => panic!("vertex {v:?} is not an endpoint of edge {}", self.name),
        }
    }

    pub fn other_end(&self, v: VertexId) -> VertexId {
        if v == self.init {
            self.term
        } else {
            self.init
        }
    }
}

/// A validated, immutable metric graph.
#[derive(Debug, Clone)]
pub struct MetricGraph {
    vertex_names: Vec<String>,
    edges: Vec<Edge>,
    /// vertex -> incident edges with their sign, sorted by edge id
    incidence: Vec<Vec<(EdgeId, i8)>>,
    /// all-pairs vertex distances
    vertex_dist: Vec<Vec<f64>>,
}

impl PartialEq for MetricGraph {
    fn eq(&self, other: &Self) -> bool {
        self.vertex_names == other.vertex_names && self.edges == other.edges
    }
}

impl MetricGraph {
    pub fn from_description(desc: &GraphDescription) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, name) in desc.vertices.iter().enumerate() {
            if index.insert(name.clone(), VertexId(i)).is_some() {
                return Err(Error::DuplicateVertexId(name.clone()));
            }
        }
        if desc.edges.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut seen = HashSet::new();
        let mut edges = Vec::with_capacity(desc.edges.len());
        for e in &desc.edges {
            if !seen.insert(e.id.clone()) {
                return Err(Error::DuplicateEdgeId(e.id.clone()));
            }
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(Error::NonPositiveLength(e.id.clone()));
            }
            let init = *index.get(&e.init).ok_or_else(|| Error::UnknownVertex(e.init.clone()))?;
            let term = *index.get(&e.term).ok_or_else(|| Error::UnknownVertex(e.term.clone()))?;
            if init == term {
                return Err(Error::SelfLoop(e.id.clone()));
            }
            edges.push(Edge { name: e.id.clone(), init, term, length: e.length });
        }
        let mut incidence = vec![Vec::new(); desc.vertices.len()];
        for (i, e) in edges.iter().enumerate() {
            incidence[e.init.0].push((EdgeId(i), 1));
            incidence[e.term.0].push((EdgeId(i), -1));
        }
        let mut graph = MetricGraph {
            vertex_names: desc.vertices.clone(),
            edges,
            incidence,
            vertex_dist: Vec::new(),
        };
        let from_first = graph.dijkstra(VertexId(0));
        if let Some(v) = from_first.iter().position(|d| !d.is_finite()) {
            return Err(Error::DisconnectedGraph(graph.vertex_names[v].clone()));
        }
        let mut dist: Vec<Vec<f64>> = (0..graph.vertex_count()).map(|v| graph.dijkstra(VertexId(v))).collect();
        for a in 0..dist.len() {
            for b in 0..a {
                let d = dist[a][b].min(dist[b][a]);
                dist[a][b] = d;
                dist[b][a] = d;
            }
        }
        graph.vertex_dist = dist;
        Ok(graph)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_description(&GraphDescription::from_json(text)?)
    }

    pub fn description(&self) -> GraphDescription {
        GraphDescription {
            vertices: self.vertex_names.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDescription {
                    id: e.name.clone(),
                    init: self.vertex_names[e.init.0].clone(),
                    term: self.vertex_names[e.term.0].clone(),
                    length: e.length,
                })
                .collect(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edges.len()).map(EdgeId)
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertex_names.len()).map(VertexId)
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertex_names[v.0]
    }

    pub fn vertex_by_name(&self, name: &str) -> Result<VertexId> {
        self.vertex_names
            .iter()
            .position(|n| n == name)
            .map(VertexId)
            .ok_or_else(|| Error::UnknownVertex(name.to_string()))
    }

    pub fn edge_by_name(&self, name: &str) -> Result<EdgeId> {
        self.edges
            .iter()
            .position(|e| e.name == name)
            .map(EdgeId)
            .ok_or_else(|| Error::UnknownEdge(name.to_string()))
    }

    /// Incident edges of `v` with the sign `ι_ev`, in increasing edge order.
    pub fn incident(&self, v: VertexId) -> &[(EdgeId, i8)] {
        &self.incidence[v.0]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.incidence[v.0].len()
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(f64::INFINITY, f64::min)
    }

    /// Shortest-path distance between two vertices.
    pub fn vertex_distance(&self, a: VertexId, b: VertexId) -> f64 {
        self.vertex_dist[a.0][b.0]
    }

    fn dijkstra(&self, source: VertexId) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Entry(f64, usize);
        impl Eq for Entry {}
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Entry {
            // min-heap on distance, then on vertex id
            fn cmp(&self, other: &Self) -> Ordering {
                other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
            }
        }

        let mut dist = vec![f64::INFINITY; self.vertex_count()];
        dist[source.0] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Entry(0.0, source.0));
        while let Some(Entry(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &(e, _) in &self.incidence[v] {
                let edge = &self.edges[e.0];
                let w = edge.other_end(VertexId(v)).0;
                let nd = d + edge.length;
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(Entry(nd, w));
                }
            }
        }
        dist
    }

    /// Builds the canonical point at coordinate `s` on edge `e`.
    pub fn point(&self, e: EdgeId, s: f64) -> Result<GraphPoint> {
        let edge = self
            .edges
            .get(e.0)
            .ok_or_else(|| Error::PointNotOnGraph(format!("edge index {}", e.0)))?;
        if !(s.is_finite() && (0.0..=edge.length).contains(&s)) {
            return Err(Error::PointNotOnGraph(format!(
                "coordinate {s} outside [0, {}] on edge {}",
                edge.length, edge.name
            )));
        }
        if s == 0.0 {
            Ok(self.vertex_point(edge.init))
        } else if s == edge.length {
            Ok(self.vertex_point(edge.term))
        } else {
            Ok(GraphPoint { edge: e, s })
        }
    }

    /// Canonical representative of a vertex: the lowest-id incident edge at the
    /// matching endpoint.
    pub fn vertex_point(&self, v: VertexId) -> GraphPoint {
        let (e, sign) = self.incidence[v.0][0];
        let s = if sign > 0 { 0.0 } else { self.edges[e.0].length };
        GraphPoint { edge: e, s }
    }

    /// The vertex a point sits on, if any.
    pub fn point_vertex(&self, p: &GraphPoint) -> Option<VertexId> {
        let edge = &self.edges[p.edge.0];
        if p.s == 0.0 {
            Some(edge.init)
        } else if p.s == edge.length {
            Some(edge.term)
        } else {
            None
        }
    }

    fn check_point(&self, p: &GraphPoint) -> Result<()> {
        match self.edges.get(p.edge.0) {
            Some(edge) if p.s.is_finite() && (0.0..=edge.length).contains(&p.s) => Ok(()),
            _ => Err(Error::PointNotOnGraph(format!("{p:?}"))),
        }
    }

    /// Endpoints of the edge carrying `p`, with the distance from `p` to each.
    /// A vertex point exits only through its own vertex.
    fn exits(&self, p: &GraphPoint) -> Vec<(VertexId, f64)> {
        if let Some(v) = self.point_vertex(p) {
            return vec![(v, 0.0)];
        }
        let edge = &self.edges[p.edge.0];
        vec![(edge.init, p.s), (edge.term, edge.length - p.s)]
    }

    /// Geodesic distance between two points of the graph.
    pub fn distance(&self, x: &GraphPoint, y: &GraphPoint) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.distance_unchecked(x, y))
    }

    /// Distance without validating the points; used in hot loops.
    pub fn distance_unchecked(&self, x: &GraphPoint, y: &GraphPoint) -> f64 {
        // fixed argument order keeps the result bitwise symmetric
        let (x, y) = if (y.edge, y.s) < (x.edge, x.s) { (y, x) } else { (x, y) };
        let mut best = if x.edge == y.edge { (x.s - y.s).abs() } else { f64::INFINITY };
        for (a, da) in self.exits(x) {
            let row = &self.vertex_dist[a.0];
            for (b, db) in self.exits(y) {
                best = best.min(da + row[b.0] + db);
            }
        }
        best
    }

    /// Lexicographically smallest shortest vertex path from `a` to `b`,
    /// together with the edges used between consecutive vertices.
    fn vertex_path(&self, a: VertexId, b: VertexId) -> (Vec<VertexId>, Vec<EdgeId>) {
        let mut vertices = vec![a];
        let mut edges = Vec::new();
        let target = &self.vertex_dist;
        let mut cur = a;
        while cur != b {
            let remaining = target[cur.0][b.0];
            let tol = 1e-12 * (1.0 + remaining);
            let mut best: Option<(VertexId, f64, EdgeId)> = None;
            for &(e, _) in &self.incidence[cur.0] {
                let edge = &self.edges[e.0];
                let w = edge.other_end(cur);
                if (edge.length + target[w.0][b.0] - remaining).abs() > tol {
                    continue;
                }
                let better = best.is_none_or(|(bw, bl, be)| (w, edge.length, e) < (bw, bl, be));
                if better {
                    best = Some((w, edge.length, e));
                }
            }
            let (w, _, e) = best.expect("shortest path continues");
            vertices.push(w);
            edges.push(e);
            cur = w;
        }
        (vertices, edges)
    }

    /// A shortest path realising `distance(x, y)`; ties are broken by the
    /// lexicographically smallest vertex sequence.
    pub fn geodesic(&self, x: &GraphPoint, y: &GraphPoint) -> Result<GeodesicPath> {
        self.check_point(x)?;
        self.check_point(y)?;
        let length = self.distance_unchecked(x, y);
        let tol = 1e-12 * (1.0 + length);

        if x.edge == y.edge && ((x.s - y.s).abs() - length).abs() <= tol {
            return Ok(GeodesicPath {
                start: *x,
                end: *y,
                vertices: Vec::new(),
                edges: Vec::new(),
                length,
            });
        }
        let mut best: Option<(Vec<VertexId>, Vec<EdgeId>)> = None;
        for (a, da) in self.exits(x) {
            for (b, db) in self.exits(y) {
                if (da + self.vertex_dist[a.0][b.0] + db - length).abs() > tol {
                    continue;
                }
                let candidate = self.vertex_path(a, b);
                if best.as_ref().is_none_or(|(v, _)| candidate.0 < *v) {
                    best = Some(candidate);
                }
            }
        }
        let (vertices, edges) = best.expect("some candidate attains the distance");
        Ok(GeodesicPath { start: *x, end: *y, vertices, edges, length })
    }

    /// Point at arc-length fraction `t` along `path`.
    pub fn interpolate(&self, path: &GeodesicPath, t: f64) -> Result<GraphPoint> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::ParameterOutOfRange { name: "t", value: t });
        }
        if t == 0.0 {
            return Ok(path.start);
        }
        if t == 1.0 {
            return Ok(path.end);
        }
        let (e, s) = self.locate(path, t * path.length);
        self.point(e, s.clamp(0.0, self.edges[e.0].length))
    }

    /// Traversal of `path` as oriented segments `(edge, from, to)` in edge
    /// coordinates. Zero-length legs are omitted.
    pub fn segments(&self, path: &GeodesicPath) -> Vec<Segment> {
        let mut out = Vec::new();
        if path.vertices.is_empty() {
            out.push(Segment { edge: path.start.edge, from: path.start.s, to: path.end.s });
        } else {
            let first = path.vertices[0];
            let last = *path.vertices.last().unwrap();
            let e0 = &self.edges[path.start.edge.0];
            out.push(Segment { edge: path.start.edge, from: path.start.s, to: e0.coordinate_of(first) });
            for (w, &e) in path.vertices.windows(2).zip(&path.edges) {
                let edge = &self.edges[e.0];
                out.push(Segment { edge: e, from: edge.coordinate_of(w[0]), to: edge.coordinate_of(w[1]) });
            }
            let e1 = &self.edges[path.end.edge.0];
            out.push(Segment { edge: path.end.edge, from: e1.coordinate_of(last), to: path.end.s });
        }
        out.retain(|seg| seg.len() > 0.0);
        out
    }

    /// Edge location at arc length `arc` from the start of `path` (clamped to the path).
    pub fn locate(&self, path: &GeodesicPath, arc: f64) -> (EdgeId, f64) {
        let segments = self.segments(path);
        let Some(last) = segments.last() else {
            return (path.start.edge, path.start.s);
        };
        let mut remaining = arc.max(0.0);
        for seg in &segments {
            if remaining <= seg.len() {
                return (seg.edge, seg.at(remaining));
            }
            remaining -= seg.len();
        }
        (last.edge, last.to)
    }
}

/// A location on the metric graph in canonical form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphPoint {
    pub edge: EdgeId,
    pub s: f64,
}

/// A traversal of part of an edge from coordinate `from` to `to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub edge: EdgeId,
    pub from: f64,
    pub to: f64,
}

impl Segment {
    pub fn len(&self) -> f64 {
        (self.to - self.from).abs()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0.0
    }

    pub fn direction(&self) -> f64 {
        if self.to >= self.from {
            1.0
        } else {
            -1.0
        }
    }

    /// Coordinate after travelling `arc` from `from`.
    pub fn at(&self, arc: f64) -> f64 {
        self.from + self.direction() * arc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    pub start: GraphPoint,
    pub end: GraphPoint,
    /// vertices traversed in order; empty when the path stays inside one edge
    pub vertices: Vec<VertexId>,
    /// edge joining `vertices[i]` and `vertices[i + 1]`
    pub edges: Vec<EdgeId>,
    pub length: f64,
}

/// Small named graphs used throughout the tests and the CLI.
pub mod builders {
    use super::*;

    pub fn description(vertices: &[&str], edges: &[(&str, &str, &str, f64)]) -> GraphDescription {
        GraphDescription {
            vertices: vertices.iter().map(|v| v.to_string()).collect(),
            edges: edges
                .iter()
                .map(|&(id, init, term, length)| EdgeDescription {
                    id: id.into(),
                    init: init.into(),
                    term: term.into(),
                    length,
                })
                .collect(),
        }
    }

    /// Star with two incoming leaves `e1: a→c`, `e2: b→c` and one outgoing `f: c→d`.
    pub fn three_star(length: f64) -> MetricGraph {
        MetricGraph::from_description(&description(
            &["a", "b", "c", "d"],
            &[("e1", "a", "c", length), ("e2", "b", "c", length), ("f", "c", "d", length)],
        ))
        .expect("three-star is valid")
    }

    pub fn interval(length: f64) -> MetricGraph {
        MetricGraph::from_description(&description(&["u", "v"], &[("e", "u", "v", length)]))
            .expect("interval is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::builders::*;
    use super::*;

    #[test]
    fn three_star_builds() {
        let g = three_star(1.0);
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edge_count(), 3);
        let c = g.vertex_by_name("c").unwrap();
        assert_eq!(g.degree(c), 3);
        let signs: Vec<i8> = g.incident(c).iter().map(|&(_, s)| s).collect();
        assert_eq!(signs, vec![-1, -1, 1]);
    }

    #[test]
    fn rejects_invalid_graphs() {
        let disconnected = description(&["a", "b", "c", "d"], &[("e", "a", "b", 1.0), ("f", "c", "d", 1.0)]);
        assert!(matches!(MetricGraph::from_description(&disconnected), Err(Error::DisconnectedGraph(_))));
        let looped = description(&["a", "b"], &[("e", "a", "b", 1.0), ("l", "a", "a", 1.0)]);
        assert_eq!(MetricGraph::from_description(&looped), Err(Error::SelfLoop("l".into())));
        let zero = description(&["a", "b"], &[("e", "a", "b", 0.0)]);
        assert_eq!(MetricGraph::from_description(&zero), Err(Error::NonPositiveLength("e".into())));
        let dup = description(&["a", "b"], &[("e", "a", "b", 1.0), ("e", "b", "a", 2.0)]);
        assert_eq!(MetricGraph::from_description(&dup), Err(Error::DuplicateEdgeId("e".into())));
    }

    #[test]
    fn multi_edges_are_allowed() {
        let d = description(&["u", "v"], &[("short", "u", "v", 1.0), ("long", "v", "u", 3.0)]);
        let g = MetricGraph::from_description(&d).unwrap();
        let x = g.point(EdgeId(1), 1.5).unwrap();
        let u = g.vertex_point(VertexId(0));
        // midpoint of the long edge: 1.5 either way round the long edge
        assert!((g.distance(&x, &u).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let g = three_star(1.0);
        let text = g.description().to_json();
        assert_eq!(MetricGraph::from_json(&text).unwrap(), g);
    }

    #[test]
    fn canonical_vertex_points() {
        let g = three_star(1.0);
        let c1 = g.point(EdgeId(0), 1.0).unwrap();
        let c2 = g.point(EdgeId(1), 1.0).unwrap();
        let c3 = g.point(EdgeId(2), 0.0).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(c2, c3);
        assert!(g.point(EdgeId(0), 1.5).is_err());
        assert!(g.point(EdgeId(7), 0.5).is_err());
    }

    #[test]
    fn star_distances() {
        let g = three_star(1.0);
        let x = g.point(EdgeId(0), 0.3).unwrap();
        let y = g.point(EdgeId(1), 0.4).unwrap();
        assert!((g.distance(&x, &y).unwrap() - 1.3).abs() < 1e-15);
        assert_eq!(g.distance(&x, &x).unwrap(), 0.0);
        let eps = 0.1;
        for x0 in [0.0, 0.03, 0.07, 0.1] {
            let x = g.point(EdgeId(0), x0).unwrap();
            let y = g.point(EdgeId(2), 1.0 - eps + x0).unwrap();
            assert!((g.distance(&x, &y).unwrap() - (2.0 - eps)).abs() < 1e-14);
        }
    }

    #[test]
    fn geodesic_examples() {
        let g = interval(1.0);
        let p = g.geodesic(&g.point(EdgeId(0), 0.2).unwrap(), &g.point(EdgeId(0), 0.9).unwrap()).unwrap();
        assert!(p.vertices.is_empty());
        assert!((p.length - 0.7).abs() < 1e-15);

        let g = three_star(1.0);
        let p = g.geodesic(&g.point(EdgeId(0), 0.5).unwrap(), &g.point(EdgeId(2), 0.5).unwrap()).unwrap();
        assert_eq!(p.vertices, vec![g.vertex_by_name("c").unwrap()]);
        assert!((p.length - 1.0).abs() < 1e-15);

        let d = description(
            &["u", "v", "w"],
            &[("direct", "u", "v", 3.0), ("uw", "u", "w", 1.0), ("wv", "w", "v", 1.0)],
        );
        let g = MetricGraph::from_description(&d).unwrap();
        let p = g.geodesic(&g.vertex_point(VertexId(0)), &g.vertex_point(VertexId(1))).unwrap();
        assert_eq!(p.vertices, vec![VertexId(0), VertexId(2), VertexId(1)]);
        assert!((p.length - 2.0).abs() < 1e-15);
    }

    #[test]
    fn geodesic_ties_pick_smallest_sequence() {
        // square u-v-w-x-u: opposite corners are joined by two equal paths
        let d = description(
            &["u", "v", "w", "x"],
            &[("uv", "u", "v", 1.0), ("vw", "v", "w", 1.0), ("wx", "w", "x", 1.0), ("xu", "x", "u", 1.0)],
        );
        let g = MetricGraph::from_description(&d).unwrap();
        let p = g.geodesic(&g.vertex_point(VertexId(0)), &g.vertex_point(VertexId(2))).unwrap();
        assert_eq!(p.vertices, vec![VertexId(0), VertexId(1), VertexId(2)]);
    }

    #[test]
    fn interpolation_along_star_path() {
        let g = three_star(1.0);
        let eps = 0.1;
        let start = g.point(EdgeId(0), 0.0).unwrap();
        let end = g.point(EdgeId(2), 1.0 - eps).unwrap();
        let path = g.geodesic(&start, &end).unwrap();
        assert!((path.length - 1.9).abs() < 1e-15);
        assert_eq!(g.interpolate(&path, 0.0).unwrap(), start);
        assert_eq!(g.interpolate(&path, 1.0).unwrap(), end);
        let mid = g.interpolate(&path, 0.5).unwrap();
        assert_eq!(mid.edge, EdgeId(0));
        assert!((mid.s - 0.95).abs() < 1e-15);
        let later = g.interpolate(&path, 0.75).unwrap();
        assert_eq!(later.edge, EdgeId(2));
        assert!((later.s - (0.75 * 1.9 - 1.0)).abs() < 1e-14);
        assert!(g.interpolate(&path, 1.5).is_err());
    }
}
