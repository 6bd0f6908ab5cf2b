//! Input files and output directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use graphot_core::dynamics::{FluxField, SpaceTimePath};
use graphot_core::graph::MetricGraph;
use graphot_core::grid::{EdgeField, Grid};
use graphot_core::measure::{GridMeasure, Interaction, InteractionSpec, MeasureSpec, PotentialSpec};

use crate::error::{CliError, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn load_graph(path: &Path) -> Result<MetricGraph> {
    Ok(MetricGraph::from_json(&read_text(path)?)?)
}

pub fn load_measure(path: &Path, grid: &Grid) -> Result<GridMeasure> {
    Ok(MeasureSpec::from_json(&read_text(path)?)?.discretize(grid)?)
}

/// `V` from a JSON potential description; zero when no file is given.
pub fn load_potential(path: Option<&Path>, grid: &Grid) -> Result<EdgeField> {
    match path {
        None => Ok(EdgeField::zero(grid)),
        Some(p) => {
            let spec: PotentialSpec = serde_json::from_str(&read_text(p)?).map_err(|e| CliError::parse(p, e))?;
            Ok(spec.sample(grid)?)
        }
    }
}

pub fn load_interaction(path: Option<&Path>, grid: &Grid) -> Result<Interaction> {
    match path {
        None => Ok(Interaction::zero()),
        Some(p) => {
            let spec: InteractionSpec = serde_json::from_str(&read_text(p)?).map_err(|e| CliError::parse(p, e))?;
            Ok(Interaction::from_spec(grid, &spec)?)
        }
    }
}

/// Where a run writes its files. `None` keeps everything in memory.
#[derive(Debug, Clone, Default)]
pub struct OutDir(pub Option<PathBuf>);

impl OutDir {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self(Some(path.into()))
    }

    pub fn none() -> Self {
        Self(None)
    }

    pub fn join(&self, sub: &str) -> Self {
        Self(self.0.as_ref().map(|p| p.join(sub)))
    }

    /// Writes `name` and returns its path, or `None` without a directory.
    pub fn write(&self, name: &str, content: &str) -> Result<Option<String>> {
        let Some(dir) = &self.0 else { return Ok(None) };
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(name);
        fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
        Ok(Some(path.display().to_string()))
    }
}

/// Writes `content` to an explicit file path, creating parent directories.
pub fn write_file(path: &Path, content: &str) -> Result<String> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, content).map_err(|e| CliError::io(path, e))?;
    Ok(path.display().to_string())
}

#[derive(Debug, serde::Deserialize)]
struct TrajRow {
    t: f64,
    edge: String,
    cell: usize,
    eta: Option<f64>,
    #[allow(dead_code)]
    rho: Option<f64>,
    flux: f64,
}

/// Reads a trajectory CSV `(t, edge, cell, eta, rho, flux)` back into a
/// space-time path on `graph`. Cell counts are taken from the file; the row
/// with `cell = n` carries the flux through the terminal interface.
pub fn read_trajectory(path: &Path, graph: MetricGraph) -> Result<SpaceTimePath> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::parse(path, e))?;
    let mut frames: Vec<(f64, Vec<TrajRow>)> = Vec::new();
    for row in reader.deserialize::<TrajRow>() {
        let row = row.map_err(|e| CliError::parse(path, e))?;
        match frames.last_mut() {
            Some((t, rows)) if *t == row.t => rows.push(row),
            _ => frames.push((row.t, vec![row])),
        }
    }
    let (_, first) = frames.first().ok_or_else(|| CliError::parse(path, "empty trajectory"))?;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for r in first {
        let e = graph.edge_by_name(&r.edge)?.0;
        let c = counts.entry(e).or_default();
        *c = (*c).max(r.cell);
    }
    if counts.len() != graph.edge_count() {
        return Err(CliError::parse(path, "trajectory does not cover every edge"));
    }
    let grid = Grid::with_counts(Arc::new(graph), counts.into_values().collect())?;
    let g = grid.graph();
    let mut times = Vec::new();
    let mut measures = Vec::new();
    let mut fluxes = Vec::new();
    for (k, (t, rows)) in frames.iter().enumerate() {
        let mut cells = vec![f64::NAN; grid.cell_count()];
        let mut flux = vec![f64::NAN; grid.interface_count()];
        for r in rows {
            let e = g.edge_by_name(&r.edge)?;
            let n = grid.count(e);
            if r.cell > n {
                return Err(CliError::parse(path, format!("cell {} out of range on {}", r.cell, r.edge)));
            }
            flux[grid.interfaces(e).start + r.cell] = r.flux;
            if r.cell < n {
                let eta = r.eta.ok_or_else(|| CliError::parse(path, format!("missing eta at t = {t}")))?;
                cells[grid.cells(e).start + r.cell] = eta * grid.width(e);
            }
        }
        if cells.iter().chain(&flux).any(|x| x.is_nan()) {
            return Err(CliError::parse(path, format!("incomplete frame at t = {t}")));
        }
        times.push(*t);
        measures.push(GridMeasure::from_cells(grid.clone(), cells)?);
        if k > 0 {
            fluxes.push(FluxField::new(grid.clone(), flux)?);
        }
    }
    Ok(SpaceTimePath::new(times, measures, fluxes)?)
}
