//! Randomised suites for the regularisation and the Hopf-Lax semigroup.

use std::sync::Arc;
use std::time::Instant;

use graphot_core::dynamics::FluxField;
use graphot_core::graph::builders::{description, three_star};
use graphot_core::graph::MetricGraph;
use graphot_core::grid::{Grid, NodalFunction};
use graphot_core::measure::GridMeasure;
use graphot_core::regularize::{
    integrate_regularized, kinetic_energy, regularize_function, regularize_measure, regularized_kinetic_energy,
    ExtendedGraph,
};
use graphot_core::transport::verify_hopf_lax_properties;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::OutDir;
use crate::report::{Basis, Relation, RunReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularizeConfig {
    pub instances: usize,
    pub h: f64,
    pub mass_tol: f64,
    pub kinetic_tol: f64,
    pub duality_tol: f64,
}

impl Default for RegularizeConfig {
    fn default() -> Self {
        Self { instances: 20, h: 0.05, mass_tol: 1e-12, kinetic_tol: 1e-8, duality_tol: 1e-8 }
    }
}

/// Random tree with one to four edges of length in `[0.5, 1.5]`.
pub fn random_tree(rng: &mut ChaCha8Rng) -> MetricGraph {
    let m = rng.gen_range(1..=4);
    let names: Vec<String> = (0..=m).map(|i| format!("v{i}")).collect();
    let edges: Vec<(String, String, String, f64)> = (0..m)
        .map(|k| (format!("e{k}"), names[rng.gen_range(0..=k)].clone(), names[k + 1].clone(), rng.gen_range(0.5..1.5)))
        .collect();
    let v: Vec<&str> = names.iter().map(String::as_str).collect();
    let e: Vec<(&str, &str, &str, f64)> = edges.iter().map(|(i, a, b, l)| (i.as_str(), a.as_str(), b.as_str(), *l)).collect();
    MetricGraph::from_description(&description(&v, &e)).expect("random trees are valid")
}

pub fn run_regularize(cfg: &RegularizeConfig, seed: u64, out: &OutDir) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new("regularize", cfg);
    report.seed = Some(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mass, mut density, mut kinetic, mut duality) = (0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    let mut csv = String::from("instance,edges,eps,mass_defect,density_excess,kinetic_excess,duality_defect\n");
    for k in 0..cfg.instances {
        let grid = Grid::new(Arc::new(random_tree(&mut rng)), cfg.h)?;
        let g = grid.graph();
        let eps = rng.gen_range(0.05..0.45) * g.min_edge_length();
        let ext = ExtendedGraph::new(&grid, eps)?;
        let cells: Vec<f64> = (0..grid.cell_count()).map(|_| rng.gen_range(0.2..2.0)).collect();
        let atoms: Vec<f64> = (0..g.vertex_count()).map(|_| if rng.gen_bool(0.3) { rng.gen_range(0.0..0.5) } else { 0.0 }).collect();
        let with_atoms = GridMeasure::new(grid.clone(), cells.clone(), atoms)?.normalized()?;
        let diffuse = GridMeasure::from_cells(grid.clone(), cells)?.normalized()?;
        let j = FluxField::new(grid.clone(), (0..grid.interface_count()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
        let (a, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(0.0..6.0));

        let reg = regularize_measure(&ext, &with_atoms)?;
        let m = (reg.total_mass() - with_atoms.total_mass()).abs();
        let bound = 1.0 / (2.0 * eps) + ext.grid().max_width();
        let d = reg.densities().into_iter().fold(f64::NEG_INFINITY, f64::max) - bound;
        let kin = regularized_kinetic_energy(&ext, &diffuse, &j)? - kinetic_energy(&diffuse, &j);
        let phi = NodalFunction::from_fn(ext.grid(), |p| (a * p.s + b * p.edge.0 as f64).sin() + 0.3 * p.s * p.s);
        let dual = (integrate_regularized(&ext, &with_atoms, &phi)? - regularize_function(&ext, &phi)?.integrate(&with_atoms)).abs();
        csv.push_str(&format!("{k},{},{eps},{m},{d},{kin},{dual}\n", g.edge_count()));
        mass = mass.max(m);
        density = density.max(d);
        kinetic = kinetic.max(kin);
        duality = duality.max(dual);
    }
    report.check("c4.mass", "max mass change under regularisation", mass, 0.0, cfg.mass_tol, Relation::AtMost, Basis::Invariant);
    report.check("c4.density", "max of density minus 1/(2 eps) + h", density, 0.0, 0.0, Relation::AtMost, Basis::Invariant);
    report.check("c4.kinetic", "max increase of the kinetic energy", kinetic, 0.0, cfg.kinetic_tol, Relation::AtMost, Basis::Invariant);
    report.check("c4.duality", "max |int phi d mu_eps - int phi_eps d mu|", duality, 0.0, cfg.duality_tol, Relation::AtMost, Basis::Invariant);
    report.output(out.write("instances.csv", &csv)?);
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HopfLaxConfig {
    pub functions: usize,
    pub h: f64,
    pub times: Vec<f64>,
    pub dt: f64,
}

impl Default for HopfLaxConfig {
    fn default() -> Self {
        Self { functions: 10, h: 0.02, times: vec![0.05, 0.2, 0.5], dt: 0.01 }
    }
}

/// A random Lipschitz, non-convex function on the support points of `grid`:
/// the minimum of three cones plus a smooth ripple along the edges.
pub fn random_lipschitz(grid: &Grid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let g = grid.graph();
    let pts = grid.support_points();
    let centres: Vec<_> = (0..3).map(|_| pts[rng.gen_range(0..pts.len())]).collect();
    let slopes: Vec<f64> = (0..3).map(|_| rng.gen_range(0.5..3.0)).collect();
    let offsets: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let waves = rng.gen_range(1..=3) as f64;
    pts.iter()
        .map(|p| {
            let cone = (0..3).map(|k| offsets[k] + slopes[k] * g.distance_unchecked(p, &centres[k])).fold(f64::INFINITY, f64::min);
            // the ripple vanishes at both ends of every edge
            let len = g.edge(p.edge).length;
            cone + 0.3 * (waves * std::f64::consts::PI * p.s / len).sin()
        })
        .collect()
}

pub fn run_hopf_lax(cfg: &HopfLaxConfig, seed: u64, out: &OutDir) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new("hopf-lax", cfg);
    report.seed = Some(seed);
    let grid = Grid::new(Arc::new(three_star(1.0)), cfg.h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lip, mut hj, mut hj_min) = (0.0f64, 0.0f64, 0.0f64);
    let (mut failures, mut samples) = (0, 0);
    let mut csv = String::from("function,lip_f,max_lip_ratio,hj_violation,hj_tolerance,hj_failures,hj_samples,hj_violation_min_slope\n");
    for k in 0..cfg.functions {
        let f = random_lipschitz(&grid, &mut rng);
        let r = verify_hopf_lax_properties(&grid, &f, &cfg.times, cfg.dt)?;
        csv.push_str(&format!(
            "{k},{},{},{},{},{},{},{}\n",
            r.lip_f, r.max_lip_ratio, r.hj_violation, r.hj_tolerance, r.hj_failures, r.hj_samples, r.hj_violation_min_slope
        ));
        lip = lip.max(r.max_lip_ratio);
        hj = hj.max(r.hj_violation / r.hj_tolerance);
        hj_min = hj_min.max(r.hj_violation_min_slope / r.hj_tolerance);
        failures += r.hj_failures;
        samples += r.hj_samples;
    }
    report.check("c5.lipschitz", "max Lip(Q_t f) / Lip(f)", lip, 2.0 * (1.0 + 5.0 * cfg.h), 0.0, Relation::AtMost, Basis::Invariant);
    report.check(
        "c5.hamilton-jacobi",
        "max HJ residual over 4 Lip(f)^2 (h + dt)",
        hj,
        1.0,
        0.0,
        Relation::AtMost,
        Basis::Invariant,
    );
    // the violations sit next to moving kinks of Q_t f, where the neighbour
    // quotient picks up the slope on the far side
    report.note("hj_failing_samples", failures);
    report.note("hj_samples", samples);
    report.note("hj_ratio_min_one_sided_slope", hj_min);
    report.output(out.write("functions.csv", &csv)?);
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        let r = run_regularize(&RegularizeConfig { instances: 3, ..Default::default() }, 7, &OutDir::none()).unwrap();
        assert!(r.passed(), "{}", r.summary());
        let r = run_hopf_lax(&HopfLaxConfig { functions: 2, h: 0.05, ..Default::default() }, 7, &OutDir::none()).unwrap();
        assert!(r.assertions.iter().find(|a| a.id == "c5.lipschitz").unwrap().passed, "{}", r.summary());
    }

    #[test]
    fn random_functions_are_lipschitz() {
        let grid = Grid::new(Arc::new(three_star(1.0)), 0.05).unwrap();
        let g = grid.graph();
        let pts = grid.support_points();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_lipschitz(&grid, &mut rng);
        let mut lip: f64 = 0.0;
        for i in 0..pts.len() {
            for j in 0..i {
                lip = lip.max((f[i] - f[j]).abs() / g.distance_unchecked(&pts[i], &pts[j]));
            }
        }
        assert!(lip < 3.0 + 0.9 * std::f64::consts::PI + 1e-9, "{lip}");
    }
}
