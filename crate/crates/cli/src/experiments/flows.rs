//! McKean-Vlasov flows, the energy-dissipation balance, minimising movements
//! and the dissipation functional.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use graphot_core::dynamics::{FluxField, SpaceTimePath};
use graphot_core::gradient_flow::{
    chain_rule_check, dissipation0, energy_dissipation_check, jko_flow, linfty_bound_check, mkv_flow, mkv_step,
    slope_estimate, JkoOptions, MkvState,
};
use graphot_core::graph::builders::{description, interval, three_star};
use graphot_core::graph::{EdgeId, MetricGraph};
use graphot_core::grid::{EdgeField, Grid};
use graphot_core::measure::{gibbs, GridMeasure, Interaction};
use graphot_core::piecewise::Quadrature;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::OutDir;
use crate::report::{Basis, Relation, RunReport};

/// Normalised `cos²` bump of half-width `r` centred at `c` on edge `e`.
pub fn bump(grid: &Grid, e: usize, c: f64, r: f64) -> Result<GridMeasure> {
    Ok(GridMeasure::from_density_fn(grid.clone(), |edge, s| {
        if edge.0 == e && (s - c).abs() < r {
            (PI * (s - c) / (2.0 * r)).cos().powi(2)
        } else {
            0.0
        }
    })?
    .normalized()?)
}

fn min_cell(path: &SpaceTimePath) -> f64 {
    path.measures().iter().flat_map(|m| m.cells().iter().copied()).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MkvConfig {
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    pub mass_tol: f64,
    pub stationary_tol: f64,
    pub gibbs_l1_tol: f64,
}

impl Default for MkvConfig {
    fn default() -> Self {
        Self { h: 0.01, dt: 1e-3, t_end: 5.0, mass_tol: 1e-10, stationary_tol: 1e-8, gibbs_l1_tol: 1e-3 }
    }
}

/// Relaxation to the Gibbs measure of `V(s) = s²` on the unit interval.
pub fn run_mkv(cfg: &MkvConfig, out: &OutDir) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new("mkv", cfg);
    let grid = Grid::new(Arc::new(interval(1.0)), cfg.h)?;
    let v = EdgeField::from_fn(&grid, |_, s| s * s);
    let w = Interaction::zero();

    let (g, _) = gibbs(&grid, &v);
    let next = mkv_step(&MkvState::new(&g, &v)?, &v, &w, cfg.dt)?;
    report.check("c6.stationary", "L1 change of the Gibbs measure in one step", next.measure().l1_distance(&g)?, 0.0, cfg.stationary_tol, Relation::AtMost, Basis::Invariant);

    // cell averages of e^{-s²}/Z by Gauss-Legendre quadrature
    let q = Quadrature::new(8);
    let z = q.integrate(0.0, 1.0, |s| (-s * s).exp());
    let target = GridMeasure::from_density_fn(grid.clone(), |_, s| (-s * s).exp() / z)?;
    let traj = mkv_flow(&bump(&grid, 0, 0.7, 0.2)?, &v, &w, cfg.dt, cfg.t_end)?;
    report.check("c6.mass", "max mass drift over all steps", traj.mass_defect, 0.0, cfg.mass_tol, Relation::AtMost, Basis::Invariant);
    report.check("c6.positivity", "smallest cell mass along the flow", min_cell(&traj.path), 0.0, 0.0, Relation::AtLeast, Basis::Invariant);
    let l1 = traj.final_measure().l1_distance(&target)?;
    report.check("c6.gibbs-l1", "L1 distance to the Gibbs measure at the final time", l1, 0.0, cfg.gibbs_l1_tol, Relation::AtMost, Basis::Oracle);
    report.output(out.write("final.csv", &traj.final_measure().to_csv())?);
    let ede = energy_dissipation_check(&traj.path, &v, &w)?;
    report.output(out.write("energy.csv", &ede.energy_csv())?);
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdeConfig {
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    pub bump_center: f64,
    pub bump_radius: f64,
    pub balance_tol: f64,
    /// expected ratio of the balance after halving `h` and `dt`, and its
    /// allowed deviation
    pub refinement_ratio: f64,
    pub refinement_tol: f64,
    pub chain_rule_tol: f64,
    /// sample times of the chain rule; the first steps are an initial layer
    pub chain_rule_times: Vec<f64>,
    pub transported_min: f64,
    /// also write the coarse trajectory
    pub write_trajectory: bool,
}

impl Default for EdeConfig {
    fn default() -> Self {
        Self {
            h: 0.01,
            dt: 1e-3,
            t_end: 0.5,
            bump_center: 0.5,
            bump_radius: 0.4,
            balance_tol: 0.05,
            refinement_ratio: 0.5,
            refinement_tol: 0.15,
            chain_rule_tol: 0.05,
            chain_rule_times: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            transported_min: 0.1,
            write_trajectory: false,
        }
    }
}

/// A bump on a positive background moved at constant speed, with the fluxes
/// that transport it exactly.
pub fn transported_bump(h: f64, steps: usize) -> Result<SpaceTimePath> {
    let grid = Grid::new(Arc::new(interval(1.0)), h)?;
    let dt = 1.0 / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    let measures = times
        .iter()
        .map(|t| {
            let c = 0.3 + 0.4 * t;
            let m = GridMeasure::from_density_fn(grid.clone(), |_, s| {
                0.2 + if (s - c).abs() < 0.2 { (PI * (s - c) / 0.4).cos().powi(2) } else { 0.0 }
            })?;
            Ok(m.normalized()?)
        })
        .collect::<Result<Vec<_>>>()?;
    let fluxes = measures
        .windows(2)
        .map(|w| {
            let mut acc = 0.0;
            let mut vals = vec![0.0];
            for (a, b) in w[0].cells().iter().zip(w[1].cells()) {
                acc -= (b - a) / dt;
                vals.push(acc);
            }
            *vals.last_mut().expect("non-empty") = 0.0;
            FluxField::new(grid.clone(), vals)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(SpaceTimePath::new(times, measures, fluxes)?)
}

pub fn run_ede(cfg: &EdeConfig, out: &OutDir) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new("ede", cfg);
    let w = Interaction::zero();
    let heat = |h: f64, dt: f64| -> Result<_> {
        let grid = Grid::new(Arc::new(three_star(1.0)), h)?;
        let v = EdgeField::zero(&grid);
        let traj = mkv_flow(&bump(&grid, 0, cfg.bump_center, cfg.bump_radius)?, &v, &w, dt, cfg.t_end)?;
        let ede = energy_dissipation_check(&traj.path, &v, &w)?;
        Ok((traj, v, ede))
    };
    let (a, b) = rayon::join(|| heat(cfg.h, cfg.dt), || heat(0.5 * cfg.h, 0.5 * cfg.dt));
    let (traj, v, coarse) = a?;
    let (_, _, fine) = b?;
    report.check("c7.balance", "|L_T| for the heat flow on the 3-star", coarse.value.abs(), 0.0, cfg.balance_tol, Relation::AtMost, Basis::Invariant);
    report.check(
        "c7.refinement",
        "L_T after halving h and dt, over L_T",
        fine.value / coarse.value,
        cfg.refinement_ratio,
        cfg.refinement_tol,
        Relation::Within,
        Basis::Invariant,
    );
    report.note("balance_coarse", coarse.value);
    report.note("balance_fine", fine.value);

    let steps: Vec<usize> = cfg.chain_rule_times.iter().map(|t| ((t / cfg.dt).round() as usize).saturating_sub(1)).collect();
    let samples = chain_rule_check(&traj.path, &v, &w, &steps)?;
    let worst = samples.iter().map(|s| s.defect()).fold(0.0, f64::max);
    report.check("c7.chain-rule", "max |dF/dt - <w, J>| at the sample times", worst, 0.0, cfg.chain_rule_tol, Relation::AtMost, Basis::Invariant);

    let moved = transported_bump(cfg.h, 40)?;
    let zero = EdgeField::zero(moved.grid());
    let lt = energy_dissipation_check(&moved, &zero, &w)?.value;
    report.check("c7.transported", "L_T of a rigidly transported bump", lt, cfg.transported_min, 0.0, Relation::AtLeast, Basis::Invariant);

    report.output(out.write("energy.csv", &coarse.energy_csv())?);
    if cfg.write_trajectory {
        report.output(out.write("trajectory.csv", &traj.to_csv(&v))?);
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JkoConfig {
    pub h: f64,
    pub tau: f64,
    pub t_end: f64,
    pub pde_dt: f64,
    pub l1_tol: f64,
    pub inner_steps: usize,
}

impl Default for JkoConfig {
    fn default() -> Self {
        Self { h: 0.01, tau: 0.01, t_end: 0.1, pde_dt: 1e-3, l1_tol: 0.05, inner_steps: 4 }
    }
}

pub fn run_jko(cfg: &JkoConfig, out: &OutDir) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new("jko", cfg);
    let options = JkoOptions { inner_steps: cfg.inner_steps, ..JkoOptions::default() };
    let steps = (cfg.t_end / cfg.tau).round() as usize;
    let w = Interaction::zero();

    let grid = Grid::new(Arc::new(interval(1.0)), cfg.h)?;
    let v = EdgeField::zero(&grid);
    let mu = bump(&grid, 0, 0.4, 0.3)?;
    let flow = jko_flow(&mu, cfg.tau, steps, &v, &w, &options)?;
    let pde = mkv_flow(&mu, &v, &w, cfg.pde_dt, cfg.t_end)?;
    let l1 = flow.at(cfg.t_end).l1_distance(pde.final_measure())?;
    report.check("c8.l1", "L1 distance between minimising movements and the PDE", l1, 0.0, cfg.l1_tol, Relation::AtMost, Basis::Oracle);
    report.check("c8.monotone-heat", "free energy non-increasing (heat flow)", flow.is_monotone() as u8 as f64, 1.0, 0.0, Relation::Within, Basis::Invariant);

    // a second trajectory with confinement and attraction on the 3-star
    let star = Grid::new(Arc::new(three_star(1.0)), 2.0 * cfg.h)?;
    let vs = EdgeField::from_fn(&star, |e, s| if e.0 == 2 { s } else { 1.0 - s });
    let ws = Interaction::from_distance(&star, |d| 0.5 * d * d);
    let flow2 = jko_flow(&bump(&star, 0, 0.5, 0.3)?, cfg.tau, steps, &vs, &ws, &options)?;
    report.check("c8.monotone-drift", "free energy non-increasing (potential and interaction)", flow2.is_monotone() as u8 as f64, 1.0, 0.0, Relation::Within, Basis::Invariant);
    report.note("accepted_steps", flow.accepted.iter().chain(&flow2.accepted).filter(|a| **a).count());

    let mut csv = String::from("n,t,F_heat,F_drift\n");
    for n in 0..=steps {
        csv.push_str(&format!("{n},{},{},{}\n", n as f64 * cfg.tau, flow.free_energies[n], flow2.free_energies[n]));
    }
    report.output(out.write("free_energy.csv", &csv)?);
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DissipationConfig {
    pub h: f64,
    pub gibbs_tol: f64,
    pub uniform_rel_tol: f64,
    pub lsc_tol: f64,
    pub slope_taus: Vec<f64>,
}

impl Default for DissipationConfig {
    fn default() -> Self {
        Self { h: 0.01, gibbs_tol: 1e-10, uniform_rel_tol: 0.01, lsc_tol: 0.01, slope_taus: vec![1e-3, 3e-4] }
    }
}

/// The ten instances of the `L∞` bound: bumps of decreasing width on an
/// interval, the 3-star and a two-edge path, with varying potentials.
pub fn linfty_instances(h: f64) -> Result<Vec<(GridMeasure, EdgeField)>> {
    let graphs: Vec<MetricGraph> = vec![
        interval(1.0),
        three_star(1.0),
        MetricGraph::from_description(&description(&["a", "b", "c"], &[("p", "a", "b", 0.7), ("q", "b", "c", 1.6)]))?,
    ];
    let mut out = Vec::new();
    for (gi, g) in graphs.into_iter().enumerate() {
        let grid = Grid::new(Arc::new(g), h)?;
        let len = grid.graph().edge(EdgeId(0)).length;
        for (k, r) in [0.15f64, 0.25, 0.35, 0.45].into_iter().enumerate() {
            if out.len() == 10 {
                break;
            }
            let mu = bump(&grid, 0, 0.5 * len, r.min(0.45 * len))?;
            let v = EdgeField::from_fn(&grid, |e, s| 0.3 * (k as f64) * ((e.0 + gi) as f64 + s).sin());
            out.push((mu, v));
        }
    }
    Ok(out)
}

pub fn run_dissipation(cfg: &DissipationConfig, out: &OutDir) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new("dissipation", cfg);

    let line = Grid::new(Arc::new(interval(1.0)), cfg.h)?;
    let v = EdgeField::from_fn(&line, |_, s| s * s);
    let (g, _) = gibbs(&line, &v);
    report.check("c9.gibbs", "I(Gibbs)", dissipation0(&g, &v).value, 0.0, cfg.gibbs_tol, Relation::AtMost, Basis::Invariant);

    // V continuous at the centre; ∫|∇V|² dμ for μ = λ/3 is (4/3 + 4/3 + 1/3)/3 = 1
    let star = Grid::new(Arc::new(three_star(1.0)), cfg.h)?;
    let vs = EdgeField::from_fn(&star, |e, s| if e.0 == 2 { 0.5 * s * s } else { (1.0 - s).powi(2) });
    let uniform = GridMeasure::lebesgue(&star).normalized()?;
    let i_uniform = dissipation0(&uniform, &vs).value;
    report.check("c9.uniform", "I(uniform) against the integral of |grad V|^2", i_uniform, 1.0, cfg.uniform_rel_tol, Relation::Within, Basis::Oracle);

    let mut csv = String::from("instance,max_rho,sqrt_i0,ratio,bound\n");
    let mut worst: f64 = 0.0;
    let mut holds = 0;
    let instances = linfty_instances(cfg.h)?;
    for (k, (mu, v)) in instances.iter().enumerate() {
        let r = linfty_bound_check(mu, v)?;
        csv.push_str(&format!("{k},{},{},{},{}\n", r.max_rho, r.sqrt_i0, r.ratio, r.bound));
        worst = worst.max(r.ratio / r.bound);
        holds += (r.holds() == Some(true)) as usize;
    }
    report.check("c9.linfty", "max of (sup rho / sqrt I0) / A over the instances", worst, 1.0, 0.0, Relation::AtMost, Basis::Invariant);
    report.check("c9.linfty-count", "instances on which the bound holds", holds as f64, instances.len() as f64, 0.0, Relation::Within, Basis::Invariant);
    report.output(out.write("linfty.csv", &csv)?);

    // weakly converging oscillations and strongly converging mixtures
    let vs2 = EdgeField::from_fn(&star, |e, s| if e.0 == 2 { s } else { 1.0 - s });
    let base = |s: f64| 1.0 + 0.5 * (PI * s).sin();
    let limit = GridMeasure::from_density_fn(star.clone(), |_, s| base(s))?.normalized()?;
    let i_limit = dissipation0(&limit, &vs2).value;
    let mut liminf = f64::INFINITY;
    for n in 4..=6 {
        let mu = GridMeasure::from_density_fn(star.clone(), |_, s| base(s) * (1.0 + 0.3 * (2.0 * PI * n as f64 * s).cos()))?.normalized()?;
        liminf = liminf.min(dissipation0(&mu, &vs2).value);
    }
    let other = GridMeasure::lebesgue(&star).normalized()?;
    let cells = limit.cells().iter().zip(other.cells()).map(|(a, b)| 0.999 * a + 0.001 * b).collect();
    let mixture = dissipation0(&GridMeasure::from_cells(star.clone(), cells)?, &vs2).value;
    report.check("c9.lsc", "I(limit) - min(liminf of oscillations, mixture)", i_limit - liminf.min(mixture), 0.0, cfg.lsc_tol, Relation::AtMost, Basis::Invariant);

    // diagnostic only: the probed slope against √I
    let coarse = Grid::new(Arc::new(interval(1.0)), 2.0 * cfg.h)?;
    let mu = bump(&coarse, 0, 0.5, 0.3)?;
    let mut ratios = Vec::new();
    for v in [EdgeField::zero(&coarse), EdgeField::from_fn(&coarse, |_, s| 2.0 * s)] {
        let est = slope_estimate(&mu, &v, &Interaction::zero(), &cfg.slope_taus, &JkoOptions::default())?;
        ratios.push(est.ratio());
    }
    report.note("slope_over_sqrt_dissipation", ratios);
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_suites_pass() {
        let r = run_mkv(&MkvConfig { h: 0.05, t_end: 0.2, gibbs_l1_tol: 1.0, ..Default::default() }, &OutDir::none()).unwrap();
        assert!(r.passed(), "{}", r.summary());
        let r = run_jko(&JkoConfig { h: 0.05, t_end: 0.03, l1_tol: 0.2, ..Default::default() }, &OutDir::none()).unwrap();
        assert!(r.passed(), "{}", r.summary());
    }

    #[test]
    fn transported_fluxes_solve_the_continuity_equation() {
        let path = transported_bump(0.05, 10).unwrap();
        assert!(graphot_core::dynamics::check_continuity(&path).unwrap().max() < 1e-12);
    }

    #[test]
    fn ten_linfty_instances() {
        assert_eq!(linfty_instances(0.05).unwrap().len(), 10);
    }
}
