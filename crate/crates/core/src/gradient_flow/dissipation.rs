//! Dissipation `ℐ(μ) = ∫ |w|² dμ` with `ρ w = ∇ρ + ρ ∇W[μ]`, the `L^∞`
//! bound through `ℐ₀`, and the energy-dissipation balance along paths.

use serde::Serialize;

use super::{drift, links, rho_cells, vertex_traces, Side};
use crate::dynamics::{bb_action, SpaceTimePath};
use crate::error::{Error, Result};
use crate::grid::{EdgeField, Grid};
use crate::measure::{energy_parts, GridMeasure, Interaction};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationReport {
    /// `ℐ(μ)`, `+∞` when not finite
    pub value: f64,
    pub finite: bool,
    /// `w` per interface, zero where `ρ̄` vanishes
    pub velocity: Vec<f64>,
    /// largest spread of the one-sided traces of `ρ` at a vertex
    pub continuity_defect: f64,
    /// `10 h Lip(ρ)`
    pub continuity_threshold: f64,
}

impl DissipationReport {
    fn infinite(velocity: Vec<f64>, defect: f64, threshold: f64) -> Self {
        Self { value: f64::INFINITY, finite: false, velocity, continuity_defect: defect, continuity_threshold: threshold }
    }
}

/// Discrete `ℐ(μ)`: `Σ_I h_I e^{-V_I} (∇ρ + ρ̄ ∇W)² / ρ̄` over interfaces. At a
/// vertex `ρ` is the mean of the traces extrapolated along each edge and
/// differences are one-sided.
pub fn dissipation(mu: &GridMeasure, v: &EdgeField, w: &Interaction) -> DissipationReport {
    let grid = mu.grid();
    let links = links(grid);
    if mu.has_atoms() {
        return DissipationReport::infinite(Vec::new(), f64::INFINITY, 0.0);
    }
    let rho = rho_cells(grid, &mu.densities(), v);
    let (traces, spread) = vertex_traces(grid, &rho);
    let lip = links
        .iter()
        .filter(|l| l.is_interior())
        .map(|l| match (l.left, l.right) {
            (Side::Cell(a), Side::Cell(b)) => (rho[b] - rho[a]).abs() / l.delta,
            _ => 0.0,
        })
        .fold(0.0, f64::max);
    let threshold = 10.0 * grid.max_width() * lip;
    let defect = spread.iter().copied().fold(0.0, f64::max);
    let scale = rho.iter().copied().fold(0.0, f64::max);
    if defect > threshold && defect > 1e-12 * scale {
        return DissipationReport::infinite(Vec::new(), defect, threshold);
    }
    let (wf, wv) = w.field(mu);
    let g = drift(grid, &links, &wf, &wv);
    let value_at = |s: Side| match s {
        Side::Cell(c) => rho[c],
        Side::Vertex(x) => traces[x.0],
    };
    let mut total = 0.0;
    let mut velocity = vec![0.0; links.len()];
    for (i, l) in links.iter().enumerate() {
        let (a, b) = (value_at(l.left), value_at(l.right));
        let grad = (b - a) / l.delta;
        let mean = 0.5 * (a + b);
        if mean <= 0.0 {
            if grad != 0.0 {
                return DissipationReport::infinite(velocity, defect, threshold);
            }
            continue;
        }
        let wi = grad / mean + g[i];
        velocity[i] = wi;
        total += l.weight * (-v.interface(l.edge, l.k)).exp() * mean * wi * wi;
    }
    DissipationReport { value: total, finite: true, velocity, continuity_defect: defect, continuity_threshold: threshold }
}

/// `ℐ₀`: the dissipation without interaction.
pub fn dissipation0(mu: &GridMeasure, v: &EdgeField) -> DissipationReport {
    dissipation(mu, v, &Interaction::zero())
}

/// `max_e (1/ℓ_e + 1)`: from `|f(x)| ≤ ⨍_e |f| + ∫_e |f'|` on every edge.
pub fn sobolev_constant(grid: &Grid) -> f64 {
    let g = grid.graph();
    g.edge_ids().map(|e| 1.0 / g.edge(e).length + 1.0).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinftyReport {
    pub max_rho: f64,
    pub sqrt_i0: f64,
    /// `max ρ / √ℐ₀`, `+∞` when `ℐ₀ = 0`
    pub ratio: f64,
    /// `e^{‖V‖∞} max_e (1/ℓ_e + 1)`
    pub bound: f64,
    /// `ℐ₀ = 0`: the inequality cannot hold for a probability measure
    pub zero_dissipation: bool,
}

impl LinftyReport {
    /// `None` in the zero-dissipation case.
    pub fn holds(&self) -> Option<bool> {
        (!self.zero_dissipation).then_some(self.ratio <= self.bound)
    }
}

pub fn linfty_bound_check(mu: &GridMeasure, v: &EdgeField) -> Result<LinftyReport> {
    let i0 = dissipation0(mu, v);
    if !i0.finite {
        return Err(Error::InfiniteDissipation);
    }
    let grid = mu.grid();
    let rho = rho_cells(grid, &mu.densities(), v);
    let max_rho = rho.iter().copied().fold(0.0, f64::max);
    let sqrt_i0 = i0.value.sqrt();
    let zero_dissipation = i0.value <= 1e-24 * max_rho.max(1.0);
    let ratio = if zero_dissipation { f64::INFINITY } else { max_rho / sqrt_i0 };
    Ok(LinftyReport {
        max_rho,
        sqrt_i0,
        ratio,
        bound: v.sup_norm().exp() * sobolev_constant(grid),
        zero_dissipation,
    })
}

/// Energy and dissipation at one time level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdeSample {
    pub t: f64,
    pub free_energy: f64,
    pub entropy: f64,
    pub potential: f64,
    pub interaction: f64,
    /// `ℐ(μ_t)`; zero at `t = 0`, where it is not used
    pub dissipation: f64,
    /// `∫ |v|² dμ_t` of the step ending at `t`; zero at `t = 0`
    pub action: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdeReport {
    /// `ℒ_T`
    pub value: f64,
    /// `ℱ(μ_T) - ℱ(μ_0)`
    pub energy_change: f64,
    /// `½ ∫ |μ̇|²`
    pub metric_term: f64,
    /// `½ ∫ ℐ(μ_r) dr`
    pub dissipation_term: f64,
    pub finite: bool,
    pub samples: Vec<EdeSample>,
}

impl EdeReport {
    /// Rows `(t, F, Ent, V-energy, W-energy, I)`.
    pub fn energy_csv(&self) -> String {
        let mut out = String::from("t,F,Ent,V_energy,W_energy,I\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.t, s.free_energy, s.entropy, s.potential, s.interaction, s.dissipation
            ));
        }
        out
    }
}

/// `ℒ_T = ℱ(μ_T) - ℱ(μ_0) + ½ ∫ (|μ̇|² + ℐ(μ_r)) dr`. Both integrands are
/// taken at the right end of every step; `|μ̇|²` is the action density of the
/// path's own fluxes.
pub fn energy_dissipation_check(path: &SpaceTimePath, v: &EdgeField, w: &Interaction) -> Result<EdeReport> {
    let measures = path.measures();
    if measures[0].has_atoms() {
        return Err(Error::InfiniteEnergy);
    }
    let f0 = energy_parts(&measures[0], v, w)?;
    if !f0.total().is_finite() {
        return Err(Error::InfiniteEnergy);
    }
    let times = path.times();
    let mut samples = vec![EdeSample {
        t: times[0],
        free_energy: f0.total(),
        entropy: f0.entropy,
        potential: f0.potential,
        interaction: f0.interaction,
        dissipation: 0.0,
        action: 0.0,
    }];
    let (mut metric, mut diss) = (0.0, 0.0);
    for k in 0..path.steps() {
        let mu = &measures[k + 1];
        let dt = times[k + 1] - times[k];
        let parts = energy_parts(mu, v, w)?;
        let action = bb_action(mu, &path.fluxes()[k]).value;
        let d = dissipation(mu, v, w).value;
        metric += 0.5 * dt * action;
        diss += 0.5 * dt * d;
        samples.push(EdeSample {
            t: times[k + 1],
            free_energy: parts.total(),
            entropy: parts.entropy,
            potential: parts.potential,
            interaction: parts.interaction,
            dissipation: d,
            action,
        });
    }
    let energy_change = samples.last().expect("non-empty").free_energy - f0.total();
    let value = energy_change + metric + diss;
    Ok(EdeReport { value, energy_change, metric_term: metric, dissipation_term: diss, finite: value.is_finite(), samples })
}

/// `dℱ/dt` against `Σ_I h_I w_I J_I` at the end of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainRuleSample {
    pub t: f64,
    pub energy_rate: f64,
    pub pairing: f64,
}

impl ChainRuleSample {
    pub fn defect(&self) -> f64 {
        (self.energy_rate - self.pairing).abs()
    }
}

/// Chain rule along a path, at the end of each step listed in `steps`.
pub fn chain_rule_check(path: &SpaceTimePath, v: &EdgeField, w: &Interaction, steps: &[usize]) -> Result<Vec<ChainRuleSample>> {
    let measures = path.measures();
    let grid = path.grid();
    let links = links(grid);
    steps
        .iter()
        .map(|&k| {
            if k >= path.steps() {
                return Err(Error::ParameterOutOfRange { name: "step", value: k as f64 });
            }
            let (t0, t1) = (path.times()[k], path.times()[k + 1]);
            let f0 = energy_parts(&measures[k], v, w)?.total();
            let f1 = energy_parts(&measures[k + 1], v, w)?.total();
            let report = dissipation(&measures[k + 1], v, w);
            if !report.finite {
                return Err(Error::InfiniteDissipation);
            }
            let pairing = links
                .iter()
                .zip(&report.velocity)
                .zip(path.fluxes()[k].values())
                .map(|((l, wi), j)| l.weight * wi * j)
                .sum();
            Ok(ChainRuleSample { t: t1, energy_rate: (f1 - f0) / (t1 - t0), pairing })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::builders::{interval, three_star};
    use crate::graph::{EdgeId, VertexId};
    use crate::measure::gibbs;

    #[test]
    fn gibbs_has_zero_dissipation() {
        let grid = Grid::new(Arc::new(three_star(1.0)), 0.01).unwrap();
        let v = EdgeField::from_fn(&grid, |e, s| if e.0 == 2 { s.sin() } else { (1.0 - s).powi(3) });
        let (mu, _) = gibbs(&grid, &v);
        let r = dissipation0(&mu, &v);
        assert!(r.finite && r.value <= 1e-20, "{r:?}");
    }

    #[test]
    fn uniform_measure_dissipates_grad_v_squared() {
        let grid = Grid::new(Arc::new(interval(1.0)), 0.01).unwrap();
        let v = EdgeField::from_fn(&grid, |_, s| s * s);
        let mu = GridMeasure::lebesgue(&grid);
        let r = dissipation0(&mu, &v);
        // ∫_0^1 (2s)² ds
        let exact = 4.0 / 3.0;
        assert!((r.value - exact).abs() / exact < 0.01, "{}", r.value);
    }

    #[test]
    fn atoms_and_jumps_are_infinite() {
        let grid = Grid::new(Arc::new(three_star(1.0)), 0.05).unwrap();
        let v = EdgeField::zero(&grid);
        let atom = GridMeasure::dirac(&grid, &grid.graph().vertex_point(VertexId(2)));
        assert!(!dissipation0(&atom, &v).finite);
        // mass only on e1: ρ jumps at the centre vertex
        let mu = GridMeasure::from_density_fn(grid.clone(), |e, _| if e == EdgeId(0) { 1.0 } else { 0.0 }).unwrap();
        let r = dissipation0(&mu, &v);
        assert!(!r.finite && r.continuity_defect > r.continuity_threshold);
        assert!(matches!(linfty_bound_check(&mu, &v), Err(Error::InfiniteDissipation)));
    }

    #[test]
    fn linfty_bound_flags_flat_measures() {
        let grid = Grid::new(Arc::new(interval(2.0)), 0.05).unwrap();
        let v = EdgeField::zero(&grid);
        let r = linfty_bound_check(&GridMeasure::lebesgue(&grid).normalized().unwrap(), &v).unwrap();
        assert!(r.zero_dissipation);
        assert_eq!(r.holds(), None);
        assert!((r.bound - 1.5).abs() < 1e-15);
    }

    #[test]
    fn stationary_path_has_zero_balance() {
        let grid = Grid::new(Arc::new(three_star(1.0)), 0.02).unwrap();
        let v = EdgeField::from_fn(&grid, |e, s| if e.0 == 2 { s * s } else { (1.0 - s).powi(2) });
        let (mu, _) = gibbs(&grid, &v);
        let path = SpaceTimePath::constant(&mu, vec![0.0, 0.5, 1.0]).unwrap();
        let r = energy_dissipation_check(&path, &v, &Interaction::zero()).unwrap();
        assert_eq!(r.energy_change, 0.0);
        assert_eq!(r.metric_term, 0.0);
        assert!(r.dissipation_term < 1e-20);
    }
}
