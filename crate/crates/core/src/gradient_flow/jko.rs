//! Minimising movements `μ_{n+1} ∈ argmin ℱ(ν) + W₂²(ν, μ_n) / 2τ`.
//!
//! The squared distance is the dynamic action on a short internal time grid
//! with a free final density; the free energy enters as a terminal cost with
//! `W[μ_n]` frozen. Multiplying through by `2τ`, the inner problem is
//! `min ∫∫ |v|² + 2τ Σ_c h_c z_c (log z_c + V_c + W[μ_n]_c)`.

use serde::Serialize;

use crate::dynamics::bb::{Engine, TerminalCost};
use crate::dynamics::{BbOptions, SpaceTimePath};
use crate::error::{Error, Result};
use crate::grid::EdgeField;
use crate::measure::{free_energy, GridMeasure, Interaction};

use super::dissipation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JkoOptions {
    /// internal time steps of the transport term
    pub inner_steps: usize,
    /// stopping rules of the inner solver; its `steps` field is ignored
    pub solver: BbOptions,
}

impl Default for JkoOptions {
    fn default() -> Self {
        Self { inner_steps: 4, solver: BbOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct JkoStep {
    pub measure: GridMeasure,
    /// `ℱ(result)`
    pub free_energy: f64,
    /// squared distance moved, as the action of `path`
    pub distance2: f64,
    /// `ℱ(result) + distance2 / 2τ`
    pub objective: f64,
    /// `false` when the solver's candidate did not improve on staying put;
    /// the step then returns the input unchanged
    pub accepted: bool,
    pub iterations: usize,
    pub path: Option<SpaceTimePath>,
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveDt(tau))
    }
}

fn step_with(
    engine: &mut Engine,
    mu: &GridMeasure,
    tau: f64,
    v: &EdgeField,
    w: &Interaction,
    options: &JkoOptions,
) -> Result<JkoStep> {
    let f_start = free_energy(mu, v, w)?;
    if !f_start.is_finite() {
        return Err(Error::InfiniteEnergy);
    }
    let grid = mu.grid();
    let (wf, _) = w.field(mu);
    let n = grid.cell_count();
    let mut weight = vec![0.0; n];
    let mut linear = vec![0.0; n];
    for c in 0..n {
        let (e, i) = grid.cell_edge(c);
        weight[c] = 2.0 * tau * grid.width(e);
        linear[c] = v.center(e, i) + wf.center(e, i);
    }
    let terminal = TerminalCost { weight, linear };
    let weights = engine.action_weights(1.0);
    let outcome = engine.run(&mu.densities(), None, &weights, Some(&terminal), &options.solver)?;
    if !outcome.converged {
        return Err(Error::NotConverged {
            iterations: outcome.iterations,
            relative_change: outcome.last_change,
            residual: outcome.residual,
        });
    }
    let path = engine.to_path(&outcome.rho, &outcome.u)?;
    let candidate = path.measures().last().expect("non-empty").normalized()?;
    let distance2 = path.action();
    let f_end = free_energy(&candidate, v, w)?;
    let objective = f_end + distance2 / (2.0 * tau);
    if objective <= f_start {
        Ok(JkoStep {
            measure: candidate,
            free_energy: f_end,
            distance2,
            objective,
            accepted: true,
            iterations: outcome.iterations,
            path: Some(path),
        })
    } else {
        Ok(JkoStep {
            measure: mu.clone(),
            free_energy: f_start,
            distance2: 0.0,
            objective: f_start,
            accepted: false,
            iterations: outcome.iterations,
            path: None,
        })
    }
}

/// One minimising movement from `mu`.
pub fn jko_step(mu: &GridMeasure, tau: f64, v: &EdgeField, w: &Interaction, options: &JkoOptions) -> Result<JkoStep> {
    check_tau(tau)?;
    mu.reject_atoms()?;
    mu.check_probability()?;
    let mut engine = Engine::new(mu.grid(), options.inner_steps, true)?;
    step_with(&mut engine, mu, tau, v, w, options)
}

#[derive(Debug, Clone)]
pub struct JkoFlow {
    /// `μ_0, μ_1, …, μ_N`
    pub measures: Vec<GridMeasure>,
    pub free_energies: Vec<f64>,
    pub tau: f64,
    pub accepted: Vec<bool>,
}

impl JkoFlow {
    /// Piecewise-constant interpolation: `μ_n` on `((n-1)τ, nτ]`.
    pub fn at(&self, t: f64) -> &GridMeasure {
        let n = (t / self.tau - 1e-9).ceil().max(0.0) as usize;
        &self.measures[n.min(self.measures.len() - 1)]
    }

    pub fn is_monotone(&self) -> bool {
        self.free_energies.windows(2).all(|p| p[1] <= p[0])
    }
}

pub fn jko_flow(
    mu0: &GridMeasure,
    tau: f64,
    steps: usize,
    v: &EdgeField,
    w: &Interaction,
    options: &JkoOptions,
) -> Result<JkoFlow> {
    check_tau(tau)?;
    mu0.reject_atoms()?;
    mu0.check_probability()?;
    let mut measures = vec![mu0.clone()];
    let mut free_energies = vec![free_energy(mu0, v, w)?];
    let mut accepted = Vec::with_capacity(steps);
    if steps > 0 {
        let mut engine = Engine::new(mu0.grid(), options.inner_steps, true)?;
        for _ in 0..steps {
            let step = step_with(&mut engine, measures.last().expect("non-empty"), tau, v, w, options)?;
            free_energies.push(step.free_energy);
            accepted.push(step.accepted);
            measures.push(step.measure);
        }
    }
    Ok(JkoFlow { measures, free_energies, tau, accepted })
}

/// Metric slope probed by minimising movements:
/// `(ℱ(μ) - ℱ(μ_τ)) / W₂(μ, μ_τ)` for each `τ`, against `√ℐ(μ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeEstimate {
    pub probes: Vec<(f64, f64)>,
    pub slope: f64,
    pub sqrt_dissipation: f64,
}

impl SlopeEstimate {
    /// `slope / √ℐ`; at least about one when the slope dominates.
    pub fn ratio(&self) -> f64 {
        self.slope / self.sqrt_dissipation
    }
}

pub fn slope_estimate(
    mu: &GridMeasure,
    v: &EdgeField,
    w: &Interaction,
    taus: &[f64],
    options: &JkoOptions,
) -> Result<SlopeEstimate> {
    let f0 = free_energy(mu, v, w)?;
    let mut engine = Engine::new(mu.grid(), options.inner_steps, true)?;
    let mut probes = Vec::new();
    for &tau in taus {
        check_tau(tau)?;
        let step = step_with(&mut engine, mu, tau, v, w, options)?;
        let slope = if step.distance2 > 0.0 { (f0 - step.free_energy) / step.distance2.sqrt() } else { 0.0 };
        probes.push((tau, slope));
    }
    let slope = probes.iter().map(|p| p.1).fold(0.0, f64::max);
    let d = dissipation(mu, v, w);
    Ok(SlopeEstimate { probes, slope, sqrt_dissipation: d.value.sqrt() })
}
