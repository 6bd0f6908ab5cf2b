//! First-order primal-dual solver for the discrete Benamou-Brenier problem.
//!
//! Unknowns are the densities at the free time levels and the fluxes at every
//! half step. The affine constraint set (continuity on every cell, Kirchhoff
//! at every vertex) is handled by exact projection; the action, and for JKO
//! steps an entropy-type terminal cost, by their proximal maps.
//!
//! The projection solves with `D Dᵀ = T ⊗ H² + I ⊗ S`, where `T` couples the
//! time levels and `S = L Lᵀ` with `L = [Δt B; G]` the spatial divergence and
//! vertex balance. `T` is diagonalised once; vertex rows are eliminated per
//! mode and the remaining cell system is diagonal in the eigenbasis of
//! `H⁻¹ Ŝ H⁻¹`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{FluxField, SpaceTimePath};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::measure::{GridMeasure, MASS_TOL};

const ADAPT_EVERY: usize = 10;
const ADAPT_DECAY: f64 = 0.95;
const BALANCE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbOptions {
    pub steps: usize,
    pub max_iterations: usize,
    /// relative change of the action between checks
    pub action_tol: f64,
    /// max continuity residual of the returned path
    pub residual_tol: f64,
    /// max distance between `A x` and the proximal point, relative to the
    /// largest density
    pub feasibility_tol: f64,
    pub check_every: usize,
}

impl Default for BbOptions {
    fn default() -> Self {
        Self {
            steps: 32,
            max_iterations: 200_000,
            action_tol: 1e-7,
            residual_tol: 1e-9,
            feasibility_tol: 1e-5,
            check_every: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BbSolution {
    pub path: SpaceTimePath,
    /// `∫_0^1 ∫ |v|² dμ_t dt` of the returned path
    pub action: f64,
    pub iterations: usize,
    pub residual: f64,
    /// weight of the positive reference path mixed in to remove round-off
    /// negativity
    pub repair_weight: f64,
}

/// Minimises the discrete action between `mu0` and `mu1` over `K` steps.
pub fn solve_bb(mu0: &GridMeasure, mu1: &GridMeasure, options: &BbOptions) -> Result<BbSolution> {
    mu0.reject_atoms()?;
    mu1.reject_atoms()?;
    if mu0.grid() != mu1.grid() {
        return Err(Error::GridMismatch);
    }
    mu0.check_probability()?;
    mu1.check_probability()?;
    let (m0, m1) = (mu0.total_mass(), mu1.total_mass());
    if (m0 - m1).abs() > MASS_TOL {
        return Err(Error::UnbalancedMasses(m0, m1));
    }
    let mut engine = Engine::new(mu0.grid(), options.steps, false)?;
    let weights = engine.action_weights(1.0);
    let outcome = engine.run(&mu0.densities(), Some(&mu1.densities()), &weights, None, options)?;
    outcome.into_solution(&engine)
}

/// Terminal cost `Σ_c d_c (z_c log z_c + a_c z_c)` on the final densities.
#[derive(Debug, Clone)]
pub(crate) struct TerminalCost {
    pub weight: Vec<f64>,
    pub linear: Vec<f64>,
}

pub(crate) struct Outcome {
    pub rho: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub repair: f64,
    pub converged: bool,
    pub last_change: f64,
}

impl Outcome {
    fn into_solution(self, engine: &Engine) -> Result<BbSolution> {
        if !self.converged {
            return Err(Error::NotConverged {
                iterations: self.iterations,
                relative_change: self.last_change,
                residual: self.residual,
            });
        }
        let path = engine.to_path(&self.rho, &self.u)?;
        Ok(BbSolution { action: path.action(), path, iterations: self.iterations, residual: self.residual, repair_weight: self.repair })
    }
}

pub(crate) struct Engine {
    grid: Grid,
    n: usize,
    ni: usize,
    k: usize,
    free_end: bool,
    dt: f64,
    h: DVector<f64>,
    /// rows of the interface-density interpolation `P`
    interp: Vec<Vec<(usize, f64)>>,
    /// `(left, right)` interfaces of every cell
    cell_ifs: Vec<(usize, usize)>,
    /// `(interface, ι)` per vertex
    balance: Vec<Vec<(usize, f64)>>,
    degree: Vec<f64>,
    /// interface weights `h_I`
    if_width: Vec<f64>,
    time_vecs: DMatrix<f64>,
    time_vals: Vec<f64>,
    q: DMatrix<f64>,
    lam: Vec<f64>,
}

impl Engine {
    pub fn new(grid: &Grid, k: usize, free_end: bool) -> Result<Self> {
        if k == 0 {
            return Err(Error::ParameterOutOfRange { name: "steps", value: 0.0 });
        }
        let g = grid.graph();
        let n = grid.cell_count();
        let ni = grid.interface_count();
        let dt = 1.0 / k as f64;
        let h = DVector::from_iterator(n, (0..n).map(|c| grid.width(grid.cell_edge(c).0)));
        let mut interp = vec![Vec::new(); ni];
        let mut if_width = vec![0.0; ni];
        let mut cell_ifs = vec![(0, 0); n];
        for e in g.edge_ids() {
            let edge = g.edge(e);
            let cells = grid.cells(e);
            let ifs = grid.interfaces(e);
            for (i, c) in cells.clone().enumerate() {
                cell_ifs[c] = (ifs.start + i, ifs.start + i + 1);
            }
            for (kk, idx) in ifs.enumerate() {
                if kk == 0 || kk == cells.len() {
                    let w = if kk == 0 { edge.init } else { edge.term };
                    let inc = g.incident(w);
                    interp[idx] = inc.iter().map(|&(b, _)| (grid.boundary_cell(b, w), 1.0 / inc.len() as f64)).collect();
                    if_width[idx] = 0.5 * grid.width(e);
                } else {
                    interp[idx] = vec![(cells.start + kk - 1, 0.5), (cells.start + kk, 0.5)];
                    if_width[idx] = grid.width(e);
                }
            }
        }
        let balance: Vec<Vec<(usize, f64)>> = g
            .vertex_ids()
            .map(|w| g.incident(w).iter().map(|&(e, iota)| (grid.vertex_interface(e, w), iota as f64)).collect())
            .collect();
        let degree: Vec<f64> = balance.iter().map(|b| b.len() as f64).collect();

        // time coupling of the continuity rows
        let free = |level: usize| (1..k).contains(&level) || (free_end && level == k);
        let mut t = DMatrix::zeros(k, k);
        for row in 0..k {
            t[(row, row)] = free(row) as u8 as f64 + free(row + 1) as u8 as f64;
            if row + 1 < k && free(row + 1) {
                t[(row, row + 1)] = -1.0;
                t[(row + 1, row)] = -1.0;
            }
        }
        let te = SymmetricEigen::new(t);

        // Schur complement of the vertex rows: Ŝ = Δt² B (I - Gᵀ D⁻¹ G) Bᵀ
        let mut bt = DMatrix::zeros(ni, n);
        for (c, &(l, r)) in cell_ifs.iter().enumerate() {
            bt[(r, c)] += 1.0;
            bt[(l, c)] -= 1.0;
        }
        let mut pbt = bt.clone();
        for (v, bal) in balance.iter().enumerate() {
            for c in 0..n {
                let proj: f64 = bal.iter().map(|&(i, s)| s * bt[(i, c)]).sum::<f64>() / degree[v];
                if proj != 0.0 {
                    for &(i, s) in bal {
                        pbt[(i, c)] -= s * proj;
                    }
                }
            }
        }
        let s_hat = (bt.transpose() * &pbt) * (dt * dt);
        let m = DMatrix::from_fn(n, n, |i, j| s_hat[(i, j)] / (h[i] * h[j]));
        let se = SymmetricEigen::new(m);
        Ok(Self {
            grid: grid.clone(),
            n,
            ni,
            k,
            free_end,
            dt,
            h,
            interp,
            cell_ifs,
            balance,
            degree,
            if_width,
            time_vals: te.eigenvalues.iter().copied().collect(),
            time_vecs: te.eigenvectors,
            lam: se.eigenvalues.iter().copied().collect(),
            q: se.eigenvectors,
        })
    }

    /// Weights `c_I` of the action terms `c_I u²/s`, scaled by `scale`.
    pub fn action_weights(&self, scale: f64) -> Vec<f64> {
        self.if_width.iter().map(|w| scale * self.dt * w).collect()
    }

    fn is_free(&self, level: usize) -> bool {
        (1..self.k).contains(&level) || (self.free_end && level == self.k)
    }

    /// `A x + c`: time-then-space averaged densities at every half step.
    fn interpolate(&self, rho: &DMatrix<f64>, s: &mut DMatrix<f64>) {
        for step in 0..self.k {
            for (i, row) in self.interp.iter().enumerate() {
                s[(i, step)] = row.iter().map(|&(c, w)| 0.5 * w * (rho[(c, step)] + rho[(c, step + 1)])).sum();
            }
        }
    }

    /// `Aᵀ y` restricted to the densities (free levels only).
    fn interpolate_t(&self, ys: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        out.fill(0.0);
        for step in 0..self.k {
            for (i, row) in self.interp.iter().enumerate() {
                let y = 0.5 * ys[(i, step)];
                if y == 0.0 {
                    continue;
                }
                for &(c, w) in row {
                    out[(c, step)] += w * y;
                    out[(c, step + 1)] += w * y;
                }
            }
        }
        for level in 0..=self.k {
            if !self.is_free(level) {
                out.column_mut(level).fill(0.0);
            }
        }
    }

    fn power_norm(&self) -> f64 {
        let mut rho = DMatrix::from_fn(self.n, self.k + 1, |i, j| 1.0 + ((i * 7 + j * 13) % 11) as f64 / 11.0);
        for level in 0..=self.k {
            if !self.is_free(level) {
                rho.column_mut(level).fill(0.0);
            }
        }
        let mut s = DMatrix::zeros(self.ni, self.k);
        let mut back = DMatrix::zeros(self.n, self.k + 1);
        let mut est = 1.0;
        for _ in 0..50 {
            let norm = rho.norm();
            if norm == 0.0 {
                break;
            }
            rho /= norm;
            self.interpolate(&rho, &mut s);
            self.interpolate_t(&s, &mut back);
            if self.free_end {
                // identity block on the terminal densities
                let col = rho.column(self.k).clone_owned();
                back.column_mut(self.k).axpy(1.0, &col, 1.0);
            }
            est = back.dot(&rho).sqrt();
            std::mem::swap(&mut rho, &mut back);
        }
        // the flux block is the identity
        est.max(1.0)
    }

    /// Solves `(λ_j H² + Ŝ) p = r̂` column by column in the time-mode basis and
    /// recovers the vertex multipliers. Columns of `rp`, `rq` are modes.
    fn mode_solve(&self, rp: &DMatrix<f64>, rq: &DMatrix<f64>, lambdas: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let cols = rp.ncols();
        let mut rhat = rp.clone();
        // r̂ = r_p - Δt B Gᵀ D⁻¹ r_q
        for j in 0..cols {
            let mut g_q = vec![0.0; self.ni];
            for (v, bal) in self.balance.iter().enumerate() {
                let val = rq[(v, j)] / self.degree[v];
                for &(i, s) in bal {
                    g_q[i] += s * val;
                }
            }
            for (c, &(l, r)) in self.cell_ifs.iter().enumerate() {
                rhat[(c, j)] -= self.dt * (g_q[r] - g_q[l]);
                rhat[(c, j)] /= self.h[c];
            }
        }
        let mut z = self.q.tr_mul(&rhat);
        let scale = self.lam.iter().copied().fold(0.0, f64::max).max(1.0);
        for j in 0..cols {
            for i in 0..self.n {
                let d = lambdas[j] + self.lam[i];
                z[(i, j)] = if d.abs() <= 1e-11 * scale { 0.0 } else { z[(i, j)] / d };
            }
        }
        let mut p = &self.q * z;
        for j in 0..cols {
            for c in 0..self.n {
                p[(c, j)] /= self.h[c];
            }
        }
        // q = D⁻¹ (r_q - Δt G Bᵀ p)
        let mut qv = DMatrix::zeros(self.balance.len(), cols);
        for j in 0..cols {
            let mut btp = vec![0.0; self.ni];
            for (c, &(l, r)) in self.cell_ifs.iter().enumerate() {
                btp[r] += p[(c, j)];
                btp[l] -= p[(c, j)];
            }
            for (v, bal) in self.balance.iter().enumerate() {
                let gb: f64 = bal.iter().map(|&(i, s)| s * btp[i]).sum();
                qv[(v, j)] = (rq[(v, j)] - self.dt * gb) / self.degree[v];
            }
        }
        (p, qv)
    }

    /// Continuity residuals (cells) and vertex balances for every step.
    fn residual(&self, rho: &DMatrix<f64>, u: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut rp = DMatrix::zeros(self.n, self.k);
        let mut rq = DMatrix::zeros(self.balance.len(), self.k);
        for step in 0..self.k {
            for (c, &(l, r)) in self.cell_ifs.iter().enumerate() {
                rp[(c, step)] =
                    self.h[c] * (rho[(c, step + 1)] - rho[(c, step)]) + self.dt * (u[(r, step)] - u[(l, step)]);
            }
            for (v, bal) in self.balance.iter().enumerate() {
                rq[(v, step)] = bal.iter().map(|&(i, s)| s * u[(i, step)]).sum();
            }
        }
        (rp, rq)
    }

    /// Orthogonal projection of the free unknowns onto the constraint set.
    fn project(&self, rho: &mut DMatrix<f64>, u: &mut DMatrix<f64>) {
        let (rp, rq) = self.residual(rho, u);
        let (yp_m, yq_m) = self.mode_solve(&(rp * &self.time_vecs), &(rq * &self.time_vecs), &self.time_vals);
        let yp = yp_m * self.time_vecs.transpose();
        let yq = yq_m * self.time_vecs.transpose();
        self.apply_dt(&yp, &yq, rho, u, -1.0);
    }

    /// `x += factor · Dᵀ y` on the free unknowns.
    fn apply_dt(&self, yp: &DMatrix<f64>, yq: &DMatrix<f64>, rho: &mut DMatrix<f64>, u: &mut DMatrix<f64>, factor: f64) {
        for level in 0..=self.k {
            if !self.is_free(level) {
                continue;
            }
            for c in 0..self.n {
                let mut v = 0.0;
                if level >= 1 {
                    v += yp[(c, level - 1)];
                }
                if level < self.k {
                    v -= yp[(c, level)];
                }
                rho[(c, level)] += factor * self.h[c] * v;
            }
        }
        for step in 0..self.k {
            for (c, &(l, r)) in self.cell_ifs.iter().enumerate() {
                let y = factor * self.dt * yp[(c, step)];
                u[(r, step)] += y;
                u[(l, step)] -= y;
            }
            for (v, bal) in self.balance.iter().enumerate() {
                for &(i, s) in bal {
                    u[(i, step)] += factor * s * yq[(v, step)];
                }
            }
        }
    }

    /// Min-norm fluxes carrying the given density levels (all columns set).
    fn fluxes_for(&self, rho: &DMatrix<f64>) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(self.ni, self.k);
        let (rp, rq) = self.residual(rho, &u);
        let zeros = vec![0.0; self.k];
        let (p, q) = self.mode_solve(&rp, &rq, &zeros);
        // U = -Lᵀ (L Lᵀ)⁺ r
        self.apply_dt_fluxes(&p, &q, &mut u, -1.0);
        u
    }

    fn apply_dt_fluxes(&self, yp: &DMatrix<f64>, yq: &DMatrix<f64>, u: &mut DMatrix<f64>, factor: f64) {
        for step in 0..self.k {
            for (c, &(l, r)) in self.cell_ifs.iter().enumerate() {
                let y = factor * self.dt * yp[(c, step)];
                u[(r, step)] += y;
                u[(l, step)] -= y;
            }
            for (v, bal) in self.balance.iter().enumerate() {
                for &(i, s) in bal {
                    u[(i, step)] += factor * s * yq[(v, step)];
                }
            }
        }
    }

    /// A feasible path with strictly positive densities at every free level.
    fn positive_reference(&self, rho: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let mass: f64 = (0..self.n).map(|c| self.h[c] * rho[(c, 0)]).sum();
        let total: f64 = self.h.sum();
        let uniform = mass / total;
        let end: Vec<f64> = (0..self.n)
            .map(|c| if self.free_end { 0.5 * (rho[(c, 0)] + uniform) } else { rho[(c, self.k)] })
            .collect();
        let mut r = rho.clone();
        for level in 1..=self.k {
            if !self.is_free(level) {
                continue;
            }
            let t = level as f64 / self.k as f64;
            let theta = 2.0 * t * (1.0 - t);
            for c in 0..self.n {
                let lin = (1.0 - t) * rho[(c, 0)] + t * end[c];
                r[(c, level)] = (1.0 - theta) * lin + theta * uniform;
            }
        }
        let u = self.fluxes_for(&r);
        (r, u)
    }

    /// Runs the primal-dual iteration. `rho1 = None` leaves the final level
    /// free, priced by `terminal`.
    pub fn run(
        &mut self,
        rho0: &[f64],
        rho1: Option<&[f64]>,
        weights: &[f64],
        terminal: Option<&TerminalCost>,
        options: &BbOptions,
    ) -> Result<Outcome> {
        let (n, k) = (self.n, self.k);
        let mut rho = DMatrix::zeros(n, k + 1);
        for c in 0..n {
            let a = rho0[c];
            let b = rho1.map_or(a, |r| r[c]);
            for level in 0..=k {
                let t = level as f64 / k as f64;
                rho[(c, level)] = (1.0 - t) * a + t * b;
            }
        }
        let mut u = self.fluxes_for(&rho);
        self.project(&mut rho, &mut u);

        let norm = self.power_norm();
        let wmax = weights.iter().copied().fold(0.0, f64::max);
        let scale = 1.0 / wmax;
        let w: Vec<f64> = weights.iter().map(|x| x * scale).collect();
        let term = terminal.map(|t| TerminalCost { weight: t.weight.iter().map(|x| x * scale).collect(), linear: t.linear.clone() });

        let rho_scale = rho.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let mut tau = 1.0 / norm;
        let mut sigma = 0.99 / norm;
        let mut adapt_rate = 0.5;

        let mut ys = DMatrix::zeros(self.ni, k);
        let mut yu = DMatrix::zeros(self.ni, k);
        let mut yz = DVector::<f64>::zeros(n);
        let mut rho_bar = rho.clone();
        let mut u_bar = u.clone();
        let mut s = DMatrix::zeros(self.ni, k);
        let mut grad = DMatrix::zeros(n, k + 1);
        let mut vacant = DMatrix::from_element(self.ni, k, false);
        let mut last_obj = f64::NAN;
        let mut last_change = f64::INFINITY;
        let mut feas = f64::INFINITY;
        let mut iterations = 0;
        let mut converged = false;

        while iterations < options.max_iterations {
            iterations += 1;
            // dual step
            self.interpolate(&rho_bar, &mut s);
            let check = iterations % options.check_every == 0;
            let adapt = iterations % ADAPT_EVERY == 0;
            let y_prev = adapt.then(|| (ys.clone(), yu.clone(), yz.clone()));
            let mut feas_now: f64 = 0.0;
            for step in 0..k {
                for i in 0..self.ni {
                    let vs = ys[(i, step)] + sigma * s[(i, step)];
                    let vu = yu[(i, step)] + sigma * u_bar[(i, step)];
                    let (ps, pu) = prox_perspective(vs / sigma, vu / sigma, w[i] / sigma);
                    vacant[(i, step)] = ps == 0.0;
                    ys[(i, step)] = vs - sigma * ps;
                    yu[(i, step)] = vu - sigma * pu;
                    if check {
                        feas_now = feas_now.max((s[(i, step)] - ps).abs()).max((u_bar[(i, step)] - pu).abs());
                    }
                }
            }
            if let Some(tc) = &term {
                for c in 0..n {
                    let vz = yz[c] + sigma * rho_bar[(c, k)];
                    let z = prox_entropy(vz / sigma, tc.weight[c] / sigma, tc.linear[c]);
                    yz[c] = vz - sigma * z;
                    if check {
                        feas_now = feas_now.max((rho_bar[(c, k)] - z).abs());
                    }
                }
            }
            // primal step
            self.interpolate_t(&ys, &mut grad);
            let rho_old = rho.clone();
            let u_old = u.clone();
            for level in 0..=k {
                if !self.is_free(level) {
                    continue;
                }
                for c in 0..n {
                    let mut gz = grad[(c, level)];
                    if level == k {
                        gz += yz[c];
                    }
                    rho[(c, level)] -= tau * gz;
                }
            }
            u -= &yu * tau;
            self.project(&mut rho, &mut u);
            rho_bar.copy_from(&rho);
            rho_bar *= 2.0;
            rho_bar -= &rho_old;
            u_bar.copy_from(&u);
            u_bar *= 2.0;
            u_bar -= &u_old;

            if let Some((ys0, yu0, yz0)) = y_prev {
                let (pn, dn) = self.step_residuals(
                    (&(&rho_old - &rho), &(&u_old - &u)),
                    (&(ys0 - &ys), &(yu0 - &yu), &(yz0 - &yz)),
                    tau,
                    sigma,
                    term.is_some(),
                );
                if pn > BALANCE * dn {
                    tau /= 1.0 - adapt_rate;
                    sigma *= 1.0 - adapt_rate;
                    adapt_rate *= ADAPT_DECAY;
                } else if dn > BALANCE * pn {
                    tau *= 1.0 - adapt_rate;
                    sigma /= 1.0 - adapt_rate;
                    adapt_rate *= ADAPT_DECAY;
                }
            }

            if check {
                feas = feas_now / rho_scale;
                let obj = self.objective(&rho, &u, &w, term.as_ref());
                last_change = ((obj - last_obj) / obj.abs().max(1e-12)).abs();
                last_obj = obj;
                if last_change < options.action_tol && feas < options.feasibility_tol {
                    converged = true;
                    break;
                }
            }
        }

        self.clean_negatives(&mut rho, &mut u, &vacant, 1e-12 * rho_scale, 5000);
        let (reference_rho, reference_u) = self.positive_reference(&rho);
        let repair = self.repair(&mut rho, &mut u, &reference_rho, &reference_u);
        let (rp, rq) = self.residual(&rho, &u);
        let residual = rp.amax().max(rq.amax() * self.dt);
        let converged = converged && residual <= options.residual_tol;
        Ok(Outcome { rho, u, iterations, residual, repair, converged, last_change: last_change.min(feas.max(last_change)) })
    }

    /// Norms of the primal and dual optimality residuals of the last step
    /// (adaptive primal-dual hybrid gradient). The primal one is taken in the
    /// tangent space of the constraint set.
    fn step_residuals(
        &self,
        dx: (&DMatrix<f64>, &DMatrix<f64>),
        dy: (&DMatrix<f64>, &DMatrix<f64>, &DVector<f64>),
        tau: f64,
        sigma: f64,
        terminal: bool,
    ) -> (f64, f64) {
        let mut at = DMatrix::zeros(self.n, self.k + 1);
        self.interpolate_t(dy.0, &mut at);
        if terminal {
            let mut col = at.column_mut(self.k);
            col += dy.2;
        }
        let mut p_rho = dx.0 / tau - at;
        let mut p_u = dx.1 / tau - dy.1;
        for level in 0..=self.k {
            if !self.is_free(level) {
                p_rho.column_mut(level).fill(0.0);
            }
        }
        self.project(&mut p_rho, &mut p_u);
        let pn = (p_rho.norm_squared() + p_u.norm_squared()).sqrt();

        let mut a = DMatrix::zeros(self.ni, self.k);
        self.interpolate(dx.0, &mut a);
        let d_s = dy.0 / sigma - a;
        let d_u = dy.1 / sigma - dx.1;
        let mut dn2 = d_s.norm_squared() + d_u.norm_squared();
        if terminal {
            dn2 += (dy.2 / sigma - dx.0.column(self.k)).norm_squared();
        }
        (pn, dn2.sqrt())
    }

    /// Objective with the action terms taken as `+∞`-free: terms with
    /// non-positive averaged density are skipped.
    fn objective(&self, rho: &DMatrix<f64>, u: &DMatrix<f64>, w: &[f64], term: Option<&TerminalCost>) -> f64 {
        let mut s = DMatrix::zeros(self.ni, self.k);
        self.interpolate(rho, &mut s);
        let mut total = 0.0;
        for step in 0..self.k {
            for i in 0..self.ni {
                let (sv, uv) = (s[(i, step)], u[(i, step)]);
                if sv > 0.0 {
                    total += w[i] * uv * uv / sv;
                }
            }
        }
        if let Some(tc) = term {
            for c in 0..self.n {
                let z = rho[(c, self.k)];
                if z > 0.0 {
                    total += tc.weight[c] * (z * z.ln() + tc.linear[c] * z);
                }
            }
        }
        total
    }

    /// Dykstra's alternating projections onto the constraint set and the
    /// non-negative densities, starting from a feasible point. Ends on the
    /// constraint set.
    fn clean_negatives(&self, rho: &mut DMatrix<f64>, u: &mut DMatrix<f64>, vacant: &DMatrix<bool>, tol: f64, max_iter: usize) {
        let min_free = |r: &DMatrix<f64>| {
            let mut m = f64::INFINITY;
            for level in 0..=self.k {
                if self.is_free(level) {
                    m = r.column(level).iter().copied().fold(m, f64::min);
                }
            }
            m
        };
        let mut p_rho = DMatrix::zeros(self.n, self.k + 1);
        let mut p_u = DMatrix::zeros(self.ni, self.k);
        let mut q_rho = DMatrix::zeros(self.n, self.k + 1);
        let mut x_rho = rho.clone();
        let mut x_u = u.clone();
        for _ in 0..max_iter {
            let mut y_rho = &x_rho + &p_rho;
            let mut y_u = &x_u + &p_u;
            self.project(&mut y_rho, &mut y_u);
            p_rho += &x_rho - &y_rho;
            p_u += &x_u - &y_u;
            let stray = y_u.zip_map(vacant, |v, z| if z { v.abs() } else { 0.0 }).max();
            let done = min_free(&y_rho) >= -tol && stray <= tol;
            *rho = y_rho.clone();
            *u = y_u.clone();
            if done {
                return;
            }
            // projection onto ρ ≥ 0 leaves the fluxes alone
            let z = &y_rho + &q_rho;
            x_rho = z.map(|v| v.max(0.0));
            for level in 0..=self.k {
                if !self.is_free(level) {
                    x_rho.set_column(level, &y_rho.column(level));
                }
            }
            q_rho = z - &x_rho;
            // the flux part is a subspace: no correction term needed
            x_u = y_u.zip_map(vacant, |v, z| if z { 0.0 } else { v });
        }
    }

    /// Mixes in the smallest weight of the positive reference path that makes
    /// every free density non-negative; returns that weight.
    fn repair(&self, rho: &mut DMatrix<f64>, u: &mut DMatrix<f64>, rr: &DMatrix<f64>, ru: &DMatrix<f64>) -> f64 {
        let mut theta: f64 = 0.0;
        for level in 0..=self.k {
            if !self.is_free(level) {
                continue;
            }
            for c in 0..self.n {
                let x = rho[(c, level)];
                if x < 0.0 {
                    let th = -x / (rr[(c, level)] - x);
                    theta = theta.max(th);
                }
            }
        }
        if theta > 0.0 {
            // a little margin so that round-off cannot leave negatives
            let theta = (theta * (1.0 + 1e-9)).min(1.0);
            *rho = &*rho * (1.0 - theta) + rr * theta;
            *u = &*u * (1.0 - theta) + ru * theta;
            for level in 0..=self.k {
                if self.is_free(level) {
                    for c in 0..self.n {
                        rho[(c, level)] = rho[(c, level)].max(0.0);
                    }
                }
            }
            return theta;
        }
        0.0
    }

    pub fn to_path(&self, rho: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<SpaceTimePath> {
        let times = (0..=self.k).map(|l| l as f64 * self.dt).collect();
        let measures = (0..=self.k)
            .map(|l| {
                let cells = (0..self.n).map(|c| (self.h[c] * rho[(c, l)]).max(0.0)).collect();
                GridMeasure::from_cells(self.grid.clone(), cells)
            })
            .collect::<Result<Vec<_>>>()?;
        let fluxes = (0..self.k)
            .map(|s| FluxField::new(self.grid.clone(), u.column(s).iter().copied().collect()))
            .collect::<Result<Vec<_>>>()?;
        SpaceTimePath::new(times, measures, fluxes)
    }
}

/// Proximal map of `(s, u) ↦ g u²/s` (closed convex extension) at `(s0, u0)`.
///
/// The minimiser solves `(s - s0)(s + 2g)² = g u0²`; its largest root is found
/// by Newton's method from the right, where the cubic is convex and increasing.
pub fn prox_perspective(s0: f64, u0: f64, g: f64) -> (f64, f64) {
    let rhs = g * u0 * u0;
    if rhs == 0.0 {
        return if s0 > 0.0 { (s0, 0.0) } else { (0.0, 0.0) };
    }
    // both offsets put the cubic at or above zero
    let base = s0.max(0.0);
    let mut s = base + rhs.cbrt().min(rhs / ((base + 2.0 * g) * (base + 2.0 * g)));
    let tol = 1e-13 * (s.abs() + g);
    for _ in 0..60 {
        let a = s + 2.0 * g;
        let f = (s - s0) * a * a - rhs;
        let df = a * a + 2.0 * (s - s0) * a;
        let step = f / df;
        // iterates decrease monotonically; a non-positive step means round-off
        if step <= tol {
            if step > 0.0 {
                s -= step;
            }
            break;
        }
        s -= step;
    }
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    (s, u0 * s / (s + 2.0 * g))
}

/// Proximal map of `z ↦ d (z log z + a z)` at `z0`, solved for `w = log z`
/// from `e^w + d w = z0 - d (1 + a)`.
pub fn prox_entropy(z0: f64, d: f64, a: f64) -> f64 {
    if d == 0.0 {
        return z0.max(0.0);
    }
    let rhs = z0 - d * (1.0 + a);
    // starting point on the correct side of the root
    let mut w = if rhs > d { (rhs.max(1e-300)).ln().min(rhs / d) } else { rhs / d };
    if !w.is_finite() {
        w = -700.0;
    }
    for _ in 0..200 {
        let ew = w.exp();
        let f = ew + d * w - rhs;
        let step = f / (ew + d);
        w -= step;
        if step.abs() <= 1e-14 * w.abs().max(1.0) {
            break;
        }
    }
    w.exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force minimisation of the prox objective on a fine grid.
    fn brute(s0: f64, u0: f64, g: f64) -> (f64, f64) {
        let obj = |s: f64, u: f64| {
            let f = if s > 0.0 { g * u * u / s } else if u == 0.0 && s == 0.0 { 0.0 } else { f64::INFINITY };
            f + 0.5 * ((s - s0).powi(2) + (u - u0).powi(2))
        };
        let mut best = (0.0, 0.0, obj(0.0, 0.0));
        for i in 1..=2000 {
            let s = i as f64 * 0.005;
            // optimal u for fixed s is explicit
            let u = u0 * s / (s + 2.0 * g);
            let v = obj(s, u);
            if v < best.2 {
                best = (s, u, v);
            }
        }
        (best.0, best.1)
    }

    #[test]
    fn perspective_prox_matches_brute_force() {
        for &(s0, u0, g) in &[(1.0, 2.0, 0.5), (-0.3, 1.0, 0.2), (0.5, 0.0, 1.0), (-1.0, 0.1, 0.1), (3.0, -4.0, 0.7)] {
            let (s, u) = prox_perspective(s0, u0, g);
            let (bs, bu) = brute(s0, u0, g);
            assert!((s - bs).abs() < 6e-3 && (u - bu).abs() < 6e-3, "{s0} {u0} {g}: {s} {u} vs {bs} {bu}");
            if s > 0.0 {
                let a = s + 2.0 * g;
                assert!(((s - s0) * a * a - g * u0 * u0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn entropy_prox_solves_optimality() {
        for &(z0, d, a) in &[(1.0, 0.1, 0.0), (0.0, 0.5, 2.0), (-3.0, 0.01, -1.0), (50.0, 2.0, 0.3)] {
            let z = prox_entropy(z0, d, a);
            assert!(z > 0.0);
            let opt = d * (z.ln() + 1.0 + a) + z - z0;
            assert!(opt.abs() < 1e-9 * (1.0 + z0.abs()), "{z0} {d} {a}: {opt}");
        }
    }
}
