//! Entropy along the geodesic between two step densities on the 3-star.
//!
//! `μ` spreads mass 1/2 uniformly over `[0, ε]` of each of `e1` and `e2`
//! (coordinate 0 at the leaves), `ν` puts mass 1 uniformly on `[1-ε, 1]` of
//! `f` (coordinate 0 at the centre).

use std::sync::Arc;
use std::time::Instant;

use graphot_core::graph::builders::three_star;
use graphot_core::graph::{EdgeId, GraphPoint};
use graphot_core::grid::Grid;
use graphot_core::measure::{GridMeasure, MeasureSpec};
use graphot_core::transport::{displacement_interpolation, wasserstein, SupportCloud, TransportPlan};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::OutDir;
use crate::report::{Basis, Relation, RunReport};
use crate::svg::{Chart, Series};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example41Config {
    pub eps: f64,
    pub h: f64,
    /// number of sub-intervals of the `t` grid
    pub t_samples: usize,
    pub plateau_tol: f64,
    pub kink_tol: f64,
    pub affine_tol: f64,
    pub gap_tol: f64,
    /// the static distance may deviate by `w2_tol_cells · h`
    pub w2_tol_cells: f64,
    pub split_tol_cells: f64,
    pub witness_kappa: f64,
    pub witness_delta: f64,
    pub runtime_budget_s: f64,
}

impl Default for Example41Config {
    fn default() -> Self {
        Self {
            eps: 0.1,
            h: 1e-3,
            t_samples: 2000,
            plateau_tol: 1e-6,
            kink_tol: 1e-3,
            affine_tol: 1e-3,
            gap_tol: 1e-8,
            w2_tol_cells: 2.0,
            split_tol_cells: 2.0,
            witness_kappa: 1e3,
            witness_delta: 0.05,
            runtime_budget_s: 30.0,
        }
    }
}

/// The entropy profile in closed form.
pub fn entropy_formula(eps: f64, t: f64) -> f64 {
    let (t0, t1) = kinks(eps);
    if t <= t0 {
        (1.0 / (2.0 * eps)).ln()
    } else if t >= t1 {
        (1.0 / eps).ln()
    } else {
        (1.0 - (2.0 - eps) * t) / eps * 0.5f64.ln() + (1.0 / eps).ln()
    }
}

pub fn kinks(eps: f64) -> (f64, f64) {
    ((1.0 - eps) / (2.0 - eps), 1.0 / (2.0 - eps))
}

/// Grid and the two endpoint measures; `ε` and `1-ε` must be interfaces.
pub fn setup(eps: f64, h: f64) -> Result<(Grid, GridMeasure, GridMeasure)> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(CliError::ConfigInvalid(format!("eps = {eps} must lie in (0, 1/2)")));
    }
    let grid = Grid::new(Arc::new(three_star(1.0)), h)?;
    let f = grid.graph().edge_by_name("f")?;
    for e in grid.graph().edge_ids() {
        if !grid.is_aligned(e, eps, 1e-9) {
            return Err(CliError::GridMisaligned { h, what: "eps", value: eps });
        }
    }
    if !grid.is_aligned(f, 1.0 - eps, 1e-9) {
        return Err(CliError::GridMisaligned { h, what: "1 - eps", value: 1.0 - eps });
    }
    let mu = format!(
        r#"{{"edges": {{"e1": [{{"interval": [0, {eps}], "density": {d}}}], "e2": [{{"interval": [0, {eps}], "density": {d}}}]}}}}"#,
        d = 0.5 / eps
    );
    let nu = format!(r#"{{"edges": {{"f": [{{"interval": [{a}, 1], "density": {d}}}]}}}}"#, a = 1.0 - eps, d = 1.0 / eps);
    let mu = MeasureSpec::from_json(&mu)?.discretize(&grid)?;
    let nu = MeasureSpec::from_json(&nu)?.discretize(&grid)?;
    Ok((grid, mu, nu))
}

/// Pairs of plan entries between the same two edges whose order is reversed.
pub fn monotonicity_violations(plan: &TransportPlan, xs: &[GraphPoint], ys: &[GraphPoint]) -> usize {
    let mut groups: std::collections::BTreeMap<(usize, usize), Vec<(f64, f64)>> = Default::default();
    for &(i, j, m) in plan.entries() {
        if m > 0.0 {
            groups.entry((xs[i].edge.0, ys[j].edge.0)).or_default().push((xs[i].s, ys[j].s));
        }
    }
    let mut bad = 0;
    for pairs in groups.values_mut() {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        // either orientation is monotone; count the smaller set of inversions
        let (mut up, mut down) = (0, 0);
        for w in pairs.windows(2) {
            if w[1].0 > w[0].0 {
                if w[1].1 < w[0].1 {
                    up += 1;
                }
                if w[1].1 > w[0].1 {
                    down += 1;
                }
            }
        }
        bad += up.min(down);
    }
    bad
}

/// `sup_s |N_e(s) - N(s)/2|` over the target edge, where `N_e` is the
/// cumulative target mass coming from source edge `e`.
pub fn split_defect(plan: &TransportPlan, xs: &[GraphPoint], ys: &[GraphPoint], from: EdgeId) -> f64 {
    let mut by_target = vec![(0.0, 0.0); ys.len()];
    for &(i, j, m) in plan.entries() {
        by_target[j].1 += m;
        if xs[i].edge == from {
            by_target[j].0 += m;
        }
    }
    let mut order: Vec<usize> = (0..ys.len()).collect();
    order.sort_by(|&a, &b| ys[a].edge.0.cmp(&ys[b].edge.0).then(ys[a].s.total_cmp(&ys[b].s)));
    let (mut part, mut all, mut worst) = (0.0f64, 0.0f64, 0.0f64);
    for j in order {
        part += by_target[j].0;
        all += by_target[j].1;
        worst = worst.max((part - 0.5 * all).abs());
    }
    worst
}

/// Static checks of the optimal plan: distance, duality gap, edgewise
/// monotonicity and the even split of `ν` between the two source edges.
pub fn check_static(report: &mut RunReport, eps: f64, h: f64, gap_tol: f64, w2_cells: f64, split_cells: f64) -> Result<(SupportCloud, SupportCloud, TransportPlan)> {
    let (grid, mu, nu) = setup(eps, h)?;
    let a = SupportCloud::from_measure(&mu)?;
    let b = SupportCloud::from_measure(&nu)?;
    let w = wasserstein(grid.graph(), &a, &b, 2)?;
    report.check("c2.w2", "static W2 equals 2 - eps", w.value, 2.0 - eps, w2_cells * h, Relation::Within, Basis::ClosedForm);
    report.check(
        "c2.duality-gap",
        "primal minus dual objective",
        w.gap.abs(),
        0.0,
        gap_tol * (1.0 + w.cost),
        Relation::AtMost,
        Basis::Invariant,
    );
    report.check(
        "c2.monotone",
        "order inversions within each pair of edges",
        monotonicity_violations(&w.plan, a.points(), b.points()) as f64,
        0.0,
        0.0,
        Relation::Within,
        Basis::ClosedForm,
    );
    let e1 = grid.graph().edge_by_name("e1")?;
    report.check(
        "c2.halves",
        "nu receives half of its mass from e1 (cdf sup distance)",
        split_defect(&w.plan, a.points(), b.points(), e1),
        0.0,
        split_cells * h,
        Relation::AtMost,
        Basis::ClosedForm,
    );
    report.note("w2", w.value);
    report.note("duality_gap", w.gap);
    Ok((a, b, w.plan))
}

/// Least-squares line through `pts`.
fn fit_line(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

pub fn run_example_4_1(cfg: &Example41Config, out: &OutDir) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new("example-4-1", cfg);
    let eps = cfg.eps;
    let (grid, _, _) = setup(eps, cfg.h)?;
    let (a, b, plan) = check_static(&mut report, eps, cfg.h, cfg.gap_tol, cfg.w2_tol_cells, cfg.split_tol_cells)?;

    let ent = |t: f64| -> Result<f64> { Ok(displacement_interpolation(&grid, &a, &b, &plan, t)?.entropy()) };
    let n = cfg.t_samples.max(2);
    let mut samples = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as f64 / n as f64;
        samples.push((t, ent(t)?));
    }
    let (p0, p1) = ((1.0 / (2.0 * eps)).ln(), (1.0 / eps).ln());
    let (t0, t1) = kinks(eps);

    let plateau_dev = |lo: f64, hi: f64, p: f64| {
        samples.iter().filter(|s| s.0 >= lo && s.0 <= hi).map(|s| (s.1 - p).abs()).fold(0.0, f64::max)
    };
    report.check("c1.ent-start", "Ent(mu_0) = log(1/(2 eps))", samples[0].1, p0, cfg.plateau_tol, Relation::Within, Basis::ClosedForm);
    report.check("c1.ent-end", "Ent(mu_1) = log(1/eps)", samples[n].1, p1, cfg.plateau_tol, Relation::Within, Basis::ClosedForm);
    report.check("c1.plateau-start", "max |Ent - log(1/(2 eps))| on [0, t0]", plateau_dev(0.0, t0, p0), 0.0, cfg.plateau_tol, Relation::AtMost, Basis::ClosedForm);
    report.check("c1.plateau-end", "max |Ent - log(1/eps)| on [t1, 1]", plateau_dev(t1, 1.0, p1), 0.0, cfg.plateau_tol, Relation::AtMost, Basis::ClosedForm);
    report.check("c1.log2", "Ent(mu_1) - Ent(mu_0) = log 2", samples[n].1 - samples[0].1, 2f64.ln(), cfg.plateau_tol, Relation::Within, Basis::Trivial);

    // kinks located from the data alone: fit the samples strictly between the
    // two plateau levels and intersect with them
    let sep = 1e-9;
    let middle: Vec<(f64, f64)> = samples.iter().copied().filter(|s| s.1 > p0 + sep && s.1 < p1 - sep).collect();
    let (t0_hat, t1_hat) = match fit_line(&middle) {
        Some((c, m)) if m != 0.0 => ((p0 - c) / m, (p1 - c) / m),
        _ => (f64::NAN, f64::NAN),
    };
    report.check("c1.kink-t0", "first kink abscissa", t0_hat, t0, cfg.kink_tol, Relation::Within, Basis::ClosedForm);
    report.check("c1.kink-t1", "second kink abscissa", t1_hat, t1, cfg.kink_tol, Relation::Within, Basis::ClosedForm);
    let affine = middle.iter().map(|&(t, e)| (e - entropy_formula(eps, t)).abs()).fold(if middle.is_empty() { f64::NAN } else { 0.0 }, f64::max);
    report.check("c1.affine", "max deviation of the middle segment from the closed form", affine, 0.0, cfg.affine_tol, Relation::AtMost, Basis::ClosedForm);
    let profile = samples.iter().map(|&(t, e)| (e - entropy_formula(eps, t)).abs()).fold(0.0, f64::max);
    report.note("profile_max_deviation", profile);
    report.note("middle_samples", middle.len());

    // concave kink at t1: the chord-midpoint defect outgrows κ δ²/8 as δ → 0
    let mut witness = Vec::new();
    let mut delta = cfg.witness_delta;
    while delta >= 4.0 * cfg.h {
        let defect = ent(t1)? - 0.5 * (ent((t1 - delta).max(0.0))? + ent((t1 + delta).min(1.0))?);
        witness.push((delta, defect, defect / (delta * delta / 8.0)));
        delta *= 0.5;
    }
    let best = witness.iter().map(|w| w.2).fold(f64::NEG_INFINITY, f64::max);
    report.check(
        "c1.nonconvex",
        "largest chord defect at t1 over delta^2/8 exceeds kappa",
        best,
        cfg.witness_kappa,
        0.0,
        Relation::AtLeast,
        Basis::ClosedForm,
    );
    let growing = witness.windows(2).all(|w| w[1].2 > w[0].2);
    report.check("c1.nonconvex-growth", "defect ratio grows as delta shrinks", growing as u8 as f64, 1.0, 0.0, Relation::Within, Basis::ClosedForm);
    report.note("witness", &witness);
    report.note("kinks_estimated", (t0_hat, t1_hat));

    let mut csv = String::from("t,entropy,closed_form\n");
    for &(t, e) in &samples {
        csv.push_str(&format!("{t},{e},{}\n", entropy_formula(eps, t)));
    }
    report.output(out.write("entropy.csv", &csv)?);
    let chart = Chart {
        title: format!("Entropy along the geodesic, eps = {eps}"),
        x_label: "t".into(),
        y_label: "Ent(mu_t)".into(),
        series: vec![
            Series { label: "computed".into(), points: samples.clone(), color: "#1f77b4", dashed: false },
            Series {
                label: "closed form".into(),
                points: samples.iter().map(|&(t, _)| (t, entropy_formula(eps, t))).collect(),
                color: "#d62728",
                dashed: true,
            },
        ],
        markers: vec![(t0, "t0".into()), (t1, "t1".into())],
    };
    report.output(out.write("entropy.svg", &chart.render())?);
    report.output(out.write("plan.csv", &plan.to_csv(grid.graph(), &a, &b))?);

    let elapsed = start.elapsed().as_secs_f64();
    report.check("c1.runtime", "wall time in seconds", elapsed, cfg.runtime_budget_s, 0.0, Relation::AtMost, Basis::Budget);
    report.wall_time_s = elapsed;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let (t0, t1) = kinks(0.1);
        assert!((t0 - 0.473684).abs() < 1e-6 && (t1 - 0.526316).abs() < 1e-6);
        assert!((entropy_formula(0.1, 0.0) - 5f64.ln()).abs() < 1e-12);
        assert!((entropy_formula(0.1, 1.0) - 10f64.ln()).abs() < 1e-12);
        // continuous at both kinks
        for eps in [0.05, 0.1, 0.25] {
            let (t0, t1) = kinks(eps);
            for t in [t0, t1] {
                assert!((entropy_formula(eps, t - 1e-12) - entropy_formula(eps, t + 1e-12)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn misaligned_grid_is_rejected() {
        assert!(matches!(setup(0.1, 0.03), Err(CliError::GridMisaligned { .. })));
        assert!(matches!(setup(0.6, 0.01), Err(CliError::ConfigInvalid(_))));
    }

    #[test]
    fn coarse_run_passes() {
        let cfg = Example41Config { h: 0.01, t_samples: 400, ..Default::default() };
        let r = run_example_4_1(&cfg, &OutDir::none()).unwrap();
        assert!(r.passed(), "{}", r.summary());
    }

    #[test]
    fn line_fit() {
        let (c, m) = fit_line(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]).unwrap();
        assert!((c - 1.0).abs() < 1e-12 && (m - 2.0).abs() < 1e-12);
        assert!(fit_line(&[(0.0, 1.0)]).is_none());
    }
}
