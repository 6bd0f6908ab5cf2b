use std::f64::consts::PI;
use std::sync::Arc;

use graphot_core::dynamics::{FluxField, SpaceTimePath};
use graphot_core::gradient_flow::*;
use graphot_core::graph::builders::{description, interval, three_star};
use graphot_core::graph::{EdgeId, MetricGraph};
use graphot_core::grid::{EdgeField, Grid};
use graphot_core::measure::{gibbs, GridMeasure, Interaction};
use graphot_core::piecewise::Quadrature;
use proptest::prelude::*;

/// `cos²` bump of half-width `r` centred at `c` on edge `e`, normalised.
fn bump(grid: &Grid, e: usize, c: f64, r: f64) -> GridMeasure {
    GridMeasure::from_density_fn(grid.clone(), |edge, s| {
        if edge.0 == e && (s - c).abs() < r {
            (PI * (s - c) / (2.0 * r)).cos().powi(2)
        } else {
            0.0
        }
    })
    .unwrap()
    .normalized()
    .unwrap()
}

fn heat_on_star(h: f64, dt: f64) -> (EdeReport, MkvTrajectory) {
    let grid = Grid::new(Arc::new(three_star(1.0)), h).unwrap();
    let v = EdgeField::zero(&grid);
    let traj = mkv_flow(&bump(&grid, 0, 0.5, 0.4), &v, &Interaction::zero(), dt, 0.5).unwrap();
    (energy_dissipation_check(&traj.path, &v, &Interaction::zero()).unwrap(), traj)
}

#[test]
fn gibbs_is_stationary_and_dissipation_free() {
    let grid = Grid::new(Arc::new(interval(1.0)), 0.01).unwrap();
    let v = EdgeField::from_fn(&grid, |_, s| s * s);
    let (mu, _) = gibbs(&grid, &v);
    assert!(dissipation0(&mu, &v).value <= 1e-10);
    let state = MkvState::new(&mu, &v).unwrap();
    let next = mkv_step(&state, &v, &Interaction::zero(), 1e-3).unwrap();
    assert!(next.measure().l1_distance(&mu).unwrap() <= 1e-8);
}

#[test]
fn converges_to_gibbs_on_interval() {
    let grid = Grid::new(Arc::new(interval(1.0)), 0.01).unwrap();
    let v = EdgeField::from_fn(&grid, |_, s| s * s);
    // cell averages of e^{-s²} / Z by quadrature
    let q = Quadrature::new(8);
    let z = q.integrate(0.0, 1.0, |s| (-s * s).exp());
    let target = GridMeasure::from_density_fn(grid.clone(), |_, s| (-s * s).exp() / z).unwrap();
    let start = bump(&grid, 0, 0.7, 0.2);
    let traj = mkv_flow(&start, &v, &Interaction::zero(), 1e-3, 5.0).unwrap();
    assert!(traj.mass_defect <= 1e-10);
    let err = traj.final_measure().l1_distance(&target).unwrap();
    assert!(err <= 1e-3, "{err}");
}

#[test]
fn heat_flow_on_star_becomes_uniform() {
    let grid = Grid::new(Arc::new(three_star(1.0)), 0.01).unwrap();
    let v = EdgeField::zero(&grid);
    let traj = mkv_flow(&bump(&grid, 0, 0.5, 0.2), &v, &Interaction::zero(), 1e-3, 5.0).unwrap();
    let uniform = GridMeasure::lebesgue(&grid).normalized().unwrap();
    assert!(traj.final_measure().l1_distance(&uniform).unwrap() <= 1e-3);
}

#[test]
fn energy_dissipation_balance_vanishes_under_refinement() {
    let (coarse, _) = heat_on_star(0.01, 1e-3);
    let (fine, _) = heat_on_star(0.005, 5e-4);
    assert!(coarse.value.abs() <= 0.05, "{coarse:?}");
    let ratio = fine.value / coarse.value;
    assert!((0.35..=0.65).contains(&ratio), "{} -> {}", coarse.value, fine.value);
}

#[test]
fn chain_rule_holds_along_the_heat_flow() {
    let (_, traj) = heat_on_star(0.01, 1e-3);
    let v = EdgeField::zero(traj.path.grid());
    // ends of the steps finishing at t = 0.1, 0.2, …, 0.5
    let steps: Vec<usize> = (1..=5).map(|k| 100 * k - 1).collect();
    for s in chain_rule_check(&traj.path, &v, &Interaction::zero(), &steps).unwrap() {
        assert!(s.defect() <= 0.05, "{s:?}");
    }
}

#[test]
fn transported_bump_is_not_a_gradient_flow() {
    let grid = Grid::new(Arc::new(interval(1.0)), 0.01).unwrap();
    let k = 40;
    let dt = 1.0 / k as f64;
    let times: Vec<f64> = (0..=k).map(|i| i as f64 * dt).collect();
    let measures: Vec<GridMeasure> = times.iter().map(|t| bump(&grid, 0, 0.3 + 0.4 * t, 0.2)).collect();
    let fluxes = measures
        .windows(2)
        .map(|w| {
            // J_k = -Σ_{i<k} (m⁺_i - m_i) / Δt, zero at both ends
            let mut acc = 0.0;
            let mut vals = vec![0.0];
            for (a, b) in w[0].cells().iter().zip(w[1].cells()) {
                acc -= (b - a) / dt;
                vals.push(acc);
            }
            *vals.last_mut().unwrap() = 0.0;
            FluxField::new(grid.clone(), vals).unwrap()
        })
        .collect();
    let path = SpaceTimePath::new(times, measures, fluxes).unwrap();
    let v = EdgeField::zero(&grid);
    let r = energy_dissipation_check(&path, &v, &Interaction::zero()).unwrap();
    assert!(r.value >= 0.1, "{r:?}");
}

#[test]
fn jko_tracks_the_heat_equation() {
    let grid = Grid::new(Arc::new(interval(1.0)), 0.01).unwrap();
    let v = EdgeField::zero(&grid);
    let mu = bump(&grid, 0, 0.4, 0.3);
    let flow = jko_flow(&mu, 0.01, 10, &v, &Interaction::zero(), &JkoOptions::default()).unwrap();
    assert!(flow.is_monotone(), "{:?}", flow.free_energies);
    let pde = mkv_flow(&mu, &v, &Interaction::zero(), 1e-3, 0.1).unwrap();
    let err = flow.at(0.1).l1_distance(pde.final_measure()).unwrap();
    assert!(err <= 0.05, "{err}");
}

#[test]
fn single_jko_step_matches_implicit_euler() {
    // smooth, strictly positive data; C fixed from one calibration run
    const C: f64 = 1.0;
    let h = 0.01;
    let grid = Grid::new(Arc::new(interval(1.0)), h).unwrap();
    let v = EdgeField::zero(&grid);
    let mu = GridMeasure::from_density_fn(grid.clone(), |_, s| 1.0 + 0.8 * (PI * s).cos()).unwrap().normalized().unwrap();
    let mut options = JkoOptions::default();
    options.solver.action_tol = 1e-10;
    options.solver.feasibility_tol = 1e-8;
    for tau in [0.01, 0.005, 0.0025] {
        let jko = jko_step(&mu, tau, &v, &Interaction::zero(), &options).unwrap();
        let pde = mkv_step(&MkvState::new(&mu, &v).unwrap(), &v, &Interaction::zero(), tau).unwrap();
        let err = jko.measure.l1_distance(pde.measure()).unwrap();
        assert!(err <= C * tau * tau / h, "tau {tau}: {err}");
    }
}

#[test]
fn dissipation_of_uniform_measure() {
    let grid = Grid::new(Arc::new(three_star(1.0)), 0.01).unwrap();
    // continuous at the centre vertex (s = 1 on e1, e2 and s = 0 on f)
    let vf = |e: EdgeId, s: f64| if e.0 == 2 { 0.5 * s * s } else { (1.0 - s).powi(2) };
    let v = EdgeField::from_fn(&grid, vf);
    let mu = GridMeasure::lebesgue(&grid).normalized().unwrap();
    // ∫ |∇V|² dμ with μ = λ/3: (4/3 + 4/3 + 1/3) / 3
    let exact = 1.0;
    let r = dissipation0(&mu, &v);
    assert!((r.value - exact).abs() <= 0.01 * exact, "{}", r.value);
}

#[test]
fn linfty_bound_on_ten_instances() {
    let graphs: Vec<MetricGraph> = vec![
        interval(1.0),
        three_star(1.0),
        MetricGraph::from_description(&description(&["a", "b", "c"], &[("p", "a", "b", 0.7), ("q", "b", "c", 1.6)])).unwrap(),
    ];
    let mut count = 0;
    for (gi, g) in graphs.into_iter().enumerate() {
        let grid = Grid::new(Arc::new(g), 0.01).unwrap();
        for (k, r) in [0.15f64, 0.25, 0.35, 0.45].into_iter().enumerate() {
            if count == 10 {
                break;
            }
            let len = grid.graph().edge(EdgeId(0)).length;
            let mu = bump(&grid, 0, 0.5 * len, r.min(0.45 * len));
            let v = EdgeField::from_fn(&grid, |e, s| 0.3 * (k as f64) * ((e.0 + gi) as f64 + s).sin());
            let report = linfty_bound_check(&mu, &v).unwrap();
            assert_eq!(report.holds(), Some(true), "{report:?}");
            count += 1;
        }
    }
    assert_eq!(count, 10);
}

#[test]
fn sharpening_bumps_stay_below_the_bound() {
    let grid = Grid::new(Arc::new(interval(1.0)), 0.002).unwrap();
    let v = EdgeField::zero(&grid);
    let mut last = 0.0;
    for r in [0.4, 0.2, 0.1, 0.05] {
        let report = linfty_bound_check(&bump(&grid, 0, 0.5, r), &v).unwrap();
        assert!(report.max_rho > last && report.ratio <= report.bound, "{report:?}");
        last = report.max_rho;
    }
}

#[test]
fn dissipation_is_lower_semicontinuous_on_sequences() {
    let grid = Grid::new(Arc::new(three_star(1.0)), 0.01).unwrap();
    let v = EdgeField::from_fn(&grid, |e, s| if e.0 == 2 { s } else { 1.0 - s });
    let limit = GridMeasure::from_density_fn(grid.clone(), |_, s| 1.0 + 0.5 * (PI * s).sin()).unwrap().normalized().unwrap();
    let i_limit = dissipation0(&limit, &v).value;
    // oscillating perturbations converge weakly to the limit
    let oscillating: Vec<f64> = (1..=6)
        .map(|n| {
            let mu = GridMeasure::from_density_fn(grid.clone(), |_, s| {
                (1.0 + 0.5 * (PI * s).sin()) * (1.0 + 0.3 * (2.0 * PI * n as f64 * s).cos())
            })
            .unwrap()
            .normalized()
            .unwrap();
            dissipation0(&mu, &v).value
        })
        .collect();
    let liminf = oscillating[3..].iter().copied().fold(f64::INFINITY, f64::min);
    assert!(i_limit <= liminf + 0.01);
    // mixtures converging strongly
    let other = GridMeasure::lebesgue(&grid).normalized().unwrap();
    let mixtures: Vec<f64> = [0.5, 0.1, 0.01, 0.001]
        .iter()
        .map(|&t| {
            let cells = limit.cells().iter().zip(other.cells()).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            dissipation0(&GridMeasure::from_cells(grid.clone(), cells).unwrap(), &v).value
        })
        .collect();
    assert!(i_limit <= mixtures.last().unwrap() + 0.01);
}

#[test]
fn slope_probe_is_reported() {
    let grid = Grid::new(Arc::new(interval(1.0)), 0.02).unwrap();
    for v in [EdgeField::zero(&grid), EdgeField::from_fn(&grid, |_, s| 2.0 * s)] {
        let mu = bump(&grid, 0, 0.5, 0.3);
        let est = slope_estimate(&mu, &v, &Interaction::zero(), &[1e-3, 3e-4], &JkoOptions::default()).unwrap();
        println!("slope {:.4} sqrt(I) {:.4} ratio {:.4}", est.slope, est.sqrt_dissipation, est.ratio());
        assert!(est.slope.is_finite() && est.sqrt_dissipation > 0.0);
    }
}

fn arb_tree() -> impl Strategy<Value = MetricGraph> {
    proptest::collection::vec((0usize..10, 0.5f64..1.5), 1..=4).prop_map(|edges| {
        let n = edges.len() + 1;
        let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let list: Vec<(String, String, String, f64)> = edges
            .iter()
            .enumerate()
            .map(|(k, &(p, len))| (format!("e{k}"), names[p % (k + 1)].clone(), names[k + 1].clone(), len))
            .collect();
        let v: Vec<&str> = names.iter().map(String::as_str).collect();
        let e: Vec<(&str, &str, &str, f64)> = list.iter().map(|(i, a, b, l)| (i.as_str(), a.as_str(), b.as_str(), *l)).collect();
        MetricGraph::from_description(&description(&v, &e)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn mkv_steps_keep_positivity_and_mass(
        g in arb_tree(),
        a in -2.0f64..2.0,
        strength in 0.0f64..2.0,
        dt in 1e-4f64..0.1,
    ) {
        let grid = Grid::new(Arc::new(g), 0.05).unwrap();
        let v = EdgeField::from_fn(&grid, |e, s| a * (s + e.0 as f64).sin());
        let w = Interaction::from_distance(&grid, |d| strength * d * d);
        let len = grid.graph().edge(EdgeId(0)).length;
        let mut state = MkvState::new(&bump(&grid, 0, 0.5 * len, 0.2 * len), &v).unwrap();
        for _ in 0..5 {
            state = mkv_step(&state, &v, &w, dt).unwrap();
            prop_assert!(state.measure().cells().iter().all(|&m| m >= 0.0));
            prop_assert!((state.measure().total_mass() - 1.0).abs() <= 1e-10);
            for x in grid.graph().vertex_ids() {
                prop_assert!(state.flux().vertex_balance(x).abs() <= 1e-10);
            }
        }
    }
}
