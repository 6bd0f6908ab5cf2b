use std::sync::Arc;

use graphot_core::dynamics::FluxField;
use graphot_core::graph::builders::description;
use graphot_core::graph::MetricGraph;
use graphot_core::grid::{Grid, NodalFunction};
use graphot_core::measure::GridMeasure;
use graphot_core::regularize::{
    integrate_regularized, kinetic_energy, regularize_function, regularize_measure, regularized_kinetic_energy,
    ExtendedGraph,
};
use proptest::prelude::*;

/// Random tree with up to four edges.
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

#[derive(Debug)]
struct Instance {
    ext: ExtendedGraph,
    mu: GridMeasure,
    j: FluxField,
}

fn arb_instance(atoms: bool) -> impl Strategy<Value = Instance> {
    (arb_tree(), 0.05f64..0.45, any::<u64>()).prop_map(move |(g, frac, seed)| {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let grid = Grid::new(Arc::new(g), 0.05).unwrap();
        let min_len = grid.graph().edge_ids().map(|e| grid.graph().edge(e).length).fold(f64::INFINITY, f64::min);
        let ext = ExtendedGraph::new(&grid, frac * min_len).unwrap();
        let cells: Vec<f64> = (0..grid.cell_count()).map(|_| rng.gen_range(0.2..2.0)).collect();
        let vertex_count = grid.graph().vertex_count();
        let atom_masses: Vec<f64> =
            (0..vertex_count).map(|_| if atoms && rng.gen_bool(0.3) { rng.gen_range(0.0..0.5) } else { 0.0 }).collect();
        let mu = GridMeasure::new(grid.clone(), cells, atom_masses).unwrap().normalized().unwrap();
        let j = FluxField::new(grid.clone(), (0..grid.interface_count()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        Instance { ext, mu, j }
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 20, ..ProptestConfig::default() })]

    #[test]
    fn mass_is_preserved_and_density_bounded(inst in arb_instance(true)) {
        let reg = regularize_measure(&inst.ext, &inst.mu).unwrap();
        prop_assert!((reg.total_mass() - inst.mu.total_mass()).abs() <= 1e-12);
        let bound = 1.0 / (2.0 * inst.ext.eps()) + inst.ext.grid().max_width();
        for d in reg.densities() {
            prop_assert!(d <= bound, "{d} > {bound}");
        }
    }

    #[test]
    fn kinetic_energy_does_not_increase(inst in arb_instance(false)) {
        let before = kinetic_energy(&inst.mu, &inst.j);
        let after = regularized_kinetic_energy(&inst.ext, &inst.mu, &inst.j).unwrap();
        prop_assert!(after <= before + 1e-8, "{after} > {before}");
    }

    #[test]
    fn averaging_is_self_dual(inst in arb_instance(true), a in -3.0f64..3.0, b in 0.0f64..6.0) {
        let ext = &inst.ext;
        let phi = NodalFunction::from_fn(ext.grid(), |p| (a * p.s + b * p.edge.0 as f64).sin() + 0.3 * p.s * p.s);
        let lhs = integrate_regularized(ext, &inst.mu, &phi).unwrap();
        let rhs = regularize_function(ext, &phi).unwrap().integrate(&inst.mu);
        prop_assert!((lhs - rhs).abs() <= 1e-8, "{lhs} vs {rhs}");
    }
}
