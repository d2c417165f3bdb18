use feeder_dnr::feeder::reduced_incidence;
use feeder_dnr::oracle::{
    enumerate_radial, grid_search_dnr, is_spanning_tree, kirchhoff_count, prop1_feasible, virtual_flow, GridSpec,
};
use feeder_dnr::synth::{random_switched_graph, switched_cycle, triangle, FeederBuilder, Q_RATIO};
use feeder_dnr::{BusSample, Feeder, ScenarioInstance, ScenarioSet};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn path() -> Feeder {
    let mut b = FeederBuilder::new("path", 1.0);
    let v = (0.5, 1.5);
    let (n1, n2) = (b.passive("1", v), b.passive("2", v));
    b.line(0, n1, 0.01, 0.01);
    b.line(n1, n2, 0.01, 0.01);
    b.build().unwrap()
}

#[test]
fn spanning_tree_oracle() {
    assert!(is_spanning_tree(&path(), &[]));
    let t = triangle().unwrap();
    assert!(!is_spanning_tree(&t, &[true, true]));
    assert!(!is_spanning_tree(&t, &[false, false]));
    assert!(is_spanning_tree(&t, &[true, false]));
}

#[test]
fn incidence_of_small_graphs() {
    let a = reduced_incidence(&path());
    assert_eq!(a, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, -1.0]));
    let cycle = switched_cycle(3).unwrap();
    assert_eq!(feeder_dnr::oracle::rank(&reduced_incidence(&cycle)), 3);
}

#[test]
fn virtual_flow_on_trees_and_islands() {
    let t = triangle().unwrap();
    for y in [[true, false], [false, true]] {
        assert!(prop1_feasible(&t, &y));
        let f = virtual_flow(&t, &y).expect("a tree carries a virtual flow");
        // Indexed over the closed edges; unique, and solves A^T f = 1.
        let a = reduced_incidence(&t);
        let closed: Vec<usize> = (0..3).filter(|&e| e == 0 || y[e - 1]).collect();
        let residual: f64 = (0..2)
            .map(|bus| (closed.iter().enumerate().map(|(k, &e)| a[(e, bus)] * f[k]).sum::<f64>() - 1.0).abs())
            .sum();
        assert!(residual < 1e-12);
        let square = DMatrix::from_fn(2, 2, |bus, k| a[(closed[k], bus)]);
        let unique = square.lu().solve(&nalgebra::DVector::from_element(2, 1.0)).unwrap();
        assert_eq!(f.len(), 2);
        assert!((&f - unique).amax() < 1e-12);
    }
    assert!(!prop1_feasible(&t, &[false, false]));
    assert!(virtual_flow(&t, &[false, false]).is_none());
}

#[test]
fn tree_counts() {
    assert_eq!(enumerate_radial(&triangle().unwrap()).unwrap().count(), 2);
    let c4 = switched_cycle(3).unwrap();
    assert_eq!(enumerate_radial(&c4).unwrap().count(), 4);
    assert_eq!(kirchhoff_count(&c4).round(), 4.0);
    let trees = enumerate_radial(&path()).unwrap();
    assert_eq!(trees.assignments, vec![Vec::<bool>::new()]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumeration_matches_the_matrix_tree_theorem(seed in any::<u64>(), nodes in 2usize..7) {
        // Every edge switchable, so radial assignments are all spanning trees.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let feeder = random_switched_graph(&mut rng, nodes, 64).unwrap();
        prop_assume!(feeder.num_switches() == feeder.edges.len());
        let count = enumerate_radial(&feeder).unwrap().count();
        prop_assert_eq!(count as f64, kirchhoff_count(&feeder).round());
    }

    #[test]
    fn rank_test_and_count_characterize_trees(seed in any::<u64>(), nodes in 2usize..10, switches in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let feeder = random_switched_graph(&mut rng, nodes, switches).unwrap();
        let need = feeder.closed_switch_count().unwrap();
        let s = feeder.num_switches();
        for bits in 0..1u32 << s {
            let y: Vec<bool> = (0..s).map(|k| bits >> k & 1 == 1).collect();
            let count_ok = y.iter().filter(|&&c| c).count() == need;
            prop_assert_eq!(is_spanning_tree(&feeder, &y), count_ok && prop1_feasible(&feeder, &y));
        }
    }
}

fn sunny(bus: usize, p: f64) -> ScenarioInstance {
    ScenarioInstance::nominal(0).with(
        bus,
        BusSample {
            p_avail: p,
            ..BusSample::default()
        },
    )
}

#[test]
fn identical_instances_double_the_oracle_objective() {
    let feeder = triangle().unwrap();
    let one = ScenarioSet::from_instances(vec![sunny(2, 0.7)]);
    let mut second = sunny(2, 0.7);
    second.timestamp = 1;
    let two = ScenarioSet::from_instances(vec![sunny(2, 0.7), second]);
    let a = grid_search_dnr(&feeder, &one, GridSpec::default()).unwrap();
    let b = grid_search_dnr(&feeder, &two, GridSpec::default()).unwrap();
    assert!((b.objective - 2.0 * a.objective).abs() <= 1e-12 * b.objective.max(1.0));
    assert_eq!(a.omega1, b.omega1);
}

#[test]
fn only_feasible_topology_is_found() {
    // Feeding bus 2 straight from the substation drops it below 0.9 pu.
    let mut b = FeederBuilder::new("forced", 1.0);
    let v = (0.9, 1.1);
    let n1 = b.load("1", 0.2, 0.1, [1.0, 0.0, 0.0], v);
    let n2 = b.load("2", 0.5, 0.2, [1.0, 0.0, 0.0], v);
    b.line(0, n1, 0.01, 0.01);
    let near = b.switch(n1, n2, 0.01, 0.01);
    let far = b.switch(0, n2, 0.5, 0.5);
    let feeder = b.build().unwrap();
    let set = ScenarioSet::from_instances(vec![ScenarioInstance::nominal(0)]);
    let result = grid_search_dnr(&feeder, &set, GridSpec::default()).unwrap();
    assert!(result.omega1.switches[&near]);
    assert!(!result.omega1.switches[&far]);
    assert_eq!(result.candidates.iter().filter(|c| c.objective.is_some()).count(), 1);
}

#[test]
fn nested_grids_never_get_worse() {
    let mut b = FeederBuilder::new("ders", 1.0);
    let v = (0.9, 1.1);
    let n1 = b.load("1", 0.3, 0.3, [1.0, 0.0, 0.0], v);
    let n2 = b.der("2", 1.0, Q_RATIO, v);
    b.line(0, n1, 0.02, 0.04);
    b.switch(n1, n2, 0.03, 0.03);
    b.switch(0, n2, 0.05, 0.08);
    let feeder = b.build().unwrap();
    let set = ScenarioSet::from_instances(vec![sunny(n2, 0.75), {
        let mut s = sunny(n2, 0.55);
        s.timestamp = 1;
        s
    }]);
    let mut last = f64::INFINITY;
    for steps in [5, 9, 17] {
        let spec = GridSpec {
            beta_steps: steps,
            gamma_steps: steps,
            fixed_tap: None,
        };
        let r = grid_search_dnr(&feeder, &set, spec).unwrap();
        assert!(r.objective <= last + 1e-15, "{steps}: {} after {last}", r.objective);
        last = r.objective;
    }
}
