use approx::assert_abs_diff_eq;
use feeder_dnr::encode::{assemble_dnr, DnrOptions};
use feeder_dnr::oracle::omega1_for;
use feeder_dnr::profiles::Profiles;
use feeder_dnr::sim::{
    check_solution, evaluate_period, evaluate_scenarios, local_regulator_output, simulate_instance, Mismatch,
    SimOptions, TieKind,
};
use feeder_dnr::synth::{eight_bus, eight_bus_scenarios, two_bus, FeederBuilder, Q_RATIO};
use feeder_dnr::wattvar::{reactive_power, Curve};
use feeder_dnr::{extract_omega, BusSample, Feeder, Omega1, Omega2, Period, ScenarioInstance, ScenarioSet};
use feeder_mip::{branch_and_bound, BnbOptions};
use proptest::prelude::*;

fn default_omega1(feeder: &Feeder, y: &[bool]) -> Omega1 {
    let mut omega1 = omega1_for(feeder, y);
    for e in feeder.remote_regulators() {
        omega1.taps.insert(e.id, 0);
    }
    for bus in feeder.der_buses() {
        omega1.curves.insert(bus.id, Curve::least_absorbing(&bus.der.unwrap()));
    }
    omega1
}

fn solved_eight_bus() -> (Feeder, ScenarioSet, Omega1, Vec<Omega2>, f64, f64) {
    let feeder = eight_bus().unwrap();
    let scenarios = eight_bus_scenarios();
    let dnr = assemble_dnr(&feeder, &scenarios, &DnrOptions::default()).unwrap();
    let sol = branch_and_bound(&dnr.model, &BnbOptions::default()).unwrap();
    let (omega1, omega2) = extract_omega(&dnr, sol.values.as_ref().unwrap(), 1e-6).unwrap();
    (feeder, scenarios, omega1, omega2, sol.objective.unwrap(), dnr.epigraph_bound())
}

#[test]
fn two_bus_matches_the_hand_solution() {
    let feeder = two_bus(1.0, 0.0, 0.01, 0.0).unwrap();
    let s = simulate_instance(&feeder, &Omega1::default(), &ScenarioInstance::nominal(0), &SimOptions::default()).unwrap();
    assert!(s.converged);
    assert_abs_diff_eq!(s.flow_p[0], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(s.v[1], 0.99, epsilon = 1e-12);
    assert_abs_diff_eq!(s.loss(&feeder), 0.01, epsilon = 1e-12);
}

#[test]
fn unloaded_feeder_carries_only_regulator_ratios() {
    let mut b = FeederBuilder::new("bare", 1.0);
    let v = (0.5, 1.5);
    let (n1, n2, n3) = (b.passive("1", v), b.passive("2", v), b.passive("3", v));
    let remote = b.remote_regulator(0, n1);
    b.line(n1, n2, 0.02, 0.02);
    b.local_regulator(n2, n3, (0.992, 1.008));
    let feeder = b.build().unwrap();
    let mut omega1 = Omega1::default();
    omega1.taps.insert(remote, 4);
    let s = simulate_instance(&feeder, &omega1, &ScenarioInstance::nominal(0), &SimOptions::default()).unwrap();
    assert_abs_diff_eq!(s.v[n1], 1.025, epsilon = 1e-12);
    assert_abs_diff_eq!(s.v[n2], 1.025, epsilon = 1e-12);
    assert_abs_diff_eq!(s.v[n3], 1.0, epsilon = 1e-12);
    assert!(s.flow_p.iter().chain(&s.flow_q).all(|f| f.abs() < 1e-15));
    assert_eq!(s.loss(&feeder), 0.0);
}

#[test]
fn local_regulator_rule() {
    let band = (0.992, 1.008);
    assert_eq!(local_regulator_output(0.95, band).0, 2);
    assert_abs_diff_eq!(local_regulator_output(0.95, band).1, 1.0, epsilon = 1e-15);
    assert_eq!(local_regulator_output(0.85, band).0, 1);
    assert_abs_diff_eq!(local_regulator_output(0.85, band).1, 0.935, epsilon = 1e-15);
    assert_eq!(local_regulator_output(1.15, band).0, 3);
    assert_abs_diff_eq!(local_regulator_output(1.15, band).1, 1.035, epsilon = 1e-15);
}

#[test]
fn fixed_point_does_not_depend_on_the_start() {
    let feeder = eight_bus().unwrap();
    let omega1 = default_omega1(&feeder, &[true, false, false]);
    for instance in &eight_bus_scenarios().instances {
        let base = simulate_instance(&feeder, &omega1, instance, &SimOptions::default()).unwrap();
        assert!(base.converged && base.residual < 1e-9);
        for v_init in [0.9, 1.1] {
            let opts = SimOptions {
                v_init: Some(v_init),
                ..SimOptions::default()
            };
            let other = simulate_instance(&feeder, &omega1, instance, &opts).unwrap();
            for (a, b) in base.v.iter().zip(&other.v) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
    }
}

fn der_feeder(p_max: f64) -> Feeder {
    let mut b = FeederBuilder::new("der", 1.0);
    let n1 = b.der("1", p_max, Q_RATIO * p_max, (0.5, 1.5));
    b.line(0, n1, 0.01, 0.01);
    b.build().unwrap()
}

fn der_state(p_max: f64, curve: Curve, p: f64) -> (f64, u8) {
    let feeder = der_feeder(p_max);
    let mut omega1 = Omega1::default();
    omega1.curves.insert(1, curve);
    let instance = ScenarioInstance::nominal(0).with(
        1,
        BusSample {
            p_avail: p,
            ..BusSample::default()
        },
    );
    let s = simulate_instance(&feeder, &omega1, &instance, &SimOptions::default()).unwrap();
    assert_abs_diff_eq!(s.p[1], p, epsilon = 1e-15);
    (s.q[1], s.der_segment[&1])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn der_follows_its_curve(p1f in 0.4f64..0.8, width in 0.1f64..0.6, pf in 0.0f64..1.0, p_max in 0.2f64..3.0) {
        let p1 = p1f * p_max;
        let p2 = (p1 + width * p_max).min(p_max);
        prop_assume!(p2 - p1 >= 0.1 * p_max);
        let q_max = Q_RATIO * p_max;
        let p = pf * p_max;
        let (q, _) = der_state(p_max, Curve::from_breakpoints(p1, p2, q_max), p);
        prop_assert!((q - reactive_power(p, p1, p2, q_max)).abs() <= 1e-12);
    }

    #[test]
    fn der_at_rated_power_absorbs_fully(p1f in 0.4f64..0.8, width in 0.1f64..0.6, p_max in 0.2f64..3.0) {
        let p1 = p1f * p_max;
        let p2 = (p1 + width * p_max).min(p_max);
        prop_assume!(p2 - p1 >= 0.1 * p_max);
        let q_max = Q_RATIO * p_max;
        let (q, _) = der_state(p_max, Curve::from_breakpoints(p1, p2, q_max), p_max);
        prop_assert!((q + q_max).abs() <= 1e-12);
    }
}

#[test]
fn lowest_taps_under_heavy_load_undervolt() {
    let feeder = eight_bus().unwrap();
    let mut omega1 = default_omega1(&feeder, &[true, false, false]);
    omega1.taps.insert(0, -16);
    let heavy = ScenarioSet::from_instances(vec![eight_bus_scenarios().instances[1].clone()]);
    let (metrics, states) = evaluate_scenarios(&feeder, &omega1, &heavy, &SimOptions::default()).unwrap();
    assert!(metrics.violation_count > 0);
    assert!(metrics.min_v < 0.9);
    assert!(states[0].v[2] < 0.9);
}

#[test]
fn empty_profiles_lose_nothing() {
    let feeder = eight_bus().unwrap();
    let omega1 = default_omega1(&feeder, &[true, false, false]);
    let mut profiles = Profiles::new(0, 30);
    let zero = BusSample {
        p_load_scale: 0.0,
        q_load_scale: 0.0,
        p_avail: 0.0,
    };
    for bus in feeder.buses.iter().skip(1) {
        profiles.insert(bus.id, vec![zero; 30]);
    }
    let eval = evaluate_period(&feeder, &omega1, &profiles, Period::new(0, 30), &SimOptions::default()).unwrap();
    assert_eq!(eval.minutes.len(), 30);
    assert_eq!(eval.metrics.total_loss, 0.0);
    assert_eq!(eval.metrics.violation_count, 0);
}

#[test]
fn incumbent_loss_sits_within_the_epigraph_bound() {
    let (feeder, scenarios, omega1, _, objective, bound) = solved_eight_bus();
    let (metrics, _) = evaluate_scenarios(&feeder, &omega1, &scenarios, &SimOptions::default()).unwrap();
    let gap = metrics.total_loss - objective;
    assert!(gap >= -1e-9 && gap <= bound, "gap {gap}, bound {bound}");
}

#[test]
fn check_flags_a_perturbed_voltage() {
    let (feeder, scenarios, omega1, mut omega2, _, _) = solved_eight_bus();
    let clean = check_solution(&feeder, &omega1, &omega2, &scenarios, 1e-6, 1e-7).unwrap();
    assert!(clean.passed(), "{:?}", clean.mismatches);
    // Perturb an instance the check compares.
    let tied: Vec<usize> = clean.ties.iter().map(|t| t.t).collect();
    let t = (0..omega2.len()).find(|t| !tied.contains(t)).expect("an untied instance");
    omega2[t].v[5] += 1e-3;
    let report = check_solution(&feeder, &omega1, &omega2, &scenarios, 1e-6, 1e-7).unwrap();
    assert_eq!(report.mismatches.len(), 1);
    assert!(matches!(report.mismatches[0], Mismatch::Voltage { t: tt, bus: 5, .. } if tt == t));
}

#[test]
fn breakpoint_hit_is_a_tie() {
    let (feeder, scenarios, omega1, omega2, _, _) = solved_eight_bus();
    let der = feeder.buses[6].der.unwrap();
    let (p1, _) = omega1.curves[&6].breakpoints(der.q_max).unwrap();
    let mut instance = scenarios.instances[0].clone();
    instance.buses.insert(
        6,
        BusSample {
            p_avail: p1,
            ..BusSample::default()
        },
    );
    let set = ScenarioSet::from_instances(vec![instance]);
    // The solver state belongs to a different instance; only the tie keeps
    // it from being compared.
    let mut state = omega2[0].clone();
    state.v[5] += 1e-3;
    let report = check_solution(&feeder, &omega1, &[state], &set, 1e-6, 1e-7).unwrap();
    assert!(report.passed());
    assert!(report
        .ties
        .iter()
        .any(|t| matches!(t.kind, TieKind::CurveBreakpoint { bus: 6, .. })));
}
