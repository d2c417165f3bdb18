mod common;

use approx::assert_abs_diff_eq;
use common::{feasible, fix, one_hot, range};
use feeder_dnr::encode::{assemble_dnr, radiality_model, DnrModel, DnrOptions};
use feeder_dnr::feeder::{DerSpec, Feeder, ZipLoad};
use feeder_dnr::oracle::{is_spanning_tree, prop1_feasible};
use feeder_dnr::sim::{simulate_instance, SimOptions};
use feeder_dnr::synth::{eight_bus, eight_bus_scenarios, triangle, two_bus, FeederBuilder, Q_RATIO};
use feeder_dnr::wattvar::{in_curve_box, recover_breakpoints, reactive_power, Curve};
use feeder_dnr::{extract_omega, BusSample, ScenarioInstance, ScenarioSet};
use feeder_mip::{branch_and_bound, BnbOptions, BoundOverride, MipStatus};
use proptest::prelude::*;

fn nominal() -> ScenarioSet {
    ScenarioSet::from_instances(vec![ScenarioInstance::nominal(0)])
}

fn assemble(feeder: &Feeder, scenarios: &ScenarioSet) -> DnrModel {
    assemble_dnr(feeder, scenarios, &DnrOptions::default()).unwrap()
}

fn solve(dnr: &DnrModel) -> Vec<f64> {
    let sol = branch_and_bound(&dnr.model, &BnbOptions::default()).unwrap();
    assert_eq!(sol.status, MipStatus::Optimal);
    sol.values.unwrap()
}

#[test]
fn two_bus_line_drop_by_hand() {
    // Consumption 1 over r = 0.01, x = 0: P = 1 and v1 = 1 - r P.
    let feeder = two_bus(1.0, 0.0, 0.01, 0.0).unwrap();
    let dnr = assemble(&feeder, &nominal());
    let x = solve(&dnr);
    let o2 = &dnr.layout.omega2[0];
    assert_abs_diff_eq!(x[o2.flow_p[0].0], 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(x[o2.v[1].0], 0.99, epsilon = 1e-9);
    assert_abs_diff_eq!(x[o2.p[1].unwrap().0], -1.0, epsilon = 1e-9);
}

#[test]
fn closed_switch_drops_voltage_like_a_line() {
    let mut b = FeederBuilder::new("switch", 1.0);
    let n1 = b.load("1", 0.5, 0.0, [1.0, 0.0, 0.0], (0.5, 1.5));
    b.switch(0, n1, 0.02, 0.0);
    let feeder = b.build().unwrap();
    let dnr = assemble(&feeder, &nominal());
    let x = solve(&dnr);
    let o2 = &dnr.layout.omega2[0];
    assert_abs_diff_eq!(x[dnr.layout.omega1.y[&0].0], 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(x[o2.flow_p[0].0], 0.5, epsilon = 1e-9);
    assert_abs_diff_eq!(x[o2.v[0].0] - x[o2.v[1].0], 0.01, epsilon = 1e-9);
}

#[test]
fn open_switch_carries_nothing_and_decouples_voltages() {
    // Buses 1 and 2 hang off the substation by lines; the switch between
    // them must stay open, and their voltages differ.
    let mut b = FeederBuilder::new("open", 1.0);
    let n1 = b.load("1", 0.5, 0.1, [1.0, 0.0, 0.0], (0.5, 1.5));
    let n2 = b.load("2", 0.1, 0.0, [1.0, 0.0, 0.0], (0.5, 1.5));
    b.line(0, n1, 0.05, 0.05);
    b.line(0, n2, 0.01, 0.01);
    let s = b.switch(n1, n2, 0.01, 0.01);
    let feeder = b.build().unwrap();
    let dnr = assemble(&feeder, &nominal());
    let o2 = &dnr.layout.omega2[0];
    let open = [fix(dnr.layout.omega1.y[&s], 0.0)];
    for flow in [o2.flow_p[s], o2.flow_q[s]] {
        let (lo, hi) = range(&dnr.model, flow, &open).unwrap();
        assert!(lo.abs() < 1e-12 && hi.abs() < 1e-12, "[{lo}, {hi}]");
    }
    let x = solve(&dnr);
    assert!((x[o2.v[n1].0] - x[o2.v[n2].0]).abs() > 1e-3);
}

#[test]
fn constant_power_load_ignores_voltage() {
    for r in [0.0, 0.01, 0.05] {
        let feeder = two_bus(0.7, 0.2, r, r).unwrap();
        let dnr = assemble(&feeder, &nominal());
        let x = solve(&dnr);
        let o2 = &dnr.layout.omega2[0];
        assert_abs_diff_eq!(x[o2.p[1].unwrap().0], -0.7, epsilon = 1e-9);
        assert_abs_diff_eq!(x[o2.q[1].unwrap().0], -0.2, epsilon = 1e-9);
    }
}

#[test]
fn constant_impedance_load_is_linearized() {
    let mut b = FeederBuilder::new("z", 1.0);
    let n1 = b.load("1", 0.8, 0.0, [0.0, 0.0, 1.0], (0.5, 1.5));
    b.line(0, n1, 0.03, 0.0);
    let feeder = b.build().unwrap();
    let dnr = assemble(&feeder, &nominal());
    let x = solve(&dnr);
    let o2 = &dnr.layout.omega2[0];
    let v = x[o2.v[1].0];
    assert!(v < 1.0);
    assert_abs_diff_eq!(x[o2.p[1].unwrap().0], -0.8 * (2.0 * v - 1.0), epsilon = 1e-9);
}

proptest! {
    #[test]
    fn zip_at_nominal_voltage_is_the_spot_load(a in prop::array::uniform3(-1.0f64..0.0), b in prop::array::uniform3(-1.0f64..0.0)) {
        let z = ZipLoad::from_quadratic(a, b);
        let l = z.limits(1.0);
        prop_assert!((l[0] - a.iter().sum::<f64>()).abs() < 1e-12);
        prop_assert!((l[2] - b.iter().sum::<f64>()).abs() < 1e-12);
    }
}

/// Substation, a line and one DER bus.
fn der_feeder(p_max: f64) -> Feeder {
    let mut b = FeederBuilder::new("der", 1.0);
    let n1 = b.der("1", p_max, Q_RATIO * p_max, (0.5, 1.5));
    b.line(0, n1, 0.01, 0.01);
    b.build().unwrap()
}

/// Every reactive output the encoded rows allow for curve `(beta, gamma)` at
/// available power `p`, one range per admissible segment.
fn wattvar_outputs(feeder: &Feeder, beta: f64, gamma: f64, p: f64) -> Vec<(u8, (f64, f64))> {
    let instance = ScenarioInstance::nominal(0).with(
        1,
        BusSample {
            p_avail: p,
            ..BusSample::default()
        },
    );
    let dnr = assemble(feeder, &ScenarioSet::from_instances(vec![instance]));
    let o1 = &dnr.layout.omega1;
    let o2 = &dnr.layout.omega2[0];
    one_hot(o2.der_delta[&1])
        .filter_map(|(k, mut fixes)| {
            fixes.push(fix(o1.beta[&1], beta));
            fixes.push(fix(o1.gamma[&1], gamma));
            range(&dnr.model, o2.q[1].unwrap(), &fixes).map(|r| (k, r))
        })
        .collect()
}

#[test]
fn wattvar_segments() {
    let feeder = der_feeder(1.0);
    let q_max = Q_RATIO;
    // p1 = 0.6, p2 = 1.0: the midpoint of the ramp absorbs half of q_max.
    let (beta, gamma) = (-2.5 * q_max, 1.5 * q_max);
    assert_eq!(recover_breakpoints(beta, gamma, q_max).unwrap(), (0.6, 1.0));
    for (p, want) in [(0.3, 0.0), (0.8, -0.5 * q_max), (1.0, -q_max)] {
        for (_, (lo, hi)) in wattvar_outputs(&feeder, beta, gamma, p) {
            assert_abs_diff_eq!(lo, want, epsilon = 1e-9);
            assert_abs_diff_eq!(hi, want, epsilon = 1e-9);
        }
    }
    // Saturated at rated power under the steepest admissible curve.
    let steep = Curve::from_breakpoints(0.4, 0.5, q_max);
    let out = wattvar_outputs(&feeder, steep.beta, steep.gamma, 0.9);
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].0, 3);
    assert_abs_diff_eq!(out[0].1 .0, -q_max, epsilon = 1e-9);
}

#[test]
fn curve_outside_the_box_is_rejected() {
    // p1 = 0.6, p2 = 1.1 exceeds the rating.
    let feeder = der_feeder(1.0);
    let (beta, gamma) = (-2.0 * Q_RATIO, 1.2 * Q_RATIO);
    assert!(!in_curve_box(beta, gamma, &DerSpec { p_max: 1.0, q_max: Q_RATIO }, 1e-12));
    assert!(wattvar_outputs(&feeder, beta, gamma, 0.7).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wattvar_matches_the_rule(
        p1f in 0.4f64..0.8,
        width in 0.1f64..0.6,
        pf in 0.0f64..1.0,
        p_max in 0.5f64..2.0,
    ) {
        let p1 = p1f * p_max;
        let p2 = (p1 + width * p_max).min(p_max);
        prop_assume!(p2 - p1 >= 0.1 * p_max);
        let p = pf * p_max;
        prop_assume!((p - p1).abs() > 1e-7 && (p - p2).abs() > 1e-7);
        let q_max = Q_RATIO * p_max;
        let c = Curve::from_breakpoints(p1, p2, q_max);
        let want = reactive_power(p, p1, p2, q_max);
        let out = wattvar_outputs(&der_feeder(p_max), c.beta, c.gamma, p);
        prop_assert!(!out.is_empty());
        for (_, (lo, hi)) in out {
            prop_assert!((lo - want).abs() <= 1e-9 && (hi - want).abs() <= 1e-9, "{lo} {hi} vs {want}");
        }
    }

    #[test]
    fn ramp_width_is_q_max_over_slope(p1f in 0.4f64..0.8, width in 0.1f64..0.6, q_max in 0.1f64..1.0) {
        let (p1, p2) = (p1f, p1f + width);
        let c = Curve::from_breakpoints(p1, p2, q_max);
        let (r1, r2) = recover_breakpoints(c.beta, c.gamma, q_max).unwrap();
        prop_assert!((r2 - r1 - q_max / -c.beta).abs() < 1e-12);
        prop_assert!((r1 - p1).abs() < 1e-12 && (r2 - p2).abs() < 1e-12);
    }
}

#[test]
fn breakpoint_recovery_examples() {
    let (p_max, q_max) = (1.5, 0.66);
    let beta = -q_max / (0.2 * p_max);
    let gamma = -beta * 0.6 * p_max;
    let (p1, p2) = recover_breakpoints(beta, gamma, q_max).unwrap();
    assert_abs_diff_eq!(p1, 0.6 * p_max, epsilon = 1e-12);
    assert_abs_diff_eq!(p2, 0.8 * p_max, epsilon = 1e-12);
    // The lower intercept limit is the deadband's lower limit.
    let beta = -3.0 * q_max / p_max;
    let (p1, _) = recover_breakpoints(beta, -0.4 * p_max * beta, q_max).unwrap();
    assert_abs_diff_eq!(p1, 0.4 * p_max, epsilon = 1e-12);
}

fn radiality_feasible(feeder: &Feeder, y: &[bool]) -> bool {
    let (model, layout) = radiality_model(feeder).unwrap();
    let fixes: Vec<BoundOverride> = feeder
        .switches()
        .zip(y)
        .map(|(e, &on)| fix(layout.omega1.y[&e.id], f64::from(u8::from(on))))
        .collect();
    feasible(&model, &fixes)
}

#[test]
fn triangle_closes_exactly_one_switch() {
    let feeder = triangle().unwrap();
    for (y, want) in [
        ([false, false], false),
        ([true, false], true),
        ([false, true], true),
        ([true, true], false),
    ] {
        assert_eq!(radiality_feasible(&feeder, &y), want, "{y:?}");
        assert_eq!(is_spanning_tree(&feeder, &y), want, "{y:?}");
    }
}

#[test]
fn islanding_choice_is_infeasible() {
    // Closing 1-2 and 0-2 satisfies the count but makes a cycle and strands
    // bus 3.
    let mut b = FeederBuilder::new("island", 1.0);
    let v = (0.5, 1.5);
    let (n1, n2, n3) = (b.passive("1", v), b.passive("2", v), b.der("3", 1.0, Q_RATIO, v));
    b.line(0, n1, 0.01, 0.01);
    b.switch(n1, n2, 0.01, 0.01);
    b.switch(0, n2, 0.01, 0.01);
    b.switch(n2, n3, 0.01, 0.01);
    let feeder = b.build().unwrap();
    let y = [true, true, false];
    assert!(!prop1_feasible(&feeder, &y));
    assert!(!radiality_feasible(&feeder, &y));
    assert!(radiality_feasible(&feeder, &[true, false, true]));
}

/// Secondary voltages a local regulator may produce at primary voltage `v`.
fn local_outputs(v: f64, band: (f64, f64)) -> Vec<(u8, (f64, f64))> {
    let mut b = FeederBuilder::new("local", v);
    let n1 = b.passive("1", (0.5, 1.5));
    b.local_regulator(0, n1, band);
    let feeder = b.build().unwrap();
    let dnr = assemble(&feeder, &nominal());
    let o2 = &dnr.layout.omega2[0];
    one_hot(o2.reg_delta[&0])
        .filter_map(|(k, fixes)| range(&dnr.model, o2.v[1], &fixes).map(|r| (k, r)))
        .collect()
}

#[test]
fn local_regulator_branches() {
    let band = (0.992, 1.008);
    for (v, region, want) in [(0.95, 2, 1.0), (0.85, 1, 0.935), (1.15, 3, 1.035)] {
        let out = local_outputs(v, band);
        assert_eq!(out.len(), 1, "v = {v}: {out:?}");
        assert_eq!(out[0].0, region);
        assert_abs_diff_eq!(out[0].1 .0, want, epsilon = 1e-9);
        assert_abs_diff_eq!(out[0].1 .1, want, epsilon = 1e-9);
    }
}

#[test]
fn remote_tap_codes() {
    let mut b = FeederBuilder::new("remote", 1.0);
    let n1 = b.passive("1", (0.5, 1.5));
    b.remote_regulator(0, n1);
    let feeder = b.build().unwrap();
    let dnr = assemble(&feeder, &nominal());
    let bits = dnr.layout.omega1.tap_bits[&0];
    let v1 = dnr.layout.omega2[0].v[1];
    let code_fixes = |code: u32| -> Vec<BoundOverride> {
        bits.iter().enumerate().map(|(k, &b)| fix(b, f64::from(code >> k & 1))).collect()
    };
    for (code, want) in [(16, 1.0), (0, 0.9), (32, 1.1)] {
        let (lo, hi) = range(&dnr.model, v1, &code_fixes(code)).unwrap();
        assert_abs_diff_eq!(lo, want, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, want, epsilon = 1e-12);
    }
    assert!(!feasible(&dnr.model, &code_fixes(33)));
}

#[test]
fn plain_radial_feeder_is_an_lp_bounded_by_the_simulator() {
    let mut b = FeederBuilder::new("path", 1.0);
    let v = (0.8, 1.2);
    let n1 = b.load("1", 0.4, 0.2, [0.6, 0.2, 0.2], v);
    let n2 = b.load("2", 0.3, 0.1, [1.0, 0.0, 0.0], v);
    let n3 = b.load("3", 0.2, 0.1, [0.5, 0.0, 0.5], v);
    b.line(0, n1, 0.02, 0.03);
    b.line(n1, n2, 0.03, 0.02);
    b.line(n1, n3, 0.01, 0.04);
    let feeder = b.build().unwrap();
    let scenarios = nominal();
    let dnr = assemble(&feeder, &scenarios);
    assert_eq!(dnr.model.binaries().count(), 0);
    let sol = branch_and_bound(&dnr.model, &BnbOptions::default()).unwrap();
    let obj = sol.objective.unwrap();
    let (omega1, _) = extract_omega(&dnr, sol.values.as_ref().unwrap(), 1e-6).unwrap();
    let sim = simulate_instance(&feeder, &omega1, &scenarios.instances[0], &SimOptions::default()).unwrap();
    let loss = sim.loss(&feeder);
    assert!(obj <= loss + 1e-9 && loss <= obj + dnr.epigraph_bound(), "{obj} {loss}");
}

#[test]
fn identical_instances_double_the_objective() {
    let feeder = eight_bus().unwrap();
    let one = ScenarioSet::from_instances(vec![eight_bus_scenarios().instances[0].clone()]);
    let mut twice = one.instances[0].clone();
    twice.timestamp = 1;
    let two = ScenarioSet::from_instances(vec![one.instances[0].clone(), twice]);
    let d1 = assemble(&feeder, &one);
    let d2 = assemble(&feeder, &two);
    let s1 = branch_and_bound(&d1.model, &BnbOptions::default()).unwrap();
    let s2 = branch_and_bound(&d2.model, &BnbOptions::default()).unwrap();
    let (o1, o2) = (s1.objective.unwrap(), s2.objective.unwrap());
    assert!((o2 - 2.0 * o1).abs() <= 1e-6 * o2.max(1.0), "{o1} {o2}");
    let w1 = extract_omega(&d1, s1.values.as_ref().unwrap(), 1e-6).unwrap().0;
    let w2 = extract_omega(&d2, s2.values.as_ref().unwrap(), 1e-6).unwrap().0;
    assert_eq!(w1.switches, w2.switches);
}

#[test]
fn extraction_rounds_within_tolerance() {
    let feeder = eight_bus().unwrap();
    let dnr = assemble(&feeder, &eight_bus_scenarios());
    let mut x = solve(&dnr);
    let o1 = &dnr.layout.omega1;
    let (&e, &y) = o1.y.iter().next().unwrap();
    let want = x[y.0] > 0.5;
    x[y.0] = if want { 0.9999999 } else { 1e-7 };
    // Neutral tap code 010000.
    for (k, &b) in o1.tap_bits[&0].iter().enumerate() {
        x[b.0] = f64::from(u8::from(k == 4));
    }
    // Intercept on its lower limit: p1 = 0.4 p_max.
    let der = feeder.buses[6].der.unwrap();
    let beta = -3.0 * der.q_max / der.p_max;
    x[o1.beta[&6].0] = beta;
    x[o1.gamma[&6].0] = -0.4 * der.p_max * beta;
    let (omega1, _) = extract_omega(&dnr, &x, 1e-6).unwrap();
    assert_eq!(omega1.switches[&e], want);
    assert_eq!(omega1.taps[&0], 0);
    let (p1, _) = omega1.curves[&6].breakpoints(der.q_max).unwrap();
    assert_abs_diff_eq!(p1, 0.4 * der.p_max, epsilon = 1e-12);

    x[y.0] = 0.5;
    assert!(extract_omega(&dnr, &x, 1e-6).is_err());
}
