use feeder_mip::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixed(var: VarId, value: f64) -> BoundOverride {
    BoundOverride {
        var,
        lower: value,
        upper: value,
    }
}

#[test]
fn small_lp_known_optimum() {
    // min -x - 2y  s.t. x + y <= 4, x + 3y <= 6, x, y >= 0  ->  x = 3, y = 1
    let mut m = MipModel::new();
    let x = m.add_continuous(0.0, f64::INFINITY, Tag::new("x")).unwrap();
    let y = m.add_continuous(0.0, f64::INFINITY, Tag::new("y")).unwrap();
    m.add_constraint([(x, 1.0), (y, 1.0)], Sense::Le, 4.0, Tag::new("a")).unwrap();
    m.add_constraint([(x, 1.0), (y, 3.0)], Sense::Le, 6.0, Tag::new("b")).unwrap();
    m.add_objective_term(x, -1.0).unwrap();
    m.add_objective_term(y, -2.0).unwrap();
    let sol = solve_lp(&m, &[], &LpOptions::default()).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.values[x.0] - 3.0).abs() < 1e-9);
    assert!((sol.values[y.0] - 1.0).abs() < 1e-9);
    assert!((sol.objective + 5.0).abs() < 1e-9);
}

#[test]
fn infeasible_and_unbounded_lp() {
    let mut m = MipModel::new();
    let x = m.add_continuous(0.0, 1.0, Tag::new("x")).unwrap();
    m.add_constraint([(x, 1.0)], Sense::Ge, 2.0, Tag::new("a")).unwrap();
    assert_eq!(solve_lp(&m, &[], &LpOptions::default()).unwrap().status, LpStatus::Infeasible);

    let mut m = MipModel::new();
    let x = m.add_continuous(0.0, f64::INFINITY, Tag::new("x")).unwrap();
    m.add_objective_term(x, -1.0).unwrap();
    assert_eq!(solve_lp(&m, &[], &LpOptions::default()).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn lazy_rows_are_enforced() {
    // The only constraint is lazy; it still has to hold at the optimum.
    let mut m = MipModel::new();
    let x = m.add_continuous(0.0, 10.0, Tag::new("x")).unwrap();
    m.add_lazy_constraint([(x, 1.0)], Sense::Ge, 3.5, Tag::new("lazy")).unwrap();
    m.add_objective_term(x, 1.0).unwrap();
    let sol = solve_lp(&m, &[], &LpOptions::default()).unwrap();
    assert!((sol.values[x.0] - 3.5).abs() < 1e-9);
}

proptest! {
    #[test]
    fn mccormick_is_exact_at_binary_points(
        lo in -5.0f64..5.0,
        width in 0.0f64..5.0,
        frac in 0.0f64..=1.0,
        xb in 0u8..2,
    ) {
        let hi = lo + width;
        let yv = lo + frac * width;
        let xv = f64::from(xb);
        let mut m = MipModel::new();
        let x = m.add_binary(Tag::new("x")).unwrap();
        let y = m.add_continuous(lo, hi, Tag::new("y")).unwrap();
        let z = mccormick_product(&mut m, x, y, Tag::new("z")).unwrap();
        let pins = [fixed(x, xv), fixed(y, yv)];
        for dir in [1.0, -1.0] {
            let mut probe = m.clone();
            probe.add_objective_term(z, dir).unwrap();
            let sol = solve_lp(&probe, &pins, &LpOptions::default()).unwrap();
            prop_assert_eq!(sol.status, LpStatus::Optimal);
            prop_assert!((sol.values[z.0] - xv * yv).abs() <= 1e-9 * (1.0 + hi.abs() + lo.abs()));
        }
    }

    #[test]
    fn mccormick_relaxation_contains_products(
        lo in -5.0f64..5.0,
        width in 0.0f64..5.0,
        frac in 0.0f64..=1.0,
        xv in 0.0f64..=1.0,
    ) {
        // Any (x, y) in the box with z = x*y on an integral x satisfies the
        // rows; for fractional x, z = x*y stays inside the envelope.
        let hi = lo + width;
        let yv = lo + frac * width;
        let mut m = MipModel::new();
        let x = m.add_binary(Tag::new("x")).unwrap();
        let y = m.add_continuous(lo, hi, Tag::new("y")).unwrap();
        let z = mccormick_product(&mut m, x, y, Tag::new("z")).unwrap();
        let mut vals = vec![0.0; 3];
        vals[x.0] = xv;
        vals[y.0] = yv;
        vals[z.0] = xv * yv;
        prop_assert!(m.constraints.iter().all(|c| c.violation(&vals) <= 1e-9));
    }

    #[test]
    fn epigraph_lp_matches_envelope(
        coeff in 0.01f64..10.0,
        half in 0.1f64..3.0,
        frac in -1.0f64..=1.0,
        k in 2usize..25,
    ) {
        let mut m = MipModel::new();
        let w = m.add_continuous(-half, half, Tag::new("w")).unwrap();
        let ell = convex_loss_epigraph(&mut m, w, coeff, k, Tag::new("loss")).unwrap();
        m.add_objective_term(ell, 1.0).unwrap();
        let wv = frac * half;
        let sol = solve_lp(&m, &[fixed(w, wv)], &LpOptions::default()).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        let exact = coeff * wv * wv;
        let gap = exact - sol.values[ell.0];
        let envelope = tangent_envelope(coeff, half, k, wv);
        prop_assert!((sol.values[ell.0] - envelope).abs() <= 1e-7 * (1.0 + exact));
        prop_assert!(gap >= -1e-7 * (1.0 + exact));
        prop_assert!(gap <= m.epigraph_error_bound() + 1e-7 * (1.0 + exact));
    }

    #[test]
    fn mps_round_trip(seed in any::<u64>(), nv in 1usize..8, nc in 0usize..8) {
        let m = random_model(seed, nv, nc);
        let text = export_mps(&m, "RT");
        prop_assert_eq!(&text, &export_mps(&m, "RT"));
        let back = read_mps(&text).unwrap();
        prop_assert!(m.same_structure(&back));
        prop_assert_eq!(export_mps(&back, "RT"), text);
    }

    #[test]
    fn knapsack_matches_enumeration(seed in any::<u64>(), n in 1usize..10) {
        let (m, items) = knapsack(seed, n);
        let sol = branch_and_bound(&m, &BnbOptions::default()).unwrap();
        let best = enumerate_knapsack(&items.0, &items.1, items.2);
        prop_assert_eq!(sol.status, MipStatus::Optimal);
        let obj = sol.objective.unwrap();
        prop_assert!((obj - best).abs() <= 1e-6 * best.abs().max(1.0), "bnb {} enum {}", obj, best);
        prop_assert!(m.max_violation(sol.values.as_ref().unwrap()) <= 1e-7);
    }

    #[test]
    fn child_bounds_never_decrease(seed in any::<u64>(), n in 4usize..12) {
        let (m, _) = knapsack(seed, n);
        let sol = branch_and_bound(&m, &BnbOptions::default()).unwrap();
        for rec in &sol.records {
            if let Some(lp) = rec.lp_objective {
                prop_assert!(lp >= rec.parent_bound - 1e-7 * rec.parent_bound.abs().max(1.0));
            }
        }
        prop_assert!(sol.bound <= sol.objective.unwrap() + 1e-9);
    }
}

fn random_model(seed: u64, nv: usize, nc: usize) -> MipModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = MipModel::new();
    let mut vars = Vec::new();
    for j in 0..nv {
        let v = match rng.gen_range(0..5) {
            0 => m.add_binary(Tag::new("b")).unwrap(),
            1 => m.add_continuous(f64::NEG_INFINITY, f64::INFINITY, Tag::new("free")).unwrap(),
            2 => m.add_fixed(rng.gen_range(-3.0..3.0), Tag::new("fx")).unwrap(),
            3 => m
                .add_continuous(f64::NEG_INFINITY, rng.gen_range(0.0..2.0), Tag::new("mi"))
                .unwrap(),
            _ => {
                let lo = rng.gen_range(-2.0..2.0);
                m.add_continuous(lo, lo + rng.gen_range(0.0..3.0), Tag::new("box")).unwrap()
            }
        };
        if j % 2 == 0 {
            m.add_objective_term(v, rng.gen_range(0.1..5.0)).unwrap();
        }
        vars.push(v);
    }
    for _ in 0..nc {
        let mut terms = Vec::new();
        for &v in &vars {
            if rng.gen_bool(0.6) {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                terms.push((v, sign * rng.gen_range(0.1..4.0)));
            }
        }
        let sense = [Sense::Le, Sense::Eq, Sense::Ge][rng.gen_range(0..3)];
        m.add_constraint(terms, sense, rng.gen_range(-5.0..5.0), Tag::new("row")).unwrap();
    }
    m
}

type Items = (Vec<f64>, Vec<f64>, f64);

/// Knapsack with a continuous slack: maximise value (as a minimisation of its
/// negation) under a weight cap.
fn knapsack(seed: u64, n: usize) -> (MipModel, Items) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..20.0)).collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..10.0)).collect();
    let cap = weights.iter().sum::<f64>() * rng.gen_range(0.2..0.7);
    let mut m = MipModel::new();
    let xs: Vec<VarId> = (0..n)
        .map(|i| {
            let x = m.add_binary(Tag::new("item").at(i)).unwrap();
            m.add_objective_term(x, -values[i]).unwrap();
            x
        })
        .collect();
    m.add_constraint(
        xs.iter().zip(&weights).map(|(&x, &w)| (x, w)),
        Sense::Le,
        cap,
        Tag::new("capacity"),
    )
    .unwrap();
    (m, (values, weights, cap))
}

fn enumerate_knapsack(values: &[f64], weights: &[f64], cap: f64) -> f64 {
    let n = values.len();
    (0u32..1 << n)
        .filter_map(|mask| {
            let pick = |i: usize| mask >> i & 1 == 1;
            let w: f64 = (0..n).filter(|&i| pick(i)).map(|i| weights[i]).sum();
            (w <= cap + 1e-9).then(|| -(0..n).filter(|&i| pick(i)).map(|i| values[i]).sum::<f64>())
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn bnb_is_deterministic() {
    let (m, _) = knapsack(7, 14);
    let a = branch_and_bound(&m, &BnbOptions::default()).unwrap();
    let b = branch_and_bound(&m, &BnbOptions::default()).unwrap();
    assert_eq!(a.values, b.values);
    assert_eq!(a.log, b.log);
    assert_eq!(a.nodes, b.nodes);
}

#[test]
fn warm_and_cold_children_agree() {
    let (m, _) = knapsack(11, 12);
    let warm = branch_and_bound(&m, &BnbOptions::default()).unwrap();
    let cold = branch_and_bound(
        &m,
        &BnbOptions {
            warm_cache: 0,
            ..BnbOptions::default()
        },
    )
    .unwrap();
    assert!((warm.objective.unwrap() - cold.objective.unwrap()).abs() < 1e-9);
}

#[test]
fn node_limit_reports_feasible_or_timeout() {
    let (m, _) = knapsack(3, 16);
    let sol = branch_and_bound(
        &m,
        &BnbOptions {
            node_limit: Some(3),
            ..BnbOptions::default()
        },
    )
    .unwrap();
    assert!(matches!(sol.status, MipStatus::Feasible | MipStatus::Timeout));
    assert!(sol.nodes <= 3);
}

#[test]
fn infeasible_mip() {
    let mut m = MipModel::new();
    let a = m.add_binary(Tag::new("a")).unwrap();
    let b = m.add_binary(Tag::new("b")).unwrap();
    // a + b = 1 and a = b has no binary solution but an LP one at 1/2.
    m.add_constraint([(a, 1.0), (b, 1.0)], Sense::Eq, 1.0, Tag::new("sum")).unwrap();
    m.add_constraint([(a, 1.0), (b, -1.0)], Sense::Eq, 0.0, Tag::new("eq")).unwrap();
    let sol = branch_and_bound(&m, &BnbOptions::default()).unwrap();
    assert_eq!(sol.status, MipStatus::Infeasible);
    assert!(sol.values.is_none());
}

#[test]
fn branching_follows_priority() {
    let (mut m, _) = knapsack(5, 8);
    let last = VarId(7);
    m.set_priority(last, 100);
    let sol = branch_and_bound(&m, &BnbOptions::default()).unwrap();
    let first_branch = sol.log.lines().find(|l| l.contains(" branch ")).unwrap();
    // Only branch if the root was fractional on the prioritised item.
    let root = solve_lp(&m, &[], &LpOptions::default()).unwrap();
    let x = root.values[last.0];
    if x > 1e-6 && x < 1.0 - 1e-6 {
        assert!(first_branch.contains(" branch 7 "), "{first_branch}");
    }
}

/// Cross-check against an independent integer solver on the re-imported MPS.
#[test]
fn mps_cross_solver_agreement() {
    for seed in 0..20 {
        let (m, _) = knapsack(seed, 10);
        let ours = branch_and_bound(&m, &BnbOptions::default()).unwrap().objective.unwrap();
        let back = read_mps(&export_mps(&m, "KNAP")).unwrap();
        let mut p = microlp::Problem::new(microlp::OptimizationDirection::Minimize);
        let cols: Vec<_> = back
            .vars
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let c = back.objective.get(&VarId(j)).copied().unwrap_or(0.0);
                if v.is_binary() {
                    p.add_binary_var(c)
                } else {
                    p.add_var(c, (v.lower, v.upper))
                }
            })
            .collect();
        for row in &back.constraints {
            let expr: Vec<_> = row.terms.iter().map(|&(v, c)| (cols[v.0], c)).collect();
            let op = match row.sense {
                Sense::Le => microlp::ComparisonOp::Le,
                Sense::Ge => microlp::ComparisonOp::Ge,
                Sense::Eq => microlp::ComparisonOp::Eq,
            };
            p.add_constraint(expr.as_slice(), op, row.rhs);
        }
        let theirs = p.solve().unwrap().into_solution().unwrap().objective();
        assert!((ours - theirs).abs() <= 1e-6 * theirs.abs().max(1.0), "seed {seed}: {ours} vs {theirs}");
    }
}
