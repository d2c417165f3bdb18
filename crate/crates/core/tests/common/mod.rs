//! LP probes shared by the integration tests.
#![allow(dead_code)]

use feeder_mip::{solve_lp, BoundOverride, LpOptions, LpStatus, MipModel, VarId};

pub fn fix(var: VarId, value: f64) -> BoundOverride {
    BoundOverride {
        var,
        lower: value,
        upper: value,
    }
}

/// Whether the relaxation of `model` with `fixes` applied is feasible.
pub fn feasible(model: &MipModel, fixes: &[BoundOverride]) -> bool {
    solve_lp(model, fixes, &LpOptions::default()).expect("LP solve").status == LpStatus::Optimal
}

/// Minimum and maximum of `var` over the relaxation with `fixes`, or `None`
/// when it is infeasible.
pub fn range(model: &MipModel, var: VarId, fixes: &[BoundOverride]) -> Option<(f64, f64)> {
    let mut probe = model.clone();
    let mut ends = [0.0; 2];
    for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
        probe.objective.clear();
        probe.add_objective_term(var, sign).expect("objective term");
        let sol = solve_lp(&probe, fixes, &LpOptions::default()).expect("LP solve");
        if sol.status != LpStatus::Optimal {
            return None;
        }
        ends[k] = sol.values[var.0];
    }
    Some((ends[0], ends[1]))
}

/// One-hot assignments of three indicators.
pub fn one_hot(vars: [VarId; 3]) -> impl Iterator<Item = (u8, Vec<BoundOverride>)> {
    (0..3).map(move |k| {
        let fixes = (0..3).map(|j| fix(vars[j], f64::from(u8::from(j == k)))).collect();
        (k as u8 + 1, fixes)
    })
}
