//! Linearizations shared by every encoder.

use crate::error::MipError;
use crate::model::{Epigraph, MipModel, Sense, Tag, VarId};

/// Adds `z = x * y` for binary `x` and bounded continuous `y` as four rows:
///
/// ```text
/// x*lo <= z <= x*hi
/// y + (x-1)*hi <= z <= y + (x-1)*lo
/// ```
///
/// At `x = 0` the rows pin `z` to 0, at `x = 1` they pin `z` to `y`. The bounds
/// of `z` are `[min(0, lo), max(0, hi)]`.
pub fn mccormick_product(model: &mut MipModel, x: VarId, y: VarId, role: Tag) -> Result<VarId, MipError> {
    if x.0 >= model.num_vars() {
        return Err(MipError::UnknownVar(x));
    }
    if y.0 >= model.num_vars() {
        return Err(MipError::UnknownVar(y));
    }
    if !model.var(x).is_binary() {
        return Err(MipError::NotBinary(x));
    }
    let (lo, hi) = (model.var(y).lower, model.var(y).upper);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(MipError::UnboundedFactor(y));
    }
    let z = model.add_continuous(lo.min(0.0), hi.max(0.0), role.clone())?;
    let row = role.relabel(format!("{}/mccormick", role.label));
    // z - lo*x >= 0
    model.add_constraint([(z, 1.0), (x, -lo)], Sense::Ge, 0.0, row.clone())?;
    // z - hi*x <= 0
    model.add_constraint([(z, 1.0), (x, -hi)], Sense::Le, 0.0, row.clone())?;
    // z - y - hi*x >= -hi
    model.add_constraint([(z, 1.0), (y, -1.0), (x, -hi)], Sense::Ge, -hi, row.clone())?;
    // z - y - lo*x <= -lo
    model.add_constraint([(z, 1.0), (y, -1.0), (x, -lo)], Sense::Le, -lo, row)?;
    Ok(z)
}

/// Tangent abscissae equally spaced on `[-half_width, half_width]`.
pub fn tangent_points(half_width: f64, tangents: usize) -> Vec<f64> {
    let n = tangents as f64 - 1.0;
    (0..tangents)
        .map(|k| half_width * (2.0 * k as f64 - n) / n)
        .collect()
}

/// Adds `ell >= coeff * w^2` as `tangents` lazy tangent rows at points equally
/// spaced on `[-W, W]`, where `W = max(|lower(w)|, |upper(w)|)`.
///
/// At the optimum of a minimization `0 <= coeff*w^2 - ell <= coeff*(2W/(K-1))^2/4`.
pub fn convex_loss_epigraph(
    model: &mut MipModel,
    w: VarId,
    coeff: f64,
    tangents: usize,
    role: Tag,
) -> Result<VarId, MipError> {
    if tangents < 2 {
        return Err(MipError::TooFewTangents(tangents));
    }
    if w.0 >= model.num_vars() {
        return Err(MipError::UnknownVar(w));
    }
    let (lo, hi) = (model.var(w).lower, model.var(w).upper);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(MipError::UnboundedFactor(w));
    }
    let half_width = lo.abs().max(hi.abs());
    let ell = model.add_continuous(0.0, coeff * half_width * half_width, role.clone())?;
    let row = role.relabel(format!("{}/tangent", role.label));
    for a in tangent_points(half_width, tangents) {
        // ell >= coeff*(2 a w - a^2)
        model.add_lazy_constraint(
            [(ell, 1.0), (w, -2.0 * coeff * a)],
            Sense::Ge,
            -coeff * a * a,
            row.clone(),
        )?;
    }
    model.epigraphs.push(Epigraph {
        ell,
        w,
        coeff,
        half_width,
        tangents,
    });
    Ok(ell)
}

/// Value of the tangent approximation at `w`: the pointwise max of the cuts,
/// floored at zero (the lower bound of `ell`).
pub fn tangent_envelope(coeff: f64, half_width: f64, tangents: usize, w: f64) -> f64 {
    tangent_points(half_width, tangents)
        .into_iter()
        .map(|a| coeff * (2.0 * a * w - a * a))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VarKind;

    #[test]
    fn mccormick_rejects_bad_factors() {
        let mut m = MipModel::new();
        let c = m.add_continuous(0.0, 1.0, Tag::new("c")).unwrap();
        let free = m.add_continuous(f64::NEG_INFINITY, 1.0, Tag::new("free")).unwrap();
        let b = m.add_binary(Tag::new("b")).unwrap();
        assert_eq!(
            mccormick_product(&mut m, c, c, Tag::new("z")).unwrap_err(),
            MipError::NotBinary(c)
        );
        assert_eq!(
            mccormick_product(&mut m, b, free, Tag::new("z")).unwrap_err(),
            MipError::UnboundedFactor(free)
        );
    }

    #[test]
    fn mccormick_rows_at_integral_points() {
        let mut m = MipModel::new();
        let x = m.add_binary(Tag::new("x")).unwrap();
        let y = m.add_continuous(-1.0, 1.0, Tag::new("y")).unwrap();
        let z = mccormick_product(&mut m, x, y, Tag::new("z")).unwrap();
        assert_eq!(m.var(z).kind, VarKind::Continuous);
        assert_eq!(m.num_constraints(), 4);
        let check = |xv: f64, yv: f64, zv: f64| {
            let mut vals = vec![0.0; 3];
            vals[x.0] = xv;
            vals[y.0] = yv;
            vals[z.0] = zv;
            m.constraints.iter().all(|c| c.violation(&vals) <= 1e-12)
        };
        assert!(check(0.0, 0.7, 0.0));
        assert!(!check(0.0, 0.7, 0.1));
        assert!(check(1.0, 0.7, 0.7));
        assert!(!check(1.0, 0.7, 0.69));
    }

    #[test]
    fn tangent_at_grid_point_is_exact() {
        // K = 21 on [-1, 1] has a tangent at 0.5; K = 11 puts 0.5 mid-way
        // between tangents, where the gap equals the bound (0.2)^2/4.
        assert!((tangent_envelope(1.0, 1.0, 21, 0.5) - 0.25).abs() < 1e-15);
        assert!((tangent_envelope(1.0, 1.0, 11, 0.5) - 0.24).abs() < 1e-15);
        assert_eq!(tangent_envelope(1.0, 1.0, 11, 0.0), 0.0);
    }

    #[test]
    fn epigraph_requires_two_tangents() {
        let mut m = MipModel::new();
        let w = m.add_continuous(-1.0, 1.0, Tag::new("w")).unwrap();
        assert_eq!(
            convex_loss_epigraph(&mut m, w, 1.0, 1, Tag::new("l")).unwrap_err(),
            MipError::TooFewTangents(1)
        );
        let ell = convex_loss_epigraph(&mut m, w, 2.0, 15, Tag::new("l")).unwrap();
        assert_eq!(m.var(ell).upper, 2.0);
        assert_eq!(m.constraints.iter().filter(|c| c.lazy).count(), 15);
        let eb = m.epigraph_error_bound();
        assert!((eb - 2.0 * (2.0f64 / 14.0).powi(2) / 4.0).abs() < 1e-15);
    }
}
