//! Watt-var curves parameterized by the slope and intercept of the middle
//! segment.
//!
//! A curve with breakpoints `(p1, p2)` absorbs nothing up to `p1`, ramps
//! linearly to `-q_max` at `p2` and stays saturated up to `p_max`. The middle
//! segment is `q = beta * p + gamma` with `p1 = -gamma / beta` and
//! `p2 = -(q_max + gamma) / beta`.
//!
//! The admissible breakpoints `0.4 p_max <= p1 <= 0.8 p_max` and
//! `p1 + 0.1 p_max <= p2 <= p_max` map to the polygon
//!
//! ```text
//! -0.4 p_max beta <= gamma <= -0.8 p_max beta
//! p_max beta + gamma <= -q_max <= 0.1 p_max beta
//! ```
//!
//! in `(beta, gamma)` space. Its vertices give the bounds
//! `beta in [-10 q_max / p_max, -q_max / (0.6 p_max)]` and
//! `gamma in [q_max / 1.5, 8 q_max]`.

use serde::{Deserialize, Serialize};

use crate::error::CurveError;
use crate::feeder::DerSpec;

/// Slope and intercept of the middle segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub beta: f64,
    pub gamma: f64,
}

impl Curve {
    /// Curve through `(p1, 0)` and `(p2, -q_max)`.
    pub fn from_breakpoints(p1: f64, p2: f64, q_max: f64) -> Self {
        let beta = -q_max / (p2 - p1);
        Curve { beta, gamma: -beta * p1 }
    }

    pub fn breakpoints(&self, q_max: f64) -> Result<(f64, f64), CurveError> {
        recover_breakpoints(self.beta, self.gamma, q_max)
    }

    /// The curve that absorbs the least: `p1 = 0.8 p_max`, `p2 = p_max`.
    pub fn least_absorbing(der: &DerSpec) -> Self {
        Curve::from_breakpoints(0.8 * der.p_max, der.p_max, der.q_max)
    }
}

/// Active-power breakpoints of a curve: `p1 = -gamma/beta`,
/// `p2 = -(q_max + gamma)/beta`.
pub fn recover_breakpoints(beta: f64, gamma: f64, q_max: f64) -> Result<(f64, f64), CurveError> {
    if !(beta < 0.0) {
        return Err(CurveError::DegenerateSlope(beta));
    }
    Ok((-gamma / beta, -(q_max + gamma) / beta))
}

/// Whether `(beta, gamma)` lies in the admissible polygon, with slack `tol`.
pub fn in_curve_box(beta: f64, gamma: f64, der: &DerSpec, tol: f64) -> bool {
    let (p, q) = (der.p_max, der.q_max);
    -0.4 * p * beta <= gamma + tol
        && gamma <= -0.8 * p * beta + tol
        && p * beta + gamma <= -q + tol
        && -q <= 0.1 * p * beta + tol
}

/// Whether breakpoints satisfy the standard's limits, with slack `tol`.
pub fn breakpoints_admissible(p1: f64, p2: f64, p_max: f64, tol: f64) -> bool {
    0.4 * p_max <= p1 + tol && p1 <= 0.8 * p_max + tol && p1 + 0.1 * p_max <= p2 + tol && p2 <= p_max + tol
}

pub fn beta_bounds(der: &DerSpec) -> (f64, f64) {
    (-10.0 * der.q_max / der.p_max, -der.q_max / (0.6 * der.p_max))
}

pub fn gamma_bounds(der: &DerSpec) -> (f64, f64) {
    (der.q_max / 1.5, 8.0 * der.q_max)
}

/// Admissible intercepts for a given slope, if any.
pub fn gamma_range(beta: f64, der: &DerSpec) -> Option<(f64, f64)> {
    let (p, q) = (der.p_max, der.q_max);
    if beta < -10.0 * q / p - 1e-12 || beta >= 0.0 {
        return None;
    }
    let lo = -0.4 * p * beta;
    let hi = (-0.8 * p * beta).min(-q - p * beta);
    (lo <= hi + 1e-12).then_some((lo, hi.max(lo)))
}

/// Vertices of the admissible polygon in `(beta, gamma)` space.
pub fn curve_polygon(der: &DerSpec) -> [(f64, f64); 4] {
    let (p, q) = (der.p_max, der.q_max);
    [
        (-q / (0.6 * p), q / 1.5),
        (-5.0 * q / p, 4.0 * q),
        (-10.0 * q / p, 8.0 * q),
        (-10.0 * q / p, 4.0 * q),
    ]
}

/// Range of `a * beta + b * gamma` over the admissible polygon.
pub fn linear_range(der: &DerSpec, a: f64, b: f64) -> (f64, f64) {
    curve_polygon(der)
        .iter()
        .map(|&(beta, gamma)| a * beta + b * gamma)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// Segment of the curve active at `p`: 1 deadband, 2 ramp, 3 saturated.
/// Breakpoint ties go to the lower segment.
pub fn segment(p: f64, p1: f64, p2: f64) -> u8 {
    if p <= p1 {
        1
    } else if p <= p2 {
        2
    } else {
        3
    }
}

/// Reactive injection of the watt-var rule at active power `p`.
pub fn reactive_power(p: f64, p1: f64, p2: f64, q_max: f64) -> f64 {
    match segment(p, p1, p2) {
        1 => 0.0,
        2 => -q_max * (p - p1) / (p2 - p1),
        _ => -q_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DER: DerSpec = DerSpec { p_max: 1.0, q_max: 1.0 };

    #[test]
    fn polygon_vertices_are_in_the_box() {
        for (b, g) in curve_polygon(&DER) {
            assert!(in_curve_box(b, g, &DER, 1e-12), "({b}, {g})");
        }
        assert!(!in_curve_box(-1.0, 0.5, &DER, 0.0));
    }

    #[test]
    fn gamma_range_pinches_at_the_shallowest_slope() {
        let (lo, hi) = gamma_range(-1.0 / 0.6, &DER).unwrap();
        assert!((lo - hi).abs() < 1e-12);
        assert!(gamma_range(-1.0, &DER).is_none());
        assert_eq!(gamma_range(-10.0, &DER), Some((4.0, 8.0)));
    }

    #[test]
    fn reactive_power_at_breakpoints() {
        assert_eq!(reactive_power(0.6, 0.6, 1.0, 0.5), 0.0);
        assert_eq!(reactive_power(1.0, 0.6, 1.0, 0.5), -0.5);
        assert!((reactive_power(0.8, 0.6, 1.0, 0.5) + 0.25).abs() < 1e-15);
    }
}
