//! Watt-var curves in slope/intercept form: the admissible box, breakpoint
//! recovery and the reactive output along the active-power axis.

use feeder_dnr::feeder::DerSpec;
use feeder_dnr::wattvar::{breakpoints_admissible, curve_polygon, in_curve_box, reactive_power, Curve};

fn main() {
    let der = DerSpec { p_max: 1.0, q_max: 0.44 };
    println!("admissible polygon vertices (beta, gamma): {:?}", curve_polygon(&der));
    for (p1, p2) in [(0.8, 1.0), (0.5, 0.7), (0.4, 0.5), (0.3, 0.9)] {
        let c = Curve::from_breakpoints(p1, p2, der.q_max);
        println!(
            "p1 {p1} p2 {p2}: beta {:.4} gamma {:.4}, in box {}, breakpoints admissible {}",
            c.beta,
            c.gamma,
            in_curve_box(c.beta, c.gamma, &der, 1e-12),
            breakpoints_admissible(p1, p2, der.p_max, 1e-12)
        );
        let q: Vec<String> = (0..=10)
            .map(|k| format!("{:.3}", reactive_power(k as f64 / 10.0, p1, p2, der.q_max)))
            .collect();
        println!("  q at p = 0, 0.1, .., 1: {}", q.join(" "));
    }
}
