//! Independent transcription of the printed constraint inequalities, shared
//! by the evaluation and acceptance tests.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tdslip::eval::{CaseStudy, ConstraintContext, FlightSummary, StanceSummary, TrajectorySummary};

/// Draws a summary whose every quantity straddles its threshold, so about
/// half of the draws are feasible.
pub fn random_summary(rng: &mut ChaCha8Rng) -> (TrajectorySummary, ConstraintContext) {
    let l0: f64 = rng.random_range(0.002..0.06);
    let theta_0: f64 = rng.random_range(0.5..1.45);
    let stance = |rng: &mut ChaCha8Rng| {
        let y_start: f64 = rng.random_range(0.5 * l0..l0);
        let y_end = rng.random_range(0.5 * l0..l0);
        let y_mid = 0.85 * y_start.min(y_end) * rng.random_range(0.7..1.01);
        let x_start = rng.random_range(-l0..0.0);
        StanceSummary {
            y_start,
            y_mid,
            y_end,
            x_start,
            x_end: x_start + rng.random_range(-0.0001..0.05),
            x_dot_start: rng.random_range(0.1..2.0),
            x_dot_end: rng.random_range(-0.01..2.0),
            y_dot_start: -rng.random_range(0.1..2.0),
            y_dot_end: rng.random_range(-0.01..5.05),
            min_y: rng.random_range(-0.0002..l0),
            symmetry: rng.random_range(0.0..0.31),
        }
    };
    let s1 = stance(rng);
    let s2 = stance(rng);
    let theta_td1 = theta_0 + rng.random_range(-0.03..0.03);
    let theta_td2 = theta_0 + rng.random_range(-0.03..0.03);
    let min_y_s2 = rng.random_range(-0.0002..l0);
    let summary = TrajectorySummary {
        theta_td1,
        theta_td2: Some(theta_td2),
        stance1: Some(s1),
        stance2: Some(s2),
        min_y_s1: Some(s1.min_y),
        min_y_s2: Some(min_y_s2),
        flight1: Some(FlightSummary {
            dx: rng.random_range(-4.1 * l0..4.1 * l0),
            leg_rotation: rng.random_range(3.0..6.4),
        }),
        min_stance_dx: Some(rng.random_range(0.0009..0.05)),
        period1: Some(rng.random_range(0.06..2.02)),
        n_cycles: rng.random_range(7..=12),
        min_power_s1: Some(rng.random_range(-0.0011..0.5)),
    };
    // occasionally drop quantities as an early-ending run would
    let mut summary = summary;
    match rng.random_range(0..10) {
        0 => {
            summary.stance2 = None;
            summary.min_y_s2 = None;
        }
        1 => {
            summary.theta_td2 = None;
            summary.flight1 = None;
            summary.period1 = None;
        }
        _ => {}
    }
    (summary, ConstraintContext { theta_0, l0 })
}

/// The printed inequalities, one per constraint, written out directly.
/// A quantity the run never produced makes its inequality fail.
pub fn literal(case: CaseStudy, s: &TrajectorySummary, ctx: &ConstraintContext) -> Vec<bool> {
    let eps = 1.290f64.to_radians();
    let td1 = s.theta_td1;
    let holds = |o: Option<bool>| o.unwrap_or(false);
    let s1 = s.stance1;
    let s2 = s.stance2;
    let f1 = s.flight1;
    let mut v = vec![
        holds(s.theta_td2.map(|td2| td1.min(td2) > 0.45)),
        holds(s.theta_td2.map(|td2| match case {
            CaseStudy::TouchdownAngle => (ctx.theta_0 - td2).abs() < eps,
            CaseStudy::Energy => (ctx.theta_0 - td2).abs().to_degrees() < 0.859,
        })),
        holds(s.theta_td2.map(|td2| td1.max(td2) < 1.48)),
        holds(s1.map(|s| s.y_mid < 0.85 * s.y_start)),
        holds(s1.map(|s| s.y_mid < 0.85 * s.y_end)),
        holds(s1.map(|s| s.x_end - s.x_start > 0.0)),
        holds(s.min_y_s1.map(|y| y > 0.0)),
        holds(f1.map(|f| match case {
            CaseStudy::TouchdownAngle => f.dx.abs() - 4.0 * ctx.l0 < 0.0,
            CaseStudy::Energy => 5.0 * (f.dx.abs() - 4.0 * ctx.l0) < 0.0,
        })),
        holds(s.min_y_s2.map(|y| y > 0.0)),
        holds(s.min_stance_dx.map(|dx| dx >= 1e-3)),
        holds(s1.map(|s| s.x_dot_end > 0.0)),
        holds(s1.map(|s| s.y_dot_end > 0.0)),
        holds(s1.map(|s| s.y_dot_end < 5.0)),
        holds(s1.map(|s| s.symmetry < 0.3)),
        holds(s2.map(|s| s.x_dot_end > 0.0)),
        holds(s2.map(|s| s.y_dot_end > 0.0)),
        holds(s2.map(|s| s.y_dot_end < 5.0)),
        holds(s2.map(|s| s.symmetry < 0.3)),
        holds(f1.map(|f| f.leg_rotation > PI)),
        holds(f1.map(|f| f.leg_rotation < TAU)),
        holds(s.period1.map(|t| t > 1.0 / 15.0)),
        holds(s.period1.map(|t| t < 2.0)),
        s.n_cycles >= 8,
    ];
    if case == CaseStudy::Energy {
        v.push(holds(s.min_power_s1.map(|p| -0.001 - p < 0.0)));
    }
    v
}
