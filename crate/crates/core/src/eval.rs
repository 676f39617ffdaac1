//! Objectives, constraint residuals, touchdown-angle noise, and Monte-Carlo
//! validation for the two design studies.
//!
//! Every constraint is stored as a residual `r` with `r <= 0` meaning
//! satisfied, divided by the magnitude of its threshold (or by `l0` for
//! position bounds at zero). A constraint whose ingredients are missing
//! because the run ended early gets [`MISSING_PENALTY`].

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::model::{build_system, DesignVector, SystemParams};
use crate::sim::{simulate, EventKind, PhaseKind, PhaseSegment, SimConfig, Termination, Trajectory};

/// Residual assigned to a constraint that cannot be evaluated.
pub const MISSING_PENALTY: f64 = 10.0;
/// Objective reported when the objective cannot be evaluated.
pub const SENTINEL_OBJECTIVE: f64 = 1.0e3;
/// Touchdown-angle noise standard deviation (1.290 degrees).
pub const DEFAULT_EPSILON: f64 = 1.290 * PI / 180.0;
/// Touchdown-angle repeatability threshold of the energy study (0.859 deg).
pub const CASE2_ANGLE_THRESHOLD: f64 = 0.859 * PI / 180.0;
/// Power resampling step for the energy integral (s).
pub const ENERGY_DT: f64 = 1e-4;

/// Which design study is being scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum CaseStudy {
    /// Minimise the change in touchdown angle over the first cycle.
    TouchdownAngle = 1,
    /// Minimise the electrical energy of the first cycle.
    Energy = 2,
}

impl TryFrom<u8> for CaseStudy {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(CaseStudy::TouchdownAngle),
            2 => Ok(CaseStudy::Energy),
            other => Err(Error::Config(format!("case must be 1 or 2, got {other}"))),
        }
    }
}

impl From<CaseStudy> for u8 {
    fn from(c: CaseStudy) -> u8 {
        c as u8
    }
}

/// Gaussian touchdown-angle perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation (rad).
    pub epsilon: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            seed,
        }
    }

    /// Draw number `draw_index` of the stream seeded by `seed`. Each index has
    /// its own ChaCha stream, so draws do not depend on evaluation order.
    pub fn draw(&self, draw_index: u64) -> f64 {
        if self.epsilon == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(draw_index);
        Normal::new(0.0, self.epsilon)
            .expect("noise standard deviation is finite and non-negative")
            .sample(&mut rng)
    }
}

/// `theta_0 + N(0, eps^2)` for one draw.
pub fn perturb_touchdown(theta_0: f64, noise: &NoiseSpec, draw_index: u64) -> f64 {
    theta_0 + noise.draw(draw_index)
}

/// Boundary and extreme values of one completed stance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StanceSummary {
    pub y_start: f64,
    pub y_mid: f64,
    pub y_end: f64,
    pub x_start: f64,
    pub x_end: f64,
    pub x_dot_start: f64,
    pub x_dot_end: f64,
    pub y_dot_start: f64,
    pub y_dot_end: f64,
    pub min_y: f64,
    pub symmetry: f64,
}

impl StanceSummary {
    pub fn dx(&self) -> f64 {
        self.x_end - self.x_start
    }
}

/// Displacement and leg rotation over one flight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightSummary {
    pub dx: f64,
    pub leg_rotation: f64,
}

/// Everything the constraints read from a trajectory. `None` marks a
/// quantity the run did not reach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub theta_td1: f64,
    pub theta_td2: Option<f64>,
    pub stance1: Option<StanceSummary>,
    pub stance2: Option<StanceSummary>,
    /// Minimum hip height over each stance that started, complete or not.
    pub min_y_s1: Option<f64>,
    pub min_y_s2: Option<f64>,
    pub flight1: Option<FlightSummary>,
    /// Smallest forward displacement over all completed stances.
    pub min_stance_dx: Option<f64>,
    /// Duration of the first stance + flight cycle.
    pub period1: Option<f64>,
    pub n_cycles: usize,
    /// Smallest electrical power `V i_a` sampled during the first stance.
    pub min_power_s1: Option<f64>,
}

/// Velocity symmetry of a stance,
/// `(1 - xd_E/xd_S)^2 + (1 - |yd_E|/|yd_S|)^2`; infinite for a zero start
/// velocity component.
pub fn symmetry_from(x_dot_start: f64, x_dot_end: f64, y_dot_start: f64, y_dot_end: f64) -> f64 {
    if x_dot_start == 0.0 || y_dot_start == 0.0 {
        return f64::INFINITY;
    }
    (1.0 - x_dot_end / x_dot_start).powi(2) + (1.0 - y_dot_end.abs() / y_dot_start.abs()).powi(2)
}

/// Symmetry of a stance segment (see [`symmetry_from`]).
pub fn symmetry(stance: &PhaseSegment) -> f64 {
    let (xs, ys) = stance.start_state.velocity();
    let (xe, ye) = stance.end_state.velocity();
    symmetry_from(xs, xe, ys, ye)
}

fn summarize_stance(seg: &PhaseSegment) -> Result<Option<StanceSummary>> {
    if seg.end_event.kind != EventKind::Liftoff {
        return Ok(None);
    }
    let (x_start, y_start) = seg.start_state.position();
    let (x_end, y_end) = seg.end_state.position();
    let (x_dot_start, y_dot_start) = seg.start_state.velocity();
    let (x_dot_end, y_dot_end) = seg.end_state.velocity();
    let mid = seg.state_at(0.5 * (seg.t_start() + seg.t_end()))?;
    Ok(Some(StanceSummary {
        y_start,
        y_mid: mid.position().1,
        y_end,
        x_start,
        x_end,
        x_dot_start,
        x_dot_end,
        y_dot_start,
        y_dot_end,
        min_y: min_height(seg),
        symmetry: symmetry(seg),
    }))
}

fn min_height(seg: &PhaseSegment) -> f64 {
    seg.samples()
        .iter()
        .map(|(_, s, _)| s.position().1)
        .fold(f64::INFINITY, f64::min)
}

/// Extracts the constraint ingredients from a trajectory.
pub fn summarize(traj: &Trajectory) -> Result<TrajectorySummary> {
    let stances: Vec<&PhaseSegment> = traj.stances().collect();
    let flights: Vec<&PhaseSegment> = traj.flights().collect();
    let stance1 = stances.first().map(|s| summarize_stance(s)).transpose()?.flatten();
    let stance2 = stances.get(1).map(|s| summarize_stance(s)).transpose()?.flatten();

    let flight1 = flights
        .first()
        .filter(|f| f.end_event.kind == EventKind::Touchdown)
        .map(|f| FlightSummary {
            dx: f.end_state.position().0 - f.start_state.position().0,
            leg_rotation: f.end_state.leg_angle() - f.start_state.leg_angle(),
        });

    let completed_dx = stances
        .iter()
        .filter(|s| s.end_event.kind == EventKind::Liftoff)
        .map(|s| s.end_state.position().0 - s.start_state.position().0);
    let min_stance_dx = completed_dx.fold(None, |acc: Option<f64>, dx| Some(acc.map_or(dx, |a| a.min(dx))));

    let min_power_s1 = stances.first().map(|s| {
        s.samples()
            .iter()
            .map(|(_, st, v)| v * st.current())
            .fold(f64::INFINITY, f64::min)
    });

    Ok(TrajectorySummary {
        theta_td1: traj.touchdown_angles[0],
        theta_td2: traj.touchdown_angles.get(1).copied(),
        stance1,
        stance2,
        min_y_s1: stances.first().map(|s| min_height(s)),
        min_y_s2: stances.get(1).map(|s| min_height(s)),
        flight1,
        min_stance_dx,
        period1: flight1.map(|_| flights[0].t_end() - stances[0].t_start()),
        n_cycles: traj.n_cycles,
        min_power_s1,
    })
}

/// Trapezoidal integral over `(t, value)` samples.
pub fn trapezoid(samples: &[(f64, f64)]) -> f64 {
    samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum()
}

/// Electrical power `V i_a` over one segment on a grid no coarser than
/// `dt`, with nodes on the segment ends and on voltage switch times. The
/// voltage is evaluated inside each smooth piece so a switch is not smeared
/// across one interval.
pub fn power_samples(seg: &PhaseSegment, dt: f64) -> Result<Vec<(f64, f64)>> {
    let mut knots = vec![seg.t_start()];
    knots.extend(seg.breakpoints());
    knots.push(seg.t_end());
    let mut out: Vec<(f64, f64)> = Vec::new();
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let n = ((b - a) / dt).ceil().max(1.0) as usize;
        let piece_voltage = |t: f64| match seg.kind {
            PhaseKind::Stance => seg.voltage_at(t),
            PhaseKind::Flight => seg.voltage_at(0.5 * (a + b)),
        };
        for k in 0..=n {
            let t = if k == n { b } else { a + (b - a) * k as f64 / n as f64 };
            let current = seg.state_at(t)?.current();
            // a switch time appears twice: once with each side's voltage
            out.push((t, piece_voltage(t) * current));
        }
    }
    Ok(out)
}

/// Electrical energy `integral V i_a dt` drawn over cycle `cycle_index`
/// (0-based stance + following flight).
pub fn energy(traj: &Trajectory, cycle_index: usize) -> Result<f64> {
    let stance = traj
        .stances()
        .nth(cycle_index)
        .ok_or_else(|| Error::Domain(format!("cycle {cycle_index} has no stance")))?;
    let flight = traj
        .flights()
        .nth(cycle_index)
        .ok_or_else(|| Error::Domain(format!("cycle {cycle_index} has no flight")))?;
    Ok(trapezoid(&power_samples(stance, ENERGY_DT)?) + trapezoid(&power_samples(flight, ENERGY_DT)?))
}

/// One named residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintValue {
    pub name: String,
    pub residual: f64,
}

/// Inputs to the constraint functions besides the summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintContext {
    /// Nominal touchdown angle (rad).
    pub theta_0: f64,
    pub l0: f64,
}

fn or_missing(v: Option<f64>) -> f64 {
    match v {
        Some(r) if r.is_finite() => r,
        _ => MISSING_PENALTY,
    }
}

/// Residuals `g1 .. g23` of the touchdown-angle study.
pub fn constraints_case1(summary: &TrajectorySummary, ctx: &ConstraintContext) -> Vec<ConstraintValue> {
    constraint_vector(summary, ctx, CaseStudy::TouchdownAngle)
}

/// Residuals of the energy study: `g2` uses the tighter 0.859 deg threshold,
/// `g8` is scaled by 5, and `g24` bounds the stance-1 regenerative power.
pub fn constraints_case2(summary: &TrajectorySummary, ctx: &ConstraintContext) -> Vec<ConstraintValue> {
    constraint_vector(summary, ctx, CaseStudy::Energy)
}

pub fn constraints(case: CaseStudy, summary: &TrajectorySummary, ctx: &ConstraintContext) -> Vec<ConstraintValue> {
    constraint_vector(summary, ctx, case)
}

fn constraint_vector(s: &TrajectorySummary, ctx: &ConstraintContext, case: CaseStudy) -> Vec<ConstraintValue> {
    let l0 = ctx.l0;
    let td1 = s.theta_td1;
    let td2 = s.theta_td2;
    let theta_diff = td2.map(|t| (ctx.theta_0 - t).abs());
    let s1 = s.stance1.as_ref();
    let s2 = s.stance2.as_ref();
    let f1 = s.flight1.as_ref();
    let (angle_threshold, g8_scale) = match case {
        CaseStudy::TouchdownAngle => (DEFAULT_EPSILON, 1.0),
        CaseStudy::Energy => (CASE2_ANGLE_THRESHOLD, 5.0),
    };

    // (raw residual, scale): residuals are divided by their threshold
    // magnitude so no single unit dominates the net violation
    let y_scale = |y: f64| if y > 0.0 { 0.85 * y } else { 1.0 };
    let mut g: Vec<(Option<f64>, f64)> = vec![
        (td2.map(|t2| 0.45 - td1.min(t2)), 0.45),
        (theta_diff.map(|d| d - angle_threshold), angle_threshold),
        (td2.map(|t2| td1.max(t2) - 1.48), 1.48),
        (s1.map(|s| (s.y_mid - 0.85 * s.y_start) / y_scale(s.y_start)), 1.0),
        (s1.map(|s| (s.y_mid - 0.85 * s.y_end) / y_scale(s.y_end)), 1.0),
        (s1.map(|s| -(s.x_end - s.x_start)), l0),
        (s.min_y_s1.map(|y| -y), l0),
        (f1.map(|f| g8_scale * (f.dx.abs() - 4.0 * l0)), 4.0 * l0),
        (s.min_y_s2.map(|y| -y), l0),
        (s.min_stance_dx.map(|dx| 1e-3 - dx), 1e-3),
        (s1.map(|s| -s.x_dot_end), 1.0),
        (s1.map(|s| -s.y_dot_end), 1.0),
        (s1.map(|s| s.y_dot_end - 5.0), 5.0),
        (s1.map(|s| s.symmetry - 0.3), 0.3),
        (s2.map(|s| -s.x_dot_end), 1.0),
        (s2.map(|s| -s.y_dot_end), 1.0),
        (s2.map(|s| s.y_dot_end - 5.0), 5.0),
        (s2.map(|s| s.symmetry - 0.3), 0.3),
        (f1.map(|f| PI - f.leg_rotation), PI),
        (f1.map(|f| f.leg_rotation - TAU), TAU),
        (s.period1.map(|t| 1.0 / 15.0 - t), 1.0 / 15.0),
        (s.period1.map(|t| t - 2.0), 2.0),
        (Some(8.0 - s.n_cycles as f64), 8.0),
    ];
    if case == CaseStudy::Energy {
        g.push((s.min_power_s1.map(|p| -0.001 - p), 0.001));
    }
    g.into_iter()
        .enumerate()
        .map(|(i, (r, scale))| ConstraintValue {
            name: format!("g{}", i + 1),
            residual: or_missing(r.map(|r| r / scale)),
        })
        .collect()
}

/// `sum max(0, r)` over residuals.
pub fn net_violation(g: &[ConstraintValue]) -> f64 {
    g.iter().map(|c| c.residual.max(0.0)).sum()
}

/// Scored evaluation of one design under one noise draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub case: CaseStudy,
    pub objective: f64,
    pub constraints: Vec<ConstraintValue>,
    pub feasible: bool,
    pub net_violation: f64,
    /// Nominal touchdown angle (rad).
    pub theta_0: f64,
    pub theta_td1: f64,
    pub theta_td2: Option<f64>,
    /// `|theta_0 - theta_td2|` (rad).
    pub theta_diff: Option<f64>,
    /// Electrical energy of the first cycle (J).
    pub energy: Option<f64>,
    pub n_cycles: usize,
    pub termination: Termination,
    pub summary: TrajectorySummary,
}

impl EvalReport {
    pub fn theta_diff_deg(&self) -> Option<f64> {
        self.theta_diff.map(f64::to_degrees)
    }
}

/// `|theta_0 - theta_td2|`, or the sentinel when the second touchdown never
/// happened.
pub fn objective_case1(theta_0: f64, summary: &TrajectorySummary) -> f64 {
    summary
        .theta_td2
        .map_or(SENTINEL_OBJECTIVE, |t| (theta_0 - t).abs())
}

/// First-cycle energy, or the sentinel when the cycle was not completed.
pub fn objective_case2(energy: Option<f64>) -> f64 {
    energy.filter(|e| e.is_finite()).unwrap_or(SENTINEL_OBJECTIVE)
}

/// Scores an already simulated trajectory.
pub fn score(case: CaseStudy, traj: &Trajectory, params: &SystemParams) -> Result<EvalReport> {
    let summary = summarize(traj)?;
    let theta_0 = params.initial.theta_0;
    let ctx = ConstraintContext { theta_0, l0: params.l0 };
    let constraints = constraints(case, &summary, &ctx);
    let violation = net_violation(&constraints);
    let energy = if summary.flight1.is_some() {
        Some(energy(traj, 0)?)
    } else {
        None
    };
    let objective = match case {
        CaseStudy::TouchdownAngle => objective_case1(theta_0, &summary),
        CaseStudy::Energy => objective_case2(energy),
    };
    Ok(EvalReport {
        case,
        objective,
        feasible: violation == 0.0,
        net_violation: violation,
        constraints,
        theta_0,
        theta_td1: summary.theta_td1,
        theta_td2: summary.theta_td2,
        theta_diff: summary.theta_td2.map(|t| (theta_0 - t).abs()),
        energy,
        n_cycles: traj.n_cycles,
        termination: traj.termination,
        summary,
    })
}

/// Builds, perturbs, simulates, and scores one design. Errors only on
/// designs outside the bounds or an unknown motor label.
pub fn evaluate(
    design: &DesignVector,
    case: CaseStudy,
    noise: &NoiseSpec,
    draw_index: u64,
    catalog: &Catalog,
    sim_config: &SimConfig,
) -> Result<EvalReport> {
    let params = build_system(design, catalog)?;
    evaluate_params(&params, design, case, noise, draw_index, sim_config)
}

/// [`evaluate`] on already built parameters (no bound check).
pub fn evaluate_params(
    params: &SystemParams,
    design: &DesignVector,
    case: CaseStudy,
    noise: &NoiseSpec,
    draw_index: u64,
    sim_config: &SimConfig,
) -> Result<EvalReport> {
    let theta_td1 = perturb_touchdown(params.initial.theta_0, noise, draw_index);
    // only the first two cycles are read in full
    let config = SimConfig {
        dense_segments: sim_config.dense_segments.min(4),
        ..*sim_config
    };
    let traj = simulate(params, design, theta_td1, &config);
    score(case, &traj, params)
}

/// One Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    /// Noise added to the nominal touchdown angle (deg).
    pub noise_deg: f64,
    pub theta_diff_deg: Option<f64>,
    pub n_cycles: usize,
    pub energy_j: Option<f64>,
    pub feasible: bool,
}

/// Per-run records and aggregates of a validation campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloStats {
    pub runs: Vec<RunRecord>,
    pub mean_theta_diff_deg: f64,
    pub std_theta_diff_deg: f64,
    pub max_theta_diff_deg: f64,
    pub mean_cycles: f64,
    pub std_cycles: f64,
    pub max_cycles: usize,
    pub mean_energy_j: f64,
    pub feasible_fraction: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Simulates `n` noisy copies of a design. Draw `k` uses stream `k` of
/// `noise.seed`, so two designs validated with the same seed see the same
/// noise set.
pub fn validate_monte_carlo(
    params: &SystemParams,
    design: &DesignVector,
    case: CaseStudy,
    n: usize,
    noise: &NoiseSpec,
    sim_config: &SimConfig,
    exec: &Executor,
) -> Result<MonteCarloStats> {
    if n == 0 {
        return Err(Error::Config("validation needs at least one run".into()));
    }
    let indices: Vec<u64> = (0..n as u64).collect();
    let reports = exec.map(&indices, |_, &k| evaluate_params(params, design, case, noise, k, sim_config));
    let mut runs = Vec::with_capacity(n);
    for (k, report) in reports.into_iter().enumerate() {
        let r = report?;
        runs.push(RunRecord {
            run: k,
            noise_deg: (r.theta_td1 - r.theta_0).to_degrees(),
            theta_diff_deg: r.theta_diff_deg(),
            n_cycles: r.n_cycles,
            energy_j: r.energy,
            feasible: r.feasible,
        });
    }
    let diffs: Vec<f64> = runs.iter().filter_map(|r| r.theta_diff_deg).collect();
    let cycles: Vec<f64> = runs.iter().map(|r| r.n_cycles as f64).collect();
    let energies: Vec<f64> = runs.iter().filter_map(|r| r.energy_j).collect();
    let (mean_theta_diff_deg, std_theta_diff_deg) = mean_std(&diffs);
    let (mean_cycles, std_cycles) = mean_std(&cycles);
    Ok(MonteCarloStats {
        mean_theta_diff_deg,
        std_theta_diff_deg,
        max_theta_diff_deg: diffs.iter().copied().fold(f64::NAN, f64::max),
        mean_cycles,
        std_cycles,
        max_cycles: runs.iter().map(|r| r.n_cycles).max().unwrap_or(0),
        mean_energy_j: mean_std(&energies).0,
        feasible_fraction: runs.iter().filter(|r| r.feasible).count() as f64 / n as f64,
        runs,
    })
}

/// Writes `run,theta_diff_deg,n_cycles,energy_J,noise_deg`; missing values
/// are empty. The trailing noise column lets two validations be checked for
/// a shared noise set.
pub fn write_monte_carlo<W: std::io::Write>(stats: &MonteCarloStats, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["run", "theta_diff_deg", "n_cycles", "energy_J", "noise_deg"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in &stats.runs {
        wtr.write_record([
            r.run.to_string(),
            opt(r.theta_diff_deg),
            r.n_cycles.to_string(),
            opt(r.energy_j),
            r.noise_deg.to_string(),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}
