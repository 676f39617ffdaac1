//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The end-to-end criteria run the optimizer at desk scale (population 32,
//! at most 100 iterations, 8 workers) and take a few minutes.

use std::f64::consts::FRAC_PI_2;
use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tdslip::catalog::Catalog;
use tdslip::control::Controller;
use tdslip::dynamics::{stance_energy, StanceState};
use tdslip::eval::{
    constraints, evaluate_params, net_violation, perturb_touchdown, validate_monte_carlo, write_monte_carlo,
    CaseStudy, EvalReport, MonteCarloStats, NoiseSpec, DEFAULT_EPSILON,
};
use tdslip::exec::Executor;
use tdslip::mdpso::{
    best_design, optimize, write_history, Dimension, DesignProblem, EvalIndex, OptimizationResult, Scored,
    SearchSpace, SwarmConfig,
};
use tdslip::model::{
    build_system, build_system_unchecked, leg_stiffness, relative_stiffness, DesignVector, VarKind, GRAVITY,
};
use tdslip::sim::{simulate, simulate_from, HybridState, SimConfig, Trajectory};

mod common;

/// Seed shared by both case studies and their validation.
const SEED: u64 = 1;
const WORKERS: usize = 8;
const MC_RUNS: usize = 100;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn stiffness() -> Outcome {
    let k1 = leg_stiffness(0.0100, 0.00425, 1.173e9, 0.0300).unwrap();
    let k2 = leg_stiffness(0.00301, 0.00717, 3.133e8, 0.0176).unwrap();
    let pass = rel(k1, 1769.0) <= 5e-3 && rel(k2, 3382.0) <= 5e-3;
    outcome(pass, format!("k0 = {k1:.1} and {k2:.1} N/m"))
}

fn relative_stiffness_band() -> Outcome {
    // masses implied by the reported k_rel, m = k0 l0 / (k_rel g)
    let m1 = 1769.0 * 0.0600 / (12.0 * GRAVITY);
    let m2 = 3382.0 * 0.0352 / (16.0 * GRAVITY);
    let k1 = leg_stiffness(0.0100, 0.00425, 1.173e9, 0.0300).unwrap();
    let k2 = leg_stiffness(0.00301, 0.00717, 3.133e8, 0.0176).unwrap();
    let r1 = relative_stiffness(k1, 0.0600, (m1 * 1e3).round() / 1e3);
    let r2 = relative_stiffness(k2, 0.0352, (m2 * 1e3).round() / 1e3);
    let band = |r: f64| (7.0..=30.0).contains(&r);
    let pass = rel(r1, 12.0) <= 0.05 && rel(r2, 16.0) <= 0.05 && band(r1) && band(r2);
    outcome(pass, format!("k_rel = {r1:.2} and {r2:.2} at m = {m1:.3}, {m2:.3} kg"))
}

fn noise_calibration() -> Outcome {
    let noise = NoiseSpec::new(2024);
    let n = 100_000u64;
    let inside = (0..n)
        .filter(|&k| perturb_touchdown(0.0, &noise, k).abs() <= 3f64.to_radians())
        .count();
    let p = inside as f64 / n as f64;
    outcome((p - 0.98).abs() <= 0.005, format!("P(|d| <= 3 deg) = {p:.4}"))
}

fn conservative_params() -> tdslip::model::SystemParams {
    let mut p = build_system_unchecked(&DesignVector::reference_case1(), &Catalog::builtin()).unwrap();
    p.leg_damping = 0.0;
    p.motor.torque_constant = 0.0;
    p.motor.damping = 0.0;
    p
}

fn idle_controller() -> Controller {
    let mut d = DesignVector::reference_case1();
    d.stance_coeffs = [0.0; 6];
    d.flight_on_time = 0.0;
    Controller::from_design(&d, 3.0)
}

fn physics_oracles() -> Outcome {
    let config = SimConfig::default();
    let p = conservative_params();

    // (a) energy over one full unactuated, undamped stance
    let init = StanceState {
        theta: 70f64.to_radians(),
        theta_dot: 6.0,
        zeta: p.l0,
        zeta_dot: -0.8,
        current: 0.0,
        foot_x: 0.0,
    };
    let traj = simulate_from(&p, &idle_controller(), init, &config);
    let stance = traj.stances().next().unwrap();
    let energy_of = |s: &HybridState| match s {
        HybridState::Stance(s) => stance_energy(&s.to_vec(), &p),
        HybridState::Flight(_) => f64::NAN,
    };
    let e0 = energy_of(&stance.start_state);
    let mut drift: f64 = 0.0;
    for k in 0..=400 {
        let t = stance.t_start() + stance.duration() * k as f64 / 400.0;
        drift = drift.max(rel(energy_of(&stance.state_at(t).unwrap()), e0));
    }

    // (b) free flight of a vertical hopper against the closed form
    let mut hop = p.clone();
    hop.initial.theta_dot_0 = 0.0;
    let drop = StanceState {
        theta: FRAC_PI_2,
        theta_dot: 0.0,
        zeta: p.l0,
        zeta_dot: -3.0,
        current: 0.0,
        foot_x: 0.0,
    };
    let traj = simulate_from(&hop, &idle_controller(), drop, &SimConfig { max_cycles: 2, ..config });
    let flight = traj.flights().next().unwrap();
    let (x0, y0) = flight.start_state.position();
    let (vx, vy) = flight.start_state.velocity();
    let mut projectile: f64 = 0.0;
    for k in 0..=500 {
        let tau = 0.5 * k as f64 / 500.0;
        let (x, y) = flight.state_at(flight.t_start() + tau).unwrap().position();
        projectile = projectile
            .max((x - x0 - vx * tau).abs())
            .max((y - y0 - vy * tau + 0.5 * GRAVITY * tau * tau).abs());
    }

    // (c) position and velocity continuity across every event
    let design = DesignVector::reference_case1();
    let params = build_system_unchecked(&design, &Catalog::builtin()).unwrap();
    let run = simulate(&params, &design, params.initial.theta_0, &config);
    let jump = max_event_jump(&run);

    let pass = drift <= 1e-6 && flight.duration() >= 0.5 && projectile <= 1e-8 && jump <= 1e-10;
    outcome(
        pass,
        format!(
            "energy drift {drift:.1e}, projectile error {projectile:.1e} m over {:.2} s, event jump {jump:.1e} over {} events",
            flight.duration(),
            run.segments.len() - 1
        ),
    )
}

fn max_event_jump(traj: &Trajectory) -> f64 {
    let mut worst: f64 = 0.0;
    for pair in traj.segments.windows(2) {
        let (a, b) = (&pair[0].end_state, &pair[1].start_state);
        let (pa, pb) = (a.position(), b.position());
        let (va, vb) = (a.velocity(), b.velocity());
        for (u, v) in [(pa.0, pb.0), (pa.1, pb.1), (va.0, vb.0), (va.1, vb.1)] {
            worst = worst.max((u - v).abs());
        }
    }
    worst
}

fn transcription_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut disagreements = 0;
    let mut feasible = 0;
    for case in [CaseStudy::TouchdownAngle, CaseStudy::Energy] {
        for _ in 0..100 {
            let (summary, ctx) = common::random_summary(&mut rng);
            let g = constraints(case, &summary, &ctx);
            let lit = common::literal(case, &summary, &ctx);
            let verdict = net_violation(&g) == 0.0;
            disagreements += (verdict != lit.iter().all(|b| *b)) as usize;
            disagreements += g.iter().zip(&lit).filter(|(c, ok)| (c.residual <= 0.0) != **ok).count();
            feasible += verdict as usize;
        }
    }
    outcome(
        disagreements == 0,
        format!("{disagreements} disagreements on 200 summaries ({feasible} feasible)"),
    )
}

#[derive(Clone)]
struct Plain(f64, f64);

impl Scored for Plain {
    fn objective(&self) -> f64 {
        self.0
    }

    fn net_violation(&self) -> f64 {
        self.1
    }
}

fn optimizer_sanity() -> Outcome {
    let cont = |name: &str| Dimension {
        name: name.into(),
        kind: VarKind::Continuous,
        lower: -5.0,
        upper: 5.0,
    };
    let mut dims = vec![cont("x1"), cont("x2"), cont("x3"), cont("n")];
    dims[3].kind = VarKind::Integer;
    let sphere_space = SearchSpace::new(dims).unwrap();
    let exec = Executor::sequential();
    let mut finals: Vec<f64> = (0..20)
        .map(|seed| {
            let config = SwarmConfig {
                population: 32,
                max_iterations: 200,
                stall_feasible: 200,
                seed,
                ..SwarmConfig::default()
            };
            let f = |x: &[f64], _: EvalIndex| Plain(x.iter().map(|v| v * v).sum(), 0.0);
            optimize(f, &sphere_space, &config, &exec).unwrap().best.objective
        })
        .collect();
    finals.sort_by(f64::total_cmp);
    let median = 0.5 * (finals[9] + finals[10]);

    let line = SearchSpace::new(vec![cont("x")]).unwrap();
    let config = SwarmConfig {
        population: 32,
        max_iterations: 200,
        stall_feasible: 30,
        seed: 3,
        ..SwarmConfig::default()
    };
    let f = |x: &[f64], _: EvalIndex| Plain(x[0] * x[0], (1.0 - x[0]).max(0.0));
    let x_star = optimize(f, &line, &config, &exec).unwrap().best.x[0];

    outcome(
        median < 1e-3 && (x_star - 1.0).abs() <= 1e-3,
        format!("sphere median {median:.1e}, constrained x* = {x_star:.6}"),
    )
}

struct Study {
    result: OptimizationResult<EvalReport>,
    design: DesignVector,
    history_csv: String,
    seconds: f64,
}

fn desk_config() -> SwarmConfig {
    SwarmConfig {
        population: 32,
        max_iterations: 100,
        seed: SEED,
        ..SwarmConfig::default()
    }
}

fn run_study(case: CaseStudy, catalog: &Catalog, exec: &Executor) -> Study {
    let start = Instant::now();
    let result = DesignProblem::new(case, catalog).optimize(&desk_config(), exec).unwrap();
    let design = best_design(&result).unwrap();
    let mut csv = Vec::new();
    write_history(&result.history, &mut csv).unwrap();
    Study {
        result,
        design,
        history_csv: String::from_utf8(csv).unwrap(),
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Violation falls to zero, after which the feasible objective only falls.
fn convergence_pattern(history_csv: &str) -> bool {
    let rows: Vec<Vec<&str>> = history_csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let viol: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    let obj: Vec<Option<f64>> = rows.iter().map(|r| r[1].parse().ok()).collect();
    let violation_falls = viol.windows(2).all(|w| w[1] <= w[0]) && viol.last() == Some(&0.0);
    let first = obj.iter().position(Option::is_some);
    let objective_falls = first.is_some_and(|i| {
        obj[i..]
            .windows(2)
            .all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b <= a))
    });
    violation_falls && objective_falls
}

fn broken_constraints(r: &EvalReport) -> String {
    let names: Vec<String> = r
        .constraints
        .iter()
        .filter(|c| c.residual > 0.0)
        .map(|c| format!("{}={:.3}", c.name, c.residual))
        .collect();
    if names.is_empty() {
        "none".into()
    } else {
        names.join(" ")
    }
}

fn end_to_end_case1(study: &Study) -> Outcome {
    let best = study.result.best.report.as_ref().unwrap();
    let diff = best.theta_diff_deg().unwrap_or(f64::INFINITY);
    let pass = best.feasible && diff <= DEFAULT_EPSILON.to_degrees() && convergence_pattern(&study.history_csv);
    outcome(
        pass,
        format!(
            "feasible {}, theta_diff {diff:.3} deg, violation {:.4}, {} iterations ({:?}), {:.0} s, violated: {}",
            best.feasible,
            best.net_violation,
            study.result.iterations,
            study.result.stop_reason,
            study.seconds,
            broken_constraints(best)
        ),
    )
}

/// Mean first-cycle energy of a design under draws `0..n` of `noise`.
fn mean_energy(design: &DesignVector, noise: &NoiseSpec, catalog: &Catalog, exec: &Executor) -> Option<f64> {
    let params = build_system(design, catalog).unwrap();
    let draws: Vec<u64> = (0..MC_RUNS as u64).collect();
    let sim = SimConfig::default();
    let energies: Vec<Option<f64>> = exec.map(&draws, |_, &k| {
        evaluate_params(&params, design, CaseStudy::Energy, noise, k, &sim).unwrap().energy
    });
    let completed: Vec<f64> = energies.into_iter().flatten().collect();
    (!completed.is_empty()).then(|| completed.iter().sum::<f64>() / completed.len() as f64)
}

fn end_to_end_case2(case1: &Study, case2: &Study, catalog: &Catalog, exec: &Executor) -> Outcome {
    let best = case2.result.best.report.as_ref().unwrap();
    let noise = NoiseSpec::new(SEED);
    let f1 = mean_energy(&case1.design, &noise, catalog, exec);
    let f2 = mean_energy(&case2.design, &noise, catalog, exec);
    let lower = matches!((f1, f2), (Some(a), Some(b)) if b < a);
    let f_best = best.energy.unwrap_or(f64::NAN);
    let in_band = (1e-3..=0.1).contains(&f_best);
    let mj = |v: Option<f64>| v.map_or("none".into(), |e| format!("{:.2} mJ", e * 1e3));
    outcome(
        best.feasible && lower && in_band,
        format!(
            "feasible {}, F = {:.2} mJ, shared-noise mean F case 2 {} vs case 1 {}, {} iterations ({:?}), {:.0} s, violated: {}",
            best.feasible,
            f_best * 1e3,
            mj(f2),
            mj(f1),
            case2.result.iterations,
            case2.result.stop_reason,
            case2.seconds,
            broken_constraints(best)
        ),
    )
}

fn monte_carlo(study: &Study, case: CaseStudy, catalog: &Catalog, exec: &Executor) -> (MonteCarloStats, Vec<String>) {
    let params = build_system(&study.design, catalog).unwrap();
    let stats = validate_monte_carlo(
        &params,
        &study.design,
        case,
        MC_RUNS,
        &NoiseSpec::new(SEED),
        &SimConfig::default(),
        exec,
    )
    .unwrap();
    let mut csv = Vec::new();
    write_monte_carlo(&stats, &mut csv).unwrap();
    let noise_col = String::from_utf8(csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().to_string())
        .collect();
    (stats, noise_col)
}

fn validation_protocol(case1: &Study, case2: &Study, catalog: &Catalog, exec: &Executor) -> Outcome {
    let start = Instant::now();
    let (s1, n1) = monte_carlo(case1, CaseStudy::TouchdownAngle, catalog, exec);
    let (s2, n2) = monte_carlo(case2, CaseStudy::Energy, catalog, exec);
    let pass = s1.runs.len() == MC_RUNS
        && s2.runs.len() == MC_RUNS
        && s1.mean_cycles >= 2.0
        && s2.mean_cycles >= 2.0
        && n1 == n2;
    outcome(
        pass,
        format!(
            "mean/max cycles case 1 {:.2}/{}, case 2 {:.2}/{}, noise columns identical {}, {:.0} s",
            s1.mean_cycles,
            s1.max_cycles,
            s2.mean_cycles,
            s2.max_cycles,
            n1 == n2,
            start.elapsed().as_secs_f64()
        ),
    )
}

/// Serialized result files of a short optimization and a validation.
fn result_files(workers: usize, catalog: &Catalog) -> Vec<u8> {
    let exec = Executor::new(workers);
    let config = SwarmConfig {
        population: 16,
        max_iterations: 6,
        seed: 99,
        ..SwarmConfig::default()
    };
    let result = DesignProblem::new(CaseStudy::Energy, catalog).optimize(&config, &exec).unwrap();
    let design = best_design(&result).unwrap();
    let mut bytes = serde_json::to_vec(&result).unwrap();
    write_history(&result.history, &mut bytes).unwrap();
    bytes.extend(serde_json::to_vec(&design).unwrap());
    let params = build_system(&design, catalog).unwrap();
    let stats = validate_monte_carlo(
        &params,
        &design,
        CaseStudy::Energy,
        20,
        &NoiseSpec::new(99),
        &SimConfig::default(),
        &exec,
    )
    .unwrap();
    write_monte_carlo(&stats, &mut bytes).unwrap();
    bytes
}

fn determinism(catalog: &Catalog) -> Outcome {
    let a = result_files(WORKERS, catalog);
    let b = result_files(WORKERS, catalog);
    let c = result_files(1, catalog);
    outcome(
        a == b && a == c,
        format!(
            "rerun identical {}, 1 vs {WORKERS} workers identical {} ({} bytes)",
            a == b,
            a == c,
            a.len()
        ),
    )
}

fn main() -> ExitCode {
    let catalog = Catalog::builtin();
    let exec = Executor::new(WORKERS);
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, o: Outcome| {
        println!(
            "criterion {n:>2} {}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, name, o));
    };

    report(1, "leg stiffness regression", stiffness());
    report(2, "relative stiffness regression", relative_stiffness_band());
    report(3, "noise calibration", noise_calibration());
    report(4, "physics oracles", physics_oracles());
    report(5, "constraint transcription oracle", transcription_oracle());
    report(6, "optimizer sanity", optimizer_sanity());

    let case1 = run_study(CaseStudy::TouchdownAngle, &catalog, &exec);
    let case2 = run_study(CaseStudy::Energy, &catalog, &exec);
    report(7, "end-to-end case 1", end_to_end_case1(&case1));
    report(8, "end-to-end case 2", end_to_end_case2(&case1, &case2, &catalog, &exec));
    report(9, "validation protocol", validation_protocol(&case1, &case2, &catalog, &exec));
    report(10, "determinism", determinism(&catalog));

    let failed: Vec<u32> = results.iter().filter(|(_, _, o)| !o.pass).map(|(n, _, _)| *n).collect();
    println!(
        "acceptance: {} of {} criteria pass",
        results.len() - failed.len(),
        results.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failing criteria: {failed:?}");
        ExitCode::FAILURE
    }
}

