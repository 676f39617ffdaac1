use std::path::Path;

use serde::Serialize;
use tdslip::catalog::{load_catalog, Catalog};
use tdslip::eval::{validate_monte_carlo, write_monte_carlo, EvalReport, MonteCarloStats};
use tdslip::exec::Executor;
use tdslip::mdpso::{best_design, write_history, DesignProblem, StopReason, REQUIRED_CYCLES};
use tdslip::model::{build_system_unchecked, DesignVector, SystemParams};
use tdslip::sim::{self, resample, HybridState, PhaseKind};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::OutputSet;

pub const TRAJECTORY_HEADER: &str = "t,phase,x,y,x_dot,y_dot,theta,zeta,i_a,V";
pub const SUMMARY_HEADER: &str = "runs,mean_theta_diff_deg,std_theta_diff_deg,max_theta_diff_deg,\
mean_cycles,std_cycles,max_cycles,mean_energy_J,feasible_fraction";

pub fn read_design(path: &Path) -> Result<DesignVector, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read design {}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Err(CliError::Validation(format!("design file {} is empty", path.display())));
    }
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Builds the system for a user-supplied design. Out-of-bounds values are
/// allowed with a warning so reference designs can be replayed; an unknown
/// motor label or non-physical geometry is rejected.
fn build(design: &DesignVector, catalog: &Catalog) -> Result<SystemParams, CliError> {
    if let Err(e) = design.validate() {
        eprintln!("warning: design outside the search bounds ({e})");
    }
    build_system_unchecked(design, catalog).map_err(CliError::validation)
}

fn workers_note(exec: &Executor) {
    eprintln!("using {} worker(s)", exec.workers());
}

fn report_written(paths: &[std::path::PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn simulate_outputs(cfg: &RunConfig, design: &DesignVector) -> Result<OutputSet, CliError> {
    let catalog = cfg.catalog()?;
    let case = cfg.case_study()?;
    let params = build(design, &catalog)?;
    let sim_cfg = cfg.sim();
    let traj = sim::simulate(&params, design, params.initial.theta_0, &sim_cfg);
    let report = tdslip::eval::score(case, &traj, &params).map_err(CliError::runtime)?;
    let samples = resample(&traj, cfg.sample_dt).map_err(CliError::runtime)?;

    let mut csv = String::with_capacity(samples.len() * 120);
    csv.push_str(TRAJECTORY_HEADER);
    csv.push('\n');
    for s in &samples {
        let (x, y) = s.state.position();
        let (xd, yd) = s.state.velocity();
        let zeta = match s.state {
            HybridState::Stance(st) => st.zeta,
            HybridState::Flight(_) => params.l0,
        };
        let phase = match s.phase {
            PhaseKind::Stance => "stance",
            PhaseKind::Flight => "flight",
        };
        csv.push_str(&format!(
            "{},{phase},{x},{y},{xd},{yd},{},{zeta},{},{}\n",
            s.t,
            s.state.leg_angle(),
            s.state.current(),
            s.voltage
        ));
    }
    let mut out = OutputSet::default();
    out.add("trajectory.csv", csv.into_bytes());
    out.add_json("report.json", &report)?;
    Ok(out)
}

pub fn simulate(cfg: &RunConfig, design_path: &Path) -> Result<(), CliError> {
    let design = read_design(design_path)?;
    let out = simulate_outputs(cfg, &design)?;
    report_written(&out.commit(&cfg.out)?);
    Ok(())
}

#[derive(Debug, Serialize)]
struct OptimizationSummary<'a> {
    seed: u64,
    case: u8,
    iterations: usize,
    evaluations: usize,
    stop_reason: StopReason,
    feasible: bool,
    best: Option<&'a EvalReport>,
}

pub fn optimize(cfg: &RunConfig) -> Result<(), CliError> {
    let catalog = cfg.catalog()?;
    let case = cfg.case_study()?;
    let mut problem = DesignProblem::new(case, &catalog);
    problem.sim = sim::SimConfig {
        max_cycles: cfg.max_cycles.min(REQUIRED_CYCLES),
        ..cfg.sim()
    };
    problem.epsilon = cfg.noise().epsilon;
    let exec = Executor::new(cfg.workers);
    workers_note(&exec);
    let swarm = cfg.swarm();
    let result = problem.optimize(&swarm, &exec).map_err(CliError::runtime)?;
    let design = best_design(&result).map_err(CliError::runtime)?;

    let mut history = Vec::new();
    write_history(&result.history, &mut history).map_err(CliError::runtime)?;
    let mut out = OutputSet::default();
    out.add_json("best_design.json", &design)?;
    out.add("history.csv", history);
    out.add_json(
        "optimization.json",
        &OptimizationSummary {
            seed: result.seed,
            case: case.into(),
            iterations: result.iterations,
            evaluations: result.evaluations,
            stop_reason: result.stop_reason,
            feasible: result.found_feasible(),
            best: result.best.report.as_ref(),
        },
    )?;
    report_written(&out.commit(&cfg.out)?);
    eprintln!(
        "stopped after {} iterations ({:?}); best is {}",
        result.iterations,
        result.stop_reason,
        if result.found_feasible() { "feasible" } else { "infeasible" }
    );
    Ok(())
}

fn fmt_finite(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

pub fn summary_csv(stats: &MonteCarloStats) -> String {
    format!(
        "{SUMMARY_HEADER}\n{},{},{},{},{},{},{},{},{}\n",
        stats.runs.len(),
        fmt_finite(stats.mean_theta_diff_deg),
        fmt_finite(stats.std_theta_diff_deg),
        fmt_finite(stats.max_theta_diff_deg),
        fmt_finite(stats.mean_cycles),
        fmt_finite(stats.std_cycles),
        stats.max_cycles,
        fmt_finite(stats.mean_energy_j),
        stats.feasible_fraction
    )
}

pub fn validate(cfg: &RunConfig, design_path: &Path) -> Result<(), CliError> {
    let design = read_design(design_path)?;
    let catalog = cfg.catalog()?;
    let case = cfg.case_study()?;
    let params = build(&design, &catalog)?;
    let exec = Executor::new(cfg.workers);
    workers_note(&exec);
    let stats = validate_monte_carlo(&params, &design, case, cfg.runs, &cfg.noise(), &cfg.sim(), &exec)
        .map_err(CliError::runtime)?;

    let mut runs = Vec::new();
    write_monte_carlo(&stats, &mut runs).map_err(CliError::runtime)?;
    let mut out = OutputSet::default();
    out.add("monte_carlo.csv", runs);
    out.add("monte_carlo_summary.csv", summary_csv(&stats).into_bytes());
    report_written(&out.commit(&cfg.out)?);
    eprintln!(
        "{} runs: mean cycles {:.2}, max {}",
        stats.runs.len(),
        stats.mean_cycles,
        stats.max_cycles
    );
    Ok(())
}

pub fn catalog_check(path: Option<&Path>) -> Result<(), CliError> {
    let catalog = match path {
        Some(p) => load_catalog(p).map_err(CliError::config)?,
        None => Catalog::builtin(),
    };
    println!("label  R    k_t (N m/A)  R_a (ohm)  mass (kg)  part");
    for m in catalog.entries() {
        println!(
            "{:>5}  {:<4} {:<12} {:<10} {:<10} {}",
            m.label, m.gear_ratio, m.torque_constant, m.resistance, m.mass_kg, m.part_name
        );
    }
    println!("{} entries OK", catalog.entries().len());
    Ok(())
}

