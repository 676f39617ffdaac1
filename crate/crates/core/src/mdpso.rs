//! Mixed-discrete particle swarm optimisation with feasibility-first ranking.
//!
//! Integer dimensions move through a continuous latent position and are
//! rounded when a candidate is evaluated. A candidate with zero net
//! constraint violation beats any candidate with positive violation;
//! feasible candidates are ordered by objective and infeasible ones by
//! violation.

use std::cmp::Ordering;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::eval::{evaluate, CaseStudy, EvalReport, NoiseSpec, DEFAULT_EPSILON, SENTINEL_OBJECTIVE};
use crate::exec::Executor;
use crate::model::{DesignVector, VarKind, BOUNDS};
use crate::sim::SimConfig;

/// Violation assigned to a candidate whose evaluation panicked.
pub const PANIC_VIOLATION: f64 = 1.0e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

/// Box bounds and variable kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    dims: Vec<Dimension>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Config("search space has no dimensions".into()));
        }
        for d in &dims {
            if !(d.lower.is_finite() && d.upper.is_finite() && d.lower < d.upper) {
                return Err(Error::Config(format!(
                    "dimension `{}` needs finite bounds with lower < upper",
                    d.name
                )));
            }
            if d.kind == VarKind::Integer && (d.lower.fract() != 0.0 || d.upper.fract() != 0.0) {
                return Err(Error::Config(format!("integer dimension `{}` needs integer bounds", d.name)));
            }
        }
        Ok(Self { dims })
    }

    /// The 17-variable robot design space.
    pub fn design() -> Self {
        Self {
            dims: BOUNDS
                .iter()
                .map(|&(name, kind, lower, upper)| Dimension {
                    name: name.to_string(),
                    kind,
                    lower,
                    upper,
                })
                .collect(),
        }
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Clamps into the box and rounds integer dimensions.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.dims)
            .map(|(&v, d)| {
                let v = v.clamp(d.lower, d.upper);
                match d.kind {
                    VarKind::Integer => v.round().clamp(d.lower, d.upper),
                    VarKind::Continuous => v,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmConfig {
    pub population: usize,
    pub max_iterations: usize,
    /// Stop after this many iterations without a lower net violation while
    /// nothing feasible has been found.
    pub stall_infeasible: usize,
    /// Stop after this many iterations without a lower feasible objective.
    pub stall_feasible: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity cap as a fraction of each dimension's range.
    pub max_velocity: f64,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            population: 128,
            max_iterations: 100,
            stall_infeasible: 15,
            stall_feasible: 5,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            max_velocity: 0.5,
            seed: 0,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Config("population must be at least 2".into()));
        }
        if self.max_iterations == 0 || self.stall_infeasible == 0 || self.stall_feasible == 0 {
            return Err(Error::Config("iteration limits must be at least 1".into()));
        }
        let coeffs = [self.inertia, self.cognitive, self.social, self.max_velocity];
        if coeffs.iter().any(|c| !c.is_finite() || *c < 0.0) || self.max_velocity == 0.0 {
            return Err(Error::Config("swarm coefficients must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// What the optimizer needs from an evaluation.
pub trait Scored {
    fn objective(&self) -> f64;
    fn net_violation(&self) -> f64;
}

impl Scored for EvalReport {
    fn objective(&self) -> f64 {
        self.objective
    }

    fn net_violation(&self) -> f64 {
        self.net_violation
    }
}

/// Where an evaluation sits in the run; used to index noise draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalIndex {
    pub iteration: usize,
    pub particle: usize,
}

/// An evaluated point. `report` is `None` when the evaluator panicked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate<R> {
    pub x: Vec<f64>,
    pub objective: f64,
    pub net_violation: f64,
    pub report: Option<R>,
}

impl<R> Candidate<R> {
    pub fn feasible(&self) -> bool {
        self.net_violation == 0.0
    }
}

/// Feasibility-first comparison; `Less` means `a` is better.
pub fn compare(a_obj: f64, a_viol: f64, b_obj: f64, b_viol: f64) -> Ordering {
    match (a_viol == 0.0, b_viol == 0.0) {
        (true, true) => a_obj.total_cmp(&b_obj),
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => a_viol.total_cmp(&b_viol),
    }
}

fn cmp_candidates<R>(a: &Candidate<R>, b: &Candidate<R>) -> Ordering {
    compare(a.objective, a.net_violation, b.objective, b.net_violation)
}

/// Indices of `candidates` from best to worst.
pub fn rank<R>(candidates: &[Candidate<R>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..candidates.len()).collect();
    idx.sort_by(|&a, &b| cmp_candidates(&candidates[a], &candidates[b]));
    idx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    /// Best feasible objective found so far, if any.
    pub best_feasible_objective: Option<f64>,
    /// Smallest net violation found so far.
    pub min_net_violation: f64,
    /// Feasible particles in this iteration's population.
    pub n_feasible: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    StalledInfeasible,
    StalledFeasible,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult<R> {
    pub best: Candidate<R>,
    pub history: Vec<HistoryRow>,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop_reason: StopReason,
    pub seed: u64,
}

impl<R> OptimizationResult<R> {
    pub fn found_feasible(&self) -> bool {
        self.best.feasible()
    }
}

fn evaluate_one<R, F>(f: &F, x: Vec<f64>, index: EvalIndex) -> Candidate<R>
where
    R: Scored,
    F: Fn(&[f64], EvalIndex) -> R,
{
    match catch_unwind(AssertUnwindSafe(|| f(&x, index))) {
        Ok(report) => {
            let objective = report.objective();
            let viol = report.net_violation();
            let (objective, net_violation) = if viol.is_nan() || objective.is_nan() {
                (SENTINEL_OBJECTIVE, PANIC_VIOLATION)
            } else {
                (objective, viol.max(0.0))
            };
            Candidate {
                x,
                objective,
                net_violation,
                report: Some(report),
            }
        }
        Err(_) => Candidate {
            x,
            objective: SENTINEL_OBJECTIVE,
            net_violation: PANIC_VIOLATION,
            report: None,
        },
    }
}

/// Minimises `f` over `space`. The evaluator receives projected points
/// (clamped, integers rounded). A panicking evaluation is recorded as
/// infeasible and does not abort the run. Results do not depend on the
/// number of workers.
pub fn optimize<R, F>(
    f: F,
    space: &SearchSpace,
    config: &SwarmConfig,
    exec: &Executor,
) -> Result<OptimizationResult<R>>
where
    R: Scored + Clone + Send,
    F: Fn(&[f64], EvalIndex) -> R + Sync + Send,
{
    config.validate()?;
    let n = config.population;
    let d = space.len();
    let dims = space.dims();
    let vmax: Vec<f64> = dims.iter().map(|dm| config.max_velocity * (dm.upper - dm.lower)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut pos: Vec<Vec<f64>> = (0..n)
        .map(|_| dims.iter().map(|dm| rng.random_range(dm.lower..=dm.upper)).collect())
        .collect();
    let mut vel: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|j| rng.random_range(-0.1..=0.1) * vmax[j]).collect())
        .collect();

    let evaluate_population = |pos: &[Vec<f64>], iteration: usize| -> Vec<Candidate<R>> {
        exec.map(pos, |particle, x| {
            evaluate_one(&f, space.project(x), EvalIndex { iteration, particle })
        })
    };

    let mut current = evaluate_population(&pos, 0);
    let mut evaluations = n;
    let mut pbest = current.clone();
    let mut pbest_pos = pos.clone();
    let mut gbest = current[rank(&current)[0]].clone();
    let mut gbest_pos = pbest_pos[rank(&current)[0]].clone();

    let mut history = Vec::new();
    let mut best_violation = gbest.net_violation;
    let mut best_feasible = gbest.feasible().then_some(gbest.objective);
    let mut stall = 0usize;
    let mut record = |iteration: usize, pop: &[Candidate<R>], bf: Option<f64>, bv: f64| {
        history.push(HistoryRow {
            iteration,
            best_feasible_objective: bf,
            min_net_violation: bv,
            n_feasible: pop.iter().filter(|c| c.feasible()).count(),
        });
    };
    record(0, &current, best_feasible, best_violation);

    let mut iteration = 0;
    let stop_reason = loop {
        if iteration + 1 >= config.max_iterations {
            break StopReason::MaxIterations;
        }
        iteration += 1;

        for i in 0..n {
            for j in 0..d {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = config.inertia * vel[i][j]
                    + config.cognitive * r1 * (pbest_pos[i][j] - pos[i][j])
                    + config.social * r2 * (gbest_pos[j] - pos[i][j]);
                let v = v.clamp(-vmax[j], vmax[j]);
                let mut x = pos[i][j] + v;
                let mut v = v;
                if x < dims[j].lower || x > dims[j].upper {
                    x = x.clamp(dims[j].lower, dims[j].upper);
                    v = 0.0;
                }
                pos[i][j] = x;
                vel[i][j] = v;
            }
        }

        current = evaluate_population(&pos, iteration);
        evaluations += n;
        for i in 0..n {
            if cmp_candidates(&current[i], &pbest[i]) == Ordering::Less {
                pbest[i] = current[i].clone();
                pbest_pos[i] = pos[i].clone();
            }
        }
        let top = rank(&current)[0];
        if cmp_candidates(&current[top], &gbest) == Ordering::Less {
            gbest = current[top].clone();
            gbest_pos = pos[top].clone();
        }

        let improved = if gbest.feasible() {
            let improved = best_feasible.is_none_or(|b| gbest.objective < b);
            best_feasible = Some(best_feasible.map_or(gbest.objective, |b| b.min(gbest.objective)));
            best_violation = 0.0;
            improved
        } else {
            let improved = gbest.net_violation < best_violation;
            best_violation = best_violation.min(gbest.net_violation);
            improved
        };
        stall = if improved { 0 } else { stall + 1 };
        record(iteration, &current, best_feasible, best_violation);

        if best_feasible.is_some() && stall >= config.stall_feasible {
            break StopReason::StalledFeasible;
        }
        if best_feasible.is_none() && stall >= config.stall_infeasible {
            break StopReason::StalledInfeasible;
        }
    };

    Ok(OptimizationResult {
        best: gbest,
        iterations: history.len(),
        history,
        evaluations,
        stop_reason,
        seed: config.seed,
    })
}

/// Writes `iteration,best_feasible_objective,min_net_violation,n_feasible`;
/// the objective column is empty until something feasible is found.
pub fn write_history<W: Write>(history: &[HistoryRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["iteration", "best_feasible_objective", "min_net_violation", "n_feasible"])?;
    for row in history {
        wtr.write_record([
            row.iteration.to_string(),
            row.best_feasible_objective.map_or(String::new(), |v| v.to_string()),
            row.min_net_violation.to_string(),
            row.n_feasible.to_string(),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Cycles the constraints look at; runs are cut here during optimization.
pub const REQUIRED_CYCLES: usize = 8;

/// Robot design search for one case study.
#[derive(Debug, Clone)]
pub struct DesignProblem<'a> {
    pub case: CaseStudy,
    pub catalog: &'a Catalog,
    pub sim: SimConfig,
    /// Noise standard deviation; the seed comes from the swarm config.
    pub epsilon: f64,
}

impl<'a> DesignProblem<'a> {
    /// Default simulation settings with runs stopped after
    /// [`REQUIRED_CYCLES`]. Net violation and objective are the same as for
    /// a full run because no constraint reads later cycles.
    pub fn new(case: CaseStudy, catalog: &'a Catalog) -> Self {
        Self {
            case,
            catalog,
            sim: SimConfig {
                max_cycles: REQUIRED_CYCLES,
                ..SimConfig::default()
            },
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// Scores one design with draw `iteration * population + particle` of
    /// the run's noise stream.
    pub fn evaluate(&self, x: &[f64], index: EvalIndex, config: &SwarmConfig) -> EvalReport {
        let design = DesignVector::from_slice(x).expect("projected point has 17 in-bounds entries");
        let noise = NoiseSpec {
            epsilon: self.epsilon,
            seed: config.seed,
        };
        let draw = (index.iteration * config.population + index.particle) as u64;
        evaluate(&design, self.case, &noise, draw, self.catalog, &self.sim)
            .expect("projected design lies inside the bounds")
    }

    pub fn optimize(&self, config: &SwarmConfig, exec: &Executor) -> Result<OptimizationResult<EvalReport>> {
        optimize(|x, idx| self.evaluate(x, idx, config), &SearchSpace::design(), config, exec)
    }
}

/// The design vector of a result's best candidate.
pub fn best_design<R>(result: &OptimizationResult<R>) -> Result<DesignVector> {
    DesignVector::from_slice(&result.best.x)
}
