//! Hybrid stance/flight integration with event-driven phase switching.

use serde::{Deserialize, Serialize};

use crate::control::Controller;
use crate::dynamics::{
    self, flight_rhs, liftoff_accepted, liftoff_event, liftoff_transform, stance_rhs,
    touchdown_event, touchdown_transform, FlightState, FlightVec, StanceState, StanceVec,
};
use crate::error::{Error, Result};
use crate::model::{DesignVector, SystemParams};
use crate::ode::{locate_root, DenseStep, Dopri5, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_cycles: usize,
    /// Total simulated time budget (s).
    pub t_max: f64,
    /// Event time bracketing precision (s).
    pub event_tol: f64,
    /// A stance lasting longer than this ends the run (s).
    pub stance_time_limit: f64,
    /// Number of leading segments whose dense output is retained. Later
    /// segments keep only their boundary states.
    pub dense_segments: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            max_cycles: 25,
            t_max: 20.0,
            event_tol: 1e-10,
            stance_time_limit: 2.0,
            dense_segments: usize::MAX,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.event_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.max_cycles == 0 {
            return Err(Error::Config("max_cycles must be at least 1".into()));
        }
        if !(self.t_max > 0.0 && self.stance_time_limit > 0.0) {
            return Err(Error::Config("time limits must be positive".into()));
        }
        Ok(())
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances {
            rel: self.rel_tol,
            abs: self.abs_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxCyclesReached,
    Fell,
    InvalidTouchdown,
    TimeLimit,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Stance,
    Flight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Start,
    Touchdown,
    Liftoff,
    Fall,
    TimeLimit,
    NumericalFailure,
    InvalidTouchdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub kind: EventKind,
}

/// Phase-tagged state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HybridState {
    Stance(StanceState),
    Flight(FlightState),
}

impl HybridState {
    pub fn phase(&self) -> PhaseKind {
        match self {
            HybridState::Stance(_) => PhaseKind::Stance,
            HybridState::Flight(_) => PhaseKind::Flight,
        }
    }

    pub fn position(&self) -> (f64, f64) {
        match self {
            HybridState::Stance(s) => s.position(),
            HybridState::Flight(f) => (f.x, f.y),
        }
    }

    pub fn velocity(&self) -> (f64, f64) {
        match self {
            HybridState::Stance(s) => s.velocity(),
            HybridState::Flight(f) => (f.x_dot, f.y_dot),
        }
    }

    /// Leg angle; unwrapped in flight.
    pub fn leg_angle(&self) -> f64 {
        match self {
            HybridState::Stance(s) => s.theta,
            HybridState::Flight(f) => f.theta_leg,
        }
    }

    pub fn current(&self) -> f64 {
        match self {
            HybridState::Stance(s) => s.current,
            HybridState::Flight(f) => f.current,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Dense {
    Stance(Vec<DenseStep<5>>),
    Flight(Vec<DenseStep<7>>),
    None,
}

/// One stance or flight phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSegment {
    pub kind: PhaseKind,
    pub start_event: EventRecord,
    pub end_event: EventRecord,
    pub start_state: HybridState,
    pub end_state: HybridState,
    foot_x: f64,
    controller: Controller,
    dense: Dense,
}

impl PhaseSegment {
    pub fn t_start(&self) -> f64 {
        self.start_event.t
    }

    pub fn t_end(&self) -> f64 {
        self.end_event.t
    }

    pub fn duration(&self) -> f64 {
        self.t_end() - self.t_start()
    }

    pub fn has_dense_output(&self) -> bool {
        !matches!(self.dense, Dense::None)
    }

    /// Applied voltage at absolute time `t` within this segment.
    pub fn voltage_at(&self, t: f64) -> f64 {
        let local = t - self.t_start();
        match self.kind {
            PhaseKind::Stance => self.controller.stance.voltage(local),
            PhaseKind::Flight => self.controller.flight.voltage(local),
        }
    }

    /// Flight voltage switch-off time in absolute time, when inside the segment.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            PhaseKind::Flight => {
                let t = self.t_start() + self.controller.flight.on_time;
                if t > self.t_start() && t < self.t_end() {
                    vec![t]
                } else {
                    vec![]
                }
            }
            PhaseKind::Stance => vec![],
        }
    }

    /// State at absolute time `t`, clamped into the segment. Exact at the
    /// segment boundaries.
    pub fn state_at(&self, t: f64) -> Result<HybridState> {
        if t <= self.t_start() {
            return Ok(self.start_state);
        }
        if t >= self.t_end() {
            return Ok(self.end_state);
        }
        let local = t - self.t_start();
        match &self.dense {
            Dense::Stance(steps) => {
                let step = find_step(steps, local);
                Ok(HybridState::Stance(StanceState::from_vec(&step.eval(local), self.foot_x)))
            }
            Dense::Flight(steps) => {
                let step = find_step(steps, local);
                Ok(HybridState::Flight(FlightState::from_vec(&step.eval(local))))
            }
            Dense::None => Err(Error::Domain(format!(
                "segment starting at t={} has no dense output",
                self.t_start()
            ))),
        }
    }

    /// `(t, state, voltage)` at every accepted integration step boundary,
    /// first and last samples on the segment boundaries.
    pub fn samples(&self) -> Vec<(f64, HybridState, f64)> {
        let t0 = self.t_start();
        let mut out = vec![(t0, self.start_state, self.voltage_at(t0))];
        let mut push_interior = |local: f64, state: HybridState| {
            let t = t0 + local;
            if t > out.last().unwrap().0 && t < self.t_end() {
                out.push((t, state, self.voltage_at(t)));
            }
        };
        match &self.dense {
            Dense::Stance(steps) => {
                for s in steps {
                    push_interior(s.t1(), HybridState::Stance(StanceState::from_vec(&s.end(), self.foot_x)));
                }
            }
            Dense::Flight(steps) => {
                for s in steps {
                    push_interior(s.t1(), HybridState::Flight(FlightState::from_vec(&s.end())));
                }
            }
            Dense::None => {}
        }
        let t1 = self.t_end();
        if t1 > t0 {
            out.push((t1, self.end_state, self.voltage_at(t1)));
        }
        out
    }
}

fn find_step<const N: usize>(steps: &[DenseStep<N>], local: f64) -> &DenseStep<N> {
    let idx = steps.partition_point(|s| s.t1() < local);
    &steps[idx.min(steps.len() - 1)]
}

/// Ordered phase segments of one run, starting with stance.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub segments: Vec<PhaseSegment>,
    pub termination: Termination,
    /// Completed stance + flight cycles (each ends at a touchdown).
    pub n_cycles: usize,
    /// Leg angle at each touchdown, the initial one included (rad).
    pub touchdown_angles: Vec<f64>,
    pub l0: f64,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t_end())
    }

    pub fn stances(&self) -> impl Iterator<Item = &PhaseSegment> {
        self.segments.iter().filter(|s| s.kind == PhaseKind::Stance)
    }

    pub fn flights(&self) -> impl Iterator<Item = &PhaseSegment> {
        self.segments.iter().filter(|s| s.kind == PhaseKind::Flight)
    }

    /// State at absolute time `t`; at a phase boundary the later segment wins.
    pub fn state_at(&self, t: f64) -> Result<(PhaseKind, HybridState)> {
        let seg = self.segment_at(t)?;
        Ok((seg.kind, seg.state_at(t)?))
    }

    fn segment_at(&self, t: f64) -> Result<&PhaseSegment> {
        if self.segments.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        let idx = self.segments.partition_point(|s| s.t_end() <= t);
        Ok(&self.segments[idx.min(self.segments.len() - 1)])
    }
}

/// Runs the hybrid simulation from a first touchdown at `theta_td1`.
///
/// Never fails on bad physics: the reason a run stops is reported through
/// [`Trajectory::termination`].
pub fn simulate(
    params: &SystemParams,
    design: &DesignVector,
    theta_td1: f64,
    config: &SimConfig,
) -> Trajectory {
    let controller = Controller::from_design(design, params.motor.v_max);
    simulate_with(params, &controller, theta_td1, config)
}

/// Like [`simulate`] with an explicit controller.
pub fn simulate_with(
    params: &SystemParams,
    controller: &Controller,
    theta_td1: f64,
    config: &SimConfig,
) -> Trajectory {
    let init = StanceState {
        theta: theta_td1,
        theta_dot: params.initial.theta_dot_0,
        zeta: params.l0,
        zeta_dot: params.initial.zeta_dot_0,
        current: 0.0,
        foot_x: 0.0,
    };
    simulate_from(params, controller, init, config)
}

/// Runs from an arbitrary initial stance state at `t = 0`.
pub fn simulate_from(
    params: &SystemParams,
    controller: &Controller,
    init: StanceState,
    config: &SimConfig,
) -> Trajectory {
    let mut runner = Runner {
        p: params,
        ctrl: controller,
        cfg: config,
        segments: Vec::new(),
    };
    let mut touchdown_angles = vec![init.theta];
    let mut n_cycles = 0;
    let mut t = 0.0;
    let mut stance = init;
    let mut start_kind = EventKind::Start;

    let termination = loop {
        let lifted = match runner.run_stance(t, stance, start_kind) {
            Ok(s) => s,
            Err(end) => break end,
        };
        t = runner.segments.last().unwrap().t_end();
        let flight0 = liftoff_transform(&lifted, params);
        let landed = match runner.run_flight(t, flight0) {
            Ok(f) => f,
            Err(end) => break end,
        };
        t = runner.segments.last().unwrap().t_end();
        n_cycles += 1;
        match touchdown_transform(&landed, params) {
            Ok(s) => {
                touchdown_angles.push(s.theta);
                stance = s;
            }
            Err(_) => {
                let last = runner.segments.last_mut().unwrap();
                last.end_event.kind = EventKind::InvalidTouchdown;
                break Termination::InvalidTouchdown;
            }
        }
        if n_cycles >= config.max_cycles {
            break Termination::MaxCyclesReached;
        }
        if t >= config.t_max {
            break Termination::TimeLimit;
        }
        start_kind = EventKind::Touchdown;
    };

    Trajectory {
        segments: runner.segments,
        termination,
        n_cycles,
        touchdown_angles,
        l0: params.l0,
    }
}

fn termination_of(kind: EventKind) -> Termination {
    match kind {
        EventKind::NumericalFailure => Termination::NumericalFailure,
        EventKind::TimeLimit => Termination::TimeLimit,
        EventKind::InvalidTouchdown => Termination::InvalidTouchdown,
        _ => Termination::Fell,
    }
}

struct Runner<'a> {
    p: &'a SystemParams,
    ctrl: &'a Controller,
    cfg: &'a SimConfig,
    segments: Vec<PhaseSegment>,
}

/// Event candidate located inside one step: `(local time, kind)`.
type Hit = (f64, EventKind);

impl Runner<'_> {
    fn keep_dense(&self) -> bool {
        self.segments.len() < self.cfg.dense_segments
    }

    fn g_tol(&self) -> f64 {
        1e-12 * self.p.l0
    }

    fn run_stance(
        &mut self,
        t_start: f64,
        init: StanceState,
        start_kind: EventKind,
    ) -> Result<StanceState, Termination> {
        let p = self.p;
        let stance_profile = self.ctrl.stance;
        let foot_x = init.foot_x;
        let t_stop = self.cfg.stance_time_limit.min(self.cfg.t_max - t_start).max(0.0);
        let mut ode = Dopri5::new(
            |t, y: &StanceVec| stance_rhs(y, p, stance_profile.voltage(t)),
            0.0,
            init.to_vec(),
            t_stop,
            self.cfg.tolerances(),
        );
        let y_of = |y: &StanceVec| y[2] * y[0].sin();
        let mut steps = Vec::new();
        let keep = self.keep_dense();
        let (end_local, end_vec, kind) = loop {
            if ode.finished() {
                break (ode.t(), *ode.y(), EventKind::TimeLimit);
            }
            let step = match ode.step() {
                Ok(s) => s,
                Err(_) => {
                    break (ode.t(), *ode.y(), EventKind::NumericalFailure)
                }
            };
            let y0 = step.start();
            let y1 = step.end();
            let mut hits: Vec<Hit> = Vec::new();

            let (l0v, l1v) = (liftoff_event(&y0, p), liftoff_event(&y1, p));
            if l0v < 0.0 && l1v >= 0.0 {
                let tr = locate_root(
                    |t| liftoff_event(&step.eval(t), p),
                    step.t0,
                    step.t1(),
                    l0v,
                    l1v,
                    self.cfg.event_tol,
                    self.g_tol(),
                );
                let s = step.eval(tr);
                if liftoff_accepted(&s, p, stance_profile.voltage(tr)) {
                    hits.push((tr, EventKind::Liftoff));
                }
            }
            let (f0, f1) = (y_of(&y0), y_of(&y1));
            if f0 > 0.0 && f1 <= 0.0 {
                let tr = locate_root(|t| y_of(&step.eval(t)), step.t0, step.t1(), f0, f1, self.cfg.event_tol, self.g_tol());
                hits.push((tr, EventKind::Fall));
            }
            let hit = hits.into_iter().min_by(|a, b| a.0.total_cmp(&b.0));
            let y_end = hit.map(|(tr, _)| step.eval(tr));
            if keep {
                steps.push(step);
            }
            if let (Some((tr, kind)), Some(y)) = (hit, y_end) {
                break (tr, y, kind);
            }
        };

        let end_state = StanceState::from_vec(&end_vec, foot_x);
        self.segments.push(PhaseSegment {
            kind: PhaseKind::Stance,
            start_event: EventRecord { t: t_start, kind: start_kind },
            end_event: EventRecord {
                t: t_start + end_local,
                kind,
            },
            start_state: HybridState::Stance(init),
            end_state: HybridState::Stance(end_state),
            foot_x,
            controller: *self.ctrl,
            dense: if keep { Dense::Stance(steps) } else { Dense::None },
        });
        match kind {
            EventKind::Liftoff => Ok(end_state),
            other => Err(termination_of(other)),
        }
    }

    fn run_flight(&mut self, t_start: f64, init: FlightState) -> Result<FlightState, Termination> {
        let p = self.p;
        let flight_profile = self.ctrl.flight;
        let t_stop = (self.cfg.t_max - t_start).max(0.0);
        let keep = self.keep_dense();
        let mut steps = Vec::new();
        let mut pieces = Vec::new();
        if flight_profile.on_time > 0.0 && flight_profile.on_time < t_stop {
            pieces.push((0.0, flight_profile.on_time));
        }
        pieces.push((pieces.last().map_or(0.0, |p: &(f64, f64)| p.1), t_stop));

        let mut y = init.to_vec();
        let mut result = None;
        'pieces: for (a, b) in pieces {
            // the voltage is constant on each piece
            let v = flight_profile.voltage(a);
            let mut ode = Dopri5::new(|_, y: &FlightVec| flight_rhs(y, p, v), a, y, b, self.cfg.tolerances());
            while !ode.finished() {
                let step = match ode.step() {
                    Ok(s) => s,
                    Err(_) => {
                        result = Some((ode.t(), *ode.y(), EventKind::NumericalFailure));
                        break 'pieces;
                    }
                };
                let y0 = step.start();
                let y1 = step.end();
                let mut hits: Vec<Hit> = Vec::new();
                let (g0, g1) = (touchdown_event(&y0, p), touchdown_event(&y1, p));
                if g0 > 0.0 && g1 <= 0.0 {
                    let tr = locate_root(
                        |t| touchdown_event(&step.eval(t), p),
                        step.t0,
                        step.t1(),
                        g0,
                        g1,
                        self.cfg.event_tol,
                        self.g_tol(),
                    );
                    if step.eval(tr)[3] < 0.0 {
                        hits.push((tr, EventKind::Touchdown));
                    }
                }
                if y0[2] > 0.0 && y1[2] <= 0.0 {
                    let tr = locate_root(|t| step.eval(t)[2], step.t0, step.t1(), y0[2], y1[2], self.cfg.event_tol, self.g_tol());
                    hits.push((tr, EventKind::Fall));
                }
                let hit = hits.into_iter().min_by(|a, b| a.0.total_cmp(&b.0));
                let y_end = hit.map(|(tr, _)| step.eval(tr));
                if keep {
                    steps.push(step);
                }
                if let (Some((tr, kind)), Some(ye)) = (hit, y_end) {
                    result = Some((tr, ye, kind));
                    break 'pieces;
                }
            }
            y = *ode.y();
        }
        let (end_local, end_vec, kind) = result.unwrap_or((t_stop, y, EventKind::TimeLimit));

        let end_state = FlightState::from_vec(&end_vec);
        self.segments.push(PhaseSegment {
            kind: PhaseKind::Flight,
            start_event: EventRecord {
                t: t_start,
                kind: EventKind::Liftoff,
            },
            end_event: EventRecord {
                t: t_start + end_local,
                kind,
            },
            start_state: HybridState::Flight(init),
            end_state: HybridState::Flight(end_state),
            foot_x: 0.0,
            controller: *self.ctrl,
            dense: if keep { Dense::Flight(steps) } else { Dense::None },
        });
        match kind {
            EventKind::Touchdown => Ok(end_state),
            other => Err(termination_of(other)),
        }
    }
}

/// One row of a uniformly resampled trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub phase: PhaseKind,
    pub state: HybridState,
    pub voltage: f64,
}

/// Resamples on the grid `0, dt, 2 dt, ...`; every segment also contributes
/// its exact boundary states, so phase switches appear as duplicated times.
pub fn resample(traj: &Trajectory, dt: f64) -> Result<Vec<Sample>> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("resample step must be positive, got {dt}")));
    }
    if traj.segments.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut out = Vec::new();
    for seg in &traj.segments {
        let (a, b) = (seg.t_start(), seg.t_end());
        out.push(Sample {
            t: a,
            phase: seg.kind,
            state: seg.start_state,
            voltage: seg.voltage_at(a),
        });
        let mut k = (a / dt).floor() as i64 + 1;
        loop {
            let t = k as f64 * dt;
            if t >= b {
                break;
            }
            if t > a {
                out.push(Sample {
                    t,
                    phase: seg.kind,
                    state: seg.state_at(t)?,
                    voltage: seg.voltage_at(t),
                });
            }
            k += 1;
        }
        if b > a {
            out.push(Sample {
                t: b,
                phase: seg.kind,
                state: seg.end_state,
                voltage: seg.voltage_at(b),
            });
        }
    }
    Ok(out)
}

/// Stance mechanical energy along a stance segment's samples.
pub fn stance_energy_series(seg: &PhaseSegment, params: &SystemParams) -> Vec<(f64, f64)> {
    seg.samples()
        .into_iter()
        .filter_map(|(t, s, _)| match s {
            HybridState::Stance(st) => Some((t, dynamics::stance_energy(&st.to_vec(), params))),
            HybridState::Flight(_) => None,
        })
        .collect()
}
