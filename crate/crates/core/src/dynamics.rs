//! Equations of motion for the two phases, the events that switch between
//! them, and the coordinate changes applied at each switch.
//!
//! Angle convention: `theta` is the leg angle from the ground, measured at the
//! foot and opening towards the direction of travel (`-x` side), so the hip
//! sits at `(foot_x - zeta cos theta, zeta sin theta)`. A forward-running
//! stance starts with `theta < pi/2` (foot ahead of the hip) and ends with
//! `theta > pi/2`; positive motor torque increases `theta` and pushes the body
//! towards `+x`. In flight the leg keeps rotating in the same sense, and the
//! accumulated `theta_leg` is not wrapped.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::model::SystemParams;

/// `[theta, theta_dot, zeta, zeta_dot, i_a]`
pub type StanceVec = [f64; 5];
/// `[x, x_dot, y, y_dot, theta_leg, omega, i_a]`
pub type FlightVec = [f64; 7];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StanceState {
    pub theta: f64,
    pub theta_dot: f64,
    pub zeta: f64,
    pub zeta_dot: f64,
    pub current: f64,
    /// Ground contact point; fixed for the whole stance.
    pub foot_x: f64,
}

impl StanceState {
    pub fn from_vec(v: &StanceVec, foot_x: f64) -> Self {
        Self {
            theta: v[0],
            theta_dot: v[1],
            zeta: v[2],
            zeta_dot: v[3],
            current: v[4],
            foot_x,
        }
    }

    pub fn to_vec(&self) -> StanceVec {
        [self.theta, self.theta_dot, self.zeta, self.zeta_dot, self.current]
    }

    /// Hip (centre of mass) position.
    pub fn position(&self) -> (f64, f64) {
        (
            self.foot_x - self.zeta * self.theta.cos(),
            self.zeta * self.theta.sin(),
        )
    }

    pub fn velocity(&self) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (
            -self.zeta_dot * c + self.zeta * self.theta_dot * s,
            self.zeta_dot * s + self.zeta * self.theta_dot * c,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightState {
    pub x: f64,
    pub x_dot: f64,
    pub y: f64,
    pub y_dot: f64,
    pub theta_leg: f64,
    /// Motor shaft speed; the leg turns at `omega / R`.
    pub omega: f64,
    pub current: f64,
}

impl FlightState {
    pub fn from_vec(v: &FlightVec) -> Self {
        Self {
            x: v[0],
            x_dot: v[1],
            y: v[2],
            y_dot: v[3],
            theta_leg: v[4],
            omega: v[5],
            current: v[6],
        }
    }

    pub fn to_vec(&self) -> FlightVec {
        [
            self.x,
            self.x_dot,
            self.y,
            self.y_dot,
            self.theta_leg,
            self.omega,
            self.current,
        ]
    }
}

/// Stance derivative. The motor torque reaches the leg through the gear
/// ratio, and the reflected rotor inertia `R^2 J` adds to the polar inertia
/// `m zeta^2`. Back-EMF is driven by the shaft speed `R theta_dot`.
pub fn stance_rhs(s: &StanceVec, p: &SystemParams, voltage: f64) -> StanceVec {
    let [theta, theta_dot, zeta, zeta_dot, current] = *s;
    let m = p.mass;
    let g = p.gravity;
    let motor = &p.motor;
    let ratio = motor.gear_ratio;
    let (sin, cos) = theta.sin_cos();
    let mz2 = m * zeta * zeta;

    let rhs = -2.0 * zeta_dot * theta_dot / zeta - g * cos / zeta
        - motor.damping * ratio * ratio * theta_dot / mz2
        + motor.torque_constant * current * ratio / mz2;
    let theta_ddot = rhs / (1.0 + ratio * ratio * p.inertia / mz2);
    let zeta_ddot = zeta * theta_dot * theta_dot
        - g * sin
        - p.k0 / m * (zeta - p.l0)
        - p.leg_damping / m * zeta_dot;
    let di = (voltage
        - motor.resistance * current
        - motor.back_emf_constant() * ratio * theta_dot)
        / motor.inductance;
    [theta_dot, theta_ddot, zeta_dot, zeta_ddot, di]
}

/// Flight derivative: ballistic body, unloaded motor driving the leg.
pub fn flight_rhs(s: &FlightVec, p: &SystemParams, voltage: f64) -> FlightVec {
    let [_, x_dot, _, y_dot, _, omega, current] = *s;
    let motor = &p.motor;
    let omega_dot = (motor.torque_constant * current - motor.damping * omega) / p.inertia;
    let di = (voltage - motor.resistance * current - motor.back_emf_constant() * omega)
        / motor.inductance;
    [
        x_dot,
        0.0,
        y_dot,
        -p.gravity,
        omega / motor.gear_ratio,
        omega_dot,
        di,
    ]
}

/// Vertical hip acceleration during stance.
pub fn stance_vertical_acceleration(s: &StanceVec, p: &SystemParams, voltage: f64) -> f64 {
    let d = stance_rhs(s, p, voltage);
    let [theta, theta_dot, zeta, zeta_dot, _] = *s;
    let (sin, cos) = theta.sin_cos();
    (d[3] - zeta * theta_dot * theta_dot) * sin + (2.0 * zeta_dot * theta_dot + zeta * d[1]) * cos
}

/// Liftoff event function `zeta - l0`; fires on an upward zero crossing.
pub fn liftoff_event(s: &StanceVec, p: &SystemParams) -> f64 {
    s[2] - p.l0
}

/// Whether a located liftoff crossing is accepted: the leg must be extending
/// and the ground must no longer support the body, i.e. the hip falls at
/// least as fast as gravity.
pub fn liftoff_accepted(s: &StanceVec, p: &SystemParams, voltage: f64) -> bool {
    s[3] > 0.0 && stance_vertical_acceleration(s, p, voltage) <= -p.gravity + 1e-9
}

/// Leg angle reduced to `[0, 2 pi)`.
pub fn wrap_leg_angle(theta_leg: f64) -> f64 {
    theta_leg.rem_euclid(TAU)
}

/// Touchdown event function `y - l0 sin(theta_leg)`; fires on a downward zero
/// crossing while the body descends. Positive whenever the leg points up.
pub fn touchdown_event(s: &FlightVec, p: &SystemParams) -> f64 {
    s[2] - p.l0 * wrap_leg_angle(s[4]).sin()
}

/// Stance to flight at liftoff.
pub fn liftoff_transform(s: &StanceState, p: &SystemParams) -> FlightState {
    let (x, y) = s.position();
    let (x_dot, y_dot) = s.velocity();
    FlightState {
        x,
        x_dot,
        y,
        y_dot,
        theta_leg: s.theta,
        omega: p.motor.gear_ratio * s.theta_dot,
        current: s.current,
    }
}

/// Raised when the leg does not point at the ground at touchdown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvalidTouchdown {
    pub theta_eff: f64,
}

/// Flight to stance at touchdown. The leg rate follows from the body
/// velocity (rigid contact), so the shaft speed implicitly resets to
/// `R theta_dot`.
pub fn touchdown_transform(
    s: &FlightState,
    p: &SystemParams,
) -> Result<StanceState, InvalidTouchdown> {
    let theta = wrap_leg_angle(s.theta_leg);
    let (sin, cos) = theta.sin_cos();
    if sin <= 0.0 {
        return Err(InvalidTouchdown { theta_eff: theta });
    }
    let zeta = (s.y / sin).min(p.l0);
    Ok(StanceState {
        theta,
        theta_dot: (s.x_dot * sin + s.y_dot * cos) / zeta,
        zeta,
        zeta_dot: -s.x_dot * cos + s.y_dot * sin,
        current: s.current,
        foot_x: s.x + zeta * cos,
    })
}

/// Mechanical energy in stance: body kinetic, reflected rotor kinetic,
/// gravitational and spring potential.
pub fn stance_energy(s: &StanceVec, p: &SystemParams) -> f64 {
    let [theta, theta_dot, zeta, zeta_dot, _] = *s;
    let ratio = p.motor.gear_ratio;
    0.5 * p.mass * (zeta_dot * zeta_dot + zeta * zeta * theta_dot * theta_dot)
        + 0.5 * p.inertia * ratio * ratio * theta_dot * theta_dot
        + p.mass * p.gravity * zeta * theta.sin()
        + 0.5 * p.k0 * (zeta - p.l0).powi(2)
}
