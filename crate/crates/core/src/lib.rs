//! Simulation and co-design optimization of small running robots modelled as
//! a torque-driven, damped spring-loaded inverted pendulum driven by a geared
//! DC motor.

pub mod catalog;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod exec;
pub mod mdpso;
pub mod model;
pub mod ode;
pub mod sim;

pub use error::{Error, Result};
