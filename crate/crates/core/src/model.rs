//! Design vector, variable bounds, and the derived physical parameters of a
//! candidate robot.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, MotorSpec};
use crate::error::{Error, Result};

/// Gravitational acceleration (m/s^2).
pub const GRAVITY: f64 = 9.81;
/// Battery mass (kg), single-cell 100 mAh LiPo.
pub const BATTERY_MASS: f64 = 0.003;
/// Microcontroller board mass (kg).
pub const MCU_MASS: f64 = 0.005;

/// Number of decision variables.
pub const N_VARS: usize = 17;

/// Whether a decision variable is searched over integers or reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Integer,
}

/// `(name, kind, lower, upper)` for every decision variable, in
/// [`DesignVector::to_vec`] order. Angles in degrees, leg rate in rev/s.
///
/// The elastic modulus is listed as an integer quantity in the original
/// design table; it is searched as a real here.
pub const BOUNDS: [(&str, VarKind, f64, f64); N_VARS] = [
    ("motor_label", VarKind::Integer, 1.0, 18.0),
    ("m_add", VarKind::Continuous, 0.01, 0.5),
    ("E", VarKind::Continuous, 10e3, 130e9),
    ("rho", VarKind::Continuous, 0.001, 0.03),
    ("b", VarKind::Continuous, 0.0005, 0.01),
    ("h", VarKind::Continuous, 0.0005, 0.01),
    ("b_l", VarKind::Continuous, 0.0005, 0.01),
    ("zeta_dot_0", VarKind::Continuous, -5.0, -0.1),
    ("theta_0", VarKind::Continuous, 25.0, 85.0),
    ("theta_dot_0", VarKind::Continuous, 0.8, 1.6),
    ("a_0", VarKind::Continuous, -2.0, 2.0),
    ("a_1", VarKind::Continuous, -2.0, 2.0),
    ("a_2", VarKind::Continuous, -2.0, 2.0),
    ("a_3", VarKind::Continuous, -2.0, 2.0),
    ("a_4", VarKind::Continuous, -2.0, 2.0),
    ("a_5", VarKind::Continuous, -2.0, 2.0),
    ("T_FC", VarKind::Continuous, 0.0, 0.1),
];

/// The 17 decision variables of one candidate design.
///
/// Stored in the units of the design table: `theta_0` in degrees and
/// `theta_dot_0` in revolutions per second. [`build_system`] converts them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FlatDesign", from = "FlatDesign")]
pub struct DesignVector {
    pub motor_label: u32,
    pub m_add: f64,
    pub elastic_modulus: f64,
    pub leg_radius: f64,
    pub leg_thickness: f64,
    pub leg_width: f64,
    pub leg_damping: f64,
    pub zeta_dot_0: f64,
    pub theta_0_deg: f64,
    pub theta_dot_0_rps: f64,
    /// Stance polynomial coefficients, constant term first.
    pub stance_coeffs: [f64; 6],
    pub flight_on_time: f64,
}

/// JSON layout: one flat object keyed by the design-table names.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatDesign {
    motor_label: u32,
    m_add: f64,
    #[serde(rename = "E")]
    e: f64,
    rho: f64,
    b: f64,
    h: f64,
    b_l: f64,
    zeta_dot_0: f64,
    theta_0: f64,
    theta_dot_0: f64,
    a_0: f64,
    a_1: f64,
    a_2: f64,
    a_3: f64,
    a_4: f64,
    a_5: f64,
    #[serde(rename = "T_FC")]
    t_fc: f64,
}

impl From<DesignVector> for FlatDesign {
    fn from(d: DesignVector) -> Self {
        let [a_0, a_1, a_2, a_3, a_4, a_5] = d.stance_coeffs;
        FlatDesign {
            motor_label: d.motor_label,
            m_add: d.m_add,
            e: d.elastic_modulus,
            rho: d.leg_radius,
            b: d.leg_thickness,
            h: d.leg_width,
            b_l: d.leg_damping,
            zeta_dot_0: d.zeta_dot_0,
            theta_0: d.theta_0_deg,
            theta_dot_0: d.theta_dot_0_rps,
            a_0,
            a_1,
            a_2,
            a_3,
            a_4,
            a_5,
            t_fc: d.flight_on_time,
        }
    }
}

impl From<FlatDesign> for DesignVector {
    fn from(f: FlatDesign) -> Self {
        DesignVector {
            motor_label: f.motor_label,
            m_add: f.m_add,
            elastic_modulus: f.e,
            leg_radius: f.rho,
            leg_thickness: f.b,
            leg_width: f.h,
            leg_damping: f.b_l,
            zeta_dot_0: f.zeta_dot_0,
            theta_0_deg: f.theta_0,
            theta_dot_0_rps: f.theta_dot_0,
            stance_coeffs: [f.a_0, f.a_1, f.a_2, f.a_3, f.a_4, f.a_5],
            flight_on_time: f.t_fc,
        }
    }
}

impl DesignVector {
    /// Flattens to the optimizer's variable order (see [`BOUNDS`]).
    pub fn to_vec(&self) -> [f64; N_VARS] {
        let a = self.stance_coeffs;
        [
            self.motor_label as f64,
            self.m_add,
            self.elastic_modulus,
            self.leg_radius,
            self.leg_thickness,
            self.leg_width,
            self.leg_damping,
            self.zeta_dot_0,
            self.theta_0_deg,
            self.theta_dot_0_rps,
            a[0],
            a[1],
            a[2],
            a[3],
            a[4],
            a[5],
            self.flight_on_time,
        ]
    }

    /// Inverse of [`to_vec`](Self::to_vec). The motor label is rounded to the
    /// nearest integer.
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() != N_VARS {
            return Err(Error::Domain(format!(
                "design vector needs {N_VARS} entries, got {}",
                x.len()
            )));
        }
        let label = x[0].round();
        if !(label >= 0.0 && label <= u32::MAX as f64) {
            return Err(Error::Domain(format!("motor label {} not representable", x[0])));
        }
        Ok(DesignVector {
            motor_label: label as u32,
            m_add: x[1],
            elastic_modulus: x[2],
            leg_radius: x[3],
            leg_thickness: x[4],
            leg_width: x[5],
            leg_damping: x[6],
            zeta_dot_0: x[7],
            theta_0_deg: x[8],
            theta_dot_0_rps: x[9],
            stance_coeffs: [x[10], x[11], x[12], x[13], x[14], x[15]],
            flight_on_time: x[16],
        })
    }

    /// Checks every variable against [`BOUNDS`].
    pub fn validate(&self) -> Result<()> {
        for (value, (field, _, lower, upper)) in self.to_vec().into_iter().zip(BOUNDS) {
            if !(value >= lower && value <= upper) {
                return Err(Error::OutOfBounds {
                    field,
                    value,
                    lower,
                    upper,
                });
            }
        }
        Ok(())
    }

    /// Reference optimum of the touchdown-angle study.
    ///
    /// Its `theta_dot_0` (1.796 rev/s) lies above the search bound, so it can
    /// only be built with [`build_system_unchecked`].
    pub fn reference_case1() -> Self {
        DesignVector {
            motor_label: 15,
            m_add: 0.400,
            elastic_modulus: 1.173e9,
            leg_radius: 0.0300,
            leg_thickness: 0.0100,
            leg_width: 0.00425,
            leg_damping: 0.00916,
            zeta_dot_0: -1.0467,
            theta_0_deg: 69.385,
            theta_dot_0_rps: 1.796,
            stance_coeffs: [1.383, 1.0727, 2.000, -1.441, 1.706, -0.398],
            flight_on_time: 0.0740,
        }
    }

    /// Reference optimum of the energy study (`theta_dot_0` = 4.104 rev/s,
    /// also outside the search bound).
    pub fn reference_case2() -> Self {
        DesignVector {
            motor_label: 15,
            m_add: 0.330,
            elastic_modulus: 3.133e8,
            leg_radius: 0.0176,
            leg_thickness: 0.00301,
            leg_width: 0.00717,
            leg_damping: 0.00683,
            zeta_dot_0: -1.098,
            theta_0_deg: 63.942,
            theta_dot_0_rps: 4.104,
            stance_coeffs: [1.912, -0.0466, -1.154, -1.936, -0.167, 1.102],
            flight_on_time: 0.0701,
        }
    }
}

/// Stance initial conditions in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    /// Radial leg velocity at the first touchdown (m/s).
    pub zeta_dot_0: f64,
    /// Nominal touchdown angle (rad).
    pub theta_0: f64,
    /// Leg angular rate at the first touchdown (rad/s).
    pub theta_dot_0: f64,
}

/// Physical parameters of one built robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub mass: f64,
    pub k0: f64,
    pub l0: f64,
    pub leg_damping: f64,
    pub gravity: f64,
    pub motor: MotorSpec,
    /// `J_m + J_gb` (kg m^2).
    pub inertia: f64,
    pub initial: InitialConditions,
}

impl SystemParams {
    pub fn relative_stiffness(&self) -> f64 {
        self.k0 * self.l0 / (self.mass * self.gravity)
    }
}

/// Stiffness of a C-shaped leg with rectangular cross-section:
/// `k0 = b h^3 E / (6 rho^3 pi)`.
pub fn leg_stiffness(b: f64, h: f64, e: f64, rho: f64) -> Result<f64> {
    for (name, v) in [("b", b), ("h", h), ("E", e), ("rho", rho)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(b * h.powi(3) * e / (6.0 * rho.powi(3) * PI))
}

/// Minimum structural mass `2 (m_B + m_mcu + 2 m_motor)`; `motor_mass`
/// includes the gearbox.
pub fn minimum_mass(motor_mass: f64) -> f64 {
    2.0 * (BATTERY_MASS + MCU_MASS + 2.0 * motor_mass)
}

pub fn system_mass(motor: &MotorSpec, m_add: f64) -> f64 {
    minimum_mass(motor.mass_kg) + m_add
}

/// Dimensionless `k0 l0 / (m g)`.
pub fn relative_stiffness(k0: f64, l0: f64, mass: f64) -> f64 {
    k0 * l0 / (mass * GRAVITY)
}

/// Validates the design against [`BOUNDS`] and builds its physical
/// parameters.
pub fn build_system(design: &DesignVector, catalog: &Catalog) -> Result<SystemParams> {
    design.validate()?;
    build_system_unchecked(design, catalog)
}

/// [`build_system`] without the bound check, for reference designs that sit
/// outside the search box.
pub fn build_system_unchecked(design: &DesignVector, catalog: &Catalog) -> Result<SystemParams> {
    let motor = catalog.lookup(design.motor_label)?.clone();
    let k0 = leg_stiffness(
        design.leg_thickness,
        design.leg_width,
        design.elastic_modulus,
        design.leg_radius,
    )?;
    let mass = system_mass(&motor, design.m_add);
    Ok(SystemParams {
        mass,
        k0,
        l0: 2.0 * design.leg_radius,
        leg_damping: design.leg_damping,
        gravity: GRAVITY,
        inertia: motor.total_inertia(),
        motor,
        initial: InitialConditions {
            zeta_dot_0: design.zeta_dot_0,
            theta_0: design.theta_0_deg.to_radians(),
            theta_dot_0: design.theta_dot_0_rps * 2.0 * PI,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn stiffness_of_reference_designs() {
        let k1 = leg_stiffness(0.0100, 0.00425, 1.173e9, 0.0300).unwrap();
        let k2 = leg_stiffness(0.00301, 0.00717, 3.133e8, 0.0176).unwrap();
        assert!(rel(k1, 1769.0) < 5e-3, "{k1}");
        assert!(rel(k2, 3382.0) < 5e-3, "{k2}");
    }

    #[test]
    fn stiffness_is_cubic_in_width() {
        let k = leg_stiffness(0.003, 0.002, 2e9, 0.02).unwrap();
        let k2 = leg_stiffness(0.003, 0.004, 2e9, 0.02).unwrap();
        assert!(rel(k2, 8.0 * k) < 1e-14);
    }

    #[test]
    fn stiffness_rejects_non_positive() {
        assert!(leg_stiffness(0.0, 0.002, 2e9, 0.02).is_err());
        assert!(leg_stiffness(0.001, 0.002, -1.0, 0.02).is_err());
    }

    #[test]
    fn mass_formula() {
        let mut m = Catalog::builtin().lookup(1).unwrap().clone();
        m.mass_kg = 0.010;
        assert!((system_mass(&m, 0.0) - 0.056).abs() < 1e-15);
        assert!((system_mass(&m, 0.400) - 0.456).abs() < 1e-15);
        m.mass_kg = 0.0;
        assert!((system_mass(&m, 0.1) - 0.116).abs() < 1e-15);
    }

    #[test]
    fn relative_stiffness_inversion() {
        // m chosen so that k_rel is exactly 12 / 16, then checked forward.
        let m1 = 1769.0 * 0.0600 / (12.0 * GRAVITY);
        let m2 = 3382.0 * 0.0352 / (16.0 * GRAVITY);
        assert!((m1 - 0.902).abs() < 1e-3);
        assert!((m2 - 0.758).abs() < 1e-3);
        assert!(rel(relative_stiffness(1769.0, 0.06, 0.902), 12.0) < 5e-3);
        assert!(rel(relative_stiffness(3382.0, 0.0352, 0.758), 16.0) < 5e-3);
        assert!((relative_stiffness(GRAVITY, 1.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn build_reference_designs() {
        let cat = Catalog::builtin();
        let p1 = build_system_unchecked(&DesignVector::reference_case1(), &cat).unwrap();
        assert!(rel(p1.k0, 1769.0) < 5e-3);
        assert!((p1.l0 - 0.06).abs() < 1e-15);
        assert!((p1.initial.theta_0 - 69.385f64.to_radians()).abs() < 1e-15);
        assert!((p1.initial.theta_dot_0 - 1.796 * 2.0 * PI).abs() < 1e-12);
        assert_eq!(p1.inertia, p1.motor.j_rotor + p1.motor.j_gearbox);

        let p2 = build_system_unchecked(&DesignVector::reference_case2(), &cat).unwrap();
        assert!(rel(p2.k0, 3382.0) < 5e-3);
        assert!((p2.l0 - 0.0352).abs() < 1e-15);

        // theta_dot_0 of the reference designs is above the search bound
        assert!(matches!(
            build_system(&DesignVector::reference_case1(), &cat),
            Err(Error::OutOfBounds { field: "theta_dot_0", .. })
        ));
    }

    #[test]
    fn out_of_bounds_angle_rejected() {
        let mut d = DesignVector::reference_case1();
        d.theta_dot_0_rps = 1.2;
        d.theta_0_deg = 90.0;
        assert!(matches!(
            build_system(&d, &Catalog::builtin()),
            Err(Error::OutOfBounds { field: "theta_0", .. })
        ));
    }

    #[test]
    fn json_is_flat_and_keyed_by_table_names() {
        let d = DesignVector::reference_case2();
        let v = serde_json::to_value(&d).unwrap();
        let obj = v.as_object().unwrap();
        assert_eq!(obj.len(), N_VARS);
        for (name, ..) in BOUNDS {
            assert!(obj.contains_key(name), "missing {name}");
        }
        let back: DesignVector = serde_json::from_value(v).unwrap();
        assert_eq!(back, d);
    }

    proptest! {
        #[test]
        fn stiffness_homogeneity(
            alpha in 0.1f64..10.0, beta in 0.1f64..10.0, gamma in 0.1f64..10.0,
            b in 1e-4f64..1e-2, h in 1e-4f64..1e-2, e in 1e4f64..1e11, rho in 1e-3f64..3e-2,
        ) {
            let k = leg_stiffness(b, h, e, rho).unwrap();
            let scaled = leg_stiffness(alpha * b, h, beta * e, rho).unwrap();
            prop_assert!(rel(scaled, alpha * beta * k) < 1e-12);
            let shrunk = leg_stiffness(b, h, e, gamma * rho).unwrap();
            prop_assert!(rel(shrunk, k / gamma.powi(3)) < 1e-12);
        }

        #[test]
        fn vec_roundtrip(x in proptest::collection::vec(-1.0f64..1.0, N_VARS), label in 1u32..=18) {
            let mut x = x;
            x[0] = label as f64;
            let d = DesignVector::from_slice(&x).unwrap();
            prop_assert_eq!(d.to_vec().to_vec(), x);
        }
    }
}
