//! Open-loop voltage profiles. Each phase runs its own clock that restarts at
//! the event opening the phase.

use serde::{Deserialize, Serialize};

use crate::model::DesignVector;

/// Fifth-order polynomial voltage applied during stance, clamped to the
/// motor's rated voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StanceVoltageProfile {
    /// `a_0 .. a_5`, constant term first.
    pub coeffs: [f64; 6],
    pub v_max: f64,
}

impl StanceVoltageProfile {
    pub fn new(coeffs: [f64; 6], v_max: f64) -> Self {
        Self { coeffs, v_max }
    }

    /// Voltage `t` seconds after touchdown.
    pub fn voltage(&self, t: f64) -> f64 {
        let raw = self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * t + a);
        raw.clamp(-self.v_max, self.v_max)
    }
}

/// Bang-on/bang-off flight profile: full rated voltage for `on_time`, then 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightVoltageProfile {
    pub on_time: f64,
    pub v_max: f64,
}

impl FlightVoltageProfile {
    pub fn new(on_time: f64, v_max: f64) -> Self {
        Self { on_time, v_max }
    }

    /// Voltage `t` seconds after liftoff.
    pub fn voltage(&self, t: f64) -> f64 {
        if t < self.on_time {
            self.v_max
        } else {
            0.0
        }
    }
}

/// Both phase profiles of one design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub stance: StanceVoltageProfile,
    pub flight: FlightVoltageProfile,
}

impl Controller {
    pub fn from_design(design: &DesignVector, v_max: f64) -> Self {
        Self {
            stance: StanceVoltageProfile::new(design.stance_coeffs, v_max),
            flight: FlightVoltageProfile::new(design.flight_on_time, v_max),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stance_reference_coefficients() {
        let d = DesignVector::reference_case1();
        let p = StanceVoltageProfile::new(d.stance_coeffs, 3.0);
        assert_eq!(p.voltage(0.0), 1.383);
        // unclamped sum of coefficients is 4.3227
        let raw: f64 = d.stance_coeffs.iter().sum();
        assert!((raw - 4.3227).abs() < 1e-12);
        assert_eq!(p.voltage(1.0), 3.0);
    }

    #[test]
    fn stance_zero_coeffs() {
        let p = StanceVoltageProfile::new([0.0; 6], 3.0);
        for t in [0.0, 0.01, 1.0, 50.0] {
            assert_eq!(p.voltage(t), 0.0);
        }
    }

    #[test]
    fn stance_matches_power_sum() {
        let a = [0.3, -1.2, 0.7, 1.9, -0.4, 0.05];
        let p = StanceVoltageProfile::new(a, 100.0);
        let t: f64 = 0.37;
        let direct: f64 = a.iter().enumerate().map(|(i, c)| c * t.powi(i as i32)).sum();
        assert!((p.voltage(t) - direct).abs() < 1e-14);
    }

    #[test]
    fn flight_bang_bang() {
        let p = FlightVoltageProfile::new(0.0740, 3.0);
        assert_eq!(p.voltage(0.03), 3.0);
        assert_eq!(p.voltage(0.08), 0.0);
        assert_eq!(p.voltage(0.0740), 0.0);
        let off = FlightVoltageProfile::new(0.0, 3.0);
        assert_eq!(off.voltage(0.0), 0.0);
        assert_eq!(off.voltage(1.0), 0.0);
    }

    proptest! {
        #[test]
        fn stance_voltage_is_clamped(
            a in proptest::array::uniform6(-2.0f64..2.0),
            t in 0.0f64..10.0,
        ) {
            let p = StanceVoltageProfile::new(a, 3.0);
            prop_assert!(p.voltage(t).abs() <= 3.0);
        }

        #[test]
        fn flight_voltage_single_step(on in 0.0f64..0.1, t in 0.0f64..0.2) {
            let p = FlightVoltageProfile::new(on, 3.0);
            let v = p.voltage(t);
            prop_assert_eq!(v, p.voltage(t));
            prop_assert_eq!(v, if t < on { 3.0 } else { 0.0 });
        }
    }
}
