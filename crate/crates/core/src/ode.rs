//! Dormand–Prince 5(4) integrator with PI step-size control, 4th-order dense
//! output, and a bracketing root finder for locating events on the dense
//! output.

use serde::{Deserialize, Serialize};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

/// Why a step could not be taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepFailure {
    NonFinite { t: f64 },
    StepTooSmall { t: f64, h: f64 },
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    coeffs: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> [f64; N] {
        self.coeffs[0]
    }

    pub fn end(&self) -> [f64; N] {
        let mut y = [0.0; N];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.coeffs[0][i] + self.coeffs[1][i];
        }
        y
    }

    /// Interpolated state at `t` (clamped into the step).
    pub fn eval(&self, t: f64) -> [f64; N] {
        if t >= self.t1() {
            return self.end();
        }
        let theta = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
        }
        y
    }
}

/// Adaptive integrator for `y' = f(t, y)` advancing one accepted step at a
/// time. The right-hand side must be smooth on `[t, t_stop]`; callers restart
/// the integrator across discontinuities.
pub struct Dopri5<const N: usize, F> {
    f: F,
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    h_min: f64,
    fac_old: f64,
    tol: Tolerances,
    t_stop: f64,
    pub n_evals: usize,
}

impl<const N: usize, F> Dopri5<N, F>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    pub fn new(mut f: F, t0: f64, y0: [f64; N], t_stop: f64, tol: Tolerances) -> Self {
        let k1 = f(t0, &y0);
        let mut this = Self {
            f,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            h_min: 0.0,
            fac_old: 1e-4,
            tol,
            t_stop,
            n_evals: 1,
        };
        this.h = this.initial_step();
        this.h_min = 1e-14 * t0.abs().max(1.0);
        this
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    pub fn finished(&self) -> bool {
        self.t >= self.t_stop
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.tol.abs + self.tol.rel * a.abs().max(b.abs())
    }

    fn initial_step(&mut self) -> f64 {
        let span = self.t_stop - self.t;
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..N {
            let sk = self.scale(self.y[i], 0.0);
            dnf += (self.k1[i] / sk).powi(2);
            dny += (self.y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(span);
        let mut y1 = [0.0; N];
        for i in 0..N {
            y1[i] = self.y[i] + h * self.k1[i];
        }
        let f1 = (self.f)(self.t + h, &y1);
        self.n_evals += 1;
        let mut der2 = 0.0;
        for i in 0..N {
            let sk = self.scale(self.y[i], 0.0);
            der2 += ((f1[i] - self.k1[i]) / sk).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(0.2)
        };
        (100.0 * h).min(h1).min(span).max(f64::MIN_POSITIVE)
    }

    /// Takes one accepted step, shrinking `h` until the error test passes.
    pub fn step(&mut self) -> Result<DenseStep<N>, StepFailure> {
        loop {
            let h = self.h.min(self.t_stop - self.t);
            if h < self.h_min {
                return Err(StepFailure::StepTooSmall { t: self.t, h });
            }
            let (t, y, k1) = (self.t, self.y, self.k1);
            let mut tmp = [0.0; N];

            for i in 0..N {
                tmp[i] = y[i] + h * A21 * k1[i];
            }
            let k2 = (self.f)(t + C2 * h, &tmp);
            for i in 0..N {
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            let k3 = (self.f)(t + C3 * h, &tmp);
            for i in 0..N {
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            let k4 = (self.f)(t + C4 * h, &tmp);
            for i in 0..N {
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            let k5 = (self.f)(t + C5 * h, &tmp);
            for i in 0..N {
                tmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let k6 = (self.f)(t + h, &tmp);
            let mut y1 = [0.0; N];
            for i in 0..N {
                y1[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            let k7 = (self.f)(t + h, &y1);
            self.n_evals += 6;

            let mut err = 0.0;
            for i in 0..N {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                err += (e / self.scale(y[i], y1[i])).powi(2);
            }
            let err = (err / N as f64).sqrt();
            if !err.is_finite() || y1.iter().chain(k7.iter()).any(|v| !v.is_finite()) {
                // retry with a much smaller step before giving up
                self.h = h * FAC_MIN;
                if self.h < self.h_min {
                    return Err(StepFailure::NonFinite { t });
                }
                continue;
            }

            let fac11 = err.powf(EXPO1);
            if err <= 1.0 {
                let fac = (fac11 / self.fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                self.fac_old = err.max(1e-4);
                let mut coeffs = [[0.0; N]; 5];
                for i in 0..N {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    coeffs[0][i] = y[i];
                    coeffs[1][i] = ydiff;
                    coeffs[2][i] = bspl;
                    coeffs[3][i] = ydiff - h * k7[i] - bspl;
                    coeffs[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                let t1 = if self.t_stop - (t + h) <= self.h_min {
                    self.t_stop
                } else {
                    t + h
                };
                self.t = t1;
                self.y = y1;
                self.k1 = k7;
                self.h = h / fac;
                return Ok(DenseStep { t0: t, h: t1 - t, coeffs });
            }
            self.h = h / (1.0 / FAC_MIN).min(fac11 / SAFETY);
        }
    }
}

/// Locates a root of `g` in `[a, b]` given `g(a)` and `g(b)` of opposite
/// sign (Illinois false position). Returns the bracket end lying on the
/// same side as `b`, within `t_tol` of the root or with `|g| <= g_tol`.
pub fn locate_root<G>(mut g: G, mut a: f64, mut b: f64, mut ga: f64, mut gb: f64, t_tol: f64, g_tol: f64) -> f64
where
    G: FnMut(f64) -> f64,
{
    debug_assert!(ga * gb <= 0.0);
    if gb == 0.0 {
        return b;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= t_tol && gb.abs() <= g_tol {
            break;
        }
        if (b - a).abs() <= f64::EPSILON * b.abs().max(1.0) * 4.0 {
            break;
        }
        let mut t = (a * gb - b * ga) / (gb - ga);
        if !(t > a.min(b) && t < a.max(b)) {
            t = 0.5 * (a + b);
        }
        let gt = g(t);
        if gt == 0.0 {
            return t;
        }
        if gt.signum() == gb.signum() {
            b = t;
            gb = gt;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = t;
            ga = gt;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    b
}
