//! Adaptive Dormand-Prince 5(4) integration of scalar ODEs with blow-up
//! detection.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Integration stops once `|y|` exceeds this.
    pub blow_up: f64,
    pub max_steps: usize,
    pub initial_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            blow_up: 1e3,
            max_steps: 1_000_000,
            initial_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OdeOutcome {
    /// The end point was reached with this value.
    Reached(f64),
    /// `|y|` passed the blow-up threshold at `t`, with value `y`.
    BlowUp { t: f64, y: f64 },
}

/// Accepted nodes of a solution, including the start.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `(t0, y0)` to `t1 > t0`.
pub fn dopri45(
    f: impl Fn(f64, f64) -> f64,
    t0: f64,
    y0: f64,
    t1: f64,
    opts: &OdeOptions,
    mut trajectory: Option<&mut Trajectory>,
) -> Result<OdeOutcome> {
    if !(t1 >= t0) {
        return Err(Error::contract(format!("integration interval [{t0}, {t1}] is reversed")));
    }
    let mut t = t0;
    let mut y = y0;
    if let Some(tr) = trajectory.as_deref_mut() {
        tr.t.push(t);
        tr.y.push(y);
    }
    let mut h = opts.initial_step.min(t1 - t0);
    let mut k1 = f(t, y);
    for _ in 0..opts.max_steps {
        if t >= t1 {
            return Ok(OdeOutcome::Reached(y));
        }
        h = h.min(t1 - t);
        let k2 = f(t + C2 * h, y + h * A21 * k1);
        let k3 = f(t + C3 * h, y + h * (A31 * k1 + A32 * k2));
        let k4 = f(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = f(t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = f(t + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
        let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = f(t + h, y_new);
        let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let scale = opts.abs_tol + opts.rel_tol * y.abs().max(y_new.abs());
        let ratio = (err / scale).abs();
        if !y_new.is_finite() || !ratio.is_finite() {
            // a non-finite trial step is treated as a step that was too long
            h *= 0.2;
            if h < 1e-14 * t.abs().max(1.0) {
                return Ok(OdeOutcome::BlowUp { t, y });
            }
            continue;
        }
        if ratio <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7;
            if let Some(tr) = trajectory.as_deref_mut() {
                tr.t.push(t);
                tr.y.push(y);
            }
            if y.abs() > opts.blow_up {
                return Ok(OdeOutcome::BlowUp { t, y });
            }
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * t.abs().max(1.0) {
            return Ok(OdeOutcome::BlowUp { t, y });
        }
    }
    Err(Error::NoConvergence(format!(
        "ODE integration stalled at t = {t} after {} steps",
        opts.max_steps
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let out = dopri45(|_, y| y, 0.0, 1.0, 3.0, &OdeOptions::default(), None).unwrap();
        match out {
            OdeOutcome::Reached(y) => assert!((y / 3f64.exp() - 1.0).abs() < 1e-10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn riccati_blow_up_is_detected() {
        // y' = y^2, y(0) = 1 has y = 1 / (1 - t)
        let out = dopri45(|_, y| y * y, 0.0, 1.0, 2.0, &OdeOptions::default(), None).unwrap();
        match out {
            OdeOutcome::BlowUp { t, y } => {
                assert!(y > 1e3);
                assert!((t - (1.0 - 1.0 / y)).abs() < 1e-8);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trajectory_records_nodes() {
        let mut tr = Trajectory::default();
        dopri45(|t, _| t.cos(), 0.0, 0.0, 10.0, &OdeOptions::default(), Some(&mut tr)).unwrap();
        assert_eq!(tr.t[0], 0.0);
        assert_eq!(*tr.t.last().unwrap(), 10.0);
        for (t, y) in tr.t.iter().zip(&tr.y) {
            assert!((y - t.sin()).abs() < 1e-10);
        }
        assert!(dopri45(|_, y| y, 1.0, 0.0, 0.5, &OdeOptions::default(), None).is_err());
    }
}
