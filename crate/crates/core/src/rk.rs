//! Dormand–Prince 5(4) explicit Runge–Kutta stepping with an embedded error
//! estimate. Spans may be negative.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Result of one trial step.
#[derive(Debug, Clone)]
pub struct Step {
    pub y: Vec<f64>,
    /// RMS of the embedded error scaled by `atol + rtol·max(|y₀|, |y₁|)`;
    /// the step is acceptable when this is at most 1.
    pub err: f64,
}

/// One Dormand–Prince step of size `h` from `(t, y)`.
pub fn step(f: &mut dyn FnMut(f64, &[f64], &mut [f64]), t: f64, y: &[f64], h: f64, rtol: f64, atol: f64) -> Step {
    let n = y.len();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    f(t, y, &mut k[0]);
    for s in 1..7 {
        for i in 0..n {
            let mut acc = y[i];
            for (j, kj) in k.iter().enumerate().take(s) {
                acc += h * A[s][j] * kj[i];
            }
            tmp[i] = acc;
        }
        f(t + C[s] * h, &tmp, &mut k[s]);
    }
    let mut y1 = vec![0.0; n];
    let mut err = 0.0;
    for i in 0..n {
        let mut hi = 0.0;
        let mut lo = 0.0;
        for s in 0..7 {
            hi += B5[s] * k[s][i];
            lo += B4[s] * k[s][i];
        }
        y1[i] = y[i] + h * hi;
        let sc = atol + rtol * y[i].abs().max(y1[i].abs());
        let e = h * (hi - lo) / sc;
        err += e * e;
    }
    let err = if n == 0 { 0.0 } else { num_traits::Float::sqrt(err / n as f64) };
    Step { y: y1, err }
}

/// Step-size update after a trial with scaled error `err`.
pub fn next_step_size(h: f64, err: f64) -> f64 {
    let factor = if err == 0.0 { 5.0 } else { (0.9 * num_traits::Float::powf(err, -0.2)).clamp(0.2, 5.0) };
    h * factor
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
}

/// Adaptive integration of `y' = f(t, y)` from `t0` to `t1` (either direction).
pub fn integrate(
    f: &mut dyn FnMut(f64, &[f64], &mut [f64]),
    t0: f64,
    y0: &[f64],
    t1: f64,
    tol: Tolerances,
) -> Result<Vec<f64>> {
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0.to_vec());
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = (span.abs() / 16.0).min(tol.max_step);
    let min_h = 1e-14 * span.abs().max(1.0);
    let mut guard = 0usize;
    while (t1 - t) * dir > 0.0 {
        guard += 1;
        if guard > 10_000_000 {
            return Err(Error::Precondition(alloc::string::String::from("step budget exhausted")));
        }
        let hh = h.min((t1 - t).abs()).min(tol.max_step);
        let s = step(f, t, &y, dir * hh, tol.rtol, tol.atol);
        if !s.err.is_finite() {
            return Err(Error::BlowUp { t });
        }
        if s.err <= 1.0 {
            t = if (t1 - t).abs() <= hh { t1 } else { t + dir * hh };
            y = s.y;
        } else if hh <= min_h {
            return Err(Error::Precondition(alloc::format!("step size underflow at t = {t}")));
        }
        h = next_step_size(hh, s.err);
    }
    Ok(y)
}
