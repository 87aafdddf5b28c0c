//! Adaptive Dormand–Prince 5(4) integration with output at prescribed times.

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
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-10, atol: 1e-12, max_steps: 100_000 }
    }
}

/// Integrates `y' = f(s, y)` from `s0` and returns the state at each entry of
/// `outputs` (nondecreasing, all `>= s0`). `check` runs after every accepted
/// step and may abort the integration.
pub fn integrate<F, K>(mut f: F, s0: f64, y0: &[f64], outputs: &[f64], tol: Tolerances, mut check: K) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    K: FnMut(f64, &[f64]) -> Result<()>,
{
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut s = s0;
    let mut out = Vec::with_capacity(outputs.len());
    let Some(&last) = outputs.last() else { return Ok(out) };
    if outputs.windows(2).any(|w| w[1] < w[0]) || outputs[0] < s0 {
        return Err(Error::InvalidArgument("output times must be nondecreasing and after the start".into()));
    }
    let mut k = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    let mut h = (0.05 * (last - s0)).clamp(1e-8, 0.05);
    f(s, &y, &mut k[0])?;
    let mut next = 0;
    let mut steps = 0;
    while next < outputs.len() {
        if outputs[next] <= s {
            out.push(y.clone());
            next += 1;
            continue;
        }
        steps += 1;
        if steps > tol.max_steps {
            return Err(Error::IntegrationFailed(format!("step limit reached at s = {s}")));
        }
        let target = outputs[next];
        let mut step = h.min(target - s);
        // avoid leaving a sliver before the output time
        if target - s - step < 1e-3 * step {
            step = target - s;
        }
        let clamped = step < h;
        for stage in 1..7 {
            for d in 0..dim {
                let mut acc = y[d];
                for (j, kj) in k.iter().enumerate().take(stage) {
                    acc += step * A[stage][j] * kj[d];
                }
                tmp[d] = acc;
            }
            let (_, rest) = k.split_at_mut(stage);
            f(s + C[stage] * step, &tmp, &mut rest[0])?;
        }
        // tmp now holds the fifth-order solution (FSAL stage)
        let mut err = 0.0;
        for d in 0..dim {
            let mut e = 0.0;
            for j in 0..7 {
                e += E[j] * k[j][d];
            }
            let sc = tol.atol + tol.rtol * y[d].abs().max(tmp[d].abs());
            err += (step * e / sc).powi(2);
        }
        let err = (err / dim as f64).sqrt();
        if !err.is_finite() {
            h = 0.25 * step;
            if h < 1e-14 * (1.0 + s.abs()) {
                return Err(Error::IntegrationFailed(format!("non-finite state near s = {s}")));
            }
            continue;
        }
        if err <= 1.0 {
            s = if step == target - s { target } else { s + step };
            y.copy_from_slice(&tmp);
            k.swap(0, 6);
            check(s, &y)?;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = if clamped { h.max(step * fac) } else { step * fac };
        } else {
            h = step * (0.9 * err.powf(-0.2)).max(0.2);
            if h < 1e-14 * (1.0 + s.abs()) {
                return Err(Error::IntegrationFailed(format!("step size underflow at s = {s}")));
            }
        }
    }
    Ok(out)
}
