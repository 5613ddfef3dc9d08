//! Adaptive Dormand–Prince 5(4) integrator.
//!
//! Steps are clamped so that every requested output time is hit exactly,
//! which keeps sampled trajectories free of interpolation error.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local error tolerances for the embedded error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rel: 1e-10, abs: 1e-12 }
    }
}

impl Tolerances {
    pub fn new(rel: f64, abs: f64) -> Self {
        Self { rel, abs }
    }
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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrator configuration.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub tol: Tolerances,
    pub max_steps: usize,
    /// Upper bound on |h|; `None` means the whole span.
    pub max_step: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            max_steps: 2_000_000,
            max_step: None,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: Tolerances) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Counters returned alongside the final state.
#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// `outputs` must be monotone in the direction of integration and lie in the
/// span; `observer` is called with each of them (and never with anything else).
/// `project`, when given, is applied to every accepted state.
pub fn integrate<F, O>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    options: &OdeOptions,
    outputs: &[f64],
    mut observer: O,
    project: Option<&dyn Fn(&mut [f64])>,
) -> Result<(Vec<f64>, OdeStats)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]),
{
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    let span = t1 - t0;
    let mut next_out = 0;
    while next_out < outputs.len() && (outputs[next_out] - t0) * span.signum() <= 0.0 {
        observer(outputs[next_out], &y);
        next_out += 1;
    }
    if span == 0.0 {
        for &t in &outputs[next_out..] {
            observer(t, &y);
        }
        return Ok((y, stats));
    }
    let dir = span.signum();
    let tol = options.tol;
    let max_step = options.max_step.unwrap_or(span.abs()).min(span.abs());

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];

    rhs(t0, &y, &mut k1);
    stats.evaluations += 1;

    let mut h = initial_step(&mut rhs, t0, &y, &k1, dir, tol, max_step, &mut stats);
    let mut t = t0;
    let mut last_err: f64 = 1e-4;

    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        if stats.accepted + stats.rejected >= options.max_steps {
            return Err(Error::TooManySteps(options.max_steps));
        }
        let mut step = h.abs().min(max_step);
        let mut hit_output = false;
        let mut hit_end = false;
        if next_out < outputs.len() {
            let to_out = (outputs[next_out] - t) * dir;
            if to_out <= step * (1.0 + 1e-12) {
                step = to_out;
                hit_output = true;
            }
        }
        if remaining <= step * (1.0 + 1e-12) {
            step = remaining;
            hit_end = true;
            if next_out < outputs.len() && ((outputs[next_out] - t1) * dir).abs() <= 1e-14 * t1.abs().max(1.0) {
                hit_output = true;
            }
        }
        let hs = step * dir;
        if step <= 1e-14 * t.abs().max(1.0) && !hit_output && !hit_end {
            return Err(Error::StepSizeUnderflow { t, state: y });
        }

        for i in 0..n {
            ytmp[i] = y[i] + hs * A21 * k1[i];
        }
        rhs(t + C2 * hs, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * hs, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * hs, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * hs, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] = y[i]
                + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(t + hs, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        rhs(t + hs, &ynew, &mut k7);
        stats.evaluations += 6;

        let mut err = 0.0;
        for i in 0..n {
            let e = hs
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.abs + tol.rel * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / n as f64).sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h = 0.25 * hs;
            if h.abs() <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t, state: y });
            }
            continue;
        }

        if err <= 1.0 {
            stats.accepted += 1;
            t = if hit_end { t1 } else if hit_output { outputs[next_out] } else { t + hs };
            std::mem::swap(&mut y, &mut ynew);
            if let Some(p) = project {
                p(&mut y);
                rhs(t, &y, &mut k1);
                stats.evaluations += 1;
            } else {
                std::mem::swap(&mut k1, &mut k7);
            }
            if hit_output {
                observer(outputs[next_out], &y);
                next_out += 1;
                while next_out < outputs.len()
                    && ((outputs[next_out] - t) * dir).abs() <= 1e-14 * t.abs().max(1.0)
                {
                    observer(outputs[next_out], &y);
                    next_out += 1;
                }
            }
            // PI step-size control
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.7 / 5.0) * last_err.powf(0.4 / 5.0)).clamp(0.2, 5.0)
            };
            last_err = err.max(1e-4);
            // a clamped step must not shrink the natural step size
            let base = if hit_output || hit_end { h.abs().max(step) } else { step };
            h = dir * (base * fac).min(max_step);
        } else {
            stats.rejected += 1;
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            h = dir * step * fac;
        }
    }
    while next_out < outputs.len() {
        observer(outputs[next_out], &y);
        next_out += 1;
    }
    Ok((y, stats))
}

#[allow(clippy::too_many_arguments)]
fn initial_step<F>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    dir: f64,
    tol: Tolerances,
    max_step: f64,
    stats: &mut OdeStats,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..n {
        let sc = tol.abs + tol.rel * y0[i].abs();
        d0 += (y0[i] / sc).powi(2);
        d1 += (f0[i] / sc).powi(2);
    }
    d0 = (d0 / n as f64).sqrt();
    d1 = (d1 / n as f64).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(max_step);
    let mut y1 = vec![0.0; n];
    for i in 0..n {
        y1[i] = y0[i] + dir * h0 * f0[i];
    }
    let mut f1 = vec![0.0; n];
    rhs(t0 + dir * h0, &y1, &mut f1);
    stats.evaluations += 1;
    let mut d2 = 0.0;
    for i in 0..n {
        let sc = tol.abs + tol.rel * y0[i].abs();
        d2 += ((f1[i] - f0[i]) / sc).powi(2);
    }
    d2 = (d2 / n as f64).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    dir * (100.0 * h0).min(h1).min(max_step)
}

/// Final state only.
pub fn flow<F>(rhs: F, t0: f64, y0: &[f64], t1: f64, options: &OdeOptions) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate(rhs, t0, y0, t1, options, &[], |_, _| {}, None).map(|(y, _)| y)
}

/// State transition matrix of the linear system `y' = M(t) y` from `t0` to `t1`.
pub fn transition_matrix<M>(coeff: M, n: usize, t0: f64, t1: f64, options: &OdeOptions) -> Result<DMatrix<f64>>
where
    M: Fn(f64) -> DMatrix<f64>,
{
    let y0 = DMatrix::<f64>::identity(n, n);
    let y = flow(
        |t, y, dy| {
            let m = coeff(t);
            let phi = nalgebra::DMatrixView::from_slice(y, n, n);
            let prod = &m * phi;
            dy.copy_from_slice(prod.as_slice());
        },
        t0,
        y0.as_slice(),
        t1,
        options,
    )?;
    Ok(DMatrix::from_vec(n, n, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let y = flow(|_, y, dy| dy[0] = -y[0], 0.0, &[1.0], 1.0, &OdeOptions::default()).unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn zero_span_returns_initial_state() {
        let y = flow(|_, y, dy| dy[0] = -y[0], 3.0, &[1.25], 3.0, &OdeOptions::default()).unwrap();
        assert_eq!(y, vec![1.25]);
    }

    #[test]
    fn backward_integration() {
        let y = flow(|_, y, dy| dy[0] = y[0], 1.0, &[1.0], 0.0, &OdeOptions::default()).unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn outputs_are_hit_exactly() {
        let outs: Vec<f64> = (0..=10).map(|k| k as f64 * 0.3).collect();
        let mut seen = Vec::new();
        integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[0.0, 1.0],
            3.0,
            &OdeOptions::default(),
            &outs,
            |t, y| seen.push((t, y[0])),
            None,
        )
        .unwrap();
        assert_eq!(seen.len(), outs.len());
        for ((t, x), &to) in seen.iter().zip(&outs) {
            assert_eq!(*t, to);
            assert!((x - t.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn scalar_transition_is_exponential() {
        let m = -0.7;
        let phi = transition_matrix(|_| DMatrix::from_element(1, 1, m), 1, 0.5, 2.0, &OdeOptions::default()).unwrap();
        assert!((phi[(0, 0)] - (m * 1.5f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn fifth_order_global_error() {
        // halving the tolerance-free fixed step count checks the method order
        let run = |max_step: f64| {
            let opts = OdeOptions {
                tol: Tolerances::new(1e3, 1e3),
                max_step: Some(max_step),
                ..OdeOptions::default()
            };
            let y = flow(|t, y, dy| dy[0] = y[0] * t.cos(), 0.0, &[1.0], 2.0, &opts).unwrap();
            (y[0] - 2.0f64.sin().exp()).abs()
        };
        let e1 = run(0.1);
        let e2 = run(0.05);
        let order = (e1 / e2).log2();
        assert!(order > 4.5, "observed order {order}");
    }
}
