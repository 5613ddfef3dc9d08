//! Limit cycles: shooting Newton, state transition and monodromy matrices, Floquet multipliers.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::PeriodicSeries;
use crate::linalg::eigenvalues;
use crate::ode::{self, OdeOptions, Tolerances};
use crate::systems::SystemSpec;

/// Knobs for [`find_limit_cycle`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CycleOptions {
    /// Newton stopping threshold on the shooting residual.
    pub tol: f64,
    pub samples: usize,
    pub ode: Tolerances,
    pub max_iter: usize,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            samples: 512,
            ode: Tolerances::default(),
            max_iter: 50,
        }
    }
}

/// A periodic orbit sampled on a uniform phase grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitCycle {
    period: f64,
    curve: PeriodicSeries,
    multipliers: Vec<Complex<f64>>,
    monodromy: DMatrix<f64>,
    tol: Tolerances,
    newton_iterations: usize,
    residual: f64,
}

impl LimitCycle {
    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.curve.width()
    }

    pub fn len(&self) -> usize {
        self.curve.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curve.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.curve.step()
    }

    pub fn phase(&self, k: usize) -> f64 {
        k as f64 * self.step()
    }

    pub fn phases(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.phase(k)).collect()
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        self.curve.sample(k)
    }

    /// `b(gamma(tau_k))`, stored as the exact derivative data of the interpolant.
    pub fn sample_velocity(&self, k: usize) -> &[f64] {
        self.curve.slope(k)
    }

    pub fn state(&self, tau: f64) -> DVector<f64> {
        DVector::from_vec(self.curve.eval(tau))
    }

    pub fn velocity(&self, tau: f64) -> DVector<f64> {
        DVector::from_vec(self.curve.deriv(tau))
    }

    pub fn curve(&self) -> &PeriodicSeries {
        &self.curve
    }

    pub fn wrap(&self, tau: f64) -> f64 {
        self.curve.wrap(tau)
    }

    pub fn multipliers(&self) -> &[Complex<f64>] {
        &self.multipliers
    }

    /// Monodromy matrix at phase zero.
    pub fn monodromy_at_zero(&self) -> &DMatrix<f64> {
        &self.monodromy
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    pub fn newton_iterations(&self) -> usize {
        self.newton_iterations
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Index of the multiplier closest to one.
    pub fn trivial_index(&self) -> usize {
        trivial_index(&self.multipliers)
    }

    pub fn trivial_multiplier(&self) -> Complex<f64> {
        self.multipliers[self.trivial_index()]
    }

    pub fn nontrivial_multipliers(&self) -> Vec<Complex<f64>> {
        let t = self.trivial_index();
        self.multipliers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != t)
            .map(|(_, m)| *m)
            .collect()
    }

    /// Cycle length by the periodic trapezoid rule on the speed samples.
    pub fn arclength(&self) -> f64 {
        (0..self.len())
            .map(|k| self.sample_velocity(k).iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum::<f64>()
            * self.step()
    }

    pub fn nearest_sample(&self, x: &[f64]) -> usize {
        (0..self.len())
            .map(|k| {
                let d: f64 = self.sample(k).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (k, d)
            })
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|(k, _)| k)
            .unwrap_or(0)
    }

    /// Assembles a cycle from externally known samples (used by tests and caches).
    pub fn from_parts(
        period: f64,
        samples: Vec<f64>,
        velocities: Vec<f64>,
        dim: usize,
        monodromy: DMatrix<f64>,
    ) -> Self {
        let curve = PeriodicSeries::new(period, dim, samples, velocities);
        let multipliers = eigenvalues(&monodromy);
        Self {
            period,
            curve,
            multipliers,
            monodromy,
            tol: Tolerances::default(),
            newton_iterations: 0,
            residual: 0.0,
        }
    }
}

fn trivial_index(mult: &[Complex<f64>]) -> usize {
    mult.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).norm().partial_cmp(&(b.1 - 1.0).norm()).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Flow map of `x' = b(x)` over time `t`.
pub fn integrate_flow(spec: &SystemSpec, x0: &[f64], t: f64, tol: Tolerances) -> Result<DVector<f64>> {
    if x0.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: x0.len(),
        });
    }
    if !t.is_finite() || tol.rel <= 0.0 || tol.abs <= 0.0 {
        return Err(Error::InvalidArgument("time span must be finite and tolerances positive".into()));
    }
    let y = ode::flow(|_, x, dx| spec.drift_into(x, dx), 0.0, x0, t, &OdeOptions::with_tol(tol))?;
    Ok(DVector::from_vec(y))
}

/// Trajectory samples of the flow at the requested times.
pub fn sample_flow(spec: &SystemSpec, x0: &[f64], times: &[f64], tol: Tolerances) -> Result<Vec<DVector<f64>>> {
    let mut out = Vec::with_capacity(times.len());
    let t1 = times.last().copied().unwrap_or(0.0);
    ode::integrate(
        |_, x, dx| spec.drift_into(x, dx),
        0.0,
        x0,
        t1,
        &OdeOptions::with_tol(tol),
        times,
        |_, x| out.push(DVector::from_column_slice(x)),
        None,
    )?;
    Ok(out)
}

/// Right-hand side of the state augmented with its variational matrix.
fn variational_rhs(spec: &SystemSpec) -> impl FnMut(f64, &[f64], &mut [f64]) + '_ {
    let d = spec.dim();
    move |_, y, dy| {
        let x = &y[..d];
        spec.drift_into(x, &mut dy[..d]);
        let j = spec.jacobian(x);
        let phi = nalgebra::DMatrixView::from_slice(&y[d..], d, d);
        let prod = &j * phi;
        dy[d..].copy_from_slice(prod.as_slice());
    }
}

/// Integrates the state and `Phi(t, 0)` together; returns `(x(t), Phi)`.
pub fn flow_with_sensitivity(spec: &SystemSpec, x0: &[f64], t: f64, tol: Tolerances) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = spec.dim();
    let mut y0 = x0.to_vec();
    y0.extend_from_slice(DMatrix::<f64>::identity(d, d).as_slice());
    let y = ode::flow(variational_rhs(spec), 0.0, &y0, t, &OdeOptions::with_tol(tol))?;
    Ok((DVector::from_column_slice(&y[..d]), DMatrix::from_column_slice(d, d, &y[d..])))
}

/// Integrates from `x0` long enough to settle and estimates the period from
/// successive returns to a transversal section. Returns `(point, period)`.
pub fn relax_to_cycle(spec: &SystemSpec, x0: &[f64], transient: f64, window: f64) -> Result<(DVector<f64>, f64)> {
    let tol = Tolerances::new(1e-9, 1e-11);
    let start = integrate_flow(spec, x0, transient, tol)?;
    let normal = spec.eval_drift(start.as_slice())?;
    if normal.norm() < 1e-8 {
        return Err(Error::ConvergedToEquilibrium {
            point: start.as_slice().to_vec(),
        });
    }
    let n = 20_000;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * window / n as f64).collect();
    let traj = sample_flow(spec, start.as_slice(), &times, tol)?;
    let section = |x: &DVector<f64>| normal.dot(&(x - &start));
    // a return is an upward crossing close to the start point, after having left it
    let scale = traj.iter().map(|x| (x - &start).norm()).fold(0.0, f64::max);
    let mut left = false;
    for k in 1..traj.len() {
        let dist = (&traj[k] - &start).norm();
        if dist > 0.5 * scale {
            left = true;
        }
        let (s0, s1) = (section(&traj[k - 1]), section(&traj[k]));
        if left && s0 < 0.0 && s1 >= 0.0 && dist < 0.25 * scale {
            let frac = s0 / (s0 - s1);
            let period = times[k - 1] + frac * (times[k] - times[k - 1]);
            return Ok((start, period));
        }
    }
    Err(Error::NoConvergence {
        iterations: 0,
        residual: scale,
    })
}

/// Damped Newton shooting for a periodic orbit through the hyperplane
/// `<b(x_guess), x - x_guess> = 0`.
pub fn find_limit_cycle(spec: &SystemSpec, x_guess: &[f64], t_guess: f64, opts: &CycleOptions) -> Result<LimitCycle> {
    let d = spec.dim();
    if x_guess.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x_guess.len() });
    }
    if !(t_guess > 0.0) {
        return Err(Error::InvalidArgument("period guess must be positive".into()));
    }
    let xg = DVector::from_column_slice(x_guess);
    let bg = spec.eval_drift(x_guess)?;
    if bg.norm() < 1e-12 {
        return Err(Error::ConvergedToEquilibrium { point: x_guess.to_vec() });
    }

    let residual = |x0: &DVector<f64>, t: f64| residual_with(spec, x0, t, &bg, &xg, opts.ode);

    let mut x = xg.clone();
    let mut t = t_guess;
    let (mut r, mut phi, mut xt) = residual(&x, t)?;
    let mut rnorm = r.norm();
    let mut iterations = 0;
    while rnorm > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: rnorm });
        }
        iterations += 1;
        let step = newton_step(spec, &r, &phi, &xt, &bg).ok_or(Error::NoConvergence { iterations, residual: rnorm })?;
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-4 {
            let xn = &x + step.rows(0, d) * alpha;
            let tn = t + alpha * step[d];
            if tn > 1e-6 * t_guess {
                if let Ok((rn, phin, xtn)) = residual(&xn, tn) {
                    let nn = rn.norm();
                    if nn < rnorm {
                        x = xn;
                        t = tn;
                        r = rn;
                        phi = phin;
                        xt = xtn;
                        rnorm = nn;
                        accepted = true;
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // stagnation at the integrator noise floor counts as converged
            if rnorm <= 1e3 * opts.tol {
                break;
            }
            return Err(Error::NoConvergence { iterations, residual: rnorm });
        }
        if t < 1e-3 * t_guess || spec.drift(x.as_slice()).norm() < 1e-10 {
            return Err(Error::ConvergedToEquilibrium {
                point: x.as_slice().to_vec(),
            });
        }
    }
    if spec.drift(x.as_slice()).norm() < 1e-10 {
        return Err(Error::ConvergedToEquilibrium {
            point: x.as_slice().to_vec(),
        });
    }
    // a few extra steps at a tighter integration tolerance remove the seam
    // mismatch left by the tolerance floor of the shooting residual
    let fine = polish_tolerance(opts.ode);
    let (mut rf, mut phif, mut xtf) = residual_with(spec, &x, t, &bg, &xg, fine)?;
    for _ in 0..4 {
        let step = match newton_step(spec, &rf, &phif, &xtf, &bg) {
            Some(s) => s,
            None => break,
        };
        let xn = &x + step.rows(0, d);
        let tn = t + step[d];
        match residual_with(spec, &xn, tn, &bg, &xg, fine) {
            Ok((rn, pn, xtn)) if rn.norm() < rf.norm() => {
                x = xn;
                t = tn;
                rf = rn;
                phif = pn;
                xtf = xtn;
            }
            _ => break,
        }
    }
    let rnorm = rnorm.min(rf.norm());
    let _ = (phi, xt);
    let opts = CycleOptions { ode: fine, ..*opts };
    assemble(spec, x.as_slice(), t, phif, &opts, iterations, rnorm)
}

fn polish_tolerance(tol: Tolerances) -> Tolerances {
    Tolerances::new((tol.rel * 1e-2).max(1e-14), (tol.abs * 1e-2).max(1e-16))
}

fn residual_with(
    spec: &SystemSpec,
    x0: &DVector<f64>,
    t: f64,
    bg: &DVector<f64>,
    xg: &DVector<f64>,
    tol: Tolerances,
) -> Result<(DVector<f64>, DMatrix<f64>, DVector<f64>)> {
    let d = spec.dim();
    let (xt, phi) = flow_with_sensitivity(spec, x0.as_slice(), t, tol)?;
    let mut r = DVector::zeros(d + 1);
    r.rows_mut(0, d).copy_from(&(&xt - x0));
    r[d] = bg.dot(&(x0 - xg));
    Ok((r, phi, xt))
}

fn newton_step(spec: &SystemSpec, r: &DVector<f64>, phi: &DMatrix<f64>, xt: &DVector<f64>, bg: &DVector<f64>) -> Option<DVector<f64>> {
    let d = spec.dim();
    let bt = spec.drift(xt.as_slice());
    let mut jac = DMatrix::zeros(d + 1, d + 1);
    jac.view_mut((0, 0), (d, d)).copy_from(&(phi - DMatrix::identity(d, d)));
    jac.view_mut((0, d), (d, 1)).copy_from(&bt);
    jac.view_mut((d, 0), (1, d)).copy_from(&bg.transpose());
    jac.lu().solve(&(-r))
}

fn assemble(
    spec: &SystemSpec,
    x0: &[f64],
    period: f64,
    monodromy: DMatrix<f64>,
    opts: &CycleOptions,
    iterations: usize,
    residual: f64,
) -> Result<LimitCycle> {
    let d = spec.dim();
    let k = opts.samples.max(8);
    let times: Vec<f64> = (0..k).map(|i| i as f64 * period / k as f64).collect();
    let traj = sample_flow(spec, x0, &times, opts.ode)?;
    let mut values = Vec::with_capacity(k * d);
    let mut slopes = Vec::with_capacity(k * d);
    for (i, x) in traj.iter().enumerate() {
        let b = spec.eval_drift(x.as_slice())?;
        if b.norm() < 1e-10 {
            return Err(Error::VanishingDrift { tau: times[i] });
        }
        values.extend_from_slice(x.as_slice());
        slopes.extend_from_slice(b.as_slice());
    }
    Ok(LimitCycle {
        period,
        curve: PeriodicSeries::new(period, d, values, slopes),
        multipliers: eigenvalues(&monodromy),
        monodromy,
        tol: opts.ode,
        newton_iterations: iterations,
        residual,
    })
}

/// Relaxation followed by Newton shooting; the usual entry point for builtins.
pub fn locate_cycle(spec: &SystemSpec, basin_point: &[f64], opts: &CycleOptions) -> Result<LimitCycle> {
    let (x, t) = relax_to_cycle(spec, basin_point, 60.0, 40.0)?;
    find_limit_cycle(spec, x.as_slice(), t, opts)
}

/// `Phi(tau1, tau0)` of the variational equation along the cycle.
pub fn state_transition(spec: &SystemSpec, cycle: &LimitCycle, tau0: f64, tau1: f64) -> Result<DMatrix<f64>> {
    let x0 = cycle.state(tau0);
    let (_, phi) = flow_with_sensitivity(spec, x0.as_slice(), tau1 - tau0, cycle.tolerances())?;
    Ok(phi)
}

/// `Phi(tau + T, tau)`.
pub fn monodromy(spec: &SystemSpec, cycle: &LimitCycle, tau: f64) -> Result<DMatrix<f64>> {
    state_transition(spec, cycle, tau, tau + cycle.period())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    Indeterminate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub verdict: Stability,
    /// `1 - max |mu|` over the nontrivial multipliers.
    pub margin: f64,
    pub max_nontrivial_modulus: f64,
    pub trivial_residual: f64,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.verdict == Stability::Stable
    }
}

pub fn is_asymptotically_stable(cycle: &LimitCycle) -> StabilityReport {
    let max = cycle
        .nontrivial_multipliers()
        .iter()
        .map(|m| m.norm())
        .fold(0.0, f64::max);
    let margin = 1.0 - max;
    let verdict = if margin.abs() <= 1e-6 {
        Stability::Indeterminate
    } else if margin > 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    StabilityReport {
        verdict,
        margin,
        max_nontrivial_modulus: max,
        trivial_residual: (cycle.trivial_multiplier() - 1.0).norm(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::BuiltinCatalog;
    use std::f64::consts::PI;

    fn hopf_cycle() -> LimitCycle {
        find_limit_cycle(&BuiltinCatalog::hopf(), &[1.2, 0.0], 6.0, &CycleOptions::default()).unwrap()
    }

    #[test]
    fn hopf_flow_is_attracted() {
        let x = integrate_flow(&BuiltinCatalog::hopf(), &[2.0, 0.0], 50.0, Tolerances::default()).unwrap();
        assert!((x.norm() - 1.0).abs() < 1e-6);
        let x = integrate_flow(&BuiltinCatalog::hopf(), &[2.0, 0.0], 0.0, Tolerances::default()).unwrap();
        assert_eq!(x.as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn hopf_cycle_is_unit_circle() {
        let c = hopf_cycle();
        assert!((c.period() - 2.0 * PI).abs() < 1e-8, "{}", c.period());
        for k in (0..c.len()).step_by(37) {
            let x = c.sample(k);
            assert!(((x[0] * x[0] + x[1] * x[1]).sqrt() - 1.0).abs() < 1e-8);
        }
        let nt = c.nontrivial_multipliers();
        assert!((nt[0].re - (-4.0 * PI).exp()).abs() < 1e-8);
        assert!((c.trivial_multiplier() - 1.0).norm() < 1e-6);
        let rep = is_asymptotically_stable(&c);
        assert!(rep.is_stable());
        assert!((rep.margin - (1.0 - (-4.0 * PI).exp())).abs() < 1e-8);
    }

    #[test]
    fn reversed_hopf_is_unstable() {
        let spec = BuiltinCatalog::hopf().time_reversed();
        let c = find_limit_cycle(&spec, &[1.0, 0.0], 6.0, &CycleOptions::default()).unwrap();
        assert_eq!(is_asymptotically_stable(&c).verdict, Stability::Unstable);
    }

    #[test]
    fn transition_composition_and_identity() {
        let spec = BuiltinCatalog::hopf();
        let c = hopf_cycle();
        let id = state_transition(&spec, &c, 0.7, 0.7).unwrap();
        assert_eq!(id, DMatrix::identity(2, 2));
        let p10 = state_transition(&spec, &c, 0.3, 1.1).unwrap();
        let p21 = state_transition(&spec, &c, 1.1, 2.5).unwrap();
        let p20 = state_transition(&spec, &c, 0.3, 2.5).unwrap();
        assert!((p21 * p10 - p20).abs().max() < 1e-8);
    }

    #[test]
    fn equilibrium_guess_is_reported() {
        let spec = BuiltinCatalog::hopf();
        let err = find_limit_cycle(&spec, &[0.0, 0.0], 6.0, &CycleOptions::default()).unwrap_err();
        assert!(matches!(err, Error::ConvergedToEquilibrium { .. }));
    }
}
