//! Freidlin-Wentzell Hamiltonian and extremal trajectories shot off the tube.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localqp::LocalModel;
use crate::systems::{DiffusionKind, SystemSpec};

/// `H(x, p) = <b(x), p> + 1/2 <p, a(x) p>`.
pub fn hamiltonian(spec: &SystemSpec, x: &[f64], p: &[f64]) -> f64 {
    let b = spec.drift(x);
    let a = spec.diffusion(x);
    let pv = DVector::from_column_slice(p);
    b.dot(&pv) + 0.5 * pv.dot(&(a * &pv))
}

/// `(dH/dx, dH/dp)`. The state derivative of the diffusion term uses central
/// differences unless the diffusion is constant.
pub fn hamiltonian_gradients(spec: &SystemSpec, x: &[f64], p: &[f64]) -> (DVector<f64>, DVector<f64>) {
    let pv = DVector::from_column_slice(p);
    let a = spec.diffusion(x);
    let dp = spec.drift(x) + &a * &pv;
    let mut dx = spec.jacobian(x).transpose() * &pv;
    if spec.diffusion_kind() != DiffusionKind::Constant {
        let mut xs = x.to_vec();
        for i in 0..x.len() {
            let h = f64::EPSILON.cbrt() * x[i].abs().max(1.0);
            xs[i] = x[i] + h;
            let up = pv.dot(&(spec.diffusion(&xs) * &pv));
            xs[i] = x[i] - h;
            let down = pv.dot(&(spec.diffusion(&xs) * &pv));
            xs[i] = x[i];
            dx[i] += 0.25 * (up - down) / h;
        }
    }
    (dx, dp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Reached the requested final time.
    Time,
    /// The stopping predicate fired.
    Stop,
    /// Left the bounding box (only when truncation is enabled).
    Escaped,
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Box around the points enlarged by `factor` times its extent in every direction.
    pub fn around<'a>(points: impl IntoIterator<Item = &'a [f64]>, factor: f64) -> Self {
        let mut lower: Vec<f64> = Vec::new();
        let mut upper: Vec<f64> = Vec::new();
        for x in points {
            if lower.is_empty() {
                lower = x.to_vec();
                upper = x.to_vec();
            }
            for i in 0..x.len() {
                lower[i] = lower[i].min(x[i]);
                upper[i] = upper[i].max(x[i]);
            }
        }
        for i in 0..lower.len() {
            let w = (upper[i] - lower[i]).max(1e-3);
            lower[i] -= factor * w;
            upper[i] += factor * w;
        }
        Self { lower, upper }
    }
}

/// Options of the symplectic extremal integrator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShootOptions {
    pub scheme: Scheme,
    /// Initial (and maximal) time step.
    pub dt: f64,
    pub min_dt: f64,
    /// Budget for `|H|` along the trajectory.
    pub max_hamiltonian: f64,
    /// Tolerance of the fixed-point iteration inside each step.
    pub fixed_point_tol: f64,
    pub max_fixed_point_iter: usize,
    /// `None` means no box check.
    pub bounds: Option<Bounds>,
    /// Return the trajectory up to the exit point instead of an error.
    pub truncate_on_escape: bool,
    /// Keep every `record_every`-th accepted step (the last is always kept).
    pub record_every: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::Gauss4,
            dt: 1e-3,
            min_dt: 1e-9,
            max_hamiltonian: 1e-7,
            fixed_point_tol: 1e-12,
            max_fixed_point_iter: 100,
            bounds: None,
            truncate_on_escape: false,
            record_every: 1,
        }
    }
}

/// Solution of the canonical equations with the accumulated action.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Extremal {
    pub t: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    pub h: Vec<f64>,
    pub max_abs_h: f64,
    pub termination: Termination,
    pub steps: usize,
    pub rejected: usize,
}

impl Extremal {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.phi.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn final_action(&self) -> f64 {
        self.v.last().copied().unwrap_or(0.0)
    }

    /// First upward crossing of `level` by `f(phi)`; returns `(t, V)` by linear interpolation.
    pub fn first_crossing(&self, f: impl Fn(&[f64]) -> f64, level: f64) -> Option<(f64, f64)> {
        let mut prev = f(&self.phi[0]) - level;
        for k in 1..self.len() {
            let cur = f(&self.phi[k]) - level;
            if prev < 0.0 && cur >= 0.0 {
                let s = prev / (prev - cur);
                let t = self.t[k - 1] + s * (self.t[k] - self.t[k - 1]);
                let v = self.v[k - 1] + s * (self.v[k] - self.v[k - 1]);
                return Some((t, v));
            }
            prev = cur;
        }
        None
    }
}

/// Symplectic collocation scheme used by [`integrate_extremal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// One-stage Gauss collocation, second order.
    Midpoint,
    /// Two-stage Gauss-Legendre collocation, fourth order.
    Gauss4,
}

impl Scheme {
    fn tableau(self) -> (Vec<Vec<f64>>, Vec<f64>) {
        match self {
            Scheme::Midpoint => (vec![vec![0.5]], vec![1.0]),
            Scheme::Gauss4 => {
                let r = 3f64.sqrt() / 6.0;
                (vec![vec![0.25, 0.25 - r], vec![0.25 + r, 0.25]], vec![0.5, 0.5])
            }
        }
    }
}

struct Step {
    x: DVector<f64>,
    p: DVector<f64>,
    dv: f64,
}

/// One collocation step solved by fixed-point iteration on the stage slopes.
fn collocation_step(spec: &SystemSpec, x: &DVector<f64>, p: &DVector<f64>, dt: f64, opts: &ShootOptions) -> Option<Step> {
    let (a, b) = opts.scheme.tableau();
    let s = b.len();
    let (gx, gp) = hamiltonian_gradients(spec, x.as_slice(), p.as_slice());
    let mut kx = vec![gp; s];
    let mut kp = vec![-gx; s];
    let stage = |kx: &[DVector<f64>], kp: &[DVector<f64>], i: usize| {
        let mut xs = x.clone();
        let mut ps = p.clone();
        for j in 0..s {
            xs += &kx[j] * (dt * a[i][j]);
            ps += &kp[j] * (dt * a[i][j]);
        }
        (xs, ps)
    };
    for _ in 0..opts.max_fixed_point_iter {
        let mut change: f64 = 0.0;
        let mut scale: f64 = 1.0;
        let mut next_x = Vec::with_capacity(s);
        let mut next_p = Vec::with_capacity(s);
        for i in 0..s {
            let (xs, ps) = stage(&kx, &kp, i);
            let (gx, gp) = hamiltonian_gradients(spec, xs.as_slice(), ps.as_slice());
            let gx = -gx;
            change = change.max((&gp - &kx[i]).amax() * dt).max((&gx - &kp[i]).amax() * dt);
            scale = scale.max(xs.amax()).max(ps.amax());
            next_x.push(gp);
            next_p.push(gx);
        }
        kx = next_x;
        kp = next_p;
        if !change.is_finite() {
            return None;
        }
        if change <= opts.fixed_point_tol * scale {
            let mut xn = x.clone();
            let mut pn = p.clone();
            let mut dv = 0.0;
            for i in 0..s {
                xn += &kx[i] * (dt * b[i]);
                pn += &kp[i] * (dt * b[i]);
                let (xs, ps) = stage(&kx, &kp, i);
                let ad = spec.diffusion(xs.as_slice());
                dv += dt * b[i] * 0.5 * ps.dot(&(ad * &ps));
            }
            return Some(Step { x: xn, p: pn, dv });
        }
    }
    None
}

/// Integrates the canonical equations `x' = dH/dp`, `p' = -dH/dx` from `(x0, p0)`
/// with a Gauss collocation scheme, accumulating `V' = 1/2 <p, a p>` from `v0`.
pub fn integrate_extremal(
    spec: &SystemSpec,
    x0: &[f64],
    p0: &[f64],
    v0: f64,
    t_max: f64,
    opts: &ShootOptions,
    stop: Option<&(dyn Fn(&[f64], &[f64]) -> bool + Sync)>,
) -> Result<Extremal> {
    let d = spec.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
    }
    if p0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: p0.len() });
    }
    if spec.diffusion_kind() == DiffusionKind::Discontinuous {
        return Err(Error::NonDifferentiableDiffusion);
    }
    let mut x = DVector::from_column_slice(x0);
    let mut p = DVector::from_column_slice(p0);
    let h0 = hamiltonian(spec, x0, p0);
    if !h0.is_finite() {
        return Err(Error::NonFinite("hamiltonian"));
    }
    if h0.abs() > opts.max_hamiltonian {
        return Err(Error::HamiltonianDrift { t: 0.0, value: h0 });
    }
    let mut out = Extremal {
        t: vec![0.0],
        phi: vec![x0.to_vec()],
        p: vec![p0.to_vec()],
        v: vec![v0],
        h: vec![h0],
        max_abs_h: h0.abs(),
        termination: Termination::Time,
        steps: 0,
        rejected: 0,
    };
    let (mut t, mut v, mut dt) = (0.0, v0, opts.dt);
    let mut calm = 0usize;
    while t < t_max {
        let step = dt.min(t_max - t);
        let attempt = collocation_step(spec, &x, &p, step, opts)
            .map(|s| {
                let hv = hamiltonian(spec, s.x.as_slice(), s.p.as_slice());
                (s, hv)
            })
            .filter(|(_, hv)| hv.is_finite() && hv.abs() <= opts.max_hamiltonian);
        let Some((s, hv)) = attempt else {
            out.rejected += 1;
            dt *= 0.5;
            calm = 0;
            if dt < opts.min_dt {
                let value = collocation_step(spec, &x, &p, opts.min_dt, opts)
                    .map(|s| hamiltonian(spec, s.x.as_slice(), s.p.as_slice()))
                    .unwrap_or(f64::NAN);
                return Err(Error::HamiltonianDrift { t, value });
            }
            continue;
        };
        t += step;
        x = s.x;
        p = s.p;
        v += s.dv;
        out.steps += 1;
        out.max_abs_h = out.max_abs_h.max(hv.abs());
        let escaped = opts.bounds.as_ref().is_some_and(|b| !b.contains(x.as_slice()));
        let stopped = stop.is_some_and(|f| f(x.as_slice(), p.as_slice()));
        let last = escaped || stopped || t >= t_max;
        if last || out.steps.is_multiple_of(opts.record_every.max(1)) {
            out.t.push(t);
            out.phi.push(x.as_slice().to_vec());
            out.p.push(p.as_slice().to_vec());
            out.v.push(v);
            out.h.push(hv);
        }
        if escaped {
            if opts.truncate_on_escape {
                out.termination = Termination::Escaped;
                return Ok(out);
            }
            return Err(Error::Escaped { t });
        }
        if stopped {
            out.termination = Termination::Stop;
            return Ok(out);
        }
        // grow back towards the nominal step once the monitor is comfortably inside the budget
        calm += 1;
        if dt < opts.dt && calm >= 16 && hv.abs() < 0.1 * opts.max_hamiltonian {
            dt = (2.0 * dt).min(opts.dt);
            calm = 0;
        }
    }
    Ok(out)
}

/// Default tube radius: `1e-3` of the cycle arclength over `2 pi`.
pub fn default_radius(model: &LocalModel) -> f64 {
    1e-3 * model.cycle().arclength() / (2.0 * std::f64::consts::PI)
}

/// Shoots an extremal from `gamma(tau) + h * z_dir` seeded with the approximate momentum.
pub fn shoot(
    spec: &SystemSpec,
    model: &LocalModel,
    tau: f64,
    z_dir: &[f64],
    h: f64,
    t_max: f64,
    opts: &ShootOptions,
    stop: Option<&(dyn Fn(&[f64], &[f64]) -> bool + Sync)>,
) -> Result<Extremal> {
    let m = model.dim() - 1;
    if z_dir.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: z_dir.len() });
    }
    let n = z_dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(n > 0.0) || !(h > 0.0) {
        return Err(Error::InvalidArgument("shooting needs a nonzero direction and positive radius".into()));
    }
    let z: Vec<f64> = z_dir.iter().map(|v| v * h / n).collect();
    let x0 = model.point(tau, &z);
    let p0 = model.momentum_approx(tau, &z);
    let v0 = model.quadratic_qp(tau, &z);
    integrate_extremal(spec, x0.as_slice(), p0.as_slice(), v0, t_max, opts, stop)
}

/// Shoots from every `(tau, direction)` pair concurrently.
pub fn shoot_scan(
    spec: &SystemSpec,
    model: &LocalModel,
    seeds: &[(f64, Vec<f64>)],
    h: f64,
    t_max: f64,
    opts: &ShootOptions,
) -> Vec<Result<Extremal>> {
    seeds
        .par_iter()
        .map(|(tau, dir)| shoot(spec, model, *tau, dir, h, t_max, opts, None))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{BuiltinCatalog, DiffusionCase};

    #[test]
    fn hamiltonian_values() {
        let spec = BuiltinCatalog::hopf();
        assert!((hamiltonian(&spec, &[1.0, 0.0], &[0.4, 0.0]) - 0.08).abs() < 1e-15);
        assert_eq!(hamiltonian(&spec, &[0.3, 0.7], &[0.0, 0.0]), 0.0);
        let x = [0.3, -0.8];
        let b = spec.drift(&x);
        let p = -2.0 * &b;
        assert!(hamiltonian(&spec, &x, p.as_slice()).abs() < 1e-14);
    }

    #[test]
    fn zero_momentum_follows_flow() {
        let spec = BuiltinCatalog::vdp(DiffusionCase::Isotropic);
        let ext = integrate_extremal(&spec, &[1.0, 0.5], &[0.0, 0.0], 0.0, 2.0, &ShootOptions::default(), None).unwrap();
        let reference = crate::cycle::integrate_flow(&spec, &[1.0, 0.5], 2.0, crate::ode::Tolerances::new(1e-12, 1e-14)).unwrap();
        let end = DVector::from_column_slice(ext.final_state());
        assert!((end - reference).amax() < 1e-6);
        assert_eq!(ext.final_action(), 0.0);
    }

    #[test]
    fn discontinuous_diffusion_is_refused() {
        let spec = BuiltinCatalog::vdp(DiffusionCase::Discontinuous);
        let r = integrate_extremal(&spec, &[1.0, 0.5], &[0.0, 0.0], 0.0, 1.0, &ShootOptions::default(), None);
        assert!(matches!(r, Err(Error::NonDifferentiableDiffusion)));
    }
}
