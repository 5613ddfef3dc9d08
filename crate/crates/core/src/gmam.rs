//! Geometric minimum action paths escaping a stable limit cycle.
//!
//! Two solvers share one discretization: the path `phi_0 .. phi_N` ends at the
//! fixed target `phi_N = x`, and its first point is attached either to the cycle
//! itself (LC) or to the tube `|z| = h` around it (LQA), where the quadratic
//! quasi-potential `1/2 z^T G(tau) z` accounts for the action inside the tube.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cycle::LimitCycle;
use crate::error::{Error, Result};
use crate::frame::MovingFrame;
use crate::localqp::LocalModel;
use crate::optimizer::{minimize_constrained, NlpProblem, OptimizerOptions, Status};
use crate::systems::SystemSpec;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Discrete geometric action for identity diffusion, trapezoidal in `|b|` per segment.
pub fn discrete_action(points: &[Vec<f64>], spec: &SystemSpec) -> f64 {
    let b: Vec<DVector<f64>> = points.iter().map(|p| spec.drift(p)).collect();
    let mut s = 0.0;
    for i in 1..points.len() {
        let u = DVector::from_column_slice(&points[i]) - DVector::from_column_slice(&points[i - 1]);
        s += 0.5 * u.norm() * (b[i].norm() + b[i - 1].norm()) - 0.5 * u.dot(&(&b[i] + &b[i - 1]));
    }
    s
}

/// Discrete geometric action in the metric `a(x)^{-1}`, averaging the two
/// endpoint evaluations of every segment.
pub fn discrete_action_general(points: &[Vec<f64>], spec: &SystemSpec) -> Result<f64> {
    let mut ends = Vec::with_capacity(points.len());
    for p in points {
        let a = spec.diffusion(p);
        let inv = a.try_inverse().ok_or(Error::SingularDiffusion)?;
        ends.push((spec.drift(p), inv));
    }
    let mut s = 0.0;
    for i in 1..points.len() {
        let u = DVector::from_column_slice(&points[i]) - DVector::from_column_slice(&points[i - 1]);
        for (b, inv) in [&ends[i], &ends[i - 1]] {
            let un = u.dot(&(inv * &u)).max(0.0).sqrt();
            let bn = b.dot(&(inv * b)).max(0.0).sqrt();
            s += 0.5 * (un * bn - u.dot(&(inv * b)));
        }
    }
    Ok(s)
}

/// Gradient of [`discrete_action`] with respect to every point.
fn action_gradient(points: &[DVector<f64>], spec: &SystemSpec) -> (f64, Vec<DVector<f64>>) {
    let n = points.len();
    let b: Vec<DVector<f64>> = points.iter().map(|p| spec.drift(p.as_slice())).collect();
    let bn: Vec<f64> = b.iter().map(|v| v.norm()).collect();
    let jac: Vec<DMatrix<f64>> = points.iter().map(|p| spec.jacobian(p.as_slice())).collect();
    let dbn: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            if bn[i] > 0.0 {
                jac[i].transpose() * &b[i] / bn[i]
            } else {
                DVector::zeros(b[i].len())
            }
        })
        .collect();
    let mut grad = vec![DVector::zeros(points[0].len()); n];
    let mut s = 0.0;
    for i in 1..n {
        let u = &points[i] - &points[i - 1];
        let l = u.norm();
        let bsum = &b[i] + &b[i - 1];
        let bnorm = 0.5 * (bn[i] + bn[i - 1]);
        s += l * bnorm - 0.5 * u.dot(&bsum);
        let unit = if l > 0.0 { &u / l } else { DVector::zeros(u.len()) };
        // d/du of l * bnorm - u.bsum/2
        let du = &unit * bnorm - &bsum * 0.5;
        grad[i] += &du + &dbn[i] * (0.5 * l) - jac[i].transpose() * &u * 0.5;
        grad[i - 1] += -&du + &dbn[i - 1] * (0.5 * l) - jac[i - 1].transpose() * &u * 0.5;
    }
    (s, grad)
}

/// Path resampled to `n + 1` points equally spaced in arclength.
pub fn resample_path(points: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut cum = vec![0.0];
    for i in 1..points.len() {
        cum.push(cum[i - 1] + dist(&points[i], &points[i - 1]));
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(n + 1);
    let mut seg = 1;
    for k in 0..=n {
        let s = total * k as f64 / n as f64;
        while seg < points.len() - 1 && cum[seg] < s {
            seg += 1;
        }
        let span = cum[seg] - cum[seg - 1];
        let w = if span > 0.0 { ((s - cum[seg - 1]) / span).clamp(0.0, 1.0) } else { 0.0 };
        out.push(points[seg - 1].iter().zip(&points[seg]).map(|(a, b)| a + w * (b - a)).collect());
    }
    out
}

/// Options shared by the two path solvers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmamOptions {
    pub optimizer: OptimizerOptions,
}

impl Default for GmamOptions {
    fn default() -> Self {
        Self {
            optimizer: OptimizerOptions {
                rho0: 1e4,
                ..OptimizerOptions::default()
            },
        }
    }
}

/// Constraint residuals of a returned path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Residuals {
    /// `| |z|^2 - h^2 |`.
    pub sphere: f64,
    /// Max-norm of `gamma(tau) + E~ z - phi_0`.
    pub attachment: f64,
    /// Max over interior points of the squared-length mismatch of adjacent segments,
    /// relative to the squared mean segment length.
    pub arclength: f64,
}

/// Optimized escape path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscretePath {
    pub points: Vec<Vec<f64>>,
    pub tau: f64,
    pub z: Vec<f64>,
    /// Tube radius; zero for the cycle-attached variant.
    pub h: f64,
    pub geometric: f64,
    pub quadratic: f64,
    pub total: f64,
    pub converged: bool,
    pub status: Status,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub grad_norm: f64,
    pub residuals: Residuals,
}

impl DiscretePath {
    pub fn n(&self) -> usize {
        self.points.len() - 1
    }

    pub fn start(&self) -> &[f64] {
        &self.points[0]
    }
}

struct PathProblem<'a> {
    spec: &'a SystemSpec,
    cycle: &'a LimitCycle,
    /// Frame, `G` and radius for the tube variant.
    tube: Option<(&'a MovingFrame, &'a LocalModel, f64)>,
    target: DVector<f64>,
    n: usize,
    d: usize,
    /// Squared reference segment length scaling the arclength constraints.
    seg2: f64,
}

impl PathProblem<'_> {
    fn m(&self) -> usize {
        if self.tube.is_some() {
            self.d - 1
        } else {
            0
        }
    }

    /// Points `phi_0 .. phi_N` (the last is the fixed target).
    fn points(&self, x: &[f64]) -> Vec<DVector<f64>> {
        let mut pts: Vec<DVector<f64>> = (0..self.n).map(|i| DVector::from_column_slice(&x[i * self.d..(i + 1) * self.d])).collect();
        pts.push(self.target.clone());
        pts
    }

    fn tau_index(&self) -> usize {
        self.n * self.d
    }

    fn z<'x>(&self, x: &'x [f64]) -> &'x [f64] {
        let i = self.tau_index() + 1;
        &x[i..i + self.m()]
    }

    fn attach_point(&self, tau: f64, z: &[f64]) -> DVector<f64> {
        match self.tube {
            Some((frame, _, _)) => frame.from_curvilinear(self.cycle, tau, z),
            None => self.cycle.state(tau),
        }
    }

    fn quadratic(&self, tau: f64, z: &[f64]) -> f64 {
        match self.tube {
            Some((_, model, _)) => model.quadratic_qp(tau, z),
            None => 0.0,
        }
    }

    fn pack(&self, points: &[Vec<f64>], tau: f64, z: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = points[..self.n].iter().flatten().copied().collect();
        x.push(tau);
        x.extend_from_slice(z);
        x
    }
}

impl NlpProblem for PathProblem<'_> {
    fn dim(&self) -> usize {
        self.n * self.d + 1 + self.m()
    }

    fn n_constraints(&self) -> usize {
        self.d + (self.n - 1) + usize::from(self.tube.is_some())
    }

    fn hessian_sparsity(&self) -> Option<Vec<Vec<usize>>> {
        let (n, d) = (self.n, self.d);
        let tail: Vec<usize> = (n * d..self.dim()).collect();
        let mut pattern = Vec::with_capacity(self.dim());
        for k in 0..n {
            let rows: Vec<usize> = (k.saturating_sub(1)..(k + 2).min(n)).flat_map(|q| q * d..(q + 1) * d).collect();
            for _ in 0..d {
                pattern.push(rows.clone());
            }
        }
        for _ in &tail {
            pattern.push(tail.clone());
        }
        Some(pattern)
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let pts: Vec<Vec<f64>> = self.points(x).iter().map(|p| p.as_slice().to_vec()).collect();
        discrete_action(&pts, self.spec) + self.quadratic(x[self.tau_index()], self.z(x))
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        let (_, grad) = action_gradient(&self.points(x), self.spec);
        for i in 0..self.n {
            g[i * self.d..(i + 1) * self.d].copy_from_slice(grad[i].as_slice());
        }
        let ti = self.tau_index();
        g[ti] = 0.0;
        if let Some((_, model, _)) = self.tube {
            let tau = x[ti];
            let z = DVector::from_column_slice(self.z(x));
            g[ti] = 0.5 * z.dot(&(model.g().deriv(tau) * &z));
            let gz = model.g_at(tau) * &z;
            g[ti + 1..].copy_from_slice(gz.as_slice());
        }
    }

    fn constraints(&self, x: &[f64], c: &mut [f64]) {
        let pts = self.points(x);
        let tau = x[self.tau_index()];
        let z = self.z(x);
        let attach = self.attach_point(tau, z) - &pts[0];
        c[..self.d].copy_from_slice(attach.as_slice());
        for i in 1..self.n {
            let l0 = (&pts[i] - &pts[i - 1]).norm_squared();
            let l1 = (&pts[i + 1] - &pts[i]).norm_squared();
            c[self.d + i - 1] = (l0 - l1) / self.seg2;
        }
        if let Some((_, _, h)) = self.tube {
            let z2: f64 = z.iter().map(|v| v * v).sum();
            c[self.d + self.n - 1] = (z2 - h * h) / (h * h);
        }
    }

    fn constraint_jt(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let d = self.d;
        let pts = self.points(x);
        let ti = self.tau_index();
        let tau = x[ti];
        let wa = DVector::from_column_slice(&w[..d]);
        // attachment: gamma(tau) + E~ z - phi_0
        for k in 0..d {
            out[k] -= wa[k];
        }
        let mut dtau = self.cycle.velocity(tau);
        if let Some((frame, _, _)) = self.tube {
            let e = frame.basis(tau);
            let de = frame.basis_derivative(tau);
            let z = self.z(x);
            for (j, zj) in z.iter().enumerate() {
                dtau += de.column(j + 1) * *zj;
                out[ti + 1 + j] += e.column(j + 1).dot(&wa);
            }
        }
        out[ti] += dtau.dot(&wa);
        for i in 1..self.n {
            let wi = 2.0 * w[d + i - 1] / self.seg2;
            let u0 = &pts[i] - &pts[i - 1];
            let u1 = &pts[i + 1] - &pts[i];
            for k in 0..d {
                out[i * d + k] += wi * (u0[k] + u1[k]);
                out[(i - 1) * d + k] -= wi * u0[k];
                if i + 1 < self.n {
                    out[(i + 1) * d + k] -= wi * u1[k];
                }
            }
        }
        if let Some((_, _, h)) = self.tube {
            let ws = w[d + self.n - 1];
            for (j, zj) in self.z(x).iter().enumerate() {
                out[ti + 1 + j] += ws * 2.0 * zj / (h * h);
            }
        }
    }
}

fn check_identity_diffusion(spec: &SystemSpec, x: &[f64]) -> Result<()> {
    let a = spec.diffusion(x);
    let n = a.nrows();
    if (a - DMatrix::identity(n, n)).amax() > 1e-12 {
        return Err(Error::InvalidArgument("the path solvers assume identity diffusion".into()));
    }
    Ok(())
}

/// Coordinates `(tau, z)` of the target relative to the cycle. Falls back to the
/// nearest grid phase and a frame projection when the target is outside the chart.
fn target_chart(cycle: &LimitCycle, frame: &MovingFrame, x: &[f64]) -> (f64, DVector<f64>, bool) {
    match frame.to_curvilinear(cycle, x) {
        Ok((tau, z)) => (tau, z, true),
        Err(_) => {
            let tau = cycle.phase(cycle.nearest_sample(x));
            let coords = frame.reciprocal(tau) * (DVector::from_column_slice(x) - cycle.state(tau));
            let d = coords.len();
            (tau, coords.rows(1, d - 1).into_owned(), false)
        }
    }
}

/// Moves the first point to `start`, fading the shift out linearly towards the fixed end.
fn move_start(points: &mut [Vec<f64>], start: &[f64]) {
    let n = points.len() - 1;
    let shift: Vec<f64> = start.iter().zip(&points[0]).map(|(a, b)| a - b).collect();
    for (k, p) in points.iter_mut().enumerate() {
        let w = 1.0 - k as f64 / n as f64;
        for (pi, si) in p.iter_mut().zip(&shift) {
            *pi += w * si;
        }
    }
}

fn straight_line(a: &[f64], b: &[f64], n: usize) -> Vec<Vec<f64>> {
    (0..=n)
        .map(|k| {
            let s = k as f64 / n as f64;
            a.iter().zip(b).map(|(p, q)| p + s * (q - p)).collect()
        })
        .collect()
}

fn solve(
    problem: &PathProblem,
    init_points: Vec<Vec<f64>>,
    tau0: f64,
    z0: Vec<f64>,
    opts: &GmamOptions,
) -> Result<DiscretePath> {
    let x0 = problem.pack(&init_points, tau0, &z0);
    let sol = minimize_constrained(problem, &x0, &opts.optimizer)?;
    let pts: Vec<Vec<f64>> = problem.points(&sol.x).iter().map(|p| p.as_slice().to_vec()).collect();
    let tau = sol.x[problem.tau_index()];
    let z = problem.z(&sol.x).to_vec();
    let geometric = discrete_action(&pts, problem.spec);
    let quadratic = problem.quadratic(tau, &z);
    let residuals = path_residuals(problem, &pts, tau, &z);
    Ok(DiscretePath {
        tau: match problem.tube {
            Some((frame, _, _)) => tau.rem_euclid(frame.unwrapped_period()),
            None => problem.cycle.wrap(tau),
        },
        h: problem.tube.map(|t| t.2).unwrap_or(0.0),
        total: geometric + quadratic,
        geometric,
        quadratic,
        points: pts,
        z,
        converged: sol.converged(),
        status: sol.status,
        outer_iterations: sol.outer_iterations,
        inner_iterations: sol.inner_iterations,
        grad_norm: sol.grad_norm,
        residuals,
    })
}

fn path_residuals(problem: &PathProblem, pts: &[Vec<f64>], tau: f64, z: &[f64]) -> Residuals {
    let attach = (problem.attach_point(tau, z) - DVector::from_column_slice(&pts[0])).amax();
    let n = pts.len() - 1;
    let mean = (1..=n).map(|i| dist(&pts[i], &pts[i - 1])).sum::<f64>() / n as f64;
    let mut arclength: f64 = 0.0;
    for i in 1..n {
        let l0 = dist(&pts[i], &pts[i - 1]).powi(2);
        let l1 = dist(&pts[i + 1], &pts[i]).powi(2);
        arclength = arclength.max((l0 - l1).abs() / (mean * mean).max(f64::MIN_POSITIVE));
    }
    let sphere = match problem.tube {
        Some((_, _, h)) => (z.iter().map(|v| v * v).sum::<f64>() - h * h).abs(),
        None => 0.0,
    };
    Residuals {
        sphere,
        attachment: attach,
        arclength,
    }
}

/// Minimum action path from the tube `|z| = h` to `x_end`, adding the local
/// quadratic quasi-potential at the attachment point.
pub fn minimize_lqa(
    spec: &SystemSpec,
    model: &LocalModel,
    x_end: &[f64],
    n: usize,
    h: f64,
    init: Option<&[Vec<f64>]>,
    opts: &GmamOptions,
) -> Result<DiscretePath> {
    let cycle = model.cycle();
    let frame = model.frame();
    let d = cycle.dim();
    if x_end.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x_end.len() });
    }
    if n < 2 || !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("need N >= 2 and h > 0 (got N = {n}, h = {h})")));
    }
    check_identity_diffusion(spec, x_end)?;
    let (tau_t, z_t, in_chart) = target_chart(cycle, frame, x_end);
    if in_chart && z_t.norm() < h * (1.0 - 1e-9) {
        return Err(Error::InsideTube { z_norm: z_t.norm(), h });
    }
    let (points, tau0, z0) = match init {
        Some(path) => {
            let mut pts = resample_path(path, n);
            let (tau, z, _) = target_chart(cycle, frame, &pts[0]);
            let z = if z.norm() > 0.0 { &z * (h / z.norm()) } else { z_t.clone() * (h / z_t.norm()) };
            let start = frame.from_curvilinear(cycle, tau, z.as_slice());
            move_start(&mut pts, start.as_slice());
            (resample_path(&pts, n), tau, z.as_slice().to_vec())
        }
        None => {
            let zn = z_t.norm();
            let z0 = if zn > 0.0 {
                &z_t * (h / zn)
            } else {
                let mut u = DVector::zeros(d - 1);
                u[0] = h;
                u
            };
            let start = frame.from_curvilinear(cycle, tau_t, z0.as_slice());
            (straight_line(start.as_slice(), x_end, n), tau_t, z0.as_slice().to_vec())
        }
    };
    let len: f64 = (1..=n).map(|i| dist(&points[i], &points[i - 1])).sum();
    let seg2 = (len / n as f64).powi(2).max(1e-24);
    let problem = PathProblem {
        spec,
        cycle,
        tube: Some((frame, model, h)),
        target: DVector::from_column_slice(x_end),
        n,
        d,
        seg2,
    };
    solve(&problem, points, tau0, z0, opts)
}

/// Minimum action path whose first point slides along the cycle.
pub fn minimize_lc(
    spec: &SystemSpec,
    cycle: &LimitCycle,
    x_end: &[f64],
    n: usize,
    init: Option<&[Vec<f64>]>,
    opts: &GmamOptions,
) -> Result<DiscretePath> {
    let d = cycle.dim();
    if x_end.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x_end.len() });
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need N >= 2 (got {n})")));
    }
    check_identity_diffusion(spec, x_end)?;
    let (points, tau0) = match init {
        Some(path) => {
            let mut pts = resample_path(path, n);
            let tau = cycle.phase(cycle.nearest_sample(&pts[0]));
            move_start(&mut pts, cycle.state(tau).as_slice());
            (resample_path(&pts, n), tau)
        }
        None => {
            let tau = cycle.phase(cycle.nearest_sample(x_end));
            (straight_line(cycle.state(tau).as_slice(), x_end, n), tau)
        }
    };
    let len: f64 = (1..=n).map(|i| dist(&points[i], &points[i - 1])).sum();
    let seg2 = (len / n as f64).powi(2).max(1e-24);
    let problem = PathProblem {
        spec,
        cycle,
        tube: None,
        target: DVector::from_column_slice(x_end),
        n,
        d,
        seg2,
    };
    solve(&problem, points, tau0, Vec::new(), opts)
}

/// Outcome of [`multistart_lqa`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Multistart {
    pub best: DiscretePath,
    pub best_index: usize,
    /// Total action of every member, `None` where the solve failed or did not converge.
    pub totals: Vec<Option<f64>>,
}

/// Runs [`minimize_lqa`] from the straight-line guess and from `extra` randomly
/// bent copies of it, concurrently, and keeps the lowest converged action.
/// Member `k` draws its bend from a generator seeded with `seed + k`.
pub fn multistart_lqa(
    spec: &SystemSpec,
    model: &LocalModel,
    x_end: &[f64],
    n: usize,
    h: f64,
    extra: usize,
    seed: u64,
    opts: &GmamOptions,
) -> Result<Multistart> {
    let (tau, z, _) = target_chart(model.cycle(), model.frame(), x_end);
    let z = if z.norm() > 0.0 { &z * (h / z.norm()) } else { DVector::from_element(z.len(), h / (z.len() as f64).sqrt()) };
    let start = model.point(tau, z.as_slice());
    let base = straight_line(start.as_slice(), x_end, n);
    let span = dist(start.as_slice(), x_end);
    let runs: Vec<Result<DiscretePath>> = (0..=extra)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                return minimize_lqa(spec, model, x_end, n, h, None, opts);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let amp = span * rng.random_range(0.05..0.5);
            let dir = DVector::from_fn(x_end.len(), |_, _| rng.random_range(-1.0..1.0)).normalize();
            let init: Vec<Vec<f64>> = base
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let w = amp * (std::f64::consts::PI * i as f64 / n as f64).sin();
                    p.iter().zip(dir.iter()).map(|(a, b)| a + w * b).collect()
                })
                .collect();
            minimize_lqa(spec, model, x_end, n, h, Some(&init), opts)
        })
        .collect();
    let totals: Vec<Option<f64>> = runs.iter().map(|r| r.as_ref().ok().filter(|p| p.converged).map(|p| p.total)).collect();
    let best_index = totals
        .iter()
        .enumerate()
        .filter_map(|(k, t)| t.map(|v| (k, v)))
        .fold(None, |acc: Option<(usize, f64)>, (k, v)| match acc {
            Some((_, b)) if b <= v => acc,
            _ => Some((k, v)),
        })
        .map(|(k, _)| k);
    let mut runs = runs;
    match best_index {
        Some(k) => Ok(Multistart {
            best: runs.swap_remove(k)?,
            best_index: k,
            totals,
        }),
        None => runs.swap_remove(0).map(|p| Multistart {
            best: p,
            best_index: 0,
            totals,
        }),
    }
}

/// Reference value for [`convergence_study`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Reference {
    /// The result at the largest `N`.
    Finest,
    Exact(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    pub h: f64,
    pub action: f64,
    pub error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<StudyRow>,
    pub reference: f64,
    /// Least-squares slope of `-log(error)` against `log(N)`.
    pub slope: f64,
}

/// Default proportionality constant of `h = kappa / N`: half the cycle arclength,
/// so that `N = 40` uses a radius of one eightieth of the arclength.
pub fn default_kappa(cycle: &LimitCycle) -> f64 {
    0.5 * cycle.arclength()
}

/// Solves [`minimize_lqa`] for an increasing list of `N` with `h = kappa / N`,
/// starting each member from the previous solution.
pub fn lqa_ladder(
    spec: &SystemSpec,
    model: &LocalModel,
    x_end: &[f64],
    ns: &[usize],
    kappa: f64,
    opts: &GmamOptions,
) -> Result<Vec<DiscretePath>> {
    let mut out: Vec<DiscretePath> = Vec::with_capacity(ns.len());
    for &n in ns {
        let init = out.last().map(|p| p.points.as_slice());
        out.push(minimize_lqa(spec, model, x_end, n, kappa / n as f64, init, opts)?);
    }
    Ok(out)
}

/// Same continuation as [`lqa_ladder`] for [`minimize_lc`].
pub fn lc_ladder(spec: &SystemSpec, cycle: &LimitCycle, x_end: &[f64], ns: &[usize], opts: &GmamOptions) -> Result<Vec<DiscretePath>> {
    let mut out: Vec<DiscretePath> = Vec::with_capacity(ns.len());
    for &n in ns {
        let init = out.last().map(|p| p.points.as_slice());
        out.push(minimize_lc(spec, cycle, x_end, n, init, opts)?);
    }
    Ok(out)
}

/// Runs [`lqa_ladder`] over `ns` and fits the error decay.
pub fn convergence_study(
    spec: &SystemSpec,
    model: &LocalModel,
    x_end: &[f64],
    ns: &[usize],
    kappa: f64,
    reference: Reference,
    opts: &GmamOptions,
) -> Result<ConvergenceTable> {
    if ns.len() < 2 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("N list must be increasing with at least two entries".into()));
    }
    let paths = lqa_ladder(spec, model, x_end, ns, kappa, opts)?;
    let reference_value = match reference {
        Reference::Finest => paths.last().unwrap().total,
        Reference::Exact(v) => v,
    };
    let rows: Vec<StudyRow> = ns
        .iter()
        .zip(&paths)
        .map(|(&n, p)| StudyRow {
            n,
            h: kappa / n as f64,
            action: p.total,
            error: (p.total - reference_value).abs(),
            converged: p.converged,
        })
        .collect();
    let fit_rows: Vec<&StudyRow> = match reference {
        Reference::Finest => rows[..rows.len() - 1].iter().collect(),
        Reference::Exact(_) => rows.iter().collect(),
    };
    let slope = fit_slope(&fit_rows.iter().map(|r| (r.n as f64, r.error)).collect::<Vec<_>>());
    Ok(ConvergenceTable {
        rows,
        reference: reference_value,
        slope,
    })
}

/// Slope of `-log(err)` against `log(n)` by least squares, ignoring zero errors.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(_, e)| *e > 0.0).map(|(n, e)| (n.ln(), -e.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{BuiltinCatalog, Linear};

    #[test]
    fn flow_aligned_path_has_zero_action() {
        let spec = SystemSpec::new("radial", Linear { m: DMatrix::identity(2, 2), a: DMatrix::identity(2, 2) });
        let pts: Vec<Vec<f64>> = (1..10).map(|k| vec![k as f64 * 0.1, k as f64 * 0.2]).collect();
        assert!(discrete_action(&pts, &spec).abs() < 1e-15);
        let zero = SystemSpec::new("zero", Linear { m: DMatrix::zeros(2, 2), a: DMatrix::identity(2, 2) });
        assert_eq!(discrete_action(&pts, &zero), 0.0);
    }

    #[test]
    fn general_action_matches_identity_form() {
        let spec = BuiltinCatalog::twolc();
        let pts: Vec<Vec<f64>> = (0..12).map(|k| vec![0.1 * k as f64 - 0.4, (0.3 * k as f64).sin()]).collect();
        let a = discrete_action(&pts, &spec);
        let b = discrete_action_general(&pts, &spec).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn scaled_diffusion_scales_the_action() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -2.0, -0.5]);
        let unit = SystemSpec::new("unit", Linear { m: m.clone(), a: DMatrix::identity(2, 2) });
        let four = SystemSpec::new("four", Linear { m, a: DMatrix::identity(2, 2) * 4.0 });
        let pts: Vec<Vec<f64>> = (0..15).map(|k| vec![0.2 * k as f64, (0.4 * k as f64).cos()]).collect();
        let s1 = discrete_action_general(&pts, &unit).unwrap();
        let s4 = discrete_action_general(&pts, &four).unwrap();
        assert!(s1 > 0.0);
        assert!((s4 - 0.25 * s1).abs() < 1e-14 * s1);
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let spec = BuiltinCatalog::twolc();
        let pts: Vec<DVector<f64>> = (0..6).map(|k| DVector::from_vec(vec![0.2 * k as f64 - 0.4, 0.5 + 0.1 * (k * k) as f64])).collect();
        let (_, g) = action_gradient(&pts, &spec);
        let plain = |p: &[DVector<f64>]| discrete_action(&p.iter().map(|v| v.as_slice().to_vec()).collect::<Vec<_>>(), &spec);
        for i in 0..pts.len() {
            for k in 0..2 {
                let mut up = pts.clone();
                let mut dn = pts.clone();
                up[i][k] += 1e-6;
                dn[i][k] -= 1e-6;
                let fd = (plain(&up) - plain(&dn)) / 2e-6;
                assert!((fd - g[i][k]).abs() < 1e-7, "point {i} coord {k}: {fd} vs {}", g[i][k]);
            }
        }
    }

    #[test]
    fn path_problem_derivatives_match_differences() {
        use crate::cycle::{find_limit_cycle, CycleOptions};
        use crate::frame::build_frame;
        use crate::riccati::{reduced_coefficients, solve_prde, PrdeOptions};
        let spec = BuiltinCatalog::twolc();
        let cycle = crate::cycle::locate_cycle(&spec, &BuiltinCatalog::basin_point("twolc").unwrap(), &CycleOptions::default()).unwrap();
        let _ = find_limit_cycle;
        let frame = build_frame(&spec, &cycle).unwrap();
        let coeffs = reduced_coefficients(&spec, &cycle, &frame).unwrap();
        let g = solve_prde(&coeffs, &PrdeOptions::default()).unwrap();
        let model = LocalModel::new(cycle.clone(), frame.clone(), g, crate::localqp::Tube::Radius(0.05)).unwrap();
        let n = 6;
        let problem = PathProblem {
            spec: &spec,
            cycle: &cycle,
            tube: Some((&frame, &model, 0.05)),
            target: DVector::from_vec(vec![-0.9, 0.6942]),
            n,
            d: 2,
            seg2: 0.3,
        };
        let x: Vec<f64> = (0..problem.dim()).map(|i| 0.3 * (i as f64 * 1.7).sin() + 0.1).collect();
        let mut ga = vec![0.0; x.len()];
        problem.gradient(&x, &mut ga);
        let mut gf = vec![0.0; x.len()];
        super::super::optimizer::tests_support::fd(|y| problem.objective(y), &x, &mut gf);
        for i in 0..x.len() {
            assert!((ga[i] - gf[i]).abs() < 1e-6 * (1.0 + gf[i].abs()), "objective {i}: {} vs {}", ga[i], gf[i]);
        }
        let w: Vec<f64> = (0..problem.n_constraints()).map(|i| (i as f64 + 0.5).cos()).collect();
        let mut ja = vec![0.0; x.len()];
        problem.constraint_jt(&x, &w, &mut ja);
        let mut c = vec![0.0; problem.n_constraints()];
        super::super::optimizer::tests_support::fd(
            |y| {
                problem.constraints(y, &mut c);
                c.iter().zip(&w).map(|(a, b)| a * b).sum()
            },
            &x,
            &mut gf,
        );
        for i in 0..x.len() {
            assert!((ja[i] - gf[i]).abs() < 1e-6 * (1.0 + gf[i].abs()), "constraint {i}: {} vs {}", ja[i], gf[i]);
        }
    }

    #[test]
    fn resampling_is_equidistant() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 3.0]];
        let r = resample_path(&pts, 8);
        assert_eq!(r.len(), 9);
        for i in 1..r.len() {
            assert!((dist(&r[i], &r[i - 1]) - 0.5).abs() < 1e-12);
        }
    }
}
