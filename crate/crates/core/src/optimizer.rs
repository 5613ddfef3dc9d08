//! Equality-constrained smooth minimization: augmented Lagrangian outer loop
//! over a shifted Newton or BFGS inner solver with a strong Wolfe line search.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smooth objective with equality constraints `c(x) = 0`.
///
/// Gradients default to central differences; implementors with analytic
/// derivatives should override [`gradient`](Self::gradient) and
/// [`constraint_jt`](Self::constraint_jt).
pub trait NlpProblem {
    fn dim(&self) -> usize;

    fn n_constraints(&self) -> usize {
        0
    }

    fn objective(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        fd_gradient(|y| self.objective(y), x, g);
    }

    fn constraints(&self, _x: &[f64], _c: &mut [f64]) {}

    /// `J(x)^T w` for the constraint Jacobian `J`.
    fn constraint_jt(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        let m = self.n_constraints();
        let mut c = vec![0.0; m];
        fd_gradient(
            |y| {
                self.constraints(y, &mut c);
                c.iter().zip(w).map(|(a, b)| a * b).sum()
            },
            x,
            out,
        );
    }

    /// Sparsity of the Hessian of `f + lambda^T c`: for each variable, the
    /// variables it may couple to (itself included). `None` means dense.
    fn hessian_sparsity(&self) -> Option<Vec<Vec<usize>>> {
        None
    }

    /// Dense `m x n` constraint Jacobian, assembled from transposed products.
    fn constraint_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let (n, m) = (self.dim(), self.n_constraints());
        let mut jac = DMatrix::zeros(m, n);
        let mut w = vec![0.0; m];
        let mut row = vec![0.0; n];
        for i in 0..m {
            w[i] = 1.0;
            self.constraint_jt(x, &w, &mut row);
            w[i] = 0.0;
            for (j, v) in row.iter().enumerate() {
                jac[(i, j)] = *v;
            }
        }
        jac
    }
}

/// Least-squares multipliers `argmin |grad f + J^T lambda|` and the residual,
/// which is the gradient projected onto the null space of `J`.
pub fn projected_gradient<P: NlpProblem + ?Sized>(problem: &P, x: &[f64]) -> (DVector<f64>, DVector<f64>) {
    let n = problem.dim();
    let mut g = vec![0.0; n];
    problem.gradient(x, &mut g);
    let g = DVector::from_vec(g);
    if problem.n_constraints() == 0 {
        return (DVector::zeros(0), g);
    }
    let jt = problem.constraint_jacobian(x).transpose();
    let svd = jt.clone().svd(true, true);
    let tol = svd.singular_values.max() * 1e-13 * (n.max(1) as f64);
    let lambda = match svd.solve(&(-&g), tol) {
        Ok(l) => l,
        Err(_) => DVector::zeros(problem.n_constraints()),
    };
    let r = &g + &jt * &lambda;
    (lambda, r)
}

#[cfg(test)]
pub(crate) mod tests_support {
    pub fn fd(f: impl FnMut(&[f64]) -> f64, x: &[f64], g: &mut [f64]) {
        super::fd_gradient(f, x, g)
    }
}

fn fd_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], g: &mut [f64]) {
    let mut y = x.to_vec();
    for i in 0..x.len() {
        let h = f64::EPSILON.cbrt() * x[i].abs().max(1.0);
        y[i] = x[i] + h;
        let up = f(&y);
        y[i] = x[i] - h;
        let down = f(&y);
        y[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
}

/// Closure-backed problem with finite-difference derivatives.
pub struct FnProblem<F, C> {
    pub dim: usize,
    pub n_constraints: usize,
    pub objective: F,
    pub constraints: C,
}

impl<F: Fn(&[f64]) -> f64> FnProblem<F, fn(&[f64], &mut [f64])> {
    pub fn unconstrained(dim: usize, objective: F) -> Self {
        fn none(_: &[f64], _: &mut [f64]) {}
        Self {
            dim,
            n_constraints: 0,
            objective,
            constraints: none,
        }
    }
}

impl<F: Fn(&[f64]) -> f64, C: Fn(&[f64], &mut [f64])> NlpProblem for FnProblem<F, C> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_constraints(&self) -> usize {
        self.n_constraints
    }

    fn objective(&self, x: &[f64]) -> f64 {
        (self.objective)(x)
    }

    fn constraints(&self, x: &[f64], c: &mut [f64]) {
        (self.constraints)(x, c)
    }
}

/// Inner unconstrained solver of the augmented Lagrangian loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InnerSolver {
    /// Dense BFGS with a strong Wolfe line search.
    Bfgs,
    /// Newton steps on a finite-difference Hessian of the gradient, shifted to
    /// positive definiteness, with the same line search.
    Newton,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub inner: InnerSolver,
    /// Stop when `|grad L|_inf` falls below this.
    pub grad_tol: f64,
    /// Stop when `|c|_inf` falls below this.
    pub feas_tol: f64,
    pub rho0: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            inner: InnerSolver::Newton,
            grad_tol: 1e-8,
            feas_tol: 1e-10,
            rho0: 10.0,
            rho_growth: 10.0,
            rho_max: 1e10,
            max_outer: 60,
            max_inner: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    /// Iteration caps hit; the point is the best one found.
    MaxIterations,
    /// The line search could not make progress at the final penalty.
    Stalled,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    /// Multipliers of `L = f + lambda^T c`.
    pub multipliers: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub grad_norm: f64,
    pub status: Status,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub penalty: f64,
    /// `(before, after)` exact-penalty merit values of every accepted outer iteration,
    /// both measured with the same weight.
    pub merit_history: Vec<(f64, f64)>,
}

impl Solution {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

struct Augmented<'a, P: NlpProblem + ?Sized> {
    problem: &'a P,
    lambda: &'a [f64],
    rho: f64,
}

impl<P: NlpProblem + ?Sized> Augmented<'_, P> {
    fn eval(&self, x: &[f64], g: &mut [f64]) -> f64 {
        let m = self.problem.n_constraints();
        let f = self.problem.objective(x);
        self.problem.gradient(x, g);
        if m == 0 {
            return f;
        }
        let mut c = vec![0.0; m];
        self.problem.constraints(x, &mut c);
        let w: Vec<f64> = c.iter().zip(self.lambda).map(|(ci, li)| li + self.rho * ci).collect();
        let mut jt = vec![0.0; x.len()];
        self.problem.constraint_jt(x, &w, &mut jt);
        for (gi, ji) in g.iter_mut().zip(&jt) {
            *gi += ji;
        }
        f + c.iter().zip(self.lambda).map(|(ci, li)| li * ci + 0.5 * self.rho * ci * ci).sum::<f64>()
    }

    /// Hessian as `rho J^T J` plus central differences of `grad f + J^T w`
    /// with the weights `w = lambda + rho c` frozen at `x`, which keeps the
    /// large penalty curvature out of the difference quotients.
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let m = self.problem.n_constraints();
        let mut w = vec![0.0; m];
        let mut jac = DMatrix::zeros(0, n);
        if m > 0 {
            self.problem.constraints(x, &mut w);
            for (wi, li) in w.iter_mut().zip(self.lambda) {
                *wi = li + self.rho * *wi;
            }
            jac = self.problem.constraint_jacobian(x);
        }
        let mut jt = vec![0.0; n];
        let mut lagrangian_gradient = |y: &[f64], g: &mut [f64]| {
            self.problem.gradient(y, g);
            if m > 0 {
                self.problem.constraint_jt(y, &w, &mut jt);
                for (gi, ji) in g.iter_mut().zip(&jt) {
                    *gi += ji;
                }
            }
        };
        let pattern = self.problem.hessian_sparsity();
        let groups = match &pattern {
            Some(p) => color_columns(p, n),
            None => (0..n).map(|j| vec![j]).collect(),
        };
        let mut hess = DMatrix::<f64>::zeros(n, n);
        let mut gp = vec![0.0; n];
        let mut gm = vec![0.0; n];
        let mut xp = x.to_vec();
        let steps: Vec<f64> = x.iter().map(|v| f64::EPSILON.cbrt() * v.abs().max(1.0)).collect();
        for group in &groups {
            for &j in group {
                xp[j] = x[j] + steps[j];
            }
            lagrangian_gradient(&xp, &mut gp);
            for &j in group {
                xp[j] = x[j] - steps[j];
            }
            lagrangian_gradient(&xp, &mut gm);
            for &j in group {
                xp[j] = x[j];
                let h2 = 2.0 * steps[j];
                match &pattern {
                    Some(p) => {
                        for &i in &p[j] {
                            hess[(i, j)] = (gp[i] - gm[i]) / h2;
                        }
                    }
                    None => {
                        for i in 0..n {
                            hess[(i, j)] = (gp[i] - gm[i]) / h2;
                        }
                    }
                }
            }
        }
        let mut sym = (&hess + hess.transpose()) * 0.5;
        if m > 0 {
            sym += jac.transpose() * &jac * self.rho;
        }
        sym
    }
}

/// Greedy grouping of columns whose row patterns are pairwise disjoint, so a
/// whole group can share one difference quotient.
fn color_columns(pattern: &[Vec<usize>], n: usize) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut used: Vec<Vec<bool>> = Vec::new();
    for (j, rows) in pattern.iter().enumerate().take(n) {
        let slot = used.iter().position(|u| rows.iter().all(|&i| !u[i]));
        let k = slot.unwrap_or_else(|| {
            groups.push(Vec::new());
            used.push(vec![false; n]);
            groups.len() - 1
        });
        groups[k].push(j);
        for &i in rows {
            used[k][i] = true;
        }
    }
    groups
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

struct InnerResult {
    x: Vec<f64>,
    iterations: usize,
    grad_norm: f64,
    stalled: bool,
}

/// Strong Wolfe line search along `d` (Nocedal-Wright algorithms 3.5/3.6).
fn line_search(
    phi: &mut dyn FnMut(f64, &mut [f64]) -> (f64, f64),
    f0: f64,
    dphi0: f64,
    alpha0: f64,
    grad: &mut [f64],
) -> Option<(f64, f64)> {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let mut scratch = vec![0.0; grad.len()];
    let (mut a_prev, mut f_prev, mut d_prev) = (0.0, f0, dphi0);
    let mut a = alpha0;
    for i in 0..40 {
        let (fa, da) = phi(a, &mut scratch);
        if !fa.is_finite() {
            a = 0.5 * (a_prev + a);
            continue;
        }
        if fa > f0 + C1 * a * dphi0 || (i > 0 && fa >= f_prev) {
            return zoom(phi, f0, dphi0, (a_prev, f_prev, d_prev), (a, fa, da), grad);
        }
        if da.abs() <= -C2 * dphi0 {
            grad.copy_from_slice(&scratch);
            return Some((a, fa));
        }
        if da >= 0.0 {
            return zoom(phi, f0, dphi0, (a, fa, da), (a_prev, f_prev, d_prev), grad);
        }
        a_prev = a;
        f_prev = fa;
        d_prev = da;
        a *= 2.0;
    }
    None
}

fn zoom(
    phi: &mut dyn FnMut(f64, &mut [f64]) -> (f64, f64),
    f0: f64,
    dphi0: f64,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
    grad: &mut [f64],
) -> Option<(f64, f64)> {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let mut scratch = vec![0.0; grad.len()];
    for _ in 0..60 {
        // cubic interpolation with a safeguarded fallback to bisection
        let (a0, f0_, d0) = lo;
        let (a1, f1, d1) = hi;
        let d1_ = d0 + d1 - 3.0 * (f0_ - f1) / (a0 - a1);
        let disc = d1_ * d1_ - d0 * d1;
        let mut a = if disc >= 0.0 {
            let d2 = (a1 - a0).signum() * disc.sqrt();
            a1 - (a1 - a0) * (d1 + d2 - d1_) / (d1 - d0 + 2.0 * d2)
        } else {
            f64::NAN
        };
        let (left, right) = (a0.min(a1), a0.max(a1));
        let margin = 0.1 * (right - left);
        if !a.is_finite() || a < left + margin || a > right - margin {
            a = 0.5 * (a0 + a1);
        }
        if (right - left) < 1e-16 * right.max(1.0) {
            break;
        }
        let (fa, da) = phi(a, &mut scratch);
        if !fa.is_finite() || fa > f0 + C1 * a * dphi0 || fa >= lo.1 {
            hi = (a, fa, da);
        } else {
            if da.abs() <= -C2 * dphi0 {
                grad.copy_from_slice(&scratch);
                return Some((a, fa));
            }
            if da * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (a, fa, da);
        }
    }
    // accept the best sufficient-decrease point if curvature could not be met
    if lo.0 > 0.0 && lo.1 < f0 {
        let (fa, _) = phi(lo.0, &mut scratch);
        grad.copy_from_slice(&scratch);
        return Some((lo.0, fa));
    }
    None
}

/// BFGS on the smooth function `eval(x, g) -> f`.
fn bfgs(eval: &dyn Fn(&[f64], &mut [f64]) -> f64, x0: &[f64], tol: f64, max_iter: usize) -> Result<InnerResult> {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut g = vec![0.0; n];
    let mut f = eval(x.as_slice(), &mut g);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("objective at the start point"));
    }
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut iterations = 0;
    let mut stalled = false;
    while iterations < max_iter {
        let gn = inf_norm(&g);
        if gn <= tol {
            break;
        }
        iterations += 1;
        let gv = DVector::from_column_slice(&g);
        let mut d = -(&hinv * &gv);
        let mut slope = d.dot(&gv);
        if slope >= 0.0 || !slope.is_finite() {
            hinv = DMatrix::identity(n, n);
            fresh = true;
            d = -gv.clone();
            slope = d.dot(&gv);
        }
        let alpha0 = if fresh { (1.0 / d.amax()).min(1.0) } else { 1.0 };
        let mut phi = |a: f64, grad: &mut [f64]| {
            let xt = &x + &d * a;
            let ft = eval(xt.as_slice(), grad);
            let dt = grad.iter().zip(d.iter()).map(|(p, q)| p * q).sum::<f64>();
            (ft, dt)
        };
        let mut g_new = vec![0.0; n];
        let Some((alpha, f_new)) = line_search(&mut phi, f, slope, alpha0, &mut g_new) else {
            if fresh {
                stalled = true;
                break;
            }
            hinv = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };
        let s = &d * alpha;
        let y = DVector::from_column_slice(&g_new) - &gv;
        x += &s;
        let df = f - f_new;
        f = f_new;
        g = g_new;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                hinv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (s hy^T + hy s^T) + (rho^2 yHy + rho) s s^T
            hinv -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho);
            fresh = false;
        }
        if df.abs() <= f64::EPSILON * f.abs().max(1e-300) && s.amax() <= f64::EPSILON * x.amax().max(1.0) {
            stalled = true;
            break;
        }
    }
    Ok(InnerResult {
        grad_norm: inf_norm(&g),
        x: x.as_slice().to_vec(),
        iterations,
        stalled,
    })
}

/// Newton iteration on `eval(x, g) -> f` with a strong Wolfe line search.
/// The Hessian is shifted by a multiple of the identity until it admits a
/// Cholesky factorization.
fn newton(
    eval: &dyn Fn(&[f64], &mut [f64]) -> f64,
    hessian: &dyn Fn(&[f64]) -> DMatrix<f64>,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<InnerResult> {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut g = vec![0.0; n];
    let mut f = eval(x.as_slice(), &mut g);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("objective at the start point"));
    }
    let mut iterations = 0;
    let mut stalled = false;
    while iterations < max_iter {
        if inf_norm(&g) <= tol {
            break;
        }
        iterations += 1;
        let hess = hessian(x.as_slice());
        let gv = DVector::from_column_slice(&g);
        let scale = hess.amax().max(1e-300);
        let mut shift = 0.0;
        let d = loop {
            if let Some(ch) = (&hess + DMatrix::identity(n, n) * shift).cholesky() {
                break ch.solve(&(-&gv));
            }
            shift = if shift == 0.0 { 1e-10 * scale } else { shift * 10.0 };
            if shift > 1e10 * scale {
                break -gv.clone();
            }
        };
        let mut phi = |a: f64, grad: &mut [f64]| {
            let xt = &x + &d * a;
            let ft = eval(xt.as_slice(), grad);
            (ft, grad.iter().zip(d.iter()).map(|(p, q)| p * q).sum::<f64>())
        };
        let slope = d.dot(&gv);
        let mut g_new = vec![0.0; n];
        let (alpha, f_new) = match line_search(&mut phi, f, slope, 1.0, &mut g_new) {
            Some(v) => v,
            None => {
                // at rounding level in f, judge the full step by the gradient instead
                let xt = &x + &d;
                let ft = eval(xt.as_slice(), &mut g_new);
                let noise = 16.0 * f64::EPSILON * f.abs().max(1.0);
                if ft.is_finite() && ft <= f + noise && inf_norm(&g_new) < inf_norm(&g) {
                    (1.0, ft)
                } else {
                    stalled = true;
                    break;
                }
            }
        };
        let step = &d * alpha;
        x += &step;
        let df = f - f_new;
        f = f_new;
        g = g_new;
        if df.abs() <= f64::EPSILON * f.abs().max(1e-300) && step.amax() <= f64::EPSILON * x.amax().max(1.0) {
            stalled = true;
            break;
        }
    }
    Ok(InnerResult {
        grad_norm: inf_norm(&g),
        x: x.as_slice().to_vec(),
        iterations,
        stalled,
    })
}

/// `f + lambda^T c + rho/2 |c|^2`.
pub fn minimize_constrained<P: NlpProblem + ?Sized>(problem: &P, x0: &[f64], opts: &OptimizerOptions) -> Result<Solution> {
    let n = problem.dim();
    let m = problem.n_constraints();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
    }
    let violation = |x: &[f64]| -> (f64, f64) {
        let mut c = vec![0.0; m];
        problem.constraints(x, &mut c);
        (inf_norm(&c), c.iter().map(|v| v.abs()).sum())
    };
    let mut x = x0.to_vec();
    let mut lambda = vec![0.0; m];
    let mut rho = if m == 0 { 0.0 } else { opts.rho0 };
    let mut omega: f64 = 1e-3;
    let mut eta: f64 = 0.1;
    let mut inner_total = 0;
    let mut merit_history = Vec::new();
    let mut status = Status::MaxIterations;
    let mut outer = 0;
    let mut weight: f64 = 1.0;
    while outer < opts.max_outer {
        outer += 1;
        let tol = if m == 0 { opts.grad_tol } else { omega.max(opts.grad_tol) };
        let aug = Augmented { problem, lambda: &lambda, rho };
        let eval = |y: &[f64], g: &mut [f64]| aug.eval(y, g);
        let inner = match opts.inner {
            InnerSolver::Bfgs => bfgs(&eval, &x, tol, opts.max_inner)?,
            InnerSolver::Newton => newton(&eval, &|y: &[f64]| aug.hessian(y), &x, tol, opts.max_inner)?,
        };
        inner_total += inner.iterations;
        if m == 0 {
            x = inner.x;
            status = if inner.grad_norm <= opts.grad_tol {
                Status::Converged
            } else if inner.stalled {
                Status::Stalled
            } else {
                Status::MaxIterations
            };
            break;
        }
        let (viol_new, l1_new) = violation(&inner.x);
        let (_, l1_old) = violation(&x);
        weight = weight.max(2.0 * inf_norm(&lambda) + 1.0);
        let merit_old = problem.objective(&x) + weight * l1_old;
        let merit_new = problem.objective(&inner.x) + weight * l1_new;
        let tolerance = 1e-12 * merit_old.abs().max(1.0);
        let accept = merit_new <= merit_old + tolerance || rho >= opts.rho_max || outer == 1;
        if !accept {
            rho = (rho * opts.rho_growth).min(opts.rho_max);
            continue;
        }
        if outer > 1 {
            merit_history.push((merit_old, merit_new));
        }
        x = inner.x;
        if viol_new <= eta.max(opts.feas_tol) {
            let mut c = vec![0.0; m];
            problem.constraints(&x, &mut c);
            for (li, ci) in lambda.iter_mut().zip(&c) {
                *li += rho * ci;
            }
            eta = (eta * 0.1).max(opts.feas_tol * 0.1);
            omega = (omega * 0.1).max(opts.grad_tol * 0.1);
        } else {
            rho = (rho * opts.rho_growth).min(opts.rho_max);
            eta = eta.max(0.1 / rho.sqrt());
        }
        let viol = violation(&x).0;
        if viol <= opts.feas_tol {
            let (_, r) = projected_gradient(problem, &x);
            if r.amax() <= opts.grad_tol {
                status = Status::Converged;
                break;
            }
            if inner.stalled {
                status = Status::Stalled;
                break;
            }
        }
        if inner.stalled && rho >= opts.rho_max {
            status = Status::Stalled;
            break;
        }
    }
    let (max_violation, _) = if m == 0 { (0.0, 0.0) } else { violation(&x) };
    let (multipliers, r) = if m == 0 { (DVector::zeros(0), DVector::zeros(0)) } else { projected_gradient(problem, &x) };
    let grad_norm = if m == 0 {
        let mut g = vec![0.0; n];
        problem.gradient(&x, &mut g);
        inf_norm(&g)
    } else {
        r.amax()
    };
    Ok(Solution {
        objective: problem.objective(&x),
        grad_norm,
        x,
        multipliers: multipliers.as_slice().to_vec(),
        max_violation,
        status,
        outer_iterations: outer,
        inner_iterations: inner_total,
        penalty: rho,
        merit_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_projection_multiplier() {
        let p = FnProblem {
            dim: 2,
            n_constraints: 1,
            objective: |x: &[f64]| x[0] * x[0] + x[1] * x[1],
            constraints: |x: &[f64], c: &mut [f64]| c[0] = x[0] + x[1] - 1.0,
        };
        let s = minimize_constrained(&p, &[2.0, -1.0], &OptimizerOptions::default()).unwrap();
        assert!(s.converged(), "{s:?}");
        assert!((s.x[0] - 0.5).abs() < 1e-8 && (s.x[1] - 0.5).abs() < 1e-8);
        assert!((s.multipliers[0] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock() {
        let p = FnProblem::unconstrained(2, |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let s = minimize_constrained(&p, &[-1.2, 1.0], &OptimizerOptions::default()).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-6 && (s.x[1] - 1.0).abs() < 1e-6, "{s:?}");
    }

    struct Chain {
        sparse: bool,
    }

    impl NlpProblem for Chain {
        fn dim(&self) -> usize {
            6
        }
        fn n_constraints(&self) -> usize {
            1
        }
        fn objective(&self, x: &[f64]) -> f64 {
            x.windows(2).map(|w| (w[1] - w[0] * w[0]).powi(2) + w[0].sin() * w[1]).sum()
        }
        fn constraints(&self, x: &[f64], c: &mut [f64]) {
            c[0] = x[0] * x[5] - 0.3;
        }
        fn hessian_sparsity(&self) -> Option<Vec<Vec<usize>>> {
            if !self.sparse {
                return None;
            }
            let mut p: Vec<Vec<usize>> = (0..6usize).map(|j| (j.saturating_sub(1)..(j + 2).min(6)).collect()).collect();
            p[0].push(5);
            p[5].insert(0, 0);
            Some(p)
        }
    }

    #[test]
    fn colored_hessian_matches_dense() {
        let x = [0.3, -0.7, 1.1, 0.2, -0.4, 0.9];
        let lambda = [0.8];
        let dense = Augmented { problem: &Chain { sparse: false }, lambda: &lambda, rho: 5.0 }.hessian(&x);
        let sparse = Augmented { problem: &Chain { sparse: true }, lambda: &lambda, rho: 5.0 }.hessian(&x);
        assert!(color_columns(&Chain { sparse: true }.hessian_sparsity().unwrap(), 6).len() < 6);
        assert!((&dense - &sparse).amax() < 1e-5, "{dense}\n{sparse}");
    }
}
