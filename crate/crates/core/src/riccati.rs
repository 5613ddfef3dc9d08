//! Periodic Riccati equation `G' = -M^T G - G M - G A G` on the normal bundle of the cycle.

use nalgebra::{Complex, DMatrix, DMatrixView, DVector};
use serde::{Deserialize, Serialize};

use crate::cycle::LimitCycle;
use crate::error::{Error, Result};
use crate::frame::MovingFrame;
use crate::interp::{cumulative_simpson, periodic_matrix_derivative, InterpKind, MatrixSeries};
use crate::linalg::{eigenvalues, left_eigenpairs, lower_block, min_sym_eigenvalue, sym_eigenvalues, symmetrize};
use crate::ode::{self, OdeOptions, Tolerances};
use crate::systems::{DiffusionKind, SystemSpec};

/// Reduced coefficients `M~ = J~ - Omega~` and `A~` sampled over the solve period.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrdeCoefficients {
    cycle_period: f64,
    m: MatrixSeries,
    a: MatrixSeries,
    flip: Vec<f64>,
}

impl PrdeCoefficients {
    /// Builds coefficients from samples on a uniform grid over `period`.
    pub fn from_samples(
        cycle_period: f64,
        period: f64,
        m: &[DMatrix<f64>],
        a: &[DMatrix<f64>],
        flip: Vec<f64>,
        a_kind: InterpKind,
    ) -> Self {
        Self {
            cycle_period,
            m: MatrixSeries::new(period, m, None),
            a: MatrixSeries::new(period, a, None).with_kind(a_kind),
            flip,
        }
    }

    /// Constant coefficients, handy for analytic checks.
    pub fn constant(period: f64, m: DMatrix<f64>, a: DMatrix<f64>, samples: usize) -> Self {
        let n = m.nrows();
        Self::from_samples(
            period,
            period,
            &vec![m; samples],
            &vec![a; samples],
            vec![1.0; n],
            InterpKind::Hermite,
        )
    }

    pub fn dim(&self) -> usize {
        self.m.shape().0
    }

    /// Length of the solve interval (`T`, or `2T` for anti-periodic frames).
    pub fn period(&self) -> f64 {
        self.m.period()
    }

    pub fn cycle_period(&self) -> f64 {
        self.cycle_period
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.period() / self.len() as f64
    }

    pub fn m(&self, tau: f64) -> DMatrix<f64> {
        self.m.eval(tau)
    }

    pub fn a(&self, tau: f64) -> DMatrix<f64> {
        self.a.eval(tau)
    }

    pub fn m_sample(&self, k: usize) -> DMatrix<f64> {
        self.m.sample(k)
    }

    pub fn a_sample(&self, k: usize) -> DMatrix<f64> {
        self.a.sample(k)
    }

    /// Signs of the normal vectors under one turn (`F` without its first entry).
    pub fn flip(&self) -> &[f64] {
        &self.flip
    }

    pub fn flip_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.flip))
    }

    pub fn is_doubled(&self) -> bool {
        self.flip.iter().any(|s| *s < 0.0)
    }

    pub fn max_m_norm(&self) -> f64 {
        (0..self.len()).map(|k| self.m_sample(k).norm()).fold(0.0, f64::max)
    }

    pub fn max_a_norm(&self) -> f64 {
        (0..self.len()).map(|k| self.a_sample(k).norm()).fold(0.0, f64::max)
    }
}

/// `J~_ij = <e^i, Db e_j>`, `M~ = J~ - Omega~`, `A~_ij = <e^i, a e^j>` for `i, j >= 1`.
///
/// For anti-periodic frames the samples cover `[0, 2T)`, which yields the
/// composite coefficients of the doubled-period problem.
pub fn reduced_coefficients(spec: &SystemSpec, cycle: &LimitCycle, frame: &MovingFrame) -> Result<PrdeCoefficients> {
    let k = cycle.len();
    if frame.samples_per_period() != k {
        return Err(Error::InvalidArgument("frame and cycle grids differ".into()));
    }
    let n = frame.grid_len();
    let mut ms = Vec::with_capacity(n);
    let mut as_ = Vec::with_capacity(n);
    for i in 0..n {
        let x = cycle.sample(i % k);
        let e = frame.grid_basis(i);
        let einv = frame.grid_reciprocal(i);
        let j = spec.eval_jacobian(x)?;
        let a = spec.eval_diffusion(x)?;
        let jt = lower_block(&(&einv * j * &e));
        let om = lower_block(frame.grid_omega(i));
        ms.push(jt - om);
        as_.push(symmetrize(&lower_block(&(&einv * a * einv.transpose()))));
    }
    let a_kind = match spec.diffusion_kind() {
        DiffusionKind::Discontinuous => InterpKind::Linear,
        _ => InterpKind::Hermite,
    };
    Ok(PrdeCoefficients::from_samples(
        cycle.period(),
        frame.unwrapped_period(),
        &ms,
        &as_,
        frame.flips()[1..].to_vec(),
        a_kind,
    ))
}

/// Sampled symmetric matrix function on a uniform periodic grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicMatrixFunction {
    series: MatrixSeries,
    cycle_period: f64,
    flip: Vec<f64>,
    iterations: usize,
}

impl PeriodicMatrixFunction {
    pub fn new(period: f64, cycle_period: f64, samples: &[DMatrix<f64>], slopes: Option<&[DMatrix<f64>]>, flip: Vec<f64>) -> Self {
        Self {
            series: MatrixSeries::new(period, samples, slopes),
            cycle_period,
            flip,
            iterations: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.series.shape().0
    }

    pub fn period(&self) -> f64 {
        self.series.period()
    }

    pub fn cycle_period(&self) -> f64 {
        self.cycle_period
    }

    pub fn is_doubled(&self) -> bool {
        self.period() > 1.5 * self.cycle_period
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.period() / self.len() as f64
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn flip(&self) -> &[f64] {
        &self.flip
    }

    pub fn eval(&self, tau: f64) -> DMatrix<f64> {
        self.series.eval(tau)
    }

    pub fn deriv(&self, tau: f64) -> DMatrix<f64> {
        self.series.deriv(tau)
    }

    pub fn sample(&self, k: usize) -> DMatrix<f64> {
        self.series.sample(k)
    }

    pub fn samples(&self) -> Vec<DMatrix<f64>> {
        (0..self.len()).map(|k| self.sample(k)).collect()
    }

    pub fn eigenvalues(&self, tau: f64) -> Vec<f64> {
        sym_eigenvalues(&self.eval(tau))
    }

    /// Smallest eigenvalue over the grid.
    pub fn min_eigenvalue(&self) -> f64 {
        (0..self.len()).map(|k| min_sym_eigenvalue(&self.sample(k))).fold(f64::INFINITY, f64::min)
    }

    /// Representation in the frame `E+` (phases folded into `[0, T)`).
    pub fn in_plus_basis(&self, tau: f64) -> DMatrix<f64> {
        self.eval(tau.rem_euclid(self.cycle_period))
    }

    /// Representation in the frame `E- = E+ F` (phases shifted by `T`).
    pub fn in_minus_basis(&self, tau: f64) -> DMatrix<f64> {
        let t = tau.rem_euclid(self.cycle_period);
        if self.is_doubled() {
            self.eval(t + self.cycle_period)
        } else {
            let f = DMatrix::from_diagonal(&DVector::from_column_slice(&self.flip));
            &f * self.eval(t) * &f
        }
    }
}

/// Options for [`solve_prde`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PrdeOptions {
    /// Initial scalar `G_0 = c0 I`; `None` picks `100 (1 + max |M~|_F)`.
    pub c0: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub ode: Tolerances,
}

impl Default for PrdeOptions {
    fn default() -> Self {
        Self {
            c0: None,
            tol: 1e-10,
            max_iter: 500,
            ode: Tolerances::default(),
        }
    }
}

fn riccati_rhs(coeffs: &PrdeCoefficients) -> impl FnMut(f64, &[f64], &mut [f64]) + '_ {
    let n = coeffs.dim();
    move |t, y, dy| {
        let g = DMatrixView::from_slice(y, n, n);
        let m = coeffs.m(t);
        let a = coeffs.a(t);
        let gm = g * &m;
        let r = -gm.transpose() - &gm - g * a * g;
        dy.copy_from_slice(r.as_slice());
    }
}

fn riccati_value(coeffs: &PrdeCoefficients, tau: f64, g: &DMatrix<f64>) -> DMatrix<f64> {
    let m = coeffs.m(tau);
    let a = coeffs.a(tau);
    let gm = g * &m;
    -gm.transpose() - &gm - g * a * g
}

fn symmetrize_in_place(n: usize) -> impl Fn(&mut [f64]) {
    move |y: &mut [f64]| {
        for i in 0..n {
            for j in i + 1..n {
                let v = 0.5 * (y[i + j * n] + y[j + i * n]);
                y[i + j * n] = v;
                y[j + i * n] = v;
            }
        }
    }
}

/// Integrates the Riccati flow from `G(tau0) = g0` to `tau1`, returning the
/// values at the requested output phases (monotone, inside the span).
pub fn riccati_flow(
    coeffs: &PrdeCoefficients,
    g0: &DMatrix<f64>,
    tau0: f64,
    tau1: f64,
    outputs: &[f64],
    tol: Tolerances,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    let n = coeffs.dim();
    let mut seen = Vec::with_capacity(outputs.len());
    let sym = symmetrize_in_place(n);
    let (y, _) = ode::integrate(
        riccati_rhs(coeffs),
        tau0,
        symmetrize(g0).as_slice(),
        tau1,
        &OdeOptions::with_tol(tol),
        outputs,
        |_, y| seen.push(DMatrix::from_column_slice(n, n, y)),
        Some(&sym),
    )?;
    Ok((DMatrix::from_column_slice(n, n, &y), seen))
}

fn period_map(coeffs: &PrdeCoefficients, g: &DMatrix<f64>, tol: Tolerances) -> Result<DMatrix<f64>> {
    let (next, _) = riccati_flow(coeffs, g, 0.0, coeffs.period(), &[], tol)?;
    let lmin = min_sym_eigenvalue(&next);
    if !(lmin > 0.0) {
        return Err(Error::LostDefiniteness {
            tau: coeffs.period(),
            min_eigenvalue: lmin,
        });
    }
    Ok(next)
}

/// Fixed-point iteration of the period map of the Riccati flow from `c0 I`.
pub fn solve_prde(coeffs: &PrdeCoefficients, opts: &PrdeOptions) -> Result<PeriodicMatrixFunction> {
    let n = coeffs.dim();
    let period = coeffs.period();
    let c0 = opts.c0.unwrap_or(100.0 * (1.0 + coeffs.max_m_norm()));
    if !(c0 > 0.0) {
        return Err(Error::InvalidArgument("c0 must be positive".into()));
    }
    let mut g = DMatrix::identity(n, n) * c0;
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    loop {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual: change,
            });
        }
        iterations += 1;
        let next = period_map(coeffs, &g, opts.ode)?;
        change = (&next - &g).norm() / g.norm();
        g = next;
        if change <= opts.tol {
            break;
        }
    }
    // refine at the sampling tolerance so the sampled orbit closes up at the seam
    let sweep = Tolerances::new(opts.ode.rel * 1e-2, opts.ode.abs * 1e-2);
    let mut last = f64::INFINITY;
    for _ in 0..20 {
        let next = period_map(coeffs, &g, sweep)?;
        let c = (&next - &g).norm() / g.norm();
        g = next;
        iterations += 1;
        if c >= 0.5 * last || c <= 1e-3 * opts.tol {
            break;
        }
        last = c;
    }
    let h = coeffs.step();
    let times: Vec<f64> = (0..coeffs.len()).map(|k| k as f64 * h).collect();
    let (_, samples) = riccati_flow(coeffs, &g, 0.0, period, &times, sweep)?;
    for (k, s) in samples.iter().enumerate() {
        let lmin = min_sym_eigenvalue(s);
        if !(lmin > 0.0) {
            return Err(Error::LostDefiniteness {
                tau: times[k],
                min_eigenvalue: lmin,
            });
        }
    }
    let slopes: Vec<DMatrix<f64>> = samples
        .iter()
        .zip(&times)
        .map(|(s, t)| symmetrize(&riccati_value(coeffs, *t, s)))
        .collect();
    let mut out = PeriodicMatrixFunction::new(period, coeffs.cycle_period(), &samples, Some(&slopes), coeffs.flip().to_vec());
    out.iterations = iterations;
    Ok(out)
}

/// Sub-intervals per coefficient cell used by the closed-form quadrature.
const QUADRATURE_REFINE: usize = 4;

/// Closed-form periodic solution for scalar coefficients (planar cycles):
/// `H(tau) = exp(2 m(tau)) [H(0) + int_0^tau A~ exp(-2 m)]` with `m = int_0^tau M~`, `G = 1/H`.
///
/// The integrals use composite Simpson rules on the coefficient interpolants,
/// with each grid cell split into four.
pub fn analytic_planar_solution(coeffs: &PrdeCoefficients) -> Result<PeriodicMatrixFunction> {
    if coeffs.dim() != 1 {
        return Err(Error::InvalidArgument("closed form needs scalar coefficients".into()));
    }
    let r = QUADRATURE_REFINE;
    let n = coeffs.len();
    let nf = n * r;
    let h = coeffs.step() / r as f64;
    // node nf closes the period
    let mvals: Vec<f64> = (0..=nf).map(|k| coeffs.m(k as f64 * h)[(0, 0)]).collect();
    let avals: Vec<f64> = (0..=nf).map(|k| coeffs.a(k as f64 * h)[(0, 0)]).collect();
    let m = cumulative_simpson(&mvals, h);
    let mt = m[nf];
    if mt >= 0.0 {
        return Err(Error::NotStable {
            max_modulus: mt.exp(),
        });
    }
    if avals.iter().all(|a| a.abs() <= 1e-14) {
        return Err(Error::NoPositiveSolution("normal diffusion vanishes identically".into()));
    }
    let num: Vec<f64> = (0..=nf).map(|k| avals[k] * (2.0 * (mt - m[k])).exp()).collect();
    let h0 = cumulative_simpson(&num, h)[nf] / (1.0 - (2.0 * mt).exp());
    if !(h0 > 0.0) {
        return Err(Error::NoPositiveSolution(format!("H(0) = {h0:.3e}")));
    }
    let decay: Vec<f64> = (0..=nf).map(|k| avals[k] * (-2.0 * m[k]).exp()).collect();
    let acc = cumulative_simpson(&decay, h);
    let mut samples = Vec::with_capacity(n);
    let mut slopes = Vec::with_capacity(n);
    for k in 0..n {
        let j = k * r;
        let hk = (2.0 * m[j]).exp() * (h0 + acc[j]);
        if !(hk > 0.0) {
            return Err(Error::LostDefiniteness {
                tau: k as f64 * coeffs.step(),
                min_eigenvalue: hk,
            });
        }
        let g = 1.0 / hk;
        samples.push(DMatrix::from_element(1, 1, g));
        slopes.push(DMatrix::from_element(1, 1, -2.0 * mvals[j] * g - avals[j] * g * g));
    }
    Ok(PeriodicMatrixFunction::new(
        coeffs.period(),
        coeffs.cycle_period(),
        &samples,
        Some(&slopes),
        coeffs.flip().to_vec(),
    ))
}

/// Max over grid nodes of `|G' + M~^T G + G M~ + G A~ G|_F`, with `G'` by
/// fourth-order periodic differences.
pub fn prde_residual(g: &PeriodicMatrixFunction, coeffs: &PrdeCoefficients) -> Result<f64> {
    if g.len() != coeffs.len() || (g.period() - coeffs.period()).abs() > 1e-12 * coeffs.period() {
        return Err(Error::InvalidArgument("grids of G and the coefficients differ".into()));
    }
    let samples = g.samples();
    let dg = periodic_matrix_derivative(&samples, g.step());
    Ok((0..g.len())
        .map(|k| {
            let gk = &samples[k];
            let m = coeffs.m_sample(k);
            let a = coeffs.a_sample(k);
            (&dg[k] + m.transpose() * gk + gk * &m + gk * a * gk).norm()
        })
        .fold(0.0, f64::max))
}

/// Re-integrates the Riccati flow from `G(0)` and samples it `refine` times
/// more densely than the grid of `g`.
pub fn resample(g: &PeriodicMatrixFunction, coeffs: &PrdeCoefficients, refine: usize, tol: Tolerances) -> Result<Vec<DMatrix<f64>>> {
    let n = g.len() * refine.max(1);
    let h = g.period() / n as f64;
    let times: Vec<f64> = (0..n).map(|k| k as f64 * h).collect();
    let (_, samples) = riccati_flow(coeffs, &g.sample(0), 0.0, g.period(), &times, tol)?;
    Ok(samples)
}

/// Residual of the Riccati equation on a grid `refine` times finer than that of `g`.
pub fn prde_residual_refined(g: &PeriodicMatrixFunction, coeffs: &PrdeCoefficients, refine: usize) -> Result<f64> {
    let samples = resample(g, coeffs, refine, Tolerances::new(1e-13, 1e-15))?;
    let h = g.period() / samples.len() as f64;
    let dg = periodic_matrix_derivative(&samples, h);
    Ok((0..samples.len())
        .map(|k| {
            let t = k as f64 * h;
            let gk = &samples[k];
            (&dg[k] - riccati_value(coeffs, t, gk)).norm()
        })
        .fold(0.0, f64::max))
}

/// Residual of `H' = M~ H + H M~^T + A~` for `H = G^{-1}`, with `H'` from
/// fourth-order differences on a grid `refine` times finer than that of `g`.
pub fn plde_residual(g: &PeriodicMatrixFunction, coeffs: &PrdeCoefficients, refine: usize) -> Result<f64> {
    let samples = resample(g, coeffs, refine, Tolerances::new(1e-13, 1e-15))?;
    let h = g.period() / samples.len() as f64;
    let hs: Vec<DMatrix<f64>> = samples
        .iter()
        .map(|s| s.clone().try_inverse().ok_or(Error::NoPositiveSolution("G is singular".into())))
        .collect::<Result<_>>()?;
    let dh = periodic_matrix_derivative(&hs, h);
    Ok((0..hs.len())
        .map(|k| {
            let t = k as f64 * h;
            let m = coeffs.m(t);
            let a = coeffs.a(t);
            (&dh[k] - &m * &hs[k] - &hs[k] * m.transpose() - a).norm()
        })
        .fold(0.0, f64::max))
}

/// Integrates the Lyapunov equation from `H(0) = G(0)^{-1}` and returns the
/// largest deviation from `G^{-1}` over the grid.
pub fn plde_consistency(g: &PeriodicMatrixFunction, coeffs: &PrdeCoefficients, tol: Tolerances) -> Result<f64> {
    let n = coeffs.dim();
    let h0 = g
        .sample(0)
        .try_inverse()
        .ok_or(Error::NoPositiveSolution("G(0) is singular".into()))?;
    let times: Vec<f64> = (0..g.len()).map(|k| k as f64 * g.step()).collect();
    let mut worst: f64 = 0.0;
    let mut idx = 0;
    ode::integrate(
        |t, y, dy| {
            let h = DMatrixView::from_slice(y, n, n);
            let m = coeffs.m(t);
            let mh = &m * h;
            let r = &mh + mh.transpose() + coeffs.a(t);
            dy.copy_from_slice(r.as_slice());
        },
        0.0,
        h0.as_slice(),
        g.period(),
        &OdeOptions::with_tol(tol),
        &times,
        |_, y| {
            let h = DMatrix::from_column_slice(n, n, y);
            if let Some(inv) = g.sample(idx).try_inverse() {
                worst = worst.max((h - inv).norm());
            } else {
                worst = f64::INFINITY;
            }
            idx += 1;
        },
        None,
    )?;
    Ok(worst)
}

/// Checks `G(tau + T) = F G(tau) F` on a doubled-period solution and returns a
/// copy with the two halves made exactly conjugate.
pub fn conjugate_by_flip(g: &PeriodicMatrixFunction, flip: &[f64]) -> Result<PeriodicMatrixFunction> {
    if flip.iter().all(|s| *s > 0.0) {
        return Ok(g.clone());
    }
    if !g.is_doubled() || !g.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument("flip conjugacy needs a doubled-period solution".into()));
    }
    let f = DMatrix::from_diagonal(&DVector::from_column_slice(flip));
    let half = g.len() / 2;
    let samples = g.samples();
    let mut worst: f64 = 0.0;
    for k in 0..half {
        worst = worst.max((&samples[k + half] - &f * &samples[k] * &f).norm());
    }
    if worst > 1e-8 {
        return Err(Error::ConjugacyViolation(worst));
    }
    let mut out = samples.clone();
    for k in 0..half {
        let avg = (&samples[k] + &f * &samples[k + half] * &f) * 0.5;
        out[k + half] = &f * &avg * &f;
        out[k] = avg;
    }
    let slopes: Vec<DMatrix<f64>> = (0..g.len())
        .map(|k| g.deriv(k as f64 * g.step()))
        .collect();
    let mut avg_slopes = slopes.clone();
    for k in 0..half {
        let s = (&slopes[k] + &f * &slopes[k + half] * &f) * 0.5;
        avg_slopes[k + half] = &f * &s * &f;
        avg_slopes[k] = s;
    }
    let mut res = PeriodicMatrixFunction::new(g.period(), g.cycle_period(), &out, Some(&avg_slopes), flip.to_vec());
    res.iterations = g.iterations;
    Ok(res)
}

/// Largest deviation `|G(tau + T) - F G(tau) F|_F` over the first half of the grid.
pub fn conjugacy_defect(g: &PeriodicMatrixFunction) -> f64 {
    if !g.is_doubled() {
        return 0.0;
    }
    let f = DMatrix::from_diagonal(&DVector::from_column_slice(g.flip()));
    let half = g.len() / 2;
    (0..half)
        .map(|k| (g.sample(k + half) - &f * g.sample(k) * &f).norm())
        .fold(0.0, f64::max)
}

/// Largest difference between the sorted eigenvalues of `G(tau)` and `G(tau + T)`.
pub fn eigenvalue_periodicity_defect(g: &PeriodicMatrixFunction) -> f64 {
    if !g.is_doubled() {
        return 0.0;
    }
    let half = g.len() / 2;
    (0..half)
        .map(|k| {
            let a = sym_eigenvalues(&g.sample(k));
            let b = sym_eigenvalues(&g.sample(k + half));
            a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllabilityCheck {
    pub tau: f64,
    pub controllable: bool,
    /// `min_u u* W u / |W|` over left eigenvectors `u` of the reduced monodromy.
    pub margin: f64,
    pub gramian_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub stable: bool,
    /// `1 - max |mu|` over the reduced monodromy multipliers.
    pub stability_margin: f64,
    pub multipliers: Vec<Complex<f64>>,
    pub checks: Vec<ControllabilityCheck>,
}

impl ConditionReport {
    /// Existence and uniqueness need stability and one controllable phase.
    pub fn controllable(&self) -> bool {
        self.checks.iter().any(|c| c.controllable)
    }

    pub fn satisfied(&self) -> bool {
        self.stable && self.controllable()
    }
}

/// Reduced monodromy `Phi_M(tau + P, tau)` and Gramian `W(tau + P, tau)`.
pub fn monodromy_and_gramian(coeffs: &PrdeCoefficients, tau: f64, tol: Tolerances) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = coeffs.dim();
    let nn = n * n;
    let mut y0 = DMatrix::<f64>::identity(n, n).as_slice().to_vec();
    y0.extend(std::iter::repeat_n(0.0, nn));
    let y = ode::flow(
        |t, y, dy| {
            let m = coeffs.m(t);
            let phi = DMatrixView::from_slice(&y[..nn], n, n);
            let w = DMatrixView::from_slice(&y[nn..], n, n);
            let dphi = &m * phi;
            let mw = &m * w;
            let dw = &mw + mw.transpose() + coeffs.a(t);
            dy[..nn].copy_from_slice(dphi.as_slice());
            dy[nn..].copy_from_slice(dw.as_slice());
        },
        tau,
        &y0,
        tau + coeffs.period(),
        &OdeOptions::with_tol(tol),
    )?;
    Ok((DMatrix::from_column_slice(n, n, &y[..nn]), symmetrize(&DMatrix::from_column_slice(n, n, &y[nn..]))))
}

/// Stability of the reduced system and a PBH-type controllability test of
/// `(Phi_M, W)` at `tau_prime` and eight equispaced phases.
pub fn check_conditions(coeffs: &PrdeCoefficients, tau_prime: f64) -> Result<ConditionReport> {
    let tol = Tolerances::default();
    let period = coeffs.period();
    let mut phases = vec![tau_prime];
    phases.extend((0..8).map(|i| i as f64 * period / 8.0));
    let mut checks = Vec::with_capacity(phases.len());
    let mut multipliers = Vec::new();
    for (idx, tau) in phases.iter().enumerate() {
        let (phi, w) = monodromy_and_gramian(coeffs, *tau, tol)?;
        if idx == 0 {
            multipliers = eigenvalues(&phi);
        }
        let wn = w.norm();
        let wc = w.map(|v| Complex::new(v, 0.0));
        let margin = if wn == 0.0 {
            0.0
        } else {
            left_eigenpairs(&phi)
                .iter()
                .map(|(_, u)| (u.adjoint() * &wc * u)[(0, 0)].re / wn)
                .fold(f64::INFINITY, f64::min)
        };
        checks.push(ControllabilityCheck {
            tau: *tau,
            controllable: wn > 0.0 && margin > 1e-10,
            margin,
            gramian_norm: wn,
        });
    }
    let max_mod = multipliers.iter().map(|m| m.norm()).fold(0.0, f64::max);
    Ok(ConditionReport {
        stable: max_mod < 1.0,
        stability_margin: 1.0 - max_mod,
        multipliers,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn hopf_like() -> PrdeCoefficients {
        PrdeCoefficients::constant(2.0 * PI, DMatrix::from_element(1, 1, -2.0), DMatrix::from_element(1, 1, 1.0), 256)
    }

    #[test]
    fn constant_coefficients_give_four() {
        let c = hopf_like();
        let g = solve_prde(&c, &PrdeOptions::default()).unwrap();
        let ga = analytic_planar_solution(&c).unwrap();
        for tau in [0.0, 0.4, 3.3, 6.0] {
            assert!((g.eval(tau)[(0, 0)] - 4.0).abs() < 1e-6);
            assert!((ga.eval(tau)[(0, 0)] - 4.0).abs() < 1e-7);
        }
        assert!(prde_residual(&g, &c).unwrap() < 1e-8);
    }

    #[test]
    fn degenerate_cases_are_rejected() {
        let zero_a = PrdeCoefficients::constant(1.0, DMatrix::from_element(1, 1, -1.0), DMatrix::zeros(1, 1), 64);
        assert!(matches!(analytic_planar_solution(&zero_a), Err(Error::NoPositiveSolution(_))));
        let unstable = PrdeCoefficients::constant(1.0, DMatrix::from_element(1, 1, 2.0), DMatrix::identity(1, 1), 64);
        assert!(matches!(analytic_planar_solution(&unstable), Err(Error::NotStable { .. })));
        let rep = check_conditions(&zero_a, 0.0).unwrap();
        assert!(rep.stable && !rep.controllable());
        let rep = check_conditions(&hopf_like(), 0.0).unwrap();
        assert!(rep.satisfied());
    }

    #[test]
    fn zero_solution_has_zero_residual() {
        let c = hopf_like();
        let zero = PeriodicMatrixFunction::new(c.period(), c.period(), &vec![DMatrix::zeros(1, 1); c.len()], None, vec![1.0]);
        assert_eq!(prde_residual(&zero, &c).unwrap(), 0.0);
    }
}
