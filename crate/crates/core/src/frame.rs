//! Moving frames along a limit cycle and curvilinear coordinates in the tube around it.

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cycle::{self, LimitCycle};
use crate::error::{Error, Result};
use crate::interp::{periodic_matrix_derivative, MatrixSeries};
use crate::linalg::{condition_number, left_eigenpairs, null_vector, polar_orthogonal};
use crate::ode::Tolerances;
use crate::systems::SystemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameKind {
    /// Unit tangent and unit normal of a planar cycle.
    Frenet,
    /// Tangent plus left eigenvectors of the monodromy matrix.
    Eigen,
}

/// Basis `E(tau) = [e_0 .. e_{d-1}]` along the cycle together with `Omega = E^{-1} E'`.
///
/// When some basis vectors are anti-periodic the samples cover the doubled
/// period `[0, 2T)`, with `E(tau + T) = E(tau) F`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MovingFrame {
    kind: FrameKind,
    cycle_period: f64,
    samples_per_period: usize,
    basis: MatrixSeries,
    omega: Vec<DMatrix<f64>>,
    flip: Vec<f64>,
    cond: Vec<f64>,
    speed: Vec<f64>,
    multipliers: Vec<Complex<f64>>,
}

impl MovingFrame {
    pub fn kind(&self) -> FrameKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.flip.len()
    }

    pub fn cycle_period(&self) -> f64 {
        self.cycle_period
    }

    /// `T` for periodic frames, `2T` when `F != I`.
    pub fn unwrapped_period(&self) -> f64 {
        self.basis.period()
    }

    pub fn samples_per_period(&self) -> usize {
        self.samples_per_period
    }

    /// Number of stored grid samples (`K` or `2K`).
    pub fn grid_len(&self) -> usize {
        self.basis.len()
    }

    pub fn step(&self) -> f64 {
        self.cycle_period / self.samples_per_period as f64
    }

    pub fn phase(&self, k: usize) -> f64 {
        k as f64 * self.step()
    }

    pub fn basis(&self, tau: f64) -> DMatrix<f64> {
        self.basis.eval(tau)
    }

    pub fn basis_derivative(&self, tau: f64) -> DMatrix<f64> {
        self.basis.deriv(tau)
    }

    /// `E(tau)^{-1}`; its rows are the reciprocal basis `e^0 .. e^{d-1}`.
    pub fn reciprocal(&self, tau: f64) -> DMatrix<f64> {
        invert(&self.basis(tau))
    }

    pub fn omega_matrix(&self, tau: f64) -> DMatrix<f64> {
        self.reciprocal(tau) * self.basis_derivative(tau)
    }

    pub fn grid_basis(&self, k: usize) -> DMatrix<f64> {
        self.basis.sample(k)
    }

    pub fn grid_basis_derivative(&self, k: usize) -> DMatrix<f64> {
        self.basis.slope(k)
    }

    pub fn grid_reciprocal(&self, k: usize) -> DMatrix<f64> {
        invert(&self.basis.sample(k))
    }

    pub fn grid_omega(&self, k: usize) -> &DMatrix<f64> {
        &self.omega[k % self.omega.len()]
    }

    /// Unit tangent `e_0(tau)`.
    pub fn tangent(&self, tau: f64) -> DVector<f64> {
        self.basis(tau).column(0).into_owned()
    }

    pub fn flips(&self) -> &[f64] {
        &self.flip
    }

    pub fn flip_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.flip))
    }

    pub fn antiperiodic_count(&self) -> usize {
        self.flip.iter().filter(|s| **s < 0.0).count()
    }

    pub fn is_periodic(&self) -> bool {
        self.antiperiodic_count() == 0
    }

    pub fn speed(&self, k: usize) -> f64 {
        self.speed[k % self.speed.len()]
    }

    pub fn condition(&self, k: usize) -> f64 {
        self.cond[k % self.cond.len()]
    }

    pub fn max_condition(&self) -> f64 {
        self.cond.iter().cloned().fold(0.0, f64::max)
    }

    /// Nontrivial multipliers in basis order (eigenframes only).
    pub fn multipliers(&self) -> &[Complex<f64>] {
        &self.multipliers
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let c = self.max_condition();
        if c > 1e8 {
            w.push(format!("frame condition number {c:.3e} exceeds 1e8"));
        }
        w
    }

    /// Point `gamma(tau) + sum_i z_i e_i(tau)`.
    pub fn from_curvilinear(&self, cycle: &LimitCycle, tau: f64, z: &[f64]) -> DVector<f64> {
        let e = self.basis(tau);
        let mut x = cycle.state(tau);
        for (i, zi) in z.iter().enumerate() {
            x += e.column(i + 1) * *zi;
        }
        x
    }

    /// Phase of the normal hyperplane through `x` and the coordinates of `x` in it.
    pub fn to_curvilinear(&self, cycle: &LimitCycle, x: &[f64]) -> Result<(f64, DVector<f64>)> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        let xv = DVector::from_column_slice(x);
        let period = cycle.period();
        let mut tau = cycle.phase(cycle.nearest_sample(x));
        let residual = |tau: f64| -> (f64, f64) {
            let einv = self.reciprocal(tau);
            let omega = &einv * self.basis_derivative(tau);
            let e0 = einv.row(0).transpose();
            let de0 = -(omega * &einv).row(0).transpose();
            let diff = &xv - cycle.state(tau);
            let f = e0.dot(&diff);
            let df = de0.dot(&diff) - e0.dot(&cycle.velocity(tau));
            (f, df)
        };
        let mut converged = false;
        let mut last = f64::INFINITY;
        for _ in 0..60 {
            let (f, df) = residual(tau);
            last = f.abs();
            if df == 0.0 || !df.is_finite() {
                break;
            }
            let mut delta = -f / df;
            // keep steps inside a fraction of the period so the chart stays local
            let cap = 0.1 * period;
            delta = delta.clamp(-cap, cap);
            tau += delta;
            if delta.abs() <= 1e-14 * period.max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            let (f, _) = residual(tau);
            last = f.abs();
            if last > 1e-12 * (1.0 + xv.norm()) {
                return Err(Error::OutsideChart(last));
            }
        }
        let tau = cycle.wrap(tau);
        let einv = self.reciprocal(tau);
        let coords = einv * (&xv - cycle.state(tau));
        let check = coords[0].abs();
        if check > 1e-8 * (1.0 + xv.norm()) {
            return Err(Error::OutsideChart(check.max(last)));
        }
        Ok((tau, coords.rows(1, d - 1).into_owned()))
    }
}

fn invert(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(m.nrows(), m.ncols(), f64::NAN))
}

fn unit_tangent(cycle: &LimitCycle, k: usize) -> Result<DVector<f64>> {
    let b = DVector::from_column_slice(cycle.sample_velocity(k));
    let n = b.norm();
    if n < 1e-12 {
        return Err(Error::VanishingDrift { tau: cycle.phase(k) });
    }
    Ok(b / n)
}

/// Assembles the frame from one period of samples and per-vector sign flips.
fn finish(
    kind: FrameKind,
    cycle: &LimitCycle,
    samples: Vec<DMatrix<f64>>,
    slopes: Option<Vec<DMatrix<f64>>>,
    flip: Vec<f64>,
    multipliers: Vec<Complex<f64>>,
) -> MovingFrame {
    let k = samples.len();
    let t = cycle.period();
    let periodic = flip.iter().all(|s| *s > 0.0);
    let cond: Vec<f64> = samples.iter().map(condition_number).collect();
    let speed: Vec<f64> = (0..k)
        .map(|i| cycle.sample_velocity(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let (grid, period, slopes) = if periodic {
        (samples, t, slopes)
    } else {
        let f = DMatrix::from_diagonal(&DVector::from_column_slice(&flip));
        let mut grid = samples.clone();
        grid.extend(samples.iter().map(|e| e * &f));
        let slopes = slopes.map(|s| {
            let mut all = s.clone();
            all.extend(s.iter().map(|e| e * &f));
            all
        });
        (grid, 2.0 * t, slopes)
    };
    let h = period / grid.len() as f64;
    let slopes = slopes.unwrap_or_else(|| periodic_matrix_derivative(&grid, h));
    let omega = grid.iter().zip(&slopes).map(|(e, de)| invert(e) * de).collect();
    let basis = MatrixSeries::new(period, &grid, Some(&slopes));
    MovingFrame {
        kind,
        cycle_period: t,
        samples_per_period: k,
        basis,
        omega,
        flip,
        cond,
        speed,
        multipliers,
    }
}

/// Frenet frame of a planar cycle: `e_0` the unit tangent, `e_1 = (e_0y, -e_0x)`.
///
/// Derivatives are exact: `e_0' = (J b - e_0 <e_0, J b>) / |b|`.
pub fn build_frenet_2d(spec: &SystemSpec, cycle: &LimitCycle) -> Result<MovingFrame> {
    if cycle.dim() != 2 {
        return Err(Error::InvalidArgument("the Frenet frame is planar only".into()));
    }
    let k = cycle.len();
    let mut samples = Vec::with_capacity(k);
    let mut slopes = Vec::with_capacity(k);
    for i in 0..k {
        let e0 = unit_tangent(cycle, i)?;
        let b = DVector::from_column_slice(cycle.sample_velocity(i));
        let jb = spec.jacobian(cycle.sample(i)) * &b;
        let de0 = (&jb - &e0 * e0.dot(&jb)) / b.norm();
        samples.push(DMatrix::from_row_slice(2, 2, &[e0[0], e0[1], e0[1], -e0[0]]));
        slopes.push(DMatrix::from_row_slice(2, 2, &[de0[0], de0[1], de0[1], -de0[0]]));
    }
    Ok(finish(FrameKind::Frenet, cycle, samples, Some(slopes), vec![1.0, 1.0], Vec::new()))
}

/// One nontrivial invariant direction (real multiplier) or plane (complex pair).
#[derive(Debug, Clone)]
struct Mode {
    mu: Complex<f64>,
    width: usize,
}

impl Mode {
    fn antiperiodic(&self) -> bool {
        self.width == 1 && self.mu.re < 0.0
    }
}

fn is_real(mu: Complex<f64>) -> bool {
    mu.im.abs() <= 1e-10 * mu.norm().max(1e-300)
}

fn nontrivial_modes(mults: &[Complex<f64>]) -> Result<Vec<Mode>> {
    let triv = mults
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).norm().partial_cmp(&(b.1 - 1.0).norm()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let mut modes = Vec::new();
    for (i, mu) in mults.iter().enumerate() {
        if i == triv {
            continue;
        }
        if (mu - 1.0).norm() < 1e-6 {
            return Err(Error::ClusteredMultipliers(format!("{mu}"), "1".into()));
        }
        if is_real(*mu) {
            modes.push(Mode {
                mu: Complex::new(mu.re, 0.0),
                width: 1,
            });
        } else if mu.im > 0.0 {
            modes.push(Mode { mu: *mu, width: 2 });
        }
    }
    for i in 0..modes.len() {
        for j in i + 1..modes.len() {
            if (modes[i].mu - modes[j].mu).norm() <= 1e-10 * modes[i].mu.norm().max(1e-6) {
                return Err(Error::ClusteredMultipliers(format!("{}", modes[i].mu), format!("{}", modes[j].mu)));
            }
        }
    }
    // periodic directions first, anti-periodic ones last
    modes.sort_by(|a, b| {
        a.antiperiodic()
            .cmp(&b.antiperiodic())
            .then(b.mu.norm().partial_cmp(&a.mu.norm()).unwrap())
    });
    Ok(modes)
}

/// Orthonormal basis (columns) of the left-invariant subspace of `m` for `mode`.
fn mode_basis(m: &DMatrix<f64>, mode: &Mode, pairs: &[(Complex<f64>, DVector<Complex<f64>>)]) -> DMatrix<f64> {
    let d = m.nrows();
    let (mu, u) = pairs
        .iter()
        .filter(|(mu, _)| mode.width == 1 || mu.im > 0.0)
        .min_by(|a, b| (a.0 - mode.mu).norm().partial_cmp(&(b.0 - mode.mu).norm()).unwrap())
        .unwrap();
    if mode.width == 1 {
        let shifted = m.transpose() - DMatrix::identity(d, d) * mu.re;
        let v = null_vector(&shifted);
        DMatrix::from_column_slice(d, 1, v.as_slice())
    } else {
        let mut block = DMatrix::zeros(d, 2);
        for i in 0..d {
            block[(i, 0)] = u[i].re;
            block[(i, 1)] = u[i].im;
        }
        block.qr().q()
    }
}

/// Aligns `next` with `prev` by a sign (width 1) or an orthogonal 2x2 mixing.
fn align(next: &DMatrix<f64>, prev: &DMatrix<f64>) -> DMatrix<f64> {
    if next.ncols() == 1 {
        if next.column(0).dot(&prev.column(0)) < 0.0 {
            -next
        } else {
            next.clone()
        }
    } else {
        next * polar_orthogonal(&(next.transpose() * prev))
    }
}

fn rotation(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Frame whose normal vectors are left eigenvectors of the monodromy matrix
/// `Phi(tau + T, tau)`, computed independently at every grid phase.
pub fn build_eigen_frame(spec: &SystemSpec, cycle: &LimitCycle, tol: Tolerances) -> Result<MovingFrame> {
    let d = cycle.dim();
    let k = cycle.len();
    let period = cycle.period();
    let monos: Vec<DMatrix<f64>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let x0 = cycle.sample(i);
            cycle::flow_with_sensitivity(spec, x0, period, tol).map(|(_, phi)| phi)
        })
        .collect::<Result<Vec<_>>>()?;
    let modes = nontrivial_modes(&crate::linalg::eigenvalues(&monos[0]))?;

    // raw bases per phase, per mode
    let raw: Vec<Vec<DMatrix<f64>>> = monos
        .par_iter()
        .map(|m| {
            let pairs = left_eigenpairs(m);
            modes.iter().map(|mode| mode_basis(m, mode, &pairs)).collect()
        })
        .collect();

    let mut cols: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(modes.len());
    let mut flips: Vec<Vec<f64>> = Vec::with_capacity(modes.len());
    for (j, mode) in modes.iter().enumerate() {
        let mut first = raw[0][j].clone();
        if mode.width == 1 {
            let c = first.column(0);
            let imax = c.iamax();
            if c[imax] < 0.0 {
                first = -first;
            }
        }
        let mut seq = vec![first];
        for row in raw.iter().skip(1) {
            let next = align(&row[j], seq.last().unwrap());
            seq.push(next);
        }
        // continue once more to tau = T, where the raw basis equals the one at 0
        let closing = align(&raw[0][j], seq.last().unwrap());
        let holonomy = seq[0].transpose() * &closing;
        if mode.width == 1 {
            let s = if holonomy[(0, 0)] < 0.0 { -1.0 } else { 1.0 };
            flips.push(vec![s]);
        } else {
            let q = polar_orthogonal(&holonomy);
            if q.determinant() > 0.0 {
                let theta = q[(1, 0)].atan2(q[(0, 0)]);
                for (i, b) in seq.iter_mut().enumerate() {
                    *b = &*b * rotation(-theta * i as f64 / k as f64);
                }
                flips.push(vec![1.0, 1.0]);
            } else {
                // reflection: split into its fixed and reversed axes
                let eig = crate::linalg::symmetrize(&q).symmetric_eigen();
                let (ip, im) = if eig.eigenvalues[0] > eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
                let mut v = DMatrix::zeros(2, 2);
                v.set_column(0, &eig.eigenvectors.column(ip));
                v.set_column(1, &eig.eigenvectors.column(im));
                for b in seq.iter_mut() {
                    *b = &*b * &v;
                }
                flips.push(vec![1.0, -1.0]);
            }
        }
        cols.push(seq);
    }

    // flatten into columns, periodic ones first
    let mut order: Vec<(usize, usize, f64)> = Vec::new();
    for (j, f) in flips.iter().enumerate() {
        for (c, s) in f.iter().enumerate() {
            order.push((j, c, *s));
        }
    }
    order.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap());
    let mut flip = vec![1.0];
    flip.extend(order.iter().map(|o| o.2));
    let mut samples = Vec::with_capacity(k);
    for i in 0..k {
        let mut e = DMatrix::zeros(d, d);
        e.set_column(0, &unit_tangent(cycle, i)?);
        for (c, (j, col, _)) in order.iter().enumerate() {
            e.set_column(c + 1, &cols[*j][i].column(*col));
        }
        samples.push(e);
    }
    let mut mults = Vec::new();
    for (j, col, _) in &order {
        let mu = modes[*j].mu;
        mults.push(if *col == 0 { mu } else { mu.conj() });
    }
    Ok(finish(FrameKind::Eigen, cycle, samples, None, flip, mults))
}

/// Default frame: Frenet in the plane, eigenvectors otherwise.
pub fn build_frame(spec: &SystemSpec, cycle: &LimitCycle) -> Result<MovingFrame> {
    if cycle.dim() == 2 {
        build_frenet_2d(spec, cycle)
    } else {
        build_eigen_frame(spec, cycle, Tolerances::new(1e-12, 1e-14))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle::{find_limit_cycle, CycleOptions};
    use crate::systems::BuiltinCatalog;

    fn hopf() -> (SystemSpec, LimitCycle) {
        let spec = BuiltinCatalog::hopf();
        let c = find_limit_cycle(&spec, &[1.0, 0.0], 6.0, &CycleOptions::default()).unwrap();
        (spec, c)
    }

    #[test]
    fn frenet_hopf_geometry() {
        let (spec, c) = hopf();
        let f = build_frenet_2d(&spec, &c).unwrap();
        let e = f.basis(0.0);
        assert!((e[(0, 0)]).abs() < 1e-8 && (e[(1, 0)] - 1.0).abs() < 1e-8);
        assert!((e[(0, 1)] - 1.0).abs() < 1e-8 && e[(1, 1)].abs() < 1e-8);
        for tau in [0.0, 0.3, 2.0, 5.9] {
            let om = f.omega_matrix(tau);
            assert!(om[(1, 1)].abs() < 1e-6);
            assert!((&om + om.transpose()).abs().max() < 1e-6);
            assert!((om[(1, 0)].abs() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn hopf_curvilinear_coordinates() {
        let (spec, c) = hopf();
        let f = build_frenet_2d(&spec, &c).unwrap();
        let (tau, z) = f.to_curvilinear(&c, &[1.1, 0.0]).unwrap();
        assert!(tau.min(c.period() - tau) < 1e-8);
        assert!((z[0] - 0.1).abs() < 1e-8);
        let x = f.from_curvilinear(&c, 1.3, &[-0.05]);
        let (tau, z) = f.to_curvilinear(&c, x.as_slice()).unwrap();
        assert!((tau - 1.3).abs() < 1e-8 && (z[0] + 0.05).abs() < 1e-8);
    }
}
