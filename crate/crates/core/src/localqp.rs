//! Quadratic approximation of the quasi-potential in a tube around the cycle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cycle::LimitCycle;
use crate::error::{Error, Result};
use crate::frame::MovingFrame;
use crate::linalg::{lower_block, symmetrize};
use crate::riccati::PeriodicMatrixFunction;

/// How the tube around the cycle is sized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Tube {
    /// `|z| = h` in state-space units.
    Radius(f64),
    /// `Q(tau, z) = delta` in action units.
    Level(f64),
}

/// Cycle, frame and Riccati solution bundled for local evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalModel {
    cycle: LimitCycle,
    frame: MovingFrame,
    g: PeriodicMatrixFunction,
    tube: Tube,
}

/// One sample of a tube surface.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TubePoint {
    pub tau: f64,
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub q: f64,
}

impl LocalModel {
    pub fn new(cycle: LimitCycle, frame: MovingFrame, g: PeriodicMatrixFunction, tube: Tube) -> Result<Self> {
        let d = cycle.dim();
        if frame.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: frame.dim() });
        }
        if g.dim() + 1 != d {
            return Err(Error::DimensionMismatch { expected: d - 1, got: g.dim() });
        }
        let size = match tube {
            Tube::Radius(h) => h,
            Tube::Level(delta) => delta,
        };
        if !(size > 0.0) || !size.is_finite() {
            return Err(Error::InvalidArgument(format!("tube size must be positive, got {size}")));
        }
        Ok(Self { cycle, frame, g, tube })
    }

    pub fn cycle(&self) -> &LimitCycle {
        &self.cycle
    }

    pub fn frame(&self) -> &MovingFrame {
        &self.frame
    }

    pub fn g(&self) -> &PeriodicMatrixFunction {
        &self.g
    }

    pub fn tube(&self) -> Tube {
        self.tube
    }

    pub fn with_tube(mut self, tube: Tube) -> Self {
        self.tube = tube;
        self
    }

    pub fn dim(&self) -> usize {
        self.cycle.dim()
    }

    /// `G(tau)`, with `tau` read on the frame's unwrapped period.
    pub fn g_at(&self, tau: f64) -> DMatrix<f64> {
        self.g.eval(tau)
    }

    pub fn quadratic_qp(&self, tau: f64, z: &[f64]) -> f64 {
        let zv = DVector::from_column_slice(z);
        0.5 * zv.dot(&(self.g_at(tau) * &zv))
    }

    /// Approximate gradient of the quasi-potential at `gamma(tau) + sum z_i e_i`.
    pub fn momentum_approx(&self, tau: f64, z: &[f64]) -> DVector<f64> {
        let d = self.dim();
        let zv = DVector::from_column_slice(z);
        let g = self.g_at(tau);
        let dg = self.g.deriv(tau);
        let einv = self.frame.reciprocal(tau);
        let omega = lower_block(&(&einv * self.frame.basis_derivative(tau)));
        let lambda = 1.0 / self.cycle.velocity(tau).norm();
        let gz = &g * &zv;
        let inner = 0.5 * zv.dot(&(&dg * &zv)) - zv.dot(&(omega.transpose() * &gz));
        let mut p = einv.row(0).transpose() * (lambda * inner);
        for i in 1..d {
            p += einv.row(i).transpose() * gz[i - 1];
        }
        p
    }

    pub fn point(&self, tau: f64, z: &[f64]) -> DVector<f64> {
        self.frame.from_curvilinear(&self.cycle, tau, z)
    }

    /// Scales the direction `u` onto the tube surface at `tau`.
    pub fn tube_offset(&self, tau: f64, u: &[f64]) -> DVector<f64> {
        let uv = DVector::from_column_slice(u);
        let n = uv.norm();
        match self.tube {
            Tube::Radius(h) => uv * (h / n),
            Tube::Level(delta) => {
                let q = 0.5 * uv.dot(&(self.g_at(tau) * &uv));
                uv * (delta / q).sqrt()
            }
        }
    }

    /// Samples the tube surface on an `n_tau x n_theta` grid over one cycle period.
    ///
    /// Cross-section directions: `+-1` for planar systems, a circle for `d = 3`,
    /// and for higher dimensions the circle through the eigenvectors of the
    /// smallest and largest eigenvalues of `G(tau)`.
    pub fn tube_surface(&self, n_tau: usize, n_theta: usize) -> Vec<TubePoint> {
        let m = self.dim() - 1;
        let t = self.cycle.period();
        let mut out = Vec::with_capacity(n_tau * n_theta.max(2));
        for i in 0..n_tau {
            let tau = t * i as f64 / n_tau as f64;
            for u in self.cross_section_directions(tau, m, n_theta) {
                let z = self.tube_offset(tau, u.as_slice());
                let x = self.point(tau, z.as_slice());
                out.push(TubePoint {
                    tau,
                    q: self.quadratic_qp(tau, z.as_slice()),
                    z: z.as_slice().to_vec(),
                    x: x.as_slice().to_vec(),
                });
            }
        }
        out
    }

    fn cross_section_directions(&self, tau: f64, m: usize, n_theta: usize) -> Vec<DVector<f64>> {
        if m == 1 {
            return vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)];
        }
        let (a, b) = if m == 2 {
            (DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![0.0, 1.0]))
        } else {
            let eig = symmetrize(&self.g_at(tau)).symmetric_eigen();
            let (mut lo, mut hi) = (0, 0);
            for k in 0..m {
                if eig.eigenvalues[k] < eig.eigenvalues[lo] {
                    lo = k;
                }
                if eig.eigenvalues[k] > eig.eigenvalues[hi] {
                    hi = k;
                }
            }
            (eig.eigenvectors.column(lo).into_owned(), eig.eigenvectors.column(hi).into_owned())
        };
        (0..n_theta)
            .map(|j| {
                let th = 2.0 * std::f64::consts::PI * j as f64 / n_theta as f64;
                &a * th.cos() + &b * th.sin()
            })
            .collect()
    }

    /// Ratio of the longest to the shortest axis of the level set `Q = const` at `tau`.
    pub fn cross_section_aspect(&self, tau: f64) -> f64 {
        let ev = crate::linalg::sym_eigenvalues(&self.g_at(tau));
        (ev[ev.len() - 1] / ev[0]).sqrt()
    }

    /// Largest aspect ratio over the cycle grid.
    pub fn max_cross_section_aspect(&self) -> f64 {
        let k = self.cycle.len();
        (0..k).map(|i| self.cross_section_aspect(self.cycle.phase(i))).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle::{find_limit_cycle, CycleOptions};
    use crate::frame::build_frame;
    use crate::riccati::{reduced_coefficients, solve_prde, PrdeOptions};
    use crate::systems::BuiltinCatalog;

    fn hopf_model() -> LocalModel {
        let spec = BuiltinCatalog::hopf();
        let cycle = find_limit_cycle(&spec, &[1.0, 0.0], 6.3, &CycleOptions::default()).unwrap();
        let frame = build_frame(&spec, &cycle).unwrap();
        let coeffs = reduced_coefficients(&spec, &cycle, &frame).unwrap();
        let g = solve_prde(&coeffs, &PrdeOptions::default()).unwrap();
        LocalModel::new(cycle, frame, g, Tube::Radius(1e-3)).unwrap()
    }

    #[test]
    fn hopf_quadratic_values() {
        let m = hopf_model();
        assert_eq!(m.quadratic_qp(0.3, &[0.0]), 0.0);
        assert!((m.quadratic_qp(0.0, &[0.1]) - 0.02).abs() < 1e-8);
        assert_eq!(m.quadratic_qp(1.0, &[0.05]), m.quadratic_qp(1.0, &[-0.05]));
        let p = m.momentum_approx(0.0, &[0.1]);
        assert!((p[0] - 0.4).abs() < 1e-6 && p[1].abs() < 1e-6, "{p}");
        let e = m.frame().basis(0.0);
        assert!((p.dot(&e.column(1)) - m.g_at(0.0)[(0, 0)] * 0.1).abs() < 1e-10);
        assert!(m.momentum_approx(2.0, &[0.0]).norm() == 0.0);
    }

    #[test]
    fn level_tube_on_hopf_is_two_circles() {
        let m = hopf_model().with_tube(Tube::Level(0.02));
        for p in m.tube_surface(16, 2) {
            let r = (p.x[0] * p.x[0] + p.x[1] * p.x[1]).sqrt();
            assert!((r - 1.1).abs() < 1e-6 || (r - 0.9).abs() < 1e-6, "r = {r}");
            assert!((p.q - 0.02).abs() < 1e-12);
        }
    }
}
