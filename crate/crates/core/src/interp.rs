//! Periodic interpolation of sampled vector- and matrix-valued functions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterpKind {
    /// Cubic Hermite using the stored slopes.
    Hermite,
    /// Piecewise linear; used for coefficients with jumps.
    Linear,
}

/// Uniformly sampled periodic function `[0, period) -> R^width` with slopes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicSeries {
    period: f64,
    n: usize,
    width: usize,
    values: Vec<f64>,
    slopes: Vec<f64>,
    kind: InterpKind,
}

impl PeriodicSeries {
    /// `values` and `slopes` are `n` consecutive rows of length `width`.
    pub fn new(period: f64, width: usize, values: Vec<f64>, slopes: Vec<f64>) -> Self {
        assert!(period > 0.0);
        assert!(width > 0 && values.len().is_multiple_of(width));
        assert_eq!(values.len(), slopes.len());
        let n = values.len() / width;
        assert!(n >= 4, "need at least four samples");
        Self {
            period,
            n,
            width,
            values,
            slopes,
            kind: InterpKind::Hermite,
        }
    }

    /// Slopes from fourth-order periodic central differences.
    pub fn from_samples(period: f64, width: usize, values: Vec<f64>) -> Self {
        let n = values.len() / width;
        let slopes = periodic_derivative(&values, width, period / n as f64);
        Self::new(period, width, values, slopes)
    }

    pub fn with_kind(mut self, kind: InterpKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn step(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        let k = k % self.n;
        &self.values[k * self.width..(k + 1) * self.width]
    }

    pub fn slope(&self, k: usize) -> &[f64] {
        let k = k % self.n;
        &self.slopes[k * self.width..(k + 1) * self.width]
    }

    /// Wraps `t` into `[0, period)`.
    pub fn wrap(&self, t: f64) -> f64 {
        let w = t.rem_euclid(self.period);
        if w >= self.period {
            0.0
        } else {
            w
        }
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let u = self.wrap(t) / self.step();
        let k = (u.floor() as usize).min(self.n - 1);
        (k, u - k as f64)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let (k, s) = self.locate(t);
        let h = self.step();
        let y0 = self.sample(k);
        let y1 = self.sample(k + 1);
        match self.kind {
            InterpKind::Linear => {
                for j in 0..self.width {
                    out[j] = (1.0 - s) * y0[j] + s * y1[j];
                }
            }
            InterpKind::Hermite => {
                let m0 = self.slope(k);
                let m1 = self.slope(k + 1);
                let s2 = s * s;
                let s3 = s2 * s;
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                for j in 0..self.width {
                    out[j] = h00 * y0[j] + h10 * h * m0[j] + h01 * y1[j] + h11 * h * m1[j];
                }
            }
        }
    }

    pub fn deriv_into(&self, t: f64, out: &mut [f64]) {
        let (k, s) = self.locate(t);
        let h = self.step();
        let y0 = self.sample(k);
        let y1 = self.sample(k + 1);
        match self.kind {
            InterpKind::Linear => {
                for j in 0..self.width {
                    out[j] = (y1[j] - y0[j]) / h;
                }
            }
            InterpKind::Hermite => {
                let m0 = self.slope(k);
                let m1 = self.slope(k + 1);
                let d00 = (6.0 * s * s - 6.0 * s) / h;
                let d10 = 3.0 * s * s - 4.0 * s + 1.0;
                let d01 = (-6.0 * s * s + 6.0 * s) / h;
                let d11 = 3.0 * s * s - 2.0 * s;
                for j in 0..self.width {
                    out[j] = d00 * y0[j] + d10 * m0[j] + d01 * y1[j] + d11 * m1[j];
                }
            }
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.width];
        self.eval_into(t, &mut v);
        v
    }

    pub fn deriv(&self, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.width];
        self.deriv_into(t, &mut v);
        v
    }
}

/// Matrix-valued wrapper (column-major storage, matching nalgebra).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixSeries {
    rows: usize,
    cols: usize,
    series: PeriodicSeries,
}

impl MatrixSeries {
    pub fn new(period: f64, samples: &[DMatrix<f64>], slopes: Option<&[DMatrix<f64>]>) -> Self {
        let rows = samples[0].nrows();
        let cols = samples[0].ncols();
        let values: Vec<f64> = samples.iter().flat_map(|m| m.as_slice().iter().copied()).collect();
        let series = match slopes {
            Some(s) => PeriodicSeries::new(
                period,
                rows * cols,
                values,
                s.iter().flat_map(|m| m.as_slice().iter().copied()).collect(),
            ),
            None => PeriodicSeries::from_samples(period, rows * cols, values),
        };
        Self { rows, cols, series }
    }

    pub fn with_kind(mut self, kind: InterpKind) -> Self {
        self.series = self.series.with_kind(kind);
        self
    }

    pub fn period(&self) -> f64 {
        self.series.period()
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn sample(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.rows, self.cols, self.series.sample(k))
    }

    pub fn slope(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.rows, self.cols, self.series.slope(k))
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        self.series.eval_into(t, m.as_mut_slice());
        m
    }

    pub fn deriv(&self, t: f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        self.series.deriv_into(t, m.as_mut_slice());
        m
    }

    pub fn series(&self) -> &PeriodicSeries {
        &self.series
    }
}

/// Fourth-order central differences on a uniform periodic grid.
pub fn periodic_derivative(values: &[f64], width: usize, h: f64) -> Vec<f64> {
    let n = values.len() / width;
    let mut out = vec![0.0; values.len()];
    for k in 0..n {
        let km2 = (k + n - 2) % n;
        let km1 = (k + n - 1) % n;
        let kp1 = (k + 1) % n;
        let kp2 = (k + 2) % n;
        for j in 0..width {
            out[k * width + j] = (-values[kp2 * width + j] + 8.0 * values[kp1 * width + j]
                - 8.0 * values[km1 * width + j]
                + values[km2 * width + j])
                / (12.0 * h);
        }
    }
    out
}

/// Same stencil for a list of matrices.
pub fn periodic_matrix_derivative(samples: &[DMatrix<f64>], h: f64) -> Vec<DMatrix<f64>> {
    let n = samples.len();
    (0..n)
        .map(|k| {
            let m2 = &samples[(k + n - 2) % n];
            let m1 = &samples[(k + n - 1) % n];
            let p1 = &samples[(k + 1) % n];
            let p2 = &samples[(k + 2) % n];
            (-p2 + p1 * 8.0 - m1 * 8.0 + m2) / (12.0 * h)
        })
        .collect()
}

/// Running integral of uniformly sampled data at every node, fourth order:
/// composite Simpson on even nodes, Simpson 3/8 to close odd counts.
pub fn cumulative_simpson(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n < 4 {
        for k in 1..n {
            out[k] = out[k - 1] + 0.5 * h * (f[k - 1] + f[k]);
        }
        return out;
    }
    for k in (2..n).step_by(2) {
        out[k] = out[k - 2] + h / 3.0 * (f[k - 2] + 4.0 * f[k - 1] + f[k]);
    }
    // first interval from a four-point one-sided rule
    out[1] = h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]);
    for k in (3..n).step_by(2) {
        out[k] = out[k - 3] + 3.0 * h / 8.0 * (f[k - 3] + 3.0 * f[k - 2] + 3.0 * f[k - 1] + f[k]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn hermite_reproduces_smooth_periodic_function() {
        let n = 128;
        let p = 2.0 * PI;
        let vals: Vec<f64> = (0..n).map(|k| (k as f64 * p / n as f64).sin()).collect();
        let s = PeriodicSeries::from_samples(p, 1, vals);
        for t in [0.01, 1.234, 5.5, 7.0, -0.3] {
            assert!((s.eval(t)[0] - f64::sin(t)).abs() < 1e-7);
            assert!((s.deriv(t)[0] - f64::cos(t)).abs() < 1e-5);
        }
    }

    #[test]
    fn grid_values_are_exact() {
        let vals = vec![1.0, 2.0, 4.0, 3.0, 0.5];
        let s = PeriodicSeries::from_samples(5.0, 1, vals.clone());
        for (k, v) in vals.iter().enumerate() {
            assert_eq!(s.eval(k as f64)[0], *v);
        }
        assert_eq!(s.eval(5.0)[0], 1.0);
    }

    #[test]
    fn cumulative_simpson_polynomial_exact() {
        let h = 0.1;
        let f: Vec<f64> = (0..11).map(|k| (k as f64 * h).powi(3)).collect();
        let c = cumulative_simpson(&f, h);
        for (k, v) in c.iter().enumerate() {
            let x = k as f64 * h;
            assert!((v - x.powi(4) / 4.0).abs() < 1e-13, "k={k}");
        }
    }
}
