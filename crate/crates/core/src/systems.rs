//! Dynamical systems `dx = b(x) dt + sqrt(eps) sigma(x) dW` and the built-in catalog.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::min_sym_eigenvalue;

/// How the diffusion tensor depends on the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiffusionKind {
    Constant,
    Smooth,
    /// Piecewise constant with jumps; not differentiable.
    Discontinuous,
}

/// Drift, its Jacobian and the diffusion tensor `a = sigma sigma^T`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn drift(&self, x: &[f64], out: &mut [f64]);

    /// Analytic Jacobian `[d b_i / d x_j]`, when available.
    fn jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    fn diffusion(&self, x: &[f64]) -> DMatrix<f64>;

    fn diffusion_kind(&self) -> DiffusionKind {
        DiffusionKind::Constant
    }
}

/// A named system with checked evaluation entry points.
#[derive(Clone)]
pub struct SystemSpec {
    name: String,
    field: Arc<dyn VectorField>,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .finish()
    }
}

impl SystemSpec {
    pub fn new(name: impl Into<String>, field: impl VectorField + 'static) -> Self {
        Self {
            name: name.into(),
            field: Arc::new(field),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn field(&self) -> &dyn VectorField {
        self.field.as_ref()
    }

    pub fn diffusion_kind(&self) -> DiffusionKind {
        self.field.diffusion_kind()
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.field.jacobian(&vec![0.0; self.dim()]).is_some()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval_drift(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        let v = self.drift(x);
        if v.iter().all(|c| c.is_finite()) {
            Ok(v)
        } else {
            Err(Error::NonFinite("drift"))
        }
    }

    pub fn eval_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let j = match self.field.jacobian(x) {
            Some(j) => j,
            None => self.fd_jacobian(x),
        };
        if j.iter().all(|c| c.is_finite()) {
            Ok(j)
        } else {
            Err(Error::NonFinite("drift"))
        }
    }

    pub fn eval_diffusion(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let a = self.field.diffusion(x);
        let min = min_sym_eigenvalue(&a);
        if min < -1e-12 {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
        }
        Ok(a)
    }

    /// Unchecked drift for inner loops.
    pub fn drift(&self, x: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.field.drift(x, out.as_mut_slice());
        out
    }

    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        self.field.drift(x, out);
    }

    /// Unchecked Jacobian (analytic or finite differences).
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        self.field.jacobian(x).unwrap_or_else(|| self.fd_jacobian(x))
    }

    pub fn diffusion(&self, x: &[f64]) -> DMatrix<f64> {
        self.field.diffusion(x)
    }

    /// Central differences with per-coordinate step `cbrt(eps) * max(1, |x_i|)`.
    pub fn fd_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut j = DMatrix::zeros(d, d);
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; d];
        let mut fm = vec![0.0; d];
        let base = f64::EPSILON.cbrt();
        for c in 0..d {
            let h = base * x[c].abs().max(1.0);
            xp[c] = x[c] + h;
            self.field.drift(&xp, &mut fp);
            xp[c] = x[c] - h;
            self.field.drift(&xp, &mut fm);
            xp[c] = x[c];
            let span = 2.0 * h;
            for r in 0..d {
                j[(r, c)] = (fp[r] - fm[r]) / span;
            }
        }
        j
    }
}

/// Noise structure of the Van der Pol example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DiffusionCase {
    /// `sigma_1 = sigma_2 = 1`.
    #[default]
    #[serde(rename = "i")]
    Isotropic,
    /// `sigma_1 = 0, sigma_2 = 1`.
    #[serde(rename = "ii")]
    Degenerate,
    /// `sigma_1 = sigma_2 = 1` for `x >= 0`, zero for `x < 0`.
    #[serde(rename = "iii")]
    Discontinuous,
}

impl DiffusionCase {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "i" => Some(Self::Isotropic),
            "ii" => Some(Self::Degenerate),
            "iii" => Some(Self::Discontinuous),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Isotropic => "i",
            Self::Degenerate => "ii",
            Self::Discontinuous => "iii",
        }
    }
}

/// Van der Pol: `x' = y, y' = -x + mu (1 - x^2) y`.
#[derive(Debug, Clone)]
pub struct VanDerPol {
    pub mu: f64,
    pub case: DiffusionCase,
}

impl VectorField for VanDerPol {
    fn dim(&self) -> usize {
        2
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[1];
        out[1] = -x[0] + self.mu * (1.0 - x[0] * x[0]) * x[1];
    }

    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, -1.0 - 2.0 * self.mu * x[0] * x[1], self.mu * (1.0 - x[0] * x[0])],
        ))
    }

    fn diffusion(&self, x: &[f64]) -> DMatrix<f64> {
        match self.case {
            DiffusionCase::Isotropic => DMatrix::identity(2, 2),
            DiffusionCase::Degenerate => DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0])),
            // x = 0 takes the x > 0 branch
            DiffusionCase::Discontinuous => {
                if x[0] >= 0.0 {
                    DMatrix::identity(2, 2)
                } else {
                    DMatrix::zeros(2, 2)
                }
            }
        }
    }

    fn diffusion_kind(&self) -> DiffusionKind {
        match self.case {
            DiffusionCase::Discontinuous => DiffusionKind::Discontinuous,
            _ => DiffusionKind::Constant,
        }
    }
}

/// Planar system with two stable cycles separated by a saddle.
#[derive(Debug, Clone)]
pub struct TwoCycles {
    pub shift: f64,
}

impl VectorField for TwoCycles {
    fn dim(&self) -> usize {
        2
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0] - x[0].powi(3) / 3.0 + x[1] - x[1].powi(3) / 9.0;
        out[1] = x[0] + self.shift;
    }

    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[1.0 - x[0] * x[0], 1.0 - x[1] * x[1] / 3.0, 1.0, 0.0],
        ))
    }

    fn diffusion(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }
}

/// Three-species Lotka–Volterra: `x_i' = x_i sum_j c_ij (1 - x_j)`.
#[derive(Debug, Clone)]
pub struct LotkaVolterra3 {
    pub c: Matrix3<f64>,
}

impl LotkaVolterra3 {
    pub fn default_matrix() -> Matrix3<f64> {
        Matrix3::new(2.0, 5.0, 0.5, 0.5, 1.0, 1.48, 1.0, 0.5, 1.0)
    }
}

impl VectorField for LotkaVolterra3 {
    fn dim(&self) -> usize {
        3
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..3 {
            let s: f64 = (0..3).map(|j| self.c[(i, j)] * (1.0 - x[j])).sum();
            out[i] = x[i] * s;
        }
    }

    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let mut j = DMatrix::zeros(3, 3);
        for i in 0..3 {
            let s: f64 = (0..3).map(|k| self.c[(i, k)] * (1.0 - x[k])).sum();
            for k in 0..3 {
                j[(i, k)] = -x[i] * self.c[(i, k)];
            }
            j[(i, i)] += s;
        }
        Some(j)
    }

    fn diffusion(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(3, 3)
    }
}

/// Five-dimensional sigmoid network with `h(x) = (1 + tanh(2 x)) / 2`.
#[derive(Debug, Clone)]
pub struct SigmoidNetwork5;

fn sigmoid(x: f64) -> f64 {
    0.5 * (1.0 + (2.0 * x).tanh())
}

fn sigmoid_prime(x: f64) -> f64 {
    let t = (2.0 * x).tanh();
    1.0 - t * t
}

impl VectorField for SigmoidNetwork5 {
    fn dim(&self) -> usize {
        5
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let h: Vec<f64> = x.iter().map(|&v| sigmoid(v)).collect();
        let (h1, h2, h3, h4, h5) = (h[0], h[1], h[2], h[3], h[4]);
        out[0] = -x[0] + 1.0 - 2.0 * h5 - 2.0 * h2 + 2.0 * h2 * h5 + 2.0 * h2 * h4 - 2.0 * h2 * h4 * h5;
        out[1] = -x[1] + 1.0 - 2.0 * h1;
        out[2] = -x[2] + 1.0 - 2.0 * h2 + 2.0 * h2 * h5;
        out[3] = -x[3] + 1.0 - 2.0 * h3;
        out[4] = -x[4] + 1.0 - 2.0 * h4 - 2.0 * h2 + 2.0 * h2 * h4;
    }

    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let h: Vec<f64> = x.iter().map(|&v| sigmoid(v)).collect();
        let dh: Vec<f64> = x.iter().map(|&v| sigmoid_prime(v)).collect();
        let (h2, h4, h5) = (h[1], h[3], h[4]);
        let mut j = DMatrix::from_diagonal_element(5, 5, -1.0);
        j[(0, 1)] = dh[1] * (-2.0 + 2.0 * h5 + 2.0 * h4 - 2.0 * h4 * h5);
        j[(0, 3)] = dh[3] * (2.0 * h2 - 2.0 * h2 * h5);
        j[(0, 4)] = dh[4] * (-2.0 + 2.0 * h2 - 2.0 * h2 * h4);
        j[(1, 0)] = -2.0 * dh[0];
        j[(2, 1)] = dh[1] * (-2.0 + 2.0 * h5);
        j[(2, 4)] = 2.0 * h2 * dh[4];
        j[(3, 2)] = -2.0 * dh[2];
        j[(4, 1)] = dh[1] * (-2.0 + 2.0 * h4);
        j[(4, 3)] = dh[3] * (-2.0 + 2.0 * h2);
        Some(j)
    }

    fn diffusion(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(5, 5)
    }
}

/// Normal form with the unit circle as cycle: `r' = r (1 - r^2), theta' = 1`.
#[derive(Debug, Clone)]
pub struct Hopf;

impl VectorField for Hopf {
    fn dim(&self) -> usize {
        2
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let g = 1.0 - x[0] * x[0] - x[1] * x[1];
        out[0] = -x[1] + x[0] * g;
        out[1] = x[0] + x[1] * g;
    }

    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let (a, b) = (x[0], x[1]);
        let g = 1.0 - a * a - b * b;
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[g - 2.0 * a * a, -1.0 - 2.0 * a * b, 1.0 - 2.0 * a * b, g - 2.0 * b * b],
        ))
    }

    fn diffusion(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }
}

/// `b(x) = s * F(x)` for another field `F`; `s = -1` reverses time.
pub struct Scaled {
    pub inner: Arc<dyn VectorField>,
    pub factor: f64,
}

impl VectorField for Scaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.inner.drift(x, out);
        for v in out.iter_mut() {
            *v *= self.factor;
        }
    }

    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.inner.jacobian(x).map(|j| j * self.factor)
    }

    fn diffusion(&self, x: &[f64]) -> DMatrix<f64> {
        self.inner.diffusion(x)
    }

    fn diffusion_kind(&self) -> DiffusionKind {
        self.inner.diffusion_kind()
    }
}

/// Linear drift `b(x) = M x` with constant diffusion; no analytic Jacobian so
/// the finite-difference path is exercised.
#[derive(Debug, Clone)]
pub struct Linear {
    pub m: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

impl VectorField for Linear {
    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let y = &self.m * DVector::from_column_slice(x);
        out.copy_from_slice(y.as_slice());
    }

    fn diffusion(&self, _x: &[f64]) -> DMatrix<f64> {
        self.a.clone()
    }
}

impl SystemSpec {
    pub fn time_reversed(&self) -> SystemSpec {
        SystemSpec {
            name: format!("{}-reversed", self.name),
            field: Arc::new(Scaled {
                inner: self.field.clone(),
                factor: -1.0,
            }),
        }
    }
}

/// Constructors for the built-in benchmark systems.
pub struct BuiltinCatalog;

impl BuiltinCatalog {
    pub const NAMES: [&'static str; 5] = ["vdp", "twolc", "lv3d", "net5d", "hopf"];

    pub fn vdp(case: DiffusionCase) -> SystemSpec {
        SystemSpec::new("vdp", VanDerPol { mu: 1.0, case })
    }

    pub fn twolc() -> SystemSpec {
        SystemSpec::new("twolc", TwoCycles { shift: 0.9 })
    }

    pub fn lv3d() -> SystemSpec {
        SystemSpec::new(
            "lv3d",
            LotkaVolterra3 {
                c: LotkaVolterra3::default_matrix(),
            },
        )
    }

    pub fn net5d() -> SystemSpec {
        SystemSpec::new("net5d", SigmoidNetwork5)
    }

    pub fn hopf() -> SystemSpec {
        SystemSpec::new("hopf", Hopf)
    }

    /// Builds a builtin by name with optional parameter overrides.
    pub fn build(name: &str, params: &BTreeMap<String, serde_json::Value>, case: DiffusionCase) -> Result<SystemSpec> {
        let num = |key: &str, default: f64| -> Result<f64> {
            match params.get(key) {
                None => Ok(default),
                Some(v) => v
                    .as_f64()
                    .ok_or_else(|| Error::InvalidArgument(format!("parameter `{key}` must be a number"))),
            }
        };
        for key in params.keys() {
            let allowed: &[&str] = match name {
                "vdp" => &["mu"],
                "twolc" => &["shift"],
                "lv3d" => &["C"],
                _ => &[],
            };
            if !allowed.contains(&key.as_str()) {
                return Err(Error::InvalidArgument(format!("unknown parameter `{key}` for `{name}`")));
            }
        }
        match name {
            "vdp" => Ok(SystemSpec::new("vdp", VanDerPol { mu: num("mu", 1.0)?, case })),
            "twolc" => Ok(SystemSpec::new("twolc", TwoCycles { shift: num("shift", 0.9)? })),
            "lv3d" => {
                let c = match params.get("C") {
                    None => LotkaVolterra3::default_matrix(),
                    Some(v) => {
                        let rows: Vec<Vec<f64>> = serde_json::from_value(v.clone())
                            .map_err(|e| Error::InvalidArgument(format!("parameter `C`: {e}")))?;
                        if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
                            return Err(Error::InvalidArgument("parameter `C` must be 3x3".into()));
                        }
                        Matrix3::from_fn(|i, j| rows[i][j])
                    }
                };
                Ok(SystemSpec::new("lv3d", LotkaVolterra3 { c }))
            }
            "net5d" => Ok(Self::net5d()),
            "hopf" => Ok(Self::hopf()),
            other => Err(Error::UnknownSystem(other.to_string())),
        }
    }

    /// A point in the basin of the cycle of interest, used to seed the cycle search.
    pub fn basin_point(name: &str) -> Option<Vec<f64>> {
        match name {
            "vdp" => Some(vec![2.0, 0.0]),
            "twolc" => Some(vec![0.0, 2.5]),
            "lv3d" => Some(vec![0.05, 1.15, 1.55]),
            "net5d" => Some(vec![0.3, -0.2, 0.1, 0.4, -0.3]),
            "hopf" => Some(vec![1.2, 0.0]),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).abs().max() <= tol
    }

    #[test]
    fn drift_examples() {
        let v = BuiltinCatalog::vdp(DiffusionCase::Isotropic).eval_drift(&[0.0, 0.0]).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 0.0]);
        let v = BuiltinCatalog::hopf().eval_drift(&[1.0, 0.0]).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 1.0]);
        let v = BuiltinCatalog::lv3d().eval_drift(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = BuiltinCatalog::hopf().eval_drift(&[1.0, 0.0, 0.0]).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, got: 3 });
    }

    #[test]
    fn jacobian_examples() {
        let j = BuiltinCatalog::vdp(DiffusionCase::Isotropic).eval_jacobian(&[0.0, 0.0]).unwrap();
        assert!(close(&j, &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 1.0]), 0.0));
        let j = BuiltinCatalog::hopf().eval_jacobian(&[1.0, 0.0]).unwrap();
        assert!(close(&j, &DMatrix::from_row_slice(2, 2, &[-2.0, -1.0, 1.0, 0.0]), 0.0));
        let m = DMatrix::from_row_slice(2, 2, &[0.3, -1.2, 2.0, 0.1]);
        let lin = SystemSpec::new("lin", Linear { m: m.clone(), a: DMatrix::identity(2, 2) });
        assert!(!lin.has_analytic_jacobian());
        assert!(close(&lin.eval_jacobian(&[0.7, -3.0]).unwrap(), &m, 1e-8));
    }

    #[test]
    fn diffusion_examples() {
        let x = [0.4, -1.3];
        let a = BuiltinCatalog::vdp(DiffusionCase::Isotropic).eval_diffusion(&x).unwrap();
        assert!(close(&a, &DMatrix::identity(2, 2), 0.0));
        let a = BuiltinCatalog::vdp(DiffusionCase::Degenerate).eval_diffusion(&x).unwrap();
        assert!(close(&a, &DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]), 0.0));
        let vdp3 = BuiltinCatalog::vdp(DiffusionCase::Discontinuous);
        assert!(close(&vdp3.eval_diffusion(&[-1.0, 0.0]).unwrap(), &DMatrix::zeros(2, 2), 0.0));
        assert!(close(&vdp3.eval_diffusion(&[0.0, 0.5]).unwrap(), &DMatrix::identity(2, 2), 0.0));
    }

    #[test]
    fn non_psd_diffusion_is_flagged() {
        let bad = SystemSpec::new(
            "bad",
            Linear {
                m: DMatrix::identity(2, 2),
                a: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]),
            },
        );
        assert!(matches!(bad.eval_diffusion(&[0.0, 0.0]), Err(Error::NotPositiveSemidefinite { .. })));
    }

    #[test]
    fn lv3d_uses_printed_matrix() {
        let c = LotkaVolterra3::default_matrix();
        assert_eq!(c[(0, 1)], 5.0);
        assert_eq!(c[(1, 2)], 1.48);
        assert_eq!(c[(2, 1)], 0.5);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!((sigmoid(0.3) - 0.5 * (1.0 + 0.6f64.tanh())).abs() < 1e-15);
    }

    #[test]
    fn build_rejects_unknown_names_and_params() {
        let empty = BTreeMap::new();
        assert!(matches!(BuiltinCatalog::build("nosuch", &empty, DiffusionCase::Isotropic), Err(Error::UnknownSystem(_))));
        let mut p = BTreeMap::new();
        p.insert("nu".to_string(), serde_json::json!(2.0));
        assert!(BuiltinCatalog::build("vdp", &p, DiffusionCase::Isotropic).is_err());
        let mut p = BTreeMap::new();
        p.insert("mu".to_string(), serde_json::json!(2.0));
        let s = BuiltinCatalog::build("vdp", &p, DiffusionCase::Isotropic).unwrap();
        assert_eq!(s.eval_drift(&[1.0, 1.0]).unwrap()[1], -1.0);
    }
}
