//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector};

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Eigenvalues of a general real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    m.complex_eigenvalues().iter().copied().collect()
}

/// Unit vector spanning (approximately) the kernel of `a`, from the SVD.
pub fn null_vector_complex(a: &DMatrix<Complex<f64>>) -> DVector<Complex<f64>> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.partial_cmp(y.1).unwrap())
        .unwrap();
    let row = v_t.row(imin);
    DVector::from_iterator(row.len(), row.iter().map(|c| c.conj()))
}

pub fn null_vector(a: &DMatrix<f64>) -> DVector<f64> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.partial_cmp(y.1).unwrap())
        .unwrap();
    v_t.row(imin).transpose()
}

/// Left eigenvectors `u` (with `u^H A = mu u^H`) for every eigenvalue, unit norm.
pub fn left_eigenpairs(m: &DMatrix<f64>) -> Vec<(Complex<f64>, DVector<Complex<f64>>)> {
    let n = m.nrows();
    let at: DMatrix<Complex<f64>> = m.transpose().map(|v| Complex::new(v, 0.0));
    eigenvalues(m)
        .into_iter()
        .map(|mu| {
            // A^T v = mu v  <=>  v^T A = mu v^T ; the conjugate gives the left vector for conj(mu)
            let shifted = &at - DMatrix::<Complex<f64>>::identity(n, n) * mu;
            let v = null_vector_complex(&shifted);
            (mu, v.map(|c| c.conj()))
        })
        .collect()
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Submatrix without the first row and column.
pub fn lower_block(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    m.view((1, 1), (n - 1, n - 1)).into_owned()
}

/// Nearest orthogonal matrix (polar factor).
pub fn polar_orthogonal(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn left_eigenvectors_satisfy_definition() {
        let a = DMatrix::from_row_slice(3, 3, &[0.5, 1.0, 0.0, -1.0, 0.5, 0.2, 0.0, 0.3, -0.4]);
        let ac = a.map(|v| Complex::new(v, 0.0));
        for (mu, u) in left_eigenpairs(&a) {
            let lhs = u.adjoint() * &ac;
            let rhs = u.adjoint() * mu;
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }
}
