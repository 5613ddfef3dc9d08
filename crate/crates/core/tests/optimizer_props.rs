use nalgebra::DMatrix;
use qpath::optimizer::{minimize_constrained, FnProblem, OptimizerOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ball(rng: &mut ChaCha8Rng, center: &[f64]) -> Vec<f64> {
    loop {
        let u: Vec<f64> = center.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        if u.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            return center.iter().zip(&u).map(|(c, v)| c + v).collect();
        }
    }
}

fn nonincreasing(history: &[(f64, f64)]) -> bool {
    history.iter().all(|(before, after)| *after <= *before + 1e-12 * before.abs().max(1.0))
}

#[test]
fn projection_onto_a_line_from_random_starts() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = FnProblem {
        dim: 2,
        n_constraints: 1,
        objective: |x: &[f64]| x[0] * x[0] + x[1] * x[1],
        constraints: |x: &[f64], c: &mut [f64]| c[0] = x[0] + x[1] - 1.0,
    };
    for _ in 0..10 {
        let s = minimize_constrained(&p, &ball(&mut rng, &[0.5, 0.5]), &OptimizerOptions::default()).unwrap();
        assert!(s.converged(), "{s:?}");
        assert!(s.max_violation <= 1e-10);
        assert!((s.x[0] - 0.5).abs() < 1e-7 && (s.x[1] - 0.5).abs() < 1e-7);
        assert!((s.multipliers[0] + 1.0).abs() < 1e-6);
        assert!(nonincreasing(&s.merit_history));
    }
}

#[test]
fn rosenbrock_from_random_starts() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = FnProblem::unconstrained(2, |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
    for _ in 0..10 {
        let s = minimize_constrained(&p, &ball(&mut rng, &[1.0, 1.0]), &OptimizerOptions::default()).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-6 && (s.x[1] - 1.0).abs() < 1e-6, "{s:?}");
    }
}

#[test]
fn rayleigh_quotient_from_random_starts() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
    let m = &b * b.transpose() + DMatrix::from_diagonal_element(4, 4, 0.1);
    let eig = m.clone().symmetric_eigen();
    let k = eig.eigenvalues.imin();
    let lmin = eig.eigenvalues[k];
    let v = eig.eigenvectors.column(k).into_owned();
    let mm = m.clone();
    let p = FnProblem {
        dim: 4,
        n_constraints: 1,
        objective: move |x: &[f64]| {
            let z = nalgebra::DVector::from_column_slice(x);
            z.dot(&(&mm * &z))
        },
        constraints: |x: &[f64], c: &mut [f64]| c[0] = x.iter().map(|v| v * v).sum::<f64>() - 1.0,
    };
    for _ in 0..10 {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let center: Vec<f64> = v.iter().map(|c| sign * c).collect();
        let s = minimize_constrained(&p, &ball(&mut rng, &center), &OptimizerOptions::default()).unwrap();
        assert!(s.converged(), "{s:?}");
        assert!((s.objective - lmin).abs() < 1e-8, "{} vs {lmin}", s.objective);
        let x = nalgebra::DVector::from_column_slice(&s.x);
        assert!(1.0 - x.dot(&v).abs() < 1e-7);
        assert!(nonincreasing(&s.merit_history));
    }
}

#[test]
fn identical_inputs_give_identical_outputs() {
    let p = FnProblem {
        dim: 3,
        n_constraints: 1,
        objective: |x: &[f64]| (x[0] - 1.0).powi(4) + x[1] * x[1] + (x[2] + x[0]).powi(2),
        constraints: |x: &[f64], c: &mut [f64]| c[0] = x[0] * x[1] - 0.2,
    };
    let a = minimize_constrained(&p, &[0.3, 0.9, -0.1], &OptimizerOptions::default()).unwrap();
    let b = minimize_constrained(&p, &[0.3, 0.9, -0.1], &OptimizerOptions::default()).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.inner_iterations, b.inner_iterations);
}
