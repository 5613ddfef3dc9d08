use proptest::prelude::*;
use qpath::hamiltonian::hamiltonian;
use qpath::systems::{BuiltinCatalog, DiffusionCase, SystemSpec};

fn builtins() -> Vec<SystemSpec> {
    vec![
        BuiltinCatalog::vdp(DiffusionCase::Isotropic),
        BuiltinCatalog::vdp(DiffusionCase::Degenerate),
        BuiltinCatalog::vdp(DiffusionCase::Discontinuous),
        BuiltinCatalog::twolc(),
        BuiltinCatalog::lv3d(),
        BuiltinCatalog::net5d(),
        BuiltinCatalog::hopf(),
    ]
}

fn point(seed: &[f64], d: usize) -> Vec<f64> {
    (0..d).map(|i| seed[i % seed.len()] * (1.0 + 0.37 * i as f64).cos()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn analytic_jacobians_match_differences(seed in prop::collection::vec(-3.0f64..3.0, 5)) {
        for spec in builtins().iter().filter(|s| s.has_analytic_jacobian()) {
            let x = point(&seed, spec.dim());
            let j = spec.jacobian(&x);
            let fd = spec.fd_jacobian(&x);
            prop_assert!((&j - &fd).amax() <= 1e-6 * (1.0 + j.norm()), "{}: {} vs {}", spec.name(), j, fd);
        }
    }

    #[test]
    fn diffusion_is_positive_semidefinite(seed in prop::collection::vec(-3.0f64..3.0, 5)) {
        for spec in builtins() {
            let a = spec.diffusion(&point(&seed, spec.dim()));
            prop_assert!((&a - a.transpose()).amax() == 0.0);
            prop_assert!(a.symmetric_eigenvalues().min() >= -1e-12);
        }
    }

    #[test]
    fn optimal_momentum_has_zero_energy(x in prop::collection::vec(-2.0f64..2.0, 2)) {
        let spec = BuiltinCatalog::twolc();
        let p = -2.0 * spec.drift(&x);
        prop_assert!(hamiltonian(&spec, &x, p.as_slice()).abs() <= 1e-12 * (1.0 + p.norm_squared()));
    }
}
