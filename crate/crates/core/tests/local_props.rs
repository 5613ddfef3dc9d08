use std::sync::OnceLock;

use nalgebra::DVector;
use proptest::prelude::*;
use qpath::cycle::CycleOptions;
use qpath::localqp::{LocalModel, Tube};
use qpath::pipeline::run_stages;
use qpath::riccati::PrdeOptions;
use qpath::systems::BuiltinCatalog;

fn lv3d() -> &'static LocalModel {
    static MODEL: OnceLock<LocalModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let spec = BuiltinCatalog::lv3d();
        let basin = BuiltinCatalog::basin_point("lv3d").unwrap();
        run_stages(&spec, &basin, &CycleOptions::default(), &PrdeOptions::default())
            .unwrap()
            .model(Tube::Radius(1e-3))
            .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn curvilinear_round_trip(s in 0.0f64..1.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let m = lv3d();
        let tau = s * m.cycle().period();
        let z = [2e-3 * a, 2e-3 * b];
        let x = m.point(tau, &z);
        let (tau_back, z_back) = m.frame().to_curvilinear(m.cycle(), x.as_slice()).unwrap();
        let dt = (tau_back - tau).rem_euclid(m.cycle().period());
        prop_assert!(dt.min(m.cycle().period() - dt) <= 1e-8);
        prop_assert!((z_back - DVector::from_column_slice(&z)).amax() <= 1e-8);
    }

    #[test]
    fn quadratic_form_is_even_and_positive(s in 0.0f64..1.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let m = lv3d();
        let tau = s * m.cycle().period();
        let q = m.quadratic_qp(tau, &[a, b]);
        prop_assert_eq!(q, m.quadratic_qp(tau, &[-a, -b]));
        prop_assert_eq!(m.quadratic_qp(tau, &[0.0, 0.0]), 0.0);
        if a != 0.0 || b != 0.0 {
            prop_assert!(q > 0.0);
        }
    }

    #[test]
    fn momentum_matches_normal_gradient(s in 0.0f64..1.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let m = lv3d();
        let tau = s * m.cycle().period();
        let z = [1e-3 * a, 1e-3 * b];
        let p = m.momentum_approx(tau, &z);
        let gz = m.g_at(tau) * DVector::from_column_slice(&z);
        let e = m.frame().basis(tau);
        for j in 1..3 {
            prop_assert!((p.dot(&e.column(j)) - gz[j - 1]).abs() <= 1e-10);
        }
    }
}

#[test]
fn tube_surface_points_lie_on_the_tube() {
    let m = lv3d().clone().with_tube(Tube::Radius(1e-3));
    for p in m.tube_surface(32, 12) {
        let (_, z) = m.frame().to_curvilinear(m.cycle(), &p.x).unwrap();
        assert!((z.norm() - 1e-3).abs() <= 1e-8);
    }
}
