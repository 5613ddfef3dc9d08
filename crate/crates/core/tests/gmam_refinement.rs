use qpath::cycle::{find_limit_cycle, CycleOptions};
use qpath::gmam::{default_kappa, lc_ladder, lqa_ladder, DiscretePath, GmamOptions};
use qpath::localqp::Tube;
use qpath::pipeline::local_stages;
use qpath::riccati::PrdeOptions;
use qpath::systems::BuiltinCatalog;
use qpath::validate::{builtin_stages, HOPF_ESCAPE_VALUE, TWOLC_END};

const NS: [usize; 3] = [40, 80, 160];

fn feasible(p: &DiscretePath) {
    assert!(p.converged, "N = {} stopped with {:?}", p.n(), p.status);
    assert!(p.residuals.arclength <= 1e-10, "arclength residual {:e}", p.residuals.arclength);
    assert!(p.residuals.attachment <= 1e-8, "attachment residual {:e}", p.residuals.attachment);
}

fn nonincreasing(paths: &[DiscretePath]) {
    for w in paths.windows(2) {
        assert!(w[1].total <= w[0].total + 1e-4, "{} then {}", w[0].total, w[1].total);
    }
}

#[test]
fn hopf_cycle_attached_refinement() {
    let spec = BuiltinCatalog::hopf();
    let cycle = find_limit_cycle(&spec, &[1.0, 0.0], 2.0 * std::f64::consts::PI, &CycleOptions::default()).unwrap();
    let ladder = lc_ladder(&spec, &cycle, &[1.5, 0.0], &NS, &GmamOptions::default()).unwrap();
    ladder.iter().for_each(feasible);
    nonincreasing(&ladder);
    assert!((ladder[2].total - HOPF_ESCAPE_VALUE).abs() <= 5e-3, "{}", ladder[2].total);
}

#[test]
fn twolc_cycle_attached_refinement() {
    let spec = BuiltinCatalog::twolc();
    let stages = builtin_stages("twolc", &spec).unwrap();
    let ladder = lc_ladder(&spec, &stages.cycle, &TWOLC_END, &NS, &GmamOptions::default()).unwrap();
    ladder.iter().for_each(feasible);
    nonincreasing(&ladder);
}

#[test]
fn hopf_tube_path_reaches_the_exact_value() {
    let spec = BuiltinCatalog::hopf();
    let cycle = find_limit_cycle(&spec, &[1.0, 0.0], 2.0 * std::f64::consts::PI, &CycleOptions::default()).unwrap();
    let model = local_stages(&spec, cycle, &PrdeOptions::default()).unwrap().model(Tube::Radius(1e-3)).unwrap();
    let ladder = lqa_ladder(&spec, &model, &[1.5, 0.0], &[20, 40, 80, 160], 0.16, &GmamOptions::default()).unwrap();
    let p = ladder.last().unwrap();
    assert!((p.h - 1e-3).abs() < 1e-15);
    feasible(p);
    assert!(p.residuals.sphere <= 1e-8);
    assert!((p.total - HOPF_ESCAPE_VALUE).abs() <= 5e-3, "{}", p.total);
    assert!(p.quadratic > 0.0 && p.geometric > 0.0);
}

#[test]
fn tube_action_stays_below_the_cycle_attached_action() {
    let spec = BuiltinCatalog::hopf();
    let cycle = find_limit_cycle(&spec, &[1.0, 0.0], 2.0 * std::f64::consts::PI, &CycleOptions::default()).unwrap();
    let model = local_stages(&spec, cycle.clone(), &PrdeOptions::default()).unwrap().model(Tube::Radius(1e-3)).unwrap();
    let opts = GmamOptions::default();
    let lqa = lqa_ladder(&spec, &model, &[1.5, 0.0], &[20, 40], default_kappa(&cycle), &opts).unwrap();
    let lc = qpath::gmam::minimize_lc(&spec, &cycle, &[1.5, 0.0], 40, Some(&lqa[1].points), &opts).unwrap();
    assert!(lqa[1].total <= lc.total + 1e-3, "{} vs {}", lqa[1].total, lc.total);
}
