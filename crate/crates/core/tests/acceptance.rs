//! Runs every acceptance criterion and prints one verdict line per criterion.

use qpath::validate;

fn main() {
    let checks: [fn() -> validate::Outcome; 9] = [
        validate::riccati_oracle,
        validate::periods,
        validate::planar_cross_check,
        validate::escape_action,
        validate::convergence_order,
        validate::hamiltonian_conservation,
        validate::antiperiodic,
        validate::property_suites,
        validate::ordering,
    ];
    let mut failed = 0;
    for check in checks {
        let outcome = check();
        println!("{}", outcome.line());
        if !outcome.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
