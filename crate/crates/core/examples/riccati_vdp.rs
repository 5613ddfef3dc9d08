//! Periodic Riccati solution on the Van der Pol cycle for the three noise cases,
//! compared with the closed form available in the plane.

use qpath::cycle::{locate_cycle, CycleOptions};
use qpath::frame::build_frame;
use qpath::riccati::{analytic_planar_solution, check_conditions, reduced_coefficients, solve_prde, PrdeOptions};
use qpath::systems::{BuiltinCatalog, DiffusionCase};

fn main() -> qpath::Result<()> {
    for case in [DiffusionCase::Isotropic, DiffusionCase::Degenerate, DiffusionCase::Discontinuous] {
        let spec = BuiltinCatalog::vdp(case);
        let cycle = locate_cycle(&spec, &[2.0, 0.0], &CycleOptions::default())?;
        let frame = build_frame(&spec, &cycle)?;
        let coeffs = reduced_coefficients(&spec, &cycle, &frame)?;
        let g = solve_prde(&coeffs, &PrdeOptions::default())?;
        let closed = analytic_planar_solution(&coeffs)?;
        let gap = (0..g.len()).map(|k| (g.sample(k) - closed.sample(k)).amax()).fold(0.0, f64::max);
        let report = check_conditions(&coeffs, 0.0)?;
        println!(
            "case {:<3} G in [{:.4}, {:.4}], {} iterations, closed-form gap {gap:.1e}, stable {}, controllable {}",
            case.label(),
            g.min_eigenvalue(),
            (0..g.len()).map(|k| g.sample(k)[(0, 0)]).fold(f64::MIN, f64::max),
            g.iterations(),
            report.stable,
            report.controllable(),
        );
    }
    Ok(())
}
