//! Builds the Floquet eigenvector frame of the five-dimensional network and
//! shows which basis vectors flip sign after one period.

use qpath::cycle::{locate_cycle, CycleOptions};
use qpath::frame::build_eigen_frame;
use qpath::ode::Tolerances;
use qpath::systems::BuiltinCatalog;

fn main() -> qpath::Result<()> {
    let spec = BuiltinCatalog::net5d();
    let basin = BuiltinCatalog::basin_point("net5d").unwrap();
    let cycle = locate_cycle(&spec, &basin, &CycleOptions::default())?;
    let frame = build_eigen_frame(&spec, &cycle, Tolerances::default())?;

    println!("period {:.5}", cycle.period());
    for (i, f) in frame.flips().iter().enumerate() {
        println!("e{i}: {}", if *f < 0.0 { "anti-periodic" } else { "periodic" });
    }
    println!("largest condition number of E: {:.3}", frame.max_condition());

    // a point near the cycle and back
    let tau = 0.3 * cycle.period();
    let z = [1e-3, -2e-3, 5e-4, 1e-3];
    let x = frame.from_curvilinear(&cycle, tau, &z);
    let (tau_back, z_back) = frame.to_curvilinear(&cycle, x.as_slice())?;
    println!("round trip: tau {tau:.6} -> {tau_back:.6}, z error {:.2e}", (z_back - nalgebra::DVector::from_column_slice(&z)).amax());
    Ok(())
}
