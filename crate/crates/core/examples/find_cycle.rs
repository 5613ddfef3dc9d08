//! Locates the Van der Pol limit cycle and prints its Floquet multipliers.

use qpath::cycle::{is_asymptotically_stable, locate_cycle, CycleOptions};
use qpath::systems::{BuiltinCatalog, DiffusionCase};

fn main() -> qpath::Result<()> {
    let spec = BuiltinCatalog::vdp(DiffusionCase::Isotropic);
    let cycle = locate_cycle(&spec, &[2.0, 0.0], &CycleOptions::default())?;
    println!("period     {:.6}", cycle.period());
    println!("arclength  {:.6}", cycle.arclength());
    println!("residual   {:.2e} after {} Newton steps", cycle.residual(), cycle.newton_iterations());
    for m in cycle.multipliers() {
        println!("multiplier {:+.6} {:+.6}i  |mu| = {:.3e}", m.re, m.im, m.norm());
    }
    let report = is_asymptotically_stable(&cycle);
    println!("stability  {:?} (margin {:.4})", report.verdict, report.margin);
    Ok(())
}
