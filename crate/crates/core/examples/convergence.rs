//! Error decay of the tube-attached minimum action path on the Hopf normal
//! form, where the exact quasi-potential at r = 1.5 is 0.78125.

use qpath::cycle::{find_limit_cycle, CycleOptions};
use qpath::gmam::{convergence_study, default_kappa, GmamOptions, Reference};
use qpath::localqp::Tube;
use qpath::pipeline::local_stages;
use qpath::riccati::PrdeOptions;
use qpath::systems::BuiltinCatalog;

fn main() -> qpath::Result<()> {
    let spec = BuiltinCatalog::hopf();
    let cycle = find_limit_cycle(&spec, &[1.0, 0.0], 6.3, &CycleOptions::default())?;
    let model = local_stages(&spec, cycle, &PrdeOptions::default())?.model(Tube::Radius(1e-3))?;
    let kappa = default_kappa(model.cycle());
    let table = convergence_study(&spec, &model, &[1.5, 0.0], &[40, 80, 160], kappa, Reference::Exact(0.78125), &GmamOptions::default())?;
    println!("{:>5} {:>10} {:>12} {:>10}", "N", "h", "action", "error");
    for r in &table.rows {
        println!("{:>5} {:>10.5} {:>12.7} {:>10.2e}", r.n, r.h, r.action, r.error);
    }
    println!("fitted order {:.3}", table.slope);
    Ok(())
}
