//! Shoots an extremal off the tube around the unit circle of the Hopf normal
//! form and compares the accumulated action with `V(r) = r^4/2 - r^2 + 1/2`.

use qpath::cycle::{find_limit_cycle, CycleOptions};
use qpath::hamiltonian::{default_radius, shoot, ShootOptions};
use qpath::localqp::Tube;
use qpath::pipeline::local_stages;
use qpath::riccati::PrdeOptions;
use qpath::systems::BuiltinCatalog;

fn main() -> qpath::Result<()> {
    let spec = BuiltinCatalog::hopf();
    let cycle = find_limit_cycle(&spec, &[1.0, 0.0], 6.3, &CycleOptions::default())?;
    let model = local_stages(&spec, cycle, &PrdeOptions::default())?.model(Tube::Radius(1e-3))?;
    let h = default_radius(&model);
    let radius = |x: &[f64]| x[0].hypot(x[1]);
    let outward = if radius(model.point(0.0, &[h]).as_slice()) > 1.0 { 1.0 } else { -1.0 };
    let stop = |x: &[f64], _: &[f64]| radius(x) > 1.6;
    let ext = shoot(&spec, &model, 0.0, &[outward], h, 40.0, &ShootOptions::default(), Some(&stop))?;

    println!("{} steps, max |H| = {:.2e}", ext.steps, ext.max_abs_h);
    for r in [1.1, 1.2, 1.3, 1.4, 1.5] {
        let (t, v) = ext.first_crossing(radius, r).expect("extremal passes r");
        let exact = 0.5 * r.powi(4) - r * r + 0.5;
        println!("r = {r:.1}: t = {t:6.3}, V = {v:.7}, exact {exact:.7}");
    }
    Ok(())
}
