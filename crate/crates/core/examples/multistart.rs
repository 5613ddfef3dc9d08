//! Several bent initial paths for the Van der Pol escape problem, solved
//! concurrently; the lowest action wins.

use qpath::gmam::{default_kappa, multistart_lqa, GmamOptions};
use qpath::localqp::Tube;
use qpath::systems::{BuiltinCatalog, DiffusionCase};
use qpath::validate::builtin_stages;

fn main() -> qpath::Result<()> {
    let spec = BuiltinCatalog::vdp(DiffusionCase::Isotropic);
    let model = builtin_stages("vdp", &spec)?.model(Tube::Radius(1e-3))?;
    let n = 40;
    let h = default_kappa(model.cycle()) / n as f64;
    let ms = multistart_lqa(&spec, &model, &[2.0, -2.5], n, h, 6, 7, &GmamOptions::default())?;
    for (k, t) in ms.totals.iter().enumerate() {
        match t {
            Some(v) => println!("start {k}: action {v:.6}"),
            None => println!("start {k}: no converged solution"),
        }
    }
    println!("best: start {} with {:.6}", ms.best_index, ms.best.total);
    Ok(())
}
