//! Escape from the upper cycle of the two-cycle system to the saddle, with the
//! path attached to a small tube (plus the local quadratic part) and with the
//! path attached to the cycle itself.

use qpath::gmam::{default_kappa, lqa_ladder, minimize_lc, GmamOptions};
use qpath::localqp::Tube;
use qpath::systems::BuiltinCatalog;
use qpath::validate::builtin_stages;

fn main() -> qpath::Result<()> {
    let spec = BuiltinCatalog::twolc();
    let model = builtin_stages("twolc", &spec)?.model(Tube::Radius(1e-3))?;
    let x_end = [-0.9, 0.6942];
    let kappa = default_kappa(model.cycle());
    let opts = GmamOptions::default();

    let ladder = lqa_ladder(&spec, &model, &x_end, &[20, 40, 80], kappa, &opts)?;
    for p in &ladder {
        println!(
            "tube  N = {:3}: action {:.5} = path {:.5} + quadratic {:.2e}  ({:?}, {} inner steps)",
            p.n(),
            p.total,
            p.geometric,
            p.quadratic,
            p.status,
            p.inner_iterations
        );
    }
    let finest = ladder.last().unwrap();
    let lc = minimize_lc(&spec, model.cycle(), &x_end, finest.n(), Some(&finest.points), &opts)?;
    println!("cycle N = {:3}: action {:.5}", lc.n(), lc.total);
    println!("attachment phase {:.4}, residuals {:?}", finest.tau, finest.residuals);
    Ok(())
}
