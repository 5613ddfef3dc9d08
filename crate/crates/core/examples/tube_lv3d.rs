//! Level-set tube `Q = delta` around the Lotka-Volterra cycle; its cross
//! sections are strongly elongated.

use qpath::localqp::Tube;
use qpath::systems::BuiltinCatalog;
use qpath::validate::builtin_stages;

fn main() -> qpath::Result<()> {
    let spec = BuiltinCatalog::lv3d();
    let stages = builtin_stages("lv3d", &spec)?;
    let model = stages.model(Tube::Level(2e-5))?;
    let t = model.cycle().period();
    for k in 0..8 {
        let tau = k as f64 * t / 8.0;
        let ev = model.g().eigenvalues(tau);
        println!("tau {tau:5.2}: eig G = [{:.4e}, {:.4e}], aspect {:7.1}", ev[0], ev[1], model.cross_section_aspect(tau));
    }
    let surface = model.tube_surface(64, 24);
    let worst = surface.iter().map(|p| (p.q - 2e-5).abs()).fold(0.0, f64::max);
    println!("{} surface points, max |Q - delta| = {worst:.1e}", surface.len());
    println!("largest aspect ratio {:.1}", model.max_cross_section_aspect());
    Ok(())
}
